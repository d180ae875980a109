//! Experiment drivers behind the `scalemat` CLI.
//!
//! Each sweep draws one set of replications per (model, Σ) combination and
//! evaluates every estimator of the sweep on those same draws, so PRIALs
//! across rows share common random numbers. Output tables are deterministic
//! functions of the configuration.

use std::fmt::Write as _;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::estimators::{
    b0_bound, b1_bound, optimal_a, ConstantWeight, EstimatorSpec, ShrinkagePsi, SpectralWeight,
};
use crate::identity::{check_ties, g_psi, haff_improvement_margin, stein_haff_check, GVariant};
use crate::matrix::{eigen_sym, gram, rel_frobenius, sigma_build, sym_sqrt, SigmaKind, SigmaSpec};
use crate::model::{canonical_reduce, ModelSpec};
use crate::risk::{paired_losses, prial, risk_optimality_scan, Candidate, Design, LossKind};
use crate::Matrix;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default α grid of `sweep-alpha` and `compare-loss`.
pub const DEFAULT_ALPHAS: [f64; 12] =
    [0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];

/// Number of points of the default `sweep-b` grid over `(0, 4·b₀]`.
pub const DEFAULT_B_POINTS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BChoice {
    Value(f64),
    B0,
    B1,
}

impl BChoice {
    pub fn resolve(self, v: usize, r: usize) -> f64 {
        match self {
            BChoice::Value(b) => b,
            BChoice::B0 => b0_bound(v, r),
            BChoice::B1 => b1_bound(v, r),
        }
    }

    pub fn token(self) -> String {
        match self {
            BChoice::Value(b) => format!("{b}"),
            BChoice::B0 => "b0".into(),
            BChoice::B1 => "b1".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SweepB,
    SweepAlpha,
    CompareLoss,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SweepB => "sweep-b",
            Command::SweepAlpha => "sweep-alpha",
            Command::CompareLoss => "compare-loss",
        }
    }
}

/// Everything that determines a sweep's output.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub p: usize,
    pub m: usize,
    pub models: Vec<ModelSpec>,
    /// Σ structures; the dimension is `p`.
    pub sigmas: Vec<SigmaKind>,
    /// `None` selects the command's default grid.
    pub alphas: Option<Vec<f64>>,
    /// `None` selects the command's default.
    pub b: Option<Vec<BChoice>>,
    pub reps: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn v(&self) -> usize {
        self.p.max(self.m)
    }

    pub fn r(&self) -> usize {
        self.p.min(self.m)
    }

    fn validate(&self, cmd: Command) -> Result<()> {
        if self.p == 0 || self.m == 0 {
            return Err(Error::invalid("p/m", "dimensions must be at least 1"));
        }
        if self.reps < 2 {
            return Err(Error::invalid("reps", "need at least 2 replications"));
        }
        if self.models.is_empty() || self.sigmas.is_empty() {
            return Err(Error::invalid(
                "dist/sigma",
                "at least one model and one Σ structure",
            ));
        }
        for kind in &self.sigmas {
            sigma_build(&SigmaSpec {
                kind: kind.clone(),
                p: self.p,
            })?;
        }
        if let Some(alphas) = &self.alphas {
            if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
                return Err(Error::invalid("alpha", "values must be finite and > 0"));
            }
        }
        if let Some(bs) = &self.b {
            let (v, r) = (self.v(), self.r());
            if bs.is_empty()
                || bs
                    .iter()
                    .any(|b| !(b.resolve(v, r) >= 0.0) || !b.resolve(v, r).is_finite())
            {
                return Err(Error::invalid("b", "values must be finite and >= 0"));
            }
        }
        match cmd {
            Command::SweepB => {
                if self.models.len() != 1 || self.sigmas.len() != 1 {
                    return Err(Error::invalid(
                        "dist/sigma",
                        "sweep-b takes a single model and Σ",
                    ));
                }
                if self.alphas.as_ref().is_some_and(|a| a.len() != 1) {
                    return Err(Error::invalid("alpha", "sweep-b takes a single α"));
                }
                if self.b.is_none() && b0_bound(self.v(), self.r()) <= 0.0 {
                    return Err(Error::invalid(
                        "b",
                        "default grid is empty because b0 = 0 (r = 1)",
                    ));
                }
            }
            Command::SweepAlpha => {}
            Command::CompareLoss => {
                if self.models.iter().any(|m| *m != ModelSpec::Gaussian) {
                    return Err(Error::invalid(
                        "dist",
                        "compare-loss is defined for the Gaussian model",
                    ));
                }
                if self.b.is_some() {
                    return Err(Error::invalid("b", "compare-loss always uses b0 and b1"));
                }
            }
        }
        Ok(())
    }

    /// One-line description used as the CSV comment.
    pub fn describe(&self, cmd: Command) -> String {
        let mut s = format!(
            "# scalemat {VERSION} {} p={} m={}",
            cmd.name(),
            self.p,
            self.m
        );
        let dists: Vec<String> = self.models.iter().map(model_token).collect();
        let sigmas: Vec<String> = self.sigmas.iter().map(sigma_token).collect();
        let _ = write!(s, " dist={} sigma={}", dists.join(","), sigmas.join(","));
        match &self.alphas {
            Some(a) => {
                let a: Vec<String> = a.iter().map(|x| format!("{x}")).collect();
                let _ = write!(s, " alpha={}", a.join(","));
            }
            None => s.push_str(" alpha=default"),
        }
        match &self.b {
            Some(b) => {
                let b: Vec<String> = b.iter().map(|x| x.token()).collect();
                let _ = write!(s, " b={}", b.join(","));
            }
            None => s.push_str(" b=default"),
        }
        let _ = write!(s, " reps={} seed={}", self.reps, self.seed);
        s
    }
}

pub fn model_token(model: &ModelSpec) -> String {
    match model {
        ModelSpec::Gaussian => "gaussian".into(),
        ModelSpec::StudentT(k) => format!("student({})", k.get()),
    }
}

pub fn sigma_token(kind: &SigmaKind) -> String {
    match kind {
        SigmaKind::Identity => "identity".into(),
        SigmaKind::Ar1 { rho } => format!("ar1({rho})"),
        SigmaKind::Dense(_) => "dense".into(),
    }
}

fn df_field(model: &ModelSpec) -> String {
    match model {
        ModelSpec::Gaussian => String::new(),
        ModelSpec::StudentT(k) => format!("{}", k.get()),
    }
}

fn dist_field(model: &ModelSpec) -> &'static str {
    match model {
        ModelSpec::Gaussian => "gaussian",
        ModelSpec::StudentT(_) => "student",
    }
}

fn sigma_field(kind: &SigmaKind) -> &'static str {
    match kind {
        SigmaKind::Identity => "identity",
        SigmaKind::Ar1 { .. } => "ar1",
        SigmaKind::Dense(_) => "dense",
    }
}

fn rho_field(kind: &SigmaKind) -> String {
    match kind {
        SigmaKind::Ar1 { rho } => format!("{rho}"),
        _ => String::new(),
    }
}

/// A CSV table with a leading `#` comment line.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub comment: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.comment)?;
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Column index by header name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn certified(alpha: f64, b: f64, v: usize, r: usize) -> bool {
    alpha >= 1.0 && b > 0.0 && b <= b0_bound(v, r)
}

/// Baseline plus one Haff estimator per `(alpha, b)`, all under `loss`.
fn haff_candidates(design: &Design, loss: LossKind, grid: &[(f64, f64)]) -> Result<Vec<Candidate>> {
    let a0 = design.base_scale(loss);
    let mut out = vec![Candidate {
        spec: EstimatorSpec::Usual { a: a0 },
        a0,
        loss,
    }];
    for &(alpha, b) in grid {
        out.push(Candidate {
            spec: EstimatorSpec::OrthInvariant {
                psi: ShrinkagePsi::haff(alpha, b)?,
            },
            a0,
            loss,
        });
    }
    Ok(out)
}

const PRIAL_COLUMNS: [&str; 5] = ["prial_percent", "prial_se", "base_mean", "alt_mean", "reps"];

fn prial_fields(base: &[f64], alt: &[f64], seed: u64) -> Result<Vec<String>> {
    let rep = prial(base, alt, seed)?;
    Ok(vec![
        f(rep.prial_percent),
        f(rep.std_error_prial),
        f(rep.baseline_mean),
        f(rep.alt_mean),
        rep.replications.to_string(),
    ])
}

/// PRIAL of `Σ̂_{α,b}` over `a₀S` as a function of `b` (data-based loss).
pub fn sweep_b(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate(Command::SweepB)?;
    let (v, r) = (cfg.v(), cfg.r());
    let alpha = cfg.alphas.as_ref().map_or(1.0, |a| a[0]);
    let bs: Vec<f64> = match &cfg.b {
        Some(list) => list.iter().map(|b| b.resolve(v, r)).collect(),
        None => {
            let b0 = b0_bound(v, r);
            (1..=DEFAULT_B_POINTS)
                .map(|k| b0 * k as f64 / 10.0)
                .collect()
        }
    };
    let sigma = SigmaSpec {
        kind: cfg.sigmas[0].clone(),
        p: cfg.p,
    };
    let design = Design::new(cfg.models[0], &sigma, cfg.m)?;
    let grid: Vec<(f64, f64)> = bs.iter().map(|&b| (alpha, b)).collect();
    let cands = haff_candidates(&design, LossKind::DataBased, &grid)?;
    let losses = paired_losses(&design, &cands, cfg.reps, cfg.seed)?.values;

    let mut rows = Vec::with_capacity(bs.len());
    for (k, &b) in bs.iter().enumerate() {
        let mut row = vec![f(b)];
        row.extend(prial_fields(&losses[0], &losses[k + 1], cfg.seed)?);
        row.push(cfg.seed.to_string());
        row.push(certified(alpha, b, v, r).to_string());
        rows.push(row);
    }
    let mut header = vec!["b"];
    header.extend(PRIAL_COLUMNS);
    header.extend(["seed", "certified"]);
    Ok(Table {
        comment: cfg.describe(Command::SweepB),
        header,
        rows,
    })
}

/// PRIAL of `Σ̂_{α,b}` over `a₀S` as a function of `α`, for every model and Σ.
pub fn sweep_alpha(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate(Command::SweepAlpha)?;
    let (v, r) = (cfg.v(), cfg.r());
    let alphas = cfg
        .alphas
        .clone()
        .unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
    let bs: Vec<f64> = cfg
        .b
        .clone()
        .unwrap_or_else(|| vec![BChoice::B0])
        .iter()
        .map(|b| b.resolve(v, r))
        .collect();
    let grid: Vec<(f64, f64)> = bs
        .iter()
        .flat_map(|&b| alphas.iter().map(move |&a| (a, b)))
        .collect();

    let mut rows = Vec::new();
    for model in &cfg.models {
        for kind in &cfg.sigmas {
            let sigma = SigmaSpec {
                kind: kind.clone(),
                p: cfg.p,
            };
            let design = Design::new(*model, &sigma, cfg.m)?;
            let cands = haff_candidates(&design, LossKind::DataBased, &grid)?;
            let losses = paired_losses(&design, &cands, cfg.reps, cfg.seed)?.values;
            for (k, &(alpha, b)) in grid.iter().enumerate() {
                let mut row = vec![
                    dist_field(model).to_string(),
                    df_field(model),
                    sigma_field(kind).to_string(),
                    rho_field(kind),
                    f(alpha),
                    f(b),
                ];
                row.extend(prial_fields(&losses[0], &losses[k + 1], cfg.seed)?);
                row.push(cfg.seed.to_string());
                row.push(certified(alpha, b, v, r).to_string());
                rows.push(row);
            }
        }
    }
    let mut header = vec!["dist", "df", "sigma", "rho", "alpha", "b"];
    header.extend(PRIAL_COLUMNS);
    header.extend(["seed", "certified"]);
    Ok(Table {
        comment: cfg.describe(Command::SweepAlpha),
        header,
        rows,
    })
}

/// For each `α`: `Σ̂_{α,b₀}` vs `S/v` under the data-based loss and
/// `Σ̂_{α,b₁}` vs `S/(v+r+1)` under the quadratic loss, on shared draws.
pub fn compare_loss(cfg: &ExperimentConfig) -> Result<Table> {
    cfg.validate(Command::CompareLoss)?;
    let (v, r) = (cfg.v(), cfg.r());
    let alphas = cfg
        .alphas
        .clone()
        .unwrap_or_else(|| DEFAULT_ALPHAS.to_vec());
    let (b0, b1) = (b0_bound(v, r), b1_bound(v, r));

    let mut rows = Vec::new();
    for model in &cfg.models {
        for kind in &cfg.sigmas {
            let sigma = SigmaSpec {
                kind: kind.clone(),
                p: cfg.p,
            };
            let design = Design::new(*model, &sigma, cfg.m)?;
            let db_grid: Vec<(f64, f64)> = alphas.iter().map(|&a| (a, b0)).collect();
            let q_grid: Vec<(f64, f64)> = alphas.iter().map(|&a| (a, b1)).collect();
            let mut cands = haff_candidates(&design, LossKind::DataBased, &db_grid)?;
            let q_offset = cands.len();
            cands.extend(haff_candidates(&design, LossKind::Quadratic, &q_grid)?);
            let losses = paired_losses(&design, &cands, cfg.reps, cfg.seed)?.values;

            for (k, &alpha) in alphas.iter().enumerate() {
                for (loss, offset, b) in [
                    (LossKind::DataBased, 0, b0),
                    (LossKind::Quadratic, q_offset, b1),
                ] {
                    let mut row = vec![
                        sigma_field(kind).to_string(),
                        rho_field(kind),
                        f(alpha),
                        loss.name().to_string(),
                        f(b),
                    ];
                    row.extend(prial_fields(
                        &losses[offset],
                        &losses[offset + k + 1],
                        cfg.seed,
                    )?);
                    row.push(cfg.seed.to_string());
                    row.push(certified(alpha, b, v, r).to_string());
                    rows.push(row);
                }
            }
        }
    }
    let mut header = vec!["sigma", "rho", "alpha", "loss", "b"];
    header.extend(PRIAL_COLUMNS);
    header.extend(["seed", "certified"]);
    Ok(Table {
        comment: cfg.describe(Command::CompareLoss),
        header,
        rows,
    })
}

pub fn run(cmd: Command, cfg: &ExperimentConfig) -> Result<Table> {
    match cmd {
        Command::SweepB => sweep_b(cfg),
        Command::SweepAlpha => sweep_alpha(cfg),
        Command::CompareLoss => compare_loss(cfg),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    /// Dimensions of the optimality scan.
    pub p: usize,
    pub m: usize,
    /// Replications of each Monte-Carlo check.
    pub reps: usize,
    pub seed: u64,
    /// Multiple of `a₀` claimed optimal by the scan; `1` is the correct value.
    pub a_scale: f64,
    /// Random instances of the matrix and g(Ψ) suites.
    pub instances: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            p: 5,
            m: 15,
            reps: 5000,
            seed: 42,
            a_scale: 1.0,
            instances: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(CheckOutcome {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{tag} {}: {}", c.name, c.detail);
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(s, "{} checks, {failed} failed", self.checks.len());
        s
    }
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Matrix::from_row_slice(rows, cols, &data)
}

/// Worst-case errors of the matrix primitives over random Gram matrices.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MatrixSuiteStats {
    pub instances: usize,
    pub penrose: [f64; 4],
    pub reconstruction: f64,
    pub trace_rank_gap: f64,
    pub orthogonality: f64,
    pub sqrt_roundtrip: f64,
    pub rank_mismatches: usize,
}

impl MatrixSuiteStats {
    pub fn passed(&self) -> bool {
        self.penrose.iter().all(|e| *e <= 1e-8)
            && self.reconstruction <= 1e-8
            && self.trace_rank_gap <= 1e-8
            && self.orthogonality <= 1e-10
            && self.sqrt_roundtrip <= 1e-10
            && self.rank_mismatches == 0
    }
}

/// Penrose conditions, reconstruction, `tr(S⁺S) = r`, semi-orthogonality and
/// square roots on `instances` random `S = UᵀU` in both regimes `p ≶ m`.
pub fn matrix_primitive_suite(instances: usize, seed: u64) -> Result<MatrixSuiteStats> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = MatrixSuiteStats {
        instances,
        ..Default::default()
    };
    for _ in 0..instances {
        let p = rng.random_range(1..=30);
        let m = rng.random_range(1..=30);
        let u = normal_matrix(m, p, &mut rng);
        let s = gram(&u);
        let es = eigen_sym(&s)?;
        if es.rank() != p.min(m) {
            st.rank_mismatches += 1;
        }
        let pinv = es.pinv();
        let sp = &s * &pinv;
        let ps = &pinv * &s;
        let errs = [
            rel_frobenius(&(&sp * &s), &s),
            rel_frobenius(&(&ps * &pinv), &pinv),
            rel_frobenius(&sp.transpose(), &sp),
            rel_frobenius(&ps.transpose(), &ps),
        ];
        for (w, e) in st.penrose.iter_mut().zip(errs) {
            *w = w.max(e);
        }
        st.reconstruction = st.reconstruction.max(rel_frobenius(&es.reconstruct(), &s));
        st.trace_rank_gap = st.trace_rank_gap.max((ps.trace() - es.rank() as f64).abs());
        let r = es.rank();
        st.orthogonality = st
            .orthogonality
            .max((es.vectors.tr_mul(&es.vectors) - Matrix::identity(r, r)).amax());

        let rho = rng.random_range(-0.95..0.95);
        let sigma = sigma_build(&SigmaSpec::ar1(rho, p))?;
        let root = sym_sqrt(&sigma)?;
        st.sqrt_roundtrip = st
            .sqrt_roundtrip
            .max(rel_frobenius(&(&root * &root), &sigma));
    }
    Ok(st)
}

/// Counts random Haff triples violating `g ≤ margin + 1e-9` or `margin ≤ 0`.
/// Spectra with near-ties are redrawn.
pub fn g_bound_sweep(v: usize, r: usize, instances: usize, seed: u64) -> Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b0 = b0_bound(v, r);
    let mut failures = 0;
    for _ in 0..instances {
        let l = loop {
            let mut l: Vec<f64> = (0..r)
                .map(|_| 10f64.powf(rng.random_range(-3.0..3.0)))
                .collect();
            l.sort_by(|a, b| b.total_cmp(a));
            if check_ties(&l).is_ok() {
                break l;
            }
        };
        let alpha = rng.random_range(1.0..=10.0);
        // b uniform on (0, b0]
        let b = b0 * (1.0 - rng.random::<f64>());
        let psi = ShrinkagePsi::haff(alpha, b)?;
        let margin = haff_improvement_margin(v, r, b);
        let g = g_psi(&l, &psi, v, b, GVariant::PRINTED)?;
        if !(g <= margin + 1e-9) || !(margin <= 1e-12) {
            failures += 1;
        }
    }
    Ok(failures)
}

/// The self-check suite run by `scalemat verify`.
pub fn verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let seed = cfg.seed;

    // Stein–Haff identity, Gaussian model.
    let haff = ShrinkagePsi::haff(1.0, 1.0)?;
    let settings = [
        (5usize, 10usize, SigmaKind::Identity),
        (10, 4, SigmaKind::Ar1 { rho: 0.9 }),
        (4, 12, SigmaKind::Identity),
    ];
    for (k, (p, m, kind)) in settings.iter().enumerate() {
        let sigma = SigmaSpec {
            kind: kind.clone(),
            p: *p,
        };
        let (v, r) = (p.max(m), p.min(m));
        let phis: [(&str, &(dyn SpectralWeight + Sync)); 2] =
            [("identity", &ConstantWeight(1.0)), ("haff(1,1)", &haff)];
        for (name, phi) in phis {
            let res = stein_haff_check(&sigma, *m, phi, cfg.reps, seed.wrapping_add(k as u64))?;
            let mut ok = res.z_score.abs() < 4.0;
            if name == "identity" {
                ok &= res.rhs_se == 0.0 && res.rhs_mean == (r * v) as f64;
            }
            report.push(
                format!(
                    "stein-haff p={p} m={m} sigma={} phi={name}",
                    sigma_token(kind)
                ),
                ok,
                format!(
                    "lhs={:.4}±{:.4} rhs={:.4}±{:.4} z={:.3}",
                    res.lhs_mean, res.lhs_se, res.rhs_mean, res.rhs_se, res.z_score
                ),
            );
        }
    }

    // g(Ψ) certificate for the Haff family.
    for (k, &(v, r)) in [(25usize, 10usize), (50, 20), (10, 5)].iter().enumerate() {
        let failures = g_bound_sweep(v, r, cfg.instances, seed.wrapping_add(100 + k as u64))?;
        report.push(
            format!("g-bound v={v} r={r}"),
            failures == 0,
            format!(
                "{failures} of {} random triples violate g <= margin <= 0",
                cfg.instances
            ),
        );
    }

    // Optimality of a₀ among multiples of S.
    let models = [ModelSpec::Gaussian, ModelSpec::student_t(5.0)?];
    let sigmas = [SigmaKind::Identity, SigmaKind::Ar1 { rho: 0.9 }];
    for model in &models {
        for kind in &sigmas {
            let sigma = SigmaSpec {
                kind: kind.clone(),
                p: cfg.p,
            };
            let design = Design::new(*model, &sigma, cfg.m)?;
            let claimed = cfg.a_scale * optimal_a(model, cfg.p, cfg.m);
            let grid: Vec<f64> = [0.5, 0.75, 1.0, 1.25, 1.5]
                .iter()
                .map(|k| k * claimed)
                .collect();
            let scan = risk_optimality_scan(
                &design,
                &grid,
                LossKind::DataBased,
                cfg.reps,
                seed.wrapping_add(200),
            )?;
            let risks: Vec<String> = scan
                .rows
                .iter()
                .map(|(a, r)| format!("{a:.5}:{r:.5}"))
                .collect();
            report.push(
                format!(
                    "a0-optimality dist={} sigma={} p={} m={}",
                    model_token(model),
                    sigma_token(kind),
                    cfg.p,
                    cfg.m
                ),
                scan.argmin == claimed,
                format!(
                    "claimed={claimed:.6} argmin={:.6} [{}]",
                    scan.argmin,
                    risks.join(" ")
                ),
            );
        }
    }

    // Matrix primitives.
    let st = matrix_primitive_suite(cfg.instances, seed.wrapping_add(300))?;
    report.push(
        "matrix-primitives",
        st.passed(),
        format!(
            "penrose={:.1e}/{:.1e}/{:.1e}/{:.1e} reconstruction={:.1e} tr(S+S)-r={:.1e} sqrt={:.1e} rank-mismatch={}",
            st.penrose[0],
            st.penrose[1],
            st.penrose[2],
            st.penrose[3],
            st.reconstruction,
            st.trace_rank_gap,
            st.sqrt_roundtrip,
            st.rank_mismatches
        ),
    );

    // Regression path: canonical reduction against the projector formula.
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(400));
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let q = rng.random_range(1..=5);
        let n = q + rng.random_range(1..=20);
        let p = rng.random_range(1..=8);
        let x = normal_matrix(n, q, &mut rng);
        let y = normal_matrix(n, p, &mut rng);
        let cs = canonical_reduce(&y, &x)?;
        let xtx_inv = x.tr_mul(&x).try_inverse().ok_or(Error::RankDeficient {
            column: 0,
            diag: 0.0,
        })?;
        let resid = Matrix::identity(n, n) - &x * xtx_inv * x.transpose();
        worst = worst.max(rel_frobenius(&cs.s, &(y.transpose() * resid * &y)));
    }
    report.push(
        "canonical-reduction",
        worst < 1e-8,
        format!("max relative error {worst:.2e}"),
    );

    Ok(report)
}
