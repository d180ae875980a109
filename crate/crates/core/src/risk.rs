//! Losses, paired Monte-Carlo risk and PRIAL.
//!
//! Every replication `rep` draws from its own generator
//! [`replication_rng`]`(seed, rep)` and results are reduced in replication
//! order, so the output does not depend on the rayon pool size.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{estimate_with, optimal_a, quadratic_loss_a, EstimatorSpec};
use crate::matrix::{
    eigen_sym, sigma_build, sym_sqrt, symmetrize, trace_product, EigenSystem, SigmaSpec,
};
use crate::model::{replication_rng, CanonicalSample, ModelSpec};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `tr(S⁺Σ(Σ⁻¹Σ̂ − I)²)`
    DataBased,
    /// `tr((Σ⁻¹Σ̂ − I)²)`
    Quadratic,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::DataBased => "data_based",
            LossKind::Quadratic => "quadratic",
        }
    }
}

/// Σ together with `Σ⁻¹` and `Σ^{1/2}`, computed once per experiment.
#[derive(Debug, Clone)]
pub struct SigmaContext {
    pub sigma: Matrix,
    pub sigma_inv: Matrix,
    pub sqrt_sigma: Matrix,
}

impl SigmaContext {
    pub fn new(sigma: Matrix) -> Result<Self> {
        let es = eigen_sym(&sigma)?;
        if es.rank() < sigma.nrows() {
            return Err(Error::NotPsd { eigenvalue: 0.0 });
        }
        let sigma_inv = es.pinv();
        let sqrt_sigma = sym_sqrt(&sigma)?;
        Ok(SigmaContext {
            sigma,
            sigma_inv,
            sqrt_sigma,
        })
    }

    pub fn from_spec(spec: &SigmaSpec) -> Result<Self> {
        Self::new(sigma_build(spec)?)
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }
}

/// Loss of `sigma_hat`, evaluated as `tr(D Σ⁻¹ D W)` with `D = Σ̂ − Σ` and
/// `W = S⁺` (data-based) or `W = Σ⁻¹` (quadratic).
pub fn loss(
    kind: LossKind,
    sigma_hat: &Matrix,
    sigma: &Matrix,
    sigma_inv: &Matrix,
    s_pinv: Option<&Matrix>,
) -> Result<f64> {
    let p = sigma.nrows();
    for (name, m) in [("sigma_hat", sigma_hat), ("sigma_inv", sigma_inv)] {
        if m.shape() != (p, p) {
            return Err(Error::DimensionMismatch {
                expected: format!("{name} {p}x{p}"),
                found: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
    }
    let weight = match kind {
        LossKind::Quadratic => sigma_inv,
        LossKind::DataBased => {
            let w = s_pinv.ok_or_else(|| Error::invalid("s_pinv", "data-based loss needs S⁺"))?;
            if w.shape() != (p, p) {
                return Err(Error::DimensionMismatch {
                    expected: format!("s_pinv {p}x{p}"),
                    found: format!("{}x{}", w.nrows(), w.ncols()),
                });
            }
            w
        }
    };
    let d = sigma_hat - sigma;
    let inner = symmetrize(&(&d * sigma_inv * &d));
    Ok(trace_product(&inner, weight))
}

/// Fixed part of an experiment: model, Σ and dimensions.
#[derive(Debug, Clone)]
pub struct Design {
    pub model: ModelSpec,
    pub sigma: SigmaContext,
    pub m: usize,
}

/// One replication: sample, its truncated eigensystem and `S⁺`.
#[derive(Debug, Clone)]
pub struct Draw {
    pub sample: CanonicalSample,
    pub eigen: EigenSystem,
    pub s_pinv: Matrix,
}

impl Design {
    pub fn new(model: ModelSpec, sigma: &SigmaSpec, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "must be at least 1"));
        }
        Ok(Design {
            model,
            sigma: SigmaContext::from_spec(sigma)?,
            m,
        })
    }

    pub fn p(&self) -> usize {
        self.sigma.dim()
    }

    /// `v = max(p, m)`
    pub fn v(&self) -> usize {
        self.p().max(self.m)
    }

    /// `r = min(p, m)`
    pub fn r(&self) -> usize {
        self.p().min(self.m)
    }

    /// Scale used by the usual and shrinkage estimators under `kind`.
    pub fn base_scale(&self, kind: LossKind) -> f64 {
        match kind {
            LossKind::DataBased => optimal_a(&self.model, self.p(), self.m),
            LossKind::Quadratic => quadratic_loss_a(&self.model, self.p(), self.m),
        }
    }

    pub fn draw(&self, seed: u64, rep: usize) -> Result<Draw> {
        let mut rng = replication_rng(seed, rep as u64);
        let sample = self
            .model
            .sample_canonical(self.m, &self.sigma.sqrt_sigma, &mut rng);
        let eigen = eigen_sym(&sample.s)?;
        let s_pinv = eigen.pinv();
        Ok(Draw {
            sample,
            eigen,
            s_pinv,
        })
    }

    pub fn loss(&self, kind: LossKind, sigma_hat: &Matrix, draw: &Draw) -> Result<f64> {
        loss(
            kind,
            sigma_hat,
            &self.sigma.sigma,
            &self.sigma.sigma_inv,
            Some(&draw.s_pinv),
        )
    }

    pub fn estimate(&self, spec: &EstimatorSpec, a0: f64, draw: &Draw) -> Result<Matrix> {
        estimate_with(spec, &draw.sample.s, &draw.eigen, self.v(), a0)
    }
}

/// Per-replication outputs in replication order, with degenerate draws removed.
#[derive(Debug, Clone)]
pub struct Replicated<T> {
    pub values: Vec<T>,
    pub skipped: usize,
}

/// Runs `f` on replications `0..reps`, in parallel on the current rayon pool.
///
/// Degenerate draws (rank 0, near-tied spectrum) are skipped and counted;
/// the run fails when they reach 1% of `reps`.
pub fn replicate<T, F>(reps: usize, f: F) -> Result<Replicated<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = (0..reps).into_par_iter().map(&f).collect();
    let mut values = Vec::with_capacity(reps);
    let mut skipped = 0;
    for res in results {
        match res {
            Ok(v) => values.push(v),
            Err(e) if e.is_degenerate_draw() => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if skipped > 0 && skipped * 100 >= reps {
        return Err(Error::TooManyDegenerate { skipped, reps });
    }
    Ok(Replicated { values, skipped })
}

/// Runs `f` on every draw of `design`.
pub fn replicate_draws<T, F>(design: &Design, reps: usize, seed: u64, f: F) -> Result<Replicated<T>>
where
    T: Send,
    F: Fn(&Draw) -> Result<T> + Sync,
{
    replicate(reps, |rep| f(&design.draw(seed, rep)?))
}

/// An estimator evaluated under a loss with a given scale `a₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub spec: EstimatorSpec,
    pub a0: f64,
    pub loss: LossKind,
}

/// Losses of every candidate on common draws: `result[c][k]` is the loss of
/// candidate `c` on the `k`-th non-degenerate replication.
pub fn paired_losses(
    design: &Design,
    candidates: &[Candidate],
    reps: usize,
    seed: u64,
) -> Result<Replicated<Vec<f64>>> {
    let per_rep = replicate_draws(design, reps, seed, |draw| {
        candidates
            .iter()
            .map(|c| {
                let est = design.estimate(&c.spec, c.a0, draw)?;
                design.loss(c.loss, &est, draw)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let mut columns = vec![Vec::with_capacity(per_rep.values.len()); candidates.len()];
    for row in per_rep.values {
        for (col, x) in columns.iter_mut().zip(row) {
            col.push(x);
        }
    }
    Ok(Replicated {
        values: columns,
        skipped: per_rep.skipped,
    })
}

/// Sample mean and standard error `sd/√n`.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub losses: Vec<f64>,
    pub skipped: usize,
}

/// Monte-Carlo risk of one estimator. Orthogonally invariant estimators use
/// `a₀` for the data-based loss and `1/(K*(p+m+1))` for the quadratic loss.
pub fn mc_risk(
    model: ModelSpec,
    sigma: &SigmaSpec,
    m: usize,
    estimator: EstimatorSpec,
    loss_kind: LossKind,
    reps: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    if reps < 2 {
        return Err(Error::invalid("reps", "need at least 2 replications"));
    }
    let design = Design::new(model, sigma, m)?;
    let cand = Candidate {
        spec: estimator,
        a0: design.base_scale(loss_kind),
        loss: loss_kind,
    };
    let out = paired_losses(&design, &[cand], reps, seed)?;
    let losses = out.values.into_iter().next().unwrap_or_default();
    let (mean, std_error) = mean_se(&losses);
    Ok(RiskEstimate {
        mean,
        std_error,
        losses,
        skipped: out.skipped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrialReport {
    pub baseline_losses: Vec<f64>,
    pub alt_losses: Vec<f64>,
    pub baseline_mean: f64,
    pub alt_mean: f64,
    pub prial_percent: f64,
    pub std_error_prial: f64,
    pub replications: usize,
    pub seed: u64,
}

/// PRIAL of `alt` against `baseline` on paired losses.
///
/// The standard error is the delta-method approximation
/// `100·sd(alt_k − R·base_k)/(√n·mean(base))` with `R = mean(alt)/mean(base)`.
pub fn prial(baseline: &[f64], alt: &[f64], seed: u64) -> Result<PrialReport> {
    if baseline.len() != alt.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} alternative losses", baseline.len()),
            found: alt.len().to_string(),
        });
    }
    if baseline.is_empty() {
        return Err(Error::invalid("baseline", "no losses"));
    }
    let n = baseline.len();
    let base_mean = baseline.iter().sum::<f64>() / n as f64;
    let alt_mean = alt.iter().sum::<f64>() / n as f64;
    if !(base_mean > 0.0) {
        return Err(Error::invalid(
            "baseline",
            format!("mean loss must be > 0, got {base_mean}"),
        ));
    }
    let ratio = alt_mean / base_mean;
    let linearized: Vec<f64> = alt
        .iter()
        .zip(baseline)
        .map(|(a, b)| a - ratio * b)
        .collect();
    let (_, se) = mean_se(&linearized);
    Ok(PrialReport {
        baseline_losses: baseline.to_vec(),
        alt_losses: alt.to_vec(),
        baseline_mean: base_mean,
        alt_mean,
        prial_percent: 100.0 * (base_mean - alt_mean) / base_mean,
        std_error_prial: 100.0 * se / base_mean,
        replications: n,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// `(a, mean loss of a·S)` in grid order.
    pub rows: Vec<(f64, f64)>,
    pub argmin: f64,
}

/// Paired risks of `a·S` over a grid of scales, on shared draws.
pub fn risk_optimality_scan(
    design: &Design,
    a_grid: &[f64],
    loss_kind: LossKind,
    reps: usize,
    seed: u64,
) -> Result<ScanResult> {
    if a_grid.is_empty() {
        return Err(Error::invalid("a_grid", "empty grid"));
    }
    let candidates: Vec<Candidate> = a_grid
        .iter()
        .map(|&a| Candidate {
            spec: EstimatorSpec::Usual { a },
            a0: a,
            loss: loss_kind,
        })
        .collect();
    let losses = paired_losses(design, &candidates, reps, seed)?;
    let rows: Vec<(f64, f64)> = a_grid
        .iter()
        .zip(&losses.values)
        .map(|(&a, l)| (a, l.iter().sum::<f64>() / l.len() as f64))
        .collect();
    let argmin = rows
        .iter()
        .copied()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(a, _)| a)
        .expect("grid is non-empty");
    Ok(ScanResult { rows, argmin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::ShrinkagePsi;
    use nalgebra::DMatrix;

    fn id(p: usize) -> Matrix {
        DMatrix::identity(p, p)
    }

    #[test]
    fn zero_loss_at_truth() {
        let sigma = sigma_build(&SigmaSpec::ar1(0.5, 4)).unwrap();
        let ctx = SigmaContext::new(sigma.clone()).unwrap();
        let s_pinv = id(4) * 0.3;
        for kind in [LossKind::DataBased, LossKind::Quadratic] {
            let l = loss(kind, &sigma, &sigma, &ctx.sigma_inv, Some(&s_pinv)).unwrap();
            assert!(l.abs() < 1e-12);
        }
    }

    #[test]
    fn quadratic_loss_of_double_is_p() {
        let sigma = sigma_build(&SigmaSpec::ar1(0.9, 6)).unwrap();
        let ctx = SigmaContext::new(sigma.clone()).unwrap();
        let l = loss(
            LossKind::Quadratic,
            &(&sigma * 2.0),
            &sigma,
            &ctx.sigma_inv,
            None,
        )
        .unwrap();
        assert!((l - 6.0).abs() < 1e-9);
    }

    #[test]
    fn scalar_data_based_loss() {
        let (s, sig2, a) = (2.5, 1.7, 0.3);
        let expected = (sig2 / s) * (a * s / sig2 - 1.0f64).powi(2);
        let m = |x: f64| DMatrix::from_element(1, 1, x);
        let l = loss(
            LossKind::DataBased,
            &m(a * s),
            &m(sig2),
            &m(1.0 / sig2),
            Some(&m(1.0 / s)),
        )
        .unwrap();
        assert!((l - expected).abs() < 1e-14);
    }

    #[test]
    fn loss_errors() {
        let i3 = id(3);
        assert!(loss(LossKind::DataBased, &i3, &i3, &i3, None).is_err());
        assert!(matches!(
            loss(LossKind::Quadratic, &id(2), &i3, &i3, None),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn data_based_pinv_equals_inverse_when_invertible() {
        let design = Design::new(ModelSpec::Gaussian, &SigmaSpec::ar1(0.9, 4), 9).unwrap();
        for rep in 0..20 {
            let draw = design.draw(3, rep).unwrap();
            let inv = draw.sample.s.clone().try_inverse().unwrap();
            let est = &draw.sample.s * 0.1;
            let a = design.loss(LossKind::DataBased, &est, &draw).unwrap();
            let b = loss(
                LossKind::DataBased,
                &est,
                &design.sigma.sigma,
                &design.sigma.sigma_inv,
                Some(&inv),
            )
            .unwrap();
            assert!((a - b).abs() <= 1e-8 * b.abs());
        }
    }

    #[test]
    fn prial_definitional_cases() {
        let base = vec![1.0, 2.0, 3.0, 4.0];
        let same = prial(&base, &base, 0).unwrap();
        assert_eq!(same.prial_percent, 0.0);
        assert_eq!(same.std_error_prial, 0.0);
        let alt: Vec<f64> = base.iter().map(|x| 0.93 * x).collect();
        let r = prial(&base, &alt, 5).unwrap();
        assert!((r.prial_percent - 7.0).abs() < 1e-12);
        assert_eq!(r.replications, 4);
        assert_eq!(r.seed, 5);
        assert!(prial(&[0.0, 0.0], &[1.0, 1.0], 0).is_err());
        assert!(prial(&[1.0], &[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn usual_risk_matches_expansion() {
        // R(aS) = a²K*rv − 2ar + E[tr(S⁺Σ)]
        let (p, m) = (3, 10);
        let design = Design::new(ModelSpec::Gaussian, &SigmaSpec::identity(p), m).unwrap();
        let a0 = design.base_scale(LossKind::DataBased);
        let reps = 10_000;
        let out = replicate_draws(&design, reps, 17, |draw| {
            let est = &draw.sample.s * a0;
            let l = design.loss(LossKind::DataBased, &est, draw)?;
            Ok((l, trace_product(&draw.s_pinv, &design.sigma.sigma)))
        })
        .unwrap();
        let losses: Vec<f64> = out.values.iter().map(|x| x.0).collect();
        let tr: Vec<f64> = out.values.iter().map(|x| x.1).collect();
        let (mean, se) = mean_se(&losses);
        let (tr_mean, _) = mean_se(&tr);
        let (r, v) = (p as f64, m as f64);
        let analytic = a0 * a0 * r * v - 2.0 * a0 * r + tr_mean;
        assert!(
            (mean - analytic).abs() < 4.0 * se,
            "{mean} vs {analytic} (se {se})"
        );
    }

    #[test]
    fn oracle_estimator_has_zero_risk() {
        let design = Design::new(
            ModelSpec::student_t(5.0).unwrap(),
            &SigmaSpec::ar1(0.9, 5),
            3,
        )
        .unwrap();
        let out = replicate_draws(&design, 200, 1, |draw| {
            design.loss(LossKind::DataBased, &design.sigma.sigma, draw)
        })
        .unwrap();
        assert!(out.values.iter().all(|l| l.abs() < 1e-10));
    }

    #[test]
    fn mc_risk_is_thread_count_invariant() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    mc_risk(
                        ModelSpec::student_t(5.0).unwrap(),
                        &SigmaSpec::ar1(0.9, 6),
                        4,
                        EstimatorSpec::OrthInvariant {
                            psi: ShrinkagePsi::haff(1.0, 0.5).unwrap(),
                        },
                        LossKind::DataBased,
                        300,
                        99,
                    )
                    .unwrap()
                    .losses
                })
        };
        let one = run(1);
        let many = run(4);
        assert_eq!(one.len(), 300);
        assert!(one
            .iter()
            .zip(&many)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn mc_risk_needs_two_reps() {
        let r = mc_risk(
            ModelSpec::Gaussian,
            &SigmaSpec::identity(2),
            3,
            EstimatorSpec::Usual { a: 0.3 },
            LossKind::Quadratic,
            1,
            0,
        );
        assert!(r.is_err());
    }

    #[test]
    fn scan_single_point() {
        let design = Design::new(ModelSpec::Gaussian, &SigmaSpec::identity(3), 5).unwrap();
        let r = risk_optimality_scan(&design, &[0.2], LossKind::DataBased, 50, 1).unwrap();
        assert_eq!(r.argmin, 0.2);
        assert_eq!(r.rows.len(), 1);
    }

    #[test]
    fn scan_finds_optimal_scale() {
        for model in [ModelSpec::Gaussian, ModelSpec::student_t(5.0).unwrap()] {
            let design = Design::new(model, &SigmaSpec::identity(5), 15).unwrap();
            let a0 = optimal_a(&model, 5, 15);
            let grid: Vec<f64> = [0.5, 0.75, 1.0, 1.25, 1.5].iter().map(|k| k * a0).collect();
            let r = risk_optimality_scan(&design, &grid, LossKind::DataBased, 5000, 2024).unwrap();
            assert_eq!(r.argmin, a0, "{model:?}: {:?}", r.rows);
        }
    }

    #[test]
    fn too_many_degenerate_aborts() {
        let out = replicate(100, |rep| {
            if rep < 2 {
                Err(Error::ZeroRank)
            } else {
                Ok(rep)
            }
        });
        assert!(matches!(
            out,
            Err(Error::TooManyDegenerate {
                skipped: 2,
                reps: 100
            })
        ));
        let out = replicate(1000, |rep| {
            if rep < 2 {
                Err(Error::ZeroRank)
            } else {
                Ok(rep)
            }
        })
        .unwrap();
        assert_eq!(out.skipped, 2);
        assert_eq!(out.values.len(), 998);
    }
}
