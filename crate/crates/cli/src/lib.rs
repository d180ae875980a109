//! Argument handling for the `scalemat` binary.
//!
//! The flag set maps onto [`ExperimentConfig`] in both directions
//! ([`Args::to_config`], [`config_to_args`]), so a config can be replayed
//! from the comment line of any CSV it produced.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use scalemat_core::experiments::{self, BChoice, Command, ExperimentConfig, VerifyConfig};
use scalemat_core::{Error, ModelSpec, SigmaKind};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "scalemat",
    version,
    about = "Monte-Carlo experiments for orthogonally invariant scale-matrix estimators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// PRIAL as a function of b at fixed α (default p=25, m=10).
    SweepB(Args),
    /// PRIAL as a function of α at b = b0 (default p=50, m=20).
    SweepAlpha(Args),
    /// Data-based vs quadratic loss PRIALs per α (default p=20, m=10).
    CompareLoss(Args),
    /// Run the self-check suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dist {
    Gaussian,
    Student,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SigmaArg {
    Identity,
    Ar1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threads {
    Auto,
    Fixed(usize),
}

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Threads::Auto);
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected a positive integer or `auto`, got `{s}`")),
            Ok(n) => Ok(Threads::Fixed(n)),
        }
    }
}

fn parse_b(s: &str) -> Result<BChoice, String> {
    match s {
        "b0" => Ok(BChoice::B0),
        "b1" => Ok(BChoice::B1),
        _ => s
            .parse::<f64>()
            .map(BChoice::Value)
            .map_err(|_| format!("expected a number, `b0` or `b1`, got `{s}`")),
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "gaussian")]
    pub dist: Vec<Dist>,
    /// Degrees of freedom of the Student model.
    #[arg(long, default_value_t = 5.0)]
    pub df: f64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "identity")]
    pub sigma: Vec<SigmaArg>,
    /// AR(1) correlation.
    #[arg(long, default_value_t = 0.9, allow_negative_numbers = true)]
    pub rho: f64,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub alpha: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_b, allow_negative_numbers = true)]
    pub b: Option<Vec<BChoice>>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "auto")]
    pub threads: Threads,
}

#[derive(Debug, Clone, clap::Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    #[arg(long, default_value_t = 15)]
    pub m: usize,
    #[arg(long, default_value_t = 5000)]
    pub reps: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value = "auto")]
    pub threads: Threads,
    #[arg(long, default_value_t = 1.0, hide = true)]
    pub inject_a_scale: f64,
}

pub fn default_dims(cmd: Command) -> (usize, usize) {
    match cmd {
        Command::SweepB => (25, 10),
        Command::SweepAlpha => (50, 20),
        Command::CompareLoss => (20, 10),
    }
}

impl Args {
    pub fn to_config(&self, cmd: Command) -> scalemat_core::Result<ExperimentConfig> {
        let (dp, dm) = default_dims(cmd);
        let mut models = Vec::new();
        for d in dedup(&self.dist) {
            models.push(match d {
                Dist::Gaussian => ModelSpec::Gaussian,
                Dist::Student => ModelSpec::student_t(self.df)?,
            });
        }
        let sigmas = dedup(&self.sigma)
            .into_iter()
            .map(|s| match s {
                SigmaArg::Identity => SigmaKind::Identity,
                SigmaArg::Ar1 => SigmaKind::Ar1 { rho: self.rho },
            })
            .collect();
        Ok(ExperimentConfig {
            p: self.p.unwrap_or(dp),
            m: self.m.unwrap_or(dm),
            models,
            sigmas,
            alphas: self.alpha.clone(),
            b: self.b.clone(),
            reps: self.reps,
            seed: self.seed,
        })
    }
}

fn dedup<T: PartialEq + Copy>(xs: &[T]) -> Vec<T> {
    let mut out = Vec::new();
    for x in xs {
        if !out.contains(x) {
            out.push(*x);
        }
    }
    out
}

fn join<T>(xs: &[T], f: impl Fn(&T) -> String) -> String {
    xs.iter().map(f).collect::<Vec<_>>().join(",")
}

/// Flags reproducing `cfg` under `cmd` (without `--out`/`--threads`).
pub fn config_to_args(cmd: Command, cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = vec![
        cmd.name().to_string(),
        "--p".into(),
        cfg.p.to_string(),
        "--m".into(),
        cfg.m.to_string(),
    ];
    let dist = join(&cfg.models, |m| match m {
        ModelSpec::Gaussian => "gaussian".into(),
        ModelSpec::StudentT(_) => "student".into(),
    });
    out.extend(["--dist".into(), dist]);
    if let Some(k) = cfg.models.iter().find_map(|m| match m {
        ModelSpec::StudentT(k) => Some(k.get()),
        ModelSpec::Gaussian => None,
    }) {
        out.extend(["--df".into(), format!("{k}")]);
    }
    let sigma = join(&cfg.sigmas, |s| match s {
        SigmaKind::Ar1 { .. } => "ar1".into(),
        _ => "identity".into(),
    });
    out.extend(["--sigma".into(), sigma]);
    if let Some(rho) = cfg.sigmas.iter().find_map(|s| match s {
        SigmaKind::Ar1 { rho } => Some(*rho),
        _ => None,
    }) {
        out.extend(["--rho".into(), format!("{rho}")]);
    }
    if let Some(a) = &cfg.alphas {
        out.extend(["--alpha".into(), join(a, |x| format!("{x}"))]);
    }
    if let Some(b) = &cfg.b {
        out.extend(["--b".into(), join(b, |x| x.token())]);
    }
    out.extend([
        "--reps".into(),
        cfg.reps.to_string(),
        "--seed".into(),
        cfg.seed.to_string(),
    ]);
    out
}

fn install_pool(threads: Threads) -> Result<(), String> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Threads::Fixed(n) = threads {
        builder = builder.num_threads(n);
    }
    builder.build_global().map_err(|e| e.to_string())
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter { .. } | Error::DimensionMismatch { .. } => EXIT_INVALID,
        _ => EXIT_CHECK_FAILED,
    }
}

fn emit(table: &experiments::Table, out: Option<&PathBuf>) -> scalemat_core::Result<()> {
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            table.write_csv(&mut w)?;
            w.flush()?;
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let threads = match &cli.command {
        Sub::SweepB(a) | Sub::SweepAlpha(a) | Sub::CompareLoss(a) => a.threads,
        Sub::Verify(v) => v.threads,
    };
    if let Err(e) = install_pool(threads) {
        eprintln!("error: thread pool: {e}");
        return EXIT_INVALID;
    }

    let result = match cli.command {
        Sub::SweepB(a) => run_sweep(Command::SweepB, &a),
        Sub::SweepAlpha(a) => run_sweep(Command::SweepAlpha, &a),
        Sub::CompareLoss(a) => run_sweep(Command::CompareLoss, &a),
        Sub::Verify(v) => run_verify(&v),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn run_sweep(cmd: Command, args: &Args) -> scalemat_core::Result<i32> {
    let cfg = args.to_config(cmd)?;
    let table = experiments::run(cmd, &cfg)?;
    emit(&table, args.out.as_ref())?;
    if let (Some(pi), Some(si)) = (table.column("prial_percent"), table.column("prial_se")) {
        let best = table.rows.iter().max_by(|a, b| {
            let (x, y): (f64, f64) = (
                a[pi].parse().unwrap_or(f64::NAN),
                b[pi].parse().unwrap_or(f64::NAN),
            );
            x.total_cmp(&y)
        });
        if let Some(row) = best {
            eprintln!(
                "{} rows; best PRIAL {}% (se {})",
                table.rows.len(),
                row[pi],
                row[si]
            );
        }
    }
    Ok(EXIT_OK)
}

fn run_verify(args: &VerifyArgs) -> scalemat_core::Result<i32> {
    let cfg = VerifyConfig {
        p: args.p,
        m: args.m,
        reps: args.reps,
        seed: args.seed,
        a_scale: args.inject_a_scale,
        ..VerifyConfig::default()
    };
    let report = experiments::verify(&cfg)?;
    print!("{}", report.render());
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}
