//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::manifest::RunManifest;
use crate::runner;
use crate::selftest::run_selftest;

pub const OUT_ENV: &str = "ALD_OUT";
pub const DEFAULT_OUT: &str = "ald-out";

#[derive(Debug, Parser)]
#[command(name = "ald", version, about = "Annealed Langevin sampling of Gaussian mixtures in growing dimension")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment TOML; the built-in desk experiment when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory. Falls back to the config, then $ALD_OUT, then ./ald-out.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the summability conditions and bound ingredients.
    Conditions {
        /// Comma-separated truncation dimensions.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
    },
    /// Linear stability of Euler-Maruyama on the configured mesh.
    Stability {
        #[arg(long)]
        d: Option<usize>,
    },
    /// Run both schemes and write the terminal ensembles.
    Simulate {
        #[arg(long)]
        d: Option<usize>,
    },
    /// kNN KL estimates across the configured dimensions.
    KlCurve,
    /// Coordinatewise terminal variance relative to the target.
    VarianceProfile {
        #[arg(long)]
        d: Option<usize>,
    },
    /// Admissible preconditioner exponents for power-law spectra.
    Design {
        /// Covariance decay exponent.
        #[arg(long, requires = "b")]
        a: Option<f64>,
        /// Smoothing decay exponent.
        #[arg(long, requires = "a")]
        b: Option<f64>,
    },
    /// Numerical checks of the closed forms.
    Selftest,
}

fn load_config(global: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::desk_experiment(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// `--out`, then the config, then `$ALD_OUT`, then `ald-out`.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &ExperimentConfig, env: Option<OsString>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| env.filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn report(m: &RunManifest, dir: &Path) {
    for f in &m.files {
        println!("wrote {}", dir.join(f).display());
    }
}

fn fmt_range(r: Option<(f64, f64)>) -> String {
    match r {
        Some((lo, hi)) => format!("({lo}, {hi})"),
        None => "empty".into(),
    }
}

fn design(cfg: &ExperimentConfig, a: Option<f64>, b: Option<f64>) -> Result<()> {
    let (a, b) = match (a, b) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            let s = runner::design_summary(cfg).ok_or_else(|| {
                HarnessError::Validation("design needs --a and --b unless all spectra are single power laws".into())
            })?;
            (s.sigma_exponent, s.lambda_exponent)
        }
    };
    let range = ald::spectra::power_law_admissible_range(a, b)
        .map_err(|e| HarnessError::Validation(e.to_string()))?;
    println!("sigma_j ~ j^-{a}, lambda_j ~ j^-{b}");
    println!("admissible gamma exponents: {}", fmt_range(range));
    println!("balanced preconditioner: gamma_j ~ j^-{}", 2.0 * b / 3.0);
    Ok(())
}

fn execute(cli: Cli) -> Result<i32> {
    let cfg = load_config(&cli.global)?;
    let dir = resolve_out_dir(cli.global.out.as_deref(), &cfg, std::env::var_os(OUT_ENV));
    match cli.command {
        Command::Conditions { dims } => {
            let dims = dims.unwrap_or_else(|| cfg.condition_dims().to_vec());
            let run = runner::run_conditions(&cfg, &dims, &dir)?;
            for d in &run.summary.dims {
                println!("d={}: K_d={} T_eps={}", d.d, d.annealing_constant_kd, d.horizon_for_epsilon);
                for (id, c) in &d.conditions {
                    println!("  {id}: partial sum {} ({})", c.partial_sum, c.wording);
                }
            }
            report(&run.manifest, &dir);
        }
        Command::Stability { d } => {
            let run = runner::run_stability(&cfg, d.unwrap_or(cfg.profile_dim()), &dir)?;
            let s = run.report.summary();
            println!("h={} h_bound={} first unstable index={:?}", s.h, s.h_bound, s.first_unstable_index);
            report(&run.manifest, &dir);
        }
        Command::Simulate { d } => {
            let m = runner::run_simulate(&cfg, d.unwrap_or(cfg.profile_dim()), &dir)?;
            report(&m, &dir);
        }
        Command::KlCurve => {
            let run = runner::run_kl_curve(&cfg, &dir)?;
            for r in &run.rows {
                println!("d={} {} k={}: {}", r.d, r.scheme, r.k, r.kl_estimate);
            }
            report(&run.manifest, &dir);
        }
        Command::VarianceProfile { d } => {
            let run = runner::run_variance_profile(&cfg, d.unwrap_or(cfg.profile_dim()), &dir)?;
            println!(
                "predicted onset {:?}, measured first index above {}: {:?}",
                run.summary.predicted_first_unstable_index,
                run.summary.excess_threshold,
                run.summary.measured_first_excess_index
            );
            report(&run.manifest, &dir);
        }
        Command::Design { a, b } => design(&cfg, a, b)?,
        Command::Selftest => {
            let st = run_selftest(cfg.seed, cfg.hash(), &dir)?;
            for c in &st.checks {
                let tag = if c.passed { "ok" } else { "FAILED" };
                println!("{tag}: {} (error {:e}, tolerance {:e})", c.name, c.worst_error, c.tolerance);
            }
            report(&st.manifest, &dir);
            if !st.passed() {
                return Ok(1);
            }
        }
    }
    Ok(0)
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
