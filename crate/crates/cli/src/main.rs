mod commands;
mod config;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{read_kv, ConfigError, RunConfig};

/// Invariant tori, invariant splittings and whiskers of symplectic maps.
#[derive(Parser, Debug)]
#[command(name = "kamtori", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for an invariant torus starting from the integrable one (or --torus).
    SolveTorus,
    /// Compute the invariant splitting of a torus file.
    SolveSplitting,
    /// Compute a rank-1 whisker from a torus and splitting file.
    SolveWhisker,
    /// Continue a torus along epsilon = from, from + step, ..., to.
    Continue,
    /// Write point clouds of a torus or whisker file as CSV.
    Export { file: PathBuf },
    /// Recompute the a-posteriori checks of a torus file.
    Diagnose { file: PathBuf },
}

/// Every setting of the config file can be overridden on the command line.
#[derive(Args, Debug, Default)]
struct Flags {
    /// key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    epsilon: Option<String>,
    #[arg(long, global = true)]
    a: Option<String>,
    /// golden, sqrt2 or explicit decimal digits.
    #[arg(long, global = true)]
    omega: Option<String>,
    #[arg(long = "N", global = true)]
    n: Option<String>,
    #[arg(long, global = true)]
    tol: Option<String>,
    #[arg(long, global = true)]
    lambda_tol: Option<String>,
    #[arg(long, global = true)]
    divisor_floor: Option<String>,
    #[arg(long, global = true)]
    twist_floor: Option<String>,
    #[arg(long, global = true)]
    max_iter: Option<String>,
    #[arg(long, global = true)]
    counterterm: bool,
    /// shortcut or exact.
    #[arg(long, global = true)]
    frame: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    from: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    to: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    step: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    /// Convergence log (CSV).
    #[arg(long, global = true)]
    log: Option<String>,
    /// JSON summary.
    #[arg(long, global = true)]
    summary: Option<String>,
    #[arg(long, global = true)]
    torus: Option<String>,
    #[arg(long, global = true)]
    splitting: Option<String>,
    /// stable or unstable.
    #[arg(long, global = true)]
    branch: Option<String>,
    /// Taylor order of the whisker.
    #[arg(long = "L", global = true)]
    l: Option<String>,
    /// Size of W_1, or auto.
    #[arg(long, global = true)]
    rho: Option<String>,
    #[arg(long, global = true)]
    s_max: Option<String>,
    #[arg(long, global = true)]
    conjugacy_tol: Option<String>,
    #[arg(long, global = true)]
    whisker_newton: Option<String>,
    #[arg(long, global = true)]
    n_theta: Option<String>,
    #[arg(long, global = true)]
    n_s: Option<String>,
}

impl Flags {
    fn overrides(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("model", &self.model),
            ("epsilon", &self.epsilon),
            ("a", &self.a),
            ("omega", &self.omega),
            ("N", &self.n),
            ("tol", &self.tol),
            ("lambda_tol", &self.lambda_tol),
            ("divisor_floor", &self.divisor_floor),
            ("twist_floor", &self.twist_floor),
            ("max_iter", &self.max_iter),
            ("frame", &self.frame),
            ("from", &self.from),
            ("to", &self.to),
            ("step", &self.step),
            ("out", &self.out),
            ("log", &self.log),
            ("summary", &self.summary),
            ("torus", &self.torus),
            ("splitting", &self.splitting),
            ("branch", &self.branch),
            ("L", &self.l),
            ("rho", &self.rho),
            ("s_max", &self.s_max),
            ("conjugacy_tol", &self.conjugacy_tol),
            ("whisker_newton", &self.whisker_newton),
            ("n_theta", &self.n_theta),
            ("n_s", &self.n_s),
        ];
        let mut out: BTreeMap<String, String> =
            pairs.into_iter().filter_map(|(k, v)| v.clone().map(|v| (k.to_string(), v))).collect();
        if self.counterterm {
            out.insert("counterterm".into(), "true".into());
        }
        out
    }
}

fn configure(flags: &Flags) -> anyhow::Result<RunConfig> {
    let mut map = match &flags.config {
        Some(path) => read_kv(path)?,
        None => BTreeMap::new(),
    };
    map.extend(flags.overrides());
    RunConfig::from_map(&map)
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("KAMTORI_THREADS") {
        let n: usize = v.parse().map_err(|_| ConfigError(format!("KAMTORI_THREADS must be a count, got '{v}'")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    let result = init_threads().and_then(|_| configure(&cli.flags)).and_then(|cfg| commands::run(&cli.command, &cfg));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
