//! `netext`: command-line front end of the laboratory.
//!
//! Exit codes: 0 success, 1 inequality or claim failure, 2 configuration
//! error, 3 plugin contract error.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "netext",
    version,
    about = "Mazur maps, 1-nets and symmetrized extensions at finite truncation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Random trials of the scalar and Hölder bounds of the Mazur map.
    VerifyMazur(VerifyMazurArgs),
    /// Build a greedy 1-net of a Euclidean ball, verify and persist it.
    BuildNet(BuildNetArgs),
    /// Evaluate the hyperoctahedral symmetrization of a candidate component.
    Symmetrize(SymmetrizeArgs),
    /// Tabulate the empirical modulus of continuity of a candidate.
    EstimateModulus(EstimateModulusArgs),
    /// Measure the net sup-distance between a candidate and f.
    EstimateGamma(EstimateGammaArgs),
    /// Run the p/k choices and the inequality chain over a t grid.
    RunContradiction(RunContradictionArgs),
    /// Summarize a run-contradiction JSON report.
    Report(ReportArgs),
}

#[derive(Args, Clone)]
pub struct Common {
    /// JSON file with option values (kebab-case keys); flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
pub struct ExtensionArgs {
    /// `natural`, `nearest`, `zero`, or the path of a plugin executable.
    #[arg(long)]
    extension: Option<String>,
    /// Argument passed to the plugin (repeatable).
    #[arg(long = "plugin-arg", allow_hyphen_values = true)]
    plugin_arg: Vec<String>,
    /// Per-call plugin timeout in seconds.
    #[arg(long)]
    plugin_timeout: Option<f64>,
    /// Declared claims: comma list of `extends-f`, `uniformly-continuous`, or `none`.
    #[arg(long)]
    claims: Option<String>,
}

#[derive(Args)]
pub struct VerifyMazurArgs {
    #[command(flatten)]
    common: Common,
    /// Trials per bound.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    p_max: Option<u32>,
    #[arg(long)]
    dim_max: Option<usize>,
    /// Output directory; CSV goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BuildNetArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    /// Output directory for net.csv, net.json and net_check.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Force the candidate stream: `half` or `integer`.
    #[arg(long)]
    lattice: Option<String>,
    #[arg(long)]
    max_candidates: Option<u64>,
    /// Ball queries of the covering check.
    #[arg(long)]
    queries: Option<usize>,
}

#[derive(Args)]
pub struct SymmetrizeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    ext: ExtensionArgs,
    /// Dimension of the symmetrizer.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<u32>,
    /// Dimension the component acts on (defaults to n).
    #[arg(long)]
    dim: Option<usize>,
    /// `exact` or `sampled`.
    #[arg(long)]
    mode: Option<String>,
    /// Group samples per evaluation in sampled mode.
    #[arg(long)]
    samples: Option<u64>,
    /// Evaluation point as a comma list; random points are used otherwise.
    #[arg(long)]
    point: Option<String>,
    /// Number of random evaluation points.
    #[arg(long)]
    points: Option<usize>,
    /// Radius of the ball random points are drawn from.
    #[arg(long)]
    radius: Option<f64>,
    /// Net radius for the nearest-point extension.
    #[arg(long)]
    net_radius: Option<f64>,
    /// Random equivariance trials (exact mode).
    #[arg(long)]
    equivariance_trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EstimateModulusArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    ext: ExtensionArgs,
    /// Component dimension.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    p0: Option<u32>,
    #[arg(long)]
    p_max: Option<u32>,
    /// Restrict to the component `F_p`; the whole product otherwise.
    #[arg(long)]
    component: Option<u32>,
    /// Comma list of scales; a 24-point geometric grid on [1e-3, 2] otherwise.
    #[arg(long)]
    scales: Option<String>,
    /// Random pairs per scale.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    net_radius: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EstimateGammaArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    ext: ExtensionArgs,
    #[arg(long)]
    dim: Option<usize>,
    /// Radius of the ball covered by the net.
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    p0: Option<u32>,
    #[arg(long)]
    p_max: Option<u32>,
    #[arg(long)]
    component: Option<u32>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RunContradictionArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    ext: ExtensionArgs,
    /// Comma list of t values in (0, 1/(sqrt(2) e^2)).
    #[arg(long)]
    t_grid: Option<String>,
    /// Dimension of the symmetrizer.
    #[arg(long)]
    n: Option<usize>,
    /// Component dimension (defaults to n).
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    net_radius: Option<f64>,
    #[arg(long)]
    p0: Option<u32>,
    #[arg(long)]
    p_max: Option<u32>,
    /// `exact` or `sampled`.
    #[arg(long)]
    mode: Option<String>,
    /// Group samples per evaluation in sampled mode.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    modulus_samples: Option<usize>,
    #[arg(long)]
    gamma_samples: Option<usize>,
    #[arg(long)]
    transfer_samples: Option<usize>,
    /// Multiplier on omega_hat in right-hand sides.
    #[arg(long)]
    slack: Option<f64>,
    /// Output directory; the JSON report goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    #[command(flatten)]
    common: Common,
    /// JSON report written by run-contradiction.
    #[arg(long)]
    input: Option<PathBuf>,
    /// `summary` or `csv`.
    #[arg(long)]
    format: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::VerifyMazur(a) => commands::verify_mazur(a),
        Command::BuildNet(a) => commands::build_net(a),
        Command::Symmetrize(a) => commands::symmetrize(a),
        Command::EstimateModulus(a) => commands::estimate_modulus(a),
        Command::EstimateGamma(a) => commands::estimate_gamma(a),
        Command::RunContradiction(a) => commands::run_contradiction(a),
        Command::Report(a) => commands::report(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("netext: {e}");
            ExitCode::from(e.code)
        }
    }
}
