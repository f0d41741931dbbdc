mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "gwish",
    version,
    about = "Bayesian Gaussian graphical models under G-Wishart priors"
)]
struct Cli {
    /// Flat `key = value` file supplying any long option; explicit flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw from a G-Wishart distribution by Metropolis-Hastings.
    #[command(args_override_self = true)]
    SampleGwishart(SampleArgs),
    /// Joint graph and precision inference for a Gaussian graphical model.
    #[command(args_override_self = true)]
    Ggm(GgmArgs),
    /// Row and column graph inference for matrix-variate data.
    #[command(args_override_self = true)]
    MatrixGgm(MatrixArgs),
    /// Spatial regression with matrix-variate CAR residuals.
    #[command(args_override_self = true)]
    SpatialGaussian(SpatialGaussianArgs),
    /// Poisson log-linear model with matrix-variate CAR random effects.
    #[command(args_override_self = true)]
    SpatialPoisson(SpatialPoissonArgs),
    /// Write the synthetic 5 x 10 matrix-variate fixture and its truth.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Multi-chain running-mean convergence report for scalar traces.
    #[command(args_override_self = true)]
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 2_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 1)]
    pub chains: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Monte Carlo sample size for each prior normalizing constant.
    #[arg(long, default_value_t = 10_000)]
    pub mc_const_n: usize,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Edge list (1-based `i j` per line); the complete graph if omitted.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Dimension; defaults to the largest label in the edge list.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, default_value_t = 3.0)]
    pub delta: f64,
    /// CSV matrix or `identity`.
    #[arg(long, default_value = "identity")]
    pub d_matrix: String,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 1_000)]
    pub burnin: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value_t = 0.5)]
    pub sigma_m: f64,
    /// Hold the (1,1) entry of K at 1.
    #[arg(long)]
    pub constrain_11: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GgmArgs {
    /// n x p numeric CSV, one observation per row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    pub delta0: f64,
    #[arg(long, default_value = "identity")]
    pub d0: String,
    #[arg(long, default_value_t = 0.5)]
    pub sigma_m: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma_g: f64,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct MatrixSteps {
    #[arg(long, default_value_t = 3.0)]
    pub delta_r: f64,
    #[arg(long, default_value_t = 3.0)]
    pub delta_c: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma_m_r: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma_m_c: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma_g_r: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma_g_c: f64,
}

#[derive(Args, Debug)]
pub struct MatrixArgs {
    /// CSV of n stacked p_R x p_C samples (n * p_R rows, p_C columns).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub pr: usize,
    /// Checked against the data when given.
    #[arg(long)]
    pub pc: Option<usize>,
    /// Checked against the data when given.
    #[arg(long)]
    pub n: Option<usize>,
    /// Hold the row graph at this edge list.
    #[arg(long)]
    pub fixed_row_graph: Option<PathBuf>,
    #[arg(long, default_value = "identity")]
    pub dr: String,
    #[arg(long, default_value = "identity")]
    pub dc: String,
    #[command(flatten)]
    pub steps: MatrixSteps,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct CarArgs {
    /// Region adjacency edge list (1-based).
    #[arg(long)]
    pub adjacency: PathBuf,
    #[arg(long, default_value_t = 0.99)]
    pub rho: f64,
    /// CAR scale; defaults to the neighbor count of the first region.
    #[arg(long)]
    pub tau2: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SpatialGaussianArgs {
    /// p_R x p_C outcomes, one region per row.
    #[arg(long)]
    pub data: PathBuf,
    /// One value per region; the design is (1, z, z^2).
    #[arg(long)]
    pub covariate: PathBuf,
    #[command(flatten)]
    pub car: CarArgs,
    #[command(flatten)]
    pub steps: MatrixSteps,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct SpatialPoissonArgs {
    /// p_R x p_C nonnegative integer counts.
    #[arg(long)]
    pub data: PathBuf,
    /// One positive population per region.
    #[arg(long)]
    pub populations: PathBuf,
    /// Counts below this are resampled; 0 disables.
    #[arg(long, default_value_t = 25)]
    pub censor_threshold: u64,
    #[arg(long, default_value_t = 0.1)]
    pub sigma_latent: f64,
    /// Prior mean of every intercept; defaults to the median raw log rate.
    #[arg(long)]
    pub mu0: Option<f64>,
    /// Prior scale of the intercepts; defaults to twice the IQR of raw log rates.
    #[arg(long)]
    pub omega: Option<f64>,
    #[command(flatten)]
    pub car: CarArgs,
    #[command(flatten)]
    pub steps: MatrixSteps,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// CSV with one column per chain.
    #[arg(long)]
    pub traces: PathBuf,
    /// Also write the running means as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::SampleGwishart(a) => commands::sample_gwishart(&a),
        Command::Ggm(a) => commands::ggm(&a),
        Command::MatrixGgm(a) => commands::matrix_ggm(&a),
        Command::SpatialGaussian(a) => commands::spatial_gaussian(&a),
        Command::SpatialPoisson(a) => commands::spatial_poisson(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Report(a) => commands::report(&a),
    }
}

fn main() -> ExitCode {
    let args = match config::expand_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
