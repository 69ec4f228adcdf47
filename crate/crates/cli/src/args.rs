use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "screenwise", version, about = "Personalized CRC screening decision support")]
pub struct Cli {
    /// TOML file with defaults for model, catalog, preferences and limits.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for parallel loops (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for randomized commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the result to a file: `.csv` for tables, anything else for JSON.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print the result as JSON instead of a table.
    #[arg(long, global = true)]
    pub json: bool,
    /// Model document, or `bundled`.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Catalog document (default catalog when absent).
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Posterior p(CRC) for one patient.
    Infer(EvidenceArgs),
    /// Ranked screening strategies for one patient.
    Recommend(RecommendArgs),
    /// Replay a pairwise elicitation transcript.
    Elicit(ElicitArgs),
    /// Solve the utility parameters (a, b, ρ) from the anchors and a PE answer.
    Calibrate(CalibrateArgs),
    /// EU-ordered allocation of a population under operational limits.
    Allocate(AllocateArgs),
    /// Allocate, then Monte Carlo the screening outcomes.
    Simulate(SimulateArgs),
    /// Dominance check and re-allocation for a new screening device.
    BenchmarkDevice(DeviceArgs),
    /// Information curves of single tests over a grid of priors.
    Curves(CurveArgs),
    /// Re-calibrate with the PE point moved over a grid and re-allocate.
    SweepPe(SweepPeArgs),
    /// Re-allocate under alternative λ values.
    SweepLambda(SweepLambdaArgs),
    /// Sample a synthetic population from the model.
    GenPopulation(GenArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args, Default)]
pub struct EvidenceArgs {
    /// Evidence document (JSON) or the name of a bundled profile.
    #[arg(long)]
    pub profile: Option<String>,
    /// `Variable=state`, repeatable; added to the profile.
    #[arg(long = "evidence", value_name = "VAR=STATE")]
    pub evidence: Vec<String>,
    /// Replace the inferred p(CRC).
    #[arg(long)]
    pub prior_override: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct PreferenceArgs {
    /// `level=λ`, repeatable.
    #[arg(long = "lambda", value_name = "LEVEL=VALUE")]
    pub lambda: Vec<String>,
    #[arg(long)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// PE answer; implies re-calibration.
    #[arg(long)]
    pub pe: Option<f64>,
    #[arg(long)]
    pub pe_info: Option<f64>,
    #[arg(long)]
    pub pe_cost: Option<f64>,
    /// Re-solve (a, b, ρ) after the other overrides.
    #[arg(long)]
    pub recalibrate: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum, Default)]
pub enum ModeArg {
    #[default]
    InsideUtility,
    ExpectedCost,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[command(flatten)]
    pub evidence: EvidenceArgs,
    /// Use this p(CRC) instead of evidence.
    #[arg(long, conflicts_with_all = ["profile", "evidence", "prior_override"])]
    pub p_crc: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long, value_enum, default_value_t)]
    pub complication_mode: ModeArg,
    #[command(flatten)]
    pub prefs: PreferenceArgs,
}

#[derive(Debug, Args)]
pub struct ElicitArgs {
    /// Transcript document, or `sample` for the bundled one.
    #[arg(long)]
    pub transcript: String,
    /// PE answer to calibrate with (overrides the transcript's).
    #[arg(long)]
    pub pe: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// λ at the calibration comfort level (default: configured λ₃).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub pe: Option<f64>,
    #[arg(long)]
    pub pe_info: Option<f64>,
    #[arg(long)]
    pub pe_cost: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct PopulationArgs {
    /// Population CSV.
    #[arg(long, conflicts_with = "size")]
    pub population: Option<PathBuf>,
    /// Generate a synthetic population of this size instead (uses --seed).
    #[arg(long)]
    pub size: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Default)]
pub enum AllocModeArg {
    #[default]
    Static,
    Dynamic,
}

#[derive(Debug, Args, Default)]
pub struct LimitArgs {
    /// `reference`, `none`, or a JSON file mapping intervention → cap.
    #[arg(long)]
    pub limits: Option<String>,
    /// `ID=N`, repeatable; applied on top of --limits.
    #[arg(long = "cap", value_name = "ID=N")]
    pub cap: Vec<String>,
}

#[derive(Debug, Args)]
pub struct AllocateArgs {
    #[command(flatten)]
    pub population: PopulationArgs,
    #[command(flatten)]
    pub limits: LimitArgs,
    #[arg(long, value_enum, default_value_t)]
    pub mode: AllocModeArg,
    #[command(flatten)]
    pub prefs: PreferenceArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub population: PopulationArgs,
    #[command(flatten)]
    pub limits: LimitArgs,
    #[arg(long, value_enum, default_value_t)]
    pub mode: AllocModeArg,
    #[arg(long, default_value_t = 200)]
    pub runs: usize,
    /// Instead of EU allocation, give this test (with colonoscopy after a
    /// positive) to members whose `--band-variable` is in `--band`.
    #[arg(long)]
    pub baseline_test: Option<String>,
    #[arg(long, default_value = "Age")]
    pub band_variable: String,
    #[arg(long, value_delimiter = ',', default_value = "54-64")]
    pub band: Vec<String>,
    #[command(flatten)]
    pub prefs: PreferenceArgs,
}

#[derive(Debug, Args)]
pub struct DeviceArgs {
    /// Device spec (JSON, the catalog record format).
    #[arg(long, conflicts_with = "name")]
    pub device: Option<PathBuf>,
    #[arg(long, requires_all = ["sensitivity", "specificity", "cost", "comfort"])]
    pub name: Option<String>,
    #[arg(long)]
    pub sensitivity: Option<f64>,
    #[arg(long)]
    pub specificity: Option<f64>,
    #[arg(long)]
    pub cost: Option<f64>,
    #[arg(long)]
    pub comfort: Option<u8>,
    /// Priors at which to report the device's best EU.
    #[arg(long, value_delimiter = ',', default_value = "0.00085")]
    pub probe: Vec<f64>,
    #[command(flatten)]
    pub population: PopulationArgs,
    #[command(flatten)]
    pub limits: LimitArgs,
    #[arg(long, default_value_t = 200)]
    pub runs: usize,
    #[command(flatten)]
    pub prefs: PreferenceArgs,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub methods: Vec<String>,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[arg(long, default_value_t = 0.0001)]
    pub lo: f64,
    #[arg(long, default_value_t = 0.55)]
    pub hi: f64,
}

#[derive(Debug, Args)]
pub struct SweepPeArgs {
    #[command(flatten)]
    pub population: PopulationArgs,
    #[command(flatten)]
    pub limits: LimitArgs,
    #[arg(long, value_delimiter = ',', default_value = "3.5,4.1,4.7")]
    pub pe_info: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0,50,100")]
    pub pe_cost: Vec<f64>,
    /// `level=λ`, repeatable.
    #[arg(long = "lambda", value_name = "LEVEL=VALUE")]
    pub lambda: Vec<String>,
    /// PE answer used at every grid point.
    #[arg(long)]
    pub pe: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepLambdaArgs {
    #[command(flatten)]
    pub population: PopulationArgs,
    #[command(flatten)]
    pub limits: LimitArgs,
    /// One sweep point, `level=λ[,level=λ…]`; repeatable. The unmodified
    /// parameters are always the first point.
    #[arg(long = "set", value_name = "LEVEL=VALUE,...", required = true)]
    pub set: Vec<String>,
    #[command(flatten)]
    pub prefs: PreferenceArgs,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub size: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Bind address (default 127.0.0.1).
    #[arg(long, env = "SCREENWISE_HOST")]
    pub host: Option<String>,
    /// Port (default 8080).
    #[arg(long, env = "SCREENWISE_PORT")]
    pub port: Option<u16>,
    /// Job store (default `screenwise-work`).
    #[arg(long, env = "SCREENWISE_WORK_DIR")]
    pub work_dir: Option<PathBuf>,
    /// Concurrent allocation jobs (default: CPU count).
    #[arg(long, env = "SCREENWISE_WORKERS")]
    pub workers: Option<usize>,
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn definitions_are_consistent() {
        super::Cli::command().debug_assert();
    }
}
