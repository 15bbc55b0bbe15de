//! Command-line front end for the `goddard` binary.

mod commands;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::Deserialize;

use crate::dynamics::ProblemParams;
use crate::error::Error;
use crate::friction::FrictionModel;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NO_EXTREMAL: i32 = 3;
pub const EXIT_THEORY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "goddard", version, about = "Extremal analysis for a simplified Goddard ascent problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Regime and admissible extremal types for (g, α)
    Classify(ClassifyArgs),
    /// Construct and verify all extremals
    Solve(SolveArgs),
    /// Check the maximum principle on a stored extremal
    Verify(VerifyArgs),
    /// Sweep the analytic exclusion of burn-coast-burn-coast extremals
    #[command(name = "exclude-iii")]
    ExcludeIii(ExcludeArgs),
    /// Direct-method reference solution
    Oracle(OracleArgs),
    /// Regime atlas over a (g, α) grid
    Sweep(SweepArgs),
}

/// Problem definition shared by all commands. Flags override `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// JSON file with any of: phi, g, T, m0, mT, alpha, jobs, seed
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Resistance model, e.g. `quadratic:k=0.5,b=1` or `linear:gamma=1`
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long)]
    pub g: Option<f64>,
    /// Horizon
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub m0: Option<f64>,
    /// Final mass
    #[arg(long = "mT")]
    pub m_t: Option<f64>,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Also write the classification as JSON
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Directory for one JSON file per extremal plus `solve.json`
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = crate::dynamics::DEFAULT_STEPS_PER_UNIT)]
    pub steps_per_unit: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Extremal JSON with `type` and `switch_times` (and optionally `alpha`)
    #[arg(long)]
    pub input: PathBuf,
    /// Override the multiplier stored in the input
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExcludeArgs {
    /// `lo:hi:n`, endpoints included
    #[arg(long, default_value = "0.2:1:6")]
    pub k_range: String,
    #[arg(long, default_value = "0.5:2:6")]
    pub b_range: String,
    #[arg(long, default_value = "0.1:0.9:6")]
    pub g_range: String,
    /// α as fractions `(j + 1/2)/n` of `1/k`
    #[arg(long, default_value_t = 6)]
    pub alpha_n: usize,
    /// Absolute α grid `lo:hi:n` instead of fractions of `1/k`
    #[arg(long)]
    pub alpha_range: Option<String>,
    /// Levels of Φ examined per cell
    #[arg(long, default_value_t = 9)]
    pub levels: usize,
    /// Also run the multistart shooting for the four-arc structure on every cell
    #[arg(long)]
    pub check_shooting: bool,
    /// Horizon used by `--check-shooting`
    #[arg(long = "shoot-T", default_value_t = 4.0)]
    pub shoot_horizon: f64,
    /// Fuel budget used by `--check-shooting`
    #[arg(long, default_value_t = 1.0)]
    pub shoot_fuel: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 2000)]
    pub cells: usize,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = crate::oracle::DEFAULT_GRID_N)]
    pub grid_n: usize,
    /// Write the direct solution JSON here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "0.05:0.95:20")]
    pub g_range: String,
    #[arg(long, default_value = "0.1:3:20")]
    pub alpha_range: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PhiSpec {
    Text(String),
    Model(FrictionModel),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    phi: Option<PhiSpec>,
    g: Option<f64>,
    #[serde(rename = "T")]
    horizon: Option<f64>,
    m0: Option<f64>,
    #[serde(rename = "mT")]
    m_t: Option<f64>,
    alpha: Option<f64>,
    jobs: Option<usize>,
    seed: Option<u64>,
}

/// Validated run configuration after merging the config file and flags.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: FrictionModel,
    pub g: Option<f64>,
    pub horizon: Option<f64>,
    pub m0: Option<f64>,
    pub m_t: Option<f64>,
    pub alpha: Option<f64>,
    pub jobs: usize,
    pub seed: u64,
}

/// Failure of a command, mapped onto an exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(Error),
    Io(String),
    /// Stdout went away, e.g. piped into `head`.
    Closed,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError::Closed;
        }
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_INVALID,
            CliError::Closed => EXIT_OK,
            CliError::Io(_) => EXIT_FAILURE,
            CliError::Run(e) => match e {
                Error::Param(_)
                | Error::Level { .. }
                | Error::InfeasibleSchedule(_)
                | Error::InfeasibleSingular { .. } => EXIT_INVALID,
                Error::NoExtremalFound | Error::NotAnExtremal(_) | Error::VerifierFlag(_) => EXIT_NO_EXTREMAL,
                Error::TheoryViolation(_) => EXIT_THEORY,
                _ => EXIT_FAILURE,
            },
        }
    }
}

/// Parses `quadratic:k=0.5,b=1` or `linear:gamma=1`.
pub fn parse_phi(text: &str) -> Result<FrictionModel, Error> {
    let (variant, rest) = text.split_once(':').unwrap_or((text, ""));
    let mut coeffs = Vec::new();
    for pair in rest.split(',').filter(|s| !s.trim().is_empty()) {
        let (key, val) =
            pair.split_once('=').ok_or_else(|| Error::Param(format!("expected key=value in --phi, got `{pair}`")))?;
        let val: f64 =
            val.trim().parse().map_err(|_| Error::Param(format!("bad number `{val}` for `{key}` in --phi")))?;
        coeffs.push((key.trim().to_string(), val));
    }
    let get = |name: &str| {
        coeffs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Param(format!("--phi {variant} needs `{name}`")))
    };
    let known: &[&str] = match variant.trim() {
        "linear" => &["gamma"],
        "quadratic" => &["k", "b"],
        other => return Err(Error::Param(format!("unknown resistance model `{other}`"))),
    };
    if let Some((k, _)) = coeffs.iter().find(|(k, _)| !known.contains(&k.as_str())) {
        return Err(Error::Param(format!("unknown coefficient `{k}` for {variant}")));
    }
    match variant.trim() {
        "linear" => FrictionModel::linear(get("gamma")?),
        _ => FrictionModel::quadratic(get("k")?, get("b")?),
    }
}

/// `lo:hi:n` with both endpoints included (`n = 1` gives `lo`).
pub fn parse_range(text: &str) -> Result<Vec<f64>, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || Error::Param(format!("range must be lo:hi:n, got `{text}`"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

fn read_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
}

impl ModelArgs {
    fn resolve(&self, alpha: Option<f64>) -> Result<RunConfig, CliError> {
        let file = read_config(self.config.as_deref())?;
        let model = match (&self.phi, file.phi) {
            (Some(s), _) => parse_phi(s)?,
            (None, Some(PhiSpec::Text(s))) => parse_phi(&s)?,
            (None, Some(PhiSpec::Model(m))) => match m {
                FrictionModel::Linear { gamma } => FrictionModel::linear(gamma)?,
                FrictionModel::Quadratic { k, b } => FrictionModel::quadratic(k, b)?,
            },
            (None, None) => return Err(CliError::Usage("missing --phi (or \"phi\" in --config)".into())),
        };
        let jobs =
            self.jobs.or(file.jobs).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        Ok(RunConfig {
            model,
            g: self.g.or(file.g),
            horizon: self.horizon.or(file.horizon),
            m0: self.m0.or(file.m0),
            m_t: self.m_t.or(file.m_t),
            alpha: alpha.or(file.alpha),
            jobs: jobs.max(1),
            seed: self.seed.or(file.seed).unwrap_or(42),
        })
    }
}

impl RunConfig {
    fn require(v: Option<f64>, flag: &str, key: &str) -> Result<f64, CliError> {
        v.ok_or_else(|| CliError::Usage(format!("missing --{flag} (or \"{key}\" in --config)")))
    }

    pub fn gravity(&self) -> Result<f64, CliError> {
        Self::require(self.g, "g", "g")
    }

    pub fn params(&self) -> Result<ProblemParams, CliError> {
        self.params_with_gravity(self.gravity()?)
    }

    pub fn params_with_gravity(&self, g: f64) -> Result<ProblemParams, CliError> {
        let horizon = Self::require(self.horizon, "T", "T")?;
        let m0 = Self::require(self.m0, "m0", "m0")?;
        let m_t = Self::require(self.m_t, "mT", "mT")?;
        Ok(ProblemParams::new(g, horizon, m0, m_t)?)
    }

    /// Horizon and masses are all-or-nothing.
    pub fn has_mission(&self) -> bool {
        self.horizon.is_some() || self.m0.is_some() || self.m_t.is_some()
    }
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    let result = match &cli.command {
        Command::Classify(a) => commands::classify(a, &mut stdout),
        Command::Solve(a) => commands::solve(a, &mut stdout),
        Command::Verify(a) => commands::verify(a, &mut stdout),
        Command::ExcludeIii(a) => commands::exclude_iii(a, &mut stdout),
        Command::Oracle(a) => commands::oracle(a, &mut stdout),
        Command::Sweep(a) => commands::sweep(a, &mut stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let code = e.exit_code();
            match e {
                CliError::Usage(msg) => {
                    let _ = Cli::command().error(clap::error::ErrorKind::MissingRequiredArgument, msg).print();
                }
                CliError::Run(err) => eprintln!("error: {err}"),
                CliError::Io(msg) => eprintln!("error: {msg}"),
                CliError::Closed => {}
            }
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_strings() {
        assert_eq!(parse_phi("quadratic:k=0.5,b=1").unwrap(), FrictionModel::Quadratic { k: 0.5, b: 1.0 });
        assert_eq!(parse_phi("linear:gamma=2").unwrap(), FrictionModel::Linear { gamma: 2.0 });
        assert!(parse_phi("quadratic:k=0.5").is_err());
        assert!(parse_phi("cubic:a=1").is_err());
        assert!(parse_phi("linear:gamma=1,k=2").is_err());
        assert!(parse_phi("linear:gamma=-1").is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:1:3").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_range("2:5:1").unwrap(), vec![2.0]);
        assert!(parse_range("0:1").is_err());
        assert!(parse_range("0:1:0").is_err());
    }
}
