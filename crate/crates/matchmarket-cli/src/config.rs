//! Run configuration: JSON file plus flag overrides, flags winning.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use matchmarket::ctmc::{default_grid, GridSpec};
use matchmarket::{MarketParams, Policy};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// One sweep point; omitted fields inherit the base configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub p: f64,
}

/// Raw configuration as read from JSON; every field optional so flags can
/// fill the gaps.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    pub lambda_a: Option<f64>,
    pub lambda_b: Option<f64>,
    pub p: Option<f64>,
    pub policy: Option<String>,
    pub horizon: Option<f64>,
    pub replications: Option<u32>,
    pub seed: Option<u64>,
    pub burn_in: Option<f64>,
    /// `[a_max, b_max]`; defaults to a leak-safe bound from the rates.
    pub grid: Option<[u32; 2]>,
    pub sigma_a: Option<f64>,
    pub sigma_b: Option<f64>,
    pub tail_threshold: Option<f64>,
    pub format: Option<OutputFormat>,
    pub sweep: Option<Vec<SweepPoint>>,
    pub policies: Option<Vec<String>>,
}

impl RawConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("cannot parse {}: {e}", path.display())))
    }
}

/// Which policies a command should run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicySelection {
    One(Policy),
    /// The four matching policies plus the omniscient benchmark, on
    /// coupled randomness.
    All,
}

/// Fully resolved configuration with defaults applied and parameters
/// validated; echoed verbatim into every output for provenance.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub p: f64,
    pub policy: String,
    pub horizon: f64,
    pub replications: u32,
    pub seed: u64,
    pub burn_in: f64,
    pub grid: [u32; 2],
    pub sigma_a: Option<f64>,
    pub sigma_b: Option<f64>,
    pub tail_threshold: f64,
    pub format: OutputFormat,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepPoint>,
    pub policies: Vec<String>,
}

impl RunConfig {
    pub fn params(&self) -> Result<MarketParams, ConfigError> {
        MarketParams::new(self.lambda_a, self.lambda_b, self.p)
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::new(self.grid[0], self.grid[1])
    }

    pub fn policy_selection(&self) -> Result<PolicySelection, ConfigError> {
        if self.policy.eq_ignore_ascii_case("all") {
            return Ok(PolicySelection::All);
        }
        self.policy
            .parse::<Policy>()
            .map(PolicySelection::One)
            .map_err(ConfigError)
    }

    pub fn policy_list(&self) -> Result<Vec<Policy>, ConfigError> {
        self.policies
            .iter()
            .map(|name| name.parse::<Policy>().map_err(ConfigError))
            .collect()
    }

    pub fn echo_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Flag overrides shared by every subcommand.
#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// JSON configuration file; flags override its fields.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Policy to run: greedy2|patient2|greedy1|patient1|inactive|all.
    #[arg(long)]
    pub policy: Option<String>,

    /// Root seed; all randomness derives from it.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Output file (stdout when omitted). Existing CSV files are appended
    /// to without repeating the header.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,

    /// Truncation grid as AxB, e.g. 86x86.
    #[arg(long, value_name = "AxB")]
    pub grid: Option<String>,

    /// Number of replications.
    #[arg(long)]
    pub reps: Option<u32>,

    /// Simulation horizon.
    #[arg(long)]
    pub horizon: Option<f64>,

    /// Losses are measured on [burn-in, horizon].
    #[arg(long = "burn-in")]
    pub burn_in: Option<f64>,

    /// Arrival rate of side U (overrides the config file).
    #[arg(long = "lambda-a")]
    pub lambda_a: Option<f64>,

    /// Arrival rate of side V (overrides the config file).
    #[arg(long = "lambda-b")]
    pub lambda_b: Option<f64>,

    /// Edge probability (overrides the config file).
    #[arg(long)]
    pub p: Option<f64>,

    /// Deviation scale for concentration regions (side U).
    #[arg(long = "sigma-a")]
    pub sigma_a: Option<f64>,

    /// Deviation scale for concentration regions (side V).
    #[arg(long = "sigma-b")]
    pub sigma_b: Option<f64>,
}

impl CommonArgs {
    /// Loads the config file (if any) and applies flag overrides.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let raw = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        // A sweep-only config needs no base parameterization; the first
        // sweep point stands in for it.
        let first_point = raw.sweep.as_ref().and_then(|s| s.first().copied());
        let lambda_a = self.lambda_a.or(raw.lambda_a).or(first_point.map(|s| s.lambda_a));
        let lambda_b = self.lambda_b.or(raw.lambda_b).or(first_point.map(|s| s.lambda_b));
        let p = self.p.or(raw.p).or(first_point.map(|s| s.p));
        let (Some(lambda_a), Some(lambda_b), Some(p)) = (lambda_a, lambda_b, p) else {
            return invalid("lambda_a, lambda_b, and p are required (config file, flags, or a sweep)");
        };
        let params =
            MarketParams::new(lambda_a, lambda_b, p).map_err(|e| ConfigError(e.to_string()))?;

        let grid = match (&self.grid, raw.grid) {
            (Some(text), _) => parse_grid(text)?,
            (None, Some(g)) => g,
            (None, None) => {
                let g = default_grid(params);
                [g.a_max, g.b_max]
            }
        };
        if grid[0] < 1 || grid[1] < 1 {
            return invalid("grid bounds must be at least 1");
        }
        let horizon = self.horizon.or(raw.horizon).unwrap_or(100.0);
        let burn_in = self.burn_in.or(raw.burn_in).unwrap_or(0.0);
        if horizon.is_nan() || horizon <= 0.0 {
            return invalid(format!("horizon must be positive, got {horizon}"));
        }
        if !(0.0..horizon).contains(&burn_in) {
            return invalid(format!("burn_in must lie in [0, horizon), got {burn_in}"));
        }
        let replications = self.reps.or(raw.replications).unwrap_or(1);
        if replications == 0 {
            return invalid("replications must be at least 1");
        }
        let tail_threshold = raw.tail_threshold.unwrap_or(0.1);
        if !(tail_threshold > 0.0 && tail_threshold <= 1.0) {
            return invalid(format!(
                "tail_threshold must lie in (0, 1], got {tail_threshold}"
            ));
        }
        let config = RunConfig {
            lambda_a,
            lambda_b,
            p,
            policy: self
                .policy
                .clone()
                .or(raw.policy)
                .unwrap_or_else(|| "greedy2".to_string()),
            horizon,
            replications,
            seed: self.seed.or(raw.seed).unwrap_or(0),
            burn_in,
            grid,
            sigma_a: self.sigma_a.or(raw.sigma_a),
            sigma_b: self.sigma_b.or(raw.sigma_b),
            tail_threshold,
            format: self.format.or(raw.format).unwrap_or(OutputFormat::Csv),
            sweep: raw.sweep.unwrap_or_default(),
            policies: raw.policies.unwrap_or_else(|| {
                Policy::MATCHING
                    .iter()
                    .map(|p| p.name().to_string())
                    .collect()
            }),
        };
        // Fail early on unknown policy names.
        config.policy_selection()?;
        config.policy_list()?;
        Ok(config)
    }
}

fn parse_grid(text: &str) -> Result<[u32; 2], ConfigError> {
    let Some((a, b)) = text.split_once(['x', 'X']) else {
        return invalid(format!("grid must look like 86x86, got `{text}`"));
    };
    match (a.trim().parse(), b.trim().parse()) {
        (Ok(a), Ok(b)) => Ok([a, b]),
        _ => invalid(format!("grid must look like 86x86, got `{text}`")),
    }
}
