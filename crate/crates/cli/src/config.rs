//! Command-line flags, the optional TOML file, and their resolution into
//! validated settings. A flag always wins over the same key in the file.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ecfmon::bootstrap::BlockParam;
use ecfmon::simulation::Dgp;
use ecfmon::{KernelFamily, StatVariant};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{config_err, CliError, CliResult};
use crate::ingest::TrainSplit;

const GAMMA_HELP: &str = "Boundary exponent γ in [0, 1/2) (default 0). If early violations \
are expected then γ should be close to 1/2. With --route asymptotic, γ > 0 also trims alarms \
before ηT (see --eta)";

#[derive(Debug, Parser)]
#[command(
    name = "ecfmon",
    version,
    about = "Monitor a time series for departures from strict stationarity by comparing \
             empirical characteristic functions of delay-embedded observations",
    after_help = "Exit status: 0 no break, 2 break detected, 1 error.\n\
                  Flags override keys of the same name in --config."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate on the training rows, then run the stopping rule on the rest.
    Monitor(DataArgs),
    /// Single change-point scan over the whole series.
    Retro(DataArgs),
    /// Critical value from the training rows only.
    Calibrate(DataArgs),
    /// Observed maximum detector value and its p-value, without a trajectory.
    Pvalue(DataArgs),
    /// Monte Carlo rejection rates over a grid of processes and settings.
    Simulate(SimArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Monitor(_) => "monitor",
            Command::Retro(_) => "retro",
            Command::Calibrate(_) => "calibrate",
            Command::Pvalue(_) => "pvalue",
            Command::Simulate(_) => "simulate",
        }
    }

    pub fn options(&self) -> &Options {
        match self {
            Command::Monitor(d) | Command::Retro(d) | Command::Calibrate(d) | Command::Pvalue(d) => &d.opts,
            Command::Simulate(s) => &s.opts,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a `value` column and an optional `date` column.
    pub input: PathBuf,
    /// Follow-on CSV with further monitoring observations.
    #[arg(long)]
    pub stream: Option<PathBuf>,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Bootstrap,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Jsonl,
}

/// Flags shared by every command. List-valued flags take comma-separated
/// values; only `simulate` accepts more than one.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// TOML file with defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Embedding dimension m (default 1).
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    pub m: Vec<usize>,
    /// Weight bandwidth a > 0 (default 1).
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    pub a: Vec<f64>,
    #[arg(long, value_delimiter = ',', help = GAMMA_HELP)]
    #[serde(default, deserialize_with = "one_or_many")]
    pub gamma: Vec<f64>,
    /// Monitoring horizon: L·T observations after training (default 1).
    #[arg(long = "L", value_delimiter = ',')]
    #[serde(default, rename = "L", deserialize_with = "one_or_many")]
    pub horizon: Vec<usize>,
    /// Number of leading rows used for training (T).
    #[arg(long, alias = "T", value_delimiter = ',')]
    #[serde(default, alias = "T", deserialize_with = "one_or_many")]
    pub train_len: Vec<usize>,
    /// Last training date (inclusive), instead of --train-len.
    #[arg(long)]
    #[serde(default)]
    pub train_end_date: Option<String>,

    /// Nominal level (default 0.05).
    #[arg(long)]
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Bootstrap replicates (default 1000).
    #[arg(long = "B")]
    #[serde(default, rename = "B")]
    pub replicates: Option<usize>,
    /// Stationary-bootstrap block probability, or `auto` (default).
    #[arg(long = "p-B")]
    #[serde(default, rename = "p_B", deserialize_with = "auto_or_number")]
    pub p_b: Option<String>,
    /// Master seed (default 0).
    #[arg(long)]
    #[serde(default)]
    pub seed: Option<u64>,
    /// cumulative | postbreak | negenergy (default: cumulative for the
    /// gaussian kernel, negenergy for the energy kernel).
    #[arg(long)]
    #[serde(default)]
    pub variant: Option<String>,
    /// gaussian | energy (default gaussian).
    #[arg(long)]
    #[serde(default)]
    pub kernel: Option<String>,
    /// Critical-value route (default bootstrap).
    #[arg(long, value_enum)]
    #[serde(default)]
    pub route: Option<Route>,
    /// Lower trimming η: alarms start at t ≥ ηT (default 0.05 for the
    /// asymptotic route with γ > 0, else 0).
    #[arg(long)]
    #[serde(default)]
    pub eta: Option<f64>,

    /// u-draws for the weighted covariance integral (asymptotic route, default 2000).
    #[arg(long)]
    #[serde(default)]
    pub n_u: Option<usize>,
    /// Simulated Brownian paths (asymptotic route, default 10000).
    #[arg(long)]
    #[serde(default)]
    pub paths: Option<usize>,
    /// Grid points per Brownian path (asymptotic route, default 2048).
    #[arg(long)]
    #[serde(default)]
    pub grid: Option<usize>,
    /// Autocovariance truncation lag (asymptotic route, default ⌈T^{1/3}⌉).
    #[arg(long)]
    #[serde(default)]
    pub lag: Option<usize>,

    /// Processes to simulate, e.g. S1,P1 (simulate only).
    #[arg(long, value_delimiter = ',')]
    #[serde(default, deserialize_with = "one_or_many")]
    pub dgp: Vec<String>,
    /// Monte Carlo repetitions per cell (simulate only, default 1000).
    #[arg(long)]
    #[serde(default)]
    pub reps: Option<usize>,
    /// Discarded burn-in for recursive processes (simulate only, default 500).
    #[arg(long)]
    #[serde(default)]
    pub burn_in: Option<usize>,

    /// Worker threads; 0 means all cores (default 0).
    #[arg(long)]
    #[serde(default)]
    pub threads: Option<usize>,
    /// Report format (default table).
    #[arg(long, value_enum)]
    #[serde(default)]
    pub format: Option<Format>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

fn auto_or_number<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    Ok(Some(match Raw::deserialize(d)? {
        Raw::Num(x) => x.to_string(),
        Raw::Text(s) => s,
    }))
}

impl Options {
    pub fn from_toml_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fills every unset field from `file`.
    pub fn or(self, file: Options) -> Options {
        fn pick<T>(flag: Vec<T>, file: Vec<T>) -> Vec<T> {
            if flag.is_empty() {
                file
            } else {
                flag
            }
        }
        Options {
            config: self.config,
            m: pick(self.m, file.m),
            a: pick(self.a, file.a),
            gamma: pick(self.gamma, file.gamma),
            horizon: pick(self.horizon, file.horizon),
            train_len: pick(self.train_len, file.train_len),
            train_end_date: self.train_end_date.or(file.train_end_date),
            alpha: self.alpha.or(file.alpha),
            replicates: self.replicates.or(file.replicates),
            p_b: self.p_b.or(file.p_b),
            seed: self.seed.or(file.seed),
            variant: self.variant.or(file.variant),
            kernel: self.kernel.or(file.kernel),
            route: self.route.or(file.route),
            eta: self.eta.or(file.eta),
            n_u: self.n_u.or(file.n_u),
            paths: self.paths.or(file.paths),
            grid: self.grid.or(file.grid),
            lag: self.lag.or(file.lag),
            dgp: pick(self.dgp, file.dgp),
            reps: self.reps.or(file.reps),
            burn_in: self.burn_in.or(file.burn_in),
            threads: self.threads.or(file.threads),
            format: self.format.or(file.format),
            output: self.output.or(file.output),
        }
    }

    /// Merges in the `--config` file, if any.
    pub fn with_file(self) -> CliResult<Options> {
        match self.config.clone() {
            Some(path) => Ok(self.or(Options::from_toml_file(&path)?)),
            None => Ok(self),
        }
    }
}

/// Fully resolved settings with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub m: Vec<usize>,
    pub a: Vec<f64>,
    pub gamma: Vec<f64>,
    pub horizon: Vec<usize>,
    pub train_len: Vec<usize>,
    pub train_end_date: Option<String>,
    pub alpha: f64,
    pub replicates: usize,
    pub block: BlockParam,
    pub seed: u64,
    pub variant: Option<StatVariant>,
    pub kernel: KernelFamily,
    pub route: Route,
    pub eta: Option<f64>,
    pub n_u: usize,
    pub paths: usize,
    pub grid: usize,
    pub lag: Option<usize>,
    pub dgp: Vec<Dgp>,
    pub reps: usize,
    pub burn_in: usize,
    pub threads: usize,
    pub format: Format,
    pub output: Option<PathBuf>,
}

fn or_default<T>(v: Vec<T>, default: T) -> Vec<T> {
    if v.is_empty() {
        vec![default]
    } else {
        v
    }
}

impl Settings {
    pub fn resolve(opts: Options) -> CliResult<Self> {
        let block = match opts.p_b.as_deref().map(str::trim) {
            None | Some("auto") => BlockParam::Auto,
            Some(s) => match s.parse::<f64>() {
                Ok(p) if p > 0.0 && p <= 1.0 => BlockParam::Fixed(p),
                _ => return config_err(format!("--p-B must be `auto` or a number in (0, 1], got `{s}`")),
            },
        };
        let kernel = match opts.kernel.as_deref() {
            None => KernelFamily::Gaussian,
            Some(k) => k.parse().map_err(CliError::Config)?,
        };
        let variant = match opts.variant.as_deref() {
            None => None,
            Some(v) => Some(v.parse().map_err(CliError::Config)?),
        };
        let dgp = opts
            .dgp
            .iter()
            .map(|d| d.parse::<Dgp>().map_err(CliError::Config))
            .collect::<CliResult<Vec<_>>>()?;
        let replicates = opts.replicates.unwrap_or(1000);
        if replicates == 0 {
            return config_err("--B must be positive");
        }
        let reps = opts.reps.unwrap_or(1000);
        if reps == 0 {
            return config_err("--reps must be positive");
        }
        Ok(Settings {
            m: or_default(opts.m, 1),
            a: or_default(opts.a, 1.0),
            gamma: or_default(opts.gamma, 0.0),
            horizon: or_default(opts.horizon, 1),
            train_len: opts.train_len,
            train_end_date: opts.train_end_date,
            alpha: opts.alpha.unwrap_or(0.05),
            replicates,
            block,
            seed: opts.seed.unwrap_or(0),
            variant,
            kernel,
            route: opts.route.unwrap_or(Route::Bootstrap),
            eta: opts.eta,
            n_u: opts.n_u.unwrap_or(2000),
            paths: opts.paths.unwrap_or(10_000),
            grid: opts.grid.unwrap_or(2048),
            lag: opts.lag,
            dgp,
            reps,
            burn_in: opts.burn_in.unwrap_or(ecfmon::simulation::DEFAULT_BURN_IN),
            threads: opts.threads.unwrap_or(0),
            format: opts.format.unwrap_or(Format::Table),
            output: opts.output,
        })
    }

    /// The variant to use with `kernel` when none was requested.
    pub fn variant_for(&self, kernel: KernelFamily) -> StatVariant {
        self.variant.unwrap_or(match kernel {
            KernelFamily::Gaussian => StatVariant::Cumulative,
            KernelFamily::Energy => StatVariant::NegEnergy,
        })
    }

    pub fn split(&self) -> CliResult<TrainSplit> {
        match (self.train_len.as_slice(), &self.train_end_date) {
            ([t], None) => Ok(TrainSplit::Len(*t)),
            ([], Some(d)) => Ok(TrainSplit::EndDate(d.clone())),
            ([], None) => config_err("give the training split with --train-len or --train-end-date"),
            ([_], Some(_)) => config_err("--train-len and --train-end-date are mutually exclusive"),
            _ => config_err("--train-len takes a single value for this command"),
        }
    }
}

/// The only element of a single-valued setting.
pub fn single<T: Copy>(values: &[T], flag: &str) -> CliResult<T> {
    match values {
        [x] => Ok(*x),
        _ => config_err(format!("--{flag} takes a single value for this command")),
    }
}
