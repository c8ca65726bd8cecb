use std::io::Write;

use ecfmon::asymptotic::{asymptotic_critical_value, AsymptoticConfig, BrownianSettings};
use ecfmon::bootstrap::{calibrate, calibrate_retrospective, p_value, BlockParam, BootstrapConfig};
use ecfmon::detector::{trimmed_max, detector_trajectory, retrospective_profile, MonitorConfig};
use ecfmon::simulation::{asymptotic_mc, warp_speed_mc, DgpSpec};
use ecfmon::{EmbeddingDim, KernelFamily, KernelSpec};

use crate::config::{single, Command, DataArgs, Route, Settings};
use crate::error::{config_err, CliResult};
use crate::ingest::{read_csv, training_len, Observations};
use crate::report::{
    AsymptoticEcho, CalibrateSummary, ConfigEcho, MonitorSummary, ProfilePoint, Reporter, RetroSummary,
    SimulationEcho, SimulationRow, TrajectoryPoint,
};

/// Whether the command found evidence of a break.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    NoBreak,
    Break,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::NoBreak => 0,
            Outcome::Break => 2,
        }
    }
}

/// Default lower trimming: only the Brownian route with `γ > 0` needs it.
fn default_eta(settings: &Settings, gamma: f64) -> f64 {
    settings.eta.unwrap_or(if settings.route == Route::Asymptotic && gamma > 0.0 {
        0.05
    } else {
        0.0
    })
}

pub fn kernel_spec(family: KernelFamily, a: f64, m: usize) -> CliResult<KernelSpec> {
    Ok(KernelSpec::new(family, a, EmbeddingDim::new(m)?)?)
}

pub fn monitor_config(settings: &Settings, m: usize, a: f64, gamma: f64, horizon: usize) -> CliResult<MonitorConfig> {
    let kernel = kernel_spec(settings.kernel, a, m)?;
    let cfg = MonitorConfig::new(kernel, gamma, horizon, settings.alpha, settings.variant_for(settings.kernel))?;
    Ok(cfg.with_eta(default_eta(settings, gamma))?)
}

fn bootstrap_config(settings: &Settings) -> CliResult<BootstrapConfig> {
    Ok(BootstrapConfig::new(settings.replicates, settings.block, settings.seed)?)
}

fn asymptotic_config(settings: &Settings) -> AsymptoticConfig {
    AsymptoticConfig {
        n_u: settings.n_u,
        lag: settings.lag,
        brownian: BrownianSettings {
            n_paths: settings.paths,
            n_grid: settings.grid,
        },
        seed: settings.seed,
    }
}

fn echo(command: &Command, settings: &Settings, data: Option<&DataArgs>, train_len: Vec<usize>) -> ConfigEcho {
    let gamma0 = settings.gamma.first().copied().unwrap_or(0.0);
    let bootstrap = settings.route == Route::Bootstrap;
    ConfigEcho {
        command: command.name().to_string(),
        input: data.map(|d| d.input.display().to_string()),
        stream: data.and_then(|d| d.stream.as_ref()).map(|p| p.display().to_string()),
        m: settings.m.clone(),
        a: settings.a.clone(),
        gamma: settings.gamma.clone(),
        horizon: settings.horizon.clone(),
        train_len,
        alpha: settings.alpha,
        kernel: format!("{:?}", settings.kernel).to_lowercase(),
        variant: format!("{:?}", settings.variant_for(settings.kernel)).to_lowercase(),
        route: settings.route,
        eta: default_eta(settings, gamma0),
        replicates: bootstrap.then_some(settings.replicates),
        block_rule: bootstrap.then(|| match settings.block {
            BlockParam::Auto => "auto".to_string(),
            BlockParam::Fixed(p) => p.to_string(),
        }),
        asymptotic: (!bootstrap).then_some(AsymptoticEcho {
            n_u: settings.n_u,
            paths: settings.paths,
            grid: settings.grid,
            lag: settings.lag,
        }),
        simulation: None,
        seed: settings.seed,
    }
}

fn load(data: &DataArgs) -> CliResult<Observations> {
    let mut obs = read_csv(&data.input)?;
    if let Some(stream) = &data.stream {
        obs.extend(read_csv(stream)?);
    }
    Ok(obs)
}

/// Null distribution of the maximum detector value from the training data.
struct Calibration {
    c_alpha: f64,
    p_b: Option<f64>,
    null_maxima: Vec<f64>,
}

fn calibrate_route(settings: &Settings, training: &[f64], cfg: &MonitorConfig) -> CliResult<Calibration> {
    Ok(match settings.route {
        Route::Bootstrap => {
            let cal = calibrate(training, cfg, &bootstrap_config(settings)?)?;
            Calibration {
                c_alpha: cal.c_hat,
                p_b: Some(cal.p_b_used),
                null_maxima: cal.maxima,
            }
        }
        Route::Asymptotic => {
            let cal = asymptotic_critical_value(training, cfg, &asymptotic_config(settings))?;
            Calibration {
                c_alpha: cal.c_hat,
                p_b: None,
                null_maxima: cal.suprema,
            }
        }
    })
}

struct SingleCell {
    cfg: MonitorConfig,
    obs: Observations,
    big_t: usize,
}

fn single_cell(settings: &Settings, data: &DataArgs) -> CliResult<SingleCell> {
    let cfg = monitor_config(
        settings,
        single(&settings.m, "m")?,
        single(&settings.a, "a")?,
        single(&settings.gamma, "gamma")?,
        single(&settings.horizon, "L")?,
    )?;
    let obs = load(data)?;
    let big_t = training_len(&obs, &settings.split()?)?;
    if big_t < cfg.kernel.m() {
        return config_err(format!("training length {big_t} is shorter than m = {}", cfg.kernel.m()));
    }
    Ok(SingleCell { cfg, obs, big_t })
}

fn cmd_monitor(command: &Command, settings: &Settings, data: &DataArgs, with_trajectory: bool, out: &mut dyn Write) -> CliResult<Outcome> {
    let SingleCell { cfg, obs, big_t } = single_cell(settings, data)?;
    let (training, rest) = obs.values.split_at(big_t);
    let cal = calibrate_route(settings, training, &cfg)?;
    let deltas = detector_trajectory(training, rest, &cfg)?;
    let first = cfg.first_alarm_step(big_t);
    let tau = deltas
        .iter()
        .enumerate()
        .map(|(i, &d)| (i + 1, d))
        .find(|&(t, d)| t >= first && d > cal.c_alpha)
        .map(|(t, _)| t);
    let max_delta = trimmed_max(&deltas, big_t, &cfg);

    let mut rep = Reporter::new(out, settings.format);
    if with_trajectory {
        let points: Vec<TrajectoryPoint> = deltas
            .iter()
            .enumerate()
            .map(|(i, &delta)| TrajectoryPoint {
                t: i + 1,
                delta,
                date: obs.date(big_t + i).map(str::to_owned),
            })
            .collect();
        rep.trajectory(&points)?;
    }
    rep.monitor_summary(&MonitorSummary {
        tau,
        tau_date: tau.and_then(|t| obs.date(big_t + t - 1)).map(str::to_owned),
        p_value: p_value(max_delta, &cal.null_maxima),
        c_alpha: cal.c_alpha,
        p_b: cal.p_b,
        max_delta,
        train_len: big_t,
        monitored: deltas.len(),
        ignored_rows: rest.len() - deltas.len(),
        seed: settings.seed,
        config: echo(command, settings, Some(data), vec![big_t]),
    })?;
    Ok(if tau.is_some() { Outcome::Break } else { Outcome::NoBreak })
}

fn cmd_calibrate(command: &Command, settings: &Settings, data: &DataArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    let SingleCell { cfg, obs, big_t } = single_cell(settings, data)?;
    let cal = calibrate_route(settings, &obs.values[..big_t], &cfg)?;
    Reporter::new(out, settings.format).calibrate_summary(&CalibrateSummary {
        c_alpha: cal.c_alpha,
        p_b: cal.p_b,
        train_len: big_t,
        seed: settings.seed,
        config: echo(command, settings, Some(data), vec![big_t]),
    })?;
    Ok(Outcome::NoBreak)
}

fn cmd_retro(command: &Command, settings: &Settings, data: &DataArgs, out: &mut dyn Write) -> CliResult<Outcome> {
    if settings.route != Route::Bootstrap {
        return config_err("the retrospective scan is calibrated by bootstrap only");
    }
    let kernel = kernel_spec(settings.kernel, single(&settings.a, "a")?, single(&settings.m, "m")?)?;
    let obs = load(data)?;
    let profile = retrospective_profile(&obs.values, &kernel)?;
    // Smallest split among ties.
    let (split, max_stat) = profile
        .iter()
        .copied()
        .fold((0, f64::NEG_INFINITY), |best, (t, s)| if s > best.1 { (t, s) } else { best });
    let cal = calibrate_retrospective(&obs.values, &kernel, settings.alpha, &bootstrap_config(settings)?)?;
    let is_break = max_stat > cal.c_hat;

    let mut rep = Reporter::new(out, settings.format);
    let points: Vec<ProfilePoint> = profile
        .iter()
        .map(|&(t, stat)| ProfilePoint {
            t,
            stat,
            date: obs.date(t - 1).map(str::to_owned),
        })
        .collect();
    rep.profile(&points)?;
    rep.retro_summary(&RetroSummary {
        split,
        split_date: obs.date(split - 1).map(str::to_owned),
        max_stat,
        c_alpha: cal.c_hat,
        p_value: cal.p_value(max_stat),
        is_break,
        p_b: Some(cal.p_b_used),
        seed: settings.seed,
        config: echo(command, settings, Some(data), Vec::new()),
    })?;
    Ok(if is_break { Outcome::Break } else { Outcome::NoBreak })
}

fn cmd_simulate(command: &Command, settings: &Settings, out: &mut dyn Write) -> CliResult<Outcome> {
    if settings.dgp.is_empty() {
        return config_err("simulate needs at least one --dgp");
    }
    if settings.train_len.is_empty() {
        return config_err("simulate needs --train-len (T), e.g. --train-len 100,300");
    }
    if settings.train_end_date.is_some() {
        return config_err("--train-end-date does not apply to simulate");
    }
    let mut rows = Vec::new();
    for &dgp in &settings.dgp {
        for &m in &settings.m {
            for &big_t in &settings.train_len {
                for &horizon in &settings.horizon {
                    for &a in &settings.a {
                        for &gamma in &settings.gamma {
                            let cfg = monitor_config(settings, m, a, gamma, horizon)?;
                            let spec = DgpSpec::new(dgp, big_t, horizon)?.with_burn_in(settings.burn_in);
                            let result = match settings.route {
                                Route::Bootstrap => warp_speed_mc(&spec, &cfg, settings.reps, settings.block, settings.seed)?,
                                Route::Asymptotic => {
                                    asymptotic_mc(&spec, &cfg, &asymptotic_config(settings), settings.reps, settings.seed)?
                                }
                            };
                            rows.push(SimulationRow {
                                result,
                                route: settings.route,
                            });
                        }
                    }
                }
            }
        }
    }
    let mut config = echo(command, settings, None, settings.train_len.clone());
    // Warp-speed runs draw one replicate per repetition.
    config.replicates = None;
    config.simulation = Some(SimulationEcho {
        dgp: settings.dgp.iter().map(|d| d.name().to_string()).collect(),
        reps: settings.reps,
        burn_in: settings.burn_in,
    });
    let mut rep = Reporter::new(out, settings.format);
    rep.simulation(&rows)?;
    rep.simulation_config(&config)?;
    Ok(Outcome::NoBreak)
}

/// Runs `command` with resolved settings, writing the report to `out`.
/// Parallel work runs on the current rayon pool.
pub fn execute(command: &Command, settings: &Settings, out: &mut dyn Write) -> CliResult<Outcome> {
    match command {
        Command::Monitor(d) => cmd_monitor(command, settings, d, true, out),
        Command::Pvalue(d) => cmd_monitor(command, settings, d, false, out),
        Command::Calibrate(d) => cmd_calibrate(command, settings, d, out),
        Command::Retro(d) => cmd_retro(command, settings, d, out),
        Command::Simulate(_) => cmd_simulate(command, settings, out),
    }
}

/// Resolves flags and config file, sizes the thread pool and runs.
pub fn run(command: &Command) -> CliResult<Outcome> {
    let settings = Settings::resolve(command.options().clone().with_file()?)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.threads)
        .build()
        .map_err(|e| crate::error::CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match &settings.output {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|source| crate::error::CliError::Io {
                path: path.to_owned(),
                source,
            })?;
            let mut w = std::io::BufWriter::new(file);
            let outcome = execute(command, &settings, &mut w)?;
            w.flush()?;
            Ok(outcome)
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = std::io::BufWriter::new(stdout.lock());
            let outcome = execute(command, &settings, &mut w)?;
            w.flush()?;
            Ok(outcome)
        }
    })
}
