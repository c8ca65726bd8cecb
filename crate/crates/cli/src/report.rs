//! Report records and their two renderings: json-lines (one object per
//! line, trajectory first, summary last) and a plain-text table.

use std::io::Write;

use ecfmon::simulation::McResult;
use serde::{Deserialize, Serialize};

use crate::config::{Format, Route};

/// Everything that determines the numbers in a report. Thread count and
/// output path are left out on purpose so reports compare byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stream: Option<String>,
    pub m: Vec<usize>,
    pub a: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(rename = "L")]
    pub horizon: Vec<usize>,
    #[serde(rename = "T")]
    pub train_len: Vec<usize>,
    pub alpha: f64,
    pub kernel: String,
    pub variant: String,
    pub route: Route,
    pub eta: f64,
    #[serde(rename = "B", skip_serializing_if = "Option::is_none", default)]
    pub replicates: Option<usize>,
    #[serde(rename = "p_B_rule", skip_serializing_if = "Option::is_none", default)]
    pub block_rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub asymptotic: Option<AsymptoticEcho>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub simulation: Option<SimulationEcho>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticEcho {
    pub n_u: usize,
    pub paths: usize,
    pub grid: usize,
    pub lag: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationEcho {
    pub dgp: Vec<String>,
    pub reps: usize,
    pub burn_in: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: usize,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub date: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    /// First alarm step; `null` means no alarm (τ̂ = ∞).
    pub tau: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tau_date: Option<String>,
    pub p_value: f64,
    pub c_alpha: f64,
    /// Block probability used (bootstrap route only).
    #[serde(rename = "p_B")]
    pub p_b: Option<f64>,
    pub max_delta: f64,
    pub train_len: usize,
    pub monitored: usize,
    /// Rows after `T(1 + L)` that were not monitored.
    pub ignored_rows: usize,
    pub seed: u64,
    pub config: ConfigEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateSummary {
    pub c_alpha: f64,
    #[serde(rename = "p_B")]
    pub p_b: Option<f64>,
    pub train_len: usize,
    pub seed: u64,
    pub config: ConfigEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub t: usize,
    pub stat: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub date: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetroSummary {
    /// Split maximizing the scan statistic: the first segment ends here.
    pub split: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub split_date: Option<String>,
    pub max_stat: f64,
    pub c_alpha: f64,
    pub p_value: f64,
    #[serde(rename = "break")]
    pub is_break: bool,
    #[serde(rename = "p_B")]
    pub p_b: Option<f64>,
    pub seed: u64,
    pub config: ConfigEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    #[serde(flatten)]
    pub result: McResult,
    pub route: Route,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub config: ConfigEcho,
}

pub struct Reporter<'a> {
    out: &'a mut dyn Write,
    format: Format,
}

impl<'a> Reporter<'a> {
    pub fn new(out: &'a mut dyn Write, format: Format) -> Self {
        Self { out, format }
    }

    fn json<T: Serialize>(&mut self, record: &T) -> std::io::Result<()> {
        serde_json::to_writer(&mut *self.out, record)?;
        writeln!(self.out)
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) -> std::io::Result<()> {
        writeln!(self.out, "{key:<14}{value}")
    }

    fn echo(&mut self, config: &ConfigEcho) -> std::io::Result<()> {
        let text = serde_json::to_string(config).map_err(std::io::Error::other)?;
        self.kv("config", text)
    }

    pub fn trajectory(&mut self, points: &[TrajectoryPoint]) -> std::io::Result<()> {
        match self.format {
            Format::Jsonl => points.iter().try_for_each(|p| self.json(p)),
            Format::Table => {
                writeln!(self.out, "{:>8}  {:>16}  date", "t", "delta")?;
                for p in points {
                    writeln!(self.out, "{:>8}  {:>16.6}  {}", p.t, p.delta, p.date.as_deref().unwrap_or(""))?;
                }
                Ok(())
            }
        }
    }

    pub fn profile(&mut self, points: &[ProfilePoint]) -> std::io::Result<()> {
        match self.format {
            Format::Jsonl => points.iter().try_for_each(|p| self.json(p)),
            Format::Table => {
                writeln!(self.out, "{:>8}  {:>16}  date", "t", "stat")?;
                for p in points {
                    writeln!(self.out, "{:>8}  {:>16.6}  {}", p.t, p.stat, p.date.as_deref().unwrap_or(""))?;
                }
                Ok(())
            }
        }
    }

    pub fn monitor_summary(&mut self, s: &MonitorSummary) -> std::io::Result<()> {
        match self.format {
            Format::Jsonl => self.json(s),
            Format::Table => {
                let tau = s.tau.map_or("inf".to_string(), |t| t.to_string());
                match &s.tau_date {
                    Some(d) => self.kv("tau", format!("{tau} ({d})"))?,
                    None => self.kv("tau", tau)?,
                }
                self.kv("p_value", s.p_value)?;
                self.kv("c_alpha", s.c_alpha)?;
                self.kv("p_B", s.p_b.map_or("-".to_string(), |p| p.to_string()))?;
                self.kv("max_delta", s.max_delta)?;
                self.kv("train_len", s.train_len)?;
                self.kv("monitored", s.monitored)?;
                self.kv("ignored_rows", s.ignored_rows)?;
                self.kv("seed", s.seed)?;
                self.echo(&s.config)
            }
        }
    }

    pub fn calibrate_summary(&mut self, s: &CalibrateSummary) -> std::io::Result<()> {
        match self.format {
            Format::Jsonl => self.json(s),
            Format::Table => {
                self.kv("c_alpha", s.c_alpha)?;
                self.kv("p_B", s.p_b.map_or("-".to_string(), |p| p.to_string()))?;
                self.kv("train_len", s.train_len)?;
                self.kv("seed", s.seed)?;
                self.echo(&s.config)
            }
        }
    }

    pub fn retro_summary(&mut self, s: &RetroSummary) -> std::io::Result<()> {
        match self.format {
            Format::Jsonl => self.json(s),
            Format::Table => {
                match &s.split_date {
                    Some(d) => self.kv("split", format!("{} ({d})", s.split))?,
                    None => self.kv("split", s.split)?,
                }
                self.kv("max_stat", s.max_stat)?;
                self.kv("c_alpha", s.c_alpha)?;
                self.kv("p_value", s.p_value)?;
                self.kv("break", s.is_break)?;
                self.kv("p_B", s.p_b.map_or("-".to_string(), |p| p.to_string()))?;
                self.kv("seed", s.seed)?;
                self.echo(&s.config)
            }
        }
    }

    /// Trailing config record for a simulation table.
    pub fn simulation_config(&mut self, config: &ConfigEcho) -> std::io::Result<()> {
        match self.format {
            Format::Jsonl => self.json(&SimulationSummary { config: config.clone() }),
            Format::Table => self.echo(config),
        }
    }

    pub fn simulation(&mut self, rows: &[SimulationRow]) -> std::io::Result<()> {
        match self.format {
            Format::Jsonl => rows.iter().try_for_each(|r| self.json(r)),
            Format::Table => {
                writeln!(
                    self.out,
                    "{:<4} {:>3} {:>6} {:>3} {:>7} {:>6} {:>6} {:>7} {:>10}  route",
                    "dgp", "m", "T", "L", "a", "gamma", "alpha", "reps", "rate(%)"
                )?;
                for r in rows {
                    let x = &r.result;
                    writeln!(
                        self.out,
                        "{:<4} {:>3} {:>6} {:>3} {:>7} {:>6} {:>6} {:>7} {:>10.1}  {}",
                        x.dgp.name(),
                        x.m,
                        x.training_len,
                        x.horizon,
                        x.a,
                        x.gamma,
                        x.alpha,
                        x.reps,
                        100.0 * x.rate,
                        match r.route {
                            Route::Bootstrap => "bootstrap",
                            Route::Asymptotic => "asymptotic",
                        }
                    )?;
                }
                Ok(())
            }
        }
    }
}
