//! Experiment configuration: a flat `key=value` file, overridden by flags.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    RieszCheck,
    Sylvester,
    Simulate,
    Resolvent,
    Control,
    Verify,
}

impl Command {
    fn parse(s: &str) -> Option<Self> {
        <Self as ValueEnum>::from_str(s, false).ok()
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_possible_value().expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Command-line interface. Every flag except `--config` mirrors a config key.
#[derive(Debug, Parser)]
#[command(name = "heatwave", version, about = "Spectral experiments for the cascade heat-wave system")]
pub struct Cli {
    /// Experiment to run (may instead be given as `command=` in the config file).
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Flat key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Robin parameter of the heat controller.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Number of heat modes.
    #[arg(long = "n-heat", visible_alias = "n")]
    pub n_heat: Option<usize>,
    /// Wave half-width K (modes k = -K..K-1).
    #[arg(long = "k-wave", visible_alias = "k")]
    pub k_wave: Option<usize>,
    /// Heat modes in the feedback-coefficient series.
    #[arg(long = "n-series")]
    pub n_series: Option<usize>,
    /// Time horizon.
    #[arg(long = "t", allow_negative_numbers = true)]
    pub t: Option<f64>,
    /// Output sampling step.
    #[arg(long = "dt-out", allow_negative_numbers = true)]
    pub dt_out: Option<f64>,
    /// Seed for randomized invariant sweeps.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Target accuracy for wave steering.
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Data file format.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub command: Command,
    pub alpha: f64,
    pub n_heat: usize,
    pub k_wave: usize,
    pub n_series: usize,
    pub t: f64,
    pub dt_out: f64,
    pub seed: u64,
    pub epsilon: f64,
    pub output: PathBuf,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

pub const KEYS: [&str; 11] = [
    "command", "alpha", "n-heat", "k-wave", "n-series", "t", "dt-out", "seed", "epsilon", "output", "format",
];

/// Values read from a config file; `None` when absent.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct FileValues {
    pub command: Option<Command>,
    pub alpha: Option<f64>,
    pub n_heat: Option<usize>,
    pub k_wave: Option<usize>,
    pub n_series: Option<usize>,
    pub t: Option<f64>,
    pub dt_out: Option<f64>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

fn num<T: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| ConfigError(format!("line {line}: invalid value '{v}' for '{key}'")))
}

/// Parses `key=value` lines. `#` starts a comment; keys may not repeat.
pub fn parse_config_text(text: &str) -> Result<FileValues, ConfigError> {
    let mut out = FileValues::default();
    let mut seen: Vec<String> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return bad(format!("line {line_no}: expected key=value"));
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return bad(format!("line {line_no}: unknown key '{k}'"));
        }
        if seen.iter().any(|s| s == k) {
            return bad(format!("line {line_no}: duplicate key '{k}'"));
        }
        seen.push(k.to_string());
        match k {
            "command" => {
                out.command =
                    Some(Command::parse(v).ok_or_else(|| ConfigError(format!("line {line_no}: unknown command '{v}'")))?)
            }
            "alpha" => out.alpha = Some(num(k, v, line_no)?),
            "n-heat" => out.n_heat = Some(num(k, v, line_no)?),
            "k-wave" => out.k_wave = Some(num(k, v, line_no)?),
            "n-series" => out.n_series = Some(num(k, v, line_no)?),
            "t" => out.t = Some(num(k, v, line_no)?),
            "dt-out" => out.dt_out = Some(num(k, v, line_no)?),
            "seed" => out.seed = Some(num(k, v, line_no)?),
            "epsilon" => out.epsilon = Some(num(k, v, line_no)?),
            "output" => out.output = Some(PathBuf::from(v)),
            "format" => {
                out.format = Some(match v {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    _ => return bad(format!("line {line_no}: format must be csv or json")),
                })
            }
            _ => unreachable!(),
        }
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<FileValues, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text)
}

impl ExperimentConfig {
    /// Defaults, then the file, then flags.
    pub fn resolve(cli: &Cli, file: &FileValues) -> Result<Self, ConfigError> {
        let Some(command) = cli.command.or(file.command) else {
            return bad("no command given");
        };
        let cfg = Self {
            command,
            alpha: cli.alpha.or(file.alpha).unwrap_or(0.05),
            n_heat: cli.n_heat.or(file.n_heat).unwrap_or(16),
            k_wave: cli.k_wave.or(file.k_wave).unwrap_or(16),
            n_series: cli.n_series.or(file.n_series).unwrap_or(heatwave::sylvester::DEFAULT_N_SERIES),
            t: cli.t.or(file.t).unwrap_or(10.0),
            dt_out: cli.dt_out.or(file.dt_out).unwrap_or(0.1),
            seed: cli.seed.or(file.seed).unwrap_or(0),
            epsilon: cli.epsilon.or(file.epsilon).unwrap_or(1e-3),
            output: cli.output.clone().or_else(|| file.output.clone()).unwrap_or_else(|| PathBuf::from("out")),
            format: cli.format.or(file.format).unwrap_or(Format::Csv),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return bad(format!("alpha must be finite and >= 0, got {}", self.alpha));
        }
        if self.n_heat < 1 || self.k_wave < 1 {
            return bad("n-heat and k-wave must be >= 1");
        }
        if self.n_series < 2 {
            return bad("n-series must be >= 2");
        }
        if !(self.t > 0.0) || !self.t.is_finite() {
            return bad(format!("t must be positive, got {}", self.t));
        }
        if !(self.dt_out > 0.0) || self.dt_out > self.t {
            return bad(format!("dt-out must lie in (0, t], got {}", self.dt_out));
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        let needs_feedback = matches!(self.command, Command::Sylvester | Command::Simulate | Command::Resolvent);
        if needs_feedback && self.alpha == 0.0 {
            return bad(format!("{} needs alpha > 0", self.command));
        }
        if self.command == Command::Control && self.t < 2.0 {
            return bad("control needs t >= 2");
        }
        Ok(())
    }
}
