use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tlbt::io::load_manifest;
use tlbt::simulation::step_count;
use tlbt::{generate_heat_model, InputSignal, StateSpaceSystem};

use crate::CliError;

/// Where the full-order system comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSource {
    /// The heat-equation generator with `n` states, `m` inputs, `p` outputs.
    Generated { n: usize, m: usize, p: usize },
    Manifest { path: PathBuf },
}

impl ModelSource {
    pub fn load(&self) -> Result<StateSpaceSystem, CliError> {
        Ok(match self {
            ModelSource::Generated { n, m, p } => generate_heat_model(*n, *m, *p)?,
            ModelSource::Manifest { path } => load_manifest(path)?,
        })
    }
}

impl FromStr for ModelSource {
    type Err = CliError;

    /// `gen:n,m,p` or a manifest path.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let Some(spec) = s.strip_prefix("gen:") else {
            return Ok(ModelSource::Manifest { path: s.into() });
        };
        let dims: Vec<usize> = spec
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(format!("bad model spec '{s}': {e}")))?;
        match dims[..] {
            [n, m, p] => Ok(ModelSource::Generated { n, m, p }),
            _ => Err(CliError::Usage(format!("model spec '{s}' needs gen:n,m,p"))),
        }
    }
}

/// Exactly one way of fixing the reduced order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    Order(usize),
    /// Smallest order whose discarded singular values sum to at most this.
    Tol(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSpec {
    /// `value · 1_m`.
    Const { value: f64 },
    Star,
    Zero,
    /// CSV file with rows `t,u_1,…,u_m` (a header line is allowed).
    Table { path: PathBuf },
    /// Seeded piecewise-constant signal with unit L² norm on `[0, T]`.
    Random { pieces: usize },
}

impl InputSpec {
    pub fn resolve(&self, m: usize, tbar: f64, seed: u64) -> Result<InputSignal, CliError> {
        let signal = match self {
            InputSpec::Const { value } => InputSignal::constant(*value, m),
            InputSpec::Star => InputSignal::Star,
            InputSpec::Zero => InputSignal::Zero { dim: m },
            InputSpec::Table { path } => read_input_table(path)?,
            InputSpec::Random { pieces } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                InputSignal::random_piecewise_constant(m, tbar, *pieces, &mut rng)?
            }
        };
        if signal.dim() != m {
            return Err(CliError::Usage(format!(
                "input has {} channels but the model has {m} inputs",
                signal.dim()
            )));
        }
        Ok(signal)
    }
}

fn read_input_table(path: &Path) -> Result<InputSignal, CliError> {
    let io_err = |e: csv::Error| CliError::Usage(format!("{}: {e}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(io_err)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(io_err)?;
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            // A non-numeric first line is a header.
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(CliError::Usage(format!(
                    "{}:{}: {e}",
                    path.display(),
                    line + 1
                )))
            }
        };
        if row.len() < 2 {
            return Err(CliError::Usage(format!(
                "{}:{}: need a time and at least one channel",
                path.display(),
                line + 1
            )));
        }
        times.push(row[0]);
        values.push(row[1..].to_vec());
    }
    Ok(InputSignal::table(times, values)?)
}

impl FromStr for InputSpec {
    type Err = CliError;

    /// `const:c`, `star`, `zero`, `table:path` or `random:pieces`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |e: &dyn fmt::Display| CliError::Usage(format!("bad input spec '{s}': {e}"));
        match s.split_once(':') {
            None if s == "star" => Ok(InputSpec::Star),
            None if s == "zero" => Ok(InputSpec::Zero),
            Some(("const", c)) => Ok(InputSpec::Const {
                value: c.parse().map_err(|e| bad(&e))?,
            }),
            Some(("table", p)) => Ok(InputSpec::Table { path: p.into() }),
            Some(("random", k)) => Ok(InputSpec::Random {
                pieces: k.parse().map_err(|e| bad(&e))?,
            }),
            _ => Err(bad(&"expected const:c, star, zero, table:path or random:k")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    pub tbar: f64,
    pub dt: f64,
    pub t_end: f64,
    pub reduction: Reduction,
    pub input: InputSpec,
    pub seed: u64,
    pub out: PathBuf,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tbar > 0.0 && self.tbar.is_finite()) {
            return Err(CliError::Usage(format!("tbar must be positive, got {}", self.tbar)));
        }
        if self.t_end < self.tbar {
            return Err(CliError::Usage(format!(
                "tend = {} is shorter than tbar = {}",
                self.t_end, self.tbar
            )));
        }
        step_count(self.tbar, self.dt)?;
        step_count(self.t_end, self.dt)?;
        match self.reduction {
            Reduction::Order(0) => Err(CliError::Usage("order must be at least 1".into())),
            Reduction::Tol(t) if !(t >= 0.0) => {
                Err(CliError::Usage(format!("tolerance must be nonnegative, got {t}")))
            }
            _ => Ok(()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
