//! Run configuration: a flat key-value file with dotted keys.
//!
//! ```text
//! model.A     = "[-0.1]"       # row-major, d x d
//! model.sigma = "[0.5]"        # row-major, d x m
//! model.r     = 0.01
//! model.T     = 1.0
//! model.varpi = 1.0            # optional, default 1
//! model.x0    = 100
//! model.s0    = "[5]"          # optional, default 0
//! run.seed    = 42
//! ```
//!
//! The file is TOML, so lists may also be written as arrays
//! (`model.A = [-0.1]`). Unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use spreadopt::hjb::DEFAULT_GRID;
use spreadopt::ModelParams;
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    pub grid_k: usize,
    pub mc_paths: usize,
    pub mc_steps: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
}

const MODEL_KEYS: [&str; 9] = ["A", "sigma", "r", "T", "varpi", "x0", "s0", "d", "m"];
const RUN_KEYS: [&str; 6] = ["grid_k", "mc_paths", "mc_steps", "seed", "output_dir", "format"];

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// A list written either as a TOML array or as a bracketed string.
fn parse_list(key: &str, v: &Value) -> Result<Vec<f64>, CliError> {
    let bad = || config_err(format!("`{key}` must be a list of numbers"));
    match v {
        Value::Array(items) => items.iter().map(|x| as_f64(key, x)).collect(),
        Value::String(s) => {
            let inner = s.trim().strip_prefix('[').and_then(|s| s.strip_suffix(']')).ok_or_else(bad)?;
            inner
                .split([',', ' ', ';'])
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
                .collect()
        }
        Value::Integer(_) | Value::Float(_) => Ok(vec![as_f64(key, v)?]),
        _ => Err(bad()),
    }
}

fn as_f64(key: &str, v: &Value) -> Result<f64, CliError> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) => s.trim().parse().map_err(|_| config_err(format!("`{key}` must be a number"))),
        _ => Err(config_err(format!("`{key}` must be a number"))),
    }
}

fn as_count(key: &str, v: &Value) -> Result<usize, CliError> {
    match v {
        Value::Integer(i) if *i > 0 => Ok(*i as usize),
        Value::String(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(config_err(format!("`{key}` must be a positive integer"))),
        },
        _ => Err(config_err(format!("`{key}` must be a positive integer"))),
    }
}

fn section<'a>(root: &'a Table, name: &str, allowed: &[&str]) -> Result<Option<&'a Table>, CliError> {
    let Some(v) = root.get(name) else { return Ok(None) };
    let t = v.as_table().ok_or_else(|| config_err(format!("`{name}` must hold dotted keys")))?;
    for k in t.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(config_err(format!("unknown key `{name}.{k}`")));
        }
    }
    Ok(Some(t))
}

impl FromStr for RunConfig {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| config_err(e.message().to_string()))?;
        for k in root.keys() {
            if k != "model" && k != "run" {
                return Err(config_err(format!("unknown key `{k}`")));
            }
        }
        let model = section(&root, "model", &MODEL_KEYS)?.ok_or_else(|| config_err("missing `model` keys"))?;
        let get = |k: &str| model.get(k).ok_or_else(|| config_err(format!("missing `model.{k}`")));

        let a = parse_list("model.A", get("A")?)?;
        let d = match model.get("d") {
            Some(v) => as_count("model.d", v)?,
            None => {
                let d = (a.len() as f64).sqrt().round() as usize;
                if d * d != a.len() {
                    return Err(config_err(format!("`model.A` has {} entries, not a square", a.len())));
                }
                d
            }
        };
        if a.len() != d * d {
            return Err(config_err(format!("`model.A` has {} entries, expected {}", a.len(), d * d)));
        }
        let sigma = parse_list("model.sigma", get("sigma")?)?;
        let m = match model.get("m") {
            Some(v) => as_count("model.m", v)?,
            None => sigma.len() / d,
        };
        if m == 0 || sigma.len() != d * m {
            return Err(config_err(format!("`model.sigma` has {} entries, expected {d} x m", sigma.len())));
        }
        let s0 = match model.get("s0") {
            Some(v) => parse_list("model.s0", v)?,
            None => vec![0.0; d],
        };
        if s0.len() != d {
            return Err(config_err(format!("`model.s0` has {} entries, expected {d}", s0.len())));
        }
        let params = ModelParams {
            a: DMatrix::from_row_slice(d, d, &a),
            sigma: DMatrix::from_row_slice(d, m, &sigma),
            r: as_f64("model.r", get("r")?)?,
            horizon: as_f64("model.T", get("T")?)?,
            varpi: model.get("varpi").map(|v| as_f64("model.varpi", v)).transpose()?.unwrap_or(1.0),
            x0: as_f64("model.x0", get("x0")?)?,
            s0: DVector::from_vec(s0),
        };

        let mut cfg = RunConfig {
            model: params,
            grid_k: DEFAULT_GRID,
            mc_paths: 200_000,
            mc_steps: 1000,
            seed: 42,
            output_dir: PathBuf::from("out"),
            format: OutputFormat::Csv,
        };
        if let Some(run) = section(&root, "run", &RUN_KEYS)? {
            for (k, v) in run {
                let key = format!("run.{k}");
                match k.as_str() {
                    "grid_k" => cfg.grid_k = as_count(&key, v)?,
                    "mc_paths" => cfg.mc_paths = as_count(&key, v)?,
                    "mc_steps" => cfg.mc_steps = as_count(&key, v)?,
                    "seed" => {
                        cfg.seed = match v {
                            Value::Integer(i) if *i >= 0 => *i as u64,
                            Value::String(s) => s.trim().parse().map_err(|_| config_err("`run.seed` must be a u64"))?,
                            _ => return Err(config_err("`run.seed` must be a u64")),
                        }
                    }
                    "output_dir" => {
                        cfg.output_dir =
                            PathBuf::from(v.as_str().ok_or_else(|| config_err("`run.output_dir` must be a string"))?)
                    }
                    "format" => {
                        cfg.format = match v.as_str() {
                            Some("csv") => OutputFormat::Csv,
                            Some("json") => OutputFormat::Json,
                            _ => return Err(config_err("`run.format` must be \"csv\" or \"json\"")),
                        }
                    }
                    _ => unreachable!("filtered by section()"),
                }
            }
        }
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    /// Creates the output directory and checks that it is writable.
    pub fn prepare_output(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.output_dir)
            .map_err(|e| config_err(format!("cannot create {}: {e}", self.output_dir.display())))?;
        let probe = self.output_dir.join(".write-probe");
        std::fs::write(&probe, b"")
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| config_err(format!("{} is not writable: {e}", self.output_dir.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"
model.A = "[-0.1]"
model.sigma = "[0.5]"
model.r = 0.01
model.T = 1
model.x0 = 100
"#;

    #[test]
    fn scalar_defaults() {
        let c = RunConfig::from_str(SCALAR).unwrap();
        assert_eq!(c.model.a[(0, 0)], -0.1);
        assert_eq!(c.model.varpi, 1.0);
        assert_eq!(c.model.s0[0], 0.0);
        assert_eq!((c.grid_k, c.mc_paths, c.mc_steps, c.seed), (2000, 200_000, 1000, 42));
        assert_eq!(c.format, OutputFormat::Csv);
    }

    #[test]
    fn matrices_are_row_major() {
        let text = r#"
model.A = "[-0.5, 0.2; 0.1, -0.3]"
model.sigma = [0.5, 0.1, 0.0, -0.2, 0.4, 0.3]
model.r = 0.02
model.T = 1.0
model.x0 = 10
model.s0 = [1, -1]
run.format = "json"
run.seed = 7
"#;
        let c = RunConfig::from_str(text).unwrap();
        assert_eq!(c.model.a[(0, 1)], 0.2);
        assert_eq!(c.model.sigma.shape(), (2, 3));
        assert_eq!(c.model.sigma[(1, 0)], -0.2);
        assert_eq!(c.format, OutputFormat::Json);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            format!("{SCALAR}model.kappa = 1"),
            format!("{SCALAR}run.paths = 3"),
            format!("{SCALAR}extra = 1"),
            format!("{SCALAR}run.mc_paths = 0"),
            format!("{SCALAR}run.format = \"xml\""),
            SCALAR.replace("[-0.1]", "[-0.1, 0.2]"),
            SCALAR.replace("model.x0 = 100", ""),
            SCALAR.replace("\"[0.5]\"", "\"0.5\""),
        ] {
            assert!(matches!(RunConfig::from_str(&bad), Err(CliError::Config(_))), "{bad}");
        }
    }
}
