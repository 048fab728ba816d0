//! Config files: flat `key = value` lines with `#` comments, plus built-in
//! named configurations.
//!
//! | key                | value                                   |
//! |--------------------|-----------------------------------------|
//! | sites              | measurement qubits (default 4)          |
//! | coupling           | J (default 1.0)                         |
//! | transverse_field   | h_x (default 1.5)                       |
//! | imaginary_field    | gamma (default -0.5)                    |
//! | boundary           | `open` (periodic is rejected)           |
//! | dt / steps         | time grid (default 2.0 / 11)            |
//! | layers             | ansatz depth (default 2)                |
//! | cx_error           | depolarizing p (default 0.012)          |
//! | readout_error      | flip q (default 0.01)                   |
//! | preset             | device-a / device-b / device-c          |
//! | shots / seed       | sampling plan (default 32000 / 7)       |
//! | backend            | `density` or `trajectory`               |
//! | mitigation         | comma list of none, readout, full       |
//! | identity           | `analytic` or `variational`             |
//! | policy             | `simplex` or `raw_quasi`                |
//! | restarts           | training restarts (default 8)           |
//! | max_iterations     | per-restart cap (default 500)           |
//! | fd_step            | gradient step (default 1e-6)            |
//! | grad_tol           | stop tolerance (default 1e-8)           |
//! | early_stop_cost    | restart short-circuit (default 1e-8)    |
//! | perturbation       | restart init amplitude (default pi/4)   |
//! | sweep_cx_errors    | comma list of p values for `sweep`      |
//! | sweep_layers       | comma list of depths for `sweep`        |

use super::{device_presets, BenchError, ExperimentConfig, MitigationMode};
use crate::mitigate::{Backend, MitigationPolicy};
use crate::noisesim::NoiseModel;
use crate::nonherm::{TfiParams, TimeGrid};
use crate::varopt::IdentityMode;
use std::path::Path;

/// Named built-in configurations.
///
/// * `default` – 4 sites + ancilla, 2 layers, p = 0.012, q = 0.01, density.
/// * `noise-sweep` – the 5 x 4 error-rate-by-depth sweep grid.
/// * `depth-comparison` – p = 0.012 across 3, 4, 5 layers.
/// * `device-a` / `device-b` / `device-c` – noise presets with mean CX error
///   rates 0.012, 0.012, 0.015.
pub fn builtin(name: &str) -> Option<ExperimentConfig> {
    let base = ExperimentConfig::default();
    match name {
        "default" => Some(base),
        "noise-sweep" => Some(ExperimentConfig {
            sweep_cx_errors: vec![0.003, 0.006, 0.009, 0.012, 0.015],
            sweep_layers: vec![2, 3, 4, 5],
            ..base
        }),
        "depth-comparison" => Some(ExperimentConfig {
            sweep_cx_errors: vec![0.012],
            sweep_layers: vec![3, 4, 5],
            ..base
        }),
        _ => device_presets()
            .iter()
            .find(|(n, _, _)| *n == name)
            .map(|&(_, p, q)| ExperimentConfig {
                noise: NoiseModel::new(p, q).expect("preset rates are valid"),
                ..base
            }),
    }
}

pub fn builtin_names() -> Vec<&'static str> {
    let mut names = vec!["default", "noise-sweep", "depth-comparison"];
    names.extend(device_presets().iter().map(|(n, _, _)| *n));
    names
}

/// Loads a config by file path or built-in name (paths win).
pub fn load(path_or_name: &str) -> Result<ExperimentConfig, BenchError> {
    let path = Path::new(path_or_name);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return parse(&text);
    }
    builtin(path_or_name).ok_or_else(|| {
        BenchError::Config(format!(
            "no config file at '{path_or_name}' and no built-in by that name \
             (built-ins: {})",
            builtin_names().join(", ")
        ))
    })
}

fn parse_f64(key: &str, value: &str) -> Result<f64, BenchError> {
    value
        .parse::<f64>()
        .map_err(|_| BenchError::Config(format!("key '{key}': '{value}' is not a number")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize, BenchError> {
    value
        .parse::<usize>()
        .map_err(|_| BenchError::Config(format!("key '{key}': '{value}' is not a count")))
}

fn parse_list_f64(key: &str, value: &str) -> Result<Vec<f64>, BenchError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(key, s))
        .collect()
}

fn parse_list_usize(key: &str, value: &str) -> Result<Vec<usize>, BenchError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_usize(key, s))
        .collect()
}

/// Parses flat `key = value` text into a config, starting from defaults.
pub fn parse(text: &str) -> Result<ExperimentConfig, BenchError> {
    let mut cfg = ExperimentConfig::default();
    let mut cx_error = cfg.noise.cx_depol;
    let mut readout_error = cfg.noise.readout_flip;

    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(idx) => &raw_line[..idx],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(BenchError::Config(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "sites" => {
                cfg.tfi = TfiParams {
                    sites: parse_usize(key, value)?,
                    ..cfg.tfi
                };
                if cfg.tfi.sites < 2 {
                    return Err(BenchError::Config("sites must be at least 2".into()));
                }
            }
            "coupling" => {
                cfg.tfi = TfiParams {
                    coupling: parse_f64(key, value)?,
                    ..cfg.tfi
                }
            }
            "transverse_field" => {
                cfg.tfi = TfiParams {
                    transverse_field: parse_f64(key, value)?,
                    ..cfg.tfi
                }
            }
            "imaginary_field" => {
                cfg.tfi = TfiParams {
                    imaginary_field: parse_f64(key, value)?,
                    ..cfg.tfi
                }
            }
            "boundary" => match value {
                "open" => {}
                other => {
                    return Err(BenchError::Config(format!(
                        "boundary '{other}' is not supported; only 'open' chains are implemented"
                    )))
                }
            },
            "dt" => {
                let dt = parse_f64(key, value)?;
                if dt <= 0.0 {
                    return Err(BenchError::Config("dt must be positive".into()));
                }
                cfg.grid = TimeGrid { dt, ..cfg.grid };
            }
            "steps" => {
                let steps = parse_usize(key, value)?;
                if steps == 0 {
                    return Err(BenchError::Config("steps must be at least 1".into()));
                }
                cfg.grid = TimeGrid { steps, ..cfg.grid };
            }
            "layers" => cfg.layers = parse_usize(key, value)?,
            "cx_error" => cx_error = parse_f64(key, value)?,
            "readout_error" => readout_error = parse_f64(key, value)?,
            "preset" => {
                let preset = device_presets()
                    .iter()
                    .find(|(n, _, _)| *n == value)
                    .ok_or_else(|| {
                        BenchError::Config(format!(
                            "unknown preset '{value}' (try device-a, device-b, device-c)"
                        ))
                    })?;
                cx_error = preset.1;
                readout_error = preset.2;
            }
            "shots" => cfg.shots = parse_usize(key, value)? as u64,
            "seed" => {
                cfg.seed = value.parse::<u64>().map_err(|_| {
                    BenchError::Config(format!("key 'seed': '{value}' is not a u64"))
                })?
            }
            "backend" => {
                cfg.backend = match value {
                    "density" => Backend::Density,
                    "trajectory" => Backend::Trajectory,
                    other => {
                        return Err(BenchError::Config(format!(
                            "backend '{other}' is not density or trajectory"
                        )))
                    }
                }
            }
            "mitigation" => {
                let mut modes = Vec::new();
                for item in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    modes.push(match item {
                        "none" => MitigationMode::None,
                        "readout" => MitigationMode::Readout,
                        "full" => MitigationMode::Full,
                        other => {
                            return Err(BenchError::Config(format!(
                                "mitigation mode '{other}' is not none/readout/full"
                            )))
                        }
                    });
                }
                cfg.mitigation_modes = modes;
            }
            "identity" => {
                cfg.identity_mode = match value {
                    "analytic" => IdentityMode::Analytic,
                    "variational" => IdentityMode::Variational,
                    other => {
                        return Err(BenchError::Config(format!(
                            "identity mode '{other}' is not analytic or variational"
                        )))
                    }
                }
            }
            "policy" => {
                cfg.policy = match value {
                    "simplex" => MitigationPolicy::Simplex,
                    "raw_quasi" => MitigationPolicy::RawQuasi,
                    other => {
                        return Err(BenchError::Config(format!(
                            "policy '{other}' is not simplex or raw_quasi"
                        )))
                    }
                }
            }
            "restarts" => cfg.train.restarts = parse_usize(key, value)?,
            "max_iterations" => cfg.train.max_iterations = parse_usize(key, value)?,
            "fd_step" => cfg.train.fd_step = parse_f64(key, value)?,
            "grad_tol" => cfg.train.grad_tol = parse_f64(key, value)?,
            "early_stop_cost" => cfg.train.early_stop_cost = parse_f64(key, value)?,
            "perturbation" => cfg.train.perturbation = parse_f64(key, value)?,
            "sweep_cx_errors" => cfg.sweep_cx_errors = parse_list_f64(key, value)?,
            "sweep_layers" => cfg.sweep_layers = parse_list_usize(key, value)?,
            other => {
                return Err(BenchError::Config(format!(
                    "unknown config key '{other}' on line {}",
                    lineno + 1
                )))
            }
        }
    }

    cfg.noise = NoiseModel::new(cx_error, readout_error)?;
    cfg.validate()?;
    Ok(cfg)
}
