//! Experiment orchestration: the train / execute / mitigate / post-select
//! pipeline per time step, noise-rate-by-depth sweeps, parameter caching, and
//! the CSV/SVG artifact and CLI layers.

pub mod artifacts;
pub mod cli;
pub mod config;

use crate::circuit::AnsatzSpec;
use crate::circuit::ParamVector;
use crate::mitigate::{
    build_full_calibration, build_readout_calibration, mitigate, Backend, CalibrationMatrix,
    MitigateError, MitigationPolicy,
};
use crate::noisesim::{
    derive_seed, run_density_noisy, run_trajectories, NoiseModel, OutcomeDistribution, ShotPlan,
    SimError,
};
use crate::nonherm::{
    exact_reference, post_select, z_magnetization, NonHermError, TfiParams, TimeGrid,
};
use crate::varopt::{
    to_trained_steps, train_evolution, train_identity, IdentityMode, TrainConfig, TrainError,
    TrainedStep,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("at t = {t} ({mode}): {message}")]
    StepFailure {
        t: f64,
        mode: &'static str,
        message: String,
    },
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Mitigate(#[from] MitigateError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    NonHerm(#[from] NonHermError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Which corrections to apply to each measured distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MitigationMode {
    None,
    Readout,
    Full,
}

/// Everything one experiment needs: model, grid, circuit depth, noise,
/// backend, mitigation choices, and the training schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub tfi: TfiParams,
    pub grid: TimeGrid,
    pub layers: usize,
    pub noise: NoiseModel,
    pub shots: u64,
    pub seed: u64,
    pub backend: Backend,
    pub mitigation_modes: Vec<MitigationMode>,
    pub identity_mode: IdentityMode,
    pub policy: MitigationPolicy,
    pub train: TrainConfig,
    pub sweep_cx_errors: Vec<f64>,
    pub sweep_layers: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            tfi: TfiParams::default(),
            grid: TimeGrid::default(),
            layers: 2,
            noise: NoiseModel::new(0.012, 0.01).expect("valid"),
            shots: 32000,
            seed: 7,
            backend: Backend::Density,
            mitigation_modes: vec![
                MitigationMode::None,
                MitigationMode::Readout,
                MitigationMode::Full,
            ],
            identity_mode: IdentityMode::Analytic,
            policy: MitigationPolicy::Simplex,
            train: TrainConfig::default(),
            sweep_cx_errors: vec![0.003, 0.006, 0.009, 0.012, 0.015],
            sweep_layers: vec![2, 3, 4, 5],
        }
    }
}

impl ExperimentConfig {
    pub fn spec(&self) -> AnsatzSpec {
        AnsatzSpec::chain(self.tfi.sites + 1, self.layers).expect("sites >= 1, layers >= 1")
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train
        }
    }

    pub fn wants(&self, mode: MitigationMode) -> bool {
        self.mitigation_modes.contains(&mode)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.mitigation_modes.is_empty() {
            return Err(BenchError::Config(
                "mitigation modes must be non-empty".into(),
            ));
        }
        if self.layers == 0 {
            return Err(BenchError::Config("layers must be at least 1".into()));
        }
        if self.shots == 0 {
            return Err(BenchError::Config("shots must be at least 1".into()));
        }
        for &p in &self.sweep_cx_errors {
            if !(0.0..=0.05).contains(&p) {
                return Err(BenchError::Config(format!(
                    "sweep cx error {p} outside [0, 0.05]"
                )));
            }
        }
        if self.sweep_layers.contains(&0) {
            return Err(BenchError::Config("sweep layers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Built-in noise presets (mean CX error rate, readout error rate).
pub fn device_presets() -> &'static [(&'static str, f64, f64)] {
    &[
        ("device-a", 0.012, 0.01),
        ("device-b", 0.012, 0.01),
        ("device-c", 0.015, 0.01),
    ]
}

/// One time step of an experiment: the exact value, per-mode magnetizations,
/// the raw post-selection success probability, and the training cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub t: f64,
    pub z_exact: f64,
    pub z_raw: f64,
    pub z_readout: Option<f64>,
    pub z_full: Option<f64>,
    pub success_prob: f64,
    pub train_cost: f64,
}

/// One cell of a noise-rate x depth sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub n: usize,
    pub dev_raw: f64,
    pub dev_readout: Option<f64>,
    pub dev_full: Option<f64>,
}

// ---------------------------------------------------------------------------
// Trained-parameter cache
// ---------------------------------------------------------------------------

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Caches trained parameters keyed by (ansatz, model, grid, seed, training
/// knobs). Noise never enters the key: training is noiseless, so sweeps over
/// error rates reuse one training pass per depth.
pub struct ParamCache {
    dir: Option<PathBuf>,
    mem: HashMap<String, Vec<TrainedStep>>,
}

impl ParamCache {
    pub fn in_memory() -> Self {
        Self {
            dir: None,
            mem: HashMap::new(),
        }
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Result<Self, BenchError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir: Some(dir),
            mem: HashMap::new(),
        })
    }

    fn evolution_key(cfg: &ExperimentConfig) -> String {
        let t = cfg.train_config();
        let raw = format!(
            "evo|q{}|n{}|N{}|J{:.12e}|hx{:.12e}|g{:.12e}|dt{:.12e}|T{}|seed{}|r{}|it{}|fd{:.3e}|gt{:.3e}|es{:.3e}|pb{:.12e}|lb{:.6e}|ub{:.6e}",
            cfg.tfi.sites + 1,
            cfg.layers,
            cfg.tfi.sites,
            cfg.tfi.coupling,
            cfg.tfi.transverse_field,
            cfg.tfi.imaginary_field,
            cfg.grid.dt,
            cfg.grid.steps,
            t.seed,
            t.restarts,
            t.max_iterations,
            t.fd_step,
            t.grad_tol,
            t.early_stop_cost,
            t.perturbation,
            t.lower_bound,
            t.upper_bound,
        );
        format!(
            "n{}-seed{}-{:016x}",
            cfg.layers,
            t.seed,
            fnv1a64(raw.as_bytes())
        )
    }

    fn identity_key(cfg: &ExperimentConfig) -> String {
        let t = cfg.train_config();
        let raw = format!(
            "id|q{}|n{}|mode{:?}|seed{}|r{}|it{}|fd{:.3e}|gt{:.3e}|es{:.3e}|pb{:.12e}",
            cfg.tfi.sites + 1,
            cfg.layers,
            cfg.identity_mode,
            t.seed,
            t.restarts,
            t.max_iterations,
            t.fd_step,
            t.grad_tol,
            t.early_stop_cost,
            t.perturbation,
        );
        format!(
            "idn{}-seed{}-{:016x}",
            cfg.layers,
            t.seed,
            fnv1a64(raw.as_bytes())
        )
    }

    fn load(&mut self, key: &str) -> Option<Vec<TrainedStep>> {
        if let Some(hit) = self.mem.get(key) {
            return Some(hit.clone());
        }
        let dir = self.dir.as_ref()?;
        let path = dir.join(format!("params-{key}.json"));
        let text = std::fs::read_to_string(path).ok()?;
        let steps: Vec<TrainedStep> = serde_json::from_str(&text).ok()?;
        self.mem.insert(key.to_string(), steps.clone());
        Some(steps)
    }

    fn store(&mut self, key: &str, steps: &[TrainedStep]) -> Result<(), BenchError> {
        self.mem.insert(key.to_string(), steps.to_vec());
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("params-{key}.json"));
            std::fs::write(path, serde_json::to_string_pretty(steps)?)?;
        }
        Ok(())
    }

    /// Trained parameters for every grid time, training only on a cache miss.
    pub fn get_or_train_evolution(
        &mut self,
        cfg: &ExperimentConfig,
    ) -> Result<Vec<TrainedStep>, BenchError> {
        let key = Self::evolution_key(cfg);
        if let Some(hit) = self.load(&key) {
            return Ok(hit);
        }
        let results = train_evolution(&cfg.spec(), &cfg.tfi, &cfg.grid, &cfg.train_config())?;
        let steps = to_trained_steps(&cfg.grid, &results);
        self.store(&key, &steps)?;
        Ok(steps)
    }

    /// Identity-circuit parameters (analytic mode is free and never cached to
    /// disk; variational mode is trained once per key).
    pub fn get_or_train_identity(
        &mut self,
        cfg: &ExperimentConfig,
    ) -> Result<TrainedStep, BenchError> {
        if cfg.identity_mode == IdentityMode::Analytic {
            let r = train_identity(&cfg.spec(), &cfg.train_config(), IdentityMode::Analytic)?;
            return Ok(TrainedStep {
                t: 0.0,
                cost: r.final_cost,
                params: r.params.into_vec(),
            });
        }
        let key = Self::identity_key(cfg);
        if let Some(hit) = self.load(&key) {
            return Ok(hit
                .into_iter()
                .next()
                .expect("identity cache holds one step"));
        }
        let r = train_identity(&cfg.spec(), &cfg.train_config(), IdentityMode::Variational)?;
        let step = TrainedStep {
            t: 0.0,
            cost: r.final_cost,
            params: r.params.into_vec(),
        };
        self.store(&key, std::slice::from_ref(&step))?;
        Ok(step)
    }
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

/// Noise-independent inputs of an experiment: the exact curve, trained
/// parameters per time step, and the identity-circuit parameters.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub exact: Vec<f64>,
    pub trained: Vec<TrainedStep>,
    pub identity: TrainedStep,
}

pub fn prepare(
    cfg: &ExperimentConfig,
    cache: &mut ParamCache,
) -> Result<PreparedExperiment, BenchError> {
    cfg.validate()?;
    let exact = exact_reference(&cfg.tfi, &cfg.grid)?;
    let trained = cache.get_or_train_evolution(cfg)?;
    let identity = cache.get_or_train_identity(cfg)?;
    Ok(PreparedExperiment {
        exact,
        trained,
        identity,
    })
}

fn execute_circuit(
    cfg: &ExperimentConfig,
    spec: &AnsatzSpec,
    params: &ParamVector,
    step_index: usize,
) -> Result<OutcomeDistribution, BenchError> {
    let input = cfg.tfi.initial_state_index();
    let dist = match cfg.backend {
        Backend::Density => run_density_noisy(spec, params, input, &cfg.noise)?,
        Backend::Trajectory => {
            let plan = ShotPlan {
                shots: cfg.shots,
                seed: derive_seed(cfg.seed, 1000 + step_index as u64),
            };
            run_trajectories(spec, params, input, &cfg.noise, &plan)?
        }
    };
    Ok(dist)
}

fn build_calibrations(
    cfg: &ExperimentConfig,
    identity: &TrainedStep,
) -> Result<(Option<CalibrationMatrix>, Option<CalibrationMatrix>), BenchError> {
    let spec = cfg.spec();
    let full = if cfg.wants(MitigationMode::Full) {
        let plan = ShotPlan {
            shots: cfg.shots,
            seed: derive_seed(cfg.seed, 2000),
        };
        let plan_ref = (cfg.backend == Backend::Trajectory).then_some(&plan);
        let identity_params =
            ParamVector::from_vec(&spec, identity.params.clone()).map_err(TrainError::from)?;
        Some(build_full_calibration(
            &spec,
            &identity_params,
            &cfg.noise,
            cfg.backend,
            plan_ref,
        )?)
    } else {
        None
    };
    let readout = if cfg.wants(MitigationMode::Readout) {
        let plan = ShotPlan {
            shots: cfg.shots,
            seed: derive_seed(cfg.seed, 3000),
        };
        let plan_ref = (cfg.backend == Backend::Trajectory).then_some(&plan);
        Some(build_readout_calibration(
            cfg.tfi.sites + 1,
            &cfg.noise,
            cfg.backend,
            plan_ref,
        )?)
    } else {
        None
    };
    Ok((full, readout))
}

fn mitigated_z(
    dist: &OutcomeDistribution,
    m: &CalibrationMatrix,
    policy: MitigationPolicy,
    t: f64,
    mode: &'static str,
) -> Result<f64, BenchError> {
    let corrected = mitigate(dist, m, policy).map_err(|e| BenchError::StepFailure {
        t,
        mode,
        message: e.to_string(),
    })?;
    let (kept, _) = post_select(&corrected).map_err(|e| BenchError::StepFailure {
        t,
        mode,
        message: e.to_string(),
    })?;
    Ok(z_magnetization(&kept))
}

/// Runs the full pipeline for every time step against prepared inputs:
/// execute under noise, apply each requested mitigation, post-select, and
/// measure the magnetization.
pub fn execute(
    cfg: &ExperimentConfig,
    prepared: &PreparedExperiment,
) -> Result<Vec<RunRecord>, BenchError> {
    let spec = cfg.spec();
    let (m_full, m_readout) = build_calibrations(cfg, &prepared.identity)?;
    let mut records = Vec::with_capacity(prepared.trained.len());
    for (k, step) in prepared.trained.iter().enumerate() {
        let t = step.t;
        let params = ParamVector::from_vec(&spec, step.params.clone()).map_err(TrainError::from)?;
        let dist = execute_circuit(cfg, &spec, &params, k)?;

        let (kept_raw, success) = post_select(&dist).map_err(|e| BenchError::StepFailure {
            t,
            mode: "raw",
            message: e.to_string(),
        })?;
        let z_raw = z_magnetization(&kept_raw);

        let z_readout = m_readout
            .as_ref()
            .map(|m| mitigated_z(&dist, m, cfg.policy, t, "readout"))
            .transpose()?;
        let z_full = m_full
            .as_ref()
            .map(|m| mitigated_z(&dist, m, cfg.policy, t, "full"))
            .transpose()?;

        records.push(RunRecord {
            t,
            z_exact: prepared.exact[k],
            z_raw,
            z_readout,
            z_full,
            success_prob: success,
            train_cost: step.cost,
        });
    }
    Ok(records)
}

/// Train (or load), execute, mitigate, post-select, and measure: one call for
/// a whole configured experiment.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    cache: &mut ParamCache,
) -> Result<Vec<RunRecord>, BenchError> {
    let prepared = prepare(cfg, cache)?;
    execute(cfg, &prepared)
}

fn mean_abs_deviation(exact: &[f64], values: impl Iterator<Item = f64>) -> f64 {
    let devs: Vec<f64> = exact
        .iter()
        .zip(values)
        .map(|(e, v)| (e - v).abs())
        .collect();
    crate::nonherm::avg_deviation(&devs)
}

/// Sweeps error rate x depth. Training happens once per depth (serial, so the
/// cache fills deterministically); the cells then run in parallel and their
/// rows come back ordered p-major.
pub fn sweep(base: &ExperimentConfig, cache: &mut ParamCache) -> Result<Vec<SweepRow>, BenchError> {
    base.validate()?;
    let mut prepared_by_depth: HashMap<usize, PreparedExperiment> = HashMap::new();
    for &n in &base.sweep_layers {
        let cfg_n = ExperimentConfig {
            layers: n,
            ..base.clone()
        };
        prepared_by_depth.insert(n, prepare(&cfg_n, cache)?);
    }

    let cells: Vec<(f64, usize)> = base
        .sweep_cx_errors
        .iter()
        .flat_map(|&p| base.sweep_layers.iter().map(move |&n| (p, n)))
        .collect();

    let rows: Result<Vec<SweepRow>, BenchError> = cells
        .par_iter()
        .map(|&(p, n)| {
            let cfg_cell = ExperimentConfig {
                layers: n,
                noise: NoiseModel::new(p, base.noise.readout_flip)?,
                ..base.clone()
            };
            let prepared = &prepared_by_depth[&n];
            let records = execute(&cfg_cell, prepared)?;
            let exact: Vec<f64> = records.iter().map(|r| r.z_exact).collect();
            let dev_raw = mean_abs_deviation(&exact, records.iter().map(|r| r.z_raw));
            let dev_readout = records
                .iter()
                .map(|r| r.z_readout)
                .collect::<Option<Vec<f64>>>()
                .map(|zs| mean_abs_deviation(&exact, zs.into_iter()));
            let dev_full = records
                .iter()
                .map(|r| r.z_full)
                .collect::<Option<Vec<f64>>>()
                .map(|zs| mean_abs_deviation(&exact, zs.into_iter()));
            Ok(SweepRow {
                p,
                n,
                dev_raw,
                dev_readout,
                dev_full,
            })
        })
        .collect();
    rows
}
