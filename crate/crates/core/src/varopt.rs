//! Variational training of the ansatz: a bound-constrained limited-memory
//! quasi-Newton optimizer with central finite-difference gradients, the
//! state-overlap cost, multi-restart training across the time grid with warm
//! starts, and construction of the identity calibration circuit.

use crate::circuit::{
    ansatz_unitary, apply_circuit_to_basis, AnsatzSpec, CircuitError, ParamVector,
};
use crate::noisesim::derive_seed;
use crate::nonherm::{embedded_evolution, NonHermError, TfiParams, TimeGrid};
use crate::numkit::{vec_inner, ComplexMatrix};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training failed at t = {t}: best cost {best_cost:.3e} never fell below 0.2")]
    TrainingFailed { t: f64, best_cost: f64 },
    #[error("variational identity training failed: best cost {best_cost:.3e} above 1e-3")]
    IdentityTrainingFailed { best_cost: f64 },
    #[error("ansatz has {spec_qubits} qubits but the model needs {expected} (sites + ancilla)")]
    SpecMismatch { spec_qubits: usize, expected: usize },
    #[error(transparent)]
    NonHerm(#[from] NonHermError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Optimizer and restart-schedule knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Independent restarts per time step.
    pub restarts: usize,
    /// Iteration cap per restart.
    pub max_iterations: usize,
    /// Central-difference step.
    pub fd_step: f64,
    /// Box bounds applied to every angle.
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// Projected-gradient norm below which a restart stops.
    pub grad_tol: f64,
    /// Skip remaining restarts once the best cost falls this low.
    pub early_stop_cost: f64,
    /// Restart inits are all-zero plus uniform noise of this amplitude.
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            max_iterations: 500,
            fd_step: 1e-6,
            lower_bound: -PI,
            upper_bound: PI,
            grad_tol: 1e-8,
            early_stop_cost: 1e-8,
            perturbation: PI / 4.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Outcome of training one time step.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: ParamVector,
    pub final_cost: f64,
    pub iterations: usize,
    pub restart_index: usize,
}

/// Serialized form of a trained step: `{t, cost, params[]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedStep {
    pub t: f64,
    pub cost: f64,
    pub params: Vec<f64>,
}

pub fn to_trained_steps(grid: &TimeGrid, results: &[TrainResult]) -> Vec<TrainedStep> {
    grid.times()
        .iter()
        .zip(results)
        .map(|(&t, r)| TrainedStep {
            t,
            cost: r.final_cost,
            params: r.params.as_slice().to_vec(),
        })
        .collect()
}

/// State-overlap cost `1 - |<psi0| V^dag U |psi0>|`, evaluated exactly.
pub fn cost(
    spec: &AnsatzSpec,
    params: &ParamVector,
    target: &ComplexMatrix,
    psi0_index: usize,
) -> Result<f64, TrainError> {
    let target_col = target.column(psi0_index);
    Ok(overlap_cost(
        spec,
        params.as_slice(),
        &target_col,
        psi0_index,
    ))
}

fn overlap_cost(
    spec: &AnsatzSpec,
    values: &[f64],
    target_state: &[num_complex::Complex64],
    psi0_index: usize,
) -> f64 {
    let params = ParamVector::from_vec(spec, values.to_vec()).expect("length fixed by caller");
    let v_state = apply_circuit_to_basis(spec, &params, psi0_index).expect("valid input");
    let overlap = vec_inner(&v_state, target_state);
    (1.0 - overlap.norm()).max(0.0)
}

/// Central finite-difference gradient of an arbitrary objective.
pub fn finite_diff_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let fplus = f(&probe);
        probe[i] = orig - h;
        let fminus = f(&probe);
        probe[i] = orig;
        g[i] = (fplus - fminus) / (2.0 * h);
    }
    g
}

/// Gradient of the state-overlap cost with respect to every angle.
pub fn gradient(
    spec: &AnsatzSpec,
    params: &ParamVector,
    target: &ComplexMatrix,
    psi0_index: usize,
    h: f64,
) -> Result<Vec<f64>, TrainError> {
    let target_col = target.column(psi0_index);
    let spec = spec.clone();
    let f = move |x: &[f64]| overlap_cost(&spec, x, &target_col, psi0_index);
    Ok(finite_diff_gradient(&f, params.as_slice(), h))
}

// ---------------------------------------------------------------------------
// Bound-constrained limited-memory quasi-Newton minimizer
// ---------------------------------------------------------------------------

pub struct MinimizeOptions {
    pub max_iterations: usize,
    pub memory: usize,
    pub grad_tol: f64,
    pub fd_step: f64,
}

impl From<&TrainConfig> for MinimizeOptions {
    fn from(cfg: &TrainConfig) -> Self {
        Self {
            max_iterations: cfg.max_iterations,
            memory: 10,
            grad_tol: cfg.grad_tol,
            fd_step: cfg.fd_step,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
}

fn clamp_into(x: &mut [f64], lower: f64, upper: f64) {
    for v in x.iter_mut() {
        *v = v.clamp(lower, upper);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn line_search(
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    fx: f64,
    g: &[f64],
    direction: &[f64],
    lower: f64,
    upper: f64,
) -> Option<(Vec<f64>, f64)> {
    let mut alpha = 1.0f64;
    for _ in 0..50 {
        let mut x_new: Vec<f64> = x
            .iter()
            .zip(direction)
            .map(|(xi, di)| xi + alpha * di)
            .collect();
        clamp_into(&mut x_new, lower, upper);
        let step: Vec<f64> = x_new.iter().zip(x).map(|(a, b)| a - b).collect();
        if step.iter().all(|&s| s == 0.0) {
            return None;
        }
        let f_new = f(&x_new);
        let slope = dot(g, &step);
        if f_new <= fx + 1e-4 * slope {
            return Some((x_new, f_new));
        }
        // Minimizer of the quadratic through f(x), slope, and f(x + step),
        // clamped into [0.1, 0.5] of the current length.
        let denom = 2.0 * (f_new - fx - slope);
        let mut shrink = 0.5;
        if denom > 0.0 && slope < 0.0 {
            shrink = (-slope / denom).clamp(0.1, 0.5);
        }
        alpha *= shrink;
    }
    None
}

fn projected_gradient_inf_norm(x: &[f64], g: &[f64], lower: f64, upper: f64) -> f64 {
    let eps = 1e-12;
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| {
            if (xi <= lower + eps && gi > 0.0) || (xi >= upper - eps && gi < 0.0) {
                0.0
            } else {
                gi.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Projected L-BFGS over a box: two-loop recursion for the search direction,
/// projection onto the bounds, and Armijo backtracking on the projected
/// point. Curvature pairs that fail the positivity check are skipped.
pub fn minimize(
    f: &dyn Fn(&[f64]) -> f64,
    x0: &[f64],
    lower: f64,
    upper: f64,
    opts: &MinimizeOptions,
) -> Minimum {
    let n = x0.len();
    let mut x = x0.to_vec();
    clamp_into(&mut x, lower, upper);
    let mut fx = f(&x);
    let mut g = finite_diff_gradient(f, &x, opts.fd_step);
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;
    let mut stagnant = 0u32;

    for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        if projected_gradient_inf_norm(&x, &g, lower, upper) <= opts.grad_tol {
            break;
        }

        // Two-loop recursion.
        let mut direction: Vec<f64> = g.iter().map(|v| -v).collect();
        if !pairs.is_empty() {
            let mut q = g.clone();
            let mut alphas = Vec::with_capacity(pairs.len());
            for (s, y, rho) in pairs.iter().rev() {
                let alpha = rho * dot(s, &q);
                for (qi, yi) in q.iter_mut().zip(y) {
                    *qi -= alpha * yi;
                }
                alphas.push(alpha);
            }
            let (s_last, y_last, _) = pairs.back().expect("non-empty");
            let gamma = dot(s_last, y_last) / dot(y_last, y_last);
            for qi in q.iter_mut() {
                *qi *= gamma;
            }
            for ((s, y, rho), alpha) in pairs.iter().zip(alphas.into_iter().rev()) {
                let beta = rho * dot(y, &q);
                for (qi, si) in q.iter_mut().zip(s) {
                    *qi += (alpha - beta) * si;
                }
            }
            direction = q.iter().map(|v| -v).collect();
        }
        if dot(&direction, &g) >= 0.0 {
            direction = g.iter().map(|v| -v).collect();
        }

        // Backtracking Armijo search on the projected step, with quadratic
        // interpolation of the step length. If the quasi-Newton direction
        // fails outright, drop the curvature memory and retry along the
        // gradient before giving up.
        let mut accepted = line_search(f, &x, fx, &g, &direction, lower, upper);
        if accepted.is_none() && !pairs.is_empty() {
            pairs.clear();
            let steepest: Vec<f64> = g.iter().map(|v| -v).collect();
            accepted = line_search(f, &x, fx, &g, &steepest, lower, upper);
        }
        let Some((x_new, f_new)) = accepted else {
            break; // no admissible step in any direction: converged
        };

        let g_new = finite_diff_gradient(f, &x_new, opts.fd_step);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let s_norm = dot(&s, &s).sqrt();
        let y_norm = dot(&y, &y).sqrt();
        if sy > 1e-10 * s_norm * y_norm {
            pairs.push_back((s, y, 1.0 / sy));
            if pairs.len() > opts.memory {
                pairs.pop_front();
            }
        }

        let df = (fx - f_new).abs();
        if df <= 1e-14 * (1.0 + fx.abs()) {
            stagnant += 1;
            if stagnant >= 5 {
                x = x_new;
                fx = f_new;
                break;
            }
        } else {
            stagnant = 0;
        }

        x = x_new;
        fx = f_new;
        g = g_new;
        let _ = n;
    }

    Minimum {
        x,
        f: fx,
        iterations,
    }
}

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

/// Restart inits are all-zero plus uniform noise. The amplitude cycles
/// through {1x, 2x, 4x} the configured perturbation (capped at the bound) so
/// a larger restart budget also buys basin diversity, not just resampling.
fn perturbed_start(spec: &AnsatzSpec, cfg: &TrainConfig, restart: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = (cfg.perturbation * (1 << ((restart - 1) % 3)) as f64).min(cfg.upper_bound);
    (0..spec.param_count())
        .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * amp)
        .collect()
}

fn best_of_restarts(
    spec: &AnsatzSpec,
    cfg: &TrainConfig,
    step_seed: u64,
    warm_start: Option<&[f64]>,
    objective: &dyn Fn(&[f64]) -> f64,
) -> TrainResult {
    let opts = MinimizeOptions::from(cfg);
    let mut best: Option<(Minimum, usize)> = None;
    for r in 0..cfg.restarts.max(1) {
        let x0 = match (r, warm_start) {
            (0, Some(w)) => w.to_vec(),
            (0, None) => vec![0.0; spec.param_count()],
            _ => perturbed_start(spec, cfg, r, derive_seed(step_seed, r as u64)),
        };
        let min = minimize(objective, &x0, cfg.lower_bound, cfg.upper_bound, &opts);
        let better = match &best {
            Some((b, _)) => min.f < b.f,
            None => true,
        };
        if better {
            best = Some((min, r));
        }
        if best.as_ref().map(|(b, _)| b.f).unwrap_or(f64::MAX) <= cfg.early_stop_cost {
            break;
        }
    }
    let (min, restart_index) = best.expect("at least one restart runs");
    TrainResult {
        params: ParamVector::from_vec(spec, min.x).expect("optimizer preserves length"),
        final_cost: min.f,
        iterations: min.iterations,
        restart_index,
    }
}

/// Trains the ansatz against the dilated evolution at every grid time.
///
/// Restart 0 is the all-zero start at `t_0` and the previous step's solution
/// afterwards (warm start); the remaining restarts are all-zero plus seeded
/// uniform perturbations. Fails loudly if no restart reaches cost < 0.2.
pub fn train_evolution(
    spec: &AnsatzSpec,
    tfi: &TfiParams,
    grid: &TimeGrid,
    cfg: &TrainConfig,
) -> Result<Vec<TrainResult>, TrainError> {
    if spec.num_qubits != tfi.sites + 1 {
        return Err(TrainError::SpecMismatch {
            spec_qubits: spec.num_qubits,
            expected: tfi.sites + 1,
        });
    }
    let psi0_index = tfi.initial_state_index();
    let mut results: Vec<TrainResult> = Vec::with_capacity(grid.steps);
    for (k, t) in grid.times().into_iter().enumerate() {
        let target = embedded_evolution(tfi, t)?;
        let target_col = target.matrix.column(psi0_index);
        let spec_for_cost = spec.clone();
        let objective = move |x: &[f64]| overlap_cost(&spec_for_cost, x, &target_col, psi0_index);

        let warm: Option<Vec<f64>> = if k > 0 {
            Some(results[k - 1].params.as_slice().to_vec())
        } else {
            None
        };
        let step_seed = derive_seed(cfg.seed, k as u64);
        let result = best_of_restarts(spec, cfg, step_seed, warm.as_deref(), &objective);
        if result.final_cost >= 0.2 {
            return Err(TrainError::TrainingFailed {
                t,
                best_cost: result.final_cost,
            });
        }
        results.push(result);
    }
    Ok(results)
}

/// How the identity calibration circuit is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentityMode {
    /// All-zero angles: exactly the identity, for free.
    Analytic,
    /// Trained from random starts against the operator-level cost
    /// `1 - |trace(V)| / 2^n`, which pins V to the identity on every basis
    /// input rather than on one state.
    Variational,
}

/// Builds the identity-equivalent circuit with the target gate layout.
pub fn train_identity(
    spec: &AnsatzSpec,
    cfg: &TrainConfig,
    mode: IdentityMode,
) -> Result<TrainResult, TrainError> {
    match mode {
        IdentityMode::Analytic => Ok(TrainResult {
            params: ParamVector::zeros(spec),
            final_cost: 0.0,
            iterations: 0,
            restart_index: 0,
        }),
        IdentityMode::Variational => {
            let dim = spec.dim() as f64;
            let spec_for_cost = spec.clone();
            let objective = move |x: &[f64]| {
                let params = ParamVector::from_vec(&spec_for_cost, x.to_vec())
                    .expect("length fixed by caller");
                let v = ansatz_unitary(&spec_for_cost, &params).expect("valid params");
                (1.0 - v.trace().norm() / dim).max(0.0)
            };
            // Random inits only: starting from zeros would be the answer
            // already and validate nothing.
            let mut cfg_rand = *cfg;
            cfg_rand.early_stop_cost = cfg.early_stop_cost.max(1e-9);
            let step_seed = derive_seed(cfg.seed, 0x1d_0000);
            let first = perturbed_start(spec, &cfg_rand, 1, derive_seed(step_seed, u64::MAX));
            let result = best_of_restarts(spec, &cfg_rand, step_seed, Some(&first), &objective);
            if result.final_cost > 1e-3 {
                return Err(TrainError::IdentityTrainingFailed {
                    best_cost: result.final_cost,
                });
            }
            Ok(result)
        }
    }
}
