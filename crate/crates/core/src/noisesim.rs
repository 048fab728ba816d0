//! Circuit execution backends: ideal statevector, exact density matrix with
//! noise channels, and seeded shot-sampling trajectories.
//!
//! The noise model is a two-qubit depolarizing channel with probability `p`
//! after every CX plus an independent readout bit flip with probability `q`
//! per measured qubit. Single-qubit gates are noiseless. The trajectory
//! backend unravels the depolarizing channel as a uniformly random two-qubit
//! Pauli (identity included) inserted with probability `p`, which reproduces
//! the density-matrix channel in expectation.

use crate::circuit::{
    apply_gate, gate_sequence, u3_matrix, AnsatzSpec, CircuitError, Gate, ParamVector,
};
use crate::numkit::{basis_state, ComplexMatrix};
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("probability {value} for {name} is outside [0, 1)")]
    BadProbability { name: &'static str, value: f64 },
    #[error("input index {index} out of range for {num_qubits} qubits")]
    BadInput { index: usize, num_qubits: usize },
    #[error("distribution of kind {kind:?} is invalid: {reason}")]
    BadDistribution { kind: DistKind, reason: String },
    #[error("shot plan requires at least one shot")]
    NoShots,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Gate and readout error rates. Gate noise is parameter-independent: the
/// same channel follows every CX regardless of the surrounding U3 angles.
///
/// Serializes as `{"p": ..., "q": ...}`, the shape used by calibration
/// artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Two-qubit depolarizing probability applied after every CX.
    #[serde(rename = "p")]
    pub cx_depol: f64,
    /// Readout bit-flip probability per measured qubit.
    #[serde(rename = "q")]
    pub readout_flip: f64,
}

impl NoiseModel {
    pub fn new(cx_depol: f64, readout_flip: f64) -> Result<Self, SimError> {
        if !(0.0..1.0).contains(&cx_depol) || !cx_depol.is_finite() {
            return Err(SimError::BadProbability {
                name: "cx_depol",
                value: cx_depol,
            });
        }
        if !(0.0..1.0).contains(&readout_flip) || !readout_flip.is_finite() {
            return Err(SimError::BadProbability {
                name: "readout_flip",
                value: readout_flip,
            });
        }
        Ok(Self {
            cx_depol,
            readout_flip,
        })
    }

    pub fn noiseless() -> Self {
        Self {
            cx_depol: 0.0,
            readout_flip: 0.0,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.cx_depol == 0.0 && self.readout_flip == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistKind {
    Probability,
    Quasi,
}

/// Weights over the 2^n measurement bitstrings. `Probability` weights are
/// non-negative and sum to one; `Quasi` weights may be negative but still sum
/// to one (the image of a probability vector under a calibration inverse).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    kind: DistKind,
    weights: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn probability(mut weights: Vec<f64>) -> Result<Self, SimError> {
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::BadDistribution {
                kind: DistKind::Probability,
                reason: format!("weights sum to {sum}, expected 1"),
            });
        }
        for w in weights.iter_mut() {
            if *w < 0.0 {
                if *w < -1e-12 {
                    return Err(SimError::BadDistribution {
                        kind: DistKind::Probability,
                        reason: format!("negative weight {w}"),
                    });
                }
                *w = 0.0; // rounding dust from density diagonals
            }
        }
        Ok(Self {
            kind: DistKind::Probability,
            weights,
        })
    }

    pub fn quasi(weights: Vec<f64>) -> Result<Self, SimError> {
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::BadDistribution {
                kind: DistKind::Quasi,
                reason: format!("weights sum to {sum}, expected 1"),
            });
        }
        Ok(Self {
            kind: DistKind::Quasi,
            weights,
        })
    }

    pub fn kind(&self) -> DistKind {
        self.kind
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        0.5 * self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Shot count plus the master seed that makes sampling reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotPlan {
    pub shots: u64,
    pub seed: u64,
}

impl ShotPlan {
    pub fn new(shots: u64, seed: u64) -> Result<Self, SimError> {
        if shots == 0 {
            return Err(SimError::NoShots);
        }
        Ok(Self { shots, seed })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-task seed derivation: parallel and serial runs draw the
/// same streams because every task reseeds from (master, task index).
pub fn derive_seed(master: u64, task: u64) -> u64 {
    splitmix64(splitmix64(master) ^ task)
}

pub fn task_rng(master: u64, task: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, task))
}

fn check_input(spec: &AnsatzSpec, input_index: usize) -> Result<(), SimError> {
    if input_index >= spec.dim() {
        return Err(SimError::BadInput {
            index: input_index,
            num_qubits: spec.num_qubits,
        });
    }
    Ok(())
}

/// Exact |amplitude|^2 distribution of the ideal circuit on a basis input.
pub fn run_ideal(
    spec: &AnsatzSpec,
    params: &ParamVector,
    input_index: usize,
) -> Result<OutcomeDistribution, SimError> {
    check_input(spec, input_index)?;
    let gates = gate_sequence(spec, params)?;
    let mut state = basis_state(spec.dim(), input_index);
    for gate in &gates {
        apply_gate(&mut state, gate);
    }
    OutcomeDistribution::probability(state.iter().map(|z| z.norm_sqr()).collect())
}

// ---------------------------------------------------------------------------
// Density-matrix backend
// ---------------------------------------------------------------------------

fn apply_single_left(rho: &mut ComplexMatrix, m: &ComplexMatrix, qubit: usize) {
    let dim = rho.rows();
    let mask = 1usize << qubit;
    let (m00, m01, m10, m11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    for j in 0..dim {
        for i in 0..dim {
            if i & mask == 0 {
                let k = i | mask;
                let (a, b) = (rho[(i, j)], rho[(k, j)]);
                rho[(i, j)] = m00 * a + m01 * b;
                rho[(k, j)] = m10 * a + m11 * b;
            }
        }
    }
}

fn apply_single_right_dagger(rho: &mut ComplexMatrix, m: &ComplexMatrix, qubit: usize) {
    let dim = rho.rows();
    let mask = 1usize << qubit;
    let (m00, m01, m10, m11) = (
        m[(0, 0)].conj(),
        m[(0, 1)].conj(),
        m[(1, 0)].conj(),
        m[(1, 1)].conj(),
    );
    for i in 0..dim {
        for j in 0..dim {
            if j & mask == 0 {
                let k = j | mask;
                let (a, b) = (rho[(i, j)], rho[(i, k)]);
                rho[(i, j)] = a * m00 + b * m01;
                rho[(i, k)] = a * m10 + b * m11;
            }
        }
    }
}

fn apply_cx_left(rho: &mut ComplexMatrix, control: usize, target: usize) {
    let dim = rho.rows();
    let cmask = 1usize << control;
    let tmask = 1usize << target;
    for j in 0..dim {
        for i in 0..dim {
            if i & cmask != 0 && i & tmask == 0 {
                let k = i | tmask;
                let tmp = rho[(i, j)];
                rho[(i, j)] = rho[(k, j)];
                rho[(k, j)] = tmp;
            }
        }
    }
}

fn apply_cx_right(rho: &mut ComplexMatrix, control: usize, target: usize) {
    let dim = rho.rows();
    let cmask = 1usize << control;
    let tmask = 1usize << target;
    for i in 0..dim {
        for j in 0..dim {
            if j & cmask != 0 && j & tmask == 0 {
                let k = j | tmask;
                let tmp = rho[(i, j)];
                rho[(i, j)] = rho[(i, k)];
                rho[(i, k)] = tmp;
            }
        }
    }
}

/// Two-qubit depolarizing channel on the pair (a, b):
/// `rho -> (1-p) rho + p * Tr_{ab}(rho) (x) I/4`.
fn depolarize_pair(rho: &mut ComplexMatrix, a: usize, b: usize, p: f64) {
    if p == 0.0 {
        return;
    }
    let dim = rho.rows();
    let amask = 1usize << a;
    let bmask = 1usize << b;
    let pairmask = amask | bmask;
    let rest: Vec<usize> = (0..dim).filter(|i| i & pairmask == 0).collect();
    let sub = |s: usize| -> usize {
        (if s & 1 != 0 { amask } else { 0 }) | (if s & 2 != 0 { bmask } else { 0 })
    };

    // Partial trace over the pair, per rest-index pair.
    let mut traced = vec![Complex64::ZERO; rest.len() * rest.len()];
    for (ri, &i) in rest.iter().enumerate() {
        for (rj, &j) in rest.iter().enumerate() {
            let mut acc = Complex64::ZERO;
            for s in 0..4 {
                acc += rho[(i | sub(s), j | sub(s))];
            }
            traced[ri * rest.len() + rj] = acc;
        }
    }

    let keep = Complex64::new(1.0 - p, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            rho[(i, j)] *= keep;
        }
    }
    let quarter = p / 4.0;
    for (ri, &i) in rest.iter().enumerate() {
        for (rj, &j) in rest.iter().enumerate() {
            let add = traced[ri * rest.len() + rj] * quarter;
            for s in 0..4 {
                rho[(i | sub(s), j | sub(s))] += add;
            }
        }
    }
}

fn apply_gate_density(rho: &mut ComplexMatrix, gate: &Gate, noise: &NoiseModel) {
    match gate {
        Gate::U3 { qubit, params } => {
            let m = u3_matrix(params);
            apply_single_left(rho, &m, *qubit);
            apply_single_right_dagger(rho, &m, *qubit);
        }
        Gate::Cx { control, target } => {
            apply_cx_left(rho, *control, *target);
            apply_cx_right(rho, *control, *target);
            depolarize_pair(rho, *control, *target, noise.cx_depol);
        }
    }
}

/// Convolves a probability vector with the per-qubit readout confusion matrix
/// `[[1-q, q], [q, 1-q]]` on every qubit.
pub fn apply_readout_confusion(probs: &mut [f64], num_qubits: usize, q: f64) {
    if q == 0.0 {
        return;
    }
    for k in 0..num_qubits {
        let mask = 1usize << k;
        for i in 0..probs.len() {
            if i & mask == 0 {
                let j = i | mask;
                let (a, b) = (probs[i], probs[j]);
                probs[i] = (1.0 - q) * a + q * b;
                probs[j] = q * a + (1.0 - q) * b;
            }
        }
    }
}

/// The full-register readout confusion map: the `num_qubits`-fold tensor
/// power of the single-qubit confusion matrix (column-stochastic).
pub fn readout_confusion_matrix(num_qubits: usize, q: f64) -> ComplexMatrix {
    let single = ComplexMatrix::from_real(2, 2, &[1.0 - q, q, q, 1.0 - q]).expect("finite");
    let mut m = ComplexMatrix::identity(1);
    for _ in 0..num_qubits {
        // qubit order does not matter: the factors are identical
        m = single.kron(&m);
    }
    m
}

/// Exact noisy execution: density-matrix evolution with the depolarizing
/// channel after each CX and readout confusion on the final diagonal. No
/// sampling noise.
pub fn run_density_noisy(
    spec: &AnsatzSpec,
    params: &ParamVector,
    input_index: usize,
    noise: &NoiseModel,
) -> Result<OutcomeDistribution, SimError> {
    check_input(spec, input_index)?;
    let gates = gate_sequence(spec, params)?;
    let dim = spec.dim();
    let mut rho = ComplexMatrix::zeros(dim, dim);
    rho[(input_index, input_index)] = Complex64::ONE;
    for gate in &gates {
        apply_gate_density(&mut rho, gate, noise);
    }
    let mut probs: Vec<f64> = (0..dim).map(|i| rho[(i, i)].re).collect();
    apply_readout_confusion(&mut probs, spec.num_qubits, noise.readout_flip);
    OutcomeDistribution::probability(probs)
}

/// Density execution of one opaque unitary (no internal CX noise sites):
/// exact output distribution of `U |input>` with readout confusion applied.
pub fn run_matrix_density(
    u: &ComplexMatrix,
    input_index: usize,
    noise: &NoiseModel,
) -> Result<OutcomeDistribution, SimError> {
    let dim = u.rows();
    let num_qubits = dim.trailing_zeros() as usize;
    if input_index >= dim {
        return Err(SimError::BadInput {
            index: input_index,
            num_qubits,
        });
    }
    let col = u.column(input_index);
    let mut probs: Vec<f64> = col.iter().map(|z| z.norm_sqr()).collect();
    apply_readout_confusion(&mut probs, num_qubits, noise.readout_flip);
    OutcomeDistribution::probability(probs)
}

// ---------------------------------------------------------------------------
// Trajectory backend
// ---------------------------------------------------------------------------

fn apply_pauli(state: &mut [Complex64], qubit: usize, which: usize) {
    let mask = 1usize << qubit;
    match which {
        0 => {}
        1 => {
            for i in 0..state.len() {
                if i & mask == 0 {
                    state.swap(i, i | mask);
                }
            }
        }
        2 => {
            let im = Complex64::new(0.0, 1.0);
            for i in 0..state.len() {
                if i & mask == 0 {
                    let j = i | mask;
                    let (a, b) = (state[i], state[j]);
                    state[i] = -im * b;
                    state[j] = im * a;
                }
            }
        }
        3 => {
            for (i, z) in state.iter_mut().enumerate() {
                if i & mask != 0 {
                    *z = -*z;
                }
            }
        }
        _ => unreachable!("pauli index out of range"),
    }
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn readout_flips(rng: &mut ChaCha8Rng, outcome: usize, num_qubits: usize, q: f64) -> usize {
    if q == 0.0 {
        return outcome;
    }
    let mut out = outcome;
    for k in 0..num_qubits {
        if rng.random::<f64>() < q {
            out ^= 1usize << k;
        }
    }
    out
}

/// Statevector Monte Carlo: after each CX, with probability `p` one of the 16
/// two-qubit Paulis (uniform, identity included) is applied to the pair,
/// which unravels the density backend's depolarizing channel exactly.
/// Measured bits flip independently with probability `q`. Returns empirical
/// frequencies; bit-identical for equal seeds, and shots are sharded with
/// per-shot seeds so parallel and serial runs agree.
pub fn run_trajectories(
    spec: &AnsatzSpec,
    params: &ParamVector,
    input_index: usize,
    noise: &NoiseModel,
    plan: &ShotPlan,
) -> Result<OutcomeDistribution, SimError> {
    check_input(spec, input_index)?;
    if plan.shots == 0 {
        return Err(SimError::NoShots);
    }
    let gates = gate_sequence(spec, params)?;
    let dim = spec.dim();
    let n = spec.num_qubits;
    let p = noise.cx_depol;
    let q = noise.readout_flip;

    let counts: Vec<u64> = if p == 0.0 {
        // Noise-free gates: one state serves every shot.
        let mut state = basis_state(dim, input_index);
        for gate in &gates {
            apply_gate(&mut state, gate);
        }
        let probs: Vec<f64> = state.iter().map(|z| z.norm_sqr()).collect();
        (0..plan.shots)
            .into_par_iter()
            .fold(
                || vec![0u64; dim],
                |mut acc, shot| {
                    let mut rng = task_rng(plan.seed, shot);
                    let outcome = sample_index(&mut rng, &probs);
                    acc[readout_flips(&mut rng, outcome, n, q)] += 1;
                    acc
                },
            )
            .reduce(
                || vec![0u64; dim],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            )
    } else {
        (0..plan.shots)
            .into_par_iter()
            .fold(
                || vec![0u64; dim],
                |mut acc, shot| {
                    let mut rng = task_rng(plan.seed, shot);
                    let mut state = basis_state(dim, input_index);
                    for gate in &gates {
                        apply_gate(&mut state, gate);
                        if let Gate::Cx { control, target } = gate {
                            if rng.random::<f64>() < p {
                                let idx = rng.random_range(0..16usize);
                                apply_pauli(&mut state, *control, idx & 3);
                                apply_pauli(&mut state, *target, idx >> 2);
                            }
                        }
                    }
                    let probs: Vec<f64> = state.iter().map(|z| z.norm_sqr()).collect();
                    let outcome = sample_index(&mut rng, &probs);
                    acc[readout_flips(&mut rng, outcome, n, q)] += 1;
                    acc
                },
            )
            .reduce(
                || vec![0u64; dim],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            )
    };

    let total = plan.shots as f64;
    OutcomeDistribution::probability(counts.iter().map(|&c| c as f64 / total).collect())
}

/// Prepare-and-measure sampling: basis input `input_index`, no gates, readout
/// flips only. The empirical column of the readout-only calibration.
pub fn sample_readout_only(
    input_index: usize,
    num_qubits: usize,
    noise: &NoiseModel,
    plan: &ShotPlan,
) -> Result<OutcomeDistribution, SimError> {
    let dim = 1usize << num_qubits;
    if input_index >= dim {
        return Err(SimError::BadInput {
            index: input_index,
            num_qubits,
        });
    }
    let q = noise.readout_flip;
    let mut counts = vec![0u64; dim];
    for shot in 0..plan.shots {
        let mut rng = task_rng(plan.seed, shot);
        counts[readout_flips(&mut rng, input_index, num_qubits, q)] += 1;
    }
    let total = plan.shots as f64;
    OutcomeDistribution::probability(counts.iter().map(|&c| c as f64 / total).collect())
}

// ---------------------------------------------------------------------------
// Channel diagnostics
// ---------------------------------------------------------------------------

/// The gate-level channel of the circuit as a superoperator on row-major
/// vectorized density matrices (readout excluded; readout acts on measured
/// distributions, not on the state). Diagnostic only: quantifies how
/// parameter-independent the extracted noise factor really is.
pub fn effective_channel(
    spec: &AnsatzSpec,
    params: &ParamVector,
    noise: &NoiseModel,
) -> Result<ComplexMatrix, SimError> {
    assert!(
        spec.num_qubits <= 5,
        "superoperator is dim^2 squared; keep it small"
    );
    let gates = gate_sequence(spec, params)?;
    let dim = spec.dim();
    let mut superop = ComplexMatrix::zeros(dim * dim, dim * dim);
    for r in 0..dim {
        for c in 0..dim {
            let mut e = ComplexMatrix::zeros(dim, dim);
            e[(r, c)] = Complex64::ONE;
            for gate in &gates {
                apply_gate_density(&mut e, gate, noise);
            }
            let col = r * dim + c;
            for i in 0..dim {
                for j in 0..dim {
                    superop[(i * dim + j, col)] = e[(i, j)];
                }
            }
        }
    }
    Ok(superop)
}

/// Superoperator of conjugation by a fixed unitary:
/// `S[(i,j),(r,c)] = U[i][r] * conj(U[j][c])`.
pub fn unitary_conjugation_superop(u: &ComplexMatrix) -> ComplexMatrix {
    let dim = u.rows();
    ComplexMatrix::from_fn(dim * dim, dim * dim, |row, col| {
        let (i, j) = (row / dim, row % dim);
        let (r, c) = (col / dim, col % dim);
        u[(i, r)] * u[(j, c)].conj()
    })
}
