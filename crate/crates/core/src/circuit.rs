//! The fixed layered ansatz: n layers of nearest-neighbor blocks
//! `CX · (U3 (x) U3) · CX`, plus the gate-level machinery to turn circuits
//! into states and matrices.
//!
//! Bit order convention, used by every module in this crate: qubit k occupies
//! bit k of the basis index (qubit 0 least significant). Spin up is bit 0
//! (Z eigenvalue +1), spin down is bit 1 (Z eigenvalue -1).

use crate::numkit::{basis_state, ComplexMatrix, ComplexVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error("parameter vector has length {got}, spec requires {expected}")]
    ParamLength { expected: usize, got: usize },
    #[error("pair ({a},{b}) is not an adjacent in-range pair for {num_qubits} qubits")]
    BadPair {
        a: usize,
        b: usize,
        num_qubits: usize,
    },
    #[error("ansatz needs at least one layer")]
    NoLayers,
    #[error("ansatz needs at least two qubits")]
    TooFewQubits,
}

/// The three Euler angles of a general single-qubit rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct U3Params {
    pub theta: f64,
    pub phi: f64,
    pub lambda: f64,
}

impl U3Params {
    pub fn new(theta: f64, phi: f64, lambda: f64) -> Self {
        Self { theta, phi, lambda }
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }
}

/// Fixed circuit architecture: `layers` repetitions of one block per entry of
/// `pair_order`, each block acting on an adjacent qubit pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub num_qubits: usize,
    pub layers: usize,
    pub pair_order: Vec<(usize, usize)>,
}

impl AnsatzSpec {
    /// Linear chain over all adjacent pairs in ascending order.
    pub fn chain(num_qubits: usize, layers: usize) -> Result<Self, CircuitError> {
        let pair_order = (0..num_qubits.saturating_sub(1))
            .map(|i| (i, i + 1))
            .collect();
        Self::with_pairs(num_qubits, layers, pair_order)
    }

    /// Default five-qubit chain (four system qubits plus the ancilla).
    pub fn default_chain(layers: usize) -> Self {
        Self::chain(5, layers).expect("default chain is valid")
    }

    pub fn with_pairs(
        num_qubits: usize,
        layers: usize,
        pair_order: Vec<(usize, usize)>,
    ) -> Result<Self, CircuitError> {
        if num_qubits < 2 {
            return Err(CircuitError::TooFewQubits);
        }
        if layers == 0 {
            return Err(CircuitError::NoLayers);
        }
        for &(a, b) in &pair_order {
            if b != a + 1 || b >= num_qubits {
                return Err(CircuitError::BadPair { a, b, num_qubits });
            }
        }
        Ok(Self {
            num_qubits,
            layers,
            pair_order,
        })
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    /// Six angles per block (two U3 gates, three angles each).
    pub fn param_count(&self) -> usize {
        6 * self.pair_order.len() * self.layers
    }

    /// Each block contributes two CX gates.
    pub fn cx_count_per_layer(&self) -> usize {
        2 * self.pair_order.len()
    }
}

/// Flat list of angles in the canonical order
/// (layer, pair, qubit-in-pair, [theta, phi, lambda]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn from_vec(spec: &AnsatzSpec, values: Vec<f64>) -> Result<Self, CircuitError> {
        if values.len() != spec.param_count() {
            return Err(CircuitError::ParamLength {
                expected: spec.param_count(),
                got: values.len(),
            });
        }
        Ok(Self(values))
    }

    pub fn zeros(spec: &AnsatzSpec) -> Self {
        Self(vec![0.0; spec.param_count()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// U3 angles for (layer, pair index, qubit-in-pair).
    pub fn u3_at(&self, spec: &AnsatzSpec, layer: usize, pair: usize, which: usize) -> U3Params {
        let base = 6 * (layer * spec.pair_order.len() + pair) + 3 * which;
        U3Params::new(self.0[base], self.0[base + 1], self.0[base + 2])
    }
}

/// All-zero parameters: every U3 collapses to the identity and the paired CX
/// gates cancel, so the circuit is the identity while keeping the full gate
/// layout.
pub fn identity_params(spec: &AnsatzSpec) -> ParamVector {
    ParamVector::zeros(spec)
}

/// The U3 gate matrix:
/// `[[cos(t/2), -e^{i l} sin(t/2)], [e^{i p} sin(t/2), e^{i(p+l)} cos(t/2)]]`.
pub fn u3_matrix(p: &U3Params) -> ComplexMatrix {
    let (ct, st) = ((p.theta / 2.0).cos(), (p.theta / 2.0).sin());
    let eip = Complex64::from_polar(1.0, p.phi);
    let eil = Complex64::from_polar(1.0, p.lambda);
    ComplexMatrix::new(
        2,
        2,
        vec![Complex64::new(ct, 0.0), -eil * st, eip * st, eip * eil * ct],
    )
    .expect("u3 entries are finite")
}

/// One gate of the lowered circuit.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    U3 { qubit: usize, params: U3Params },
    Cx { control: usize, target: usize },
}

/// Lowers a circuit to its gate sequence in application (temporal) order.
pub fn gate_sequence(spec: &AnsatzSpec, params: &ParamVector) -> Result<Vec<Gate>, CircuitError> {
    if params.len() != spec.param_count() {
        return Err(CircuitError::ParamLength {
            expected: spec.param_count(),
            got: params.len(),
        });
    }
    let mut gates = Vec::with_capacity(spec.layers * spec.pair_order.len() * 4);
    for layer in 0..spec.layers {
        for (pair_idx, &(a, b)) in spec.pair_order.iter().enumerate() {
            gates.push(Gate::Cx {
                control: a,
                target: b,
            });
            gates.push(Gate::U3 {
                qubit: a,
                params: params.u3_at(spec, layer, pair_idx, 0),
            });
            gates.push(Gate::U3 {
                qubit: b,
                params: params.u3_at(spec, layer, pair_idx, 1),
            });
            gates.push(Gate::Cx {
                control: a,
                target: b,
            });
        }
    }
    Ok(gates)
}

/// Applies a single-qubit matrix to a statevector in place.
pub fn apply_single_qubit(state: &mut [Complex64], m: &ComplexMatrix, qubit: usize) {
    debug_assert_eq!(m.rows(), 2);
    let mask = 1usize << qubit;
    let (m00, m01, m10, m11) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    for i in 0..state.len() {
        if i & mask == 0 {
            let j = i | mask;
            let (a, b) = (state[i], state[j]);
            state[i] = m00 * a + m01 * b;
            state[j] = m10 * a + m11 * b;
        }
    }
}

/// Applies a CX gate (flip `target` where `control` is 1) in place.
pub fn apply_cx(state: &mut [Complex64], control: usize, target: usize) {
    let cmask = 1usize << control;
    let tmask = 1usize << target;
    for i in 0..state.len() {
        if i & cmask != 0 && i & tmask == 0 {
            state.swap(i, i | tmask);
        }
    }
}

pub fn apply_gate(state: &mut [Complex64], gate: &Gate) {
    match gate {
        Gate::U3 { qubit, params } => apply_single_qubit(state, &u3_matrix(params), *qubit),
        Gate::Cx { control, target } => apply_cx(state, *control, *target),
    }
}

/// Runs the circuit on a basis state, returning the final statevector.
pub fn apply_circuit_to_basis(
    spec: &AnsatzSpec,
    params: &ParamVector,
    input_index: usize,
) -> Result<ComplexVector, CircuitError> {
    let gates = gate_sequence(spec, params)?;
    let mut state = basis_state(spec.dim(), input_index);
    for gate in &gates {
        apply_gate(&mut state, gate);
    }
    Ok(state)
}

/// Full-register unitary of one block `CX (U3_a (x) U3_b) CX` on the given
/// adjacent pair, with control = a and target = b.
pub fn block_unitary(
    pair: (usize, usize),
    p_a: &U3Params,
    p_b: &U3Params,
    total_qubits: usize,
) -> Result<ComplexMatrix, CircuitError> {
    let (a, b) = pair;
    if b != a + 1 || b >= total_qubits {
        return Err(CircuitError::BadPair {
            a,
            b,
            num_qubits: total_qubits,
        });
    }
    let dim = 1 << total_qubits;
    let mut m = ComplexMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut state = basis_state(dim, col);
        apply_cx(&mut state, a, b);
        apply_single_qubit(&mut state, &u3_matrix(p_a), a);
        apply_single_qubit(&mut state, &u3_matrix(p_b), b);
        apply_cx(&mut state, a, b);
        for row in 0..dim {
            m[(row, col)] = state[row];
        }
    }
    Ok(m)
}

/// Full circuit unitary: layers applied in order (layer 1 first), blocks
/// within a layer in `pair_order`. Deterministic: the same spec and params
/// always produce the bit-identical matrix.
pub fn ansatz_unitary(
    spec: &AnsatzSpec,
    params: &ParamVector,
) -> Result<ComplexMatrix, CircuitError> {
    let gates = gate_sequence(spec, params)?;
    let dim = spec.dim();
    let mut m = ComplexMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut state = basis_state(dim, col);
        for gate in &gates {
            apply_gate(&mut state, gate);
        }
        for row in 0..dim {
            m[(row, col)] = state[row];
        }
    }
    Ok(m)
}
