//! Calibration matrices and inversion-based mitigation.
//!
//! The full calibration matrix is built by running the identity-equivalent
//! circuit (same gate layout as the target circuit) on every computational
//! basis input and stacking the noisy output distributions as columns. The
//! readout-only baseline prepares and measures without any gates. Mitigation
//! solves `M x = measured` and either returns the signed quasi-probability
//! vector or its Euclidean projection onto the simplex.

use crate::circuit::{ansatz_unitary, AnsatzSpec, CircuitError, ParamVector};
use crate::noisesim::{
    self, derive_seed, run_density_noisy, run_trajectories, sample_readout_only, NoiseModel,
    OutcomeDistribution, ShotPlan, SimError,
};
use crate::numkit::{self, simplex_project, ComplexMatrix, NumError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MitigateError {
    #[error("identity circuit is {distance:.3e} away from the identity operator (limit 1e-6)")]
    NotIdentity { distance: f64 },
    #[error("trajectory backend requires a shot plan")]
    MissingShotPlan,
    #[error("calibration column {column} sums to {sum}, expected 1")]
    BadColumn { column: usize, sum: f64 },
    #[error("distribution has dim {dist_dim} but calibration matrix has dim {matrix_dim}")]
    DimensionMismatch { dist_dim: usize, matrix_dim: usize },
    #[error("calibration matrix is not invertible: {0}")]
    SingularCalibration(NumError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// Which execution backend produced a calibration matrix or run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Density,
    Trajectory,
}

/// What to do with the signed vector that comes out of the inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MitigationPolicy {
    /// Return the signed quasi-probabilities exactly as solved.
    RawQuasi,
    /// Project onto the probability simplex (default).
    Simplex,
}

/// Column-stochastic calibration map: column i is the noisy output
/// distribution for basis input i.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationMatrix {
    pub dim: usize,
    pub backend: Backend,
    pub shots: Option<u64>,
    pub noise: NoiseModel,
    pub cond: f64,
    /// Column-major storage: `columns[i][j] = P(outcome j | input i)`.
    pub columns: Vec<Vec<f64>>,
}

impl CalibrationMatrix {
    fn from_columns(
        columns: Vec<Vec<f64>>,
        backend: Backend,
        shots: Option<u64>,
        noise: NoiseModel,
    ) -> Result<Self, MitigateError> {
        let dim = columns.len();
        for (i, col) in columns.iter().enumerate() {
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || col.len() != dim {
                return Err(MitigateError::BadColumn { column: i, sum });
            }
        }
        let matrix = column_major_to_matrix(&columns);
        let cond = numkit::condition_number(&matrix).unwrap_or(f64::INFINITY);
        Ok(Self {
            dim,
            backend,
            shots,
            noise,
            cond,
            columns,
        })
    }

    /// Entry `M[j][i] = P(outcome j | input i)`.
    pub fn entry(&self, outcome: usize, input: usize) -> f64 {
        self.columns[input][outcome]
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        column_major_to_matrix(&self.columns)
    }

    /// Forward application: the distribution this noise map produces from an
    /// ideal one.
    pub fn apply(&self, ideal: &[f64]) -> Vec<f64> {
        assert_eq!(ideal.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for (i, col) in self.columns.iter().enumerate() {
            let w = ideal[i];
            if w == 0.0 {
                continue;
            }
            for (j, &m) in col.iter().enumerate() {
                out[j] += m * w;
            }
        }
        out
    }

    /// CSV export, one column per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for col in &self.columns {
            let cells: Vec<String> = col.iter().map(|v| format!("{v:.9e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

fn column_major_to_matrix(columns: &[Vec<f64>]) -> ComplexMatrix {
    let dim = columns.len();
    ComplexMatrix::from_fn(dim, dim, |i, j| {
        num_complex::Complex64::new(columns[j][i], 0.0)
    })
}

/// Builds the structure-preserving calibration matrix: the identity circuit
/// is executed under noise on every basis input; column i is the resulting
/// distribution. Columns are independent tasks with per-column seeds.
pub fn build_full_calibration(
    spec: &AnsatzSpec,
    identity_params: &ParamVector,
    noise: &NoiseModel,
    backend: Backend,
    plan: Option<&ShotPlan>,
) -> Result<CalibrationMatrix, MitigateError> {
    let v = ansatz_unitary(spec, identity_params)?;
    // Noiseless identity check, modulo the global phase the variational mode
    // is free to pick up, normalized by sqrt(dim) so the tolerance does not
    // scale with register size.
    let trace = v.trace();
    let phase = if trace.norm() > 0.0 {
        trace / trace.norm()
    } else {
        num_complex::Complex64::ONE
    };
    let aligned = v.scale(phase.conj());
    let distance =
        aligned.fro_distance(&ComplexMatrix::identity(spec.dim())) / (spec.dim() as f64).sqrt();
    if distance > 1e-6 {
        return Err(MitigateError::NotIdentity { distance });
    }
    if backend == Backend::Trajectory && plan.is_none() {
        return Err(MitigateError::MissingShotPlan);
    }

    let dim = spec.dim();
    let columns: Result<Vec<Vec<f64>>, MitigateError> = (0..dim)
        .into_par_iter()
        .map(|input| {
            let dist = match backend {
                Backend::Density => run_density_noisy(spec, identity_params, input, noise)?,
                Backend::Trajectory => {
                    let plan = plan.expect("checked above");
                    let column_plan = ShotPlan {
                        shots: plan.shots,
                        seed: derive_seed(plan.seed, input as u64),
                    };
                    run_trajectories(spec, identity_params, input, noise, &column_plan)?
                }
            };
            Ok(dist.weights().to_vec())
        })
        .collect();

    CalibrationMatrix::from_columns(columns?, backend, plan.map(|p| p.shots), *noise)
}

/// Readout-only baseline: prepare basis state i, measure immediately. Under
/// this noise model the matrix is the tensor power of the single-qubit
/// confusion matrix and does not depend on the gate error rate.
pub fn build_readout_calibration(
    num_qubits: usize,
    noise: &NoiseModel,
    backend: Backend,
    plan: Option<&ShotPlan>,
) -> Result<CalibrationMatrix, MitigateError> {
    if backend == Backend::Trajectory && plan.is_none() {
        return Err(MitigateError::MissingShotPlan);
    }
    let dim = 1usize << num_qubits;
    let columns: Result<Vec<Vec<f64>>, MitigateError> = (0..dim)
        .map(|input| match backend {
            Backend::Density => {
                let mut probs = vec![0.0; dim];
                probs[input] = 1.0;
                noisesim::apply_readout_confusion(&mut probs, num_qubits, noise.readout_flip);
                Ok(probs)
            }
            Backend::Trajectory => {
                let plan = plan.expect("checked above");
                let column_plan = ShotPlan {
                    shots: plan.shots,
                    seed: derive_seed(plan.seed, input as u64),
                };
                let dist = sample_readout_only(input, num_qubits, noise, &column_plan)?;
                Ok(dist.weights().to_vec())
            }
        })
        .collect();

    CalibrationMatrix::from_columns(columns?, backend, plan.map(|p| p.shots), *noise)
}

/// Corrects a measured distribution with the inverse calibration matrix.
///
/// `RawQuasi` returns the signed solution (total mass stays 1 because the
/// matrix is column-stochastic); `Simplex` projects it back onto the
/// probability simplex.
pub fn mitigate(
    dist: &OutcomeDistribution,
    m: &CalibrationMatrix,
    policy: MitigationPolicy,
) -> Result<OutcomeDistribution, MitigateError> {
    if dist.dim() != m.dim {
        return Err(MitigateError::DimensionMismatch {
            dist_dim: dist.dim(),
            matrix_dim: m.dim,
        });
    }
    let matrix = m.to_matrix();
    let report = match numkit::solve(&matrix, dist.weights()) {
        Ok(r) => r,
        Err(err @ NumError::Singular) => {
            return Err(MitigateError::SingularCalibration(err));
        }
        Err(err) => return Err(err.into()),
    };
    match policy {
        MitigationPolicy::RawQuasi => Ok(OutcomeDistribution::quasi(report.x)?),
        MitigationPolicy::Simplex => Ok(OutcomeDistribution::probability(simplex_project(
            &report.x,
        ))?),
    }
}
