//! Structure-preserving error mitigation for parameterized quantum circuits.
//!
//! The crate simulates a fixed-layout variational ansatz under configurable
//! CX-depolarizing and readout noise, builds calibration matrices from
//! identity-equivalent circuits with the same gate layout, and benchmarks
//! inversion-based mitigation against the exact dynamics of a dilated
//! non-Hermitian transverse-field Ising chain.
//!
//! Modules, bottom up:
//!
//! * [`numkit`] – dense complex linear algebra (QR, Hermitian eigen, matrix
//!   exponential, solves, simplex projection).
//! * [`circuit`] – the layered `CX (U3 (x) U3) CX` ansatz and gate lowering.
//! * [`noisesim`] – ideal, density-matrix, and trajectory backends.
//! * [`nonherm`] – the non-Hermitian Ising model, its unitary dilation, and
//!   post-selected observables.
//! * [`varopt`] – bound-constrained quasi-Newton training of the ansatz.
//! * [`mitigate`] – calibration matrices and inversion-based correction.
//! * [`bench`] – experiment orchestration, CSV/SVG artifacts, and the CLI.

pub mod bench;
pub mod circuit;
pub mod mitigate;
pub mod noisesim;
pub mod nonherm;
pub mod numkit;
pub mod varopt;
