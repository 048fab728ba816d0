//! Dense complex linear algebra for small matrices (up to ~64x64).
//!
//! Everything downstream runs on [`ComplexMatrix`]: circuit unitaries,
//! Hamiltonians, density matrices, and calibration matrices. The kernels are
//! written for the fixed small sizes this crate needs, with the conventions
//! the rest of the workspace relies on: QR with a real non-negative R
//! diagonal, Hermitian eigendecompositions sorted ascending, and linear
//! solves that report their condition number.

use num_complex::Complex64;
use thiserror::Error;

/// Vectors of complex amplitudes are plain `Vec`s; helpers below cover the
/// handful of operations we need on them.
pub type ComplexVector = Vec<Complex64>;

#[derive(Debug, Error)]
pub enum NumError {
    #[error("non-finite entry encountered in {context}")]
    NonFinite { context: &'static str },
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },
    #[error("matrix is rank deficient: |R[{index},{index}]| = {magnitude:.3e} underflows 1e-12")]
    RankDeficient { index: usize, magnitude: f64 },
    #[error("matrix is not Hermitian: relative residual {residual:.3e} exceeds 1e-8")]
    NotHermitian { residual: f64 },
    #[error("matrix is not positive semidefinite: eigenvalue {min_eigenvalue:.3e} below -1e-10")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrix is singular and cannot be inverted")]
    Singular,
    #[error("eigensolver failed to converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

/// Dense complex matrix with row-major storage.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl std::fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(8) {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f, "{}", if self.cols > 8 { "..." } else { "" })?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, NumError> {
        if data.len() != rows * cols {
            return Err(NumError::Dimension {
                expected: rows * cols,
                got: data.len(),
                context: "ComplexMatrix::new",
            });
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(NumError::NonFinite {
                context: "ComplexMatrix::new",
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix with real entries (imaginary parts zero).
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self, NumError> {
        Self::new(
            rows,
            cols,
            entries.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn column(&self, j: usize) -> ComplexVector {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == Complex64::ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> ComplexVector {
        assert_eq!(self.cols, v.len(), "mul_vec shape mismatch");
        let mut out = vec![Complex64::ZERO; self.rows];
        for i in 0..self.rows {
            let mut acc = Complex64::ZERO;
            for j in 0..self.cols {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn fro_distance(&self, other: &Self) -> f64 {
        self.sub(other).frobenius_norm()
    }

    pub fn hermitian_residual(&self) -> f64 {
        self.sub(&self.adjoint()).frobenius_norm()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Copies `block` into this matrix with its top-left corner at (r0, c0).
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// Extracts the sub-matrix rows `r0..r1`, columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        assert!(r1 <= self.rows && c1 <= self.cols && r0 <= r1 && c0 <= c1);
        Self::from_fn(r1 - r0, c1 - c0, |i, j| self[(r0 + i, c0 + j)])
    }

    /// Kronecker product; `self` supplies the most significant index block.
    pub fn kron(&self, other: &Self) -> Self {
        kron(self, other)
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Kronecker product: `kron(A, B)[ia*rb + ib, ja*cb + jb] = A[ia,ja] * B[ib,jb]`.
///
/// The first factor occupies the most significant part of the index, so with
/// the crate-wide bit order (qubit k at bit k) an operator on qubit q of an
/// n-qubit register is `kron(kron(I_high, op), I_low)`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for ia in 0..a.rows {
        for ja in 0..a.cols {
            let f = a[(ia, ja)];
            if f == Complex64::ZERO {
                continue;
            }
            for ib in 0..b.rows {
                for jb in 0..b.cols {
                    out[(ia * b.rows + ib, ja * b.cols + jb)] = f * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Basis vector |index> of the given dimension.
pub fn basis_state(dim: usize, index: usize) -> ComplexVector {
    assert!(
        index < dim,
        "basis index {index} out of range for dim {dim}"
    );
    let mut v = vec![Complex64::ZERO; dim];
    v[index] = Complex64::ONE;
    v
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Inner product <a|b> (conjugate-linear in the first argument).
pub fn vec_inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// QR factorization with the column-phase fix: `A = Q R` with Q unitary and
/// R upper triangular whose diagonal is real and non-negative.
///
/// Rank deficiency (a diagonal of R below 1e-12 in magnitude) is reported as
/// an error naming the offending index; callers that can tolerate it decide
/// what to do.
pub fn qr_positive(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix), NumError> {
    if !a.is_square() {
        return Err(NumError::Dimension {
            expected: a.rows,
            got: a.cols,
            context: "qr_positive requires a square matrix",
        });
    }
    if !a.is_finite() {
        return Err(NumError::NonFinite {
            context: "qr_positive",
        });
    }
    let n = a.rows;
    let mut r = a.clone();
    let mut q = ComplexMatrix::identity(n);

    // Householder reflections column by column.
    for k in 0..n {
        let mut v: Vec<Complex64> = (k..n).map(|i| r[(i, k)]).collect();
        let normx = vec_norm(&v);
        if normx < 1e-300 {
            continue;
        }
        let alpha = if v[0].norm() > 0.0 {
            -(v[0] / v[0].norm()) * normx
        } else {
            Complex64::new(-normx, 0.0)
        };
        v[0] -= alpha;
        let vnorm = vec_norm(&v);
        if vnorm < 1e-300 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // R[k.., k..] <- (I - 2vv†) R[k.., k..]
        for j in k..n {
            let mut dot = Complex64::ZERO;
            for i in k..n {
                dot += v[i - k].conj() * r[(i, j)];
            }
            let dot = dot * 2.0;
            for i in k..n {
                let upd = dot * v[i - k];
                r[(i, j)] -= upd;
            }
        }
        // Q <- Q (I - 2vv†)
        for i in 0..n {
            let mut dot = Complex64::ZERO;
            for j in k..n {
                dot += q[(i, j)] * v[j - k];
            }
            let dot = dot * 2.0;
            for j in k..n {
                let upd = dot * v[j - k].conj();
                q[(i, j)] -= upd;
            }
        }
        r[(k, k)] = alpha;
        for i in (k + 1)..n {
            r[(i, k)] = Complex64::ZERO;
        }
    }

    // Phase fix: make the diagonal of R real and non-negative by moving the
    // phase of each diagonal entry into the matching column of Q.
    for k in 0..n {
        let d = r[(k, k)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            let conj_phase = phase.conj();
            for j in k..n {
                r[(k, j)] *= conj_phase;
            }
            for i in 0..n {
                q[(i, k)] *= phase;
            }
        }
    }

    for k in 0..n {
        let mag = r[(k, k)].norm();
        if mag < 1e-12 {
            return Err(NumError::RankDeficient {
                index: k,
                magnitude: mag,
            });
        }
    }
    Ok((q, r))
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi sweeps.
///
/// Returns eigenvalues in ascending order and the matching unitary matrix of
/// column eigenvectors. Input must be Hermitian to within a relative
/// Frobenius residual of 1e-8.
pub fn herm_eig(h: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), NumError> {
    if !h.is_square() {
        return Err(NumError::Dimension {
            expected: h.rows,
            got: h.cols,
            context: "herm_eig requires a square matrix",
        });
    }
    let norm = h.frobenius_norm();
    let residual = h.hermitian_residual();
    if norm > 0.0 && residual > 1e-8 * norm {
        return Err(NumError::NotHermitian {
            residual: residual / norm,
        });
    }

    let n = h.rows;
    // Work on the exactly Hermitian part to shed rounding dust.
    let mut a = h.add(&h.adjoint()).scale(Complex64::new(0.5, 0.0));
    let mut v = ComplexMatrix::identity(n);
    let tol = 1e-14 * norm.max(1.0);

    let max_sweeps = 60;
    for sweep in 0..=max_sweeps {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= tol {
            break;
        }
        if sweep == max_sweeps {
            return Err(NumError::NoConvergence { sweeps: max_sweeps });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.norm() <= tol / (n as f64) {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let phase = apq / apq.norm();
                let tau = (aqq - app) / (2.0 * apq.norm());
                let sign = if tau >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // Unitary G embedded at (p,q):
                //   G[p][p] = c          G[p][q] = s
                //   G[q][p] = -s e^{-iφ} G[q][q] = c e^{-iφ}
                let gqp = -s * phase.conj();
                let gqq = c * phase.conj();

                // A <- G† A G, columns then rows.
                for i in 0..n {
                    let aip = a[(i, p)];
                    let aiq = a[(i, q)];
                    a[(i, p)] = aip * c + aiq * gqp;
                    a[(i, q)] = aip * s + aiq * gqq;
                }
                for j in 0..n {
                    let apj = a[(p, j)];
                    let aqj = a[(q, j)];
                    a[(p, j)] = apj * c + aqj * gqp.conj();
                    a[(q, j)] = apj * s + aqj * gqq.conj();
                }
                a[(p, q)] = Complex64::ZERO;
                a[(q, p)] = Complex64::ZERO;

                for i in 0..n {
                    let vip = v[(i, p)];
                    let viq = v[(i, q)];
                    v[(i, p)] = vip * c + viq * gqp;
                    v[(i, q)] = vip * s + viq * gqq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((eigenvalues, vectors))
}

/// Hermitian PSD square root via eigendecomposition.
///
/// Eigenvalues in [-1e-10, 0) are treated as rounding dust and clipped to
/// zero; anything more negative is an error.
pub fn psd_sqrt(h: &ComplexMatrix) -> Result<ComplexMatrix, NumError> {
    let (eigenvalues, v) = herm_eig(h)?;
    if let Some(&min) = eigenvalues.first() {
        if min < -1e-10 {
            return Err(NumError::NotPsd {
                min_eigenvalue: min,
            });
        }
    }
    let n = h.rows;
    let mut scaled = v.clone();
    for (j, lambda) in eigenvalues.iter().enumerate() {
        let s = Complex64::new(lambda.max(0.0).sqrt(), 0.0);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    let root = scaled.matmul(&v.adjoint());
    // Symmetrize away rounding in the reconstruction.
    Ok(root.add(&root.adjoint()).scale(Complex64::new(0.5, 0.0)))
}

/// Matrix exponential by scaling-and-squaring over a truncated Taylor series.
///
/// The argument is halved until its 1-norm is at most 0.5, the series is
/// summed until the running term falls below the machine-precision tail
/// bound, and the result is squared back up.
pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix, NumError> {
    if !a.is_square() {
        return Err(NumError::Dimension {
            expected: a.rows,
            got: a.cols,
            context: "expm requires a square matrix",
        });
    }
    if !a.is_finite() {
        return Err(NumError::NonFinite { context: "expm" });
    }
    let n = a.rows;
    let norm = a.one_norm();
    if norm == 0.0 {
        return Ok(ComplexMatrix::identity(n));
    }
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.scale(Complex64::new(1.0 / 2f64.powi(squarings as i32), 0.0));

    let mut sum = ComplexMatrix::identity(n);
    let mut term = ComplexMatrix::identity(n);
    for k in 1..=80 {
        term = term
            .matmul(&scaled)
            .scale(Complex64::new(1.0 / k as f64, 0.0));
        sum = sum.add(&term);
        if term.frobenius_norm() <= 1e-17 * sum.frobenius_norm() {
            break;
        }
    }
    let mut result = sum;
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    Ok(result)
}

/// Outcome of [`solve`]: the solution, the 1-norm condition number of the
/// matrix, and whether the least-squares fallback was taken.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub condition: f64,
    pub least_squares: bool,
}

/// Solves `M x = b` for real right-hand sides by LU with partial pivoting.
///
/// The 1-norm condition number is always computed; above 1e6 the solve falls
/// back to an eigendecomposition-based least-squares pseudo-inverse and the
/// report is flagged.
pub fn solve(m: &ComplexMatrix, b: &[f64]) -> Result<SolveReport, NumError> {
    if !m.is_square() {
        return Err(NumError::Dimension {
            expected: m.rows,
            got: m.cols,
            context: "solve requires a square matrix",
        });
    }
    if m.rows != b.len() {
        return Err(NumError::Dimension {
            expected: m.rows,
            got: b.len(),
            context: "solve right-hand side",
        });
    }
    let n = m.rows;
    let lu = LuFactors::factor(m)?;
    let inv_one_norm = lu.inverse_one_norm();
    let condition = m.one_norm() * inv_one_norm;

    let bc: ComplexVector = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    if condition <= 1e6 {
        let x = lu.solve(&bc);
        return Ok(SolveReport {
            x: x.iter().map(|z| z.re).collect(),
            condition,
            least_squares: false,
        });
    }

    // Ill conditioned: minimal-norm least squares through the spectral
    // pseudo-inverse of M†M.
    let mh = m.adjoint();
    let gram = mh.matmul(m);
    let (eigenvalues, v) = herm_eig(&gram)?;
    let rhs = mh.mul_vec(&bc);
    let cutoff = eigenvalues.last().copied().unwrap_or(0.0).abs() * 1e-14;
    let mut x = vec![Complex64::ZERO; n];
    for (j, &lambda) in eigenvalues.iter().enumerate() {
        if lambda <= cutoff {
            continue;
        }
        let vj = v.column(j);
        let coeff = vec_inner(&vj, &rhs) / lambda;
        for (xi, &vji) in x.iter_mut().zip(&vj) {
            *xi += coeff * vji;
        }
    }
    Ok(SolveReport {
        x: x.iter().map(|z| z.re).collect(),
        condition,
        least_squares: true,
    })
}

/// 1-norm condition number of a square matrix (via explicit inverse; the
/// matrices here are at most 64x64).
pub fn condition_number(m: &ComplexMatrix) -> Result<f64, NumError> {
    let lu = LuFactors::factor(m)?;
    Ok(m.one_norm() * lu.inverse_one_norm())
}

struct LuFactors {
    n: usize,
    lu: ComplexMatrix,
    pivots: Vec<usize>,
}

impl LuFactors {
    fn factor(m: &ComplexMatrix) -> Result<Self, NumError> {
        let n = m.rows;
        let mut lu = m.clone();
        let mut pivots = vec![0usize; n];
        let scale = m.one_norm().max(1e-300);
        for k in 0..n {
            let (mut piv, mut max) = (k, lu[(k, k)].norm());
            for i in (k + 1)..n {
                let mag = lu[(i, k)].norm();
                if mag > max {
                    piv = i;
                    max = mag;
                }
            }
            if max < 1e-14 * scale {
                return Err(NumError::Singular);
            }
            pivots[k] = piv;
            if piv != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
            }
            let inv_pivot = Complex64::ONE / lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] * inv_pivot;
                lu[(i, k)] = factor;
                for j in (k + 1)..n {
                    let upd = factor * lu[(k, j)];
                    lu[(i, j)] -= upd;
                }
            }
        }
        Ok(Self { n, lu, pivots })
    }

    #[allow(clippy::needless_range_loop)] // triangular solves read best indexed
    fn solve(&self, b: &[Complex64]) -> ComplexVector {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            for i in (k + 1)..n {
                let upd = self.lu[(i, k)] * xk;
                x[i] -= upd;
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for j in (k + 1)..n {
                acc -= self.lu[(k, j)] * x[j];
            }
            x[k] = acc / self.lu[(k, k)];
        }
        x
    }

    fn inverse_one_norm(&self) -> f64 {
        let n = self.n;
        let mut max = 0.0f64;
        for j in 0..n {
            let mut e = vec![Complex64::ZERO; n];
            e[j] = Complex64::ONE;
            let col = self.solve(&e);
            max = max.max(col.iter().map(|z| z.norm()).sum());
        }
        max
    }
}

/// Euclidean projection onto the probability simplex `{y >= 0, sum y = 1}`.
pub fn simplex_project(x: &[f64]) -> Vec<f64> {
    assert!(!x.is_empty(), "cannot project an empty vector");
    assert!(x.iter().all(|v| v.is_finite()), "non-finite entry");
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            tau = candidate;
        }
    }
    x.iter().map(|&v| (v - tau).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(n, n, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        let (q, _) = qr_positive(&random_matrix(rng, n)).unwrap();
        q
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        let a = random_matrix(rng, n);
        a.add(&a.adjoint()).scale(c(0.5, 0.0))
    }

    #[test]
    fn qr_identity_is_identity() {
        let (q, r) = qr_positive(&ComplexMatrix::identity(2)).unwrap();
        assert!(q.fro_distance(&ComplexMatrix::identity(2)) < 1e-14);
        assert!(r.fro_distance(&ComplexMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn qr_swap_matrix() {
        // Householder factorization plus the phase fix reproduces the input
        // permutation with R = I.
        let swap = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let (q, r) = qr_positive(&swap).unwrap();
        assert!(q.fro_distance(&swap) < 1e-12, "Q = {q:?}");
        assert!(
            r.fro_distance(&ComplexMatrix::identity(2)) < 1e-12,
            "R = {r:?}"
        );
    }

    #[test]
    fn qr_reconstructs_and_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 3, 8, 16] {
            let a = random_matrix(&mut rng, n);
            let (q, r) = qr_positive(&a).unwrap();
            assert!(q.matmul(&r).fro_distance(&a) < 1e-10);
            assert!(
                q.adjoint()
                    .matmul(&q)
                    .fro_distance(&ComplexMatrix::identity(n))
                    < 1e-10
            );
            for i in 0..n {
                assert!(r[(i, i)].im.abs() < 1e-12 && r[(i, i)].re >= 0.0);
                for j in 0..i {
                    assert!(r[(i, j)].norm() < 1e-12, "R not upper triangular");
                }
            }
        }
    }

    #[test]
    fn qr_of_unitary_gives_identity_r() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [2, 4, 32] {
            let u = random_unitary(&mut rng, n);
            let (q, r) = qr_positive(&u).unwrap();
            assert!(r.fro_distance(&ComplexMatrix::identity(n)) < 1e-9);
            assert!(q.fro_distance(&u) < 1e-9);
        }
    }

    #[test]
    fn qr_reports_rank_deficiency() {
        let a = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        match qr_positive(&a) {
            Err(NumError::RankDeficient { index: 1, .. }) => {}
            other => panic!("expected rank deficiency at index 1, got {other:?}"),
        }
    }

    #[test]
    fn herm_eig_diagonal() {
        let h = ComplexMatrix::from_real(2, 2, &[3.0, 0.0, 0.0, 1.0]).unwrap();
        let (vals, _) = herm_eig(&h).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12 && (vals[1] - 3.0).abs() < 1e-12);

        let (vals4, _) = herm_eig(&ComplexMatrix::identity(4)).unwrap();
        for v in vals4 {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn herm_eig_two_by_two_hand_case() {
        // [[2,1],[1,2]]: characteristic polynomial gives 1 and 3 with
        // eigenvectors (1,-1)/sqrt(2) and (1,1)/sqrt(2).
        let h = ComplexMatrix::from_real(2, 2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let (vals, vecs) = herm_eig(&h).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        let s = 1.0 / 2.0f64.sqrt();
        // Eigenvectors are defined up to a phase; compare |<expected|got>|.
        let v0 = vecs.column(0);
        let v1 = vecs.column(1);
        let e0 = [c(s, 0.0), c(-s, 0.0)];
        let e1 = [c(s, 0.0), c(s, 0.0)];
        assert!((vec_inner(&e0, &v0).norm() - 1.0).abs() < 1e-10);
        assert!((vec_inner(&e1, &v1).norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn herm_eig_random_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in [3, 8, 32] {
            let h = random_hermitian(&mut rng, n);
            let (vals, v) = herm_eig(&h).unwrap();
            for w in vals.windows(2) {
                assert!(w[0] <= w[1] + 1e-12, "eigenvalues not ascending");
            }
            let lambda = ComplexMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    c(vals[i], 0.0)
                } else {
                    Complex64::ZERO
                }
            });
            assert!(h.matmul(&v).fro_distance(&v.matmul(&lambda)) < 1e-9);
            assert!(
                v.adjoint()
                    .matmul(&v)
                    .fro_distance(&ComplexMatrix::identity(n))
                    < 1e-9
            );
        }
    }

    #[test]
    fn herm_eig_rejects_non_hermitian() {
        let a = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(herm_eig(&a), Err(NumError::NotHermitian { .. })));
    }

    #[test]
    fn psd_sqrt_diagonal_and_zero() {
        let h = ComplexMatrix::from_real(2, 2, &[4.0, 0.0, 0.0, 1.0]).unwrap();
        let s = psd_sqrt(&h).unwrap();
        let expected = ComplexMatrix::from_real(2, 2, &[2.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(s.fro_distance(&expected) < 1e-10);

        let z = ComplexMatrix::zeros(3, 3);
        assert!(psd_sqrt(&z).unwrap().fro_distance(&z) < 1e-14);
    }

    #[test]
    fn psd_sqrt_hand_case() {
        // sqrt([[2,1],[1,2]]) from its eigendecomposition:
        // diag entries (sqrt(3)+1)/2, off-diagonal (sqrt(3)-1)/2.
        let h = ComplexMatrix::from_real(2, 2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let s = psd_sqrt(&h).unwrap();
        let d = (3.0f64.sqrt() + 1.0) / 2.0;
        let o = (3.0f64.sqrt() - 1.0) / 2.0;
        let expected = ComplexMatrix::from_real(2, 2, &[d, o, o, d]).unwrap();
        assert!(s.fro_distance(&expected) < 1e-10);
        assert!((s[(0, 0)].re - 1.3660).abs() < 1e-4);
        assert!((s[(0, 1)].re - 0.3660).abs() < 1e-4);
    }

    #[test]
    fn psd_sqrt_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for n in [2, 5, 16] {
            let b = random_matrix(&mut rng, n);
            let s0 = b.adjoint().matmul(&b); // PSD
            let s = psd_sqrt(&s0.matmul(&s0)).unwrap();
            assert!(s.fro_distance(&s0) < 1e-7, "round trip failed at n={n}");
        }
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let h = ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -0.5]).unwrap();
        assert!(matches!(psd_sqrt(&h), Err(NumError::NotPsd { .. })));
    }

    #[test]
    fn expm_zero_is_identity() {
        let e = expm(&ComplexMatrix::zeros(3, 3)).unwrap();
        assert!(e.fro_distance(&ComplexMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn expm_diagonal_scalar_case() {
        // exp(-Z) = diag(e^-1, e^1); the argument -i t (i gamma Z) with t=2,
        // gamma=-0.5 reduces to exactly -Z.
        let a = ComplexMatrix::from_real(2, 2, &[-1.0, 0.0, 0.0, 1.0]).unwrap();
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)].re - 1.0 / std::f64::consts::E).abs() < 1e-9);
        assert!((e[(1, 1)].re - std::f64::consts::E).abs() < 1e-9);
        assert!(e[(0, 1)].norm() < 1e-15 && e[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn expm_pauli_rotation() {
        // exp(i theta X) = cos(theta) I + i sin(theta) X; at theta = pi/2 the
        // result is [[0, i], [i, 0]].
        let theta = std::f64::consts::FRAC_PI_2;
        let a = ComplexMatrix::new(
            2,
            2,
            vec![
                Complex64::ZERO,
                c(0.0, theta),
                c(0.0, theta),
                Complex64::ZERO,
            ],
        )
        .unwrap();
        let e = expm(&a).unwrap();
        assert!(e[(0, 0)].norm() < 1e-12);
        assert!((e[(0, 1)] - c(0.0, 1.0)).norm() < 1e-12);
        assert!((e[(1, 0)] - c(0.0, 1.0)).norm() < 1e-12);
        assert!(e[(1, 1)].norm() < 1e-12);
    }

    #[test]
    fn expm_matches_eigendecomposition_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for scale in [0.5, 5.0, 50.0] {
            let h = random_hermitian(&mut rng, 8);
            let h = h.scale(c(scale / h.one_norm(), 0.0));
            let (vals, v) = herm_eig(&h).unwrap();
            let exp_diag = ComplexMatrix::from_fn(8, 8, |i, j| {
                if i == j {
                    c(vals[i].exp(), 0.0)
                } else {
                    Complex64::ZERO
                }
            });
            let oracle = v.matmul(&exp_diag).matmul(&v.adjoint());
            let got = expm(&h).unwrap();
            let rel = got.fro_distance(&oracle) / oracle.frobenius_norm();
            assert!(rel < 1e-9, "relative error {rel:.3e} at scale {scale}");
        }
    }

    #[test]
    fn expm_inverse_product_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..5 {
            let a = random_matrix(&mut rng, 6);
            let a = a.scale(c(10.0 / a.one_norm(), 0.0));
            let fwd = expm(&a).unwrap();
            let bwd = expm(&a.scale(c(-1.0, 0.0))).unwrap();
            assert!(fwd.matmul(&bwd).fro_distance(&ComplexMatrix::identity(6)) < 1e-8);
        }
    }

    #[test]
    fn solve_identity_and_hand_cases() {
        let report = solve(&ComplexMatrix::identity(2), &[0.3, 0.7]).unwrap();
        assert!((report.x[0] - 0.3).abs() < 1e-15 && (report.x[1] - 0.7).abs() < 1e-15);
        assert!(!report.least_squares);

        let m = ComplexMatrix::from_real(2, 2, &[0.99, 0.01, 0.01, 0.99]).unwrap();
        let r1 = solve(&m, &[0.99, 0.01]).unwrap();
        assert!((r1.x[0] - 1.0).abs() < 1e-12 && r1.x[1].abs() < 1e-12);
        let r2 = solve(&m, &[0.5, 0.5]).unwrap();
        assert!((r2.x[0] - 0.5).abs() < 1e-12 && (r2.x[1] - 0.5).abs() < 1e-12);
        assert!(r2.condition < 10.0);
    }

    #[test]
    fn solve_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let m = ComplexMatrix::from_fn(8, 8, |i, j| {
                c(
                    if i == j { 1.0 } else { 0.0 } + 0.1 * (rng.random::<f64>() - 0.5),
                    0.0,
                )
            });
            let b: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
            let report = solve(&m, &b).unwrap();
            let xc: Vec<Complex64> = report.x.iter().map(|&v| c(v, 0.0)).collect();
            let back = m.mul_vec(&xc);
            let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let err = back
                .iter()
                .zip(&b)
                .map(|(got, want)| (got.re - want).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-9 * bnorm.max(1.0));
        }
    }

    #[test]
    fn solve_flags_ill_conditioned_and_rejects_singular() {
        let near_singular = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, 1.0 + 1e-9]).unwrap();
        let report = solve(&near_singular, &[1.0, 1.0]).unwrap();
        assert!(report.least_squares);
        assert!(report.condition > 1e6);

        let singular = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            solve(&singular, &[1.0, 1.0]),
            Err(NumError::Singular)
        ));
    }

    #[test]
    fn simplex_project_hand_cases() {
        let on = simplex_project(&[0.25, 0.25, 0.25, 0.25]);
        assert_eq!(on, vec![0.25, 0.25, 0.25, 0.25]);

        // KKT by hand: tau = 0.1 keeps only the first coordinate active.
        let p = simplex_project(&[1.1, -0.1]);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15);

        let uniform = simplex_project(&[0.0, 0.0]);
        assert!((uniform[0] - 0.5).abs() < 1e-15 && (uniform[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kron_cases() {
        let i2 = ComplexMatrix::identity(2);
        assert!(kron(&i2, &i2).fro_distance(&ComplexMatrix::identity(4)) < 1e-15);

        let z = ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]).unwrap();
        let zi = kron(&z, &i2);
        let expected = ComplexMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                c(if i < 2 { 1.0 } else { -1.0 }, 0.0)
            } else {
                Complex64::ZERO
            }
        });
        assert!(zi.fro_distance(&expected) < 1e-15);

        // X (x) X maps |00> (index 0) to |11> (index 3).
        let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let xx = kron(&x, &x);
        let v = xx.mul_vec(&basis_state(4, 0));
        assert!((v[3] - Complex64::ONE).norm() < 1e-15);
        assert!(v[0].norm() + v[1].norm() + v[2].norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn simplex_projection_is_feasible_and_idempotent(
            xs in proptest::collection::vec(-3.0f64..3.0, 1..12)
        ) {
            let p = simplex_project(&xs);
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            let again = simplex_project(&p);
            for (a, b) in p.iter().zip(&again) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            // Projection preserves the ordering of entries.
            for i in 0..xs.len() {
                for j in 0..xs.len() {
                    if xs[i] > xs[j] {
                        prop_assert!(p[i] >= p[j] - 1e-12);
                    }
                }
            }
        }

        #[test]
        fn expm_product_inverse(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 4);
            let fwd = expm(&a).unwrap();
            let bwd = expm(&a.scale(Complex64::new(-1.0, 0.0))).unwrap();
            prop_assert!(fwd.matmul(&bwd).fro_distance(&ComplexMatrix::identity(4)) < 1e-8);
        }
    }
}
