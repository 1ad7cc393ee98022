//! Dense complex linear algebra for the small Hermitian problems that show up
//! here: eigendecomposition, spectral matrix functions, Kronecker products and
//! partial traces.
//!
//! Everything is dense. Eigenvector gauge is never canonicalized; consumers only
//! use projectors and eigenvalues.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Absolute Hermiticity tolerance accepted by [`HermitianMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace tolerance accepted by [`DensityMatrix`].
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue a strict [`DensityMatrix`] may have.
pub const PSD_TOL: f64 = 1e-9;
/// Default cap on dense dimensions produced by [`kron`].
pub const DEFAULT_MAX_DIM: usize = 1 << 20;

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest absolute entry of a complex matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// A dense Hermitian matrix, validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return Err(Error::validation(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::validation("matrix has non-finite entries"));
        }
        let defect = hermiticity_defect(&m);
        if defect > HERMITIAN_TOL {
            return Err(Error::validation(format!(
                "matrix is not Hermitian (max |m_ij - conj(m_ji)| = {defect:e})"
            )));
        }
        Ok(Self(m))
    }

    /// Builds `(m + m†)/2`; for matrices assembled from Hermitian pieces.
    pub fn hermitize(m: CMatrix) -> Result<Self> {
        let sym = (&m + m.adjoint()) * c(0.5);
        Self::new(sym)
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::validation("row-major data length does not match shape"));
        }
        Self::new(CMatrix::from_row_iterator(rows, cols, data.iter().map(|&x| c(x))))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::new(CMatrix::from_fn(n, n, |i, j| if i == j { c(diag[i]) } else { C64::default() }))
    }

    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn pauli_x() -> Self {
        Self(CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]))
    }

    pub fn pauli_z() -> Self {
        Self(CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn is_real(&self) -> bool {
        self.0.iter().all(|z| z.im == 0.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * c(s))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::validation("dimension mismatch in Hermitian sum"));
        }
        Ok(Self(&self.0 + &other.0))
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }
}

/// Eigenvalues ascending, eigenvectors as orthonormal columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    pub fn reconstruct(&self) -> CMatrix {
        let d = DVector::from_iterator(self.eigenvalues.len(), self.eigenvalues.iter().map(|&x| c(x)));
        &self.eigenvectors * CMatrix::from_diagonal(&d) * self.eigenvectors.adjoint()
    }

    /// `V diag(g(λ_i)) V†`.
    pub fn apply_fn(&self, g: impl Fn(f64) -> f64) -> CMatrix {
        let v = &self.eigenvectors;
        let n = v.nrows();
        let mut scaled = v.clone();
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let w = g(lam);
            for i in 0..n {
                scaled[(i, k)] *= w;
            }
        }
        scaled * v.adjoint()
    }
}

pub fn eigh(m: &HermitianMatrix) -> Result<EigenDecomposition> {
    let eig = SymmetricEigen::try_new(m.0.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = CMatrix::from_fn(m.dim(), m.dim(), |i, k| eig.eigenvectors[(i, order[k])]);
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

/// Largest argument for which `f64::exp` stays finite.
const EXP_MAX_ARG: f64 = 709.0;

/// `exp(scale * m)` through the spectral decomposition.
pub fn matrix_exp_hermitian(m: &HermitianMatrix, scale: f64) -> Result<HermitianMatrix> {
    let eig = eigh(m)?;
    exp_from_eig(&eig, scale)
}

pub fn exp_from_eig(eig: &EigenDecomposition, scale: f64) -> Result<HermitianMatrix> {
    let worst = eig
        .eigenvalues
        .iter()
        .map(|&l| scale * l)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst > EXP_MAX_ARG {
        return Err(Error::Overflow { exponent: worst });
    }
    HermitianMatrix::hermitize(eig.apply_fn(|l| (scale * l).exp()))
}

pub fn kron(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<HermitianMatrix> {
    kron_capped(a, b, DEFAULT_MAX_DIM)
}

pub fn kron_capped(a: &HermitianMatrix, b: &HermitianMatrix, cap: usize) -> Result<HermitianMatrix> {
    let required = a
        .dim()
        .checked_mul(b.dim())
        .ok_or(Error::DimensionCap { required: usize::MAX, cap })?;
    if required > cap {
        return Err(Error::DimensionCap { required, cap });
    }
    Ok(HermitianMatrix(kron_dense(&a.0, &b.0)))
}

/// Kronecker product with `a` as the major index.
pub fn kron_dense(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Traces out every subsystem except `keep`. `dims` lists subsystem dimensions
/// in Kronecker order (first entry is the major index).
pub fn partial_trace(m: &CMatrix, dims: &[usize], keep: usize) -> Result<CMatrix> {
    if m.nrows() != m.ncols() {
        return Err(Error::validation("partial trace needs a square matrix"));
    }
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::validation("subsystem dimensions must be positive"));
    }
    if keep >= dims.len() {
        return Err(Error::validation(format!(
            "keep index {keep} out of range for {} subsystems",
            dims.len()
        )));
    }
    let total: usize = dims.iter().product();
    if total != m.nrows() {
        return Err(Error::validation(format!(
            "product of subsystem dims {total} does not match matrix dim {}",
            m.nrows()
        )));
    }
    let before: usize = dims[..keep].iter().product();
    let dk = dims[keep];
    let after: usize = dims[keep + 1..].iter().product();
    let idx = |b: usize, k: usize, a: usize| (b * dk + k) * after + a;
    let mut out = CMatrix::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = C64::default();
            for b in 0..before {
                for a in 0..after {
                    acc += m[(idx(b, i, a), idx(b, j, a))];
                }
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Hermitian, unit trace and (unless built with
/// [`DensityMatrix::new_perturbative`]) positive semidefinite within tolerance.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    entries: CMatrix,
    min_eigenvalue: f64,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        let rho = Self::new_perturbative(m)?;
        if rho.min_eigenvalue < -PSD_TOL {
            return Err(Error::validation(format!(
                "state is not positive semidefinite (min eigenvalue {:e})",
                rho.min_eigenvalue
            )));
        }
        Ok(rho)
    }

    /// Checks Hermiticity and trace but only records the smallest eigenvalue.
    pub fn new_perturbative(m: CMatrix) -> Result<Self> {
        let h = HermitianMatrix::new(m)?;
        let tr = h.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::validation(format!("state trace is {tr}, expected 1")));
        }
        let min_eigenvalue = eigh(&h)?.eigenvalues[0];
        Ok(Self { entries: h.0, min_eigenvalue })
    }

    /// `exp(-beta h) / Z`, shifting the spectrum so the exponent never overflows.
    pub fn thermal(h: &HermitianMatrix, beta: f64) -> Result<Self> {
        let eig = eigh(h)?;
        let e0 = eig.eigenvalues[0];
        let unnorm = eig.apply_fn(|l| (-beta * (l - e0)).exp());
        let z = unnorm.trace().re;
        Self::new(hermitian_part(&(unnorm / c(z))))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[(i, j)]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        trace_distance(&self.entries, &other.entries)
    }
}

pub(crate) fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

/// `½‖a − b‖₁` for Hermitian `a`, `b`.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::validation("trace distance between matrices of different shape"));
    }
    let diff = HermitianMatrix::hermitize(a - b)?;
    Ok(0.5 * eigh(&diff)?.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}
