//! Exact reduced thermal states of a system coupled to a few truncated bosonic
//! modes, and a direct check of the displaced-bath trace identity.

use nalgebra::ComplexField;

use crate::error::{Error, Result};
use crate::linalg::{
    c, eigh, matrix_exp_hermitian, partial_trace, CMatrix, DensityMatrix, HermitianMatrix, C64,
    DEFAULT_MAX_DIM,
};
use crate::mfgs::{RenormalizationConvention, SystemSpec};
use crate::spectral::{j_of_omega, overlap_kernel, BathParams, Mode, SpectralDensity};

pub const DEFAULT_FOCK_CUTOFF: usize = 25;
/// Trace distance between the two largest cutoffs above which a run is flagged.
pub const CONVERGENCE_TOL: f64 = 1e-6;
/// Relative change of the identity's left side, cutoff vs cutoff + 10.
pub const TRUNCATION_TOL: f64 = 1e-8;
/// Total dimension up to which [`OracleEngine::Auto`] diagonalizes densely.
pub const DENSE_LIMIT: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub enum DiscretizationSource {
    Explicit,
    Midpoint { sd: SpectralDensity, n_modes: usize, omega_max: f64 },
}

/// Bath modes with a common Fock cutoff (occupations `0..=fock_cutoff`).
#[derive(Debug, Clone, PartialEq)]
pub struct BathDiscretization {
    pub modes: Vec<Mode>,
    pub fock_cutoff: usize,
    pub source: DiscretizationSource,
}

impl BathDiscretization {
    pub fn new(modes: Vec<Mode>, fock_cutoff: usize) -> Result<Self> {
        let bd = Self { modes, fock_cutoff, source: DiscretizationSource::Explicit };
        bd.validate()?;
        Ok(bd)
    }

    pub fn validate(&self) -> Result<()> {
        if self.fock_cutoff == 0 {
            return Err(Error::validation("Fock cutoff must be at least 1"));
        }
        SpectralDensity::discrete(self.modes.clone()).map(|_| ())
    }

    pub fn with_cutoff(&self, fock_cutoff: usize) -> Self {
        Self { fock_cutoff, ..self.clone() }
    }

    pub fn spectral_density(&self) -> SpectralDensity {
        SpectralDensity::DiscreteModes(self.modes.clone())
    }

    /// `Σ g_k²/ω_k`.
    pub fn reorganization_energy(&self) -> f64 {
        self.modes.iter().map(|m| m.g * m.g / m.omega).sum()
    }

    /// `(fock_cutoff+1)^n`, or `None` on overflow.
    pub fn bath_dim(&self) -> Option<usize> {
        let levels = self.fock_cutoff.checked_add(1)?;
        self.modes.iter().try_fold(1usize, |acc, _| acc.checked_mul(levels))
    }

    pub fn total_dim(&self, dim_s: usize, cap: usize) -> Result<usize> {
        match self.bath_dim().and_then(|b| b.checked_mul(dim_s)) {
            Some(n) if n <= cap => Ok(n),
            Some(n) => Err(Error::DimensionCap { required: n, cap }),
            None => Err(Error::DimensionCap { required: usize::MAX, cap }),
        }
    }

    /// `ln Z_B` of the truncated bath.
    pub fn log_partition_function(&self, beta: f64) -> f64 {
        self.modes.iter().map(|m| truncated_log_z(m.omega, beta, self.fock_cutoff)).sum()
    }

    /// Largest `(λ g max|a|/ω)² + n_th` over the modes.
    pub fn occupancy_estimate(&self, lambda: f64, a_max: f64, beta: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| (lambda * m.g * a_max / m.omega).powi(2) + 1.0 / (beta * m.omega).exp_m1())
            .fold(0.0, f64::max)
    }
}

fn truncated_log_z(omega: f64, beta: f64, cutoff: usize) -> f64 {
    let x = beta * omega;
    // Σ_{n≤M} e^{−nx} = (1 − e^{−(M+1)x}) / (1 − e^{−x}).
    (-(-(cutoff as f64 + 1.0) * x).exp_m1()).ln() - (-(-x).exp_m1()).ln()
}

/// Midpoint rule on `n` equal bins of `[0, ω_max]`: `ω_k = (k−½)ω_max/n`,
/// `g_k² = J(ω_k)·ω_max/n`.
pub fn discretize(sd: &SpectralDensity, n: usize, omega_max: f64) -> Result<BathDiscretization> {
    sd.validate()?;
    if n == 0 {
        return Err(Error::validation("discretization needs at least one mode"));
    }
    if !(omega_max > 0.0 && omega_max.is_finite()) {
        return Err(Error::validation(format!("ω_max must be positive, got {omega_max}")));
    }
    let h = omega_max / n as f64;
    let modes = (1..=n)
        .map(|k| {
            let omega = (k as f64 - 0.5) * h;
            Ok(Mode { g: (j_of_omega(sd, omega)? * h).sqrt(), omega })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BathDiscretization {
        modes,
        fock_cutoff: DEFAULT_FOCK_CUTOFF,
        source: DiscretizationSource::Midpoint { sd: sd.clone(), n_modes: n, omega_max },
    })
}

/// Compressed sparse rows.
#[derive(Debug, Clone)]
pub struct SparseMatrix<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: ComplexField<RealField = f64> + Copy> SparseMatrix<T> {
    fn from_rows(rows: Vec<Vec<(usize, T)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            // The diagonal is always stored so that shifts reach every row.
            row.push((i, T::zero()));
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (j, v) in row {
                if last == Some(j) {
                    let k = vals.len() - 1;
                    vals[k] += v;
                } else {
                    cols.push(j);
                    vals.push(v);
                    last = Some(j);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// Gershgorin enclosure of the spectrum.
    fn spectral_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.dim {
            let mut centre = 0.0;
            let mut radius = 0.0;
            for (j, v) in self.row(i) {
                if i == j {
                    centre = v.real();
                } else {
                    radius += v.modulus();
                }
            }
            lo = lo.min(centre - radius);
            hi = hi.max(centre + radius);
        }
        (lo, hi)
    }

    /// `(M − shift)/scale`.
    fn affine(&self, shift: f64, scale: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let mut v = self.vals[k];
                if self.cols[k] == i {
                    v -= T::from_real(shift);
                }
                out.vals[k] = v * T::from_real(1.0 / scale);
            }
        }
        out
    }

    fn map<U>(&self, f: impl Fn(T) -> U) -> SparseMatrix<U> {
        SparseMatrix {
            dim: self.dim,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self.vals.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl SparseMatrix<C64> {
    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    fn is_real(&self) -> bool {
        self.vals.iter().all(|v| v.im == 0.0)
    }
}

/// Total Hamiltonian `H_S⊗I + [λ²QA²⊗I] + λA⊗B + I⊗H_B` with the system as
/// the major index, `B = Σ g_k(a_k + a_k†)` and `Q = Σ g_k²/ω_k`; the bracketed
/// term is present only for the renormalized convention.
pub fn build_sparse_hamiltonian(
    sys: &SystemSpec,
    bd: &BathDiscretization,
    lambda: f64,
    conv: RenormalizationConvention,
    cap: usize,
) -> Result<SparseMatrix<C64>> {
    bd.validate()?;
    if !lambda.is_finite() {
        return Err(Error::validation("λ must be finite"));
    }
    let ds = sys.dim();
    let n = bd.total_dim(ds, cap)?;
    let nb = n / ds;
    let levels = bd.fock_cutoff + 1;
    let nm = bd.modes.len();
    // Mode 0 is the most significant bath digit.
    let strides: Vec<usize> = (0..nm).map(|k| levels.pow((nm - 1 - k) as u32)).collect();
    let occ = |b: usize, k: usize| (b / strides[k]) % levels;

    let a = sys.a().matrix();
    let mut s = sys.h_s().matrix().clone();
    if conv == RenormalizationConvention::Renormalized {
        s += (a * a) * c(lambda * lambda * bd.reorganization_energy());
    }

    let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); n];
    for b in 0..nb {
        let e_b: f64 = (0..nm).map(|k| occ(b, k) as f64 * bd.modes[k].omega).sum();
        for i in 0..ds {
            for j in 0..ds {
                let mut v = s[(i, j)];
                if i == j {
                    v += c(e_b);
                }
                if v != c(0.0) {
                    rows[i * nb + b].push((j * nb + b, v));
                }
            }
        }
        for k in 0..nm {
            let nk = occ(b, k);
            if nk == bd.fock_cutoff {
                continue;
            }
            let b2 = b + strides[k];
            let bv = bd.modes[k].g * ((nk + 1) as f64).sqrt();
            for i in 0..ds {
                for j in 0..ds {
                    let v = a[(i, j)] * (lambda * bv);
                    if v != c(0.0) {
                        rows[i * nb + b].push((j * nb + b2, v));
                        rows[i * nb + b2].push((j * nb + b, v));
                    }
                }
            }
        }
    }
    Ok(SparseMatrix::from_rows(rows))
}

/// Dense form of [`build_sparse_hamiltonian`].
pub fn build_total_hamiltonian(
    sys: &SystemSpec,
    bd: &BathDiscretization,
    lambda: f64,
    conv: RenormalizationConvention,
    cap: usize,
) -> Result<HermitianMatrix> {
    HermitianMatrix::new(build_sparse_hamiltonian(sys, bd, lambda, conv, cap)?.to_dense())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleEngine {
    /// Dense up to [`DENSE_LIMIT`], Chebyshev above.
    #[default]
    Auto,
    /// Full diagonalization.
    Dense,
    /// Chebyshev expansion of `e^{−βH/2}` applied to basis blocks.
    Chebyshev,
}

#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub max_dim: usize,
    /// Raise the cutoff to `⌈4·occupancy⌉` when the occupancy estimate exceeds cutoff/4.
    pub auto_raise_cutoff: bool,
    pub engine: OracleEngine,
    /// Re-run at cutoff − 5 and cutoff − 10.
    pub convergence_check: bool,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { max_dim: DEFAULT_MAX_DIM, auto_raise_cutoff: true, engine: OracleEngine::Auto, convergence_check: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub fock_cutoff: usize,
    /// Trace distance to the state at the largest cutoff.
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub state: DensityMatrix,
    pub log_z_sb: f64,
    pub log_z_b: f64,
    /// Cutoff actually used, after any automatic raise.
    pub fock_cutoff: usize,
    /// Ascending in cutoff; the last row is the reported state.
    pub convergence: Vec<ConvergenceRow>,
    /// `None` when the cutoff is too small to re-run below it.
    pub converged: Option<bool>,
    pub engine: OracleEngine,
}

impl OracleResult {
    pub fn z_sb(&self) -> f64 {
        self.log_z_sb.exp()
    }

    pub fn z_b(&self) -> f64 {
        self.log_z_b.exp()
    }
}

/// Reduced state `Tr_B e^{−βH}/Z` of the system (major index, dimension
/// `dim_s`) and `ln Z`.
pub fn reduced_thermal_state(
    h: &SparseMatrix<C64>,
    dim_s: usize,
    beta: f64,
    engine: OracleEngine,
) -> Result<(DensityMatrix, f64)> {
    if dim_s == 0 || !h.dim().is_multiple_of(dim_s) {
        return Err(Error::validation("system dimension does not divide the total dimension"));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::validation(format!("β must be positive, got {beta}")));
    }
    let dense = match engine {
        OracleEngine::Auto => h.dim() <= DENSE_LIMIT,
        OracleEngine::Dense => true,
        OracleEngine::Chebyshev => false,
    };
    let (rho, log_scale) = if dense {
        dense_reduced(h, dim_s, beta)?
    } else if h.is_real() {
        chebyshev_reduced(&h.map(|v| v.re), dim_s, beta)?
    } else {
        chebyshev_reduced(h, dim_s, beta)?
    };
    let tr: f64 = (0..dim_s).map(|i| rho[(i, i)].re).sum();
    if !(tr > 0.0 && tr.is_finite()) {
        return Err(Error::Numerical(format!("reduced trace {tr} is not positive")));
    }
    let rho = (&rho + rho.adjoint()) * c(0.5 / tr);
    Ok((DensityMatrix::new(rho)?, log_scale + tr.ln()))
}

fn dense_reduced(h: &SparseMatrix<C64>, dim_s: usize, beta: f64) -> Result<(CMatrix, f64)> {
    let eig = eigh(&HermitianMatrix::new(h.to_dense())?)?;
    let e0 = eig.eigenvalues[0];
    let full = eig.apply_fn(|e| (-beta * (e - e0)).exp());
    let rho = partial_trace(&full, &[dim_s, h.dim() / dim_s], 0)?;
    Ok((rho, -beta * e0))
}

/// `e^{−z}I_k(z)` for `k = 0..=kmax`, by Miller's backward recurrence
/// normalized with `I_0 + 2ΣI_k = e^z`.
pub fn scaled_bessel_i(z: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if z == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = kmax.max(z as usize) + (20.0 * (z + 1.0).sqrt()) as usize + 60;
    let (mut above, mut cur) = (0.0f64, 1e-300f64);
    let mut sum = 0.0;
    for n in (0..=start).rev() {
        if n <= kmax {
            out[n] = cur;
        }
        sum += if n == 0 { cur } else { 2.0 * cur };
        if n == 0 {
            break;
        }
        let below = above + 2.0 * n as f64 / z * cur;
        above = cur;
        cur = below;
        if cur > 1e250 {
            let s = 1e-250;
            cur *= s;
            above *= s;
            sum *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

/// Chebyshev coefficients of `e^{−z(1+x)}` on `[−1, 1]`, truncated once the
/// remaining tail is negligible.
fn chebyshev_coefficients(z: f64) -> Vec<f64> {
    let kmax = (z + 12.0 * z.sqrt() + 40.0).ceil() as usize;
    let s = scaled_bessel_i(z, kmax);
    let mut a: Vec<f64> = s
        .iter()
        .enumerate()
        .map(|(k, &v)| if k == 0 { v } else if k % 2 == 0 { 2.0 * v } else { -2.0 * v })
        .collect();
    while a.len() > 2 && a[a.len() - 1].abs() < 1e-18 {
        a.pop();
    }
    a
}

/// `out[r] = α (X·x)[r] + β_ out[r]` on row-major blocks of width `m`.
fn spmm_update<T: ComplexField<RealField = f64> + Copy>(
    x: &SparseMatrix<T>,
    inp: &[T],
    out: &mut [T],
    m: usize,
    alpha: f64,
    beta_: f64,
) {
    let (alpha, beta_) = (T::from_real(alpha), T::from_real(beta_));
    let mut acc = vec![T::zero(); m];
    for r in 0..x.dim {
        acc.iter_mut().for_each(|v| *v = T::zero());
        for (col, v) in x.row(r) {
            let src = &inp[col * m..(col + 1) * m];
            for (a, &s) in acc.iter_mut().zip(src) {
                *a += v * s;
            }
        }
        let dst = &mut out[r * m..(r + 1) * m];
        for (d, &a) in dst.iter_mut().zip(&acc) {
            *d = alpha * a + beta_ * *d;
        }
    }
}

fn chebyshev_reduced<T: ComplexField<RealField = f64> + Copy + Into<C64>>(
    h: &SparseMatrix<T>,
    dim_s: usize,
    beta: f64,
) -> Result<(CMatrix, f64)> {
    let n = h.dim;
    let nb = n / dim_s;
    let (lo, hi) = h.spectral_bounds();
    let margin = 1e-9 * (hi - lo).abs().max(1.0);
    let (lo, hi) = (lo - margin, hi + margin);
    let centre = 0.5 * (lo + hi);
    let radius = 0.5 * (hi - lo);
    let x = h.affine(centre, radius);
    // e^{−βH/2} = e^{−β lo/2} · e^{−z(1+X)} with z = βr/2.
    let coeffs = chebyshev_coefficients(0.5 * beta * radius);

    let per_block = (96 / dim_s).max(1);
    let mut rho = CMatrix::zeros(dim_s, dim_s);
    let mut b0 = 0;
    while b0 < nb {
        let bn = per_block.min(nb - b0);
        let m = dim_s * bn;
        let col = |s: usize, bi: usize| s * bn + bi;
        let mut t0 = vec![T::zero(); n * m];
        for s in 0..dim_s {
            for bi in 0..bn {
                t0[(s * nb + b0 + bi) * m + col(s, bi)] = T::one();
            }
        }
        let mut t1 = vec![T::zero(); n * m];
        spmm_update(&x, &t0, &mut t1, m, 1.0, 0.0);
        let mut acc: Vec<T> = t0
            .iter()
            .zip(&t1)
            .map(|(&p, &q)| p * T::from_real(coeffs[0]) + q * T::from_real(coeffs[1]))
            .collect();
        for &a in &coeffs[2..] {
            // t0 ← 2X t1 − t0, then swap so t1 holds T_k.
            spmm_update(&x, &t1, &mut t0, m, 2.0, -1.0);
            std::mem::swap(&mut t0, &mut t1);
            let a = T::from_real(a);
            for (d, &v) in acc.iter_mut().zip(&t1) {
                *d += a * v;
            }
        }
        for bi in 0..bn {
            for i in 0..dim_s {
                for j in 0..dim_s {
                    let (ci, cj) = (col(i, bi), col(j, bi));
                    let mut sum = C64::new(0.0, 0.0);
                    for r in 0..n {
                        let u: C64 = acc[r * m + ci].into();
                        let v: C64 = acc[r * m + cj].into();
                        sum += u.conj() * v;
                    }
                    rho[(i, j)] += sum;
                }
            }
        }
        b0 += bn;
    }
    Ok((rho, -beta * lo))
}

/// Exact mean force Gibbs state with default [`OracleOptions`].
pub fn exact_mean_force_state(
    sys: &SystemSpec,
    bd: &BathDiscretization,
    bath: &BathParams,
    conv: RenormalizationConvention,
) -> Result<OracleResult> {
    exact_mean_force_state_with(sys, bd, bath, conv, &OracleOptions::default())
}

pub fn exact_mean_force_state_with(
    sys: &SystemSpec,
    bd: &BathDiscretization,
    bath: &BathParams,
    conv: RenormalizationConvention,
    opts: &OracleOptions,
) -> Result<OracleResult> {
    bath.validate()?;
    bd.validate()?;
    let mut cutoff = bd.fock_cutoff;
    if opts.auto_raise_cutoff {
        let a_max = sys.a_eigenvalues().iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let occ = bd.occupancy_estimate(bath.lambda, a_max, bath.beta);
        if occ > cutoff as f64 / 4.0 {
            cutoff = (4.0 * occ).ceil() as usize;
        }
    }
    let bd = bd.with_cutoff(cutoff);
    let ds = sys.dim();
    bd.total_dim(ds, opts.max_dim)?;

    let run = |bd: &BathDiscretization| {
        let h = build_sparse_hamiltonian(sys, bd, bath.lambda, conv, opts.max_dim)?;
        reduced_thermal_state(&h, ds, bath.beta, opts.engine)
    };
    let (state, log_z_sb) = run(&bd)?;
    let mut convergence = Vec::new();
    if opts.convergence_check {
        for back in [10, 5] {
            if cutoff > back {
                let (s, _) = run(&bd.with_cutoff(cutoff - back))?;
                convergence.push(ConvergenceRow {
                    fock_cutoff: cutoff - back,
                    distance: s.trace_distance(&state)?,
                });
            }
        }
    }
    let converged = convergence.last().map(|r| r.distance <= CONVERGENCE_TOL);
    convergence.push(ConvergenceRow { fock_cutoff: cutoff, distance: 0.0 });
    let engine = match opts.engine {
        OracleEngine::Auto if bd.total_dim(ds, opts.max_dim)? <= DENSE_LIMIT => OracleEngine::Dense,
        OracleEngine::Auto => OracleEngine::Chebyshev,
        e => e,
    };
    Ok(OracleResult {
        state,
        log_z_sb,
        log_z_b: bd.log_partition_function(bath.beta),
        fock_cutoff: cutoff,
        convergence,
        converged,
        engine,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceIdentityCheck {
    /// `Tr[e^{−(β−u)H_{B,l}} e^{−uH_{B,l'}}]` on the truncated Fock space.
    pub lhs: f64,
    /// `Z_B e^{−λ²(a_{l'}−a_l)² K(u)}` with the truncated `Z_B`.
    pub rhs: f64,
    pub z_b: f64,
    /// Left side recomputed at cutoff + 10.
    pub lhs_refined: f64,
    /// Set when the left side moved by more than [`TRUNCATION_TOL`] on refinement.
    pub truncation_flag: bool,
}

impl TraceIdentityCheck {
    pub fn relative_error(&self) -> f64 {
        (self.lhs / self.rhs - 1.0).abs()
    }
}

/// Displaced single-mode Hamiltonian `ωb†b + λag(b + b†) + λ²a²g²/ω`.
fn displaced_mode(m: Mode, cutoff: usize, lambda: f64, a: f64) -> Result<HermitianMatrix> {
    let d = cutoff + 1;
    let shift = (lambda * a * m.g).powi(2) / m.omega;
    let mut h = CMatrix::zeros(d, d);
    for n in 0..d {
        h[(n, n)] = c(m.omega * n as f64 + shift);
        if n + 1 < d {
            let v = c(lambda * a * m.g * ((n + 1) as f64).sqrt());
            h[(n, n + 1)] = v;
            h[(n + 1, n)] = v;
        }
    }
    HermitianMatrix::new(h)
}

fn trace_product(
    m: Mode,
    cutoff: usize,
    a_l: f64,
    a_l2: f64,
    lambda: f64,
    beta: f64,
    u: f64,
) -> Result<f64> {
    let left = matrix_exp_hermitian(&displaced_mode(m, cutoff, lambda, a_l)?, -(beta - u))?;
    let right = matrix_exp_hermitian(&displaced_mode(m, cutoff, lambda, a_l2)?, -u)?;
    Ok((left.matrix() * right.matrix()).trace().re)
}

/// Both sides of the single-mode displaced-bath trace identity.
pub fn verify_trace_identity(
    bd: &BathDiscretization,
    a_l: f64,
    a_l2: f64,
    lambda: f64,
    beta: f64,
    u: f64,
) -> Result<TraceIdentityCheck> {
    bd.validate()?;
    if bd.modes.len() != 1 {
        return Err(Error::validation(format!(
            "the trace identity is checked on one mode, got {}",
            bd.modes.len()
        )));
    }
    if !(a_l.is_finite() && a_l2.is_finite() && lambda.is_finite()) {
        return Err(Error::validation("a_l, a_l' and λ must be finite"));
    }
    BathParams::new(beta, lambda)?;
    if !(0.0..=beta).contains(&u) {
        return Err(Error::validation(format!("u = {u} outside [0, β = {beta}]")));
    }
    let m = bd.modes[0];
    let lhs = trace_product(m, bd.fock_cutoff, a_l, a_l2, lambda, beta, u)?;
    let lhs_refined = trace_product(m, bd.fock_cutoff + 10, a_l, a_l2, lambda, beta, u)?;
    let z_b = bd.log_partition_function(beta).exp();
    let k = overlap_kernel(&bd.spectral_density(), beta, u)?;
    let rhs = z_b * (-(lambda * (a_l2 - a_l)).powi(2) * k).exp();
    Ok(TraceIdentityCheck {
        lhs,
        rhs,
        z_b,
        lhs_refined,
        truncation_flag: ((lhs_refined - lhs) / lhs).abs() > TRUNCATION_TOL,
    })
}
