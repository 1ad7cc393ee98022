//! Perturbative mean force Gibbs state: the ultrastrong-coupling limit plus
//! first-order coherence corrections.

use std::cell::RefCell;
use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, eigh, hermitian_part, max_abs, CMatrix, DensityMatrix, HermitianMatrix, C64};
use crate::quadrature::{integrate_finite, QuadratureResult, QuadratureSettings};
use crate::special::dawson;
use crate::spectral::{
    characteristic_frequency, overlap_kernel_with, reorganization_energy, BathParams,
    SpectralDensity,
};

/// Minimum gap between eigenvalues of `A`, relative to its spectral range.
pub const MIN_RELATIVE_GAP: f64 = 1e-9;
/// `‖[H_S, A]‖_max` below this counts as commuting.
pub const COMMUTATOR_TOL: f64 = 1e-12;
/// Smallest eigenvalue below which a perturbative state is flagged.
pub const PSD_WARNING: f64 = -1e-3;

/// A system Hamiltonian and coupling observable, expressed in the eigenbasis
/// of the coupling observable.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    h_s: HermitianMatrix,
    a: HermitianMatrix,
    a_eigenvalues: Vec<f64>,
    a_eigenvectors: CMatrix,
    h_elements: CMatrix,
}

impl SystemSpec {
    pub fn new(h_s: HermitianMatrix, a: HermitianMatrix) -> Result<Self> {
        let n = h_s.dim();
        if a.dim() != n {
            return Err(Error::validation(format!(
                "H_S is {n}-dimensional but A is {}-dimensional",
                a.dim()
            )));
        }
        if n < 2 {
            return Err(Error::validation("system dimension must be at least 2"));
        }
        let eig = eigh(&a)?;
        let vals = eig.eigenvalues;
        let range = vals[n - 1] - vals[0];
        let min_gap = vals.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if !(range > 0.0) || min_gap <= MIN_RELATIVE_GAP * range {
            return Err(Error::validation(
                "coupling observable has degenerate eigenvalues",
            ));
        }
        let comm = h_s.matrix() * a.matrix() - a.matrix() * h_s.matrix();
        if max_abs(&comm) <= COMMUTATOR_TOL {
            return Err(Error::validation("H_S commutes with A; no coherences can form"));
        }
        let v = eig.eigenvectors;
        let h_elements = v.adjoint() * h_s.matrix() * &v;
        Ok(Self { h_s, a, a_eigenvalues: vals, a_eigenvectors: v, h_elements })
    }

    pub fn dim(&self) -> usize {
        self.a_eigenvalues.len()
    }

    pub fn h_s(&self) -> &HermitianMatrix {
        &self.h_s
    }

    pub fn a(&self) -> &HermitianMatrix {
        &self.a
    }

    /// `a_l`, ascending.
    pub fn a_eigenvalues(&self) -> &[f64] {
        &self.a_eigenvalues
    }

    /// Columns are `|a_l⟩`.
    pub fn a_eigenvectors(&self) -> &CMatrix {
        &self.a_eigenvectors
    }

    /// `h_{l,l'} = ⟨a_l|H_S|a_{l'}⟩`.
    pub fn h_element(&self, l: usize, l2: usize) -> C64 {
        self.h_elements[(l, l2)]
    }

    pub fn h_elements(&self) -> &CMatrix {
        &self.h_elements
    }

    /// Pseudo-energy `h_l`.
    pub fn h(&self, l: usize) -> f64 {
        self.h_elements[(l, l)].re
    }

    /// `ω_{l,l'} = h_l − h_{l'}`.
    pub fn gap(&self, l: usize, l2: usize) -> f64 {
        self.h(l) - self.h(l2)
    }

    /// `a_{l',l} = a_{l'} − a_l`.
    pub fn a_diff(&self, l2: usize, l: usize) -> f64 {
        self.a_eigenvalues[l2] - self.a_eigenvalues[l]
    }

    /// Maps a matrix given in the `A` eigenbasis to the computational basis.
    pub fn to_computational(&self, m: &CMatrix) -> CMatrix {
        &self.a_eigenvectors * m * self.a_eigenvectors.adjoint()
    }

    /// Maps a computational-basis matrix into the `A` eigenbasis.
    pub fn to_a_basis(&self, m: &CMatrix) -> CMatrix {
        self.a_eigenvectors.adjoint() * m * &self.a_eigenvectors
    }

    fn check_pair(&self, l: usize, l2: usize) -> Result<()> {
        let n = self.dim();
        if l >= n || l2 >= n {
            return Err(Error::validation(format!("index out of range for dimension {n}")));
        }
        if l == l2 {
            return Err(Error::validation("coherence factor needs l ≠ l'"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrectionMethod {
    /// Nested quadrature of the imaginary-time integral.
    ExactQuadrature,
    /// Kernel replaced by `u(1 − u/β)Q`; closed form in Dawson functions.
    HighTemperatureDawson,
    /// Leading two terms of the large-`λ²Qβ` expansion.
    UltrastrongSeries,
}

impl CorrectionMethod {
    pub const ALL: [CorrectionMethod; 3] =
        [Self::ExactQuadrature, Self::HighTemperatureDawson, Self::UltrastrongSeries];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenormalizationConvention {
    /// The Hamiltonian already contains `λ²QA²`; pseudo-energies are `h_l`.
    #[default]
    Renormalized,
    /// No counter-term; pseudo-energies become `h_l − λ²a_l²Q`.
    Natural,
}

/// Pseudo-energies under the given convention.
pub fn pseudo_energies(
    sys: &SystemSpec,
    bath: &BathParams,
    conv: RenormalizationConvention,
    q: f64,
) -> Vec<f64> {
    let shift = bath.lambda * bath.lambda * q;
    (0..sys.dim())
        .map(|l| match conv {
            RenormalizationConvention::Renormalized => sys.h(l),
            RenormalizationConvention::Natural => {
                let a = sys.a_eigenvalues[l];
                sys.h(l) - shift * a * a
            }
        })
        .collect()
}

/// `e^{−βe_l} / Σ e^{−βe_l}` computed with the smallest energy shifted to 0.
pub fn populations(
    sys: &SystemSpec,
    bath: &BathParams,
    conv: RenormalizationConvention,
    sd: &SpectralDensity,
) -> Result<Vec<f64>> {
    bath.validate()?;
    let e = pseudo_energies(sys, bath, conv, reorganization_energy(sd));
    let e0 = e.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = e.iter().map(|&x| (-bath.beta * (x - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

fn diagonal_state(sys: &SystemSpec, p: &[f64]) -> CMatrix {
    let d = CMatrix::from_fn(p.len(), p.len(), |i, j| if i == j { c(p[i]) } else { c(0.0) });
    sys.to_computational(&d)
}

/// The infinite-coupling state: diagonal in the `A` eigenbasis with
/// Boltzmann weights of the pseudo-energies.
pub fn zeroth_order_state(
    sys: &SystemSpec,
    bath: &BathParams,
    conv: RenormalizationConvention,
    sd: &SpectralDensity,
) -> Result<DensityMatrix> {
    let p = populations(sys, bath, conv, sd)?;
    DensityMatrix::new(hermitian_part(&diagonal_state(sys, &p)))
}

/// Frequency entering the coherence factor: `ω_{l,l'}`, or `ω̄_{l,l'}`
/// built from renormalized pseudo-energies.
fn effective_gap(
    sys: &SystemSpec,
    bath: &BathParams,
    conv: RenormalizationConvention,
    q: f64,
    l: usize,
    l2: usize,
) -> f64 {
    match conv {
        RenormalizationConvention::Renormalized => sys.gap(l, l2),
        RenormalizationConvention::Natural => {
            let s = bath.lambda * bath.lambda * q;
            let (al, al2) = (sys.a_eigenvalues[l], sys.a_eigenvalues[l2]);
            sys.gap(l, l2) - s * (al * al - al2 * al2)
        }
    }
}

fn exp_checked(x: f64) -> Result<f64> {
    if x > 709.0 {
        return Err(Error::Overflow { exponent: x });
    }
    Ok(x.exp())
}

/// Memo of `K(u)` keyed by the exact bit pattern of `u`.
struct KernelCache<'a> {
    sd: &'a SpectralDensity,
    beta: f64,
    settings: QuadratureSettings,
    values: RefCell<HashMap<u64, (f64, f64)>>,
}

impl<'a> KernelCache<'a> {
    fn new(sd: &'a SpectralDensity, beta: f64, outer: &QuadratureSettings) -> Self {
        let settings = QuadratureSettings {
            rel_tol: (outer.rel_tol * 1e-2).max(1e-14),
            abs_tol: outer.abs_tol * 1e-2,
            ..*outer
        };
        Self { sd, beta, settings, values: RefCell::new(HashMap::new()) }
    }

    fn get(&self, u: f64) -> Result<(f64, f64)> {
        if let Some(&v) = self.values.borrow().get(&u.to_bits()) {
            return Ok(v);
        }
        let r = overlap_kernel_with(self.sd, self.beta, u, &self.settings)?;
        let v = (r.value, r.error_estimate);
        self.values.borrow_mut().insert(u.to_bits(), v);
        Ok(v)
    }
}

/// `f_{l,l'}(β) = ∫_0^β e^{uω} e^{−λ²a²K(u)} du` by nested quadrature.
pub fn f_exact(
    sys: &SystemSpec,
    bath: &BathParams,
    sd: &SpectralDensity,
    conv: RenormalizationConvention,
    l: usize,
    l2: usize,
    q: &QuadratureSettings,
) -> Result<QuadratureResult<f64>> {
    bath.validate()?;
    let cache = KernelCache::new(sd, bath.beta, q);
    f_exact_cached(sys, bath, conv, l, l2, q, &cache)
}

#[allow(clippy::too_many_arguments)]
fn f_exact_cached(
    sys: &SystemSpec,
    bath: &BathParams,
    conv: RenormalizationConvention,
    l: usize,
    l2: usize,
    q: &QuadratureSettings,
    cache: &KernelCache,
) -> Result<QuadratureResult<f64>> {
    sys.check_pair(l, l2)?;
    let beta = bath.beta;
    let omega = effective_gap(sys, bath, conv, reorganization_energy(cache.sd), l, l2);
    exp_checked(beta * omega)?;
    let coupling = bath.lambda * bath.lambda * sys.a_diff(l2, l).powi(2);
    if coupling == 0.0 {
        let value = if omega == 0.0 { beta } else { (beta * omega).exp_m1() / omega };
        return Ok(QuadratureResult { value, error_estimate: 0.0, evaluations: 0 });
    }
    // Kernel failures cannot escape the closure; record the first one.
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let kernel_err = RefCell::new(0.0_f64);
    let integrand = |u: f64| match cache.get(u) {
        Ok((k, err)) => {
            let v = (u * omega - coupling * k).exp();
            let mut e = kernel_err.borrow_mut();
            *e = e.max(coupling * err * v);
            v
        }
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let r = integrate_finite(integrand, 0.0, beta, q);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let r = r?;
    Ok(QuadratureResult {
        value: r.value,
        error_estimate: r.error_estimate + beta * kernel_err.into_inner(),
        evaluations: r.evaluations,
    })
}

/// High-temperature closed form in Dawson functions.
pub fn f_high_t(
    sys: &SystemSpec,
    bath: &BathParams,
    sd: &SpectralDensity,
    conv: RenormalizationConvention,
    l: usize,
    l2: usize,
) -> Result<f64> {
    bath.validate()?;
    sys.check_pair(l, l2)?;
    if bath.lambda == 0.0 {
        return Err(Error::Unsupported(
            "the high-temperature form is singular at λ = 0; use the exact quadrature".into(),
        ));
    }
    let q = reorganization_energy(sd);
    let beta = bath.beta;
    let omega = effective_gap(sys, bath, conv, q, l, l2);
    let la = bath.lambda * sys.a_diff(l2, l).abs();
    let s = (beta / q).sqrt();
    let x = la * la * q;
    let arg = |w: f64| s / (2.0 * la) * (x + w);
    let pre = s / la;
    Ok(pre * (dawson(arg(-omega))? + exp_checked(beta * omega)? * dawson(arg(omega))?))
}

/// Two-term ultrastrong-coupling series.
pub fn f_series(
    sys: &SystemSpec,
    bath: &BathParams,
    sd: &SpectralDensity,
    conv: RenormalizationConvention,
    l: usize,
    l2: usize,
) -> Result<f64> {
    bath.validate()?;
    sys.check_pair(l, l2)?;
    let q = reorganization_energy(sd);
    let lq = bath.lambda * bath.lambda * q;
    if lq == 0.0 {
        return Err(Error::Unsupported("the ultrastrong series needs λ²Q > 0".into()));
    }
    let beta = bath.beta;
    let w = sys.gap(l, l2);
    match conv {
        RenormalizationConvention::Renormalized => {
            let x = lq * sys.a_diff(l2, l).powi(2);
            let e = exp_checked(w * beta)?;
            Ok((1.0 + e) / x + w * (1.0 - e) / (x * x))
        }
        RenormalizationConvention::Natural => {
            let (al, al2) = (sys.a_eigenvalues[l], sys.a_eigenvalues[l2]);
            if al == 0.0 || al2 == 0.0 {
                return Err(Error::Unsupported(
                    "the natural-convention series is singular when an eigenvalue of A is 0".into(),
                ));
            }
            let d = al - al2;
            let e = exp_checked(effective_gap(sys, bath, conv, q, l, l2) * beta)?;
            Ok((1.0 / al - e / al2) / (2.0 * lq * d)
                + w / (4.0 * lq * lq * d * d) * (1.0 / (al * al) - e / (al2 * al2)))
        }
    }
}

/// Thresholds for the regime flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegimeThresholds {
    /// Strong coupling when `λ²Q / max|h_l|` is at least this.
    pub strong_coupling: f64,
    /// Series trusted when `λ²Qβ` is at least this.
    pub series_validity: f64,
    /// High-temperature form trusted when `ω_cβ` is at most this.
    pub high_temperature: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self { strong_coupling: 1.0, series_validity: 3.0, high_temperature: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeFlags {
    pub lambda2_q_beta: f64,
    pub omega_c_beta: f64,
    /// `λ²Q / max|h_l|`; infinite when every `h_l` vanishes.
    pub coupling_ratio: f64,
    pub strong_coupling: bool,
    pub series_valid: bool,
    pub high_temperature: bool,
}

impl RegimeFlags {
    pub fn compute(
        sys: &SystemSpec,
        bath: &BathParams,
        sd: &SpectralDensity,
        th: &RegimeThresholds,
    ) -> Self {
        let lq = bath.lambda * bath.lambda * reorganization_energy(sd);
        let hmax = (0..sys.dim()).map(|l| sys.h(l).abs()).fold(0.0, f64::max);
        let coupling_ratio = if hmax > 0.0 { lq / hmax } else { f64::INFINITY };
        let omega_c_beta = characteristic_frequency(sd) * bath.beta;
        let lambda2_q_beta = lq * bath.beta;
        Self {
            lambda2_q_beta,
            omega_c_beta,
            coupling_ratio,
            strong_coupling: coupling_ratio >= th.strong_coupling,
            series_valid: lambda2_q_beta >= th.series_validity,
            high_temperature: omega_c_beta <= th.high_temperature,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub regime: RegimeFlags,
    /// Quadrature error estimates of `f_{l,l'}`; zero for closed forms.
    pub f_error_estimates: DMatrix<f64>,
    pub min_eigenvalue: f64,
    /// Set when the smallest eigenvalue is below [`PSD_WARNING`].
    pub psd_warning: bool,
}

#[derive(Debug, Clone)]
pub struct CorrectionResult {
    pub populations: Vec<f64>,
    /// `f_{l,l'}(β)`, zero on the diagonal.
    pub f_values: DMatrix<f64>,
    /// The state in the computational basis.
    pub state: DensityMatrix,
    /// The same state in the `A` eigenbasis.
    pub a_basis_state: CMatrix,
    pub method: CorrectionMethod,
    pub convention: RenormalizationConvention,
    pub diagnostics: Diagnostics,
}

/// Zeroth order plus first-order coherences.
pub fn steady_state(
    sys: &SystemSpec,
    bath: &BathParams,
    sd: &SpectralDensity,
    method: CorrectionMethod,
    conv: RenormalizationConvention,
    q: &QuadratureSettings,
) -> Result<CorrectionResult> {
    steady_state_with(sys, bath, sd, method, conv, q, &RegimeThresholds::default())
}

#[allow(clippy::too_many_arguments)]
pub fn steady_state_with(
    sys: &SystemSpec,
    bath: &BathParams,
    sd: &SpectralDensity,
    method: CorrectionMethod,
    conv: RenormalizationConvention,
    q: &QuadratureSettings,
    th: &RegimeThresholds,
) -> Result<CorrectionResult> {
    bath.validate()?;
    sd.validate()?;
    q.validate()?;
    let n = sys.dim();
    let p = populations(sys, bath, conv, sd)?;
    let mut f = DMatrix::<f64>::zeros(n, n);
    let mut ferr = DMatrix::<f64>::zeros(n, n);
    let cache = KernelCache::new(sd, bath.beta, q);
    for l in 0..n {
        for l2 in 0..n {
            if l == l2 {
                continue;
            }
            let (v, e) = match method {
                CorrectionMethod::ExactQuadrature => {
                    let r = f_exact_cached(sys, bath, conv, l, l2, q, &cache)?;
                    (r.value, r.error_estimate)
                }
                CorrectionMethod::HighTemperatureDawson => (f_high_t(sys, bath, sd, conv, l, l2)?, 0.0),
                CorrectionMethod::UltrastrongSeries => (f_series(sys, bath, sd, conv, l, l2)?, 0.0),
            };
            f[(l, l2)] = v;
            ferr[(l, l2)] = e;
        }
    }
    let mut rho = CMatrix::zeros(n, n);
    for l in 0..n {
        rho[(l, l)] = c(p[l]);
        for l2 in 0..n {
            if l != l2 {
                let h = sys.h_element(l, l2);
                rho[(l, l2)] = -h * (0.5 * (p[l] * f[(l, l2)] + p[l2] * f[(l2, l)]));
            }
        }
    }
    let state = DensityMatrix::new_perturbative(hermitian_part(&sys.to_computational(&rho)))?;
    let min_eigenvalue = state.min_eigenvalue();
    Ok(CorrectionResult {
        populations: p,
        f_values: f,
        state,
        a_basis_state: rho,
        method,
        convention: conv,
        diagnostics: Diagnostics {
            regime: RegimeFlags::compute(sys, bath, sd, th),
            f_error_estimates: ferr,
            min_eigenvalue,
            psd_warning: min_eigenvalue < PSD_WARNING,
        },
    })
}

/// Evaluates `f_{l,l'}` with the chosen method.
#[allow(clippy::too_many_arguments)]
pub fn coherence_factor(
    sys: &SystemSpec,
    bath: &BathParams,
    sd: &SpectralDensity,
    method: CorrectionMethod,
    conv: RenormalizationConvention,
    l: usize,
    l2: usize,
    q: &QuadratureSettings,
) -> Result<f64> {
    match method {
        CorrectionMethod::ExactQuadrature => Ok(f_exact(sys, bath, sd, conv, l, l2, q)?.value),
        CorrectionMethod::HighTemperatureDawson => f_high_t(sys, bath, sd, conv, l, l2),
        CorrectionMethod::UltrastrongSeries => f_series(sys, bath, sd, conv, l, l2),
    }
}
