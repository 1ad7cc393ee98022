//! Steady-state coherences predicted by the refined singular-coupling master
//! equation, used as an independent cross-check of the imaginary-time result.

use std::cell::RefCell;
use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{c, hermitian_part, max_abs, CMatrix, DensityMatrix, C64};
use crate::mfgs::{populations, pseudo_energies, RenormalizationConvention, SystemSpec};
use crate::quadrature::{integrate_finite_with_points, QuadratureSettings};
use crate::spectral::{g_double_integral_with, reorganization_energy, BathParams, SpectralDensity};

#[derive(Debug, Clone)]
pub struct MeDiagnostics {
    pub error_estimates: DMatrix<f64>,
    /// `max |ρ_{l,l'} − conj(ρ_{l',l})|` before symmetrization.
    pub hermiticity_residual: f64,
    pub g_evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct MeResult {
    /// Off-diagonal `ρ_{l,l'}` in the `A` eigenbasis; zero diagonal.
    pub coherences: CMatrix,
    /// Renormalized populations `e^{−β(h_l − λ²a_l²Q)}/Z`.
    pub populations: Vec<f64>,
    /// Largest τ at which any of the τ-integrals was cut.
    pub truncation_tau: f64,
    pub diagnostics: MeDiagnostics,
}

impl MeResult {
    /// Populations plus coherences, in the `A` eigenbasis.
    pub fn a_basis_state(&self) -> CMatrix {
        let mut m = self.coherences.clone();
        for (l, &p) in self.populations.iter().enumerate() {
            m[(l, l)] = c(p);
        }
        m
    }

    /// The full state in the computational basis (positivity not enforced).
    pub fn state(&self, sys: &SystemSpec) -> Result<DensityMatrix> {
        DensityMatrix::new_perturbative(hermitian_part(&sys.to_computational(&self.a_basis_state())))
    }
}

struct GCache<'a> {
    sd: &'a SpectralDensity,
    beta: f64,
    settings: QuadratureSettings,
    values: RefCell<HashMap<u64, C64>>,
}

impl GCache<'_> {
    fn get(&self, tau: f64) -> Result<C64> {
        if let Some(&v) = self.values.borrow().get(&tau.to_bits()) {
            return Ok(v);
        }
        let v = g_double_integral_with(self.sd, self.beta, tau, &self.settings)?.value;
        self.values.borrow_mut().insert(tau.to_bits(), v);
        Ok(v)
    }
}

/// Master-equation steady state for coupling `λAB`.
pub fn me_steady_state(
    sys: &SystemSpec,
    bath: &BathParams,
    sd: &SpectralDensity,
    q: &QuadratureSettings,
) -> Result<MeResult> {
    bath.validate()?;
    sd.validate()?;
    q.validate()?;
    if bath.lambda == 0.0 {
        return Err(Error::validation("the master-equation steady state needs λ > 0"));
    }
    if matches!(sd, SpectralDensity::DiscreteModes(_)) {
        return Err(Error::Unsupported(
            "Re G(τ) stays bounded for a discrete bath, so the τ-integrals do not converge".into(),
        ));
    }
    let n = sys.dim();
    let big_q = reorganization_energy(sd);
    let conv = RenormalizationConvention::Natural;
    let p = populations(sys, bath, conv, sd)?;
    let e = pseudo_energies(sys, bath, conv, big_q);
    let cache = GCache {
        sd,
        beta: bath.beta,
        settings: QuadratureSettings {
            rel_tol: (q.rel_tol * 1e-2).max(1e-14),
            abs_tol: q.abs_tol * 1e-2,
            ..*q
        },
        values: RefCell::new(HashMap::new()),
    };

    let mut rho = CMatrix::zeros(n, n);
    let mut err = DMatrix::<f64>::zeros(n, n);
    let mut truncation_tau: f64 = 0.0;
    for l in 0..n {
        for l2 in 0..n {
            let h = sys.h_element(l, l2);
            if l == l2 || h == c(0.0) {
                continue;
            }
            let coupling = bath.lambda * bath.lambda * sys.a_diff(l2, l).powi(2);
            let wbar = e[l] - e[l2];
            let tau_max = truncation_point(&cache, coupling, q.tail_cutoff_exponent)?;
            truncation_tau = truncation_tau.max(tau_max);
            let i = C64::new(0.0, 1.0);
            // i p_l e^{−c[G* − iτQ]} − i p_{l'} e^{−c[G + iτQ]}, times e^{−iω̄τ}.
            let failure: RefCell<Option<Error>> = RefCell::new(None);
            let integrand = |tau: f64| match cache.get(tau) {
                Ok(g) => {
                    let phase = (-i * wbar * tau).exp();
                    let first = (-(g.conj() - i * tau * big_q) * coupling).exp();
                    let second = (-(g + i * tau * big_q) * coupling).exp();
                    (i * p[l] * first - i * p[l2] * second) * phase
                }
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    c(0.0)
                }
            };
            let pts: Vec<f64> = (1..=6).map(|k| tau_max * 0.5f64.powi(k)).collect();
            let r = integrate_finite_with_points(integrand, 0.0, tau_max, &pts, q);
            if let Some(e) = failure.into_inner() {
                return Err(e);
            }
            let r = r?;
            // Beyond the cut |integrand| ≤ e^{−c Re G}; Re G grows at least
            // linearly there, so the remainder is below e^{−cutoff}·τ_max.
            let tail = (-q.tail_cutoff_exponent).exp() * tau_max;
            rho[(l, l2)] = h * r.value;
            err[(l, l2)] = h.norm() * (r.error_estimate + tail);
        }
    }
    let hermiticity_residual = max_abs(&(&rho - rho.adjoint()));
    let g_evaluations = cache.values.borrow().len();
    Ok(MeResult {
        coherences: rho,
        populations: p,
        truncation_tau,
        diagnostics: MeDiagnostics { error_estimates: err, hermiticity_residual, g_evaluations },
    })
}

/// Smallest doubling step with `coupling · Re G(τ) > cutoff`, refined by bisection.
fn truncation_point(cache: &GCache, coupling: f64, cutoff: f64) -> Result<f64> {
    let above = |tau: f64| -> Result<bool> { Ok(coupling * cache.get(tau)?.re > cutoff) };
    let mut lo = 0.0;
    let mut hi = 1e-3 * cache.beta;
    let mut steps = 0;
    while !above(hi)? {
        lo = hi;
        hi *= 2.0;
        steps += 1;
        if steps > 80 {
            return Err(Error::Numerical(
                "Re G(τ) does not grow enough to cut off the τ-integral".into(),
            ));
        }
    }
    for _ in 0..20 {
        let mid = 0.5 * (lo + hi);
        if above(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
