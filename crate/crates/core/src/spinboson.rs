//! The spin-boson model: `H_S = (ε/2)σ_z + (Δ/2)σ_x`, `A = σ_z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, HermitianMatrix, C64};
use crate::mfgs::SystemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinBosonParams {
    pub epsilon: f64,
    pub delta: f64,
}

impl SpinBosonParams {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        let p = Self { epsilon, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || !self.delta.is_finite() {
            return Err(Error::validation("spin-boson parameters must be finite"));
        }
        if self.delta == 0.0 {
            return Err(Error::validation("Δ = 0 makes H_S commute with σ_z"));
        }
        Ok(())
    }

    /// `ω_S = √(ε² + Δ²)`.
    pub fn omega_s(&self) -> f64 {
        self.epsilon.hypot(self.delta)
    }

    /// `|e⟩` and `|g⟩` in the `(|+⟩, |−⟩)` basis, phases as
    /// `|e⟩ ∝ (ω_S+ε)|+⟩ + Δ|−⟩`, `|g⟩ ∝ −Δ|+⟩ + (ω_S+ε)|−⟩`.
    pub fn eigenstates(&self) -> ([f64; 2], [f64; 2]) {
        let w = self.omega_s();
        let s = w + self.epsilon;
        let n = (2.0 * w * s).sqrt();
        ([s / n, self.delta / n], [-self.delta / n, s / n])
    }
}

/// Spin-boson [`SystemSpec`]; the computational basis is `(|+⟩, |−⟩)`.
pub fn build_system(p: &SpinBosonParams) -> Result<SystemSpec> {
    p.validate()?;
    let (e, d) = (0.5 * p.epsilon, 0.5 * p.delta);
    let h = HermitianMatrix::from_real(2, 2, &[e, d, d, -e])?;
    SystemSpec::new(h, HermitianMatrix::pauli_z())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinObservables {
    /// `⟨+|ρ|−⟩`.
    pub c_ss: C64,
    /// `⟨e|ρ|g⟩`.
    pub c_eg: C64,
    pub p_plus: f64,
    pub p_minus: f64,
    pub p_e: f64,
    pub p_g: f64,
}

pub fn observables(state: &DensityMatrix, p: &SpinBosonParams) -> Result<SpinObservables> {
    if state.dim() != 2 {
        return Err(Error::validation(format!(
            "spin observables need a 2-dimensional state, got {}",
            state.dim()
        )));
    }
    p.validate()?;
    let rho = state.matrix();
    let (e, g) = p.eigenstates();
    let sandwich = |x: [f64; 2], y: [f64; 2]| {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                acc += rho[(i, j)] * (x[i] * y[j]);
            }
        }
        acc
    };
    Ok(SpinObservables {
        c_ss: rho[(0, 1)],
        c_eg: sandwich(e, g),
        p_plus: rho[(0, 0)].re,
        p_minus: rho[(1, 1)].re,
        p_e: sandwich(e, e).re,
        p_g: sandwich(g, g).re,
    })
}
