//! Bath spectral densities and the bath functions built from them: the
//! reorganization energy, the imaginary-time overlap kernel `K(u)`, the
//! real-time correlation `c_B(s)` and its double integral `G(τ)`.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::quadrature::{
    integrate_finite_with_points, integrate_semi_infinite, QuadratureResult,
    QuadratureSettings, SemiInfiniteOptions,
};

/// One bath mode with coupling `g` and frequency `omega`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub g: f64,
    pub omega: f64,
}

/// A tabulated density, linearly interpolated, with an implicit `J(0) = 0`
/// and `J = 0` beyond the last grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    omega: Vec<f64>,
    j: Vec<f64>,
    q: f64,
}

impl Tabulated {
    pub fn new(omega: Vec<f64>, j: Vec<f64>) -> Result<Self> {
        if omega.len() != j.len() || omega.is_empty() {
            return Err(Error::validation("tabulated density needs matching, non-empty columns"));
        }
        if omega.iter().chain(&j).any(|v| !v.is_finite()) {
            return Err(Error::validation("tabulated density contains non-finite values"));
        }
        if omega[0] <= 0.0 {
            return Err(Error::validation("tabulated frequencies must be positive"));
        }
        if omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("tabulated frequencies must be strictly increasing"));
        }
        if j.iter().any(|&v| v < 0.0) {
            return Err(Error::validation("tabulated J(ω) must be non-negative"));
        }
        let q = tabulated_q(&omega, &j);
        Ok(Self { omega, j, q })
    }

    /// Parses whitespace-separated `ω J(ω)` rows; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut omega = Vec::new();
        let mut j = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(Error::validation(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::validation(format!("line {}: bad number {s:?}", lineno + 1)))
            };
            omega.push(parse(fields[0])?);
            j.push(parse(fields[1])?);
        }
        Self::new(omega, j)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::Io(format!("{}: {e}", path.as_ref().display()))
        })?;
        Self::parse(&text)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn values(&self) -> &[f64] {
        &self.j
    }

    fn eval(&self, w: f64) -> f64 {
        let last = *self.omega.last().unwrap();
        if w > last {
            return 0.0;
        }
        let idx = self.omega.partition_point(|&x| x < w);
        let (w0, j0, w1, j1) = if idx == 0 {
            (0.0, 0.0, self.omega[0], self.j[0])
        } else {
            (self.omega[idx - 1], self.j[idx - 1], self.omega[idx], self.j[idx])
        };
        if w1 == w {
            return j1;
        }
        j0 + (j1 - j0) * (w - w0) / (w1 - w0)
    }

    fn support_end(&self) -> f64 {
        *self.omega.last().unwrap()
    }
}

// ∫ J/ω of the piecewise-linear interpolant, exactly.
fn tabulated_q(omega: &[f64], j: &[f64]) -> f64 {
    let mut q = j[0];
    for k in 1..omega.len() {
        let (a, b) = (omega[k - 1], omega[k]);
        let slope = (j[k] - j[k - 1]) / (b - a);
        let intercept = j[k - 1] - slope * a;
        q += intercept * (b / a).ln() + slope * (b - a);
    }
    q
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDensity {
    /// `J(ω) = (2Q/π) ω_c ω / (ω_c² + ω²)`.
    LorentzDrude { q: f64, omega_c: f64 },
    /// `J(ω) = η ω` below `ω_c`, zero above.
    OhmicHardCutoff { eta: f64, omega_c: f64 },
    /// `J(ω) = Σ g_k² δ(ω − ω_k)`.
    DiscreteModes(Vec<Mode>),
    Tabulated(Tabulated),
}

impl SpectralDensity {
    pub fn lorentz_drude(q: f64, omega_c: f64) -> Result<Self> {
        let sd = Self::LorentzDrude { q, omega_c };
        sd.validate()?;
        Ok(sd)
    }

    pub fn ohmic(eta: f64, omega_c: f64) -> Result<Self> {
        let sd = Self::OhmicHardCutoff { eta, omega_c };
        sd.validate()?;
        Ok(sd)
    }

    pub fn discrete(modes: Vec<Mode>) -> Result<Self> {
        let sd = Self::DiscreteModes(modes);
        sd.validate()?;
        Ok(sd)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(format!("{what} must be positive and finite, got {v}")))
            }
        };
        match self {
            Self::LorentzDrude { q, omega_c } => {
                positive(*q, "Q")?;
                positive(*omega_c, "ω_c")
            }
            Self::OhmicHardCutoff { eta, omega_c } => {
                positive(*eta, "η")?;
                positive(*omega_c, "ω_c")
            }
            Self::DiscreteModes(modes) => {
                if modes.is_empty() {
                    return Err(Error::validation("discrete density needs at least one mode"));
                }
                for m in modes {
                    positive(m.omega, "mode frequency")?;
                    if !m.g.is_finite() {
                        return Err(Error::validation("mode coupling must be finite"));
                    }
                }
                Ok(())
            }
            Self::Tabulated(_) => Ok(()),
        }
    }

    /// Same family with the reorganization energy rescaled to `q`.
    pub fn with_reorganization_energy(&self, q: f64) -> Result<Self> {
        let current = reorganization_energy(self);
        let r = q / current;
        let sd = match self {
            Self::LorentzDrude { omega_c, .. } => Self::LorentzDrude { q, omega_c: *omega_c },
            Self::OhmicHardCutoff { eta, omega_c } => {
                Self::OhmicHardCutoff { eta: eta * r, omega_c: *omega_c }
            }
            Self::DiscreteModes(m) => Self::DiscreteModes(
                m.iter().map(|m| Mode { g: m.g * r.sqrt(), omega: m.omega }).collect(),
            ),
            Self::Tabulated(t) => Self::Tabulated(Tabulated::new(
                t.omega.clone(),
                t.j.iter().map(|v| v * r).collect(),
            )?),
        };
        sd.validate()?;
        Ok(sd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathParams {
    pub beta: f64,
    pub lambda: f64,
}

impl BathParams {
    pub fn new(beta: f64, lambda: f64) -> Result<Self> {
        let b = Self { beta, lambda };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::validation(format!("β must be positive, got {}", self.beta)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::validation(format!("λ must be non-negative, got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Pointwise `J(ω)`. Discrete densities have no pointwise value.
pub fn j_of_omega(sd: &SpectralDensity, omega: f64) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::validation(format!("J(ω) needs ω ≥ 0, got {omega}")));
    }
    match sd {
        SpectralDensity::DiscreteModes(_) => Err(Error::Unsupported(
            "a discrete-mode density has no pointwise J(ω); use the mode sums".into(),
        )),
        _ => Ok(j_continuous(sd, omega)),
    }
}

fn j_continuous(sd: &SpectralDensity, w: f64) -> f64 {
    match sd {
        SpectralDensity::LorentzDrude { q, omega_c } => {
            2.0 * q / PI * omega_c * w / (omega_c * omega_c + w * w)
        }
        SpectralDensity::OhmicHardCutoff { eta, omega_c } => {
            if w < *omega_c {
                eta * w
            } else {
                0.0
            }
        }
        SpectralDensity::Tabulated(t) => t.eval(w),
        SpectralDensity::DiscreteModes(_) => unreachable!("discrete densities use mode sums"),
    }
}

/// `Q = ∫ J(ω)/ω dω`, in closed form for every variant.
pub fn reorganization_energy(sd: &SpectralDensity) -> f64 {
    match sd {
        SpectralDensity::LorentzDrude { q, .. } => *q,
        SpectralDensity::OhmicHardCutoff { eta, omega_c } => eta * omega_c,
        SpectralDensity::DiscreteModes(m) => m.iter().map(|m| m.g * m.g / m.omega).sum(),
        SpectralDensity::Tabulated(t) => t.q,
    }
}

/// The frequency scale compared against `1/β` in the high-temperature
/// diagnostic: `ω_c` for the cutoff families, the largest mode frequency for
/// discrete baths, and the support edge of a table.
pub fn characteristic_frequency(sd: &SpectralDensity) -> f64 {
    match sd {
        SpectralDensity::LorentzDrude { omega_c, .. }
        | SpectralDensity::OhmicHardCutoff { omega_c, .. } => *omega_c,
        SpectralDensity::DiscreteModes(m) => m.iter().map(|m| m.omega).fold(0.0, f64::max),
        SpectralDensity::Tabulated(t) => t.support_end(),
    }
}

/// `[cosh(ωβ/2) − cosh(ω(u−β/2))] / (ω² sinh(ωβ/2))`, the ω-weight of the
/// kernel. Symmetric under `u → β − u`.
pub fn kernel_weight(omega: f64, beta: f64, u: f64) -> f64 {
    if omega * beta < 1e-8 {
        let uu = u * (beta - u);
        return uu / (beta * omega) * (1.0 - omega * omega * uu / 12.0);
    }
    // (1 − e^{−ωm})(1 − e^{−ωM}) / (1 − e^{−ωβ}) with m, M the smaller and larger
    // of u and β − u; each factor is computed without cancellation.
    let (m, big) = if u <= beta - u { (u, beta - u) } else { (beta - u, u) };
    let num = (-(-omega * m).exp_m1()) * (-(-omega * big).exp_m1());
    num / (-(-omega * beta).exp_m1()) / (omega * omega)
}

fn check_u(beta: f64, u: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::validation(format!("β must be positive, got {beta}")));
    }
    if !(0.0..=beta).contains(&u) {
        return Err(Error::validation(format!("u = {u} outside [0, β = {beta}]")));
    }
    Ok(())
}

/// Overlap kernel `K(u) = ∫ J(ω)/ω² (e^{uω}−1)(1 − (1−e^{−uω})/(1−e^{−ωβ})) dω`.
pub fn overlap_kernel(sd: &SpectralDensity, beta: f64, u: f64) -> Result<f64> {
    Ok(overlap_kernel_with(sd, beta, u, &QuadratureSettings::default())?.value)
}

pub fn overlap_kernel_with(
    sd: &SpectralDensity,
    beta: f64,
    u: f64,
    q: &QuadratureSettings,
) -> Result<QuadratureResult<f64>> {
    check_u(beta, u)?;
    sd.validate()?;
    if u == 0.0 || u == beta {
        return Ok(QuadratureResult { value: 0.0, error_estimate: 0.0, evaluations: 0 });
    }
    let mut pts = vec![1.0 / beta, 1.0 / u, 1.0 / (beta - u)];
    let f = |w: f64| j_continuous(sd, w) * kernel_weight(w, beta, u);
    match sd {
        SpectralDensity::DiscreteModes(m) => {
            let value = m.iter().map(|m| m.g * m.g * kernel_weight(m.omega, beta, u)).sum();
            Ok(QuadratureResult { value, error_estimate: 0.0, evaluations: m.len() })
        }
        SpectralDensity::LorentzDrude { q: big_q, omega_c } => {
            pts.push(*omega_c);
            let (big_q, omega_c) = (*big_q, *omega_c);
            // k(ω) ≤ 1, so J/ω² bounds the integrand.
            let bound = move |w: f64| 2.0 * big_q / PI * omega_c / (w * (omega_c * omega_c + w * w));
            let opts = SemiInfiniteOptions { scale: Some(omega_c), breakpoints: pts };
            integrate_semi_infinite(f, 0.0, bound, &opts, q)
        }
        SpectralDensity::OhmicHardCutoff { omega_c, .. } => {
            integrate_finite_with_points(f, 0.0, *omega_c, &pts, q)
        }
        SpectralDensity::Tabulated(t) => {
            pts.extend_from_slice(&t.omega);
            integrate_finite_with_points(f, 0.0, t.support_end(), &pts, q)
        }
    }
}

fn coth(x: f64) -> f64 {
    1.0 / x.tanh()
}

// Terms kept explicitly in the Matsubara sums; the neglected remainder is
// O((ω_cβ)² / N²) relative.
const MATSUBARA_TERMS: usize = 4000;

fn matsubara_resonance(beta: f64, omega_c: f64) -> Result<()> {
    let k = beta * omega_c / (2.0 * PI);
    if k >= 0.5 && (k - k.round()).abs() < 1e-8 {
        return Err(Error::Unsupported(format!(
            "βω_c = {} hits a Matsubara frequency; perturb β or ω_c",
            beta * omega_c
        )));
    }
    Ok(())
}

/// `L(x) = −ln(1 − e^{−x})`.
fn log_term(x: f64) -> f64 {
    -(-(-x).exp_m1()).ln()
}

/// Bath correlation `c_B(s) = ∫ J(ω)[coth(βω/2) cos ωs − i sin ωs] dω`.
///
/// For Lorentz-Drude `Re c_B(0)` diverges logarithmically and `s = 0` is
/// rejected; `s > 0` uses the Matsubara expansion.
pub fn bath_correlation(sd: &SpectralDensity, beta: f64, s: f64) -> Result<C64> {
    bath_correlation_with(sd, beta, s, &QuadratureSettings::default())
}

pub fn bath_correlation_with(
    sd: &SpectralDensity,
    beta: f64,
    s: f64,
    q: &QuadratureSettings,
) -> Result<C64> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::validation(format!("c_B(s) needs s ≥ 0, got {s}")));
    }
    BathParams::new(beta, 0.0)?;
    sd.validate()?;
    match sd {
        SpectralDensity::DiscreteModes(m) => Ok(m
            .iter()
            .map(|m| {
                let (sn, cs) = (m.omega * s).sin_cos();
                C64::new(coth(0.5 * beta * m.omega) * cs, -sn) * (m.g * m.g)
            })
            .sum()),
        SpectralDensity::LorentzDrude { q: big_q, omega_c } => {
            if s == 0.0 {
                return Err(Error::Numerical(
                    "Re c_B(0) diverges for a Lorentz-Drude density".into(),
                ));
            }
            let (big_q, wc) = (*big_q, *omega_c);
            matsubara_resonance(beta, wc)?;
            let c0 = C64::new(1.0 / (0.5 * beta * wc).tan(), -1.0) * (big_q * wc);
            let amp = 4.0 * big_q * wc / beta;
            let kappa = 2.0 * PI / beta;
            let mut rest = 0.0;
            for k in 1..=MATSUBARA_TERMS {
                let nu = kappa * k as f64;
                let e = (-nu * s).exp();
                if e == 0.0 {
                    break;
                }
                rest += wc * wc / (nu * (nu * nu - wc * wc)) * e;
            }
            Ok(c0 * (-wc * s).exp() + amp * (log_term(kappa * s) / kappa + rest))
        }
        _ => {
            let f = |w: f64| {
                let (sn, cs) = (w * s).sin_cos();
                let jw = j_continuous(sd, w);
                // J coth(βω/2) → 2J/(βω) stays finite at ω → 0.
                C64::new(jw * coth(0.5 * beta * w) * cs, -jw * sn)
            };
            let (end, pts) = finite_support(sd);
            Ok(integrate_finite_with_points(f, 0.0, end, &pts, q)?.value)
        }
    }
}

fn finite_support(sd: &SpectralDensity) -> (f64, Vec<f64>) {
    match sd {
        SpectralDensity::OhmicHardCutoff { omega_c, .. } => (*omega_c, vec![]),
        SpectralDensity::Tabulated(t) => (t.support_end(), t.omega.clone()),
        _ => unreachable!("only finite-support densities"),
    }
}

/// `(e^{−x} + x − 1) / x²`.
fn phi(x: f64) -> f64 {
    if x < 0.1 {
        // Σ (−x)^n / (n+2)!
        let mut term = 0.5;
        let mut sum = 0.5;
        for n in 1..14 {
            term *= -x / (n + 2) as f64;
            sum += term;
        }
        sum
    } else {
        ((-x).exp_m1() + x) / (x * x)
    }
}

fn one_minus_cos(x: f64) -> f64 {
    let h = (0.5 * x).sin();
    2.0 * h * h
}

fn sin_minus_x(x: f64) -> f64 {
    if x.abs() < 0.25 {
        // −x³/3! + x⁵/5! − …
        let x2 = x * x;
        let mut term = -x * x2 / 6.0;
        let mut sum = term;
        for n in 2..8 {
            term *= -x2 / ((2 * n) * (2 * n + 1)) as f64;
            sum += term;
        }
        sum
    } else {
        x.sin() - x
    }
}

/// `G(τ) = ∫_0^τ (τ−s) c_B(s) ds`.
pub fn g_double_integral(sd: &SpectralDensity, beta: f64, tau: f64) -> Result<C64> {
    Ok(g_double_integral_with(sd, beta, tau, &QuadratureSettings::default())?.value)
}

pub fn g_double_integral_with(
    sd: &SpectralDensity,
    beta: f64,
    tau: f64,
    q: &QuadratureSettings,
) -> Result<QuadratureResult<C64>> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::validation(format!("G(τ) needs τ ≥ 0, got {tau}")));
    }
    BathParams::new(beta, 0.0)?;
    sd.validate()?;
    let exact = |value: C64| QuadratureResult { value, error_estimate: 0.0, evaluations: 0 };
    if tau == 0.0 {
        return Ok(exact(C64::new(0.0, 0.0)));
    }
    match sd {
        SpectralDensity::DiscreteModes(m) => Ok(exact(
            m.iter()
                .map(|m| {
                    let x = m.omega * tau;
                    let re = coth(0.5 * beta * m.omega) * one_minus_cos(x);
                    C64::new(re, sin_minus_x(x)) * (m.g * m.g / (m.omega * m.omega))
                })
                .sum(),
        )),
        SpectralDensity::LorentzDrude { q: big_q, omega_c } => {
            lorentz_drude_g(*big_q, *omega_c, beta, tau, q)
        }
        _ => {
            let f = |w: f64| {
                let x = w * tau;
                let jw = j_continuous(sd, w) / (w * w);
                C64::new(jw * coth(0.5 * beta * w) * one_minus_cos(x), jw * sin_minus_x(x))
            };
            let (end, pts) = finite_support(sd);
            integrate_finite_with_points(f, 0.0, end, &pts, q)
        }
    }
}

// Termwise (τ−s)-integral of the Matsubara expansion
//   c(s) = c₀e^{−ω_c s} + A[L(κs)/κ + Σ_k r_k e^{−ν_k s}],
// using ∫_0^τ (τ−s)e^{−γs} ds = τ²φ(γτ). The log-singular L term is split at
// κs = 1 and its −ln(κs) part integrated analytically.
fn lorentz_drude_g(
    big_q: f64,
    wc: f64,
    beta: f64,
    tau: f64,
    q: &QuadratureSettings,
) -> Result<QuadratureResult<C64>> {
    matsubara_resonance(beta, wc)?;
    let c0 = C64::new(1.0 / (0.5 * beta * wc).tan(), -1.0) * (big_q * wc);
    let amp = 4.0 * big_q * wc / beta;
    let kappa = 2.0 * PI / beta;
    let t2 = tau * tau;

    let mut rest = 0.0;
    for k in 1..=MATSUBARA_TERMS {
        let nu = kappa * k as f64;
        rest += wc * wc / (nu * (nu * nu - wc * wc)) * t2 * phi(nu * tau);
    }

    // ∫_0^m (τ−s)(−ln κs) ds, then the smooth remainder on [0, m] and the
    // plain L term on [m, τ].
    let m = tau.min(1.0 / kappa);
    let lm = (kappa * m).ln();
    let log_part = -(tau * (m * lm - m) - (0.5 * m * m * lm - 0.25 * m * m));
    let smooth = |s: f64| {
        let x = kappa * s;
        // L(x) + ln x = −ln((1 − e^{−x})/x)
        -(tau - s) * (-(-x).exp_m1() / x).ln()
    };
    let near = integrate_finite_with_points(smooth, 0.0, m, &[], q)?;
    let far_end = tau.min(45.0 / kappa);
    let far = if far_end > m {
        integrate_finite_with_points(|s: f64| (tau - s) * log_term(kappa * s), m, far_end, &[], q)?
    } else {
        QuadratureResult { value: 0.0, error_estimate: 0.0, evaluations: 0 }
    };
    let l_total = log_part + near.value + far.value;

    let value = c0 * (t2 * phi(wc * tau)) + amp * (l_total / kappa + rest);
    Ok(QuadratureResult {
        value,
        error_estimate: amp / kappa * (near.error_estimate + far.error_estimate),
        evaluations: near.evaluations + far.evaluations + MATSUBARA_TERMS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ld(q: f64, wc: f64) -> SpectralDensity {
        SpectralDensity::lorentz_drude(q, wc).unwrap()
    }

    fn tight() -> QuadratureSettings {
        QuadratureSettings { rel_tol: 1e-12, abs_tol: 1e-16, max_subdivisions: 20000, ..Default::default() }
    }

    #[test]
    fn j_values() {
        let v = j_of_omega(&ld(1.0, 0.25), 0.25).unwrap();
        assert!((v - 1.0 / PI).abs() < 1e-15);
        assert_eq!(j_of_omega(&SpectralDensity::ohmic(2.0, 1.0).unwrap(), 2.0).unwrap(), 0.0);
        let tab = SpectralDensity::Tabulated(Tabulated::new(vec![1.0, 2.0], vec![1.0, 3.0]).unwrap());
        for sd in [ld(1.0, 0.25), SpectralDensity::ohmic(2.0, 1.0).unwrap(), tab] {
            assert_eq!(j_of_omega(&sd, 0.0).unwrap(), 0.0);
            assert!(j_of_omega(&sd, -1.0).is_err());
        }
        let d = SpectralDensity::discrete(vec![Mode { g: 0.3, omega: 1.5 }]).unwrap();
        assert!(matches!(j_of_omega(&d, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn invalid_densities() {
        assert!(SpectralDensity::lorentz_drude(0.0, 1.0).is_err());
        assert!(SpectralDensity::ohmic(1.0, -1.0).is_err());
        assert!(SpectralDensity::discrete(vec![Mode { g: 1.0, omega: 0.0 }]).is_err());
        assert!(BathParams::new(0.0, 1.0).is_err());
        assert!(BathParams::new(1.0, -1.0).is_err());
    }

    #[test]
    fn reorganization_energies() {
        assert_eq!(reorganization_energy(&ld(5.0, 0.25)), 5.0);
        assert!((reorganization_energy(&SpectralDensity::ohmic(2.0, 0.5).unwrap()) - 1.0).abs() < 1e-15);
        let d = SpectralDensity::discrete(vec![Mode { g: 0.3, omega: 1.5 }]).unwrap();
        assert!((reorganization_energy(&d) - 0.06).abs() < 1e-15);
    }

    #[test]
    fn reorganization_energy_matches_quadrature() {
        for sd in [ld(1.0, 0.25), ld(3.0, 2.0)] {
            let f = |w: f64| j_continuous(&sd, w) / w;
            let r = integrate_semi_infinite(
                f,
                0.0,
                f,
                &SemiInfiniteOptions { scale: Some(characteristic_frequency(&sd)), ..Default::default() },
                &tight(),
            )
            .unwrap();
            let q = reorganization_energy(&sd);
            assert!((r.value - q).abs() < 1e-8 * q);
        }
        let sd = SpectralDensity::ohmic(2.0, 0.5).unwrap();
        let r = crate::quadrature::integrate_finite(|w: f64| j_continuous(&sd, w) / w, 0.0, 0.5, &tight())
            .unwrap();
        assert!((r.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn tabulated_parsing_and_interpolation() {
        let t = Tabulated::parse("# omega J\n0.5 1.0\n1.0 2.0 # peak\n\n2.0 0.0\n").unwrap();
        assert_eq!(t.omega(), &[0.5, 1.0, 2.0]);
        assert!((t.eval(0.25) - 0.5).abs() < 1e-15);
        assert!((t.eval(0.75) - 1.5).abs() < 1e-15);
        assert_eq!(t.eval(3.0), 0.0);
        assert!(Tabulated::parse("1 2 3").is_err());
        assert!(Tabulated::parse("2 1\n1 1").is_err());
        assert!(Tabulated::parse("1 -1").is_err());
        assert!(Tabulated::parse("").is_err());
    }

    #[test]
    fn tabulated_q_matches_fine_trapezoid() {
        let t = Tabulated::parse("0.5 1.0\n1.0 2.0\n2.0 0.5\n").unwrap();
        let n = 200_000;
        let h = 2.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let a = i as f64 * h;
            let fa = if a == 0.0 { 2.0 } else { t.eval(a) / a };
            let fb = t.eval(a + h) / (a + h);
            acc += 0.5 * h * (fa + fb);
        }
        assert!((acc - t.q).abs() < 1e-8, "{acc} vs {}", t.q);
    }

    #[test]
    fn tabulated_lorentz_drude_approaches_closed_form() {
        let sd = ld(1.0, 0.25);
        let omega: Vec<f64> = (1..=20000).map(|i| i as f64 * 0.005).collect();
        let j: Vec<f64> = omega.iter().map(|&w| j_continuous(&sd, w)).collect();
        let tab = SpectralDensity::Tabulated(Tabulated::new(omega, j).unwrap());
        let truncated = 2.0 / PI * (100.0f64 / 0.25).atan();
        assert!((reorganization_energy(&tab) - truncated).abs() < 1e-4 * truncated);
        let k_tab = overlap_kernel(&tab, 1.0, 0.5).unwrap();
        let k_ld = overlap_kernel(&sd, 1.0, 0.5).unwrap();
        assert!((k_tab - k_ld).abs() < 1e-3 * k_ld);
    }

    #[test]
    fn kernel_vanishes_at_ends() {
        let sd = ld(1.0, 0.25);
        assert_eq!(overlap_kernel(&sd, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(overlap_kernel(&sd, 1.0, 1.0).unwrap(), 0.0);
        assert!(overlap_kernel(&sd, 1.0, 1.5).is_err());
        assert!(overlap_kernel(&sd, 1.0, -0.1).is_err());
    }

    /// The kernel weight in its original exponential form; multiplied out
    /// for ωβ > 1 where the literal form overflows or cancels.
    fn weight_original(w: f64, beta: f64, u: f64) -> f64 {
        if w * beta <= 1.0 {
            ((u * w).exp() - 1.0) * (1.0 - (1.0 - (-u * w).exp()) / (1.0 - (-w * beta).exp())) / (w * w)
        } else {
            let num = 1.0 - (-u * w).exp() - ((u - beta) * w).exp() + (-beta * w).exp();
            num / (1.0 - (-beta * w).exp()) / (w * w)
        }
    }

    #[test]
    fn kernel_weight_matches_original_form() {
        for &w in &[1e-3, 0.1, 0.7, 3.0, 20.0] {
            for &u in &[0.05, 0.3, 0.5, 0.9] {
                let a = kernel_weight(w, 1.0, u);
                let b = weight_original(w, 1.0, u);
                assert!((a - b).abs() < 1e-10 * b.abs(), "w={w} u={u}: {a} vs {b}");
            }
        }
        // Both sides of the small-ωβ switch.
        for w in [0.99e-8, 1.01e-8, 1e-6] {
            let a = kernel_weight(w, 1.0, 0.3);
            let b = weight_original(w, 1.0, 0.3);
            assert!((a - b).abs() < 1e-8 * a, "w={w}: {a} vs {b}");
        }
    }

    #[test]
    fn kernel_weight_keeps_relative_precision_near_the_ends() {
        // Leading behaviour u(β−u)/β·(1 − ...) for tiny ω and u; the weight must
        // stay smooth to near machine precision.
        let (w, beta) = (2e-4, 1.0);
        for u in [1e-9, 1e-7, 1e-5] {
            let v = kernel_weight(w, beta, u);
            let uu = u * (beta - u);
            let leading = uu / (beta * w) * (1.0 - w * w * uu / 12.0);
            assert!((v / leading - 1.0).abs() < 1e-13, "u={u}: {v} vs {leading}");
        }
    }

    #[test]
    fn kernel_weight_survives_large_frequencies() {
        let v = kernel_weight(1e6, 1.0, 0.5);
        assert!(v.is_finite() && (v - 1e-12).abs() < 1e-20);
    }

    #[test]
    fn single_mode_kernel() {
        let (g, w0, beta) = (0.4, 1.3, 1.7);
        let sd = SpectralDensity::discrete(vec![Mode { g, omega: w0 }]).unwrap();
        for &u in &[0.2, 0.85, 1.5] {
            let k = overlap_kernel(&sd, beta, u).unwrap();
            let want = g * g * weight_original(w0, beta, u);
            assert!((k - want).abs() < 1e-13);
        }
    }

    #[test]
    fn lorentz_drude_kernel_high_temperature() {
        let k = overlap_kernel(&ld(1.0, 0.1), 1.0, 0.5).unwrap();
        assert!((k - 0.25).abs() < 0.02 * 0.25, "{k}");
    }

    #[test]
    fn kernel_is_nonnegative_and_symmetric() {
        for sd in [ld(1.0, 0.25), ld(2.0, 3.0), SpectralDensity::ohmic(1.0, 2.0).unwrap()] {
            let beta = 1.3;
            for i in 0..=20 {
                let u = beta * i as f64 / 20.0;
                let k = overlap_kernel(&sd, beta, u).unwrap();
                let kr = overlap_kernel(&sd, beta, beta - u).unwrap();
                assert!(k >= 0.0);
                assert!((k - kr).abs() <= 1e-9 * k.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn kernel_high_temperature_limit() {
        for &(wc, beta) in &[(0.1, 1.0), (0.05, 2.0), (0.2, 0.5)] {
            let q = 1.7;
            let sd = ld(q, wc);
            for i in 1..20 {
                let u = beta * i as f64 / 20.0;
                let k = overlap_kernel(&sd, beta, u).unwrap();
                let approx = u * (1.0 - u / beta) * q;
                assert!((k - approx).abs() <= 0.05 * approx, "wc={wc} u={u}");
            }
        }
    }

    #[test]
    fn kernel_against_brute_force_quadrature() {
        // Plain trapezoid on a log grid of the original form.
        let (q, wc, beta, u) = (1.0, 0.25, 1.0, 0.3);
        let sd = ld(q, wc);
        let n = 400_000;
        let (lo, hi) = ((1e-8f64).ln(), (1e7f64).ln());
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let w = (lo + i as f64 * h).exp();
            let v = j_continuous(&sd, w) * weight_original(w, beta, u) * w;
            acc += if i == 0 || i == n { 0.5 * v } else { v };
        }
        acc *= h;
        let k = overlap_kernel(&sd, beta, u).unwrap();
        assert!((k - acc).abs() < 1e-7 * k, "{k} vs {acc}");
    }

    #[test]
    fn correlation_single_mode_and_zero_time() {
        let (g, w0, beta) = (0.5, 0.8, 2.0);
        let sd = SpectralDensity::discrete(vec![Mode { g, omega: w0 }]).unwrap();
        let s = 1.3;
        let c = bath_correlation(&sd, beta, s).unwrap();
        let want = C64::new(coth(beta * w0 / 2.0) * (w0 * s).cos(), -(w0 * s).sin()) * (g * g);
        assert!((c - want).norm() < 1e-15);
        assert_eq!(bath_correlation(&sd, beta, 0.0).unwrap().im, 0.0);
        assert!(bath_correlation(&sd, beta, -1.0).is_err());
    }

    #[test]
    fn lorentz_drude_zero_time_correlation_diverges() {
        assert!(matches!(bath_correlation(&ld(1.0, 0.25), 1.0, 0.0), Err(Error::Numerical(_))));
    }

    #[test]
    fn ohmic_zero_time_correlation_matches_quadrature() {
        let sd = SpectralDensity::ohmic(0.7, 2.0).unwrap();
        let beta = 1.5;
        let c = bath_correlation(&sd, beta, 0.0).unwrap();
        assert_eq!(c.im, 0.0);
        // Independent: composite Simpson on J coth, with the ω→0 limit 2η/β.
        let n = 200_000;
        let h = 2.0 / n as f64;
        let f = |w: f64| if w == 0.0 { 2.0 * 0.7 / beta } else { 0.7 * w / (beta * w / 2.0).tanh() };
        let mut acc = f(0.0) + f(2.0);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        acc *= h / 3.0;
        assert!((c.re - acc).abs() < 1e-8 * acc);
    }

    #[test]
    fn lorentz_drude_correlation_is_second_derivative_of_g() {
        let sd = ld(1.3, 0.4);
        let beta = 0.9;
        for &t in &[0.05, 0.4, 2.0] {
            let h = 1e-3;
            let g = |x: f64| g_double_integral_with(&sd, beta, x, &tight()).unwrap().value;
            let d2 = (g(t + h) - 2.0 * g(t) + g(t - h)) / (h * h);
            let c = bath_correlation(&sd, beta, t).unwrap();
            assert!((d2 - c).norm() < 1e-5 * c.norm(), "t={t}: {d2} vs {c}");
        }
    }

    #[test]
    fn g_vanishes_at_zero() {
        for sd in [ld(1.0, 0.25), SpectralDensity::ohmic(1.0, 1.0).unwrap()] {
            assert_eq!(g_double_integral(&sd, 1.0, 0.0).unwrap(), C64::new(0.0, 0.0));
        }
        assert!(g_double_integral(&ld(1.0, 0.25), 1.0, -1.0).is_err());
    }

    #[test]
    fn g_imaginary_slope_is_minus_q() {
        for sd in [ld(2.0, 0.25), SpectralDensity::ohmic(1.5, 2.0).unwrap()] {
            let q = reorganization_energy(&sd);
            let (t1, t2) = (200.0, 220.0);
            let g1 = g_double_integral(&sd, 1.0, t1).unwrap();
            let g2 = g_double_integral(&sd, 1.0, t2).unwrap();
            let slope = (g2.im - g1.im) / (t2 - t1);
            assert!((slope + q).abs() < 1e-3 * q, "{slope}");
        }
    }

    #[test]
    fn g_single_mode_matches_direct_integral() {
        let (g, w0, beta, tau) = (0.6, 1.1, 1.4, 2.3);
        let sd = SpectralDensity::discrete(vec![Mode { g, omega: w0 }]).unwrap();
        let direct = crate::quadrature::integrate_finite(
            |s: f64| bath_correlation(&sd, beta, s).unwrap() * (tau - s),
            0.0,
            tau,
            &tight(),
        )
        .unwrap()
        .value;
        let got = g_double_integral(&sd, beta, tau).unwrap();
        assert!((got - direct).norm() < 1e-12);
    }

    #[test]
    fn lorentz_drude_g_matches_frequency_representation() {
        let sd = ld(1.0, 0.25);
        let beta = 1.0;
        for &tau in &[0.01, 0.3, 1.7] {
            let f = |w: f64| {
                let x = w * tau;
                let jw = j_continuous(&sd, w) / (w * w);
                C64::new(jw * coth(0.5 * beta * w) * one_minus_cos(x), jw * sin_minus_x(x))
            };
            let bound = |w: f64| j_continuous(&sd, w) / (w * w) * (2.0 * coth(0.5 * beta * w) + w * tau);
            let s = QuadratureSettings { rel_tol: 1e-10, max_subdivisions: 200_000, ..Default::default() };
            let want = integrate_semi_infinite(
                f,
                0.0,
                bound,
                &SemiInfiniteOptions { scale: Some(1.0 / tau), breakpoints: vec![0.25, 1.0] },
                &s,
            )
            .unwrap();
            let got = g_double_integral(&sd, beta, tau).unwrap();
            let err = (got - want.value).norm();
            assert!(err < 1e-8 * got.norm() + want.error_estimate, "τ={tau}: {got} vs {}", want.value);
        }
    }

    #[test]
    fn g_real_part_is_nondecreasing() {
        for sd in [ld(1.0, 0.25), ld(1.0, 3.0), SpectralDensity::ohmic(1.0, 1.0).unwrap()] {
            let mut prev = 0.0;
            for i in 1..=200 {
                let tau = i as f64 * 0.1;
                let g = g_double_integral(&sd, 1.0, tau).unwrap();
                assert!(g.re >= prev - 1e-12, "τ={tau}");
                prev = g.re;
            }
        }
    }

    #[test]
    fn resonant_matsubara_rejected() {
        let sd = ld(1.0, 2.0 * PI);
        assert!(matches!(g_double_integral(&sd, 1.0, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn rescaling_reorganization_energy() {
        for sd in [
            ld(1.0, 0.25),
            SpectralDensity::ohmic(2.0, 0.5).unwrap(),
            SpectralDensity::discrete(vec![Mode { g: 0.3, omega: 1.5 }, Mode { g: 0.2, omega: 0.5 }]).unwrap(),
        ] {
            let r = sd.with_reorganization_energy(4.2).unwrap();
            assert!((reorganization_energy(&r) - 4.2).abs() < 1e-12);
        }
    }
}
