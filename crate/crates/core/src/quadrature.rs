//! Adaptive Gauss-Kronrod quadrature on finite and semi-infinite intervals.
//!
//! Integrand closures must be side-effect free; results are deterministic for a
//! given integrand and settings.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
    /// Semi-infinite integrals stop where the decay envelope falls below
    /// `exp(-tail_cutoff_exponent)` times the integrand peak.
    pub tail_cutoff_exponent: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 2000,
            tail_cutoff_exponent: 40.0,
        }
    }
}

impl QuadratureSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::validation("quadrature tolerances must be positive"));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::validation("max_subdivisions must be at least 1"));
        }
        if !(self.tail_cutoff_exponent > 0.0) {
            return Err(Error::validation("tail_cutoff_exponent must be positive"));
        }
        Ok(())
    }

    /// Same settings with tolerances scaled by `factor` (< 1 tightens).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            max_subdivisions: self.max_subdivisions,
            tail_cutoff_exponent: self.tail_cutoff_exponent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult<T> {
    pub value: T,
    pub error_estimate: f64,
    pub evaluations: usize,
}

/// Values the quadrature can accumulate: `f64` and `C64`.
pub trait QuadValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn magnitude(&self) -> f64;
    fn is_finite_value(&self) -> bool;
}

impl QuadValue for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for C64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

fn gk21<T: QuadValue>(f: &impl Fn(f64) -> T, a: f64, b: f64) -> Result<Panel<T>> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = T::default();
    let mut res_abs = fc.magnitude() * WGK[10];
    let mut fv1 = [T::default(); 10];
    let mut fv2 = [T::default(); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k = res_k + (f1 + f2) * WGK[j];
        res_abs += WGK[j] * (f1.magnitude() + f2.magnitude());
        if j % 2 == 1 {
            res_g = res_g + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).magnitude();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).magnitude() + (fv2[j] - mean).magnitude());
    }
    let value = res_k * half;
    if !value.is_finite_value() {
        return Err(Error::Numerical(format!(
            "integrand produced a non-finite value on [{a}, {b}]"
        )));
    }
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).magnitude();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel { a, b, value, error: err })
}

struct ByError(f64, usize);

impl PartialEq for ByError {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for ByError {}
impl PartialOrd for ByError {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ByError {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then_with(|| other.1.cmp(&self.1))
    }
}

/// Globally adaptive bisection over the given ordered breakpoints.
fn adaptive<T: QuadValue>(
    f: &impl Fn(f64) -> T,
    points: &[f64],
    s: &QuadratureSettings,
) -> Result<QuadratureResult<T>> {
    s.validate()?;
    let mut panels: Vec<Panel<T>> = Vec::new();
    let mut heap = BinaryHeap::new();
    for w in points.windows(2) {
        if w[1] > w[0] {
            let p = gk21(f, w[0], w[1])?;
            heap.push(ByError(p.error, panels.len()));
            panels.push(p);
        }
    }
    let mut evaluations = 21 * panels.len();
    let total = |panels: &[Panel<T>]| {
        panels
            .iter()
            .fold((T::default(), 0.0), |(v, e), p| (v + p.value, e + p.error))
    };
    let mut subdivisions = 0;
    loop {
        let (value, error) = total(&panels);
        let target = s.abs_tol.max(s.rel_tol * value.magnitude());
        if error <= target {
            return Ok(QuadratureResult { value, error_estimate: error, evaluations });
        }
        let Some(ByError(_, worst)) = heap.pop() else {
            // Every panel hit the resolution floor.
            return Ok(QuadratureResult { value, error_estimate: error, evaluations });
        };
        if subdivisions >= s.max_subdivisions {
            let estimate = value.magnitude();
            return Err(Error::QuadratureFailed { estimate, error_estimate: error, subdivisions });
        }
        let Panel { a, b, .. } = panels[worst];
        let mid = 0.5 * (a + b);
        if (b - a) <= 1e3 * f64::EPSILON * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
            // Too narrow to split further; leave it out of the queue.
            continue;
        }
        let left = gk21(f, a, mid)?;
        let right = gk21(f, mid, b)?;
        evaluations += 42;
        subdivisions += 1;
        heap.push(ByError(left.error, worst));
        panels[worst] = left;
        heap.push(ByError(right.error, panels.len()));
        panels.push(right);
    }
}

/// Relative offsets from each endpoint that always start as panel boundaries.
const LAYER_OFFSETS: [f64; 4] = [1e-4, 1e-3, 1e-2, 1e-1];

fn finite_breakpoints(a: f64, b: f64, extra: &[f64]) -> Vec<f64> {
    let w = b - a;
    let mut pts = vec![a, b];
    for &o in &LAYER_OFFSETS {
        pts.push(a + o * w);
        pts.push(b - o * w);
    }
    pts.extend(extra.iter().copied().filter(|&x| x > a && x < b));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Integrates `f` over `[a, b]`. The initial panels include points at relative
/// offsets 1e-4..1e-1 from both ends so endpoint boundary layers are seen.
pub fn integrate_finite<T: QuadValue>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    s: &QuadratureSettings,
) -> Result<QuadratureResult<T>> {
    integrate_finite_with_points(f, a, b, &[], s)
}

pub fn integrate_finite_with_points<T: QuadValue>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    points: &[f64],
    s: &QuadratureSettings,
) -> Result<QuadratureResult<T>> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::validation(format!("invalid interval [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadratureResult { value: T::default(), error_estimate: 0.0, evaluations: 0 });
    }
    adaptive(&f, &finite_breakpoints(a, b, points), s)
}

/// Options for [`integrate_semi_infinite`].
#[derive(Debug, Clone, Default)]
pub struct SemiInfiniteOptions {
    /// `ω_ref` of the map `ω = a + ω_ref·t/(1−t)`; defaults to 1.
    pub scale: Option<f64>,
    /// Interior points (in the original variable) to start panels at.
    pub breakpoints: Vec<f64>,
}

/// Integrates `f` over `[a, ∞)`.
///
/// `decay_bound` must be a monotone envelope of `|f|` far out. The integral is
/// cut where the envelope drops below `exp(-tail_cutoff_exponent)` times the
/// sampled peak of `|f|`; the envelope's integral beyond the cut is added to the
/// error estimate.
pub fn integrate_semi_infinite<T: QuadValue>(
    f: impl Fn(f64) -> T,
    a: f64,
    decay_bound: impl Fn(f64) -> f64,
    opts: &SemiInfiniteOptions,
    s: &QuadratureSettings,
) -> Result<QuadratureResult<T>> {
    s.validate()?;
    if !a.is_finite() {
        return Err(Error::validation("semi-infinite integral needs a finite lower limit"));
    }
    let scale = opts.scale.unwrap_or(1.0);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::validation("semi-infinite map scale must be positive"));
    }

    let mut peak = 0.0_f64;
    for k in -40..=12 {
        let x = a + scale * 2f64.powi(k);
        peak = peak.max(f(x).magnitude());
    }
    for &x in opts.breakpoints.iter().filter(|&&x| x > a) {
        peak = peak.max(f(x).magnitude());
    }
    if peak == 0.0 {
        peak = f64::MIN_POSITIVE;
    }
    let threshold = (-s.tail_cutoff_exponent).exp() * peak;

    let mut cut = None;
    for k in 0..1000 {
        let x = a + scale * 2f64.powi(k);
        if !x.is_finite() {
            break;
        }
        let bound = decay_bound(x);
        if bound.is_finite() && bound < threshold {
            cut = Some(x);
            break;
        }
    }
    let Some(cut) = cut else {
        return Err(Error::Numerical(
            "decay envelope never reaches the tail cutoff (divergent or too slow decay)".into(),
        ));
    };

    let to_t = |x: f64| {
        let y = (x - a) / scale;
        y / (1.0 + y)
    };
    let t_cut = to_t(cut);
    let mapped = |t: f64| {
        let one_minus = 1.0 - t;
        let x = a + scale * t / one_minus;
        f(x) * (scale / (one_minus * one_minus))
    };
    let mut pts = vec![0.0, t_cut];
    pts.extend(
        opts.breakpoints
            .iter()
            .filter(|&&x| x > a && x < cut)
            .map(|&x| to_t(x)),
    );
    for k in -30..0 {
        let x = a + scale * 2f64.powi(k);
        if x < cut {
            pts.push(to_t(x));
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let body = adaptive(&mapped, &pts, s)?;

    let tail = tail_remainder(&decay_bound, cut, s)?;
    Ok(QuadratureResult {
        value: body.value,
        error_estimate: body.error_estimate + tail.value.abs(),
        evaluations: body.evaluations + tail.evaluations,
    })
}

fn tail_remainder(
    bound: &impl Fn(f64) -> f64,
    cut: f64,
    s: &QuadratureSettings,
) -> Result<QuadratureResult<f64>> {
    // ω = cut/(1−t) maps [0,1) onto [cut, ∞).
    let g = |t: f64| {
        let one_minus = 1.0 - t;
        let v = bound(cut / one_minus) * cut / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let loose = QuadratureSettings { rel_tol: 1e-3, abs_tol: f64::MIN_POSITIVE, ..*s };
    let pts: Vec<f64> = (0..=16).map(|k| 1.0 - 0.5f64.powi(k)).collect();
    match adaptive(&g, &pts, &loose) {
        Ok(r) => Ok(r),
        Err(Error::QuadratureFailed { estimate, error_estimate, .. }) => Ok(QuadratureResult {
            value: estimate + error_estimate,
            error_estimate,
            evaluations: 0,
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Composite 10-point Gauss on `n` equal panels; the reference rule.
    fn composite_gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            let c = a + (k as f64 + 0.5) * h;
            for j in 0..5 {
                let x = XGK[2 * j + 1] * 0.5 * h;
                acc += WG[j] * (f(c - x) + f(c + x)) * 0.5 * h;
            }
        }
        acc
    }

    #[test]
    fn weights_sum_to_two() {
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_integrand() {
        let r = integrate_finite(|_| 1.0, 0.0, 1.0, &Default::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        assert!(r.error_estimate >= 0.0);
    }

    #[test]
    fn exponential_integrand() {
        let r = integrate_finite(|u: f64| u.exp(), 0.0, 1.0, &Default::default()).unwrap();
        assert!((r.value - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn boundary_layer_matches_refined_composite_gauss() {
        let f = |u: f64| (-100.0 * u * (1.0 - u)).exp();
        let r = integrate_finite(f, 0.0, 1.0, &Default::default()).unwrap();
        let coarse = composite_gauss(f, 0.0, 1.0, 200);
        let fine = composite_gauss(f, 0.0, 1.0, 2000);
        assert!((coarse - fine).abs() < 1e-14, "reference not converged");
        assert!((r.value - fine).abs() < 1e-9, "{} vs {}", r.value, fine);
    }

    #[test]
    fn complex_integrand() {
        let r = integrate_finite(|x: f64| C64::new(0.0, x).exp(), 0.0, 1.0, &Default::default()).unwrap();
        let want = (C64::new(0.0, 1.0).exp() - 1.0) / C64::new(0.0, 1.0);
        assert!((r.value - want).norm() < 1e-14);
    }

    #[test]
    fn subdivision_limit_reports_estimate() {
        let s = QuadratureSettings { max_subdivisions: 1, rel_tol: 1e-14, ..Default::default() };
        let err = integrate_finite(|x: f64| (1.0 / (x + 1e-9)).sin(), 0.0, 1.0, &s).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailed { subdivisions: 1, .. }));
    }

    #[test]
    fn empty_and_reversed_intervals() {
        let r = integrate_finite(|x: f64| x, 2.0, 2.0, &Default::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(integrate_finite(|x: f64| x, 2.0, 1.0, &Default::default()).is_err());
    }

    #[test]
    fn settings_validation() {
        let bad = QuadratureSettings { rel_tol: 0.0, ..Default::default() };
        assert!(integrate_finite(|x: f64| x, 0.0, 1.0, &bad).is_err());
    }

    #[test]
    fn semi_infinite_exponential() {
        let r = integrate_semi_infinite(
            |w: f64| (-w).exp(),
            0.0,
            |w: f64| (-w).exp(),
            &SemiInfiniteOptions::default(),
            &Default::default(),
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn semi_infinite_lorentzian_normalization() {
        let wc = 0.25;
        let f = move |w: f64| 2.0 / std::f64::consts::PI * wc / (wc * wc + w * w);
        let r = integrate_semi_infinite(
            f,
            0.0,
            f,
            &SemiInfiniteOptions { scale: Some(wc), ..Default::default() },
            &Default::default(),
        )
        .unwrap();
        assert!((r.value - 1.0).abs() < 1e-8, "{}", r.value);
        assert!((r.value - 1.0).abs() <= r.error_estimate + 1e-12);
    }

    #[test]
    fn semi_infinite_damped_cosine() {
        let s = C64::new(0.2, -1.0);
        let want = (s * s).inv().re;
        let r = integrate_semi_infinite(
            |w: f64| w * (-w / 5.0).exp() * w.cos(),
            0.0,
            |w: f64| w * (-w / 5.0).exp(),
            &SemiInfiniteOptions { scale: Some(5.0), ..Default::default() },
            &Default::default(),
        )
        .unwrap();
        assert!((r.value - want).abs() < 1e-9, "{} vs {}", r.value, want);
    }

    #[test]
    fn semi_infinite_rejects_non_decaying_envelope() {
        let err = integrate_semi_infinite(
            |_w: f64| 1.0,
            0.0,
            |_w: f64| 1.0,
            &SemiInfiniteOptions::default(),
            &Default::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
    }

    proptest! {
        #[test]
        fn finite_integral_is_additive(c0 in -2.0..2.0f64, c1 in -2.0..2.0f64, c2 in 0.1..3.0f64, split in 0.05..0.95f64) {
            let f = move |x: f64| c0 * (c2 * x).sin() + c1 * (x * x).exp();
            let s = QuadratureSettings::default();
            let whole = integrate_finite(f, 0.0, 2.0, &s).unwrap();
            let left = integrate_finite(f, 0.0, 2.0 * split, &s).unwrap();
            let right = integrate_finite(f, 2.0 * split, 2.0, &s).unwrap();
            let slack = whole.error_estimate + left.error_estimate + right.error_estimate + 1e-13;
            prop_assert!((whole.value - left.value - right.value).abs() <= slack);
        }
    }
}
