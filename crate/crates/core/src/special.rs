//! Special functions.

use crate::error::{Error, Result};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

// Sampling step and term count for Rybicki's method; the sampling error is of
// order exp(-(π/2h)²) ≈ 7e-18.
const RYBICKI_H: f64 = 0.25;
const RYBICKI_TERMS: usize = 16;

/// Dawson's integral `F(x) = exp(-x²) ∫_0^x exp(u²) du`.
///
/// Absolute error below 1e-15 for all finite `x`. Exactly odd.
pub fn dawson(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::validation(format!("dawson: non-finite argument {x}")));
    }
    let ax = x.abs();
    let v = if ax < 1.0 {
        series(ax)
    } else if ax <= 6.0 {
        rybicki(ax)
    } else {
        asymptotic(ax)
    };
    Ok(if x < 0.0 { -v } else { v })
}

fn series(x: f64) -> f64 {
    // Σ (-2x²)^n x / (2n+1)!!
    let x2 = -2.0 * x * x;
    let mut term = x;
    let mut sum = x;
    for n in 1..60 {
        term *= x2 / (2 * n + 1) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn rybicki(x: f64) -> f64 {
    let n0 = 2.0 * (0.5 * x / RYBICKI_H).round();
    let xp = x - n0 * RYBICKI_H;
    let mut e1 = (2.0 * xp * RYBICKI_H).exp();
    let e2 = e1 * e1;
    let mut d1 = n0 + 1.0;
    let mut d2 = d1 - 2.0;
    let mut sum = 0.0;
    for i in 0..RYBICKI_TERMS {
        let t = (2 * i + 1) as f64 * RYBICKI_H;
        let c = (-t * t).exp();
        sum += c * (e1 / d1 + 1.0 / (d2 * e1));
        d1 += 2.0;
        d2 -= 2.0;
        e1 *= e2;
    }
    FRAC_1_SQRT_PI * (-xp * xp).exp() * sum
}

fn asymptotic(x: f64) -> f64 {
    // 1/(2x) Σ (2k-1)!!/(2x²)^k, summed until the terms stop mattering.
    let r = 1.0 / (2.0 * x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let next = term * (2 * k - 1) as f64 * r;
        if next >= term || next < 1e-17 * sum {
            break;
        }
        term = next;
        sum += term;
    }
    sum / (2.0 * x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero() {
        assert_eq!(dawson(0.0).unwrap(), 0.0);
    }

    #[test]
    fn known_values() {
        assert!((dawson(1.0).unwrap() - 0.538079506912768).abs() < 1e-14);
        // Reference values from scipy.special.dawsn.
        assert!((dawson(0.5).unwrap() - 0.424_436_383_502_022_4).abs() < 1e-14);
        assert!((dawson(2.0).unwrap() - 0.301_340_388_923_792_0).abs() < 1e-14);
    }

    #[test]
    fn regime_boundaries_are_continuous() {
        for b in [1.0f64, 6.0] {
            let lo = dawson(b - 1e-12).unwrap();
            let hi = dawson(b + 1e-12).unwrap();
            // F'(x) = 1 - 2xF(x)
            let slope = 1.0 - 2.0 * b * dawson(b).unwrap();
            let jump = hi - lo - 2e-12 * slope;
            assert!(jump.abs() < 2e-15, "jump at {b}: {lo} vs {hi}");
        }
    }

    #[test]
    fn large_argument() {
        let v = dawson(10.0).unwrap();
        assert!((v - 0.05).abs() <= 1.05 / 4000.0);
    }

    #[test]
    fn odd_symmetry() {
        for i in 0..500 {
            let x = i as f64 * 0.037;
            assert_eq!(dawson(-x).unwrap(), -dawson(x).unwrap());
        }
    }

    #[test]
    fn single_maximum() {
        let grid = |a: f64, b: f64| {
            let n = ((b - a) / 0.01).round() as usize;
            (0..=n).map(move |i| a + i as f64 * 0.01)
        };
        let up: Vec<f64> = grid(0.0, 0.92).map(|x| dawson(x).unwrap()).collect();
        assert!(up.windows(2).all(|w| w[1] > w[0]));
        let down: Vec<f64> = grid(0.93, 10.0).map(|x| dawson(x).unwrap()).collect();
        assert!(down.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn asymptotic_bound() {
        for i in 30..=500 {
            let x = i as f64 * 0.1;
            let d = (dawson(x).unwrap() - 0.5 / x).abs();
            assert!(d <= 0.5 / (x * x * x), "x={x}");
        }
    }

    #[test]
    fn rejects_non_finite() {
        assert!(dawson(f64::NAN).is_err());
        assert!(dawson(f64::INFINITY).is_err());
    }
}
