//! Self-checks behind `mfgs verify`.

use std::fmt;

use mfgs_core::linalg::{CMatrix, HermitianMatrix, C64};
use mfgs_core::mfgs::{coherence_factor, populations, CorrectionMethod, RenormalizationConvention, SystemSpec};
use mfgs_core::oracle::{verify_trace_identity, BathDiscretization, DiscretizationSource};
use mfgs_core::quadrature::{integrate_finite, QuadratureSettings};
use mfgs_core::special::dawson;
use mfgs_core::spectral::{BathParams, Mode, SpectralDensity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    TraceIdentity,
    Hermiticity,
    Dawson,
}

impl CheckKind {
    pub const ALL: [CheckKind; 3] = [CheckKind::TraceIdentity, CheckKind::Hermiticity, CheckKind::Dawson];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::TraceIdentity => "trace-identity",
            CheckKind::Hermiticity => "hermiticity",
            CheckKind::Dawson => "dawson",
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceIdentityConfig {
    pub omega: f64,
    pub g: f64,
    pub beta: f64,
    pub fock_cutoff: usize,
    pub a_l: f64,
    pub a_l2: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
    /// `u` runs over `β·k/(u_points+1)`, `k = 1..=u_points`.
    pub u_points: usize,
    pub tolerance: f64,
}

impl Default for TraceIdentityConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            g: 0.4,
            beta: 1.0,
            fock_cutoff: 60,
            a_l: 1.0,
            a_l2: -1.0,
            lambda_min: 0.5,
            lambda_max: 2.5,
            lambda_points: 5,
            u_points: 5,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HermiticityConfig {
    pub systems: usize,
    pub min_levels: usize,
    pub max_levels: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for HermiticityConfig {
    fn default() -> Self {
        Self { systems: 20, min_levels: 2, max_levels: 4, seed: 20_241, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DawsonConfig {
    pub points: Vec<f64>,
    pub tolerance: f64,
    pub bound_from: f64,
    pub bound_to: f64,
    pub bound_step: f64,
}

impl Default for DawsonConfig {
    fn default() -> Self {
        Self {
            points: vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0],
            tolerance: 1e-12,
            bound_from: 3.0,
            bound_to: 50.0,
            bound_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub checks: Vec<CheckKind>,
    pub trace_identity: TraceIdentityConfig,
    pub hermiticity: HermiticityConfig,
    pub dawson: DawsonConfig,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            checks: CheckKind::ALL.to_vec(),
            trace_identity: TraceIdentityConfig::default(),
            hermiticity: HermiticityConfig::default(),
            dawson: DawsonConfig::default(),
        }
    }
}

/// Deliberate defects for testing that the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Flips the sign of the overlap kernel on the right-hand side.
    KernelSign,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl CheckReport {
    fn new(kind: CheckKind, tolerance: f64) -> Self {
        Self { name: kind.name().into(), passed: true, max_error: 0.0, tolerance, cases: 0, failures: Vec::new() }
    }

    fn record(&mut self, error: f64, bound: f64, what: impl FnOnce() -> String) {
        self.cases += 1;
        if error.is_nan() {
            self.max_error = f64::NAN;
        } else if !self.max_error.is_nan() {
            self.max_error = self.max_error.max(error);
        }
        if !(error <= bound) {
            self.passed = false;
            self.failures.push(what());
        }
    }

    fn fail(&mut self, what: String) {
        self.cases += 1;
        self.passed = false;
        self.failures.push(what);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<CheckReport>,
}

impl VerifyReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|k| if k + 1 == n { b } else { a + (b - a) * k as f64 / (n - 1) as f64 }).collect(),
    }
}

pub fn check_trace_identity(cfg: &TraceIdentityConfig, mutation: Mutation) -> CheckReport {
    let mut r = CheckReport::new(CheckKind::TraceIdentity, cfg.tolerance);
    let bd = BathDiscretization {
        modes: vec![Mode { g: cfg.g, omega: cfg.omega }],
        fock_cutoff: cfg.fock_cutoff,
        source: DiscretizationSource::Explicit,
    };
    for lambda in linspace(cfg.lambda_min, cfg.lambda_max, cfg.lambda_points) {
        for k in 1..=cfg.u_points {
            let u = cfg.beta * k as f64 / (cfg.u_points + 1) as f64;
            match verify_trace_identity(&bd, cfg.a_l, cfg.a_l2, lambda, cfg.beta, u) {
                Ok(c) => {
                    let rhs = match mutation {
                        Mutation::None => c.rhs,
                        Mutation::KernelSign => c.z_b * c.z_b / c.rhs,
                    };
                    let err = (c.lhs / rhs - 1.0).abs();
                    r.record(err, cfg.tolerance, || format!("λ={lambda} u={u}: lhs={:e} rhs={rhs:e} rel={err:e}", c.lhs));
                    if c.truncation_flag {
                        r.fail(format!("λ={lambda} u={u}: Fock truncation not converged"));
                    }
                }
                Err(e) => r.fail(format!("λ={lambda} u={u}: {e}")),
            }
        }
    }
    r
}

/// A random Hermitian `H_S` and diagonal `A` with well separated, nonzero eigenvalues.
pub fn random_system(rng: &mut ChaCha8Rng, n: usize) -> SystemSpec {
    loop {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(rng.random_range(-1.0..1.0), 0.0);
            for j in i + 1..n {
                let v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(i, j)] = v;
                m[(j, i)] = v.conj();
            }
        }
        let mut a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        a.sort_by(f64::total_cmp);
        if a.windows(2).any(|w| w[1] - w[0] < 0.2) || a.iter().any(|x| x.abs() < 0.1) {
            continue;
        }
        let h = HermitianMatrix::new(m).expect("hermitian by construction");
        let a = HermitianMatrix::from_real_diagonal(&a).expect("real diagonal");
        if let Ok(sys) = SystemSpec::new(h, a) {
            return sys;
        }
    }
}

pub fn check_hermiticity(cfg: &HermiticityConfig) -> CheckReport {
    let mut r = CheckReport::new(CheckKind::Hermiticity, cfg.tolerance);
    if cfg.min_levels < 2 || cfg.max_levels < cfg.min_levels {
        r.fail(format!("invalid level range {}..={}", cfg.min_levels, cfg.max_levels));
        return r;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let q = QuadratureSettings::default();
    for s in 0..cfg.systems {
        let n = rng.random_range(cfg.min_levels..=cfg.max_levels);
        let sys = random_system(&mut rng, n);
        let lq = rng.random_range(2.0..15.0);
        let beta = rng.random_range(0.3..2.0);
        let wc = rng.random_range(0.05..1.0);
        let (bath, sd) = match (BathParams::new(beta, 1.0), SpectralDensity::lorentz_drude(lq, wc)) {
            (Ok(b), Ok(sd)) => (b, sd),
            (Err(e), _) | (_, Err(e)) => {
                r.fail(format!("system {s}: {e}"));
                continue;
            }
        };
        for conv in [RenormalizationConvention::Renormalized, RenormalizationConvention::Natural] {
            let p = match populations(&sys, &bath, conv, &sd) {
                Ok(p) => p,
                Err(e) => {
                    r.fail(format!("system {s}: {e}"));
                    continue;
                }
            };
            for m in CorrectionMethod::ALL {
                for l in 0..n {
                    for l2 in 0..l {
                        let pair = coherence_factor(&sys, &bath, &sd, m, conv, l, l2, &q)
                            .and_then(|a| coherence_factor(&sys, &bath, &sd, m, conv, l2, l, &q).map(|b| (a, b)));
                        match pair {
                            Ok((f12, f21)) => {
                                let (x, y) = (p[l] * f12, p[l2] * f21);
                                let scale = x.abs().max(y.abs());
                                let err = if scale > 0.0 { (x - y).abs() / scale } else { 0.0 };
                                r.record(err, cfg.tolerance, || {
                                    format!("system {s} ({n} levels) {m:?} {conv:?} ({l},{l2}): {x:e} vs {y:e}")
                                });
                            }
                            Err(e) => r.fail(format!("system {s} {m:?} {conv:?} ({l},{l2}): {e}")),
                        }
                    }
                }
            }
        }
    }
    r
}

/// `F(x)` as a plain integral of `exp((u−x)(u+x))` over `[0, x]`.
pub fn dawson_by_quadrature(x: f64) -> mfgs_core::Result<f64> {
    let s = QuadratureSettings { rel_tol: 1e-13, abs_tol: 1e-15, ..Default::default() };
    Ok(integrate_finite(|u| ((u - x) * (u + x)).exp(), 0.0, x, &s)?.value)
}

pub fn check_dawson(cfg: &DawsonConfig) -> CheckReport {
    let mut r = CheckReport::new(CheckKind::Dawson, cfg.tolerance);
    for &x in &cfg.points {
        match (dawson(x), dawson_by_quadrature(x)) {
            (Ok(d), Ok(q)) => {
                let err = (d - q).abs();
                r.record(err, cfg.tolerance, || format!("x={x}: {d:e} vs quadrature {q:e}"));
            }
            (Err(e), _) | (_, Err(e)) => r.fail(format!("x={x}: {e}")),
        }
    }
    if cfg.bound_step > 0.0 && cfg.bound_to >= cfg.bound_from {
        let steps = ((cfg.bound_to - cfg.bound_from) / cfg.bound_step + 1e-9).floor() as usize;
        for k in 0..=steps {
            let x = cfg.bound_from + k as f64 * cfg.bound_step;
            match dawson(x) {
                // Recorded as the amount by which the bound is exceeded.
                Ok(d) => {
                    let excess = ((d - 0.5 / x).abs() - 0.5 / (x * x * x)).max(0.0);
                    r.record(excess, 0.0, || format!("x={x}: |F − 1/(2x)| exceeds 1/(2x³)"));
                }
                Err(e) => r.fail(format!("x={x}: {e}")),
            }
        }
    } else {
        r.fail("invalid asymptotic grid".into());
    }
    r
}

pub fn run_verify(cfg: &VerifyConfig, mutation: Mutation) -> CliResult<VerifyReport> {
    let mut seen = Vec::new();
    for c in &cfg.checks {
        if seen.contains(c) {
            return Err(CliError::Validation(format!("check {c} listed twice")));
        }
        seen.push(*c);
    }
    let checks: Vec<CheckReport> = cfg
        .checks
        .iter()
        .map(|c| match c {
            CheckKind::TraceIdentity => check_trace_identity(&cfg.trace_identity, mutation),
            CheckKind::Hermiticity => check_hermiticity(&cfg.hermiticity),
            CheckKind::Dawson => check_dawson(&cfg.dawson),
        })
        .collect();
    Ok(VerifyReport { passed: checks.iter().all(|c| c.passed), checks })
}
