//! Evaluation of spin-boson coherences over a one-parameter grid.

use mfgs_core::comparator::me_steady_state;
use mfgs_core::linalg::{DensityMatrix, C64};
use mfgs_core::mfgs::{steady_state, zeroth_order_state, CorrectionMethod, RegimeFlags, RegimeThresholds};
use mfgs_core::oracle::{discretize, exact_mean_force_state_with, OracleOptions};
use mfgs_core::quadrature::QuadratureSettings;
use mfgs_core::spectral::{BathParams, SpectralDensity, Tabulated};
use mfgs_core::spinboson::{build_system, observables, SpinBosonParams};
use rayon::prelude::*;

use crate::config::{Method, SpectralFamily, SweepSpec, SweptParam};
use crate::error::{CliError, CliResult};

/// Total dimension above which oracle cells are reported as NA.
pub const ORACLE_MAX_DIM: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointValues {
    pub c_ss: C64,
    pub c_eg: C64,
    pub p_plus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellStatus {
    Ok(PointValues),
    /// Not computable by design (e.g. oracle over the dimension cap).
    Unavailable(String),
    Failed(String),
}

impl CellStatus {
    pub fn values(&self) -> Option<&PointValues> {
        match self {
            CellStatus::Ok(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    pub flags: RegimeFlags,
    pub cells: Vec<CellStatus>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub spec: SweepSpec,
    pub rows: Vec<SweepRow>,
}

impl SweepOutput {
    pub fn failures(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|r| &r.cells)
            .filter(|c| matches!(c, CellStatus::Failed(_)))
            .count()
    }

    /// Values of one method along the grid.
    pub fn series(&self, m: Method) -> Option<Vec<(f64, Option<PointValues>)>> {
        let k = self.spec.methods.iter().position(|&x| x == m)?;
        Some(self.rows.iter().map(|r| (r.x, r.cells[k].values().copied())).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut header = vec![self.spec.swept.column().to_string()];
        for m in &self.spec.methods {
            let p = m.column();
            for col in [
                "c_ss_re",
                "c_ss_im",
                "c_eg_re",
                "c_eg_im",
                "p_plus",
                "strong_coupling",
                "series_valid",
                "high_temperature",
                "status",
            ] {
                header.push(format!("{p}_{col}"));
            }
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for r in &self.rows {
            let mut cells = vec![num(r.x)];
            for c in &r.cells {
                match c.values() {
                    Some(v) => cells.extend([num(v.c_ss.re), num(v.c_ss.im), num(v.c_eg.re), num(v.c_eg.im), num(v.p_plus)]),
                    None => cells.extend(std::iter::repeat_n("NA".to_string(), 5)),
                }
                cells.extend([r.flags.strong_coupling, r.flags.series_valid, r.flags.high_temperature].map(|b| b.to_string()));
                cells.push(match c {
                    CellStatus::Ok(_) => "ok".to_string(),
                    CellStatus::Unavailable(m) => format!("NA: {}", sanitize(m)),
                    CellStatus::Failed(m) => format!("failed: {}", sanitize(m)),
                });
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "NA".to_string()
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if matches!(c, ',' | '"' | '\n' | '\r') { ';' } else { c }).collect()
}

/// Parameters of one sweep point.
#[derive(Debug, Clone, Copy)]
pub struct PointParams {
    pub delta: f64,
    pub beta: f64,
    pub omega_c: f64,
    pub lambda2q: f64,
}

impl PointParams {
    pub fn at(spec: &SweepSpec, x: f64) -> Self {
        let mut p = Self { delta: spec.delta, beta: spec.beta, omega_c: spec.omega_c, lambda2q: spec.lambda2q };
        match spec.swept {
            SweptParam::Lambda2q => p.lambda2q = x,
            SweptParam::Beta => p.beta = x,
            SweptParam::OmegaC => p.omega_c = x,
        }
        p
    }
}

/// Spectral density family with any tabulated data already loaded.
#[derive(Debug, Clone)]
pub enum DensityTemplate {
    LorentzDrude,
    Ohmic,
    Tabulated(SpectralDensity),
}

impl DensityTemplate {
    pub fn load(f: &SpectralFamily) -> CliResult<Self> {
        Ok(match f {
            SpectralFamily::LorentzDrude => Self::LorentzDrude,
            SpectralFamily::Ohmic => Self::Ohmic,
            SpectralFamily::Tabulated(p) => Self::Tabulated(SpectralDensity::Tabulated(Tabulated::from_file(p)?)),
        })
    }

    /// Density with reorganization energy `λ²Q` (λ = 1).
    pub fn build(&self, lambda2q: f64, omega_c: f64) -> mfgs_core::Result<SpectralDensity> {
        match self {
            Self::LorentzDrude => SpectralDensity::lorentz_drude(lambda2q, omega_c),
            // Q = ηω_c for the hard-cutoff ohmic density.
            Self::Ohmic => SpectralDensity::ohmic(lambda2q / omega_c, omega_c),
            Self::Tabulated(sd) => sd.with_reorganization_energy(lambda2q),
        }
    }

    /// Upper end of the discretized band for the oracle.
    fn omega_max(&self, sd: &SpectralDensity) -> f64 {
        match self {
            Self::LorentzDrude => 6.0 * mfgs_core::spectral::characteristic_frequency(sd),
            _ => mfgs_core::spectral::characteristic_frequency(sd),
        }
    }
}

fn core_method(m: Method) -> Option<CorrectionMethod> {
    match m {
        Method::Exact => Some(CorrectionMethod::ExactQuadrature),
        Method::HighT => Some(CorrectionMethod::HighTemperatureDawson),
        Method::Series => Some(CorrectionMethod::UltrastrongSeries),
        _ => None,
    }
}

/// One grid point, every requested method.
pub fn evaluate_point(spec: &SweepSpec, template: &DensityTemplate, x: f64) -> CliResult<SweepRow> {
    let p = PointParams::at(spec, x);
    let sp = SpinBosonParams::new(1.0, p.delta)?;
    let sys = build_system(&sp)?;
    let sd = template.build(p.lambda2q, p.omega_c)?;
    let bath = BathParams::new(p.beta, 1.0)?;
    let q = QuadratureSettings { rel_tol: spec.rel_tol, ..Default::default() };
    let flags = RegimeFlags::compute(&sys, &bath, &sd, &RegimeThresholds::default());
    let conv = spec.convention;

    let state_for = |m: Method| -> mfgs_core::Result<DensityMatrix> {
        if let Some(cm) = core_method(m) {
            return Ok(steady_state(&sys, &bath, &sd, cm, conv, &q)?.state);
        }
        match m {
            Method::Zeroth => zeroth_order_state(&sys, &bath, conv, &sd),
            Method::Me => me_steady_state(&sys, &bath, &sd, &q)?.state(&sys),
            Method::Oracle => {
                let bd = discretize(&sd, spec.oracle_modes, template.omega_max(&sd))?.with_cutoff(spec.fock_cutoff);
                let lambda = (p.lambda2q / bd.reorganization_energy()).sqrt();
                let ob = BathParams::new(p.beta, lambda)?;
                let opts = OracleOptions { max_dim: ORACLE_MAX_DIM, ..Default::default() };
                Ok(exact_mean_force_state_with(&sys, &bd, &ob, conv, &opts)?.state)
            }
            _ => unreachable!("closed-form methods handled above"),
        }
    };
    let cells = spec
        .methods
        .iter()
        .map(|&m| match state_for(m).and_then(|s| observables(&s, &sp)) {
            Ok(o) => CellStatus::Ok(PointValues { c_ss: o.c_ss, c_eg: o.c_eg, p_plus: o.p_plus }),
            Err(e @ mfgs_core::Error::DimensionCap { .. }) => CellStatus::Unavailable(e.to_string()),
            Err(e) => CellStatus::Failed(e.to_string()),
        })
        .collect();
    Ok(SweepRow { x, flags, cells })
}

/// Evaluates the grid on up to `jobs` threads; rows come back in grid order.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> CliResult<SweepOutput> {
    spec.validate()?;
    let template = DensityTemplate::load(&spec.spectral)?;
    let grid = spec.grid();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        grid.par_iter().map(|&x| evaluate_point(spec, &template, x)).collect::<CliResult<Vec<_>>>()
    })?;
    Ok(SweepOutput { spec: spec.clone(), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Preset;

    fn small(methods: Vec<Method>) -> SweepSpec {
        SweepSpec { from: 1.0, to: 5.0, points: 3, methods, ..Default::default() }
    }

    #[test]
    fn csv_layout() {
        let out = run_sweep(&small(vec![Method::HighT, Method::Zeroth]), 1).unwrap();
        let csv = out.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        let header: Vec<&str> = lines[0].split(',').collect();
        assert_eq!(header.len(), 1 + 2 * 9);
        assert_eq!(header[0], "lambda2q");
        assert_eq!(header[1], "high_t_c_ss_re");
        assert_eq!(header[18], "zeroth_status");
        for l in &lines[1..] {
            assert_eq!(l.split(',').count(), header.len());
        }
        assert!(lines[1].starts_with("1.0000000000000000e0,"));
        // Zeroth order is diagonal in the σ_z basis.
        let zero_c: f64 = lines[2].split(',').nth(10).unwrap().parse().unwrap();
        assert_eq!(zero_c, 0.0);
    }

    #[test]
    fn numbers_carry_seventeen_digits() {
        let s = num(-0.089371041637797);
        let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
        assert_eq!(mantissa.len(), 17);
        assert_eq!(s.parse::<f64>().unwrap(), -0.089371041637797);
        assert_eq!(num(f64::NAN), "NA");
    }

    #[test]
    fn jobs_do_not_change_output() {
        let spec = small(vec![Method::Exact, Method::Me]);
        let a = run_sweep(&spec, 1).unwrap().to_csv();
        let b = run_sweep(&spec, 3).unwrap().to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn oracle_over_cap_is_na() {
        let spec = SweepSpec {
            from: 4.0,
            to: 5.0,
            points: 2,
            methods: vec![Method::Oracle, Method::HighT],
            oracle_modes: 4,
            fock_cutoff: 12,
            ..Default::default()
        };
        let out = run_sweep(&spec, 1).unwrap();
        assert_eq!(out.failures(), 0);
        for r in &out.rows {
            assert!(matches!(r.cells[0], CellStatus::Unavailable(_)));
            assert!(matches!(r.cells[1], CellStatus::Ok(_)));
        }
        let csv = out.to_csv();
        assert!(csv.lines().nth(1).unwrap().contains("NA,NA,NA,NA,NA"));
        assert!(csv.contains("NA: dimension"));
    }

    #[test]
    fn ohmic_and_swept_parameters() {
        for (swept, from, to) in [(SweptParam::Beta, 0.2, 1.0), (SweptParam::OmegaC, 0.1, 0.5)] {
            let spec = SweepSpec {
                swept,
                from,
                to,
                points: 2,
                spectral: SpectralFamily::Ohmic,
                methods: vec![Method::HighT, Method::Exact],
                ..Default::default()
            };
            let out = run_sweep(&spec, 1).unwrap();
            assert_eq!(out.failures(), 0);
            assert_eq!(out.rows[1].x, to);
        }
    }

    #[test]
    fn fig3_curves_flatten_at_small_cutoff() {
        let spec = SweepSpec { from: 0.02, to: 0.1, points: 3, ..Preset::Fig3.spec() };
        let out = run_sweep(&spec, 1).unwrap();
        let ht = out.series(Method::HighT).unwrap();
        let me = out.series(Method::Me).unwrap();
        let c = |v: &(f64, Option<PointValues>)| v.1.unwrap().c_ss.re;
        assert!((c(&ht[0]) - c(&ht[2])).abs() < 0.02 * c(&ht[0]).abs());
        for (a, b) in ht.iter().zip(&me) {
            assert!((c(a) - c(b)).abs() < 0.01 * c(b).abs());
        }
    }
}
