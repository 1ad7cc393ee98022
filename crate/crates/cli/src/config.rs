//! Sweep settings: built-in defaults, named presets, a TOML file and command
//! line flags, applied in that order.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mfgs_core::mfgs::RenormalizationConvention;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::verify::VerifyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweptParam {
    #[value(alias = "lambda2Q")]
    #[serde(alias = "lambda2Q")]
    Lambda2q,
    Beta,
    OmegaC,
}

impl SweptParam {
    pub fn column(self) -> &'static str {
        match self {
            SweptParam::Lambda2q => "lambda2q",
            SweptParam::Beta => "beta",
            SweptParam::OmegaC => "omega_c",
        }
    }

    pub fn axis_label(self) -> &'static str {
        match self {
            SweptParam::Lambda2q => "λ²Q / ε",
            SweptParam::Beta => "β ε",
            SweptParam::OmegaC => "ω_c / ε",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    HighT,
    Series,
    Me,
    Zeroth,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::HighT => "high-t",
            Method::Series => "series",
            Method::Me => "me",
            Method::Zeroth => "zeroth",
            Method::Oracle => "oracle",
        }
    }

    /// Column prefix; `-` is not used inside CSV identifiers.
    pub fn column(self) -> String {
        self.name().replace('-', "_")
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        <Method as clap::ValueEnum>::from_str(s.trim(), true)
            .map_err(|_| CliError::Validation(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SpectralFamily {
    LorentzDrude,
    Ohmic,
    Tabulated(PathBuf),
}

impl FromStr for SpectralFamily {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "lorentz-drude" => Ok(SpectralFamily::LorentzDrude),
            "ohmic" => Ok(SpectralFamily::Ohmic),
            _ => match s.strip_prefix("tabulated:") {
                Some(p) if !p.is_empty() => Ok(SpectralFamily::Tabulated(PathBuf::from(p))),
                _ => Err(CliError::Validation(format!(
                    "spectral density must be lorentz-drude, ohmic or tabulated:PATH, got {s:?}"
                ))),
            },
        }
    }
}

impl TryFrom<String> for SpectralFamily {
    type Error = CliError;

    fn try_from(s: String) -> CliResult<Self> {
        s.parse()
    }
}

impl From<SpectralFamily> for String {
    fn from(s: SpectralFamily) -> String {
        s.to_string()
    }
}

impl fmt::Display for SpectralFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralFamily::LorentzDrude => write!(f, "lorentz-drude"),
            SpectralFamily::Ohmic => write!(f, "ohmic"),
            SpectralFamily::Tabulated(p) => write!(f, "tabulated:{}", p.display()),
        }
    }
}

pub fn parse_convention(s: &str) -> CliResult<RenormalizationConvention> {
    match s {
        "renormalized" => Ok(RenormalizationConvention::Renormalized),
        "natural" => Ok(RenormalizationConvention::Natural),
        _ => Err(CliError::Validation(format!("convention must be renormalized or natural, got {s:?}"))),
    }
}

/// Which coherence the SVG plots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    CSs,
    CEg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Fig1a,
    Fig1b,
    Fig2,
    /// As fig2, with ω_c = 0.1ε instead of 0.5ε.
    Fig2Text,
    Fig3,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Fig1a, Preset::Fig1b, Preset::Fig2, Preset::Fig2Text, Preset::Fig3];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1a => "fig1a",
            Preset::Fig1b => "fig1b",
            Preset::Fig2 => "fig2",
            Preset::Fig2Text => "fig2-text",
            Preset::Fig3 => "fig3",
        }
    }

    pub fn spec(self) -> SweepSpec {
        let base = SweepSpec::default();
        let methods = vec![Method::HighT, Method::Series, Method::Me];
        match self {
            Preset::Fig1a | Preset::Fig1b => SweepSpec {
                swept: SweptParam::Lambda2q,
                from: 0.2,
                to: 10.0,
                points: 50,
                delta: 0.7,
                omega_c: 0.25,
                beta: 1.0,
                methods,
                observable: if self == Preset::Fig1a { Observable::CSs } else { Observable::CEg },
                ..base
            },
            Preset::Fig2 | Preset::Fig2Text => SweepSpec {
                swept: SweptParam::Beta,
                from: 0.05,
                to: 3.0,
                points: 60,
                delta: 0.7,
                omega_c: if self == Preset::Fig2 { 0.5 } else { 0.1 },
                lambda2q: 5.0,
                methods,
                ..base
            },
            Preset::Fig3 => SweepSpec {
                swept: SweptParam::OmegaC,
                from: 0.02,
                to: 2.0,
                points: 50,
                delta: 0.7,
                beta: 1.0,
                lambda2q: 5.0,
                methods,
                ..base
            },
        }
    }

    /// Swept-value interval of the preset's validity region.
    pub fn validity(self) -> (Option<f64>, Option<f64>) {
        match self {
            // λ²Q ≳ ε.
            Preset::Fig1a | Preset::Fig1b => (Some(1.0), None),
            // ω_cβ ≲ 0.5, as β or ω_c.
            Preset::Fig2 => (None, Some(1.0)),
            Preset::Fig2Text => (None, Some(5.0)),
            Preset::Fig3 => (None, Some(0.5)),
        }
    }
}

impl FromStr for Preset {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        <Preset as clap::ValueEnum>::from_str(s, false)
            .map_err(|_| CliError::Validation(format!("unknown preset {s:?}")))
    }
}

/// Fully resolved sweep. Energies in units of ε, β in 1/ε.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub swept: SweptParam,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    pub log: bool,
    pub delta: f64,
    pub beta: f64,
    pub omega_c: f64,
    pub lambda2q: f64,
    pub spectral: SpectralFamily,
    pub methods: Vec<Method>,
    pub convention: RenormalizationConvention,
    pub rel_tol: f64,
    pub oracle_modes: usize,
    pub fock_cutoff: usize,
    pub observable: Observable,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            swept: SweptParam::Lambda2q,
            from: 0.2,
            to: 10.0,
            points: 50,
            log: false,
            delta: 0.7,
            beta: 1.0,
            omega_c: 0.25,
            lambda2q: 5.0,
            spectral: SpectralFamily::LorentzDrude,
            methods: vec![Method::HighT, Method::Series, Method::Me],
            convention: RenormalizationConvention::Renormalized,
            rel_tol: 1e-10,
            oracle_modes: 3,
            fock_cutoff: 12,
            observable: Observable::CSs,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Validation(m));
        if !(self.from.is_finite() && self.to.is_finite()) || self.from >= self.to {
            return bad(format!("sweep needs from < to, got [{}, {}]", self.from, self.to));
        }
        if self.points < 2 {
            return bad(format!("sweep needs at least 2 points, got {}", self.points));
        }
        if self.log && self.from <= 0.0 {
            return bad("a log grid needs from > 0".into());
        }
        if self.swept != SweptParam::Lambda2q && self.from <= 0.0 {
            return bad(format!("{} must stay positive", self.swept.column()));
        }
        if !self.delta.is_finite() || self.delta == 0.0 {
            return bad(format!("Δ must be finite and nonzero, got {}", self.delta));
        }
        for (name, v, swept) in [
            ("beta", self.beta, SweptParam::Beta),
            ("omega-c", self.omega_c, SweptParam::OmegaC),
            ("lambda2q", self.lambda2q, SweptParam::Lambda2q),
        ] {
            if self.swept != swept && !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.swept == SweptParam::Lambda2q && self.from <= 0.0 {
            return bad("λ²Q must stay positive".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return bad(format!("method {} listed twice", m.name()));
            }
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return bad(format!("rel-tol must lie in (0, 1e-2], got {}", self.rel_tol));
        }
        if self.oracle_modes == 0 || self.fock_cutoff == 0 {
            return bad("oracle modes and Fock cutoff must be at least 1".into());
        }
        if matches!(self.spectral, SpectralFamily::Tabulated(_)) && self.swept == SweptParam::OmegaC {
            return bad("a tabulated density has no ω_c to sweep".into());
        }
        Ok(())
    }

    /// Sweep grid; the end points are exact.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|i| {
                if i == n - 1 {
                    return self.to;
                }
                let t = i as f64 / (n - 1) as f64;
                if self.log {
                    (self.from.ln() + t * (self.to.ln() - self.from.ln())).exp()
                } else {
                    self.from + t * (self.to - self.from)
                }
            })
            .collect()
    }
}

/// Every optional setting, as read from a file or from flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub swept: Option<SweptParam>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub points: Option<usize>,
    pub log: Option<bool>,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    pub omega_c: Option<f64>,
    pub lambda2q: Option<f64>,
    pub spectral: Option<SpectralFamily>,
    pub methods: Option<Vec<Method>>,
    pub convention: Option<RenormalizationConvention>,
    pub rel_tol: Option<f64>,
    pub oracle_modes: Option<usize>,
    pub fock_cutoff: Option<usize>,
    pub observable: Option<Observable>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, s: &mut SweepSpec) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = &self.$f { s.$f = v.clone(); } )* };
        }
        set!(swept, from, to, points, log, delta, beta, omega_c, lambda2q, spectral, methods, convention,
             rel_tol, oracle_modes, fock_cutoff, observable);
    }

    /// `self` with every value present in `other` replaced.
    pub fn merged(&self, other: &Overrides) -> Overrides {
        macro_rules! pick {
            ($($f:ident),*) => { Overrides { $( $f: other.$f.clone().or_else(|| self.$f.clone()), )* } };
        }
        pick!(preset, swept, from, to, points, log, delta, beta, omega_c, lambda2q, spectral, methods,
              convention, rel_tol, oracle_modes, fock_cutoff, observable, jobs, out, svg)
    }
}

/// A sweep plus where to write it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub sweep: SweepSpec,
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults, then the preset (if any), then the overrides.
    pub fn resolve(o: &Overrides) -> CliResult<RunConfig> {
        let mut sweep = o.preset.map(Preset::spec).unwrap_or_default();
        o.apply(&mut sweep);
        let jobs = o.jobs.unwrap_or(1);
        if jobs == 0 {
            return Err(CliError::Validation("jobs must be at least 1".into()));
        }
        Ok(RunConfig { preset: o.preset, sweep, jobs, out: o.out.clone(), svg: o.svg.clone() })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    parameter: Option<SweptParam>,
    from: Option<f64>,
    to: Option<f64>,
    points: Option<usize>,
    log: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    delta: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BathSection {
    beta: Option<f64>,
    omega_c: Option<f64>,
    lambda2q: Option<f64>,
    spectral: Option<SpectralFamily>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    methods: Option<Vec<Method>>,
    convention: Option<String>,
    rel_tol: Option<f64>,
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OracleSection {
    modes: Option<usize>,
    fock_cutoff: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    out: Option<PathBuf>,
    svg: Option<PathBuf>,
    observable: Option<Observable>,
}

/// The TOML config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    preset: Option<String>,
    #[serde(default)]
    sweep: SweepSection,
    #[serde(default)]
    system: SystemSection,
    #[serde(default)]
    bath: BathSection,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    oracle: OracleSection,
    #[serde(default)]
    output: OutputSection,
    pub verify: Option<VerifyConfig>,
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn overrides(&self) -> CliResult<Overrides> {
        Ok(Overrides {
            preset: self.preset.as_deref().map(str::parse).transpose()?,
            swept: self.sweep.parameter,
            from: self.sweep.from,
            to: self.sweep.to,
            points: self.sweep.points,
            log: self.sweep.log,
            delta: self.system.delta,
            beta: self.bath.beta,
            omega_c: self.bath.omega_c,
            lambda2q: self.bath.lambda2q,
            spectral: self.bath.spectral.clone(),
            methods: self.run.methods.clone(),
            convention: self.run.convention.as_deref().map(parse_convention).transpose()?,
            rel_tol: self.run.rel_tol,
            oracle_modes: self.oracle.modes,
            fock_cutoff: self.oracle.fock_cutoff,
            observable: self.output.observable,
            jobs: self.run.jobs,
            out: self.output.out.clone(),
            svg: self.output.svg.clone(),
        })
    }
}
