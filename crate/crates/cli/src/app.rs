//! Command line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mfgs_core::mfgs::RenormalizationConvention;
use serde::Serialize;

use crate::config::{parse_convention, FileConfig, Method, Observable, Overrides, Preset, RunConfig, SpectralFamily, SweptParam};
use crate::error::{CliError, CliResult, EXIT_OK, EXIT_VALIDATION, EXIT_VERIFICATION};
use crate::svg::{self, Plot, Series};
use crate::sweep::{evaluate_point, num, run_sweep, CellStatus, DensityTemplate, SweepOutput};
use crate::verify::{run_verify, CheckKind, Mutation, VerifyConfig};

#[derive(Debug, Parser)]
#[command(name = "mfgs", version, about = "Mean force Gibbs states at ultrastrong coupling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep one parameter and write a CSV table (and optionally an SVG plot).
    Sweep(SettingsArgs),
    /// Spin-boson observables at a single parameter point, as JSON.
    State(SettingsArgs),
    /// Run the numerical self-checks and print a JSON report.
    Verify(VerifyArgs),
}

fn parse_observable(s: &str) -> Result<Observable, String> {
    match s {
        "c-ss" | "c_ss" => Ok(Observable::CSs),
        "c-eg" | "c_eg" => Ok(Observable::CEg),
        _ => Err(format!("unknown observable {s:?} (expected c-ss or c-eg)")),
    }
}

fn parse_conv(s: &str) -> Result<RenormalizationConvention, String> {
    parse_convention(s).map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
struct SettingsArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named figure preset.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Swept parameter.
    #[arg(long, value_enum)]
    sweep: Option<SweptParam>,
    #[arg(long, allow_negative_numbers = true)]
    from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    to: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Logarithmic grid.
    #[arg(long)]
    log: bool,
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "omega-c")]
    omega_c: Option<f64>,
    #[arg(long)]
    lambda2q: Option<f64>,
    /// lorentz-drude, ohmic or tabulated:PATH.
    #[arg(long)]
    spectral: Option<SpectralFamily>,
    /// Comma separated: exact, high-t, series, me, zeroth, oracle.
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// renormalized or natural.
    #[arg(long, value_parser = parse_conv)]
    convention: Option<RenormalizationConvention>,
    #[arg(long = "rel-tol")]
    rel_tol: Option<f64>,
    #[arg(long = "oracle-modes")]
    oracle_modes: Option<usize>,
    #[arg(long = "fock-cutoff")]
    fock_cutoff: Option<usize>,
    /// Plotted observable: c-ss or c-eg.
    #[arg(long, value_parser = parse_observable)]
    observable: Option<Observable>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

impl SettingsArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            preset: self.preset,
            swept: self.sweep,
            from: self.from,
            to: self.to,
            points: self.points,
            log: self.log.then_some(true),
            delta: self.delta,
            beta: self.beta,
            omega_c: self.omega_c,
            lambda2q: self.lambda2q,
            spectral: self.spectral.clone(),
            methods: self.methods.clone(),
            convention: self.convention,
            rel_tol: self.rel_tol,
            oracle_modes: self.oracle_modes,
            fock_cutoff: self.fock_cutoff,
            observable: self.observable,
            jobs: self.jobs,
            out: self.out.clone(),
            svg: self.svg.clone(),
        }
    }

    fn resolve(&self) -> CliResult<RunConfig> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?.overrides()?,
            None => Overrides::default(),
        };
        RunConfig::resolve(&file.merged(&self.overrides()))
    }
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// TOML file with a [verify] section.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma separated subset of trace-identity, hermiticity, dawson; empty runs nothing.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    checks: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "inject-kernel-sign-error", hide = true)]
    inject_kernel_sign_error: bool,
}

fn write_output(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn plot_for(output: &SweepOutput, preset: Option<Preset>) -> Plot {
    let spec = &output.spec;
    let (y_label, pick): (&str, fn(&crate::sweep::PointValues) -> f64) = match spec.observable {
        Observable::CSs => ("Re c_ss", |v| v.c_ss.re),
        Observable::CEg => ("Re c_eg", |v| v.c_eg.re),
    };
    let series = spec
        .methods
        .iter()
        .filter_map(|&m| {
            output.series(m).map(|pts| Series {
                name: m.name().to_string(),
                points: pts.into_iter().map(|(x, v)| (x, v.as_ref().map(pick))).collect(),
            })
        })
        .collect();
    let markers = preset.map(|p| {
        let (lo, hi) = p.validity();
        lo.into_iter().chain(hi).collect()
    });
    Plot {
        title: match preset {
            Some(p) => format!("{} (Δ = {}, β = {}, ω_c = {}, λ²Q = {})", p.name(), spec.delta, spec.beta, spec.omega_c, spec.lambda2q),
            None => format!("Δ = {}, β = {}, ω_c = {}, λ²Q = {}", spec.delta, spec.beta, spec.omega_c, spec.lambda2q),
        },
        x_label: spec.swept.axis_label().to_string(),
        y_label: y_label.to_string(),
        log_x: spec.log,
        series,
        markers: markers.unwrap_or_default(),
    }
}

fn cmd_sweep(args: &SettingsArgs) -> CliResult<i32> {
    let cfg = args.resolve()?;
    let output = run_sweep(&cfg.sweep, cfg.jobs)?;
    write_output(cfg.out.as_deref(), &output.to_csv())?;
    if let Some(p) = &cfg.svg {
        write_output(Some(p), &svg::render(&plot_for(&output, cfg.preset)))?;
    }
    let failed = output.failures();
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} cell(s) failed; see the status columns")));
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct MethodState {
    method: String,
    status: String,
    c_ss_re: Option<String>,
    c_ss_im: Option<String>,
    c_eg_re: Option<String>,
    c_eg_im: Option<String>,
    p_plus: Option<String>,
}

#[derive(Serialize)]
struct StateReport {
    delta: f64,
    beta: f64,
    omega_c: f64,
    lambda2q: f64,
    lambda2q_beta: f64,
    omega_c_beta: f64,
    strong_coupling: bool,
    series_valid: bool,
    high_temperature: bool,
    methods: Vec<MethodState>,
}

fn cmd_state(args: &SettingsArgs) -> CliResult<i32> {
    let cfg = args.resolve()?;
    let mut spec = cfg.sweep.clone();
    // A single point: validate it as a two-point λ²Q sweep starting there.
    spec.swept = SweptParam::Lambda2q;
    spec.from = spec.lambda2q;
    spec.to = spec.lambda2q + 1.0;
    spec.points = 2;
    spec.log = false;
    spec.validate()?;
    let template = DensityTemplate::load(&spec.spectral)?;
    let row = evaluate_point(&spec, &template, spec.lambda2q)?;
    let methods: Vec<MethodState> = spec
        .methods
        .iter()
        .zip(&row.cells)
        .map(|(m, c)| {
            let v = c.values();
            MethodState {
                method: m.name().to_string(),
                status: match c {
                    CellStatus::Ok(_) => "ok".into(),
                    CellStatus::Unavailable(e) => format!("NA: {e}"),
                    CellStatus::Failed(e) => format!("failed: {e}"),
                },
                c_ss_re: v.map(|v| num(v.c_ss.re)),
                c_ss_im: v.map(|v| num(v.c_ss.im)),
                c_eg_re: v.map(|v| num(v.c_eg.re)),
                c_eg_im: v.map(|v| num(v.c_eg.im)),
                p_plus: v.map(|v| num(v.p_plus)),
            }
        })
        .collect();
    let failed = row.cells.iter().any(|c| matches!(c, CellStatus::Failed(_)));
    let report = StateReport {
        delta: spec.delta,
        beta: spec.beta,
        omega_c: spec.omega_c,
        lambda2q: spec.lambda2q,
        lambda2q_beta: row.flags.lambda2_q_beta,
        omega_c_beta: row.flags.omega_c_beta,
        strong_coupling: row.flags.strong_coupling,
        series_valid: row.flags.series_valid,
        high_temperature: row.flags.high_temperature,
        methods,
    };
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Numerical(e.to_string()))?;
    text.push('\n');
    write_output(cfg.out.as_deref(), &text)?;
    if failed {
        return Err(CliError::Numerical("at least one method failed".into()));
    }
    Ok(EXIT_OK)
}

fn cmd_verify(args: &VerifyArgs) -> CliResult<i32> {
    let mut cfg = match &args.config {
        Some(p) => FileConfig::load(p)?.verify.unwrap_or_default(),
        None => VerifyConfig::default(),
    };
    if let Some(list) = &args.checks {
        cfg.checks = list
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| {
                CheckKind::ALL
                    .into_iter()
                    .find(|c| c.name() == s)
                    .ok_or_else(|| CliError::Validation(format!("unknown check {s:?}")))
            })
            .collect::<CliResult<_>>()?;
    }
    let mutation = if args.inject_kernel_sign_error { Mutation::KernelSign } else { Mutation::None };
    let report = run_verify(&cfg, mutation)?;
    write_output(args.out.as_deref(), &report.to_json())?;
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFICATION })
}

/// Runs the program and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::State(a) => cmd_state(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("mfgs: {e}");
            e.exit_code()
        }
    }
}
