//! Command-line front end for `restartlab`.

pub mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use restartlab::mode_dynamics::{
    complex_regime_interval, spectral_params, transition, EffectiveProgress, Method,
    OuterHyperparams, Regime, SpectralParams,
};
use restartlab::restart_analysis::{
    blockwise_oracle_period, crossover, oracle_period, rate_r_k, PeriodRecommendation, Rate,
};
use restartlab::sweep_harness::{robustness_metric, run_sweep, ScheduleTag};
use restartlab::trajectory_sim::{
    format_full, format_sig, simulate_blocks, simulate_full_quadratic, simulate_modes, Spectrum,
    Trajectory,
};
use restartlab::validation::{run_validation, ValidationOptions};
use thiserror::Error;

use crate::config::{read_json, ExperimentConfig, Model, SweepFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("diverged at round {round}; output truncated")]
    Divergence { round: usize },
    #[error("{0}")]
    RegimeInapplicable(String),
    #[error("validation failed")]
    Validation,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Divergence { .. } => 3,
            CliError::RegimeInapplicable(_) => 4,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "restartlab", version, about = "Outer-momentum restart laboratory")]
pub struct Cli {
    /// Write the main output here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Machine-readable CSV with full-precision numbers.
    #[arg(long, global = true)]
    pub csv: bool,
    /// Suppress the human-readable summary.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one experiment config and write its trajectory CSV.
    Simulate { config: PathBuf },
    /// Run a hyperparameter sweep and write the grid as CSV.
    Sweep { config: PathBuf },
    /// Recommend a restart period for one mode or a spectrum file.
    Period(PeriodArgs),
    /// Report the complex-regime interval of heavy-ball dynamics.
    Regime(RegimeArgs),
    /// Run the built-in oracle checks.
    Validate {
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Debug, Args)]
pub struct PeriodArgs {
    #[arg(long, conflicts_with = "spectrum_file", required_unless_present = "spectrum_file")]
    pub sigma: Option<f64>,
    /// CSV with header `sigma,weight`.
    #[arg(long)]
    pub spectrum_file: Option<PathBuf>,
    #[arg(long)]
    pub nu: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value = "hb")]
    pub kind: Method,
    #[arg(long, default_value_t = 1)]
    pub kmin: u32,
    #[arg(long, default_value_t = 64)]
    pub kmax: u32,
    /// Skip the phase estimates, so non-oscillatory modes are not an error.
    #[arg(long)]
    pub no_phase: bool,
}

#[derive(Debug, Args)]
pub struct RegimeArgs {
    #[arg(long)]
    pub nu: f64,
    #[arg(long)]
    pub beta: f64,
}

/// Runs one command and returns the process exit code, reporting errors on
/// standard error.
pub fn run(cli: Cli) -> i32 {
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("restartlab: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate { config } => cmd_simulate(cli, config),
        Command::Sweep { config } => cmd_sweep(cli, config),
        Command::Period(args) => cmd_period(cli, args),
        Command::Regime(args) => cmd_regime(cli, args),
        Command::Validate { inject_fault } => cmd_validate(cli, *inject_fault),
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Buffered sink: the `--output` file, a config-supplied path, or stdout.
fn open_sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Summary lines go to stdout, or to stderr when stdout carries the data.
fn summary(cli: &Cli, data_on_stdout: bool, line: &str) {
    if cli.quiet {
        return;
    }
    if data_on_stdout {
        eprintln!("{line}");
    } else {
        println!("{line}");
    }
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn resolve_output(cli: &Cli, from_config: Option<&PathBuf>, base: &Path) -> Option<PathBuf> {
    cli.output
        .clone()
        .or_else(|| from_config.map(|p| base.join(p)))
}

fn cmd_simulate(cli: &Cli, path: &Path) -> Result<(), CliError> {
    let cfg: ExperimentConfig = read_json(path)?;
    let base = config_dir(path);
    let exp = cfg.build(&base)?;
    let tr: Trajectory<f64> = match &exp.model {
        Model::Spectrum(spec) => simulate_modes(spec, &exp.hyper, exp.kind, &exp.schedule, exp.horizon),
        Model::Blocks(blocks) => simulate_blocks(blocks, &exp.hyper, exp.kind, &exp.schedule, exp.horizon),
        Model::Quadratic { problem, inner } => {
            simulate_full_quadratic(problem, inner, &exp.hyper, exp.kind, &exp.schedule, exp.horizon)
        }
    }
    .map_err(config_err)?;

    let out = resolve_output(cli, cfg.output.as_ref(), &base);
    let mut sink = open_sink(out.as_deref())?;
    tr.write_csv(&mut sink)?;
    sink.flush()?;

    let on_stdout = out.is_none();
    let last = tr.last();
    summary(cli, on_stdout, &format!("rounds simulated: {}", last.round));
    let label = if tr.diverged() { "last finite loss" } else { "final loss" };
    summary(cli, on_stdout, &format!("{label}: {}", format_full(last.loss)));
    let rounds: Vec<String> = tr.restarted_at.iter().map(ToString::to_string).collect();
    summary(
        cli,
        on_stdout,
        &format!("restart rounds: {}", if rounds.is_empty() { "none".into() } else { rounds.join(" ") }),
    );
    match tr.diverged_at {
        Some(round) => Err(CliError::Divergence { round }),
        None => Ok(()),
    }
}

fn cmd_sweep(cli: &Cli, path: &Path) -> Result<(), CliError> {
    let file: SweepFile = read_json(path)?;
    let (cfg, threshold) = file.build()?;
    let res = run_sweep(&cfg).map_err(config_err)?;
    let metric = robustness_metric(&res, threshold).map_err(config_err)?;

    let out = resolve_output(cli, file.output.as_ref(), &config_dir(path));
    let mut sink = open_sink(out.as_deref())?;
    res.write_csv(&mut sink)?;
    sink.flush()?;

    let on_stdout = out.is_none();
    summary(cli, on_stdout, &format!("cells: {}", res.cells.len()));
    summary(cli, on_stdout, &format!("fraction of (beta, nu) cells with log10 loss <= {threshold}:"));
    for ((kind, tag), frac) in metric {
        if matches!(tag, ScheduleTag::Global(_)) {
            continue;
        }
        summary(cli, on_stdout, &format!("  {kind} {tag}: {frac:.4}"));
    }
    Ok(())
}

fn read_spectrum_file(path: &Path) -> Result<Spectrum<f64>, CliError> {
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Row {
        sigma: f64,
        weight: f64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let (mut sigmas, mut weights) = (Vec::new(), Vec::new());
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        sigmas.push(row.sigma);
        weights.push(row.weight);
    }
    Spectrum::direct(sigmas, weights).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

struct PeriodReport {
    rec: PeriodRecommendation<f64>,
    scope: &'static str,
    /// At the mode's sigma, or the block's weighted mean sigma.
    regime: Result<SpectralParams<f64>, restartlab::Error>,
    r_k: Option<f64>,
    r_inf: Option<f64>,
    crossover: Option<bool>,
}

fn rate_value(r: Rate<f64>) -> f64 {
    if r.infinite {
        f64::INFINITY
    } else {
        r.value
    }
}

fn cmd_period(cli: &Cli, args: &PeriodArgs) -> Result<(), CliError> {
    let h = OuterHyperparams::new(args.nu, args.beta).map_err(config_err)?;
    let (rec, scope, t) = match (&args.sigma, &args.spectrum_file) {
        (Some(sigma), _) => {
            let sigma = *sigma;
            if sigma == 0.0 {
                return Err(CliError::Config(
                    "sigma = 0 leaves the mode untouched; no cancellation exists".into(),
                ));
            }
            let sigma = EffectiveProgress::new(sigma).map_err(config_err)?;
            let t = transition(args.kind, &sigma, &h);
            (oracle_period(&t, args.kmin, args.kmax).map_err(config_err)?, "mode", t)
        }
        (None, Some(file)) => {
            let spec = read_spectrum_file(file)?;
            let rec = blockwise_oracle_period(&spec, &h, args.kind, args.kmin, args.kmax)
                .map_err(config_err)?;
            let mean = EffectiveProgress::new(spec.weighted_mean_sigma()).map_err(config_err)?;
            (rec, "block", transition(args.kind, &mean, &h))
        }
        (None, None) => return Err(CliError::Config("give --sigma or --spectrum-file".into())),
    };
    let regime = spectral_params(&t);
    let report = PeriodReport {
        r_k: rate_r_k(&t, rec.k_star).ok().map(rate_value),
        r_inf: regime.as_ref().ok().map(|sp| -sp.radius().ln()),
        crossover: crossover(&t, rec.k_star).ok(),
        rec,
        scope,
        regime,
    };
    print_period(cli, args, &report)?;
    if !args.no_phase {
        match &report.regime {
            Ok(sp) if sp.regime() == Regime::ComplexConjugate => {}
            Ok(sp) => {
                return Err(CliError::RegimeInapplicable(format!(
                    "phase estimates need complex eigenvalues; regime is {}",
                    sp.regime().as_str()
                )))
            }
            Err(e) => return Err(CliError::RegimeInapplicable(format!("phase estimates unavailable: {e}"))),
        }
    }
    Ok(())
}

fn opt_full(v: Option<f64>) -> String {
    v.map(format_full).unwrap_or_default()
}

fn print_period(cli: &Cli, args: &PeriodArgs, r: &PeriodReport) -> Result<(), CliError> {
    let regime = match &r.regime {
        Ok(sp) => sp.regime().as_str(),
        Err(_) => "overshoot",
    };
    let phases: Vec<String> = r.rec.k_phase.iter().map(ToString::to_string).collect();
    let mut sink = open_sink(cli.output.as_deref())?;
    if cli.csv {
        writeln!(sink, "scope,kind,k_min,k_max,k_star,objective,k_phase,r_k_star,r_inf,crossover,regime")?;
        writeln!(
            sink,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.scope,
            args.kind,
            r.rec.admissible_range.0,
            r.rec.admissible_range.1,
            r.rec.k_star,
            format_full(r.rec.objective),
            phases.join(" "),
            opt_full(r.r_k),
            opt_full(r.r_inf),
            r.crossover.map(|c| c.to_string()).unwrap_or_default(),
            regime
        )?;
    } else if !cli.quiet {
        let objective = if r.scope == "mode" { "|chi_K|" } else { "sum w chi_K^2" };
        writeln!(sink, "k_star: {} (range {}..={})", r.rec.k_star, r.rec.admissible_range.0, r.rec.admissible_range.1)?;
        writeln!(sink, "{objective} at k_star: {:.6e}", r.rec.objective)?;
        if !phases.is_empty() {
            writeln!(sink, "phase estimates K_0, K_1, K_2: {}", phases.join(", "))?;
        }
        if let Some(v) = r.r_k {
            writeln!(sink, "r_k_star: {v:.6}")?;
        }
        if let Some(v) = r.r_inf {
            writeln!(sink, "r_inf: {v:.6}")?;
        }
        if let Some(c) = r.crossover {
            writeln!(sink, "crossover at k_star: {}", if c { "yes" } else { "no" })?;
        }
        writeln!(sink, "regime: {regime}")?;
    }
    sink.flush()?;
    Ok(())
}

fn cmd_regime(cli: &Cli, args: &RegimeArgs) -> Result<(), CliError> {
    if args.beta <= 0.0 {
        return Err(CliError::Config("beta must lie in (0, 1) for a complex regime".into()));
    }
    let h = OuterHyperparams::new(args.nu, args.beta).map_err(config_err)?;
    let iv = complex_regime_interval(&h);
    let covers = iv.covers_unit_interval();
    let mut sink = open_sink(cli.output.as_deref())?;
    if cli.csv {
        writeln!(sink, "nu,beta_out,sigma_lo,sigma_hi,covers_unit_interval")?;
        writeln!(
            sink,
            "{},{},{},{},{covers}",
            format_full(args.nu),
            format_full(args.beta),
            format_full(iv.lo),
            format_full(iv.hi)
        )?;
    } else if !cli.quiet {
        writeln!(sink, "complex regime: ({}, {})", format_sig(iv.lo, 2), format_sig(iv.hi, 2))?;
        writeln!(
            sink,
            "sigma in (0, 1] {} inside",
            if covers { "is fully" } else { "is not fully" }
        )?;
    }
    sink.flush()?;
    Ok(())
}

fn cmd_validate(cli: &Cli, inject_fault: bool) -> Result<(), CliError> {
    let report = run_validation(ValidationOptions { inject_fault });
    let mut sink = open_sink(cli.output.as_deref())?;
    if cli.csv {
        writeln!(sink, "check,passed,max_residual,tolerance")?;
        for c in &report.checks {
            writeln!(
                sink,
                "{},{},{},{}",
                c.name,
                c.passed,
                format_full(c.max_residual),
                format_full(c.tolerance)
            )?;
        }
    } else if !cli.quiet {
        for c in &report.checks {
            writeln!(
                sink,
                "[{}] {}: max residual {:.3e} (tolerance {:.1e}); {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.max_residual,
                c.tolerance,
                c.detail
            )?;
        }
    }
    sink.flush()?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Validation)
    }
}
