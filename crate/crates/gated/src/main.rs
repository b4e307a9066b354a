use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gated::config::{load_config, RunConfig};
use gated::csv_io;
use gated::pipeline::{run_clicks, run_pipeline, stream_seeds, write_artifacts};
use gated::report::Report;
use gated::trace_io::{load_traces, save_traces};
use gated_core::clicks::AcceptanceGate;
use gated_core::homodyne::{generate_trace_set, optimal_mode, ModeFunction, TraceSetRequest};
use gated_core::tomography::{
    estimate_mode_from_variance, fit_fock_mixture, lowpass, project, variance_trace,
};

#[derive(Parser)]
#[command(
    name = "gated",
    version,
    about = "Gated heralded-photon simulation and tomography"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// TOML run configuration; missing keys take the built-in defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<RunConfig> {
        match &self.config {
            Some(p) => load_config(p).context("stage `config`"),
            None => Ok(RunConfig::default()),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Simulate APD click delays for a pulsed pump.
    SimulateClicks {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        pulse_ns: Option<f64>,
        #[arg(long)]
        rep_rate_hz: Option<f64>,
        #[arg(long)]
        n_pulses: Option<u64>,
        /// Click list, `pulse_index,delay_ns`.
        #[arg(long)]
        out: PathBuf,
        /// Optional delay histogram, `bin_start_ns,count,normalized`.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Synthesize heralded (or vacuum) homodyne windows.
    SimulateHomodyne {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        seed: u64,
        /// Comma-separated populations rho_00,rho_11,...
        #[arg(long, value_delimiter = ',')]
        populations: Option<Vec<f64>>,
        #[arg(long)]
        pulse_ns: Option<f64>,
        #[arg(long)]
        n_windows: Option<usize>,
        /// Write vacuum calibration windows instead of signal windows.
        #[arg(long)]
        vacuum: bool,
        /// Qualifier gate center; defaults to the configured one or 60 ns.
        #[arg(long)]
        gate_center_ns: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the temporal mode from signal and vacuum variance.
    ExtractMode {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        vacuum: PathBuf,
        #[arg(long)]
        lowpass_mhz: Option<f64>,
        /// Mode CSV, `time_ns,amplitude`.
        #[arg(long)]
        out: PathBuf,
        /// Variance CSV, `time_ns,variance,smoothed`.
        #[arg(long)]
        variance_out: Option<PathBuf>,
    },
    /// Project windows on a mode and fit Fock populations.
    Tomography {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        vacuum: PathBuf,
        /// Mode CSV; defaults to the model mode of the configured pulse.
        #[arg(long)]
        mode: Option<PathBuf>,
        /// Key-value report; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Marginal CSV, `bin_center,empirical_density,fitted_density`.
        #[arg(long)]
        marginal_out: Option<PathBuf>,
    },
    /// Run every stage and write the report and plot tables.
    RunPipeline {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print a readable summary of a key-value report.
    Report { input: PathBuf },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

fn simulate_clicks_cmd(
    mut cfg: RunConfig,
    seed: u64,
    pulse_ns: Option<f64>,
    rep_rate_hz: Option<f64>,
    n_pulses: Option<u64>,
    out: &Path,
    histogram: Option<&Path>,
) -> Result<()> {
    if let Some(p) = pulse_ns {
        cfg.pulse.duration_ns = p;
    }
    if let Some(r) = rep_rate_hz {
        cfg.timing.rep_rate_hz = r;
    }
    if let Some(n) = n_pulses {
        cfg.clicks.n_pulses = n;
    }
    cfg.seed = seed;
    cfg.validate().context("stage `config`")?;
    let run = run_clicks(&cfg, cfg.pulse.duration_ns, stream_seeds(seed).0)?;
    csv_io::write_clicks(create(out)?, &run.clicks).context("stage `output`")?;
    if let Some(h) = histogram {
        csv_io::write_histogram(create(h)?, &run.histogram, run.normalized.as_deref())
            .context("stage `output`")?;
    }
    eprintln!(
        "{} clicks, {:.3} s^-1 live, background {:.3} per bin",
        run.clicks.len(),
        run.live_rate_per_s(),
        run.background_per_bin
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate_homodyne_cmd(
    mut cfg: RunConfig,
    seed: u64,
    populations: Option<Vec<f64>>,
    pulse_ns: Option<f64>,
    n_windows: Option<usize>,
    vacuum: bool,
    gate_center_ns: Option<f64>,
    out: &Path,
) -> Result<()> {
    if let Some(p) = populations {
        cfg.homodyne.populations = p;
    }
    if let Some(p) = pulse_ns {
        cfg.pulse.duration_ns = p;
    }
    if let Some(n) = n_windows {
        cfg.homodyne.n_windows = n;
        cfg.homodyne.n_vacuum_windows = n;
    }
    cfg.seed = seed;
    cfg.validate().context("stage `config`")?;
    let state = cfg.target_state()?;
    let mode = model_mode(&cfg)?;
    let center = gate_center_ns.or(cfg.gate.center_ns).unwrap_or(60.0);
    let gate = AcceptanceGate::new(center, cfg.gate.length_ns).context("stage `gate`")?;
    let set = generate_trace_set(&TraceSetRequest {
        state: &state,
        mode: &mode,
        n_windows: cfg.homodyne.n_windows,
        vacuum,
        seed,
        gate,
        dt: cfg.timing.dt_ns,
        background_herald_fraction: 0.0,
        electronic_noise: None,
        config_hash: cfg.hash(),
    })
    .context("stage `homodyne`")?;
    save_traces(out, &set).context("stage `output`")?;
    Ok(())
}

fn model_mode(cfg: &RunConfig) -> Result<ModeFunction> {
    let pulse = cfg.pulse_profile()?;
    let opo = cfg.opo()?;
    optimal_mode(&pulse, &opo, cfg.homodyne.mode_delay_ns, cfg.window_grid())
        .context("stage `mode`")
}

fn extract_mode_cmd(
    cfg: RunConfig,
    signal: &Path,
    vacuum: &Path,
    lowpass_mhz: Option<f64>,
    out: &Path,
    variance_out: Option<&Path>,
) -> Result<()> {
    let sig = load_traces(signal).context("stage `input` (signal traces)")?;
    let vac = load_traces(vacuum).context("stage `input` (vacuum traces)")?;
    let raw = variance_trace(&sig, &vac).context("stage `variance`")?;
    let smooth = lowpass(&raw, lowpass_mhz.unwrap_or(cfg.analysis.lowpass_mhz))
        .context("stage `variance`")?;
    if let Some(p) = variance_out {
        csv_io::write_variance(create(p)?, &raw, &smooth).context("stage `output`")?;
    }
    let mode = estimate_mode_from_variance(&smooth).context("stage `mode`")?;
    csv_io::write_mode(create(out)?, &mode, sig.dt).context("stage `output`")?;
    Ok(())
}

fn tomography_cmd(
    cfg: RunConfig,
    signal: &Path,
    vacuum: &Path,
    mode_path: Option<&Path>,
    out: Option<&Path>,
    marginal_out: Option<&Path>,
) -> Result<()> {
    let sig = load_traces(signal).context("stage `input` (signal traces)")?;
    let vac = load_traces(vacuum).context("stage `input` (vacuum traces)")?;
    let mode = match mode_path {
        Some(p) => {
            let values = csv_io::read_mode_values(
                File::open(p).with_context(|| format!("cannot open {}", p.display()))?,
            )
            .context("stage `input` (mode)")?;
            ModeFunction::from_unnormalized(values).context("stage `input` (mode)")?
        }
        None => model_mode(&cfg)?,
    };
    let q = project(&sig, &mode, &vac).context("stage `projection`")?;
    let fit = fit_fock_mixture(&q, &cfg.fit_options()).context("stage `tomography`")?;
    let mut report = Report::new();
    report.int("tomography.n_points", q.len() as i64);
    report.float("tomography.quadrature_variance", q.variance());
    for (n, r) in fit.rho.rho().iter().enumerate() {
        report.float(format!("tomography.rho_{n}{n}"), *r);
    }
    for (n, r) in fit.binned.rho().iter().enumerate() {
        report.float(format!("tomography.binned_rho_{n}{n}"), *r);
    }
    report.float("tomography.wigner_center", fit.rho.wigner_center());
    report.int("tomography.em_iterations", fit.iterations as i64);
    report.flag("tomography.em_converged", fit.converged);
    if let Some(p) = marginal_out {
        csv_io::write_marginal(create(p)?, &fit).context("stage `output`")?;
    }
    match out {
        Some(p) => std::fs::write(p, report.to_text())
            .with_context(|| format!("cannot write {}", p.display()))?,
        None => print!("{}", report.to_text()),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SimulateClicks {
            config,
            seed,
            pulse_ns,
            rep_rate_hz,
            n_pulses,
            out,
            histogram,
        } => simulate_clicks_cmd(
            config.load()?,
            seed,
            pulse_ns,
            rep_rate_hz,
            n_pulses,
            &out,
            histogram.as_deref(),
        ),
        Command::SimulateHomodyne {
            config,
            seed,
            populations,
            pulse_ns,
            n_windows,
            vacuum,
            gate_center_ns,
            out,
        } => simulate_homodyne_cmd(
            config.load()?,
            seed,
            populations,
            pulse_ns,
            n_windows,
            vacuum,
            gate_center_ns,
            &out,
        ),
        Command::ExtractMode {
            config,
            signal,
            vacuum,
            lowpass_mhz,
            out,
            variance_out,
        } => extract_mode_cmd(
            config.load()?,
            &signal,
            &vacuum,
            lowpass_mhz,
            &out,
            variance_out.as_deref(),
        ),
        Command::Tomography {
            config,
            signal,
            vacuum,
            mode,
            out,
            marginal_out,
        } => tomography_cmd(
            config.load()?,
            &signal,
            &vacuum,
            mode.as_deref(),
            out.as_deref(),
            marginal_out.as_deref(),
        ),
        Command::RunPipeline {
            config,
            seed,
            out_dir,
        } => {
            let mut cfg = config.load()?;
            cfg.seed = seed;
            let out = run_pipeline(&cfg)?;
            write_artifacts(&out, &out_dir).context("stage `output`")?;
            print!("{}", out.report.summary());
            Ok(())
        }
        Command::Report { input } => {
            let text = std::fs::read_to_string(&input)
                .with_context(|| format!("cannot read {}", input.display()))?;
            let report = Report::parse(&text).map_err(anyhow::Error::msg)?;
            if report.entries().is_empty() {
                bail!("{} holds no entries", input.display());
            }
            print!("{}", report.summary());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
