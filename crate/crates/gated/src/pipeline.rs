//! End-to-end run: click statistics for each pulse length, heralded
//! homodyne windows, mode extraction and Fock-diagonal tomography.

use gated_core::clicks::{
    click_rate_profile, gate_clicks, histogram_clicks, simulate_clicks, BackgroundRegion,
    ClickRecord, DelayHistogram,
};
use gated_core::homodyne::{
    generate_trace_set, optimal_mode, ElectronicNoise, ModeFunction, TraceSet, TraceSetRequest,
};
use gated_core::signal::{PulseProfile, SampledSignal};
use gated_core::tomography::{
    estimate_mode_from_variance, fit_fock_mixture, lowpass, project, variance_trace, FockFit,
    VarianceTrace,
};
use thiserror::Error;

use crate::config::{ConfigError, ModeSource, RunConfig};
use crate::report::Report;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage `{stage}`: {source}")]
    Config {
        stage: &'static str,
        source: ConfigError,
    },
    #[error("stage `{stage}`: {source}")]
    Core {
        stage: &'static str,
        source: gated_core::Error,
    },
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Config { stage, .. } | PipelineError::Core { stage, .. } => stage,
        }
    }
}

trait Stage<T> {
    fn at(self, stage: &'static str) -> Result<T, PipelineError>;
}

impl<T> Stage<T> for Result<T, gated_core::Error> {
    fn at(self, stage: &'static str) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError::Core { stage, source })
    }
}

impl<T> Stage<T> for Result<T, ConfigError> {
    fn at(self, stage: &'static str) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError::Config { stage, source })
    }
}

/// Click record and statistics for one pulse length.
#[derive(Debug, Clone)]
pub struct ClickRun {
    pub duration_ns: f64,
    pub clicks: Vec<ClickRecord>,
    pub rate_profile: SampledSignal,
    pub histogram: DelayHistogram,
    /// Counts over the off-pulse level; `None` when the region is empty.
    pub normalized: Option<Vec<f64>>,
    pub background_per_bin: f64,
}

impl ClickRun {
    pub fn live_rate_per_s(&self) -> f64 {
        self.histogram.rate_per_s()
    }
}

/// Simulates and histograms clicks for a pulse of `duration_ns`, all other
/// settings from `cfg`.
pub fn run_clicks(cfg: &RunConfig, duration_ns: f64, seed: u64) -> Result<ClickRun, PipelineError> {
    const STAGE: &str = "clicks";
    let pulse =
        PulseProfile::new(duration_ns, cfg.pulse.rise_ns, cfg.pulse.extinction).at(STAGE)?;
    let chain = cfg.filter_chain().at(STAGE)?;
    let apd = cfg.apd().at(STAGE)?;
    let timing = cfg.timing().at(STAGE)?;
    let profile = click_rate_profile(
        &pulse,
        &chain,
        &apd,
        &timing,
        cfg.apd.leakage.into(),
        cfg.timing.dt_ns,
    )
    .at(STAGE)?;
    let clicks = simulate_clicks(&timing, &profile, cfg.clicks.n_pulses, seed).at(STAGE)?;
    let histogram = histogram_clicks(
        &clicks,
        cfg.clicks.bin_ns,
        cfg.timing.window_ns,
        timing.live_time_s(cfg.clicks.n_pulses),
    )
    .at(STAGE)?;
    let region = background_region(cfg);
    let background_per_bin = histogram.background_level(&region).at(STAGE)?;
    let normalized = histogram.normalized(&region).ok();
    Ok(ClickRun {
        duration_ns,
        clicks,
        rate_profile: profile,
        histogram,
        normalized,
        background_per_bin,
    })
}

pub fn background_region(cfg: &RunConfig) -> BackgroundRegion {
    BackgroundRegion::tail(cfg.timing.window_ns, cfg.clicks.background_ns)
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: Report,
    pub click_runs: Vec<ClickRun>,
    /// Index into `click_runs` of the configured pulse length.
    pub main_run: usize,
    pub signal: TraceSet,
    pub vacuum: TraceSet,
    pub variance: VarianceTrace,
    pub smoothed_variance: VarianceTrace,
    pub model_mode: ModeFunction,
    pub estimated_mode: Option<ModeFunction>,
    pub fit: FockFit,
}

/// Seeds of the independent random streams, derived from the run seed.
pub fn stream_seeds(seed: u64) -> (u64, u64, u64) {
    let click = seed;
    let signal = seed ^ 0x5157_4e41_4c00_0001;
    let vacuum = seed ^ 0x5641_4355_554d_0002;
    (click, signal, vacuum)
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutput, PipelineError> {
    cfg.validate().at("config")?;
    let (click_seed, signal_seed, vacuum_seed) = stream_seeds(cfg.seed);
    let hash = cfg.hash();
    let timing = cfg.timing().at("config")?;

    let mut report = Report::new();
    report.int("run.seed", cfg.seed as i64);
    report.text("run.config_hash", format!("{hash:016x}"));

    let mut durations = cfg.clicks.compare_durations_ns.clone();
    if !durations.contains(&cfg.pulse.duration_ns) {
        durations.push(cfg.pulse.duration_ns);
    }
    let mut click_runs = Vec::with_capacity(durations.len());
    for (i, &d) in durations.iter().enumerate() {
        click_runs.push(run_clicks(cfg, d, click_seed.wrapping_add(i as u64))?);
    }
    let main_run = durations
        .iter()
        .position(|&d| d == cfg.pulse.duration_ns)
        .unwrap();
    report.float(
        "clicks.live_time_s",
        timing.live_time_s(cfg.clicks.n_pulses),
    );
    report.float("clicks.duty_fraction", timing.duty_fraction());
    for run in &click_runs {
        let key = format!("clicks.pulse_{}ns", run.duration_ns);
        report.int(format!("{key}.count"), run.histogram.total() as i64);
        report.float(format!("{key}.rate_per_s"), run.live_rate_per_s());
        report.float(
            format!("{key}.wallclock_rate_per_s"),
            run.live_rate_per_s() * timing.duty_fraction(),
        );
        if let Some(n) = &run.normalized {
            let peak = n.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            report.float(format!("{key}.peak_over_background"), peak);
        }
    }

    let main = &click_runs[main_run];
    let hist = &main.histogram;
    // counts per ns of delay summed over N pulses = rate * 1e-9 s * N
    let bg_per_ns = main.background_per_bin / hist.bin_width();
    let n_pulses = hist.total_live_time_s() * cfg.timing.rep_rate_hz;
    let bg_rate = bg_per_ns * 1e9 / n_pulses;
    report.float("clicks.background_per_bin", main.background_per_bin);
    report.float("clicks.background_rate_per_s", bg_rate);
    let plateau = main.rate_profile.samples().last().copied().unwrap_or(0.0);
    report.float(
        "clicks.model_background_rate_per_s",
        plateau / gated_core::clicks::rate_density_scale(&timing),
    );
    let peak_bin = (0..hist.n_bins())
        .max_by_key(|&i| hist.counts()[i])
        .unwrap_or(0);
    let center = cfg
        .gate
        .center_ns
        .unwrap_or_else(|| hist.bin_center(peak_bin));
    let gate = cfg.gate_with_center(center).at("gate")?;
    let clicks_in_gate = gate_clicks(&main.clicks, &gate).len() as u64;
    let herald_rate = clicks_in_gate as f64 / hist.total_live_time_s();
    let bg_in_gate = bg_per_ns * gate.length_ns();
    let bg_fraction = if clicks_in_gate > 0 {
        (bg_in_gate / clicks_in_gate as f64).clamp(0.0, 1.0)
    } else {
        0.0
    };
    report.float("gate.center_ns", gate.center_ns());
    report.float("gate.length_ns", gate.length_ns());
    report.float("gate.herald_rate_per_s", herald_rate);
    report.float("gate.background_fraction", bg_fraction);
    report.float(
        "gate.spectral_brightness_per_s_per_MHz",
        herald_rate / cfg.cavities.opo_bandwidth_mhz,
    );

    let state = cfg.target_state().at("homodyne")?;
    let pulse = cfg.pulse_profile().at("homodyne")?;
    let opo = cfg.opo().at("homodyne")?;
    let model_mode =
        optimal_mode(&pulse, &opo, cfg.homodyne.mode_delay_ns, cfg.window_grid()).at("homodyne")?;
    let noise = (cfg.homodyne.electronic_noise_rms > 0.0).then_some(ElectronicNoise {
        rms: cfg.homodyne.electronic_noise_rms,
        min_freq_mhz: cfg.homodyne.electronic_noise_min_mhz,
    });
    let request = |vacuum: bool| TraceSetRequest {
        state: &state,
        mode: &model_mode,
        n_windows: if vacuum {
            cfg.homodyne.n_vacuum_windows
        } else {
            cfg.homodyne.n_windows
        },
        vacuum,
        seed: if vacuum { vacuum_seed } else { signal_seed },
        gate,
        dt: cfg.timing.dt_ns,
        background_herald_fraction: if cfg.homodyne.background_heralds {
            bg_fraction
        } else {
            0.0
        },
        electronic_noise: noise,
        config_hash: hash,
    };
    let signal = generate_trace_set(&request(false)).at("homodyne")?;
    let vacuum = generate_trace_set(&request(true)).at("homodyne")?;
    report.int("homodyne.n_windows", signal.len() as i64);
    report.int("homodyne.n_vacuum_windows", vacuum.len() as i64);
    report.float(
        "homodyne.true_quadrature_variance",
        state.quadrature_variance(),
    );

    let variance = variance_trace(&signal, &vacuum).at("mode")?;
    let smoothed = lowpass(&variance, cfg.analysis.lowpass_mhz).at("mode")?;
    let peak = smoothed
        .values
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    report.float("mode.peak_variance_excess", peak - 1.0);
    report.float(
        "mode.no_signal_threshold",
        5.0 / (smoothed.n_windows as f64).sqrt(),
    );
    let estimated_mode = match estimate_mode_from_variance(&smoothed) {
        Ok(m) => {
            report.float("mode.fidelity", m.fidelity(&model_mode).at("mode")?);
            Some(m)
        }
        Err(e) => {
            report.text("mode.fidelity", format!("unavailable: {e}"));
            None
        }
    };
    let mode = match cfg.analysis.mode_source {
        ModeSource::Model => &model_mode,
        ModeSource::Variance => match &estimated_mode {
            Some(m) => m,
            None => {
                return Err(estimate_mode_from_variance(&smoothed).unwrap_err()).at("mode");
            }
        },
    };
    report.text(
        "mode.source",
        match cfg.analysis.mode_source {
            ModeSource::Model => "model",
            ModeSource::Variance => "variance",
        },
    );

    let q = project(&signal, mode, &vacuum).at("projection")?;
    report.float("projection.quadrature_variance", q.variance());
    report.float("projection.vacuum_scale", q.scale);

    let fit = fit_fock_mixture(&q, &cfg.fit_options()).at("tomography")?;
    for (n, r) in fit.rho.rho().iter().enumerate() {
        report.float(format!("tomography.rho_{n}{n}"), *r);
    }
    for (n, r) in fit.binned.rho().iter().enumerate() {
        report.float(format!("tomography.binned_rho_{n}{n}"), *r);
    }
    report.float("tomography.wigner_center", fit.rho.wigner_center());
    report.float(
        "tomography.binned_wigner_center",
        fit.binned.wigner_center(),
    );
    report.float(
        "tomography.mean_photon_number",
        fit.rho.mean_photon_number(),
    );
    report.float("tomography.log_likelihood", fit.log_likelihood);
    report.int("tomography.em_iterations", fit.iterations as i64);
    report.flag("tomography.em_converged", fit.converged);

    Ok(PipelineOutput {
        report,
        click_runs,
        main_run,
        signal,
        vacuum,
        variance,
        smoothed_variance: smoothed,
        model_mode,
        estimated_mode,
        fit,
    })
}

/// Writes the report and the plot tables into `dir`:
/// `report.txt`, `histogram_<d>ns.csv`, `rate_<d>ns.csv`, `variance.csv`,
/// `mode.csv` (the projection mode), `estimated_mode.csv` when available
/// and `marginal.csv`.
pub fn write_artifacts(out: &PipelineOutput, dir: &std::path::Path) -> std::io::Result<()> {
    use crate::csv_io;
    use std::fs::File;
    use std::io::BufWriter;

    let csv_err = |e: csv::Error| std::io::Error::other(e.to_string());
    let create = |name: &str| File::create(dir.join(name)).map(BufWriter::new);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.txt"), out.report.to_text())?;
    for run in &out.click_runs {
        let d = run.duration_ns;
        csv_io::write_histogram(
            create(&format!("histogram_{d}ns.csv"))?,
            &run.histogram,
            run.normalized.as_deref(),
        )
        .map_err(csv_err)?;
        csv_io::write_rate_profile(create(&format!("rate_{d}ns.csv"))?, &run.rate_profile)
            .map_err(csv_err)?;
    }
    csv_io::write_variance(
        create("variance.csv")?,
        &out.variance,
        &out.smoothed_variance,
    )
    .map_err(csv_err)?;
    csv_io::write_mode(create("mode.csv")?, &out.model_mode, out.signal.dt).map_err(csv_err)?;
    if let Some(m) = &out.estimated_mode {
        csv_io::write_mode(create("estimated_mode.csv")?, m, out.signal.dt).map_err(csv_err)?;
    }
    csv_io::write_marginal(create("marginal.csv")?, &out.fit).map_err(csv_err)?;
    Ok(())
}
