//! CSV tables written by the CLI. Column names carry their units.

use std::io::{Read, Write};

use gated_core::clicks::{ClickRecord, DelayHistogram};
use gated_core::homodyne::ModeFunction;
use gated_core::tomography::{FockFit, VarianceTrace};
use serde::{Deserialize, Serialize};

pub type CsvResult<T> = Result<T, csv::Error>;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct ClickRow {
    pulse_index: u64,
    delay_ns: f64,
}

pub fn write_clicks(w: impl Write, clicks: &[ClickRecord]) -> CsvResult<()> {
    let mut out = csv::Writer::from_writer(w);
    for c in clicks {
        out.serialize(ClickRow {
            pulse_index: c.pulse_index,
            delay_ns: c.delay_ns,
        })?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_clicks(r: impl Read) -> CsvResult<Vec<ClickRecord>> {
    csv::Reader::from_reader(r)
        .deserialize::<ClickRow>()
        .map(|row| {
            row.map(|r| ClickRecord {
                pulse_index: r.pulse_index,
                delay_ns: r.delay_ns,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct HistogramRow {
    bin_start_ns: f64,
    count: u64,
    normalized: f64,
}

/// `normalized` is the count over the off-pulse level; pass `None` to leave
/// it empty when no background estimate exists.
pub fn write_histogram(
    w: impl Write,
    hist: &DelayHistogram,
    normalized: Option<&[f64]>,
) -> CsvResult<()> {
    let mut out = csv::Writer::from_writer(w);
    for (i, &count) in hist.counts().iter().enumerate() {
        out.serialize(HistogramRow {
            bin_start_ns: hist.bin_start(i),
            count,
            normalized: normalized.map_or(f64::NAN, |n| n[i]),
        })?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct MarginalRow {
    bin_center: f64,
    empirical_density: f64,
    fitted_density: f64,
}

pub fn write_marginal(w: impl Write, fit: &FockFit) -> CsvResult<()> {
    let mut out = csv::Writer::from_writer(w);
    let h = &fit.histogram;
    for (&x, &d) in h.bin_centers.iter().zip(&h.density) {
        out.serialize(MarginalRow {
            bin_center: x,
            empirical_density: d,
            fitted_density: fit.fitted_density(x),
        })?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ModeRow {
    time_ns: f64,
    amplitude: f64,
}

pub fn write_mode(w: impl Write, mode: &ModeFunction, dt: f64) -> CsvResult<()> {
    let mut out = csv::Writer::from_writer(w);
    for (i, &a) in mode.values().iter().enumerate() {
        out.serialize(ModeRow {
            time_ns: i as f64 * dt,
            amplitude: a,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Reads amplitudes only; the sample grid is taken from the traces.
pub fn read_mode_values(r: impl Read) -> CsvResult<Vec<f64>> {
    csv::Reader::from_reader(r)
        .deserialize::<ModeRow>()
        .map(|row| row.map(|r| r.amplitude))
        .collect()
}

#[derive(Serialize)]
struct VarianceRow {
    time_ns: f64,
    variance: f64,
    smoothed: f64,
}

pub fn write_variance(
    w: impl Write,
    raw: &VarianceTrace,
    smoothed: &VarianceTrace,
) -> CsvResult<()> {
    let mut out = csv::Writer::from_writer(w);
    for (i, (&v, &s)) in raw.values.iter().zip(&smoothed.values).enumerate() {
        out.serialize(VarianceRow {
            time_ns: i as f64 * raw.dt,
            variance: v,
            smoothed: s,
        })?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RateRow {
    delay_ns: f64,
    rate_per_s_per_ns: f64,
}

pub fn write_rate_profile(
    w: impl Write,
    profile: &gated_core::signal::SampledSignal,
) -> CsvResult<()> {
    let mut out = csv::Writer::from_writer(w);
    for (i, &r) in profile.samples().iter().enumerate() {
        out.serialize(RateRow {
            delay_ns: profile.time(i),
            rate_per_s_per_ns: r,
        })?;
    }
    out.flush()?;
    Ok(())
}
