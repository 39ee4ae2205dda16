//! Experiment pipelines built on the attribution and attack modules. Each
//! pipeline is a pure function of its inputs and seeds and produces
//! plot-ready tables.

mod metrics;
mod minimization;
mod privacy;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use metrics::{metrics, Metrics};
pub use minimization::{
    curve_from_scores, default_steps, run_minimization, valuation_scores, write_curves, Direction,
    MinimizationCurve, MinimizationParams, MinimizationSetup, Ranking,
};
pub use privacy::{
    asr_histogram, correlate, run_onion, run_privacy_correlation, self_scores, MethodCorrelation, OnionRanking,
    OnionReport, PercentileBin, PrivacyCorrelation, HIGH_ASR_THRESHOLD, PERCENTILE_BINS,
};

use crate::attribution::Method;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSweep {
    /// Distinct τ values in the order first given.
    pub taus: Vec<f64>,
    /// `(τ, curve)`: a removal curve and an addition curve per τ.
    pub curves: Vec<(f64, MinimizationCurve)>,
    pub warnings: Vec<String>,
}

impl TauSweep {
    /// Same columns as the minimization table, prefixed with `tau`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["tau"];
        header.extend(MinimizationCurve::CSV_HEADER);
        w.write_record(&header)?;
        for (tau, c) in &self.curves {
            c.write_rows(&mut w, &[format!("{tau:?}")])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// WaKA-rem removal and WaKA-add addition curves for each τ.
pub fn run_tau_sweep(setup: &MinimizationSetup, params: &MinimizationParams, tau_values: &[f64]) -> Result<TauSweep> {
    let mut taus: Vec<f64> = Vec::new();
    let mut warnings = Vec::new();
    for &t in tau_values {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Argument(format!("tau {t} is outside [0, 1]")));
        }
        if taus.contains(&t) {
            warnings.push(format!("duplicate tau {t} ignored"));
        } else {
            taus.push(t);
        }
    }
    if taus.is_empty() {
        return Err(Error::Argument("no tau values given".into()));
    }
    let mut curves = Vec::with_capacity(2 * taus.len());
    for &tau in &taus {
        let p = MinimizationParams {
            tau,
            ..params.clone()
        };
        for (method, direction) in [
            (Method::WakaRem, Direction::Removal),
            (Method::WakaAdd, Direction::Addition),
        ] {
            let c = run_minimization(setup, Ranking::Attribution(method), direction, &p)?;
            warnings.extend(c.warnings.iter().map(|w| format!("tau {tau}: {w}")));
            curves.push((tau, c));
        }
    }
    Ok(TauSweep {
        taus,
        curves,
        warnings,
    })
}

/// Written as `manifest.json` next to every pipeline's tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub library_version: String,
    /// The fully resolved configuration.
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    /// Per-stage timings and other run facts.
    pub details: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, seeds: Vec<u64>) -> Self {
        Manifest {
            command: command.to_string(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seeds,
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
            details: serde_json::Value::Null,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }
}
