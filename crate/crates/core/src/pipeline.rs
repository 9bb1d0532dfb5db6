//! End-to-end identification and split-half validation.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::continuous::{fit_all, ContinuousFit, MIN_REPORTS};
use crate::discrete::{fit_thresholds_with, GaConfig, ThresholdFit};
use crate::error::{Error, Result};
use crate::metrics::{report, report_on, FitReport, RmseMode};
use crate::model::{Channel, HybridModel, Trajectory};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SPLIT: f64 = 0.5;
/// A training channel whose self-reports span less than this is flagged.
pub const LOW_EXCITATION_RANGE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifyOptions {
    pub seed: u64,
    pub rmse_mode: RmseMode,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            rmse_mode: RmseMode::Reset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Identification {
    pub model: HybridModel,
    pub report: FitReport,
    pub continuous: [ContinuousFit; 3],
    pub discrete: ThresholdFit,
}

impl Identification {
    pub fn converged(&self) -> bool {
        self.continuous.iter().all(|f| f.converged)
    }
}

/// Fits the continuous dynamics, then the thresholds, and scores the result.
/// Samples before the first self-report are dropped.
pub fn identify(traj: &Trajectory, opts: &IdentifyOptions) -> Result<Identification> {
    let traj = traj.anchored()?;
    let [t, r, w] = fit_all(&traj);
    let continuous = [t?, r?, w?];
    let params = continuous.map(|f| f.params);
    let discrete = fit_thresholds_with(&traj, params, &GaConfig::with_seed(opts.seed))?;
    let model = HybridModel::new(params[0], params[1], params[2], discrete.thresholds);
    let report = report(&traj, &model, opts.rmse_mode)?;
    Ok(Identification {
        model,
        report,
        continuous,
        discrete,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Validation {
    /// Sample index (after anchoring) of the boundary self-report.
    pub boundary: usize,
    pub training_reports: usize,
    pub held_out_reports: usize,
    pub model: HybridModel,
    /// In-sample fit on the training part.
    pub training: FitReport,
    /// Held-out metrics; the seeding boundary report is not scored.
    pub held_out: FitReport,
    pub low_excitation: BTreeSet<Channel>,
    pub converged: bool,
}

/// Splits at the `⌈fraction·|K_SR|⌉`-th self-report, identifies on the part up
/// to and including it, and simulates the remainder from that report.
pub fn validate_split(
    traj: &Trajectory,
    fraction: f64,
    opts: &IdentifyOptions,
    held_out_mode: RmseMode,
) -> Result<Validation> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "split fraction {fraction} is not in (0, 1)"
        )));
    }
    let traj = traj.anchored()?;
    let indices = traj.report_indices();
    let total = indices.len();
    let training_reports = ((fraction * total as f64).ceil() as usize).clamp(1, total);
    let held_out_reports = total - training_reports;
    let short = training_reports.min(held_out_reports);
    if short < MIN_REPORTS {
        return Err(Error::InsufficientReports {
            needed: MIN_REPORTS,
            found: short,
        });
    }
    let boundary = indices[training_reports - 1];

    // The held-out part is cut off before anything is fitted.
    let training_traj = traj.window(0, boundary)?;
    let held_traj = traj.window(boundary, traj.horizon())?;

    let fit = identify(&training_traj, opts)?;
    let low_excitation = Channel::ALL
        .into_iter()
        .filter(|&ch| {
            let v = training_traj.channel_reports(ch);
            let lo = v.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let hi = v.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            hi - lo < LOW_EXCITATION_RANGE
        })
        .collect();
    let eval: Vec<usize> = held_traj.report_indices().into_iter().filter(|&k| k > 0).collect();
    let held_out = report_on(&held_traj, &fit.model, held_out_mode, &eval)?;
    Ok(Validation {
        boundary,
        training_reports,
        held_out_reports,
        model: fit.model,
        converged: fit.converged(),
        training: fit.report,
        held_out,
        low_excitation,
    })
}
