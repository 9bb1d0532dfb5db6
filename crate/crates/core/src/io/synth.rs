//! Synthetic ground-truth datasets for recovery testing.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{simulate, CognitiveState, HybridModel, Trajectory};

/// Self-report resolution on the 0–1 scale (increments of 5 out of 100).
pub const REPORT_GRID: f64 = 0.05;

/// Rounds a self-report value to the reporting grid.
pub fn quantize_report(v: f64) -> f64 {
    (v / REPORT_GRID).round() * REPORT_GRID
}

fn default_sample_time() -> f64 {
    Trajectory::DEFAULT_SAMPLE_TIME
}

/// Recipe for one synthetic participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub model: HybridModel,
    /// Final sample index `N`.
    pub horizon: usize,
    /// Sorted indices in `[1, N]` at which `d` toggles; `d(0) = 0`.
    pub d_switch_indices: Vec<usize>,
    pub report_period: usize,
    pub quantize: bool,
    pub seed: u64,
    pub initial: CognitiveState,
    pub initial_q: bool,
    /// Standard deviation of additive Gaussian report noise (before quantization).
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default = "default_sample_time")]
    pub sample_time: f64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        if self.report_period < 1 {
            return Err(Error::InvalidInput("report_period must be at least 1".into()));
        }
        if !self
            .d_switch_indices
            .windows(2)
            .all(|w| w[0] < w[1])
        {
            return Err(Error::InvalidInput(
                "d_switch_indices must be strictly increasing".into(),
            ));
        }
        if let Some(&k) = self
            .d_switch_indices
            .iter()
            .find(|&&k| k < 1 || k > self.horizon)
        {
            return Err(Error::InvalidInput(format!(
                "switch index {k} outside [1, {}]",
                self.horizon
            )));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::InvalidInput("noise_sd must be non-negative".into()));
        }
        self.initial.check_finite()?;
        self.model.check_finite()
    }

    /// The binary complexity signal `d(0..=N)`.
    pub fn complexity(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.horizon + 1);
        let mut level = 0.0;
        let mut switches = self.d_switch_indices.iter().peekable();
        for k in 0..=self.horizon {
            if switches.next_if(|&&s| s == k).is_some() {
                level = 1.0 - level;
            }
            d.push(level);
        }
        d
    }
}

/// Simulates the spec's model and returns the observable trajectory together
/// with the generating model.
pub fn synthesize(spec: &SynthSpec) -> Result<(Trajectory, HybridModel)> {
    spec.validate()?;
    let d = spec.complexity();
    let sim = simulate(spec.initial, spec.initial_q, &d, &spec.model)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::InvalidInput(e.to_string()))?;

    let mut reports = BTreeMap::new();
    for k in (0..=spec.horizon).step_by(spec.report_period) {
        let mut s = sim.states[k];
        if spec.noise_sd > 0.0 {
            s.trust += noise.sample(&mut rng);
            s.risk += noise.sample(&mut rng);
            s.workload += noise.sample(&mut rng);
        }
        if spec.quantize {
            s.trust = quantize_report(s.trust);
            s.risk = quantize_report(s.risk);
            s.workload = quantize_report(s.workload);
        }
        reports.insert(k, s);
    }

    let traj = Trajectory::new(spec.sample_time, d, sim.reliance, reports)?;
    Ok((traj, spec.model))
}
