//! Domain types and forward simulation of the hybrid model.
//!
//! Each cognitive state follows its own scalar affine recursion
//! `x(k+1) = a x(k) + b d(k) + c` driven by the task-complexity signal `d`.
//! Reliance is a discrete mode: automation is engaged whenever trust is
//! above its threshold, risk is below its threshold, or workload is above
//! its threshold.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the three continuous cognitive states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "T")]
    Trust,
    #[serde(rename = "R")]
    Risk,
    #[serde(rename = "W")]
    Workload,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Trust, Channel::Risk, Channel::Workload];

    pub fn symbol(self) -> &'static str {
        match self {
            Channel::Trust => "T",
            Channel::Risk => "R",
            Channel::Workload => "W",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Channel::Trust => 0,
            Channel::Risk => 1,
            Channel::Workload => 2,
        }
    }

    /// Whether the reliance predicate fires when the state is *above* the
    /// threshold (trust, workload) or *below* it (risk).
    pub fn fires_above(self) -> bool {
        !matches!(self, Channel::Risk)
    }

    /// Predicate clause of the reliance switching rule for this channel.
    #[inline]
    pub fn fires(self, value: f64, threshold: f64) -> bool {
        if self.fires_above() {
            value > threshold
        } else {
            value < threshold
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Continuous state vector `[T, R, W]` on the 0–1 self-report scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CognitiveState {
    pub trust: f64,
    pub risk: f64,
    pub workload: f64,
}

impl CognitiveState {
    pub fn new(trust: f64, risk: f64, workload: f64) -> Result<Self> {
        let s = Self {
            trust,
            risk,
            workload,
        };
        s.check_finite()?;
        Ok(s)
    }

    pub fn splat(v: f64) -> Self {
        Self {
            trust: v,
            risk: v,
            workload: v,
        }
    }

    pub fn get(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Trust => self.trust,
            Channel::Risk => self.risk,
            Channel::Workload => self.workload,
        }
    }

    pub fn set(&mut self, channel: Channel, value: f64) {
        match channel {
            Channel::Trust => self.trust = value,
            Channel::Risk => self.risk = value,
            Channel::Workload => self.workload = value,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.trust.is_finite() && self.risk.is_finite() && self.workload.is_finite()
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("cognitive state"))
        }
    }
}

/// Affine coefficients of one state recursion: inertia `a`, input gain `b`,
/// per-step drift `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl AffineParams {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    #[inline]
    pub fn step(&self, x: f64, d: f64) -> f64 {
        self.a * x + self.b * d + self.c
    }

    /// Equilibrium under a constant input, `(b d + c) / (1 - a)`.
    pub fn fixed_point(&self, d: f64) -> Option<f64> {
        (self.a != 1.0).then(|| (self.b * d + self.c) / (1.0 - self.a))
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }

    pub fn is_stable(&self) -> bool {
        self.a.abs() < 1.0
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }
}

/// Reliance thresholds `(θ_T, θ_R, θ_W)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    #[serde(rename = "T")]
    pub trust: f64,
    #[serde(rename = "R")]
    pub risk: f64,
    #[serde(rename = "W")]
    pub workload: f64,
}

impl Thresholds {
    pub const fn new(trust: f64, risk: f64, workload: f64) -> Self {
        Self {
            trust,
            risk,
            workload,
        }
    }

    pub fn get(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Trust => self.trust,
            Channel::Risk => self.risk,
            Channel::Workload => self.workload,
        }
    }

    pub fn set(&mut self, channel: Channel, value: f64) {
        match channel {
            Channel::Trust => self.trust = value,
            Channel::Risk => self.risk = value,
            Channel::Workload => self.workload = value,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.trust, self.risk, self.workload]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// The full 12-parameter hybrid model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub trust: AffineParams,
    pub risk: AffineParams,
    pub workload: AffineParams,
    pub thresholds: Thresholds,
}

impl HybridModel {
    pub const PARAMETER_COUNT: usize = 12;

    pub fn new(
        trust: AffineParams,
        risk: AffineParams,
        workload: AffineParams,
        thresholds: Thresholds,
    ) -> Self {
        Self {
            trust,
            risk,
            workload,
            thresholds,
        }
    }

    /// Model with the same dynamics for all three states.
    pub fn uniform(params: AffineParams, thresholds: Thresholds) -> Self {
        Self::new(params, params, params, thresholds)
    }

    pub fn params(&self, channel: Channel) -> AffineParams {
        match channel {
            Channel::Trust => self.trust,
            Channel::Risk => self.risk,
            Channel::Workload => self.workload,
        }
    }

    pub fn params_mut(&mut self, channel: Channel) -> &mut AffineParams {
        match channel {
            Channel::Trust => &mut self.trust,
            Channel::Risk => &mut self.risk,
            Channel::Workload => &mut self.workload,
        }
    }

    /// Flattened parameters in the order `a_T b_T c_T a_R b_R c_R a_W b_W c_W θ_T θ_R θ_W`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::PARAMETER_COUNT);
        for ch in Channel::ALL {
            v.extend(self.params(ch).to_array());
        }
        v.extend(self.thresholds.to_array());
        v
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|v| v.is_finite())
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("model parameters"))
        }
    }
}

/// Observed data for one participant: dense complexity and reliance signals
/// plus sparse self-reports keyed by sample index.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    sample_time: f64,
    complexity: Vec<f64>,
    reliance: Vec<bool>,
    self_reports: BTreeMap<usize, CognitiveState>,
}

impl Trajectory {
    pub const DEFAULT_SAMPLE_TIME: f64 = 1.0;

    pub fn new(
        sample_time: f64,
        complexity: Vec<f64>,
        reliance: Vec<bool>,
        self_reports: BTreeMap<usize, CognitiveState>,
    ) -> Result<Self> {
        if !(sample_time.is_finite() && sample_time > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample time must be positive, got {sample_time}"
            )));
        }
        if complexity.len() != reliance.len() {
            return Err(Error::InvalidInput(format!(
                "complexity has {} samples but reliance has {}",
                complexity.len(),
                reliance.len()
            )));
        }
        if complexity.len() < 2 {
            return Err(Error::InvalidInput(
                "trajectory needs at least two samples".into(),
            ));
        }
        if let Some(k) = complexity.iter().position(|&d| d != 0.0 && d != 1.0) {
            return Err(Error::InvalidInput(format!(
                "complexity d({k}) = {} is not binary",
                complexity[k]
            )));
        }
        if self_reports.is_empty() {
            return Err(Error::InsufficientReports {
                needed: 1,
                found: 0,
            });
        }
        let n = complexity.len() - 1;
        for (&k, state) in &self_reports {
            if k > n {
                return Err(Error::InvalidInput(format!(
                    "self-report index {k} lies beyond N = {n}"
                )));
            }
            state.check_finite()?;
        }
        Ok(Self {
            sample_time,
            complexity,
            reliance,
            self_reports,
        })
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn complexity(&self) -> &[f64] {
        &self.complexity
    }

    pub fn reliance(&self) -> &[bool] {
        &self.reliance
    }

    pub fn self_reports(&self) -> &BTreeMap<usize, CognitiveState> {
        &self.self_reports
    }

    /// Final sample index `N`.
    pub fn horizon(&self) -> usize {
        self.complexity.len() - 1
    }

    pub fn len(&self) -> usize {
        self.complexity.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn report_indices(&self) -> Vec<usize> {
        self.self_reports.keys().copied().collect()
    }

    pub fn report_count(&self) -> usize {
        self.self_reports.len()
    }

    pub fn first_report(&self) -> (usize, CognitiveState) {
        let (&k, &s) = self
            .self_reports
            .iter()
            .next()
            .expect("trajectory always holds a self-report");
        (k, s)
    }

    /// Self-report series for one channel as `(k, value)` pairs.
    pub fn channel_reports(&self, channel: Channel) -> Vec<(usize, f64)> {
        self.self_reports
            .iter()
            .map(|(&k, s)| (k, s.get(channel)))
            .collect()
    }

    /// Sub-trajectory over `start..=end`, re-indexed so `start` becomes k=0.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.horizon() {
            return Err(Error::InvalidInput(format!(
                "window {start}..={end} is not inside 0..={}",
                self.horizon()
            )));
        }
        let reports = self
            .self_reports
            .range(start..=end)
            .map(|(&k, &s)| (k - start, s))
            .collect();
        Self::new(
            self.sample_time,
            self.complexity[start..=end].to_vec(),
            self.reliance[start..=end].to_vec(),
            reports,
        )
    }

    /// Drops samples before the first self-report so that it sits at k=0.
    pub fn anchored(&self) -> Result<Self> {
        let (k0, _) = self.first_report();
        if k0 == 0 {
            Ok(self.clone())
        } else {
            self.window(k0, self.horizon())
        }
    }

    /// Same data with one channel's self-reports swapped for another's.
    pub fn with_channels_permuted(&self, perm: [Channel; 3]) -> Self {
        let mut out = self.clone();
        for state in out.self_reports.values_mut() {
            let orig = *state;
            for (dst, src) in Channel::ALL.into_iter().zip(perm) {
                state.set(dst, orig.get(src));
            }
        }
        out
    }
}

/// Open-loop rollout of the hybrid model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTrajectory {
    pub states: Vec<CognitiveState>,
    pub reliance: Vec<bool>,
}

impl SimulatedTrajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn channel(&self, channel: Channel) -> Vec<f64> {
        self.states.iter().map(|s| s.get(channel)).collect()
    }
}

/// Advances every state one sample. States are not clamped to `[0, 1]`.
pub fn step_state(x: &CognitiveState, d: f64, model: &HybridModel) -> Result<CognitiveState> {
    x.check_finite()?;
    if !d.is_finite() {
        return Err(Error::NonFinite("complexity input"));
    }
    Ok(CognitiveState {
        trust: model.trust.step(x.trust, d),
        risk: model.risk.step(x.risk, d),
        workload: model.workload.step(x.workload, d),
    })
}

/// Reliance switching rule; ties at a threshold do not engage.
pub fn reliance_of(x: &CognitiveState, th: &Thresholds) -> bool {
    x.trust > th.trust || x.risk < th.risk || x.workload > th.workload
}

/// Rolls the model forward from `initial` without any measurement resets.
pub fn simulate(
    initial: CognitiveState,
    initial_q: bool,
    complexity: &[f64],
    model: &HybridModel,
) -> Result<SimulatedTrajectory> {
    if complexity.is_empty() {
        return Err(Error::InvalidInput("empty complexity sequence".into()));
    }
    initial.check_finite()?;
    model.check_finite()?;
    let mut states = Vec::with_capacity(complexity.len());
    let mut reliance = Vec::with_capacity(complexity.len());
    states.push(initial);
    reliance.push(initial_q);
    let mut x = initial;
    for &d in &complexity[..complexity.len() - 1] {
        x = step_state(&x, d, model)?;
        states.push(x);
        reliance.push(reliance_of(&x, &model.thresholds));
    }
    Ok(SimulatedTrajectory { states, reliance })
}
