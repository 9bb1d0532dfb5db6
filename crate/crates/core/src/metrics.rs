//! Fit metrics: per-state RMSE at self-report instants, reliance accuracy and
//! the set of thresholds that actually switch the predicted reliance.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::continuous::reset_predictions;
use crate::discrete::{rollout_accuracy, Confusion};
use crate::error::{Error, Result};
use crate::model::{
    reliance_of, simulate, Channel, CognitiveState, HybridModel, SimulatedTrajectory, Thresholds,
    Trajectory,
};

/// Largest RMSE per state for a model to count as a good fit.
pub const RMSE_BAR: f64 = 0.1;
/// Reliance accuracy a good fit must strictly exceed.
pub const ACCURACY_BAR: f64 = 0.8;

/// How continuous predictions are formed for RMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RmseMode {
    /// One-step chaining with a reset to the measured value at every report.
    #[default]
    Reset,
    /// Free rollout from the initial report.
    OpenLoop,
}

impl fmt::Display for RmseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RmseMode::Reset => "reset",
            RmseMode::OpenLoop => "open_loop",
        })
    }
}

impl std::str::FromStr for RmseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reset" => Ok(RmseMode::Reset),
            "open_loop" | "open-loop" => Ok(RmseMode::OpenLoop),
            other => Err(Error::InvalidInput(format!("unknown rmse mode `{other}`"))),
        }
    }
}

/// One row of the model-fit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    #[serde(rename = "rmse_T")]
    pub rmse_trust: f64,
    #[serde(rename = "rmse_R")]
    pub rmse_risk: f64,
    #[serde(rename = "rmse_W")]
    pub rmse_workload: f64,
    pub accuracy: f64,
    pub active_set: BTreeSet<Channel>,
    pub meets_bar: bool,
    pub rmse_mode: RmseMode,
    pub confusion: Confusion,
}

impl FitReport {
    pub fn rmse(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Trust => self.rmse_trust,
            Channel::Risk => self.rmse_risk,
            Channel::Workload => self.rmse_workload,
        }
    }

    pub fn rmse_all_within_bar(&self) -> bool {
        Channel::ALL.iter().all(|&c| self.rmse(c) <= RMSE_BAR)
    }

    pub fn table_header() -> String {
        format!(
            "{:>8} {:>8} {:>8} {:>8} {:>6}",
            "RMSE_T", "RMSE_R", "RMSE_W", "Acc.(%)", "θ_act"
        )
    }

    /// Fixed-width text row: three RMSEs, accuracy in percent, active set.
    pub fn table_row(&self) -> String {
        format!(
            "{:>8.4} {:>8.4} {:>8.4} {:>8.2} {:>6}",
            self.rmse_trust,
            self.rmse_risk,
            self.rmse_workload,
            100.0 * self.accuracy,
            format_active_set(&self.active_set)
        )
    }
}

/// `T,W`-style listing, or `--` when empty.
pub fn format_active_set(set: &BTreeSet<Channel>) -> String {
    if set.is_empty() {
        "--".to_string()
    } else {
        set.iter()
            .map(|c| c.symbol())
            .collect::<Vec<_>>()
            .join(",")
    }
}

pub fn meets_bar(rmse: [f64; 3], accuracy: f64) -> bool {
    rmse.iter().all(|&r| r <= RMSE_BAR) && accuracy > ACCURACY_BAR
}

/// Root mean squared error between self-reports and predictions over
/// `eval_indices`.
pub fn rmse(
    channel: Channel,
    traj: &Trajectory,
    sim: &SimulatedTrajectory,
    eval_indices: &[usize],
) -> Result<f64> {
    if eval_indices.is_empty() {
        return Err(Error::InvalidInput("no evaluation indices".into()));
    }
    let mut ss = 0.0;
    for &k in eval_indices {
        let measured = traj.self_reports().get(&k).ok_or_else(|| {
            Error::InvalidInput(format!("no self-report at evaluation index {k}"))
        })?;
        let predicted = sim
            .states
            .get(k)
            .ok_or_else(|| Error::InvalidInput(format!("prediction does not cover k={k}")))?;
        let e = measured.get(channel) - predicted.get(channel);
        ss += e * e;
    }
    Ok((ss / eval_indices.len() as f64).sqrt())
}

/// Channels whose clause toggles at the same step as the predicted reliance.
pub fn active_thresholds(sim: &SimulatedTrajectory, th: &Thresholds) -> BTreeSet<Channel> {
    let mut active = BTreeSet::new();
    for k in 1..sim.len() {
        if sim.reliance[k] == sim.reliance[k - 1] {
            continue;
        }
        for ch in Channel::ALL {
            let before = ch.fires(sim.states[k - 1].get(ch), th.get(ch));
            let after = ch.fires(sim.states[k].get(ch), th.get(ch));
            if before != after {
                active.insert(ch);
            }
        }
    }
    active
}

/// Predictions used for RMSE in the given mode, covering `k = 0..=N`.
pub fn predictions(
    traj: &Trajectory,
    model: &HybridModel,
    mode: RmseMode,
) -> Result<SimulatedTrajectory> {
    let x0 = *traj
        .self_reports()
        .get(&0)
        .ok_or(Error::MissingInitialReport)?;
    let q0 = traj.reliance()[0];
    match mode {
        RmseMode::OpenLoop => simulate(x0, q0, traj.complexity(), model),
        RmseMode::Reset => {
            model.check_finite()?;
            let per_channel = Channel::ALL.map(|ch| reset_predictions(ch, traj, &model.params(ch)));
            let states: Vec<CognitiveState> = (0..traj.len())
                .map(|k| CognitiveState {
                    trust: per_channel[0][k],
                    risk: per_channel[1][k],
                    workload: per_channel[2][k],
                })
                .collect();
            let reliance = std::iter::once(q0)
                .chain(states[1..].iter().map(|s| reliance_of(s, &model.thresholds)))
                .collect();
            Ok(SimulatedTrajectory { states, reliance })
        }
    }
}

/// Fit report over every self-report index.
pub fn report(traj: &Trajectory, model: &HybridModel, mode: RmseMode) -> Result<FitReport> {
    report_on(traj, model, mode, &traj.report_indices())
}

/// Fit report with RMSE restricted to `eval_indices`.
pub fn report_on(
    traj: &Trajectory,
    model: &HybridModel,
    mode: RmseMode,
    eval_indices: &[usize],
) -> Result<FitReport> {
    let pred = predictions(traj, model, mode)?;
    let rmse_of = |ch| rmse(ch, traj, &pred, eval_indices);
    let rmse_trust = rmse_of(Channel::Trust)?;
    let rmse_risk = rmse_of(Channel::Risk)?;
    let rmse_workload = rmse_of(Channel::Workload)?;
    let discrete = rollout_accuracy(traj, model)?;
    Ok(FitReport {
        rmse_trust,
        rmse_risk,
        rmse_workload,
        accuracy: discrete.accuracy,
        active_set: discrete.active_set,
        meets_bar: meets_bar([rmse_trust, rmse_risk, rmse_workload], discrete.accuracy),
        rmse_mode: mode,
        confusion: discrete.confusion,
    })
}
