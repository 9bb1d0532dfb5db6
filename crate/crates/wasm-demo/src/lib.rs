//! Browser bindings: simulate a model, synthesize and re-identify a
//! participant, and estimate a parameter density. Inputs and outputs are JSON
//! strings so the page needs no glue beyond `JSON.parse`.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use hybrid_id::io::{synthesize, SynthSpec};
use hybrid_id::kde::{kde_auto, VIOLIN_POINTS};
use hybrid_id::metrics::FitReport;
use hybrid_id::pipeline::{identify, IdentifyOptions};
use hybrid_id::{simulate, Channel, CognitiveState, HybridModel, SimulatedTrajectory};

#[derive(Deserialize)]
struct SimulateRequest {
    model: HybridModel,
    complexity: Vec<f64>,
    initial: CognitiveState,
    #[serde(default)]
    initial_q: bool,
}

#[derive(Serialize)]
struct Series {
    #[serde(rename = "T")]
    trust: Vec<f64>,
    #[serde(rename = "R")]
    risk: Vec<f64>,
    #[serde(rename = "W")]
    workload: Vec<f64>,
    q: Vec<u8>,
}

impl From<&SimulatedTrajectory> for Series {
    fn from(sim: &SimulatedTrajectory) -> Self {
        Series {
            trust: sim.channel(Channel::Trust),
            risk: sim.channel(Channel::Risk),
            workload: sim.channel(Channel::Workload),
            q: sim.reliance.iter().map(|&b| u8::from(b)).collect(),
        }
    }
}

#[derive(Serialize)]
struct Reports {
    k: Vec<usize>,
    #[serde(rename = "T")]
    trust: Vec<f64>,
    #[serde(rename = "R")]
    risk: Vec<f64>,
    #[serde(rename = "W")]
    workload: Vec<f64>,
}

#[derive(Serialize)]
struct IdentifyResponse {
    truth: HybridModel,
    fitted: HybridModel,
    report: FitReport,
    complexity: Vec<f64>,
    observed_q: Vec<u8>,
    reports: Reports,
    prediction: Series,
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("response serializes")
}

fn parse<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| format!("bad request: {e}"))
}

/// `{model, complexity, initial, initial_q}` to `{T, R, W, q}`.
#[wasm_bindgen]
pub fn simulate_json(request: &str) -> Result<String, String> {
    let req: SimulateRequest = parse(request)?;
    let sim = simulate(req.initial, req.initial_q, &req.complexity, &req.model)
        .map_err(|e| e.to_string())?;
    Ok(to_json(&Series::from(&sim)))
}

/// Synthesizes a trajectory from a recipe, identifies a model from it and
/// returns both models, the fit report and an open-loop prediction.
#[wasm_bindgen]
pub fn synth_identify_json(spec: &str, seed: u32) -> Result<String, String> {
    let spec: SynthSpec = parse(spec)?;
    let (traj, truth) = synthesize(&spec).map_err(|e| e.to_string())?;
    let opts = IdentifyOptions {
        seed: u64::from(seed),
        ..IdentifyOptions::default()
    };
    let id = identify(&traj, &opts).map_err(|e| e.to_string())?;
    let (_, x0) = traj.first_report();
    let sim = simulate(x0, traj.reliance()[0], traj.complexity(), &id.model)
        .map_err(|e| e.to_string())?;
    let reports = traj.self_reports();
    let response = IdentifyResponse {
        truth,
        fitted: id.model,
        report: id.report,
        complexity: traj.complexity().to_vec(),
        observed_q: traj.reliance().iter().map(|&b| u8::from(b)).collect(),
        reports: Reports {
            k: reports.keys().copied().collect(),
            trust: reports.values().map(|s| s.trust).collect(),
            risk: reports.values().map(|s| s.risk).collect(),
            workload: reports.values().map(|s| s.workload).collect(),
        },
        prediction: Series::from(&sim),
    };
    Ok(to_json(&response))
}

/// Density of whitespace- or comma-separated samples on the violin grid.
#[wasm_bindgen]
pub fn kde_json(samples: &str) -> Result<String, String> {
    let values = samples
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: `{s}`")))
        .collect::<Result<Vec<_>, _>>()?;
    let curve = kde_auto(&values, VIOLIN_POINTS).map_err(|e| e.to_string())?;
    Ok(to_json(&curve))
}
