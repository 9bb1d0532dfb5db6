pub mod events;
pub mod files;
pub mod synth;

pub use events::{build_trajectory, parse_events, EventKind, RawRecord};
pub use files::{
    load_cohort, load_model, load_report, load_trajectory, model_from_json, model_to_json, report_from_json,
    report_to_json, save_model, save_report, save_trajectory, signal_from_csv,
    trajectory_from_csv, trajectory_to_csv, ModelMeta, FORMAT_VERSION,
};
pub use synth::{quantize_report, synthesize, SynthSpec};
