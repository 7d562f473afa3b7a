//! Explanation primitives. Each is a pure function of a model snapshot and a
//! query state, except the drift monitor, which accumulates.

pub mod attractor;
pub mod attribution;
pub mod certify;
pub mod cross_layer;
pub mod drift;
pub mod global;
pub mod posterior;

pub use attractor::{p8_diagnostics, p9_counterfactual, AttractorDiagnostics, Counterfactual};
pub use attribution::{attribute, support_bars, AttributionVector, Bar};
pub use certify::{apply_moves, optimal_perturbation, p14_certified_radius, Certificate, Move};
pub use cross_layer::{p16_cross_layer, AttributionNode, CrossLayer, DeepModel, LeafTotals};
pub use drift::{run_monitor, Alarm, Direction, DriftMonitor, DriftSettings, LiveTrace, MonitorRun};
pub use global::{
    feature_usage, p4_p5_importance, p6_receptive_field, p7_tuning_curve, Connection, ReceptiveField,
    TuningCurve,
};
pub use posterior::{p12_surprise, p15_margin, p3_posterior, HypercolumnPosterior, Surprise};
