//! Scenario catalog and Monte Carlo rejection-rate experiments.

mod experiment;
mod methods;
mod scenario;

pub use experiment::{
    emit_report, read_json_report, replicate, repetition_stream, run_experiment, write_report, ExperimentReport,
    MethodChoice, ReportFormat, ReportRow, CSV_HEADER,
};
pub use methods::{default_engines, Engines, Method, MethodConfig, MethodName, Outcome};
pub use scenario::{linear_f1_nuisances, linear_heteroscedastic_moment, Dgp, LinearNuisances, Scenario};
