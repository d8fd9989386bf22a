//! Scenario-driven simulation runs, metrics and chain audits.

mod audit;
mod driver;
mod metrics;
mod scenario;

pub use audit::{replay_audit, replay_audit_file, AuditError, AuditReport, TokenSnapshot};
pub use driver::{run_simulation, SimError, SimulationRun};
pub use metrics::{
    write_csv, ChainMetrics, ChainMetricsBuilder, MetricsSummary, NetworkMetrics, RoundMetrics,
    CSV_HEADER,
};
pub use scenario::{
    load_scenario, Action, Constants, Jitter, ParticipantRole, ParticipantSpec, ScenarioConfig,
    ScenarioError, ScriptEntry, ValidatorRole, ValidatorSpec,
};
