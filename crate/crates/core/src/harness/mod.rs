//! Scenario files, end-to-end runs of both engines, and reports.

mod report;
mod run;
mod scenario;
mod sweep;

pub use report::{check_expectations, emit_report, Expectations, ReportFormat, RowExpectation};
pub use run::{
    run_scenario, run_scenario_detailed, AttributedVerdict, ComparisonRow, Detector, EngineRun, ScenarioRun,
};
pub use scenario::{
    AirGuardSection, AnchorSpec, BuiltScenario, BuiltTracker, HomeSpec, IosSection, Leg, Placement, Scenario,
    ScenarioError, TrackerSpec,
};
pub use sweep::{scan_parameter_sweep, ScanMode, SweepConfig, SweepMatrix};

use crate::codec::DeviceCategory;
use crate::sim::{AccessoryKind, ConnState, KeyPolicy};
use crate::time::MINUTE;

pub const POCKET: &str = include_str!("../../../../scenarios/pocket.toml");
pub const BACKPACK: &str = include_str!("../../../../scenarios/backpack.toml");
pub const CAR: &str = include_str!("../../../../scenarios/car.toml");

/// The pocket, backpack and car scenarios, in that order.
pub fn canonical_scenarios() -> Vec<Scenario> {
    [POCKET, BACKPACK, CAR].iter().map(|t| Scenario::from_toml(t).expect("bundled scenario parses")).collect()
}

/// A tag rotating its key every 15 minutes, paired seven minutes before the
/// start, placed like the scenario's first tracker.
pub fn fast_rotator(scenario: &Scenario) -> TrackerSpec {
    TrackerSpec {
        name: "FastRotator".into(),
        kind: AccessoryKind::FastRotator,
        category: DeviceCategory::Durian,
        keys: KeyPolicy::Every15Min,
        placement: scenario.trackers.first().map_or(Placement::Carried, |t| t.placement),
        paired_at_offset_s: -7 * MINUTE,
        key_seed: None,
        state: ConnState::Separated,
        emission_interval_s: None,
    }
}

/// Runs scenarios in order and lists all iOS rows before all AirGuard rows.
pub fn run_table(scenarios: &[Scenario], engines: &[Detector]) -> Result<Vec<ComparisonRow>, ScenarioError> {
    let mut rows = Vec::new();
    for s in scenarios {
        rows.extend(run_scenario(s, engines)?);
    }
    rows.sort_by_key(|r| r.engine);
    Ok(rows)
}
