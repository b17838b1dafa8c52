use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::scenario::{BuiltScenario, Scenario, ScenarioError};
use crate::airguard::AirGuard;
use crate::codec::BleAddress;
use crate::ios::{IosEngine, TaEvent, TaEventKind, UserActivity, VehicularState};
use crate::record::DetectorVerdict;
use crate::sim::{run_radio_sim_labeled, AccessoryKind, Activity, LabeledSighting, ScanSchedule, ScanWindow};
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Detector {
    #[serde(rename = "ios")]
    Ios,
    #[serde(rename = "airguard")]
    AirGuard,
}

impl Detector {
    pub const ALL: [Detector; 2] = [Detector::Ios, Detector::AirGuard];

    pub fn label(self) -> &'static str {
        match self {
            Detector::Ios => "iOS",
            Detector::AirGuard => "AirGuard",
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Detector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ios" => Ok(Detector::Ios),
            "airguard" => Ok(Detector::AirGuard),
            other => Err(format!("unknown engine {other:?}")),
        }
    }
}

/// One line of the detection-results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub position: String,
    pub tracker: String,
    pub kind: AccessoryKind,
    pub engine: Detector,
    /// Seconds from the scenario start to the first notification.
    pub time_to_notification: Option<i64>,
    /// Scans in which the engine received the tracker, up to and including
    /// the notifying one.
    pub locations_with_tracker_until_notification: Option<u32>,
}

/// Verdict attributed to the tracker that caused it.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributedVerdict {
    pub tracker: usize,
    pub verdict: DetectorVerdict,
    /// When the iOS engine first staged the device.
    pub staged_at: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineRun {
    pub engine: Detector,
    pub sightings: Vec<LabeledSighting>,
    pub verdicts: Vec<AttributedVerdict>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: BuiltScenario,
    pub runs: Vec<EngineRun>,
    pub rows: Vec<ComparisonRow>,
}

pub fn run_scenario(scenario: &Scenario, engines: &[Detector]) -> Result<Vec<ComparisonRow>, ScenarioError> {
    Ok(run_scenario_detailed(scenario, engines)?.rows)
}

pub fn run_scenario_detailed(scenario: &Scenario, engines: &[Detector]) -> Result<ScenarioRun, ScenarioError> {
    let built = scenario.build()?;
    let mut runs = Vec::new();
    for &engine in Detector::ALL.iter().filter(|d| engines.contains(d)) {
        let schedule = match engine {
            Detector::Ios => built.ios.scan,
            Detector::AirGuard => built.airguard.scan,
        };
        let sightings = simulate(&built, &schedule)?;
        let windows = windows(&built, &schedule);
        let verdicts = match engine {
            Detector::AirGuard => drive_airguard(&built, &windows, &sightings),
            Detector::Ios => drive_ios(&built, &windows, &sightings),
        };
        runs.push(EngineRun { engine, sightings, verdicts });
    }
    let rows = runs.iter().flat_map(|r| rows_for(&built, r)).collect();
    Ok(ScenarioRun { scenario: built, runs, rows })
}

/// Every tracker gets its own radio channel so adding one leaves the
/// others' draws untouched.
fn simulate(built: &BuiltScenario, schedule: &ScanSchedule) -> Result<Vec<LabeledSighting>, ScenarioError> {
    let mut out = Vec::new();
    for (i, t) in built.trackers.iter().enumerate() {
        let got = run_radio_sim_labeled(
            std::slice::from_ref(&t.accessory),
            &t.trace,
            &built.victim,
            schedule,
            &built.radio,
            t.radio_seed,
        )
        .map_err(|e| ScenarioError::Invalid { field: format!("trackers[{i}]"), message: e.to_string() })?;
        out.extend(got.into_iter().map(|s| LabeledSighting { accessory: i, ..s }));
    }
    out.sort_by_key(|s| (s.record.at, s.accessory));
    Ok(out)
}

fn windows(built: &BuiltScenario, schedule: &ScanSchedule) -> Vec<ScanWindow> {
    let (from, to) = (built.victim.start().expect("built trace"), built.victim.end().expect("built trace"));
    schedule.windows(from, to)
}

fn by_window(sightings: &[LabeledSighting]) -> BTreeMap<usize, Vec<&LabeledSighting>> {
    let mut map: BTreeMap<usize, Vec<&LabeledSighting>> = BTreeMap::new();
    for s in sightings {
        map.entry(s.window.index).or_default().push(s);
    }
    map
}

fn attribute(verdicts: Vec<DetectorVerdict>, owners: &BTreeMap<BleAddress, usize>) -> Vec<AttributedVerdict> {
    verdicts
        .into_iter()
        .filter_map(|v| {
            owners.get(&v.address).map(|&tracker| AttributedVerdict { tracker, verdict: v, staged_at: None })
        })
        .collect()
}

fn owners(sightings: &[LabeledSighting]) -> BTreeMap<BleAddress, usize> {
    sightings.iter().map(|s| (s.record.address, s.accessory)).collect()
}

fn drive_airguard(
    built: &BuiltScenario,
    windows: &[ScanWindow],
    sightings: &[LabeledSighting],
) -> Vec<AttributedVerdict> {
    let mut ag = AirGuard::new(built.airguard.params);
    let grouped = by_window(sightings);
    let mut verdicts = Vec::new();
    for w in windows {
        let scan: Vec<_> = grouped.get(&w.index).into_iter().flatten().map(|s| s.record.clone()).collect();
        verdicts.extend(ag.on_scan(&scan, w.end));
    }
    attribute(verdicts, &owners(sightings))
}

fn user_activity(a: Option<Activity>) -> UserActivity {
    match a {
        Some(Activity::Static) => UserActivity::Static,
        Some(Activity::Pedestrian) => UserActivity::Pedestrian,
        Some(Activity::Vehicular) => UserActivity::Vehicular,
        None => UserActivity::Unknown,
    }
}

fn drive_ios(built: &BuiltScenario, windows: &[ScanWindow], sightings: &[LabeledSighting]) -> Vec<AttributedVerdict> {
    let mut config = built.ios.config;
    config.home = Some(built.home);
    config.general.run_period = built.ios.scan.period;
    let mut engine = IosEngine::new(config);
    let grouped = by_window(sightings);
    let end = built.victim.end().expect("built trace");
    let mut verdicts = Vec::new();
    for w in windows {
        let tick: Timestamp = w.end.min(end);
        let activity = user_activity(built.victim.activity_at(tick));
        let vehicular =
            if activity == UserActivity::Vehicular { VehicularState::Vehicular } else { VehicularState::NonVehicular };
        engine.push(TaEvent::new(tick, TaEventKind::UserActivity(activity)));
        engine.push(TaEvent::new(tick, TaEventKind::VehicularState(vehicular)));
        if let Some(p) = built.victim.position_at(tick) {
            engine.push(TaEvent::new(tick, TaEventKind::LocationUpdate(p)));
        }
        for s in grouped.get(&w.index).into_iter().flatten() {
            engine.push(TaEvent::new(s.record.at, TaEventKind::AdvertisementSeen(s.record.clone())));
        }
        verdicts.extend(engine.run(tick));
    }
    let mut out = attribute(verdicts, &owners(sightings));
    for v in &mut out {
        v.staged_at = engine.notifications().iter().find(|n| n.address == v.verdict.address).map(|n| n.staged_at);
    }
    out
}

fn rows_for(built: &BuiltScenario, run: &EngineRun) -> Vec<ComparisonRow> {
    built
        .trackers
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let first = run.verdicts.iter().filter(|v| v.tracker == i).map(|v| v.verdict.notified_at).min();
            let locations = first.map(|at| {
                run.sightings
                    .iter()
                    .filter(|s| s.accessory == i && s.record.is_separated() && s.record.at <= at)
                    .map(|s| s.window.index)
                    .collect::<BTreeSet<_>>()
                    .len() as u32
            });
            ComparisonRow {
                position: built.position.clone(),
                tracker: t.name.clone(),
                kind: t.kind,
                engine: run.engine,
                time_to_notification: first.map(|at| at - built.start),
                locations_with_tracker_until_notification: locations,
            }
        })
        .collect()
}
