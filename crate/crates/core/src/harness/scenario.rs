use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airguard::AirGuardParams;
use crate::codec::DeviceCategory;
use crate::geo::GeoPoint;
use crate::ios::{HomeArea, IosConfig};
use crate::sim::{
    AccessoryKind, Activity, ConnState, KeyPolicy, KeySchedule, MovementTrace, RadioConfig, RouteBuilder, ScanSchedule,
    SimAccessory, TraceSample, DRIVE_SPEED, WALK_SPEED,
};
use crate::time::{Timestamp, MINUTE};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Parse(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomeSpec {
    pub lat: f64,
    pub lon: f64,
    #[serde(default = "default_home_radius")]
    pub radius_m: f64,
}

fn default_home_radius() -> f64 {
    100.0
}

/// A named place, absolute or relative to home.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum AnchorSpec {
    Absolute { lat: f64, lon: f64 },
    FromHome { bearing: f64, distance_m: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum Leg {
    Walk {
        bearing: f64,
        distance_m: f64,
        speed: Option<f64>,
    },
    Drive {
        bearing: f64,
        distance_m: f64,
        speed: Option<f64>,
    },
    WalkTo {
        to: String,
        speed: Option<f64>,
    },
    DriveTo {
        to: String,
        speed: Option<f64>,
    },
    Stay {
        minutes: f64,
    },
    /// Stay until this many minutes after the scenario start.
    StayUntil {
        minutes: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Moves with the victim: pocket, bag, backpack.
    #[default]
    Carried,
    /// Attached to the victim's vehicle: moves only while driving and stays
    /// parked otherwise.
    Vehicle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerSpec {
    pub name: String,
    pub kind: AccessoryKind,
    pub category: DeviceCategory,
    pub keys: KeyPolicy,
    #[serde(default)]
    pub placement: Placement,
    /// Pairing instant relative to the start; anchors 15-minute key epochs.
    #[serde(default)]
    pub paired_at_offset_s: i64,
    pub key_seed: Option<u64>,
    #[serde(default = "default_state")]
    pub state: ConnState,
    pub emission_interval_s: Option<i64>,
}

fn default_state() -> ConnState {
    ConnState::Separated
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AirGuardSection {
    pub scan: ScanSchedule,
    pub params: AirGuardParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IosSection {
    pub scan: ScanSchedule,
    pub config: IosConfig,
}

impl Default for IosSection {
    fn default() -> Self {
        IosSection {
            scan: ScanSchedule { period: 2 * MINUTE, scan_duration: 8, offset: 0 },
            config: IosConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Label of the tracker position in reports; defaults to `name`.
    pub position: Option<String>,
    pub seed: u64,
    /// RFC 3339 start instant.
    pub start: String,
    #[serde(default)]
    pub tz_offset_s: i64,
    pub home: HomeSpec,
    #[serde(default)]
    pub anchors: BTreeMap<String, AnchorSpec>,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub airguard: AirGuardSection,
    #[serde(default)]
    pub ios: IosSection,
    pub victim: Vec<Leg>,
    pub trackers: Vec<TrackerSpec>,
}

/// A scenario with every reference resolved and every trace built.
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    pub position: String,
    pub start: Timestamp,
    pub home: HomeArea,
    pub victim: MovementTrace,
    pub trackers: Vec<BuiltTracker>,
    pub radio: RadioConfig,
    pub airguard: AirGuardSection,
    pub ios: IosSection,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct BuiltTracker {
    pub name: String,
    pub kind: AccessoryKind,
    pub accessory: SimAccessory,
    pub trace: MovementTrace,
    /// Seed of this tracker's radio channel.
    pub radio_seed: u64,
}

/// Per-tracker stream seed, decorrelated across indices.
pub(crate) fn sub_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn position(&self) -> &str {
        self.position.as_deref().unwrap_or(&self.name)
    }

    pub fn build(&self) -> Result<BuiltScenario, ScenarioError> {
        let start = Timestamp::parse_rfc3339(&self.start).map_err(|e| invalid("start", e.to_string()))?;
        let center = GeoPoint::new(self.home.lat, self.home.lon).map_err(|e| invalid("home", e.to_string()))?;
        if self.home.radius_m.is_nan() || self.home.radius_m <= 0.0 {
            return Err(invalid("home.radius_m", "must be positive"));
        }
        let home = HomeArea { center, radius_m: self.home.radius_m };

        let mut anchors = BTreeMap::from([("home".to_string(), center)]);
        for (name, a) in &self.anchors {
            let field = format!("anchors.{name}");
            if name == "home" {
                return Err(invalid(field, "name is reserved"));
            }
            let p = match *a {
                AnchorSpec::Absolute { lat, lon } => {
                    GeoPoint::new(lat, lon).map_err(|e| invalid(&field, e.to_string()))?
                }
                AnchorSpec::FromHome { bearing, distance_m } => {
                    if distance_m.is_nan() || distance_m < 0.0 {
                        return Err(invalid(format!("{field}.distance_m"), "must be non-negative"));
                    }
                    center.destination(bearing, distance_m)
                }
            };
            anchors.insert(name.clone(), p);
        }

        let victim = self.build_victim(start, center, &anchors)?;

        for (field, sched) in [("airguard.scan", &self.airguard.scan), ("ios.scan", &self.ios.scan)] {
            sched.validate().map_err(|e| invalid(field, e.to_string()))?;
            if sched.offset < 0 {
                return Err(invalid(format!("{field}.offset"), "must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.radio.detection_probability) {
            return Err(invalid("radio.detection_probability", "must lie in [0, 1]"));
        }
        if self.trackers.is_empty() {
            return Err(invalid("trackers", "at least one tracker is required"));
        }

        let mut names = BTreeSet::new();
        let mut vehicle: Option<MovementTrace> = None;
        let mut trackers = Vec::new();
        for (i, t) in self.trackers.iter().enumerate() {
            let field = format!("trackers[{i}]");
            if t.name.trim().is_empty() {
                return Err(invalid(format!("{field}.name"), "must not be empty"));
            }
            if !names.insert(t.name.as_str()) {
                return Err(invalid(format!("{field}.name"), format!("duplicate tracker name {:?}", t.name)));
            }
            let seed = sub_seed(self.seed, i);
            let keys =
                KeySchedule::new(t.keys, t.key_seed.unwrap_or(seed), start + t.paired_at_offset_s, self.tz_offset_s);
            let mut accessory = SimAccessory::new(t.name.clone(), t.kind, t.category, keys, t.state)
                .map_err(|e| invalid(format!("{field}.category"), e.to_string()))?;
            if let Some(secs) = t.emission_interval_s {
                accessory = accessory
                    .with_emission_interval(secs)
                    .map_err(|e| invalid(format!("{field}.emission_interval_s"), e.to_string()))?;
            }
            let trace = match t.placement {
                Placement::Carried => victim.clone(),
                Placement::Vehicle => match &vehicle {
                    Some(v) => v.clone(),
                    None => {
                        let v = vehicle_trace(&victim).map_err(|m| invalid(format!("{field}.placement"), m))?;
                        vehicle = Some(v.clone());
                        v
                    }
                },
            };
            trackers.push(BuiltTracker { name: t.name.clone(), kind: t.kind, accessory, trace, radio_seed: seed });
        }

        Ok(BuiltScenario {
            position: self.position().to_string(),
            start,
            home,
            victim,
            trackers,
            radio: self.radio,
            airguard: self.airguard,
            ios: self.ios,
            seed: self.seed,
        })
    }

    fn build_victim(
        &self,
        start: Timestamp,
        home: GeoPoint,
        anchors: &BTreeMap<String, GeoPoint>,
    ) -> Result<MovementTrace, ScenarioError> {
        if self.victim.is_empty() {
            return Err(invalid("victim", "at least one leg is required"));
        }
        let speed = |s: Option<f64>, default: f64, field: &str| match s {
            None => Ok(default),
            Some(v) if v > 0.0 && v.is_finite() => Ok(v),
            Some(_) => Err(invalid(field, "speed must be positive")),
        };
        let anchor = |name: &str, field: &str| {
            anchors.get(name).copied().ok_or_else(|| invalid(field, format!("unknown anchor {name:?}")))
        };
        let mut route = RouteBuilder::new(home, start);
        for (i, leg) in self.victim.iter().enumerate() {
            let field = format!("victim[{i}]");
            let distance_ok = |d: f64| {
                if d > 0.0 && d.is_finite() {
                    Ok(())
                } else {
                    Err(invalid(format!("{field}.distance_m"), "must be positive"))
                }
            };
            route = match *leg {
                Leg::Walk { bearing, distance_m, speed: s } => {
                    distance_ok(distance_m)?;
                    route.travel(Activity::Pedestrian, speed(s, WALK_SPEED, &field)?, bearing, distance_m)
                }
                Leg::Drive { bearing, distance_m, speed: s } => {
                    distance_ok(distance_m)?;
                    route.travel(Activity::Vehicular, speed(s, DRIVE_SPEED, &field)?, bearing, distance_m)
                }
                Leg::WalkTo { ref to, speed: s } => {
                    let p = anchor(to, &format!("{field}.to"))?;
                    route.travel_to(Activity::Pedestrian, speed(s, WALK_SPEED, &field)?, p)
                }
                Leg::DriveTo { ref to, speed: s } => {
                    let p = anchor(to, &format!("{field}.to"))?;
                    route.travel_to(Activity::Vehicular, speed(s, DRIVE_SPEED, &field)?, p)
                }
                Leg::Stay { minutes } => {
                    if minutes.is_nan() || minutes <= 0.0 {
                        return Err(invalid(format!("{field}.minutes"), "must be positive"));
                    }
                    route.stay((minutes * 60.0).round() as i64)
                }
                Leg::StayUntil { minutes } => {
                    let until = start + (minutes * 60.0).round() as i64;
                    if until <= route.now() {
                        return Err(invalid(format!("{field}.minutes"), "lies before the end of the previous leg"));
                    }
                    route.stay_until(until)
                }
            };
        }
        route.build().map_err(|e| invalid("victim", e.to_string()))
    }
}

/// Maximum gap between the parked vehicle and the start of the next drive.
const PARKING_SLACK_M: f64 = 5.0;

/// Trace of a vehicle that follows the victim on vehicular segments and
/// stays parked otherwise.
fn vehicle_trace(victim: &MovementTrace) -> Result<MovementTrace, String> {
    let samples = victim.samples();
    let driving = |i: usize| samples.get(i).is_some_and(|s| s.activity == Some(Activity::Vehicular));
    let first_drive = (0..samples.len()).find(|&i| driving(i)).ok_or("vehicle placement needs a drive leg")?;
    let mut parked = samples[first_drive].point;
    let mut out = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let moving = driving(i) || (i > 0 && driving(i - 1));
        if driving(i) && !(i > 0 && driving(i - 1)) && parked.haversine(&s.point) > PARKING_SLACK_M {
            return Err(format!(
                "drive at t={} starts {:.0} m from the parked vehicle",
                s.t,
                parked.haversine(&s.point)
            ));
        }
        let point = if moving { s.point } else { parked };
        if moving {
            parked = s.point;
        }
        let activity = if driving(i) { Activity::Vehicular } else { Activity::Static };
        out.push(TraceSample {
            t: s.t,
            point,
            activity: Some(activity),
            speed: if driving(i) { s.speed } else { Some(0.0) },
        });
    }
    MovementTrace::new(out).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
seed = 1
start = "2021-12-15T10:00:00Z"
home = { lat = 49.8728, lon = 8.6512 }
victim = [ { type = "walk", bearing = 90.0, distance_m = 600.0 } ]
[[trackers]]
name = "tag"
kind = "accessory"
category = "durian"
keys = { policy = "static" }
"#;

    #[test]
    fn minimal_scenario_builds() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        let b = s.build().unwrap();
        assert_eq!(b.position, "t");
        assert_eq!(b.victim.end().unwrap() - b.start, 500);
        assert_eq!(b.home.radius_m, 100.0);
        assert_eq!(b.ios.scan.period, 120);
        assert_eq!(b.airguard.scan.period, 900);
        assert_eq!(b.trackers[0].accessory.conn_state, ConnState::Separated);
    }

    #[test]
    fn missing_seed_is_a_parse_error() {
        let text = MINIMAL.replace("seed = 1\n", "");
        let err = Scenario::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn unknown_kind_names_the_field() {
        let text = MINIMAL.replace("\"accessory\"", "\"skateboard\"");
        let err = Scenario::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("skateboard"), "{err}");
    }

    #[test]
    fn invalid_fields_are_named() {
        let cases = [
            (MINIMAL.replace("\"durian\"", "\"other\""), "trackers[0].category"),
            (MINIMAL.replace("distance_m = 600.0", "distance_m = -1.0"), "victim[0].distance_m"),
            (MINIMAL.replace("2021-12-15T10:00:00Z", "yesterday"), "start"),
            (
                MINIMAL.replace(
                    "bearing = 90.0, distance_m = 600.0 }",
                    "bearing = 90.0, distance_m = 600.0 }, { type = \"walk_to\", to = \"office\" }",
                ),
                "victim[1].to",
            ),
            (
                MINIMAL.replace(
                    "keys = { policy = \"static\" }",
                    "keys = { policy = \"static\" }\nplacement = \"vehicle\"",
                ),
                "trackers[0].placement",
            ),
        ];
        for (text, field) in cases {
            let err = Scenario::from_toml(&text).unwrap().build().unwrap_err();
            assert!(matches!(&err, ScenarioError::Invalid { field: f, .. } if f == field), "{field}: {err}");
        }
    }

    #[test]
    fn vehicle_stays_parked_between_drives() {
        let text = r#"
name = "v"
seed = 1
start = "2021-12-15T10:00:00Z"
home = { lat = 49.8728, lon = 8.6512 }
anchors = { parking = { bearing = 90.0, distance_m = 250.0 } }
victim = [
  { type = "walk_to", to = "parking" },
  { type = "drive", bearing = 0.0, distance_m = 6000.0 },
  { type = "walk", bearing = 90.0, distance_m = 200.0 },
  { type = "stay", minutes = 30.0 },
  { type = "walk", bearing = 270.0, distance_m = 200.0 },
  { type = "drive_to", to = "parking" },
]
[[trackers]]
name = "tag"
kind = "accessory"
category = "durian"
keys = { policy = "static" }
placement = "vehicle"
"#;
        let b = Scenario::from_toml(text).unwrap().build().unwrap();
        let car = &b.trackers[0].trace;
        let parking = b.home.center.destination(90.0, 250.0);
        assert!(car.position_at(b.start).unwrap().haversine(&parking) < 1e-6);
        let t_stay = b.start + 208 + 600 + 167 + 600;
        let victim_far = b.victim.position_at(t_stay).unwrap().haversine(&car.position_at(t_stay).unwrap());
        assert!((victim_far - 200.0).abs() < 1.0, "{victim_far}");
        let end = b.victim.end().unwrap();
        assert!(car.position_at(end).unwrap().haversine(&parking) < 1e-6);
    }
}
