use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DeviceMetrics, Suspicion, TaStore};
use crate::codec::{BleAddress, DeviceCategory};
use crate::geo::GeoPoint;
use crate::record::Engine;
use crate::time::{Timestamp, MINUTE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisitParams {
    /// A dwell stays within this distance of its first fix.
    pub radius_m: f64,
    /// Dwell time after which a stay becomes a visit.
    pub min_dwell: i64,
}

impl Default for VisitParams {
    fn default() -> Self {
        VisitParams { radius_m: 50.0, min_dwell: 10 * MINUTE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SingleVisitParams {
    /// Maximum age of the device's last advertisement, seconds.
    pub max_since_last_adv: i64,
    /// Strict lower bound on the followed distance, meters.
    pub min_distance: f64,
    /// Strict lower bound on the followed duration, seconds.
    pub min_duration: i64,
}

impl Default for SingleVisitParams {
    fn default() -> Self {
        SingleVisitParams { max_since_last_adv: 5 * MINUTE, min_distance: 420.0, min_duration: 300 }
    }
}

/// A dwell at one place. `arrival <= departure`; an open visit carries the
/// latest fix as its departure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub arrival: Timestamp,
    pub departure: Timestamp,
    pub location: GeoPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VisitEvent {
    Arrived(Visit),
    Departed(Visit),
}

impl VisitEvent {
    pub fn visit(&self) -> &Visit {
        match self {
            VisitEvent::Arrived(v) | VisitEvent::Departed(v) => v,
        }
    }
}

/// Turns a stream of location fixes into visit arrivals and departures.
#[derive(Debug, Clone, Default)]
pub struct VisitTracker {
    pub params: VisitParams,
    anchor: Option<(Timestamp, GeoPoint)>,
    last_inside: Option<Timestamp>,
    open: Option<Visit>,
    history: Vec<Visit>,
}

impl VisitTracker {
    pub fn new(params: VisitParams) -> Self {
        VisitTracker { params, ..Default::default() }
    }

    pub fn current(&self) -> Option<&Visit> {
        self.open.as_ref()
    }

    pub fn history(&self) -> &[Visit] {
        &self.history
    }

    /// Feeds one fix; fixes must arrive in time order.
    pub fn update(&mut self, at: Timestamp, point: GeoPoint) -> Option<VisitEvent> {
        let Some((since, center)) = self.anchor else {
            self.anchor = Some((at, point));
            self.last_inside = Some(at);
            return None;
        };
        if center.haversine(&point) <= self.params.radius_m {
            self.last_inside = Some(at);
            if let Some(open) = &mut self.open {
                open.departure = at;
                return None;
            }
            if at - since >= self.params.min_dwell {
                let v = Visit { arrival: since, departure: at, location: center };
                self.open = Some(v);
                return Some(VisitEvent::Arrived(v));
            }
            return None;
        }
        self.anchor = Some((at, point));
        let departed = self.open.take().map(|mut v| {
            v.departure = self.last_inside.unwrap_or(v.departure);
            self.history.push(v);
            VisitEvent::Departed(v)
        });
        self.last_inside = Some(at);
        departed
    }
}

/// Non-owner devices with a separated sighting in `[from, to]`.
pub fn devices_during(store: &TaStore, from: Timestamp, to: Timestamp) -> BTreeMap<BleAddress, DeviceCategory> {
    store.devices().filter(|d| !d.sightings_in(from - 1, to).is_empty()).map(|d| (d.address, d.category)).collect()
}

/// Devices present at both the previous and the current visit, excluding
/// [`DeviceCategory::Other`].
pub fn visit_detector(
    previous: &BTreeMap<BleAddress, DeviceCategory>,
    current: &BTreeMap<BleAddress, DeviceCategory>,
) -> Vec<BleAddress> {
    current.iter().filter(|(a, c)| **c != DeviceCategory::Other && previous.contains_key(a)).map(|(a, _)| *a).collect()
}

/// Keeps visit-detector hits that are still beaconing and really moved with
/// the user.
pub fn single_visit_detector(
    candidates: &[Suspicion],
    store: &TaStore,
    now: Timestamp,
    params: &SingleVisitParams,
) -> Vec<Suspicion> {
    candidates
        .iter()
        .filter(|s| {
            let last = store.device(&s.address).and_then(|d| d.last_seen());
            last.is_some_and(|t| now - t <= params.max_since_last_adv)
                && s.distance > params.min_distance
                && s.duration > params.min_duration
        })
        .map(|s| Suspicion { detector: Engine::IosSingleVisit, ..s.clone() })
        .collect()
}

/// Turns visit-detector addresses into suspicions measured over
/// `[since, now]`.
pub(crate) fn visit_suspicions(
    store: &TaStore,
    hits: &[BleAddress],
    since: Timestamp,
    now: Timestamp,
) -> Vec<Suspicion> {
    hits.iter()
        .filter_map(|a| {
            let d = store.device(a)?;
            let m = DeviceMetrics::over(d, since - 1, now)?;
            Some(Suspicion {
                address: *a,
                category: d.category,
                distance: m.distance,
                duration: m.duration,
                detector: Engine::IosVisit,
            })
        })
        .collect()
}
