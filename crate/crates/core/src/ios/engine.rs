use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::visits::visit_suspicions;
use super::{
    devices_during, general_filter, notify_policy, single_visit_detector, visit_detector, GeneralFilterParams,
    Notification, NotifyContext, NotifyPolicy, SingleVisitParams, StagingEntry, Suspicion, TaEvent, TaEventKind,
    TaStore, VisitEvent, VisitParams, VisitTracker,
};
use crate::airguard::travel_distance;
use crate::codec::{BleAddress, DeviceCategory};
use crate::geo::GeoPoint;
use crate::record::DetectorVerdict;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomeArea {
    pub center: GeoPoint,
    pub radius_m: f64,
}

impl HomeArea {
    pub fn contains(&self, p: &GeoPoint) -> bool {
        self.center.haversine(p) <= self.radius_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct IosConfig {
    pub general: GeneralFilterParams,
    pub visits: VisitParams,
    pub single_visit: SingleVisitParams,
    pub notify: NotifyPolicy,
    pub home: Option<HomeArea>,
}

/// Event store plus detector state, driven by periodic [`IosEngine::run`]
/// calls.
#[derive(Debug, Clone)]
pub struct IosEngine {
    pub config: IosConfig,
    store: TaStore,
    visits: VisitTracker,
    pending_visits: Vec<VisitEvent>,
    previous_visit: Option<BTreeMap<BleAddress, DeviceCategory>>,
    staging: Vec<StagingEntry>,
    notified: BTreeSet<BleAddress>,
    history: Vec<Notification>,
    last_run: Option<Timestamp>,
}

impl IosEngine {
    pub fn new(config: IosConfig) -> Self {
        IosEngine {
            config,
            store: TaStore::new(),
            visits: VisitTracker::new(config.visits),
            pending_visits: Vec::new(),
            previous_visit: None,
            staging: Vec::new(),
            notified: BTreeSet::new(),
            history: Vec::new(),
            last_run: None,
        }
    }

    pub fn store(&self) -> &TaStore {
        &self.store
    }

    pub fn staging(&self) -> &[StagingEntry] {
        &self.staging
    }

    /// Every notification raised so far, with its staging time.
    pub fn notifications(&self) -> &[Notification] {
        &self.history
    }

    /// Location updates must be pushed in time order.
    pub fn push(&mut self, event: TaEvent) {
        if let TaEventKind::LocationUpdate(p) = event.kind {
            self.pending_visits.extend(self.visits.update(event.at, p));
        }
        self.store.push(event);
    }

    fn visit_detections(&mut self, now: Timestamp) -> Vec<Suspicion> {
        let mut out = Vec::new();
        for ev in std::mem::take(&mut self.pending_visits) {
            let v = *ev.visit();
            let end = match ev {
                VisitEvent::Arrived(_) => now,
                VisitEvent::Departed(v) => v.departure,
            };
            let current = devices_during(&self.store, v.arrival, end);
            if let Some(prev) = &self.previous_visit {
                let hits = visit_detector(prev, &current);
                // Followed since roughly the start of the previous visit.
                let since =
                    self.visits.history().iter().rev().find(|h| h.arrival < v.arrival).map_or(v.arrival, |h| h.arrival);
                let visit = visit_suspicions(&self.store, &hits, since, now);
                out.extend(single_visit_detector(&visit, &self.store, now, &self.config.single_visit));
                out.extend(visit);
            }
            if let VisitEvent::Departed(_) = ev {
                self.previous_visit = Some(current);
            }
        }
        out
    }

    /// One detector cycle at `now`.
    pub fn run(&mut self, now: Timestamp) -> Vec<DetectorVerdict> {
        let since_last = self.last_run.map_or(self.config.general.run_period, |t| now - t);
        self.last_run = Some(now);

        let mut suspicious = general_filter(&self.store, now, &self.config.general);
        suspicious.extend(self.visit_detections(now));
        let mut unique = BTreeSet::new();
        suspicious.retain(|s| !self.notified.contains(&s.address) && unique.insert(s.address));

        let last_seen: BTreeMap<BleAddress, Timestamp> =
            self.store.devices().filter_map(|d| d.last_seen().map(|t| (d.address, t))).collect();
        let seen_now: BTreeSet<BleAddress> =
            last_seen.iter().filter(|(_, &t)| t > now - since_last && t <= now).map(|(a, _)| *a).collect();
        let at_home = match (self.config.home, self.store.last_location(now)) {
            (Some(h), Some(p)) => h.contains(&p),
            _ => false,
        };

        let ctx = NotifyContext { now, at_home, seen_now: &seen_now, last_seen: &last_seen };
        let (notes, staging) = notify_policy(&self.config.notify, &suspicious, std::mem::take(&mut self.staging), &ctx);
        self.staging = staging;
        self.history.extend(notes.iter().cloned());

        notes
            .into_iter()
            .filter_map(|n| {
                self.notified.insert(n.address);
                let d = self.store.device(&n.address)?;
                let span = match (d.sightings.first(), d.sightings.last()) {
                    (Some(a), Some(b)) => b.at - a.at,
                    _ => 0,
                };
                Some(DetectorVerdict {
                    address: n.address,
                    category: n.category,
                    notified_at: n.at,
                    sighting_count: d.sightings.len() as u32,
                    span,
                    distance: travel_distance(&d.sightings),
                    engine: n.detector,
                })
            })
            .collect()
    }

    /// Feeds a recorded event log and runs the detectors every
    /// `general.run_period` seconds from the first to the last event.
    pub fn replay(config: IosConfig, mut events: Vec<TaEvent>) -> Vec<DetectorVerdict> {
        events.sort_by_key(|e| e.at);
        let mut engine = IosEngine::new(config);
        let (Some(first), Some(last)) = (events.first().map(|e| e.at), events.last().map(|e| e.at)) else {
            return Vec::new();
        };
        let period = config.general.run_period.max(1);
        let mut verdicts = Vec::new();
        let mut events = events.into_iter().peekable();
        let mut tick = first + period;
        loop {
            while let Some(e) = events.next_if(|e| e.at <= tick) {
                engine.push(e);
            }
            verdicts.extend(engine.run(tick));
            if tick >= last {
                break;
            }
            tick += period;
        }
        verdicts
    }
}
