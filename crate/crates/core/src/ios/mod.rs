//! Reimplementation of the iOS TrackingAvoidance pipeline.
//!
//! Non-owner advertisements are collected in a [`TaStore`] together with
//! location, user-activity, vehicular and system-state events. Three
//! detectors mark devices suspicious:
//!
//! * the general filter, run on a fixed cadence over recently seen devices;
//! * the visit detector, intersecting the devices of consecutive visits;
//! * the single-visit detector, adding recency/distance/duration checks on
//!   top of that intersection.
//!
//! Suspicious devices are notified right away when the user is home, and
//! otherwise staged until a deadline. Devices of category
//! [`DeviceCategory::Other`] are irrelevant for tracking and never
//! considered.

mod engine;
mod filter;
mod staging;
mod views;
mod visits;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::{BleAddress, DeviceCategory};
use crate::geo::GeoPoint;
use crate::record::{Engine, SightingRecord};
use crate::time::Timestamp;

pub use engine::{HomeArea, IosConfig, IosEngine};
pub use filter::{general_filter, is_suspicious, DeviceMetrics, GeneralFilterParams};
pub use staging::{notify_policy, Notification, NotifyContext, NotifyPolicy, StagingEntry};
pub use views::{derive_views, StoreViews};
pub use visits::{
    devices_during, single_visit_detector, visit_detector, SingleVisitParams, Visit, VisitEvent, VisitParams,
    VisitTracker,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemState {
    DisplayOn,
    DeviceUnlockedSinceBoot,
    HasKoreaCountryCode,
    Wifi,
    LocationServices,
    BatterySaver,
    HighThermal,
    Ap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserActivity {
    Static,
    Pedestrian,
    Vehicular,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicularState {
    Vehicular,
    NonVehicular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "value")]
pub enum TaEventKind {
    SystemState(SystemState),
    UserActivity(UserActivity),
    VehicularState(VehicularState),
    LocationUpdate(GeoPoint),
    AdvertisementSeen(SightingRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaEvent {
    pub at: Timestamp,
    #[serde(flatten)]
    pub kind: TaEventKind,
}

impl TaEvent {
    pub fn new(at: Timestamp, kind: TaEventKind) -> Self {
        TaEvent { at, kind }
    }
}

/// Per-address sighting history of one non-owner device.
#[derive(Debug, Clone, PartialEq)]
pub struct TaDevice {
    pub address: BleAddress,
    pub category: DeviceCategory,
    pub sightings: Vec<SightingRecord>,
}

impl TaDevice {
    pub fn last_seen(&self) -> Option<Timestamp> {
        self.sightings.last().map(|s| s.at)
    }

    /// Sightings with `from < at <= to`.
    pub fn sightings_in(&self, from: Timestamp, to: Timestamp) -> &[SightingRecord] {
        let lo = self.sightings.partition_point(|s| s.at <= from);
        let hi = self.sightings.partition_point(|s| s.at <= to);
        &self.sightings[lo..hi]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaStore {
    events: Vec<TaEvent>,
    devices: BTreeMap<BleAddress, TaDevice>,
}

impl TaStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an event in time order. Separated-state advertisements also
    /// extend their device's history; nearby frames are logged only.
    pub fn push(&mut self, event: TaEvent) {
        if let TaEventKind::AdvertisementSeen(s) = &event.kind {
            if let (true, Some(category)) = (s.is_separated(), s.category) {
                let dev = self.devices.entry(s.address).or_insert_with(|| TaDevice {
                    address: s.address,
                    category,
                    sightings: Vec::new(),
                });
                let pos = dev.sightings.partition_point(|x| x.at <= s.at);
                dev.sightings.insert(pos, s.clone());
            }
        }
        let pos = self.events.partition_point(|e| e.at <= event.at);
        self.events.insert(pos, event);
    }

    pub fn events(&self) -> &[TaEvent] {
        &self.events
    }

    /// Events with `from < at <= to`.
    pub fn events_in(&self, from: Timestamp, to: Timestamp) -> &[TaEvent] {
        let lo = self.events.partition_point(|e| e.at <= from);
        let hi = self.events.partition_point(|e| e.at <= to);
        &self.events[lo..hi]
    }

    pub fn events_until(&self, to: Timestamp) -> &[TaEvent] {
        &self.events[..self.events.partition_point(|e| e.at <= to)]
    }

    pub fn device(&self, address: &BleAddress) -> Option<&TaDevice> {
        self.devices.get(address)
    }

    pub fn devices(&self) -> impl Iterator<Item = &TaDevice> {
        self.devices.values()
    }

    pub fn last_location(&self, at: Timestamp) -> Option<GeoPoint> {
        self.events_until(at).iter().rev().find_map(|e| match e.kind {
            TaEventKind::LocationUpdate(p) => Some(p),
            _ => None,
        })
    }
}

/// A device flagged by one of the detectors during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Suspicion {
    pub address: BleAddress,
    pub category: DeviceCategory,
    /// Meters travelled with the user over the detector's horizon.
    pub distance: f64,
    /// Seconds travelled with the user over the detector's horizon.
    pub duration: i64,
    pub detector: Engine,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::AdvertisementMode;

    #[test]
    fn events_roundtrip_as_json_lines() {
        let events = vec![
            TaEvent::new(Timestamp(10), TaEventKind::UserActivity(UserActivity::Pedestrian)),
            TaEvent::new(Timestamp(11), TaEventKind::SystemState(SystemState::HasKoreaCountryCode)),
            TaEvent::new(Timestamp(12), TaEventKind::LocationUpdate(GeoPoint::new(1.0, 2.0).unwrap())),
            TaEvent::new(
                Timestamp(13),
                TaEventKind::AdvertisementSeen(SightingRecord {
                    address: "C0:00:00:00:00:07".parse().unwrap(),
                    category: Some(DeviceCategory::Hawkeye),
                    rssi: -70,
                    at: Timestamp(13),
                    location: GeoPoint::new(1.0, 2.0).unwrap(),
                    mode: AdvertisementMode::Separated,
                }),
            ),
        ];
        let mut buf = Vec::new();
        crate::record::write_json_lines(&mut buf, &events).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(r#"{"at":10,"type":"user_activity","value":"pedestrian"}"#));
        let back: Vec<TaEvent> = crate::record::read_json_lines(text.as_bytes()).unwrap();
        assert_eq!(back, events);
    }

    #[test]
    fn store_keeps_order_and_skips_nearby_devices() {
        let mut store = TaStore::new();
        let nearby = SightingRecord {
            address: "C0:00:00:00:00:08".parse().unwrap(),
            category: None,
            rssi: -70,
            at: Timestamp(5),
            location: GeoPoint::new(0.0, 0.0).unwrap(),
            mode: AdvertisementMode::Nearby,
        };
        store.push(TaEvent::new(Timestamp(20), TaEventKind::UserActivity(UserActivity::Static)));
        store.push(TaEvent::new(Timestamp(5), TaEventKind::AdvertisementSeen(nearby)));
        assert_eq!(store.events()[0].at, Timestamp(5));
        assert_eq!(store.devices().count(), 0);
        assert_eq!(store.events_in(Timestamp(5), Timestamp(20)).len(), 1);
    }
}
