//! AirGuard tracker classification.
//!
//! Devices are keyed by BLE address. After every background scan the store
//! is re-evaluated and a device raises a notification once it has been
//! seen for at least 30 minutes, in at least three scans, over at least
//! 400 m of travel, and has not alerted within the last seven hours.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::codec::{BleAddress, DeviceCategory};
use crate::geo::path_length;
use crate::ranging::PathLossModel;
use crate::record::{write_json_lines, DetectorVerdict, Engine, SightingRecord};
use crate::time::{Timestamp, HOUR, MINUTE};

pub use crate::sim::ScanSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AirGuardParams {
    /// Minimum first-to-last sighting span, inclusive.
    pub min_span: i64,
    /// Minimum number of scans in which the device was seen.
    pub min_discoveries: u32,
    /// Minimum distance travelled, inclusive, in meters.
    pub min_distance_m: f64,
    /// Quiet period after an alert for the same device.
    pub alert_cooldown: i64,
}

impl Default for AirGuardParams {
    fn default() -> Self {
        AirGuardParams { min_span: 30 * MINUTE, min_discoveries: 3, min_distance_m: 400.0, alert_cooldown: 7 * HOUR }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub address: BleAddress,
    pub category: DeviceCategory,
    pub sightings: Vec<SightingRecord>,
    /// Instants of the scans in which this device showed up.
    pub discoveries: Vec<Timestamp>,
    pub last_alert_at: Option<Timestamp>,
}

impl DeviceRecord {
    pub fn span(&self) -> i64 {
        match (self.sightings.first(), self.sightings.last()) {
            (Some(a), Some(b)) => b.at - a.at,
            _ => 0,
        }
    }

    pub fn distance(&self) -> f64 {
        travel_distance(&self.sightings)
    }
}

/// Cumulative path length over consecutive sighting locations.
pub fn travel_distance(sightings: &[SightingRecord]) -> f64 {
    path_length(sightings.iter().map(|s| &s.location))
}

pub fn rssi_to_distance(rssi: f64, model: &PathLossModel) -> f64 {
    model.distance_for(rssi)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeviceStore {
    devices: BTreeMap<BleAddress, DeviceRecord>,
}

impl DeviceStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    pub fn get(&self, address: &BleAddress) -> Option<&DeviceRecord> {
        self.devices.get(address)
    }

    pub fn devices(&self) -> impl Iterator<Item = &DeviceRecord> {
        self.devices.values()
    }

    /// Adds the separated-state results of one scan finishing at `now`.
    pub fn ingest_scan(&mut self, scan_results: &[SightingRecord], now: Timestamp) {
        for s in scan_results.iter().filter(|s| s.is_separated()) {
            let Some(category) = s.category else { continue };
            let rec = self.devices.entry(s.address).or_insert_with(|| DeviceRecord {
                address: s.address,
                category,
                sightings: Vec::new(),
                discoveries: Vec::new(),
                last_alert_at: None,
            });
            let pos = rec.sightings.partition_point(|x| x.at <= s.at);
            rec.sightings.insert(pos, s.clone());
            if rec.discoveries.last() != Some(&now) {
                rec.discoveries.push(now);
            }
        }
    }

    /// Evaluates every device and records the alert time of each verdict.
    pub fn classify(&mut self, now: Timestamp, params: &AirGuardParams) -> Vec<DetectorVerdict> {
        let mut verdicts = Vec::new();
        for rec in self.devices.values_mut() {
            let discoveries = rec.discoveries.len() as u32;
            if discoveries < params.min_discoveries {
                continue;
            }
            let span = rec.span();
            if span < params.min_span {
                continue;
            }
            if rec.last_alert_at.is_some_and(|last| now - last < params.alert_cooldown) {
                continue;
            }
            let distance = rec.distance();
            if distance < params.min_distance_m {
                continue;
            }
            rec.last_alert_at = Some(now);
            verdicts.push(DetectorVerdict {
                address: rec.address,
                category: rec.category,
                notified_at: now,
                sighting_count: discoveries,
                span,
                distance,
                engine: Engine::AirGuard,
            });
        }
        verdicts
    }

    pub fn export_json_lines(&self, out: impl Write) -> io::Result<()> {
        write_json_lines(out, self.devices.values())
    }
}

/// Store plus thresholds, run once per completed scan.
#[derive(Debug, Clone, Default)]
pub struct AirGuard {
    pub params: AirGuardParams,
    pub store: DeviceStore,
}

impl AirGuard {
    pub fn new(params: AirGuardParams) -> Self {
        AirGuard { params, store: DeviceStore::new() }
    }

    pub fn on_scan(&mut self, scan_results: &[SightingRecord], now: Timestamp) -> Vec<DetectorVerdict> {
        self.store.ingest_scan(scan_results, now);
        self.store.classify(now, &self.params)
    }
}
