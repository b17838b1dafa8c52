//! Deterministic simulation of Find My transmitters.

mod keys;
mod radio;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{encode_advertisement, Advertisement, BleAddress, DeviceCategory, StatusByte};
use crate::time::{Timestamp, MINUTE};

pub use keys::{derive_key, KeyPolicy, KeySchedule};
pub use radio::{run_radio_sim, run_radio_sim_labeled, LabeledSighting, RadioConfig, ScanSchedule, ScanWindow};
pub use trace::{Activity, MovementTrace, RouteBuilder, TraceSample, DRIVE_SPEED, WALK_SPEED};

/// Time an accessory spends in the nearby state before it separates.
pub const NEARBY_TO_SEPARATED: i64 = 15 * MINUTE;
pub const DEFAULT_EMISSION_INTERVAL: i64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("{kind:?} cannot carry category {category:?}")]
    CategoryMismatch { kind: AccessoryKind, category: DeviceCategory },
    #[error("emission interval must be positive")]
    BadEmissionInterval,
    #[error("scan period {period}s is shorter than scan duration {duration}s")]
    BadSchedule { period: i64, duration: i64 },
    #[error("tracker and victim traces share no time span")]
    EmptyOverlap,
    #[error("trace: {0}")]
    Trace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessoryKind {
    /// Certified Find My accessory (AirTag, Chipolo, AirPods).
    Accessory,
    /// Lost iPhone/Mac without connectivity.
    AppleDevice,
    /// Self-made tag imitating a lost Apple device.
    OpenHaystack,
    /// Modified tag that rotates its key faster than detectors can link it.
    FastRotator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnState {
    Unpaired,
    Connected,
    Nearby,
    Separated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimAccessory {
    pub id: String,
    pub kind: AccessoryKind,
    pub category: DeviceCategory,
    pub key_schedule: KeySchedule,
    pub conn_state: ConnState,
    pub nearby_entered_at: Option<Timestamp>,
    /// Seconds between frames.
    pub emission_interval: i64,
    /// Offset of the emission grid within one interval.
    pub emission_phase: i64,
}

impl SimAccessory {
    pub fn new(
        id: impl Into<String>,
        kind: AccessoryKind,
        category: DeviceCategory,
        key_schedule: KeySchedule,
        conn_state: ConnState,
    ) -> Result<Self, SimError> {
        let allowed = match kind {
            AccessoryKind::Accessory => category.is_accessory(),
            AccessoryKind::AppleDevice | AccessoryKind::OpenHaystack => category == DeviceCategory::Other,
            AccessoryKind::FastRotator => true,
        };
        if !allowed {
            return Err(SimError::CategoryMismatch { kind, category });
        }
        let emission_phase = (key_schedule.seed % DEFAULT_EMISSION_INTERVAL as u64) as i64;
        Ok(SimAccessory {
            id: id.into(),
            kind,
            category,
            key_schedule,
            conn_state,
            nearby_entered_at: None,
            emission_interval: DEFAULT_EMISSION_INTERVAL,
            emission_phase,
        })
    }

    pub fn with_emission_interval(mut self, secs: i64) -> Result<Self, SimError> {
        if secs <= 0 {
            return Err(SimError::BadEmissionInterval);
        }
        self.emission_interval = secs;
        self.emission_phase = self.emission_phase.rem_euclid(secs);
        Ok(self)
    }

    /// Apple devices and their clones beacon as soon as they lose the owner,
    /// without a nearby grace period.
    fn skips_nearby(&self) -> bool {
        matches!(self.kind, AccessoryKind::AppleDevice | AccessoryKind::OpenHaystack)
    }

    pub fn step_state(&mut self, now: Timestamp, owner_in_range: bool) {
        if self.conn_state == ConnState::Unpaired {
            return;
        }
        if owner_in_range {
            self.conn_state = ConnState::Connected;
            self.nearby_entered_at = None;
            return;
        }
        match self.conn_state {
            ConnState::Connected if self.skips_nearby() => self.conn_state = ConnState::Separated,
            ConnState::Connected => {
                self.conn_state = ConnState::Nearby;
                self.nearby_entered_at = Some(now);
            }
            ConnState::Nearby => {
                let entered = *self.nearby_entered_at.get_or_insert(now);
                if now - entered >= NEARBY_TO_SEPARATED {
                    self.conn_state = ConnState::Separated;
                }
            }
            ConnState::Separated | ConnState::Unpaired => {}
        }
    }

    pub fn address(&self) -> BleAddress {
        BleAddress::from_key(self.key_schedule.current_key())
    }

    pub fn status_byte(&self) -> StatusByte {
        StatusByte::for_category(self.category)
    }

    pub fn emit(&self, _now: Timestamp) -> Option<Advertisement> {
        match self.conn_state {
            ConnState::Separated => {
                Some(encode_advertisement(self.key_schedule.current_key(), self.status_byte(), 0x00))
            }
            ConnState::Nearby => Some(Advertisement::nearby(self.address())),
            ConnState::Connected | ConnState::Unpaired => None,
        }
    }

    /// Frame instants in `[from, to)` on this accessory's emission grid.
    pub fn emission_times(&self, from: Timestamp, to: Timestamp) -> impl Iterator<Item = Timestamp> {
        let step = self.emission_interval;
        let first = from.secs() + (self.emission_phase - from.secs()).rem_euclid(step);
        (first..to.secs()).step_by(step as usize).map(Timestamp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{decode_advertisement, AdvertisementMode};

    const T0: Timestamp = Timestamp(1_639_562_400);

    fn airtag(state: ConnState) -> SimAccessory {
        let keys = KeySchedule::new(KeyPolicy::DailyAt4amLocal, 5, T0, 0);
        SimAccessory::new("airtag", AccessoryKind::Accessory, DeviceCategory::Durian, keys, state).unwrap()
    }

    #[test]
    fn owner_leaving_then_fifteen_minutes() {
        let mut acc = airtag(ConnState::Connected);
        acc.step_state(T0, false);
        assert_eq!(acc.conn_state, ConnState::Nearby);
        acc.step_state(T0 + 14 * MINUTE, false);
        assert_eq!(acc.conn_state, ConnState::Nearby);
        acc.step_state(T0 + 15 * MINUTE, false);
        assert_eq!(acc.conn_state, ConnState::Separated);
    }

    #[test]
    fn owner_return_reconnects_from_any_state() {
        for state in [ConnState::Nearby, ConnState::Separated] {
            let mut acc = airtag(state);
            acc.step_state(T0, true);
            assert_eq!(acc.conn_state, ConnState::Connected);
        }
        let mut unpaired = airtag(ConnState::Unpaired);
        unpaired.step_state(T0, true);
        assert_eq!(unpaired.conn_state, ConnState::Unpaired);
    }

    #[test]
    fn apple_devices_separate_immediately() {
        let keys = KeySchedule::new(KeyPolicy::Every15Min, 1, T0, 0);
        let mut mac =
            SimAccessory::new("mac", AccessoryKind::AppleDevice, DeviceCategory::Other, keys, ConnState::Connected)
                .unwrap();
        mac.step_state(T0, false);
        assert_eq!(mac.conn_state, ConnState::Separated);
    }

    #[test]
    fn kind_category_invariants() {
        let keys = KeySchedule::new(KeyPolicy::Static, 1, T0, 0);
        assert!(SimAccessory::new(
            "x",
            AccessoryKind::Accessory,
            DeviceCategory::Other,
            keys.clone(),
            ConnState::Separated
        )
        .is_err());
        assert!(SimAccessory::new(
            "x",
            AccessoryKind::OpenHaystack,
            DeviceCategory::Durian,
            keys.clone(),
            ConnState::Separated
        )
        .is_err());
        assert!(SimAccessory::new("x", AccessoryKind::FastRotator, DeviceCategory::Durian, keys, ConnState::Separated)
            .is_ok());
    }

    #[test]
    fn emission_by_state() {
        let sep = airtag(ConnState::Separated).emit(T0).unwrap();
        assert_eq!(sep.mode, AdvertisementMode::Separated);
        assert_eq!(sep.status().unwrap().type_bits(), 0b01);
        let decoded = decode_advertisement(sep.address.bytes(), sep.payload()).unwrap();
        assert_eq!(decoded.category(), Some(DeviceCategory::Durian));

        let near = airtag(ConnState::Nearby).emit(T0).unwrap();
        assert_eq!(near.mode, AdvertisementMode::Nearby);
        assert!(near.payload().is_empty());
        assert_eq!(near.address, sep.address);

        assert!(airtag(ConnState::Connected).emit(T0).is_none());
    }

    #[test]
    fn emission_grid() {
        let acc = airtag(ConnState::Separated); // seed 5 -> phase 1
        let times: Vec<_> = acc.emission_times(T0, T0 + 8).map(|t| t - T0).collect();
        assert_eq!(times, vec![1, 3, 5, 7]);
        let acc = acc.with_emission_interval(3).unwrap();
        assert_eq!(acc.emission_times(T0 + 1, T0 + 8).count(), 3);
    }
}
