//! Per-user risk levels and anonymized fleet statistics.

mod fleet;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::codec::{BleAddress, DeviceCategory};
use crate::record::{DetectorVerdict, SightingRecord};
use crate::time::{Timestamp, DAY, HOUR};

pub use fleet::{
    fleet_report, sliding_risk_percentages, CategoryGroup, DeviceTypeShare, FleetReport, HistogramBin, MeanRssi,
    RiskPoint,
};
pub use synthetic::{synthetic_fleet, SyntheticFleet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskLevel {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskParams {
    /// Trailing window, seconds.
    pub window: i64,
    /// Cumulative followed time up to which the level stays Medium.
    pub high_after: i64,
    /// Count verdicts for Apple devices and their clones.
    pub include_other: bool,
}

impl Default for RiskParams {
    fn default() -> Self {
        RiskParams { window: 14 * DAY, high_after: 24 * HOUR, include_other: false }
    }
}

impl RiskParams {
    fn counts(&self, category: DeviceCategory) -> bool {
        self.include_other || category.is_accessory()
    }

    fn in_window(&self, at: Timestamp, now: Timestamp) -> bool {
        at > now - self.window && at <= now
    }

    fn level_for(&self, followed: i64) -> RiskLevel {
        match followed {
            f if f <= 0 => RiskLevel::Low,
            f if f <= self.high_after => RiskLevel::Medium,
            _ => RiskLevel::High,
        }
    }
}

/// Level from verdicts notified in `(now - window, now]`, by the sum of
/// their spans.
pub fn risk_level(verdicts: &[DetectorVerdict], now: Timestamp, params: &RiskParams) -> RiskLevel {
    let followed = verdicts
        .iter()
        .filter(|v| params.counts(v.category) && params.in_window(v.notified_at, now))
        .map(|v| v.span.max(0))
        .sum();
    params.level_for(followed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EventKind {
    Sighting,
    Notification {
        /// Seconds the device followed the user before the alert.
        followed_secs: i64,
    },
    FalseAlarmReport,
}

/// One donated record with every identifying field removed. `device` is a
/// per-user counter in order of first appearance and links nothing across
/// users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnonymizedEvent {
    pub user: u32,
    pub device: u32,
    pub at: Timestamp,
    pub category: Option<DeviceCategory>,
    pub rssi: i16,
    /// The device raised a notification for this user at some point.
    pub notified_device: bool,
    pub event: EventKind,
}

/// Strips addresses, payloads and locations from one user's sightings and
/// verdicts.
pub fn anonymize(user: u32, records: &[SightingRecord], verdicts: &[DetectorVerdict]) -> Vec<AnonymizedEvent> {
    let mut order: Vec<&SightingRecord> = records.iter().collect();
    order.sort_by_key(|r| r.at);
    let mut ids: BTreeMap<BleAddress, u32> = BTreeMap::new();
    let mut id_of = |a: BleAddress| {
        let next = ids.len() as u32;
        *ids.entry(a).or_insert(next)
    };
    let notified: BTreeSet<BleAddress> = verdicts.iter().map(|v| v.address).collect();

    let mut out: Vec<AnonymizedEvent> = order
        .iter()
        .map(|r| AnonymizedEvent {
            user,
            device: id_of(r.address),
            at: r.at,
            category: r.category,
            rssi: r.rssi,
            notified_device: notified.contains(&r.address),
            event: EventKind::Sighting,
        })
        .collect();
    for v in verdicts {
        let rssi = order.iter().rev().find(|r| r.address == v.address && r.at <= v.notified_at).map_or(0, |r| r.rssi);
        out.push(AnonymizedEvent {
            user,
            device: id_of(v.address),
            at: v.notified_at,
            category: Some(v.category),
            rssi,
            notified_device: true,
            event: EventKind::Notification { followed_secs: v.span },
        });
    }
    out.sort_by_key(|e| e.at);
    out
}

/// [`risk_level`] over anonymized notification events of one user.
pub fn risk_level_from_events<'a>(
    events: impl IntoIterator<Item = &'a AnonymizedEvent>,
    now: Timestamp,
    params: &RiskParams,
) -> RiskLevel {
    let followed = events
        .into_iter()
        .filter(|e| params.in_window(e.at, now) && e.category.is_some_and(|c| params.counts(c)))
        .map(|e| match e.event {
            EventKind::Notification { followed_secs } => followed_secs.max(0),
            _ => 0,
        })
        .sum();
    params.level_for(followed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::AdvertisementMode;
    use crate::geo::GeoPoint;
    use crate::record::Engine;
    use crate::time::MINUTE;
    use proptest::prelude::*;

    const NOW: Timestamp = Timestamp(1_700_000_000);

    fn verdict(at: Timestamp, span: i64, category: DeviceCategory) -> DetectorVerdict {
        DetectorVerdict {
            address: "C0:11:22:33:44:55".parse().unwrap(),
            category,
            notified_at: at,
            sighting_count: 3,
            span,
            distance: 500.0,
            engine: Engine::AirGuard,
        }
    }

    #[test]
    fn boundary_levels() {
        let p = RiskParams::default();
        assert_eq!(risk_level(&[], NOW, &p), RiskLevel::Low);
        assert_eq!(risk_level(&[verdict(NOW - HOUR, 40 * MINUTE, DeviceCategory::Durian)], NOW, &p), RiskLevel::Medium);
        let long = [
            verdict(NOW - DAY, 12 * HOUR, DeviceCategory::Durian),
            verdict(NOW - 2 * DAY, 13 * HOUR, DeviceCategory::Hawkeye),
        ];
        assert_eq!(risk_level(&long, NOW, &p), RiskLevel::High);
        assert_eq!(risk_level(&[verdict(NOW, 24 * HOUR, DeviceCategory::Hele)], NOW, &p), RiskLevel::Medium);
    }

    #[test]
    fn old_and_other_verdicts_do_not_count() {
        let p = RiskParams::default();
        assert_eq!(risk_level(&[verdict(NOW - 14 * DAY, 5 * HOUR, DeviceCategory::Durian)], NOW, &p), RiskLevel::Low);
        let mac = [verdict(NOW, 5 * HOUR, DeviceCategory::Other)];
        assert_eq!(risk_level(&mac, NOW, &p), RiskLevel::Low);
        let all = RiskParams { include_other: true, ..p };
        assert_eq!(risk_level(&mac, NOW, &all), RiskLevel::Medium);
    }

    fn sighting(addr: &str, at: i64, rssi: i16) -> SightingRecord {
        SightingRecord {
            address: addr.parse().unwrap(),
            category: Some(DeviceCategory::Durian),
            rssi,
            at: Timestamp(at),
            location: GeoPoint::new(49.0, 8.0).unwrap(),
            mode: AdvertisementMode::Separated,
        }
    }

    #[test]
    fn anonymize_removes_identity() {
        let recs = [sighting("C0:11:22:33:44:55", 10, -60), sighting("D0:01:02:03:04:05", 5, -80)];
        let out = anonymize(7, &recs, &[]);
        assert_eq!(out.len(), 2);
        assert_eq!((out[0].device, out[0].rssi), (0, -80));
        assert_eq!((out[1].device, out[1].rssi), (1, -60));
        assert!(anonymize(7, &[], &[]).is_empty());
        let json = serde_json::to_string(&out).unwrap();
        assert!(!json.contains("C0:11") && !json.contains("lat"));
    }

    #[test]
    fn same_frame_two_users_two_events() {
        let rec = [sighting("C0:11:22:33:44:55", 10, -60)];
        let a = anonymize(1, &rec, &[]);
        let b = anonymize(2, &rec, &[]);
        assert_eq!(a.len() + b.len(), 2);
        assert_ne!(a[0].user, b[0].user);
    }

    #[test]
    fn notification_events_drive_event_risk() {
        let recs = [sighting("C0:11:22:33:44:55", NOW.secs() - 60, -60)];
        let v = verdict(NOW, 40 * MINUTE, DeviceCategory::Durian);
        let events = anonymize(3, &recs, std::slice::from_ref(&v));
        assert!(events.iter().all(|e| e.notified_device));
        assert_eq!(events[1].rssi, -60);
        let p = RiskParams::default();
        assert_eq!(risk_level_from_events(&events, NOW, &p), risk_level(&[v], NOW, &p));
    }

    fn verdicts() -> impl Strategy<Value = Vec<DetectorVerdict>> {
        let one = (0i64..20 * DAY, 0i64..30 * HOUR, prop::sample::select(DeviceCategory::ALL.to_vec()))
            .prop_map(|(ago, span, c)| verdict(NOW - ago, span, c));
        prop::collection::vec(one, 0..12)
    }

    proptest! {
        #[test]
        fn adding_a_verdict_never_lowers(vs in verdicts(), extra in verdicts()) {
            let p = RiskParams::default();
            let base = risk_level(&vs, NOW, &p);
            let mut more = vs.clone();
            more.extend(extra);
            prop_assert!(risk_level(&more, NOW, &p) >= base);
        }

        #[test]
        fn only_trailing_slice_matters(vs in verdicts()) {
            let p = RiskParams::default();
            let recent: Vec<_> = vs.iter().filter(|v| v.notified_at > NOW - p.window).cloned().collect();
            prop_assert_eq!(risk_level(&vs, NOW, &p), risk_level(&recent, NOW, &p));
        }
    }
}
