use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{risk_level_from_events, AnonymizedEvent, EventKind, RiskLevel, RiskParams};
use crate::codec::DeviceCategory;
use crate::time::{Timestamp, DAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTypeShare {
    pub category: DeviceCategory,
    /// Distinct (user, device) pairs.
    pub devices: u64,
    pub device_pct: f64,
    pub notifications: u64,
    pub notification_pct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryGroup {
    Accessory,
    AppleDevice,
}

impl CategoryGroup {
    pub fn of(category: DeviceCategory) -> Self {
        if category.is_accessory() {
            CategoryGroup::Accessory
        } else {
            CategoryGroup::AppleDevice
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRssi {
    pub group: CategoryGroup,
    pub notified: bool,
    pub samples: u64,
    pub mean_rssi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskPoint {
    /// Window end; the window covers `(at - window, at]`.
    pub at: Timestamp,
    pub active_donors: u64,
    pub pct_medium: f64,
    pub pct_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub notifications: u64,
    pub users: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetReport {
    pub users: u64,
    pub device_type_distribution: Vec<DeviceTypeShare>,
    pub mean_rssi: Vec<MeanRssi>,
    pub risk_percentages: Vec<RiskPoint>,
    pub notifications_per_user: Vec<HistogramBin>,
}

fn pct(part: u64, whole: u64) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 * 100.0 / whole as f64
    }
}

/// Risk shares among active donors for windows ending at
/// `first + k * step`, up to the first end covering the last event.
/// Windows without any active donor are omitted.
pub fn sliding_risk_percentages(events: &[AnonymizedEvent], step: i64, params: &RiskParams) -> Vec<RiskPoint> {
    let (Some(first), Some(last)) = (events.iter().map(|e| e.at).min(), events.iter().map(|e| e.at).max()) else {
        return Vec::new();
    };
    let step = step.max(1);
    let mut by_user: BTreeMap<u32, Vec<&AnonymizedEvent>> = BTreeMap::new();
    for e in events {
        by_user.entry(e.user).or_default().push(e);
    }

    let mut out = Vec::new();
    let mut end = first + step;
    loop {
        let (mut active, mut medium, mut high) = (0u64, 0u64, 0u64);
        for evs in by_user.values() {
            if !evs.iter().any(|e| params.in_window(e.at, end)) {
                continue;
            }
            active += 1;
            match risk_level_from_events(evs.iter().copied(), end, params) {
                RiskLevel::Medium => medium += 1,
                RiskLevel::High => high += 1,
                RiskLevel::Low => {}
            }
        }
        if active > 0 {
            out.push(RiskPoint {
                at: end,
                active_donors: active,
                pct_medium: pct(medium, active),
                pct_high: pct(high, active),
            });
        }
        if end >= last {
            break;
        }
        end += step;
    }
    out
}

pub fn fleet_report(events: &[AnonymizedEvent], params: &RiskParams) -> FleetReport {
    let users: BTreeSet<u32> = events.iter().map(|e| e.user).collect();

    let mut devices: BTreeMap<DeviceCategory, BTreeSet<(u32, u32)>> = BTreeMap::new();
    let mut notes: BTreeMap<DeviceCategory, u64> = BTreeMap::new();
    let mut rssi: BTreeMap<(CategoryGroup, bool), (i64, u64)> = BTreeMap::new();
    let mut per_user: BTreeMap<u32, u64> = users.iter().map(|&u| (u, 0)).collect();
    for e in events {
        let Some(c) = e.category else { continue };
        devices.entry(c).or_default().insert((e.user, e.device));
        match e.event {
            EventKind::Notification { .. } => {
                *notes.entry(c).or_default() += 1;
                *per_user.entry(e.user).or_default() += 1;
            }
            EventKind::Sighting => {
                let slot = rssi.entry((CategoryGroup::of(c), e.notified_device)).or_default();
                slot.0 += e.rssi as i64;
                slot.1 += 1;
            }
            EventKind::FalseAlarmReport => {}
        }
    }

    let device_total: u64 = devices.values().map(|s| s.len() as u64).sum();
    let note_total: u64 = notes.values().sum();
    let device_type_distribution = DeviceCategory::ALL
        .iter()
        .map(|&c| {
            let d = devices.get(&c).map_or(0, |s| s.len() as u64);
            let n = notes.get(&c).copied().unwrap_or(0);
            DeviceTypeShare {
                category: c,
                devices: d,
                device_pct: pct(d, device_total),
                notifications: n,
                notification_pct: pct(n, note_total),
            }
        })
        .collect();

    let mean_rssi = [CategoryGroup::Accessory, CategoryGroup::AppleDevice]
        .into_iter()
        .flat_map(|g| [false, true].map(|n| (g, n)))
        .map(|(group, notified)| {
            let (sum, samples) = rssi.get(&(group, notified)).copied().unwrap_or((0, 0));
            MeanRssi { group, notified, samples, mean_rssi: (samples > 0).then(|| sum as f64 / samples as f64) }
        })
        .collect();

    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    for &n in per_user.values() {
        *hist.entry(n).or_default() += 1;
    }
    if !users.is_empty() {
        hist.entry(0).or_default();
    }

    FleetReport {
        users: users.len() as u64,
        device_type_distribution,
        mean_rssi,
        risk_percentages: sliding_risk_percentages(events, DAY, params),
        notifications_per_user: hist
            .into_iter()
            .map(|(notifications, users)| HistogramBin { notifications, users })
            .collect(),
    }
}

impl FleetReport {
    /// One CSV table per figure, keyed by a file stem.
    pub fn csv_tables(&self) -> Result<Vec<(&'static str, String)>, csv::Error> {
        fn table<T: Serialize>(rows: &[T]) -> Result<String, csv::Error> {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            let bytes = w.into_inner().map_err(|e| e.into_error())?;
            Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
        }
        let mean: Vec<_> = self
            .mean_rssi
            .iter()
            .map(|m| (m.group, m.notified, m.samples, m.mean_rssi.map(|x| format!("{x:.2}")).unwrap_or_default()))
            .collect();
        Ok(vec![
            ("device_types", table(&self.device_type_distribution)?),
            ("mean_rssi", format!("group,notified,samples,mean_rssi\n{}", table(&mean)?)),
            ("risk", table(&self.risk_percentages)?),
            ("notifications_per_user", table(&self.notifications_per_user)?),
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::{HOUR, MINUTE};
    use proptest::prelude::*;

    fn ev(user: u32, device: u32, day: i64, category: DeviceCategory, rssi: i16, event: EventKind) -> AnonymizedEvent {
        AnonymizedEvent {
            user,
            device,
            at: Timestamp(day * DAY + HOUR),
            category: Some(category),
            rssi,
            notified_device: false,
            event,
        }
    }

    #[test]
    fn all_low_is_zero() {
        let events: Vec<_> = (0..10).map(|u| ev(u, 0, 0, DeviceCategory::Other, -80, EventKind::Sighting)).collect();
        let pts = sliding_risk_percentages(&events, DAY, &RiskParams::default());
        assert_eq!(pts.len(), 1);
        assert_eq!((pts[0].pct_medium, pts[0].pct_high, pts[0].active_donors), (0.0, 0.0, 10));
    }

    #[test]
    fn inactive_users_leave_the_denominator() {
        let note = EventKind::Notification { followed_secs: 40 * MINUTE };
        let events = vec![
            ev(0, 0, 0, DeviceCategory::Durian, -70, note),
            ev(1, 0, 0, DeviceCategory::Other, -80, EventKind::Sighting),
            ev(1, 0, 20, DeviceCategory::Other, -80, EventKind::Sighting),
            ev(2, 0, 20, DeviceCategory::Other, -80, EventKind::Sighting),
        ];
        let pts = sliding_risk_percentages(&events, DAY, &RiskParams::default());
        let early = &pts[0];
        assert_eq!((early.active_donors, early.pct_medium), (2, 50.0));
        let late = pts.last().unwrap();
        assert_eq!((late.active_donors, late.pct_medium), (2, 0.0));
        // Windows ending on days 14..=19 have nobody active.
        assert_eq!(pts.len(), 14);
    }

    #[test]
    fn durian_only_notifications_are_all_accessory() {
        let note = EventKind::Notification { followed_secs: HOUR };
        let events = vec![
            ev(0, 0, 0, DeviceCategory::Durian, -70, note),
            ev(1, 0, 0, DeviceCategory::Other, -90, EventKind::Sighting),
        ];
        let r = fleet_report(&events, &RiskParams::default());
        let durian = r.device_type_distribution.iter().find(|d| d.category == DeviceCategory::Durian).unwrap();
        assert_eq!(durian.notification_pct, 100.0);
        assert_eq!(durian.device_pct, 50.0);
    }

    #[test]
    fn histogram_tail_and_zero_bucket() {
        let note = EventKind::Notification { followed_secs: HOUR };
        let mut events: Vec<_> = (0..25).map(|k| ev(0, k, 0, DeviceCategory::Hele, -60, note)).collect();
        events.push(ev(1, 0, 0, DeviceCategory::Other, -80, EventKind::Sighting));
        let r = fleet_report(&events, &RiskParams::default());
        assert_eq!(
            r.notifications_per_user,
            vec![HistogramBin { notifications: 0, users: 1 }, HistogramBin { notifications: 25, users: 1 }]
        );
    }

    #[test]
    fn rssi_groups_and_csv() {
        let events = vec![
            ev(0, 0, 0, DeviceCategory::Durian, -68, EventKind::Sighting),
            ev(0, 0, 0, DeviceCategory::Durian, -72, EventKind::Sighting),
            ev(0, 1, 0, DeviceCategory::Other, -85, EventKind::Sighting),
        ];
        let r = fleet_report(&events, &RiskParams::default());
        let acc = r.mean_rssi.iter().find(|m| m.group == CategoryGroup::Accessory && !m.notified).unwrap();
        let apple = r.mean_rssi.iter().find(|m| m.group == CategoryGroup::AppleDevice && !m.notified).unwrap();
        assert_eq!(acc.mean_rssi, Some(-70.0));
        assert!(acc.mean_rssi > apple.mean_rssi);
        let tables = r.csv_tables().unwrap();
        assert_eq!(tables.len(), 4);
        assert!(tables[1].1.starts_with("group,notified,samples,mean_rssi\naccessory,false,2,-70.00\n"));
    }

    proptest! {
        #[test]
        fn shares_and_mass_conserve(
            rows in prop::collection::vec((0u32..30, 0u32..5, 0i64..30, prop::sample::select(DeviceCategory::ALL.to_vec()), any::<bool>()), 0..200)
        ) {
            let events: Vec<_> = rows.into_iter().map(|(u, d, day, c, n)| {
                let kind = if n { EventKind::Notification { followed_secs: 3 * HOUR } } else { EventKind::Sighting };
                ev(u, d, day, c, -70, kind)
            }).collect();
            let r = fleet_report(&events, &RiskParams::default());
            let mass: u64 = r.notifications_per_user.iter().map(|b| b.users).sum();
            prop_assert_eq!(mass, r.users);
            for p in &r.risk_percentages {
                prop_assert!((0.0..=100.0).contains(&p.pct_medium) && (0.0..=100.0).contains(&p.pct_high));
                prop_assert!(p.pct_medium + p.pct_high <= 100.0 + 1e-9);
            }
            for d in &r.device_type_distribution {
                prop_assert!((0.0..=100.0).contains(&d.device_pct) && (0.0..=100.0).contains(&d.notification_pct));
            }
        }
    }
}
