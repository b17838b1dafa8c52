use std::collections::BTreeMap;

use super::{TaEventKind, TaStore, UserActivity, VehicularState};
use crate::time::Timestamp;

/// The derived store values the general filter reads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoreViews {
    pub dominant_activity: UserActivity,
    /// Mean speed over pedestrian spans in the window, m/s.
    pub walking_speed: f64,
    pub last_vehicular_state: Option<VehicularState>,
    /// People-density scans are inactive; always false.
    pub people_density: bool,
}

impl StoreViews {
    pub fn is_in_vehicle(&self) -> bool {
        self.last_vehicular_state == Some(VehicularState::Vehicular)
    }
}

pub fn derive_views(store: &TaStore, now: Timestamp, window: i64) -> StoreViews {
    let recent = store.events_in(now - window, now);

    let mut counts: BTreeMap<UserActivity, usize> = BTreeMap::new();
    for e in recent {
        if let TaEventKind::UserActivity(a) = e.kind {
            *counts.entry(a).or_default() += 1;
        }
    }
    let dominant_activity = match counts.values().max() {
        Some(&top) if counts.values().filter(|&&c| c == top).count() == 1 => {
            counts.into_iter().find(|&(_, c)| c == top).map(|(a, _)| a).unwrap_or(UserActivity::Unknown)
        }
        _ => UserActivity::Unknown,
    };

    let last_vehicular_state = store.events_until(now).iter().rev().find_map(|e| match e.kind {
        TaEventKind::VehicularState(v) => Some(v),
        _ => None,
    });

    StoreViews {
        dominant_activity,
        walking_speed: walking_speed(store, now, window),
        last_vehicular_state,
        people_density: false,
    }
}

/// Total distance over total time across consecutive location updates whose
/// span started while the user was pedestrian.
fn walking_speed(store: &TaStore, now: Timestamp, window: i64) -> f64 {
    let mut activity = UserActivity::Unknown;
    let mut prev: Option<(Timestamp, crate::geo::GeoPoint, UserActivity)> = None;
    let (mut meters, mut secs) = (0.0, 0i64);
    for e in store.events_until(now) {
        match e.kind {
            TaEventKind::UserActivity(a) => activity = a,
            TaEventKind::LocationUpdate(p) if e.at > now - window => {
                if let Some((t0, p0, UserActivity::Pedestrian)) = prev {
                    meters += p0.haversine(&p);
                    secs += e.at - t0;
                }
                prev = Some((e.at, p, activity));
            }
            _ => {}
        }
    }
    if secs > 0 {
        meters / secs as f64
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::ios::TaEvent;

    fn push(store: &mut TaStore, at: i64, kind: TaEventKind) {
        store.push(TaEvent::new(Timestamp(at), kind));
    }

    #[test]
    fn majority_activity_wins() {
        let mut s = TaStore::new();
        for (t, a) in [
            (1, UserActivity::Pedestrian),
            (2, UserActivity::Pedestrian),
            (3, UserActivity::Vehicular),
            (4, UserActivity::Pedestrian),
        ] {
            push(&mut s, t, TaEventKind::UserActivity(a));
        }
        assert_eq!(derive_views(&s, Timestamp(10), 900).dominant_activity, UserActivity::Pedestrian);
    }

    #[test]
    fn empty_window_and_ties_are_unknown() {
        let mut s = TaStore::new();
        let v = derive_views(&s, Timestamp(1000), 900);
        assert_eq!(v.dominant_activity, UserActivity::Unknown);
        assert!(!v.people_density);
        assert_eq!(v.last_vehicular_state, None);
        push(&mut s, 1, TaEventKind::UserActivity(UserActivity::Static));
        push(&mut s, 2, TaEventKind::UserActivity(UserActivity::Pedestrian));
        assert_eq!(derive_views(&s, Timestamp(10), 900).dominant_activity, UserActivity::Unknown);
        // Both fell out of the window.
        assert_eq!(derive_views(&s, Timestamp(1000), 900).dominant_activity, UserActivity::Unknown);
    }

    #[test]
    fn last_vehicular_state_ignores_window() {
        let mut s = TaStore::new();
        push(&mut s, 1, TaEventKind::VehicularState(VehicularState::Vehicular));
        push(&mut s, 5, TaEventKind::VehicularState(VehicularState::NonVehicular));
        push(&mut s, 6, TaEventKind::VehicularState(VehicularState::Vehicular));
        assert!(derive_views(&s, Timestamp(5000), 900).is_in_vehicle());
        assert!(!derive_views(&s, Timestamp(5), 900).is_in_vehicle());
    }

    #[test]
    fn walking_speed_covers_pedestrian_spans_only() {
        let o = GeoPoint::new(49.0, 8.0).unwrap();
        let mut s = TaStore::new();
        push(&mut s, 0, TaEventKind::UserActivity(UserActivity::Pedestrian));
        push(&mut s, 0, TaEventKind::LocationUpdate(o));
        push(&mut s, 100, TaEventKind::UserActivity(UserActivity::Vehicular));
        push(&mut s, 100, TaEventKind::LocationUpdate(o.destination(0.0, 150.0)));
        push(&mut s, 101, TaEventKind::LocationUpdate(o.destination(0.0, 150.0)));
        push(&mut s, 200, TaEventKind::LocationUpdate(o.destination(0.0, 1150.0)));
        let v = derive_views(&s, Timestamp(200), 900);
        assert!((v.walking_speed - 1.5).abs() < 1e-6, "{}", v.walking_speed);
    }
}
