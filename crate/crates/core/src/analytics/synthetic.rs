use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{AnonymizedEvent, EventKind};
use crate::codec::DeviceCategory;
use crate::record::{RSSI_MAX, RSSI_MIN};
use crate::time::{Timestamp, DAY, HOUR, MINUTE};

/// Parameters of a generated donor population. Users `0..high_users` are
/// followed more than a day in every two-week window, the next
/// `medium_users` for a short time every day, everyone else never by an
/// accessory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticFleet {
    pub users: u32,
    pub days: i64,
    pub high_users: u32,
    pub medium_users: u32,
    /// Probability that a background device is a Find My accessory.
    pub accessory_share: f64,
    pub accessory_rssi: f64,
    pub apple_rssi: f64,
    pub start: Timestamp,
    pub seed: u64,
}

impl Default for SyntheticFleet {
    fn default() -> Self {
        SyntheticFleet {
            users: 500,
            days: 28,
            high_users: 1,
            medium_users: 3,
            accessory_share: 0.04,
            accessory_rssi: -70.0,
            apple_rssi: -85.0,
            start: Timestamp(1_640_995_200),
            seed: 0,
        }
    }
}

const ACCESSORIES: [DeviceCategory; 3] = [DeviceCategory::Durian, DeviceCategory::Hawkeye, DeviceCategory::Hele];

pub fn synthetic_fleet(cfg: &SyntheticFleet) -> Vec<AnonymizedEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = Normal::new(0.0, 6.0).expect("finite sigma");
    let mut out = Vec::new();
    for user in 0..cfg.users {
        let mut next_device = 0u32;
        let rssi_of = |mean: f64, rng: &mut ChaCha8Rng| {
            (mean + jitter.sample(rng)).round().clamp(RSSI_MIN as f64, RSSI_MAX as f64) as i16
        };
        let mut push = |device, at, category, rssi, notified_device, event| {
            out.push(AnonymizedEvent { user, device, at, category: Some(category), rssi, notified_device, event })
        };
        for day in 0..cfg.days {
            let midnight = cfg.start + day * DAY;
            for _ in 0..rng.random_range(3..=8) {
                let at = midnight + rng.random_range(0..DAY);
                let accessory = rng.random::<f64>() < cfg.accessory_share;
                let (category, mean) = if accessory {
                    (ACCESSORIES[rng.random_range(0..3)], cfg.accessory_rssi)
                } else {
                    (DeviceCategory::Other, cfg.apple_rssi)
                };
                push(next_device, at, category, rssi_of(mean, &mut rng), false, EventKind::Sighting);
                next_device += 1;
            }

            let follows: &[(i64, i64, DeviceCategory)] = if user < cfg.high_users {
                &[
                    (6 * HOUR, 12 * HOUR + 30 * MINUTE, DeviceCategory::Durian),
                    (18 * HOUR, 12 * HOUR + 30 * MINUTE, DeviceCategory::Durian),
                ]
            } else if user < cfg.high_users + cfg.medium_users {
                &[(12 * HOUR, 40 * MINUTE, DeviceCategory::Hawkeye)]
            } else {
                &[]
            };
            for &(offset, followed, category) in follows {
                let at = midnight + offset;
                let rssi = rssi_of(cfg.accessory_rssi + 5.0, &mut rng);
                push(next_device, at - MINUTE, category, rssi, true, EventKind::Sighting);
                push(next_device, at, category, rssi, true, EventKind::Notification { followed_secs: followed });
                next_device += 1;
            }

            if rng.random::<f64>() < 0.05 {
                let at = midnight + rng.random_range(0..DAY);
                let rssi = rssi_of(cfg.apple_rssi, &mut rng);
                push(next_device, at - MINUTE, DeviceCategory::Other, rssi, true, EventKind::Sighting);
                push(
                    next_device,
                    at,
                    DeviceCategory::Other,
                    rssi,
                    true,
                    EventKind::Notification { followed_secs: HOUR },
                );
                if rng.random::<f64>() < 0.3 {
                    push(next_device, at + MINUTE, DeviceCategory::Other, rssi, true, EventKind::FalseAlarmReport);
                }
                next_device += 1;
            }
        }
    }
    out.sort_by_key(|e| (e.at, e.user, e.device));
    out
}
