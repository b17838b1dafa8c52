use serde::{Deserialize, Serialize};

use super::{derive_views, StoreViews, Suspicion, TaDevice, TaStore, UserActivity};
use crate::airguard::travel_distance;
use crate::codec::DeviceCategory;
use crate::record::Engine;
use crate::time::{Timestamp, MINUTE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneralFilterParams {
    /// Only sightings in `(now - recency_window, now]` are considered.
    pub recency_window: i64,
    /// Strict lower bound on the followed duration, seconds.
    pub threshold_duration: i64,
    /// Strict lower bound on the followed distance, meters.
    pub threshold_distance: f64,
    /// Seconds between filter runs.
    pub run_period: i64,
    /// Walking above this speed (m/s) does not count as walking.
    pub max_walking_speed: f64,
}

impl Default for GeneralFilterParams {
    fn default() -> Self {
        GeneralFilterParams {
            recency_window: 15 * MINUTE,
            threshold_duration: 10 * MINUTE,
            threshold_distance: 840.0,
            run_period: 2 * MINUTE,
            max_walking_speed: 3.0,
        }
    }
}

/// What one device did over the recency window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceMetrics {
    pub distance: f64,
    pub duration: i64,
}

impl DeviceMetrics {
    pub fn over(device: &TaDevice, from: Timestamp, to: Timestamp) -> Option<Self> {
        let recent = device.sightings_in(from, to);
        let (first, last) = (recent.first()?, recent.last()?);
        Some(DeviceMetrics { distance: travel_distance(recent), duration: last.at - first.at })
    }
}

/// The general-filter predicate on already derived values.
pub fn is_suspicious(views: &StoreViews, metrics: &DeviceMetrics, params: &GeneralFilterParams) -> bool {
    let is_driving =
        (views.is_in_vehicle() || views.people_density) && views.dominant_activity == UserActivity::Vehicular;
    let is_walking =
        views.dominant_activity == UserActivity::Pedestrian && views.walking_speed < params.max_walking_speed;
    (is_driving || is_walking)
        && metrics.distance > params.threshold_distance
        && metrics.duration > params.threshold_duration
}

pub fn general_filter(store: &TaStore, now: Timestamp, params: &GeneralFilterParams) -> Vec<Suspicion> {
    let views = derive_views(store, now, params.recency_window);
    store
        .devices()
        .filter(|d| d.category != DeviceCategory::Other)
        .filter_map(|d| {
            let m = DeviceMetrics::over(d, now - params.recency_window, now)?;
            is_suspicious(&views, &m, params).then_some(Suspicion {
                address: d.address,
                category: d.category,
                distance: m.distance,
                duration: m.duration,
                detector: Engine::IosGeneral,
            })
        })
        .collect()
}
