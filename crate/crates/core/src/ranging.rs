//! Log-distance path loss: `rssi = P1 - 10 n log10(d)`.

use serde::{Deserialize, Serialize};

use crate::record::{RSSI_MAX, RSSI_MIN};

/// Distances below this are treated as this, so a tag in the user's pocket
/// does not produce an unbounded RSSI.
pub const MIN_DISTANCE_M: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLossModel {
    /// RSSI measured at one meter, in dBm.
    pub rssi_at_1m: f64,
    /// Path-loss exponent (2.0 in free space).
    pub exponent: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel { rssi_at_1m: -61.0, exponent: 2.0 }
    }
}

impl PathLossModel {
    pub fn rssi_at(&self, distance_m: f64) -> f64 {
        self.rssi_at_1m - 10.0 * self.exponent * distance_m.max(MIN_DISTANCE_M).log10()
    }

    /// Inverts [`rssi_at`](Self::rssi_at). Input is clamped to the valid
    /// RSSI range first.
    pub fn distance_for(&self, rssi: f64) -> f64 {
        let rssi = rssi.clamp(RSSI_MIN as f64, RSSI_MAX as f64);
        10f64.powf((self.rssi_at_1m - rssi) / (10.0 * self.exponent))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_one_decade() {
        let m = PathLossModel::default();
        assert!((m.distance_for(m.rssi_at_1m) - 1.0).abs() < 1e-12);
        assert!((m.distance_for(m.rssi_at_1m - 10.0 * m.exponent) - 10.0).abs() < 1e-9);
    }

    #[test]
    fn forward_and_inverse_agree() {
        let m = PathLossModel { rssi_at_1m: -59.0, exponent: 2.7 };
        for d in [0.5, 1.0, 3.0, 12.0, 40.0] {
            assert!((m.distance_for(m.rssi_at(d)) - d).abs() < 1e-9);
        }
    }
}
