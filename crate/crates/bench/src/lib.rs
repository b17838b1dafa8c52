//! Input fixtures shared by the criterion benchmarks in `benches/`.

use sentinel_core::codec::{AdvertisementMode, BleAddress, DeviceCategory};
use sentinel_core::geo::GeoPoint;
use sentinel_core::record::SightingRecord;
use sentinel_core::time::Timestamp;

/// `scans` scan results 15 minutes apart while walking east at 1.4 m/s,
/// each holding one sighting of every one of `devices` separated tags.
pub fn walking_scans(devices: u8, scans: usize) -> Vec<(Timestamp, Vec<SightingRecord>)> {
    let origin = GeoPoint::new(49.8728, 8.6512).expect("valid origin");
    (0..scans)
        .map(|i| {
            let at = Timestamp(1_639_562_400 + 900 * i as i64);
            let location = origin.destination(90.0, 1.4 * 900.0 * i as f64);
            let scan = (0..devices)
                .map(|d| SightingRecord {
                    address: BleAddress::new([0xC0 | (d & 0x3F), d, 0, 0, 0, 1]).expect("static random address"),
                    category: Some(DeviceCategory::ALL[d as usize % 4]),
                    rssi: -60 - (d % 30) as i16,
                    at,
                    location,
                    mode: AdvertisementMode::Separated,
                })
                .collect();
            (at, scan)
        })
        .collect()
}
