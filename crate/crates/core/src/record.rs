//! Records exchanged between the simulator, the detectors and the analytics.

use std::fmt;
use std::io::{self, BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::codec::{Advertisement, AdvertisementMode, BleAddress, DeviceCategory};
use crate::geo::GeoPoint;
use crate::time::Timestamp;

pub const RSSI_MIN: i16 = -120;
pub const RSSI_MAX: i16 = 0;

/// One reception of a Find My frame by the scanning phone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SightingRecord {
    pub address: BleAddress,
    /// `None` for nearby-state frames, which carry no status byte.
    pub category: Option<DeviceCategory>,
    pub rssi: i16,
    pub at: Timestamp,
    pub location: GeoPoint,
    pub mode: AdvertisementMode,
}

impl SightingRecord {
    pub fn from_advertisement(adv: &Advertisement, rssi: i16, at: Timestamp, location: GeoPoint) -> Self {
        SightingRecord {
            address: adv.address,
            category: adv.category(),
            rssi: rssi.clamp(RSSI_MIN, RSSI_MAX),
            at,
            location,
            mode: adv.mode,
        }
    }

    pub fn is_separated(&self) -> bool {
        self.mode == AdvertisementMode::Separated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[serde(rename = "airguard")]
    AirGuard,
    IosGeneral,
    IosVisit,
    IosSingleVisit,
}

impl Engine {
    pub fn is_ios(self) -> bool {
        self != Engine::AirGuard
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::AirGuard => "airguard",
            Engine::IosGeneral => "ios_general",
            Engine::IosVisit => "ios_visit",
            Engine::IosSingleVisit => "ios_single_visit",
        })
    }
}

/// A tracking notification raised by one of the detection engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorVerdict {
    pub address: BleAddress,
    pub category: DeviceCategory,
    pub notified_at: Timestamp,
    /// Distinct scan windows in which the device was seen.
    pub sighting_count: u32,
    /// First-to-last sighting span backing the verdict, in seconds.
    pub span: i64,
    /// Distance travelled with the user, in meters.
    pub distance: f64,
    pub engine: Engine,
}

/// Writes one JSON object per line.
pub fn write_json_lines<T: Serialize>(mut out: impl Write, items: impl IntoIterator<Item = T>) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, &item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads one JSON object per non-blank line.
pub fn read_json_lines<T: DeserializeOwned>(input: impl BufRead) -> io::Result<Vec<T>> {
    let mut items = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1)))?;
        items.push(item);
    }
    Ok(items)
}
