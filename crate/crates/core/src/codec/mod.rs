//! Find My offline-finding advertisement codec.
//!
//! A separated-state frame packs a 28-byte compressed P-224 public key into
//! the BLE address plus a 31-byte manufacturer-specific AD structure:
//!
//! ```text
//! address  [0]     key[0] | 0b1100_0000
//!          [1..6]  key[1..6]
//! payload  [0]     0x1E  AD length (30)
//!          [1]     0xFF  manufacturer-specific data
//!          [2..4]  4C 00 Apple company ID, little-endian
//!          [4]     0x12  Find My network type
//!          [5]     0x19  data length (25)
//!          [6]     status
//!          [7..29] key[6..28]
//!          [29]    key[0] >> 6
//!          [30]    hint
//! ```
//!
//! Nearby-state accessories only rotate the address and carry no Find My
//! payload; those decode to [`AdvertisementMode::Nearby`].

mod hexdump;
mod sound;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use hexdump::{format_hex_frame, parse_hex_dump, parse_hex_frame};
pub use sound::{sound_command, SoundAction, SoundCommand, SoundDeviceClass};

pub const KEY_LEN: usize = 28;
pub const ADDRESS_LEN: usize = 6;
pub const PAYLOAD_LEN: usize = 31;

pub const AD_LENGTH: u8 = 0x1E;
pub const AD_TYPE_MANUFACTURER: u8 = 0xFF;
pub const APPLE_COMPANY_ID: u16 = 0x004C;
pub const FIND_MY_NETWORK_TYPE: u8 = 0x12;
pub const FIND_MY_DATA_LENGTH: u8 = 0x19;

const STATIC_MARKER: u8 = 0b1100_0000;

const OFFSET_STATUS: usize = 6;
const OFFSET_KEY: usize = 7;
const OFFSET_KEY_BITS: usize = 29;
const OFFSET_HINT: usize = 30;

/// The six fixed bytes at the start of every separated-state payload.
pub const HEADER: [u8; 6] = [
    AD_LENGTH,
    AD_TYPE_MANUFACTURER,
    (APPLE_COMPANY_ID & 0xFF) as u8,
    (APPLE_COMPANY_ID >> 8) as u8,
    FIND_MY_NETWORK_TYPE,
    FIND_MY_DATA_LENGTH,
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("public key must be {KEY_LEN} bytes, got {0}")]
    KeyLength(usize),
    #[error("BLE address must be {ADDRESS_LEN} bytes, got {0}")]
    AddressLength(usize),
    #[error("address {0:02X?} lacks the static-address marker bits")]
    BadAddress([u8; ADDRESS_LEN]),
    #[error("payload must be {expected} bytes, got {actual}")]
    MalformedLength { expected: usize, actual: usize },
    #[error("not a Find My frame: byte {offset} is {found:#04x}, expected {expected:#04x}")]
    NotFindMy { offset: usize, expected: u8, found: u8 },
    #[error("invalid hex token {0:?}")]
    BadHex(String),
}

/// A compressed P-224 public key, treated as opaque bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PublicKeyBytes(pub [u8; KEY_LEN]);

impl PublicKeyBytes {
    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl TryFrom<&[u8]> for PublicKeyBytes {
    type Error = CodecError;

    fn try_from(bytes: &[u8]) -> Result<Self, CodecError> {
        let arr: [u8; KEY_LEN] = bytes.try_into().map_err(|_| CodecError::KeyLength(bytes.len()))?;
        Ok(PublicKeyBytes(arr))
    }
}

impl fmt::Debug for PublicKeyBytes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKeyBytes(")?;
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

/// A static random BLE address (top two bits of byte 0 set).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BleAddress([u8; ADDRESS_LEN]);

impl BleAddress {
    pub fn new(bytes: [u8; ADDRESS_LEN]) -> Result<Self, CodecError> {
        if bytes[0] & STATIC_MARKER != STATIC_MARKER {
            return Err(CodecError::BadAddress(bytes));
        }
        Ok(BleAddress(bytes))
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CodecError> {
        let arr: [u8; ADDRESS_LEN] = bytes.try_into().map_err(|_| CodecError::AddressLength(bytes.len()))?;
        BleAddress::new(arr)
    }

    /// The address a key advertises under: `key[0] | 0xC0 || key[1..6]`.
    pub fn from_key(key: &PublicKeyBytes) -> Self {
        let k = key.as_bytes();
        BleAddress([k[0] | STATIC_MARKER, k[1], k[2], k[3], k[4], k[5]])
    }

    pub fn bytes(&self) -> &[u8; ADDRESS_LEN] {
        &self.0
    }
}

impl fmt::Display for BleAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = &self.0;
        write!(f, "{:02X}:{:02X}:{:02X}:{:02X}:{:02X}:{:02X}", b[0], b[1], b[2], b[3], b[4], b[5])
    }
}

impl fmt::Debug for BleAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BleAddress({self})")
    }
}

impl FromStr for BleAddress {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self, CodecError> {
        let bytes = s
            .split(':')
            .map(|tok| u8::from_str_radix(tok, 16).map_err(|_| CodecError::BadHex(tok.to_string())))
            .collect::<Result<Vec<u8>, _>>()?;
        BleAddress::from_slice(&bytes)
    }
}

impl Serialize for BleAddress {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BleAddress {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The status byte of a separated-state frame.
///
/// Bits 2-3 (zero-indexed) carry the device type; bits 6-7 are the battery
/// level. The remaining bits are carried opaquely.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatusByte(pub u8);

impl StatusByte {
    pub fn type_bits(self) -> u8 {
        (self.0 >> 2) & 0b11
    }

    pub fn battery_bits(self) -> u8 {
        self.0 >> 6
    }

    /// A status byte with only the type bits of `category` set.
    pub fn for_category(category: DeviceCategory) -> Self {
        StatusByte(category.type_bits() << 2)
    }

    pub fn with_battery(self, level: u8) -> Self {
        StatusByte((self.0 & 0b0011_1111) | ((level & 0b11) << 6))
    }
}

/// Device types distinguished by the iOS tracking-avoidance logic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceCategory {
    /// Find My capable Apple devices (iPhone, Mac, iPad) and their clones.
    Other,
    /// AirTag.
    Durian,
    /// Third-party Find My accessories such as the Chipolo ONE Spot.
    Hawkeye,
    /// Headphones such as AirPods Pro.
    Hele,
}

impl DeviceCategory {
    pub const ALL: [DeviceCategory; 4] =
        [DeviceCategory::Other, DeviceCategory::Durian, DeviceCategory::Hawkeye, DeviceCategory::Hele];

    pub fn from_type_bits(bits: u8) -> Self {
        match bits & 0b11 {
            0b00 => DeviceCategory::Other,
            0b01 => DeviceCategory::Durian,
            0b10 => DeviceCategory::Hawkeye,
            _ => DeviceCategory::Hele,
        }
    }

    pub fn type_bits(self) -> u8 {
        match self {
            DeviceCategory::Other => 0b00,
            DeviceCategory::Durian => 0b01,
            DeviceCategory::Hawkeye => 0b10,
            DeviceCategory::Hele => 0b11,
        }
    }

    /// True for Find My accessories, false for Apple devices and clones.
    pub fn is_accessory(self) -> bool {
        self != DeviceCategory::Other
    }

    pub fn label(self) -> &'static str {
        match self {
            DeviceCategory::Other => "other",
            DeviceCategory::Durian => "durian",
            DeviceCategory::Hawkeye => "hawkeye",
            DeviceCategory::Hele => "hele",
        }
    }
}

impl FromStr for DeviceCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "other" => Ok(DeviceCategory::Other),
            "durian" | "d" => Ok(DeviceCategory::Durian),
            "hawkeye" | "h" => Ok(DeviceCategory::Hawkeye),
            "hele" => Ok(DeviceCategory::Hele),
            _ => Err(format!("unknown device category {s:?}")),
        }
    }
}

pub fn classify_device(status: StatusByte) -> DeviceCategory {
    DeviceCategory::from_type_bits(status.type_bits())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvertisementMode {
    Nearby,
    Separated,
}

/// A decoded Find My frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Advertisement {
    pub address: BleAddress,
    pub mode: AdvertisementMode,
    payload: Option<[u8; PAYLOAD_LEN]>,
}

impl Advertisement {
    /// An address-only frame as broadcast in the nearby state.
    pub fn nearby(address: BleAddress) -> Self {
        Advertisement { address, mode: AdvertisementMode::Nearby, payload: None }
    }

    /// The raw manufacturer payload; empty for nearby frames.
    pub fn payload(&self) -> &[u8] {
        self.payload.as_ref().map(|p| p.as_slice()).unwrap_or(&[])
    }

    pub fn status(&self) -> Option<StatusByte> {
        self.payload.map(|p| StatusByte(p[OFFSET_STATUS]))
    }

    pub fn hint(&self) -> Option<u8> {
        self.payload.map(|p| p[OFFSET_HINT])
    }

    /// Device category; nearby frames carry no status and report `None`.
    pub fn category(&self) -> Option<DeviceCategory> {
        self.status().map(classify_device)
    }

    /// Reassembles the full public key from a separated frame.
    pub fn public_key(&self) -> Option<PublicKeyBytes> {
        let p = self.payload?;
        let a = self.address.bytes();
        let mut key = [0u8; KEY_LEN];
        key[0] = (a[0] & !STATIC_MARKER) | (p[OFFSET_KEY_BITS] << 6);
        key[1..6].copy_from_slice(&a[1..6]);
        key[6..].copy_from_slice(&p[OFFSET_KEY..OFFSET_KEY_BITS]);
        Some(PublicKeyBytes(key))
    }
}

pub fn encode_advertisement(key: &PublicKeyBytes, status: StatusByte, hint: u8) -> Advertisement {
    let k = key.as_bytes();
    let mut payload = [0u8; PAYLOAD_LEN];
    payload[..HEADER.len()].copy_from_slice(&HEADER);
    payload[OFFSET_STATUS] = status.0;
    payload[OFFSET_KEY..OFFSET_KEY_BITS].copy_from_slice(&k[6..]);
    payload[OFFSET_KEY_BITS] = k[0] >> 6;
    payload[OFFSET_HINT] = hint;
    Advertisement { address: BleAddress::from_key(key), mode: AdvertisementMode::Separated, payload: Some(payload) }
}

/// Encodes from an unchecked key slice.
pub fn encode_raw(key: &[u8], status: StatusByte, hint: u8) -> Result<Advertisement, CodecError> {
    Ok(encode_advertisement(&PublicKeyBytes::try_from(key)?, status, hint))
}

pub fn decode_advertisement(address: &[u8], payload: &[u8]) -> Result<Advertisement, CodecError> {
    let address = BleAddress::from_slice(address)?;
    if payload.is_empty() {
        return Ok(Advertisement::nearby(address));
    }
    let payload: [u8; PAYLOAD_LEN] =
        payload.try_into().map_err(|_| CodecError::MalformedLength { expected: PAYLOAD_LEN, actual: payload.len() })?;
    for (offset, (&expected, &found)) in HEADER.iter().zip(payload.iter()).enumerate() {
        if expected != found {
            return Err(CodecError::NotFindMy { offset, expected, found });
        }
    }
    if payload[OFFSET_KEY_BITS] > 0b11 {
        return Err(CodecError::NotFindMy { offset: OFFSET_KEY_BITS, expected: 0b11, found: payload[OFFSET_KEY_BITS] });
    }
    Ok(Advertisement { address, mode: AdvertisementMode::Separated, payload: Some(payload) })
}
