//! Find My offline-finding advertisements, tracker simulation and the
//! AirGuard and iOS tracking-detection engines.

pub mod airguard;
pub mod analytics;
pub mod codec;
pub mod geo;
pub mod harness;
pub mod ios;
pub mod ranging;
pub mod record;
pub mod sim;
pub mod time;

pub use codec::{Advertisement, AdvertisementMode, BleAddress, CodecError, DeviceCategory, PublicKeyBytes, StatusByte};
pub use geo::GeoPoint;
pub use record::{DetectorVerdict, Engine, SightingRecord};
pub use time::Timestamp;
