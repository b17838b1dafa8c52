//! GATT characteristics that make a Find My accessory play or stop a sound.
//!
//! This is a lookup table for radio tooling; nothing here opens a
//! connection. UUID strings are kept exactly as observed, including the
//! AirTag characteristic, which is one hex digit short of a full UUID.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SoundDeviceClass {
    AirTag,
    AccessoryOrAirPods,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SoundAction {
    Play,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SoundCommand {
    pub device_class: SoundDeviceClass,
    pub action: SoundAction,
    pub service_uuid: &'static str,
    pub characteristic_uuid: &'static str,
    pub value: &'static [u8],
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{device_class:?} does not support {action:?}")]
pub struct Unsupported {
    pub device_class: SoundDeviceClass,
    pub action: SoundAction,
}

const AIRTAG_SERVICE: &str = "7DFC9000-7D1C-4951-86AA-8D9728F8D66C";
const AIRTAG_CHARACTERISTIC: &str = "7DFC9001-7D1C-4951-86AA-8D9728F8D66";
const ACCESSORY_SERVICE: &str = "FD44";
const ACCESSORY_CHARACTERISTIC: &str = "4F860003-943B-49EF-BED4-2F730304427A";

pub fn sound_command(device_class: SoundDeviceClass, action: SoundAction) -> Result<SoundCommand, Unsupported> {
    let (service_uuid, characteristic_uuid, value): (_, _, &'static [u8]) = match (device_class, action) {
        (SoundDeviceClass::AirTag, SoundAction::Play) => (AIRTAG_SERVICE, AIRTAG_CHARACTERISTIC, &[0xAF]),
        // The AirTag firmware only accepts the play opcode.
        (SoundDeviceClass::AirTag, SoundAction::Stop) => return Err(Unsupported { device_class, action }),
        (SoundDeviceClass::AccessoryOrAirPods, SoundAction::Play) => {
            (ACCESSORY_SERVICE, ACCESSORY_CHARACTERISTIC, &[0x01, 0x00, 0x03])
        }
        (SoundDeviceClass::AccessoryOrAirPods, SoundAction::Stop) => {
            (ACCESSORY_SERVICE, ACCESSORY_CHARACTERISTIC, &[0x01, 0x01, 0x03])
        }
    };
    Ok(SoundCommand { device_class, action, service_uuid, characteristic_uuid, value })
}
