//! Rotating key schedules.
//!
//! Key bytes are a keyed hash of (seed, rotation index): unlinkable across
//! rotations, which is all the detectors can observe. No real P-224 points
//! are derived.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codec::{PublicKeyBytes, KEY_LEN};
use crate::time::{Timestamp, DAY, HOUR, MINUTE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "interval")]
pub enum KeyPolicy {
    /// Rotate when local time crosses 04:00.
    #[serde(rename = "daily_4am_local")]
    DailyAt4amLocal,
    /// Rotate every 15 minutes since pairing.
    #[serde(rename = "every_15_min")]
    Every15Min,
    /// Never rotate.
    Static,
    /// Rotate every `n` seconds since pairing.
    EveryInterval(i64),
}

const ROTATION_HOUR: i64 = 4 * HOUR;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySchedule {
    pub policy: KeyPolicy,
    pub seed: u64,
    /// Pairing instant; interval policies count boundaries from here.
    pub paired_at: Timestamp,
    rotation_index: i64,
    current_key: PublicKeyBytes,
}

impl KeySchedule {
    /// Builds the schedule positioned at the pairing instant.
    pub fn new(policy: KeyPolicy, seed: u64, paired_at: Timestamp, tz_offset: i64) -> Self {
        let rotation_index = rotation_index(policy, paired_at, paired_at, tz_offset);
        KeySchedule { policy, seed, paired_at, rotation_index, current_key: derive_key(seed, rotation_index) }
    }

    pub fn current_key(&self) -> &PublicKeyBytes {
        &self.current_key
    }

    pub fn rotation_index(&self) -> i64 {
        self.rotation_index
    }

    /// The schedule as it stands at `now`.
    pub fn rotate_key(&self, now: Timestamp, tz_offset: i64) -> KeySchedule {
        let mut next = self.clone();
        next.advance(now, tz_offset);
        next
    }

    /// In-place variant of [`rotate_key`](Self::rotate_key); returns whether
    /// the key changed.
    pub fn advance(&mut self, now: Timestamp, tz_offset: i64) -> bool {
        let idx = rotation_index(self.policy, self.paired_at, now, tz_offset);
        if idx == self.rotation_index {
            return false;
        }
        self.rotation_index = idx;
        self.current_key = derive_key(self.seed, idx);
        true
    }
}

fn rotation_index(policy: KeyPolicy, paired_at: Timestamp, now: Timestamp, tz_offset: i64) -> i64 {
    match policy {
        KeyPolicy::Static => 0,
        KeyPolicy::DailyAt4amLocal => (now.secs() + tz_offset - ROTATION_HOUR).div_euclid(DAY),
        KeyPolicy::Every15Min => (now - paired_at).div_euclid(15 * MINUTE),
        KeyPolicy::EveryInterval(secs) => (now - paired_at).div_euclid(secs.max(1)),
    }
}

pub fn derive_key(seed: u64, rotation_index: i64) -> PublicKeyBytes {
    let mut h = Sha256::new();
    h.update(b"sentinel/key-schedule");
    h.update(seed.to_le_bytes());
    h.update(rotation_index.to_le_bytes());
    let digest = h.finalize();
    let mut key = [0u8; KEY_LEN];
    key.copy_from_slice(&digest[..KEY_LEN]);
    PublicKeyBytes(key)
}
