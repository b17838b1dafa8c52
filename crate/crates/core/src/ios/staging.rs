use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::Suspicion;
use crate::codec::{BleAddress, DeviceCategory};
use crate::record::Engine;
use crate::time::{Timestamp, HOUR, MINUTE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NotifyPolicy {
    /// Delay between staging and the deadline check.
    pub staging_duration: i64,
    /// Extension granted when the device is not around at the deadline.
    pub prolong_duration: i64,
    pub max_prolongs: u32,
    /// Staged devices unseen for longer than this are forgotten.
    pub recency_window: i64,
}

impl Default for NotifyPolicy {
    fn default() -> Self {
        NotifyPolicy {
            staging_duration: 4 * HOUR,
            prolong_duration: 4 * HOUR,
            max_prolongs: 1,
            recency_window: 15 * MINUTE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagingEntry {
    pub address: BleAddress,
    pub category: DeviceCategory,
    pub detector: Engine,
    pub staged_at: Timestamp,
    pub staging_end: Timestamp,
    pub prolong_count: u32,
}

/// Per-run facts the policy decides on.
#[derive(Debug, Clone, Copy)]
pub struct NotifyContext<'a> {
    pub now: Timestamp,
    pub at_home: bool,
    /// Addresses heard since the previous run.
    pub seen_now: &'a BTreeSet<BleAddress>,
    pub last_seen: &'a BTreeMap<BleAddress, Timestamp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Notification {
    pub address: BleAddress,
    pub category: DeviceCategory,
    pub detector: Engine,
    pub staged_at: Timestamp,
    pub at: Timestamp,
}

/// Stages new suspicions and decides which staged devices notify now.
/// Returns the notifications and the staging list to carry forward.
pub fn notify_policy(
    policy: &NotifyPolicy,
    suspicious: &[Suspicion],
    mut staging: Vec<StagingEntry>,
    ctx: &NotifyContext,
) -> (Vec<Notification>, Vec<StagingEntry>) {
    for s in suspicious {
        if !staging.iter().any(|e| e.address == s.address) {
            staging.push(StagingEntry {
                address: s.address,
                category: s.category,
                detector: s.detector,
                staged_at: ctx.now,
                staging_end: ctx.now + policy.staging_duration,
                prolong_count: 0,
            });
        }
    }

    let mut notifications = Vec::new();
    let mut kept = Vec::new();
    for mut e in staging {
        let fresh = ctx.last_seen.get(&e.address).is_some_and(|&t| ctx.now - t <= policy.recency_window);
        if !fresh {
            continue;
        }
        let present = ctx.seen_now.contains(&e.address);
        if present && (ctx.at_home || ctx.now >= e.staging_end) {
            notifications.push(Notification {
                address: e.address,
                category: e.category,
                detector: e.detector,
                staged_at: e.staged_at,
                at: ctx.now,
            });
            continue;
        }
        if ctx.now >= e.staging_end {
            if e.prolong_count >= policy.max_prolongs {
                continue;
            }
            e.prolong_count += 1;
            e.staging_end += policy.prolong_duration;
        }
        kept.push(e);
    }
    (notifications, kept)
}
