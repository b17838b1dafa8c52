use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    LowLatency,
    Balanced,
    LowPower,
    Opportunistic,
}

impl ScanMode {
    pub const ALL: [ScanMode; 4] =
        [ScanMode::LowLatency, ScanMode::Balanced, ScanMode::LowPower, ScanMode::Opportunistic];

    /// Probability that a single in-range frame is received.
    pub fn detection_probability(self) -> f64 {
        match self {
            ScanMode::LowLatency => 1.0,
            ScanMode::Balanced => 0.8,
            ScanMode::LowPower => 0.5,
            ScanMode::Opportunistic => 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub devices: usize,
    /// Scan durations in seconds.
    pub durations: Vec<u32>,
    pub modes: Vec<(ScanMode, f64)>,
    pub scans: usize,
    /// Seconds between frames of one device.
    pub emission_interval: f64,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            devices: 8,
            durations: (1..=10).collect(),
            modes: ScanMode::ALL.iter().map(|&m| (m, m.detection_probability())).collect(),
            scans: 10,
            emission_interval: 2.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMatrix {
    pub durations: Vec<u32>,
    pub modes: Vec<ScanMode>,
    /// `mean_discovered[mode][duration]`.
    pub mean_discovered: Vec<Vec<f64>>,
}

/// Mean number of devices heard per scan for every (duration, mode) pair.
/// All pairs share the same frame phases and reception draws, so counts
/// never decrease with longer scans or likelier reception.
pub fn scan_parameter_sweep(cfg: &SweepConfig) -> SweepMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let longest = cfg.durations.iter().copied().max().unwrap_or(0) as f64;
    let interval = cfg.emission_interval.max(1e-3);
    let frames = (longest / interval).ceil() as usize + 1;
    // draws[scan][device] = (phase, per-frame reception draws)
    let draws: Vec<Vec<(f64, Vec<f64>)>> = (0..cfg.scans)
        .map(|_| {
            (0..cfg.devices)
                .map(|_| (rng.random::<f64>() * interval, (0..frames).map(|_| rng.random::<f64>()).collect()))
                .collect()
        })
        .collect();

    let mean_discovered = cfg
        .modes
        .iter()
        .map(|&(_, p)| {
            cfg.durations
                .iter()
                .map(|&d| {
                    let heard: usize = draws
                        .iter()
                        .flatten()
                        .filter(|(phase, u)| {
                            u.iter().enumerate().any(|(k, &u)| phase + k as f64 * interval < d as f64 && u < p)
                        })
                        .count();
                    if cfg.scans == 0 {
                        0.0
                    } else {
                        heard as f64 / cfg.scans as f64
                    }
                })
                .collect()
        })
        .collect();
    SweepMatrix { durations: cfg.durations.clone(), modes: cfg.modes.iter().map(|m| m.0).collect(), mean_discovered }
}

impl SweepMatrix {
    pub fn to_table(&self) -> String {
        let mut out = String::from("mode          ");
        for d in &self.durations {
            let _ = write!(out, "{:>6}", format!("{d}s"));
        }
        out.push('\n');
        for (m, row) in self.modes.iter().zip(&self.mean_discovered) {
            let name = serde_json::to_value(m).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            let _ = write!(out, "{name:<14}");
            for v in row {
                let _ = write!(out, "{v:>6.1}");
            }
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,duration_s,mean_discovered\n");
        for (m, row) in self.modes.iter().zip(&self.mean_discovered) {
            let name = serde_json::to_value(m).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
            for (d, v) in self.durations.iter().zip(row) {
                let _ = writeln!(out, "{name},{d},{v}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes_and_monotonicity() {
        let m = scan_parameter_sweep(&SweepConfig::default());
        let all: Vec<f64> = m.mean_discovered.iter().flatten().copied().collect();
        let max = all.iter().copied().fold(f64::MIN, f64::max);
        let min = all.iter().copied().fold(f64::MAX, f64::min);
        assert_eq!(m.mean_discovered[0][9], max);
        assert_eq!(m.mean_discovered[3][0], min);
        for row in &m.mean_discovered {
            assert!(row.windows(2).all(|w| w[0] <= w[1]));
        }
        for col in 0..m.durations.len() {
            assert!((1..m.modes.len()).all(|i| m.mean_discovered[i - 1][col] >= m.mean_discovered[i][col]));
        }
        assert_eq!(m.mean_discovered[0][7], 8.0);
    }

    #[test]
    fn renders() {
        let m = scan_parameter_sweep(&SweepConfig { durations: vec![1, 8], ..Default::default() });
        assert_eq!(m.to_table().lines().count(), 5);
        assert_eq!(m.to_csv().lines().count(), 1 + 8);
    }
}
