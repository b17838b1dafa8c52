//! Movement traces: timestamped positions with optional activity labels.

use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geo::GeoPoint;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Static,
    Pedestrian,
    Vehicular,
}

impl FromStr for Activity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "static" | "stationary" => Ok(Activity::Static),
            "pedestrian" | "walking" | "walk" => Ok(Activity::Pedestrian),
            "vehicular" | "driving" | "drive" => Ok(Activity::Vehicular),
            other => Err(format!("unknown activity {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: Timestamp,
    pub point: GeoPoint,
    /// Activity for the span starting at this sample.
    pub activity: Option<Activity>,
    /// Speed over that span in m/s.
    pub speed: Option<f64>,
}

/// A time-ordered position trace.
///
/// Positions between samples are linearly interpolated; outside the sampled
/// span the trace has no position.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MovementTrace {
    samples: Vec<TraceSample>,
    /// Half-open intervals during which the owner's device is in range.
    #[serde(default)]
    owner_spans: Vec<(Timestamp, Timestamp)>,
}

impl MovementTrace {
    pub fn new(samples: Vec<TraceSample>) -> Result<Self, SimError> {
        for w in samples.windows(2) {
            if w[1].t <= w[0].t {
                return Err(SimError::Trace(format!("timestamps not strictly increasing at t={}", w[1].t)));
            }
        }
        if let Some(bad) = samples.iter().find(|s| !s.point.is_valid()) {
            return Err(SimError::Trace(format!("coordinate out of range at t={}", bad.t)));
        }
        Ok(MovementTrace { samples, owner_spans: Vec::new() })
    }

    pub fn with_owner_spans(mut self, spans: Vec<(Timestamp, Timestamp)>) -> Self {
        self.owner_spans = spans;
        self
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn owner_spans(&self) -> &[(Timestamp, Timestamp)] {
        &self.owner_spans
    }

    pub fn start(&self) -> Option<Timestamp> {
        self.samples.first().map(|s| s.t)
    }

    pub fn end(&self) -> Option<Timestamp> {
        self.samples.last().map(|s| s.t)
    }

    fn segment(&self, t: Timestamp) -> Option<usize> {
        let (first, last) = (self.start()?, self.end()?);
        if t < first || t > last {
            return None;
        }
        // Index of the last sample at or before `t`.
        Some(self.samples.partition_point(|s| s.t <= t) - 1)
    }

    pub fn position_at(&self, t: Timestamp) -> Option<GeoPoint> {
        let i = self.segment(t)?;
        let a = &self.samples[i];
        match self.samples.get(i + 1) {
            Some(b) => {
                let frac = (t - a.t) as f64 / (b.t - a.t) as f64;
                Some(a.point.lerp(&b.point, frac))
            }
            None => Some(a.point),
        }
    }

    pub fn activity_at(&self, t: Timestamp) -> Option<Activity> {
        self.segment(t).and_then(|i| self.samples[i].activity)
    }

    /// Annotated speed, falling back to the segment's average speed.
    pub fn speed_at(&self, t: Timestamp) -> Option<f64> {
        let i = self.segment(t)?;
        let a = &self.samples[i];
        if a.speed.is_some() {
            return a.speed;
        }
        let b = self.samples.get(i + 1)?;
        Some(a.point.haversine(&b.point) / (b.t - a.t) as f64)
    }

    pub fn owner_in_range(&self, t: Timestamp) -> bool {
        self.owner_spans.iter().any(|&(from, to)| from <= t && t < to)
    }

    /// Parses `t,lat,lon[,activity,speed]` CSV. `t` is either seconds since
    /// `start` or an RFC3339 instant.
    pub fn from_csv(input: impl Read, start: Timestamp) -> Result<Self, SimError> {
        let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
        let headers = reader.headers().map_err(|e| SimError::Trace(e.to_string()))?.clone();
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let (Some(ti), Some(lai), Some(loi)) = (col("t"), col("lat"), col("lon")) else {
            return Err(SimError::Trace("CSV header must contain t,lat,lon".into()));
        };
        let (ai, si) = (col("activity"), col("speed"));

        let mut samples = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| SimError::Trace(e.to_string()))?;
            let line = row + 2;
            let field = |i: usize| rec.get(i).filter(|s| !s.is_empty());
            let bad = |what: &str| SimError::Trace(format!("line {line}: bad {what}"));

            let t_raw = field(ti).ok_or_else(|| bad("t"))?;
            let t = match t_raw.parse::<f64>() {
                Ok(secs) => start + secs.round() as i64,
                Err(_) => Timestamp::parse_rfc3339(t_raw).map_err(|_| bad("t"))?,
            };
            let lat = field(lai).and_then(|s| s.parse().ok()).ok_or_else(|| bad("lat"))?;
            let lon = field(loi).and_then(|s| s.parse().ok()).ok_or_else(|| bad("lon"))?;
            let point = GeoPoint::new(lat, lon).map_err(|_| bad("coordinate"))?;
            let activity = match ai.and_then(field) {
                Some(s) => Some(s.parse().map_err(|_| bad("activity"))?),
                None => None,
            };
            let speed = match si.and_then(field) {
                Some(s) => Some(s.parse().map_err(|_| bad("speed"))?),
                None => None,
            };
            samples.push(TraceSample { t, point, activity, speed });
        }
        MovementTrace::new(samples)
    }
}

pub const WALK_SPEED: f64 = 1.2;
pub const DRIVE_SPEED: f64 = 10.0;

/// Synthesizes piecewise-linear routes from walk/drive/stay legs.
#[derive(Debug, Clone)]
pub struct RouteBuilder {
    samples: Vec<TraceSample>,
    here: GeoPoint,
    now: Timestamp,
}

impl RouteBuilder {
    pub fn new(start: GeoPoint, at: Timestamp) -> Self {
        RouteBuilder { samples: Vec::new(), here: start, now: at }
    }

    pub fn now(&self) -> Timestamp {
        self.now
    }

    pub fn position(&self) -> GeoPoint {
        self.here
    }

    fn leg(&mut self, activity: Activity, speed: f64, to: GeoPoint, secs: i64) {
        let secs = secs.max(1);
        self.samples.push(TraceSample { t: self.now, point: self.here, activity: Some(activity), speed: Some(speed) });
        self.here = to;
        self.now += secs;
    }

    pub fn travel(mut self, activity: Activity, speed: f64, bearing_deg: f64, distance_m: f64) -> Self {
        let to = self.here.destination(bearing_deg, distance_m);
        let secs = (distance_m / speed).round() as i64;
        self.leg(activity, speed, to, secs);
        self
    }

    pub fn walk(self, bearing_deg: f64, distance_m: f64) -> Self {
        self.travel(Activity::Pedestrian, WALK_SPEED, bearing_deg, distance_m)
    }

    pub fn drive(self, bearing_deg: f64, distance_m: f64) -> Self {
        self.travel(Activity::Vehicular, DRIVE_SPEED, bearing_deg, distance_m)
    }

    /// Travels to a fixed point at the given speed.
    pub fn travel_to(mut self, activity: Activity, speed: f64, to: GeoPoint) -> Self {
        let secs = (self.here.haversine(&to) / speed).round() as i64;
        self.leg(activity, speed, to, secs);
        self
    }

    pub fn stay(mut self, secs: i64) -> Self {
        let here = self.here;
        self.leg(Activity::Static, 0.0, here, secs);
        self
    }

    pub fn stay_until(self, until: Timestamp) -> Self {
        let secs = until - self.now;
        self.stay(secs)
    }

    pub fn build(mut self) -> Result<MovementTrace, SimError> {
        self.samples.push(TraceSample {
            t: self.now,
            point: self.here,
            activity: Some(Activity::Static),
            speed: Some(0.0),
        });
        MovementTrace::new(self.samples)
    }
}
