//! Kinematic series and the fixed 31-dimensional feature vector.
//!
//! All features are computed from coordinate and timestamp *differences*, so
//! the vector is exactly invariant under translating the cursor path or
//! shifting the clock. Inter-event gaps are clamped to [`DT_EPSILON`] before
//! any division, so repeated timestamps cannot produce infinities.

use std::ops::Index;

use crate::par;
use crate::segment::MouseAction;

/// Width of [`FeatureVector`].
pub const FEATURE_DIM: usize = 31;

/// Lower clamp for inter-event gaps, in seconds. Two orders of magnitude
/// below typical ~8 ms sampling, so real gaps are never distorted.
pub const DT_EPSILON: f64 = 1e-4;

/// Per-quantity aggregate block order within the vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Vx,
    Vy,
    Speed,
    Accel,
    Jerk,
    Omega,
}

impl Quantity {
    pub const ALL: [Quantity; 6] = [
        Quantity::Vx,
        Quantity::Vy,
        Quantity::Speed,
        Quantity::Accel,
        Quantity::Jerk,
        Quantity::Omega,
    ];

    fn block(self) -> usize {
        match self {
            Quantity::Vx => 0,
            Quantity::Vy => 1,
            Quantity::Speed => 2,
            Quantity::Accel => 3,
            Quantity::Jerk => 4,
            Quantity::Omega => 5,
        }
    }
}

/// Aggregate statistic order within a quantity block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stat {
    Mean,
    Std,
    Min,
    Max,
}

impl Stat {
    pub const ALL: [Stat; 4] = [Stat::Mean, Stat::Std, Stat::Min, Stat::Max];

    fn offset(self) -> usize {
        match self {
            Stat::Mean => 0,
            Stat::Std => 1,
            Stat::Min => 2,
            Stat::Max => 3,
        }
    }
}

/// Column names, in vector order. Serialized feature matrices use these as
/// the CSV header, so the order is frozen.
pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "vx_mean",
    "vx_std",
    "vx_min",
    "vx_max",
    "vy_mean",
    "vy_std",
    "vy_min",
    "vy_max",
    "speed_mean",
    "speed_std",
    "speed_min",
    "speed_max",
    "accel_mean",
    "accel_std",
    "accel_min",
    "accel_max",
    "jerk_mean",
    "jerk_std",
    "jerk_min",
    "jerk_max",
    "omega_mean",
    "omega_std",
    "omega_min",
    "omega_max",
    "duration",
    "path_length",
    "endpoint_distance",
    "straightness",
    "sum_of_angles",
    "max_deviation",
    "direction",
];

const IDX_DURATION: usize = 24;
const IDX_PATH_LENGTH: usize = 25;
const IDX_ENDPOINT_DISTANCE: usize = 26;
const IDX_STRAIGHTNESS: usize = 27;
const IDX_SUM_OF_ANGLES: usize = 28;
const IDX_MAX_DEVIATION: usize = 29;
const IDX_DIRECTION: usize = 30;

/// Finite-difference kinematics of one action. For `L` events the series
/// lengths are `L-1` (first order), `L-2` (second order), and `L-3` (jerk);
/// series too short to exist are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicSeries {
    /// Inter-event gaps, clamped to at least [`DT_EPSILON`].
    pub dt: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    /// Speed, `sqrt(vx^2 + vy^2)`.
    pub speed: Vec<f64>,
    /// Movement angle in (-pi, pi]; 0 for a zero displacement.
    pub theta: Vec<f64>,
    /// Angle change wrapped into (-pi, pi].
    pub dtheta: Vec<f64>,
    /// Angular velocity, `dtheta[i] / dt[i+1]`.
    pub omega: Vec<f64>,
    /// Tangential acceleration, `(speed[i+1] - speed[i]) / dt[i+1]`.
    pub accel: Vec<f64>,
    /// `(accel[i+1] - accel[i]) / dt[i+2]`.
    pub jerk: Vec<f64>,
}

/// Wraps an angle into (-pi, pi].
fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * std::f64::consts::PI);
    if w > std::f64::consts::PI {
        w -= 2.0 * std::f64::consts::PI;
    }
    w
}

/// Computes the kinematic series of one action.
pub fn compute_kinematics(action: &MouseAction) -> KinematicSeries {
    let events = &action.events;
    assert!(events.len() >= 2, "an action needs at least 2 events");
    let steps = events.len() - 1;

    let mut dt = Vec::with_capacity(steps);
    let mut dx = Vec::with_capacity(steps);
    let mut dy = Vec::with_capacity(steps);
    let mut vx = Vec::with_capacity(steps);
    let mut vy = Vec::with_capacity(steps);
    let mut speed = Vec::with_capacity(steps);
    let mut theta = Vec::with_capacity(steps);

    for pair in events.windows(2) {
        let gap = (pair[1].timestamp - pair[0].timestamp).max(DT_EPSILON);
        let ddx = (pair[1].x as i64 - pair[0].x as i64) as f64;
        let ddy = (pair[1].y as i64 - pair[0].y as i64) as f64;
        let svx = ddx / gap;
        let svy = ddy / gap;
        dt.push(gap);
        dx.push(ddx);
        dy.push(ddy);
        vx.push(svx);
        vy.push(svy);
        speed.push((svx * svx + svy * svy).sqrt());
        theta.push(if ddx == 0.0 && ddy == 0.0 {
            0.0
        } else {
            ddy.atan2(ddx)
        });
    }

    let mut dtheta = Vec::new();
    let mut omega = Vec::new();
    let mut accel = Vec::new();
    if steps >= 2 {
        dtheta.reserve(steps - 1);
        omega.reserve(steps - 1);
        accel.reserve(steps - 1);
        for i in 0..steps - 1 {
            let change = wrap_angle(theta[i + 1] - theta[i]);
            dtheta.push(change);
            omega.push(change / dt[i + 1]);
            accel.push((speed[i + 1] - speed[i]) / dt[i + 1]);
        }
    }

    let mut jerk = Vec::new();
    if steps >= 3 {
        jerk.reserve(steps - 2);
        for i in 0..steps - 2 {
            jerk.push((accel[i + 1] - accel[i]) / dt[i + 2]);
        }
    }

    KinematicSeries {
        dt,
        dx,
        dy,
        vx,
        vy,
        speed,
        theta,
        dtheta,
        omega,
        accel,
        jerk,
    }
}

/// Fixed-width numeric summary of one action. Component order is frozen; see
/// [`FEATURE_NAMES`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: [f64; FEATURE_DIM],
}

impl FeatureVector {
    /// Wraps raw values. Callers are expected to supply finite components.
    pub fn from_values(values: [f64; FEATURE_DIM]) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64; FEATURE_DIM] {
        &self.values
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn aggregate(&self, quantity: Quantity, stat: Stat) -> f64 {
        self.values[quantity.block() * 4 + stat.offset()]
    }

    pub fn duration(&self) -> f64 {
        self.values[IDX_DURATION]
    }

    pub fn path_length(&self) -> f64 {
        self.values[IDX_PATH_LENGTH]
    }

    pub fn endpoint_distance(&self) -> f64 {
        self.values[IDX_ENDPOINT_DISTANCE]
    }

    pub fn straightness(&self) -> f64 {
        self.values[IDX_STRAIGHTNESS]
    }

    pub fn sum_of_angles(&self) -> f64 {
        self.values[IDX_SUM_OF_ANGLES]
    }

    pub fn max_deviation(&self) -> f64 {
        self.values[IDX_MAX_DEVIATION]
    }

    pub fn direction(&self) -> f64 {
        self.values[IDX_DIRECTION]
    }
}

impl Index<usize> for FeatureVector {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.values[index]
    }
}

/// mean/std/min/max of a series; all four are 0 for an empty series. The
/// mean is clamped into [min, max] and std is population (divide by n),
/// computed in two passes.
fn aggregates(series: &[f64]) -> [f64; 4] {
    if series.is_empty() {
        return [0.0; 4];
    }
    let n = series.len() as f64;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &v in series {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    let mean = (sum / n).clamp(min, max);
    let var = series.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    [mean, var.sqrt(), min, max]
}

/// Computes the 31-component feature vector of one action.
pub fn extract_features(action: &MouseAction) -> FeatureVector {
    let k = compute_kinematics(action);
    let mut values = [0.0; FEATURE_DIM];

    for (qi, series) in [&k.vx, &k.vy, &k.speed, &k.accel, &k.jerk, &k.omega]
        .into_iter()
        .enumerate()
    {
        let agg = aggregates(series);
        values[qi * 4..qi * 4 + 4].copy_from_slice(&agg);
    }

    let events = &action.events;
    let first = events[0];
    let last = events[events.len() - 1];
    let chord_x = (last.x as i64 - first.x as i64) as f64;
    let chord_y = (last.y as i64 - first.y as i64) as f64;

    let path_length: f64 = k
        .dx
        .iter()
        .zip(&k.dy)
        .map(|(&dx, &dy)| (dx * dx + dy * dy).sqrt())
        .sum();
    let chord_len = (chord_x * chord_x + chord_y * chord_y).sqrt();
    // The chord can mathematically never exceed the path; guard the last-ulp
    // rounding case so the invariant holds bit-for-bit.
    let endpoint_distance = chord_len.min(path_length);
    let straightness = if path_length > 0.0 {
        (endpoint_distance / path_length).clamp(0.0, 1.0)
    } else {
        0.0
    };

    // Largest distance of an interior point from the start-end chord; for a
    // degenerate chord, from the start point.
    let mut max_deviation = 0.0f64;
    for e in &events[1..events.len() - 1] {
        let px = (e.x as i64 - first.x as i64) as f64;
        let py = (e.y as i64 - first.y as i64) as f64;
        let d = if chord_len > 0.0 {
            (chord_x * py - chord_y * px).abs() / chord_len
        } else {
            (px * px + py * py).sqrt()
        };
        max_deviation = max_deviation.max(d);
    }

    values[IDX_DURATION] = last.timestamp - first.timestamp;
    values[IDX_PATH_LENGTH] = path_length;
    values[IDX_ENDPOINT_DISTANCE] = endpoint_distance;
    values[IDX_STRAIGHTNESS] = straightness;
    values[IDX_SUM_OF_ANGLES] = k.dtheta.iter().sum();
    values[IDX_MAX_DEVIATION] = max_deviation;
    values[IDX_DIRECTION] = if chord_x == 0.0 && chord_y == 0.0 {
        0.0
    } else {
        chord_y.atan2(chord_x)
    };

    FeatureVector { values }
}

/// Extracts features for a batch of actions, output order matching input.
/// Runs data-parallel with the `parallel` feature.
pub fn extract_features_batch(actions: &[MouseAction]) -> Vec<FeatureVector> {
    par::map_items(actions, extract_features)
}
