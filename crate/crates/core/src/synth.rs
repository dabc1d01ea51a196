//! Seeded synthetic mouse sessions.
//!
//! Sessions are bounded correlated random walks: heading drifts by
//! per-step turn noise, speed jitters around a per-user base, positions
//! reflect off the screen edges, and occasional pause steps re-emit the
//! previous position exactly (creating the duplicates the cleaning stage
//! removes). Profiles spread base speeds geometrically across user ids so
//! synthetic users are separable by construction.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::event::{MouseEvent, SessionLog, MOVEMENT_EVENT};
use crate::seed;

/// Behavioral parameters of one synthetic user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub user_id: u32,
    /// Mean cursor speed, px/s.
    pub base_speed: f64,
    /// Relative std of per-step speed.
    pub speed_jitter: f64,
    /// Std of per-step heading change, radians.
    pub turn_rate: f64,
    /// Positional emission noise, px.
    pub tremor: f64,
    /// Mean sampling interval, seconds.
    pub sample_interval: f64,
    /// Relative std of the sampling interval.
    pub interval_jitter: f64,
    /// Per-step chance of standing still.
    pub pause_probability: f64,
    pub screen_width: u32,
    pub screen_height: u32,
}

/// Geometric ladder between consecutive user ids. With the +/-4% per-user
/// jitter this keeps any two base speeds at least ~24% apart.
const SPEED_LADDER: f64 = 1.35;
const BASE_SPEED_0: f64 = 300.0;
const MIN_STEP_SECONDS: f64 = 1e-3;

fn sample_gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; plenty for behavioral noise.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Deterministic per-(user, seed) profile. Base speeds follow a geometric
/// ladder over user ids, so all pairs differ by at least 20%.
pub fn generate_profile(user_id: u32, seed: u64) -> UserProfile {
    let mut rng = seed::rng_for(seed, &[0x70_726f_66, u64::from(user_id)]);
    let speed_wiggle: f64 = rng.gen_range(-0.04..0.04);
    UserProfile {
        user_id,
        base_speed: BASE_SPEED_0 * SPEED_LADDER.powi(user_id as i32) * (1.0 + speed_wiggle),
        speed_jitter: rng.gen_range(0.05..0.15),
        turn_rate: rng.gen_range(0.08..0.20),
        tremor: rng.gen_range(0.1..0.5),
        sample_interval: 0.01,
        interval_jitter: rng.gen_range(0.05..0.10),
        pause_probability: rng.gen_range(0.01..0.03),
        screen_width: 1920,
        screen_height: 1080,
    }
}

/// Reflects `v` into `[0, max]`, flipping `dir` on each bounce.
fn reflect(mut v: f64, max: f64, dir: &mut f64) -> f64 {
    loop {
        if v < 0.0 {
            v = -v;
            *dir = -*dir;
        } else if v > max {
            v = 2.0 * max - v;
            *dir = -*dir;
        } else {
            return v;
        }
    }
}

/// Simulates one session of `duration` seconds.
///
/// Output is a valid movement-only [`SessionLog`]: integer pixels inside the
/// profile's screen, strictly increasing timestamps, deterministic under
/// `(profile, duration, seed)`.
pub fn generate_session(profile: &UserProfile, duration: f64, seed: u64) -> SessionLog {
    assert!(duration > 0.0, "session duration must be positive");
    let mut rng = seed::rng_for(seed, &[0x73_6573_73, u64::from(profile.user_id)]);

    let max_x = (profile.screen_width - 1) as f64;
    let max_y = (profile.screen_height - 1) as f64;
    let mut x = max_x * rng.gen_range(0.25..0.75);
    let mut y = max_y * rng.gen_range(0.25..0.75);
    let mut heading: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);

    let start = 1_600_000_000.0 + f64::from(profile.user_id) * 10_000.0;
    let end = start + duration;
    let mut t = start;

    let emit = |x: f64, y: f64, ex: f64, ey: f64| -> (u32, u32) {
        (
            (x + ex).clamp(0.0, max_x).round() as u32,
            (y + ey).clamp(0.0, max_y).round() as u32,
        )
    };

    let mut events = Vec::with_capacity((duration / profile.sample_interval) as usize + 1);
    let tremor = |rng: &mut ChaCha8Rng, scale: f64| sample_gaussian(rng) * scale;
    let (ex, ey) = (
        tremor(&mut rng, profile.tremor),
        tremor(&mut rng, profile.tremor),
    );
    let mut pixel = emit(x, y, ex, ey);
    events.push(MouseEvent {
        timestamp: t,
        x: pixel.0,
        y: pixel.1,
        event_type: MOVEMENT_EVENT,
        user_id: profile.user_id,
    });

    loop {
        let dt = (profile.sample_interval * (1.0 + profile.interval_jitter * sample_gaussian(&mut rng)))
            .max(MIN_STEP_SECONDS);
        t += dt;
        if t >= end {
            break;
        }
        if rng.gen_range(0.0..1.0) >= profile.pause_probability {
            heading += profile.turn_rate * sample_gaussian(&mut rng);
            let speed =
                (profile.base_speed * (1.0 + profile.speed_jitter * sample_gaussian(&mut rng))).max(0.0);
            let (mut dir_x, mut dir_y) = (heading.cos(), heading.sin());
            x = reflect(x + speed * dt * dir_x, max_x, &mut dir_x);
            y = reflect(y + speed * dt * dir_y, max_y, &mut dir_y);
            heading = dir_y.atan2(dir_x);
            let (ex, ey) = (
                tremor(&mut rng, profile.tremor),
                tremor(&mut rng, profile.tremor),
            );
            pixel = emit(x, y, ex, ey);
        }
        // A pause step re-emits the previous pixel exactly.
        events.push(MouseEvent {
            timestamp: t,
            x: pixel.0,
            y: pixel.1,
            event_type: MOVEMENT_EVENT,
            user_id: profile.user_id,
        });
    }

    SessionLog {
        user_id: profile.user_id,
        events,
    }
}
