//! Chained directed sampling.
//!
//! Each tree carries a [`DirectionState`]: the direction of its last
//! successful extension and the position it reached. New proposals are drawn
//! from a von Mises distribution centred on that direction, so consecutive
//! successes form directed chains; a failed proposal leaves the state alone
//! and the next attempt retries from the same position.

use std::f64::consts::PI;

use rand::Rng;

use crate::workspace::Point;

/// Default concentration of the direction distribution.
pub const DEFAULT_KAPPA: f64 = 4.0;

/// Concentrations at or above this value return the mean direction exactly.
pub const DEGENERATE_KAPPA: f64 = 1e6;

/// Wraps an angle into `[-PI, PI)`.
pub fn normalize_angle(theta: f64) -> f64 {
    let t = (theta + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2*PI
    if t >= PI {
        -PI
    } else {
        t
    }
}

/// Draws from the von Mises distribution with mean `mu` and concentration
/// `kappa` using the Best-Fisher wrapped-Cauchy envelope. The result is in
/// `[-PI, PI)`.
pub fn sample_von_mises<R: Rng + ?Sized>(mu: f64, kappa: f64, degenerate: f64, rng: &mut R) -> f64 {
    if kappa <= 0.0 {
        return normalize_angle(rng.gen_range(-PI..PI));
    }
    if kappa >= degenerate {
        return normalize_angle(mu);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let u3: f64 = rng.gen();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            let signed = if u3 > 0.5 { theta } else { -theta };
            return normalize_angle(mu + signed);
        }
    }
}

/// Sampler state owned by a single tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionState {
    /// Mean direction, in `[-PI, PI)`.
    pub mu: f64,
    pub kappa: f64,
    pub last_position: Point,
    /// Threshold above which draws collapse onto `mu`.
    pub degenerate_kappa: f64,
}

impl DirectionState {
    pub fn new(mu: f64, kappa: f64, last_position: Point) -> Self {
        assert!(kappa.is_finite() && kappa >= 0.0, "kappa must be finite and >= 0");
        DirectionState {
            mu: normalize_angle(mu),
            kappa,
            last_position,
            degenerate_kappa: DEGENERATE_KAPPA,
        }
    }

    /// Fresh state with a uniformly random mean direction.
    pub fn random<R: Rng + ?Sized>(kappa: f64, last_position: Point, rng: &mut R) -> Self {
        DirectionState::new(rng.gen_range(-PI..PI), kappa, last_position)
    }

    pub fn sample_direction<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_von_mises(self.mu, self.kappa, self.degenerate_kappa, rng)
    }

    /// Candidate at distance `step` from the chain tip. Returns the candidate
    /// and the direction it was drawn in.
    pub fn propose_extension<R: Rng + ?Sized>(&self, step: f64, rng: &mut R) -> (Point, f64) {
        debug_assert!(step > 0.0);
        let theta = self.sample_direction(rng);
        (self.last_position + Point::from_angle(theta) * step, theta)
    }

    /// Advances the chain on success; failures leave the state untouched.
    pub fn observe(&mut self, success: bool, achieved_direction: f64, new_position: Point) {
        if success {
            self.mu = normalize_angle(achieved_direction);
            self.last_position = new_position;
        }
    }
}
