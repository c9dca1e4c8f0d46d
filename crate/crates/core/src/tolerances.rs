//! Numeric thresholds shared by every module.
//!
//! All arithmetic is `f64`; the constants here are the only places where
//! closeness, overflow and precision limits are decided.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// A point is a pole hit when `|z - u| < pole_rel * max(1, |u|)`.
    pub pole_rel: f64,
    /// Within `near_pole_factor * k^(mu-1)` of a pole of ring `k` the ring is
    /// evaluated in local coordinates around that pole.
    pub near_pole_factor: f64,
    /// Moduli above this are treated as the point at infinity.
    pub overflow_modulus: f64,
    /// Series evaluation refuses points whose dominant ring index exceeds this;
    /// beyond it the input's own rounding exceeds the pole spacing.
    pub max_dominant_ring: f64,
    /// Terms whose log-modulus bound is below `-(skip_log_floor + ln K)` are skipped.
    pub skip_log_floor: f64,
    /// Polar round trip and membership checks.
    pub geometric: f64,
}

pub const TOL: Tolerances = Tolerances {
    pole_rel: 1e-12,
    near_pole_factor: 0.1,
    overflow_modulus: 1e300,
    max_dominant_ring: 1e10,
    skip_log_floor: 40.0,
    geometric: 1e-10,
};

/// Default number of extra series terms kept beyond the geometric cut.
pub const DEFAULT_TRUNCATION_MARGIN: u32 = 8;

/// Smallest truncation margin accepted by [`crate::catalog::SeriesFunctionSpec`].
pub const MIN_TRUNCATION_MARGIN: u32 = 4;
