//! The web of circles and radial segments on which the series is bounded.
//!
//! ```text
//! W1 = { |z| = (n + 1/2)^mu : n >= 1 }
//! W2 = { r e^(i pi (2m-1) / 2n) : (n - 1/2)^mu <= r <= (n + 1/2)^mu, 1 <= m <= 2n, n >= 2 }
//! ```

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{compensated_sum, eval_g, SeriesFunctionSpec};
use crate::error::{Error, Result};
use crate::geometry::PlanePoint;

/// Target accuracy of the geometric tails in [`compute_web_constant`].
const WEB_TAIL: f64 = 1e-13;

/// `C = sum_{k>=1} 1/(2^(mu k) - 1) + sum_{l>=1} 1/(2^(mu (l - 1/2)) - 1)`.
pub fn compute_web_constant(mu: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("mu must be positive, got {mu}")));
    }
    // consecutive terms of either sum shrink by at least q = 2^-mu
    let q = (-mu * std::f64::consts::LN_2).exp();
    let series = |offset: f64| -> Result<f64> {
        let mut terms = Vec::new();
        for k in 1..=50_000_000u64 {
            let t = 1.0 / (mu * (k as f64 - offset) * std::f64::consts::LN_2).exp_m1();
            terms.push(t);
            if t * q / (1.0 - q) < WEB_TAIL {
                // add the smallest terms first
                return Ok(compensated_sum(terms.into_iter().rev()));
            }
        }
        Err(Error::numerical(format!("web constant series did not converge for mu = {mu}")))
    };
    Ok(series(0.0)? + series(0.5)?)
}

/// Membership in the web up to `max_ring`, with tolerance `tol` relative to the radius.
pub fn on_web(z: PlanePoint, mu: f64, max_ring: u64, tol: f64) -> bool {
    let (r, theta) = z.to_polar();
    // circle of index n
    let n = (r.powf(1.0 / mu) - 0.5).round();
    if n >= 1.0 && n <= max_ring as f64 && (r - (n + 0.5).powf(mu)).abs() <= tol * r {
        return true;
    }
    // radial segment of ring n: pick n from the radius band
    let band = r.powf(1.0 / mu).round();
    for n in [band - 1.0, band, band + 1.0] {
        if n < 2.0 || n > max_ring as f64 {
            continue;
        }
        let lo = (n - 0.5).powf(mu);
        let hi = (n + 0.5).powf(mu);
        if r < lo * (1.0 - tol) || r > hi * (1.0 + tol) {
            continue;
        }
        // angle pi (2m - 1) / (2n): theta * 2n / pi must be an odd integer
        let s = theta.rem_euclid(2.0 * PI) * 2.0 * n / PI;
        let odd = (s - 1.0) / 2.0;
        if (odd - odd.round()).abs() * 2.0 * PI / (2.0 * n) * r <= tol * r {
            return true;
        }
    }
    false
}

/// Deterministic, evenly spaced web points: `per_component` on every circle
/// `n = 1 ..= max_ring` and on every segment with `n = 2 ..= max_ring`.
pub fn web_points(mu: f64, max_ring: u64, per_component: usize) -> Vec<PlanePoint> {
    let mut pts = Vec::new();
    for n in 1..=max_ring {
        let radius = (n as f64 + 0.5).powf(mu);
        for i in 0..per_component {
            let theta = 2.0 * PI * (i as f64 + 0.5) / per_component as f64;
            pts.push(PlanePoint::from_polar(radius, theta));
        }
    }
    for n in 2..=max_ring {
        let nf = n as f64;
        let lo = (nf - 0.5).powf(mu);
        let hi = (nf + 0.5).powf(mu);
        for m in 1..=2 * n {
            let theta = PI * (2 * m - 1) as f64 / (2.0 * nf);
            for i in 0..per_component {
                let t = if per_component == 1 { 0.5 } else { i as f64 / (per_component - 1) as f64 };
                pts.push(PlanePoint::from_polar(lo + t * (hi - lo), theta));
            }
        }
    }
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WebSample {
    pub points: Vec<PlanePoint>,
    pub max_ring: u64,
    pub per_point_moduli: Vec<f64>,
    /// Per-point truncation bounds of the series evaluation.
    pub per_point_bounds: Vec<f64>,
}

impl WebSample {
    pub fn max_modulus(&self) -> f64 {
        self.per_point_moduli.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest `|g| + truncation bound`, a certified upper value at each point.
    pub fn max_certified(&self) -> f64 {
        self.per_point_moduli
            .iter()
            .zip(&self.per_point_bounds)
            .map(|(m, b)| m + b)
            .fold(0.0, f64::max)
    }
}

pub fn sample_web(spec: &SeriesFunctionSpec, max_ring: u64, per_component: usize) -> Result<WebSample> {
    if max_ring < 2 {
        return Err(Error::invalid(format!("web sampling needs max_ring >= 2, got {max_ring}")));
    }
    if per_component == 0 {
        return Err(Error::invalid("need at least one point per web component"));
    }
    let points = web_points(spec.mu(), max_ring, per_component);
    let evals: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&z| {
            let r = eval_g(z, spec)?;
            if r.is_pole {
                return Err(Error::numerical(format!("web point {z} evaluated as a pole")));
            }
            Ok((r.value.modulus(), r.truncation_bound))
        })
        .collect::<Result<_>>()?;
    let (per_point_moduli, per_point_bounds) = evals.into_iter().unzip();
    Ok(WebSample {
        points,
        max_ring,
        per_point_moduli,
        per_point_bounds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WebBoundReport {
    pub rho: f64,
    pub web_constant: f64,
    /// `4 C + 4`.
    pub bound: f64,
    pub max_modulus: f64,
    pub max_certified: f64,
    pub samples: usize,
    pub violations: usize,
    pub pass: bool,
}

/// Compare `|g| + truncation bound` against `4C + 4` at every sampled web point.
pub fn verify_web_bound(spec: &SeriesFunctionSpec, max_ring: u64, per_component: usize) -> Result<WebBoundReport> {
    let c = compute_web_constant(spec.mu())?;
    let bound = 4.0 * c + 4.0;
    let sample = sample_web(spec, max_ring, per_component)?;
    let violations = sample
        .per_point_moduli
        .iter()
        .zip(&sample.per_point_bounds)
        .filter(|(m, b)| *m + *b > bound)
        .count();
    Ok(WebBoundReport {
        rho: spec.rho(),
        web_constant: c,
        bound,
        max_modulus: sample.max_modulus(),
        max_certified: sample.max_certified(),
        samples: sample.points.len(),
        violations,
        pass: violations == 0,
    })
}

/// Working radius `R0 = 1 + max |f|` over web samples, with `|f| = |g|^M`.
///
/// The singular values of `f` are bounded by a constant of the same kind as
/// the web bound; this is an empirical stand-in, not a proven radius.
pub fn estimate_r0(spec: &SeriesFunctionSpec, max_ring: u64, per_component: usize) -> Result<f64> {
    let sample = sample_web(spec, max_ring, per_component)?;
    Ok(1.0 + sample.max_certified().powi(spec.multiplicity() as i32))
}
