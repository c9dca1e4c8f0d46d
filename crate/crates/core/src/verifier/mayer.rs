//! Spot check of the derivative envelope `|f'(z)| <= K |z|^(rho/2 - 1)` near
//! large poles of `f = g^M`.
//!
//! Points are placed on circles `|z - u| = (1/(4|a|))^(1/M) |v|` around poles
//! `u` with residue `v`, which is where `|f|` is comparable to a fixed value
//! of modulus `|a|`. There `|f'| <= 8 M |a| (4|a|)^(1/M) |u|^(rho/2 - 1)`.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;

use super::web::web_points;
use crate::atlas::ls_slope;
use crate::catalog::{eval_f_deriv, SeriesFunctionSpec};
use crate::error::{Error, Result};
use crate::geometry::PlanePoint;

pub const MIN_SPOTCHECK_COUNT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MayerOptions {
    /// Modulus of the target value `a`.
    pub value_modulus: f64,
    pub ring_lo: u64,
    pub ring_hi: u64,
    /// Poles per ring, spread evenly over the slots.
    pub slots_per_ring: u64,
    /// Largest web ring checked against the envelope.
    pub web_ring: u64,
}

impl Default for MayerOptions {
    fn default() -> Self {
        MayerOptions {
            value_modulus: 10.0,
            ring_lo: 10,
            ring_hi: 40,
            slots_per_ring: 4,
            web_ring: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MayerReport {
    pub rho: f64,
    pub samples: usize,
    /// `max |f'(z)| / |z|^(rho/2 - 1)` over all samples.
    pub empirical_k: f64,
    /// The same maximum restricted to rings in the lower and upper half of the range.
    pub empirical_k_low: f64,
    pub empirical_k_high: f64,
    /// `8 M |a| (4|a|)^(1/M)`.
    pub envelope_k: f64,
    /// Least-squares slope of `log |f'|` against `log |z|`.
    pub slope: f64,
    pub expected_slope: f64,
    pub envelope_violations: usize,
    pub web_samples: usize,
    pub web_violations: usize,
}

fn scaled_derivative(spec: &SeriesFunctionSpec, z: PlanePoint) -> Result<(f64, f64)> {
    let r = eval_f_deriv(z, spec)?;
    if r.is_pole || !r.value.is_finite() {
        return Err(Error::numerical(format!("derivative not finite at {z}")));
    }
    Ok((z.modulus(), r.value.modulus()))
}

pub fn mayer_derivative_spotcheck(spec: &SeriesFunctionSpec, count: usize, opts: &MayerOptions) -> Result<MayerReport> {
    if count < MIN_SPOTCHECK_COUNT {
        return Err(Error::invalid(format!("spot check needs count >= {MIN_SPOTCHECK_COUNT}, got {count}")));
    }
    if !(opts.ring_lo >= 2 && opts.ring_hi > opts.ring_lo && opts.slots_per_ring >= 1) {
        return Err(Error::invalid("spot check needs 2 <= ring_lo < ring_hi and at least one slot"));
    }
    if !(opts.value_modulus > 0.0 && opts.value_modulus.is_finite()) {
        return Err(Error::invalid("value modulus must be positive"));
    }
    let m = spec.multiplicity() as f64;
    let alpha = spec.rho() / 2.0 - 1.0;
    let a = opts.value_modulus;
    let shrink = (1.0 / (4.0 * a)).powf(1.0 / m);
    let envelope_k = 8.0 * m * a * (4.0 * a).powf(1.0 / m);
    let split = (opts.ring_lo + opts.ring_hi) / 2;

    let mut points = Vec::new();
    for k in opts.ring_lo..=opts.ring_hi {
        for s in 0..opts.slots_per_ring {
            let slot = s * 2 * k / opts.slots_per_ring;
            let u = spec.pole(k, slot);
            let radius = shrink * spec.residue(k, slot).norm();
            for i in 0..count {
                let t = TAU * (i as f64 + 0.5) / count as f64;
                let z = u + num_complex::Complex64::from_polar(radius, t);
                points.push((k, u.norm(), PlanePoint::from_complex(z)));
            }
        }
    }
    let evals: Vec<(u64, f64, f64, f64)> = points
        .par_iter()
        .map(|&(k, u_mod, z)| {
            let (zm, d) = scaled_derivative(spec, z)?;
            Ok((k, u_mod, zm, d))
        })
        .collect::<Result<_>>()?;

    let mut empirical_k = 0f64;
    let mut k_low = 0f64;
    let mut k_high = 0f64;
    let mut violations = 0;
    for &(k, u_mod, zm, d) in &evals {
        let q = d / zm.powf(alpha);
        empirical_k = empirical_k.max(q);
        if k <= split {
            k_low = k_low.max(q);
        } else {
            k_high = k_high.max(q);
        }
        if d > envelope_k * u_mod.powf(alpha) {
            violations += 1;
        }
    }
    let xs: Vec<f64> = evals.iter().map(|e| e.2.ln()).collect();
    let ys: Vec<f64> = evals.iter().map(|e| e.3.ln()).collect();
    let slope = ls_slope(&xs, &ys);

    let web: Vec<PlanePoint> = web_points(spec.mu(), opts.web_ring.max(2), count);
    let web_violations = web
        .par_iter()
        .map(|&z| -> Result<usize> {
            let (zm, d) = scaled_derivative(spec, z)?;
            Ok(usize::from(d > envelope_k * zm.powf(alpha)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();

    Ok(MayerReport {
        rho: spec.rho(),
        samples: evals.len(),
        empirical_k,
        empirical_k_low: k_low,
        empirical_k_high: k_high,
        envelope_k,
        slope,
        expected_slope: alpha,
        envelope_violations: violations,
        web_samples: web.len(),
        web_violations,
    })
}
