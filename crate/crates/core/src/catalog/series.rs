//! The pole series
//!
//! ```text
//! g(z) = 2 sum_{k>=1} k^(mu k) z^k / (z^(2k) - k^(2 mu k)),   mu = 2 / rho
//! ```
//!
//! and its power `f = g^M`. Ring `k` of the series is the rational function
//! `2x / (x^2 - 1)` with `x = (z / k^mu)^k`; it has simple poles
//! `u_{k,l} = k^mu exp(i pi l / k)` with residues
//! `v_{k,l} = k^(mu-1) exp(i pi l (1-k) / k)`.
//!
//! Summation keeps rings `1..=K` with `K = tail_cutoff(|z|)` and reports the
//! geometric tail bound for the rest. Inside that window, rings whose modulus
//! bound is below `exp(-L)` are skipped when there are many of them; the
//! skipped mass is added to the reported bound. The ring owning a nearby pole
//! is evaluated in the pole's local coordinate so that the singular part is
//! resolved without cancellation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cmath::{expm1, from_log_polar, log1p, CompensatedSum};
use super::{EvalError, EvalResult};
use crate::error::{Error, Result};
use crate::geometry::PlanePoint;
use crate::tolerances::{DEFAULT_TRUNCATION_MARGIN, MIN_TRUNCATION_MARGIN, TOL};

/// Below this many rings everything is summed term by term.
const DIRECT_LIMIT: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesFunctionSpec {
    rho: f64,
    multiplicity: u32,
    mu: f64,
    truncation_margin: u32,
}

impl SeriesFunctionSpec {
    pub fn new(rho: f64, multiplicity: u32) -> Result<Self> {
        Self::with_margin(rho, multiplicity, DEFAULT_TRUNCATION_MARGIN)
    }

    pub fn with_margin(rho: f64, multiplicity: u32, truncation_margin: u32) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid(format!("order rho must be positive, got {rho}")));
        }
        if multiplicity == 0 {
            return Err(Error::invalid("pole multiplicity M must be at least 1"));
        }
        if truncation_margin < MIN_TRUNCATION_MARGIN {
            return Err(Error::invalid(format!(
                "truncation margin must be at least {MIN_TRUNCATION_MARGIN}, got {truncation_margin}"
            )));
        }
        Ok(SeriesFunctionSpec {
            rho,
            multiplicity,
            mu: 2.0 / rho,
            truncation_margin,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn multiplicity(&self) -> u32 {
        self.multiplicity
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn truncation_margin(&self) -> u32 {
        self.truncation_margin
    }

    /// `|u_{k,l}| = k^mu`.
    pub fn ring_modulus(&self, ring: u64) -> f64 {
        (ring as f64).powf(self.mu)
    }

    /// `|v_{k,l}| = k^(mu - 1)`.
    pub fn residue_modulus(&self, ring: u64) -> f64 {
        (ring as f64).powf(self.mu - 1.0)
    }

    /// Pole `u_{k,l}`.
    pub fn pole(&self, ring: u64, slot: u64) -> Complex64 {
        Complex64::from_polar(self.ring_modulus(ring), PI * slot as f64 / ring as f64)
    }

    /// Residue of `g` at `u_{k,l}`.
    pub fn residue(&self, ring: u64, slot: u64) -> Complex64 {
        let k = ring as f64;
        let l = slot as f64;
        // l (1 - k) / k = l / k - l; reduce the integer part first for accuracy
        let turn = if slot % 2 == 0 { 0.0 } else { PI };
        Complex64::from_polar(self.residue_modulus(ring), PI * l / k - turn)
    }
}

/// Number of rings kept for `|z| = z_modulus`:
/// `max(1, ceil((2 |z|)^(1/mu))) + margin`.
pub fn tail_cutoff(z_modulus: f64, mu: f64, margin: u32) -> Result<u64> {
    if !(z_modulus >= 0.0 && z_modulus.is_finite()) {
        return Err(Error::invalid(format!("modulus must be finite and non-negative, got {z_modulus}")));
    }
    if !(mu > 0.0) {
        return Err(Error::invalid(format!("mu must be positive, got {mu}")));
    }
    let base = (2.0 * z_modulus).powf(1.0 / mu).ceil();
    if base > 1e15 {
        return Err(Error::invalid(format!("modulus {z_modulus} needs too many terms")));
    }
    Ok((base as u64).max(1) + margin as u64)
}

/// Bound on the modulus of everything after ring `cutoff`: each dropped ring
/// is at most `2^(1-k)` inside the series, doubled by the factor in front,
/// and a further factor two of slack.
pub fn series_tail_bound(cutoff: u64) -> f64 {
    2.0 * 2f64.powf(2.0 - cutoff as f64)
}

/// Same for the derivative: ring `k > cutoff` contributes at most
/// `2.002 k 2^(1-k)`.
fn derivative_tail_bound(cutoff: u64) -> f64 {
    2.002 * (cutoff as f64 + 2.0) * 2f64.powf(1.0 - cutoff as f64)
}

#[derive(Debug, Clone, Copy)]
struct NearPole {
    ring: u64,
    slot: u64,
    pole: Complex64,
}

#[derive(Debug, Clone)]
struct SeriesPlan {
    cutoff: u64,
    ranges: [(u64, u64); 2],
    skipped: u64,
    skip_log: f64,
    near: Option<NearPole>,
}

enum Located {
    Pole,
    Plan(SeriesPlan),
}

/// Find the closest pole among the rings that could be near `z`.
fn closest_pole(z: Complex64, spec: &SeriesFunctionSpec, dominant: f64) -> Option<(NearPole, f64)> {
    let theta = z.arg();
    let lo = (dominant.floor() as u64).saturating_sub(1).max(1);
    let hi = dominant.ceil() as u64 + 1;
    let mut best: Option<(NearPole, f64)> = None;
    for k in lo..=hi {
        let two_k = 2 * k as i64;
        let slot = ((theta * k as f64 / PI).round() as i64).rem_euclid(two_k) as u64;
        let pole = spec.pole(k, slot);
        let dist = (z - pole).norm();
        if best.as_ref().is_none_or(|(_, d)| dist < *d) {
            best = Some((NearPole { ring: k, slot, pole }, dist));
        }
    }
    best
}

fn plan(z: Complex64, spec: &SeriesFunctionSpec) -> std::result::Result<Located, EvalError> {
    let r = z.norm();
    let mu = spec.mu;
    let dominant = r.powf(1.0 / mu);
    if dominant > TOL.max_dominant_ring {
        return Err(EvalError::PrecisionExhausted { modulus: r });
    }
    let cutoff = tail_cutoff(r, mu, spec.truncation_margin)
        .map_err(|_| EvalError::PrecisionExhausted { modulus: r })?;

    let mut near = None;
    if let Some((candidate, dist)) = closest_pole(z, spec, dominant) {
        let pole_mod = spec.ring_modulus(candidate.ring);
        if dist < TOL.pole_rel * pole_mod.max(1.0) {
            return Ok(Located::Pole);
        }
        if dist < TOL.near_pole_factor * spec.residue_modulus(candidate.ring) && candidate.ring <= cutoff {
            near = Some(candidate);
        }
    }

    let skip_log = TOL.skip_log_floor + (cutoff as f64).ln();
    let direct = SeriesPlan {
        cutoff,
        ranges: [(1, cutoff), (1, 0)],
        skipped: 0,
        skip_log,
        near,
    };
    if cutoff <= DIRECT_LIMIT {
        return Ok(Located::Plan(direct));
    }

    let ln_r = r.ln();
    // below the dominant ring |x| > 1 and log(1/|x|) = k (ln r - mu ln k), concave in k
    let below = |k: f64| k * (ln_r - mu * k.ln());
    // above it |x| < 1 and log(1/|x|) = k (mu ln k - ln r), increasing in k
    let above = |k: f64| k * (mu * k.ln() - ln_r);

    let peak = dominant / std::f64::consts::E;
    let mut first = [(1u64, cutoff), (1u64, 0u64)];
    let mut skipped = 0u64;
    let mut next_start = 1u64;

    if peak >= 1.0 && below(peak) >= skip_log {
        // smallest k in [1, peak] with below(k) >= L
        let k_a = first_true(1, peak.floor() as u64, |k| below(k as f64) >= skip_log);
        // largest k in [peak, dominant] with below(k) >= L
        let k_b = last_true(peak.ceil() as u64, dominant.floor() as u64, |k| below(k as f64) >= skip_log);
        if let (Some(a), Some(b)) = (k_a, k_b) {
            if a <= b {
                first[0] = (1, a - 1);
                skipped += b - a + 1;
                next_start = b + 1;
            }
        }
    }
    let k0 = (dominant.ceil() as u64).max(1);
    let mut end = cutoff;
    if let Some(c) = first_true(k0, cutoff, |k| above(k as f64) >= skip_log) {
        if c > next_start {
            skipped += cutoff - c + 1;
            end = c - 1;
        }
    }
    if next_start > 1 {
        first[1] = (next_start, end);
    } else {
        first[0] = (1, end);
    }
    Ok(Located::Plan(SeriesPlan {
        cutoff,
        ranges: first,
        skipped,
        skip_log,
        near,
    }))
}

/// Smallest `k` in `[lo, hi]` with `pred(k)`, given `pred` is monotone false -> true.
fn first_true(lo: u64, hi: u64, pred: impl Fn(u64) -> bool) -> Option<u64> {
    if lo > hi || !pred(hi) {
        return None;
    }
    let (mut a, mut b) = (lo, hi);
    while a < b {
        let m = a + (b - a) / 2;
        if pred(m) {
            b = m;
        } else {
            a = m + 1;
        }
    }
    Some(a)
}

/// Largest `k` in `[lo, hi]` with `pred(k)`, given `pred` is monotone true -> false.
fn last_true(lo: u64, hi: u64, pred: impl Fn(u64) -> bool) -> Option<u64> {
    if lo > hi || !pred(lo) {
        return None;
    }
    let (mut a, mut b) = (lo, hi);
    while a < b {
        let m = a + (b - a).div_ceil(2);
        if pred(m) {
            a = m;
        } else {
            b = m - 1;
        }
    }
    Some(a)
}

/// Polar data of `z` reused for every ring.
struct Polar {
    z: Complex64,
    ln_r: f64,
    theta: f64,
}

impl Polar {
    fn new(z: Complex64) -> Self {
        Polar {
            z,
            ln_r: z.norm().ln(),
            theta: z.arg(),
        }
    }
}

#[inline]
fn ring_term(p: &Polar, mu: f64, k: u64) -> Complex64 {
    let kf = k as f64;
    let lam = kf * (p.ln_r - mu * kf.ln());
    let phase = kf * p.theta;
    if lam <= 0.0 {
        let x = from_log_polar(lam, phase);
        2.0 * x / (x * x - 1.0)
    } else {
        let q = from_log_polar(-lam, -phase);
        2.0 * q / (1.0 - q * q)
    }
}

#[inline]
fn ring_term_deriv(p: &Polar, mu: f64, k: u64) -> Complex64 {
    let kf = k as f64;
    let lam = kf * (p.ln_r - mu * kf.ln());
    let phase = kf * p.theta;
    let y = if lam <= 0.0 {
        from_log_polar(lam, phase)
    } else {
        from_log_polar(-lam, -phase)
    };
    let y2 = y * y;
    let den = (1.0 - y2) * (1.0 - y2);
    -2.0 * kf * y * (1.0 + y2) / (den * p.z)
}

/// Ring `k` near its pole `u`, written in `delta = (z - u) / u`.
fn local_ring(z: Complex64, near: &NearPole) -> (Complex64, Complex64) {
    let sigma = if near.slot % 2 == 0 { 1.0 } else { -1.0 };
    let k = near.ring as f64;
    let delta = (z - near.pole) / near.pole;
    let s = k * log1p(delta);
    let y = s.exp();
    let e = expm1(2.0 * s);
    let value = 2.0 * sigma * y / e;
    let y2 = y * y;
    let deriv = -2.0 * sigma * k * y * (y2 + 1.0) / (e * e * z);
    (value, deriv)
}

struct GSum {
    value: Complex64,
    bound: f64,
}

fn sum_series(z: Complex64, spec: &SeriesFunctionSpec, plan: &SeriesPlan, derivative: bool) -> GSum {
    let polar = Polar::new(z);
    let mut acc = CompensatedSum::new();
    for &(lo, hi) in &plan.ranges {
        for k in lo..=hi {
            if plan.near.is_some_and(|n| n.ring == k) {
                continue;
            }
            if derivative {
                acc.add(ring_term_deriv(&polar, spec.mu, k));
            } else {
                acc.add(ring_term(&polar, spec.mu, k));
            }
        }
    }
    if let Some(near) = &plan.near {
        let (v, d) = local_ring(z, near);
        acc.add(if derivative { d } else { v });
    }
    let per_skip = (-plan.skip_log).exp() / (1.0 - (-2.0 * plan.skip_log).exp());
    let bound = if derivative {
        let r = z.norm();
        derivative_tail_bound(plan.cutoff) + plan.skipped as f64 * 2.0002 * plan.cutoff as f64 / r * per_skip
    } else {
        series_tail_bound(plan.cutoff) + plan.skipped as f64 * 2.0 * per_skip
    };
    GSum {
        value: acc.value(),
        bound,
    }
}

fn finite_input(z: PlanePoint) -> std::result::Result<Complex64, EvalError> {
    match z.to_complex() {
        Some(c) if c.re.is_finite() && c.im.is_finite() => Ok(c),
        _ => Err(EvalError::NonFinite),
    }
}

/// `g(z)` with its truncation bound.
pub fn eval_g(z: PlanePoint, spec: &SeriesFunctionSpec) -> std::result::Result<EvalResult, EvalError> {
    let z = finite_input(z)?;
    if z == Complex64::new(0.0, 0.0) {
        return Ok(EvalResult::finite(Complex64::new(0.0, 0.0), 0.0));
    }
    match plan(z, spec)? {
        Located::Pole => Ok(EvalResult::pole()),
        Located::Plan(plan) => {
            let s = sum_series(z, spec, &plan, false);
            Ok(EvalResult::finite(s.value, s.bound))
        }
    }
}

/// `g'(z)` by term-wise differentiation with the same ring window as [`eval_g`].
pub fn eval_g_deriv(z: PlanePoint, spec: &SeriesFunctionSpec) -> std::result::Result<EvalResult, EvalError> {
    let z = finite_input(z)?;
    if z == Complex64::new(0.0, 0.0) {
        // only ring 1, 2z / (z^2 - 1), has a linear term
        let cutoff = tail_cutoff(0.0, spec.mu, spec.truncation_margin).expect("finite input");
        return Ok(EvalResult::finite(Complex64::new(-2.0, 0.0), derivative_tail_bound(cutoff)));
    }
    match plan(z, spec)? {
        Located::Pole => Err(EvalError::NearPole),
        Located::Plan(plan) => {
            let s = sum_series(z, spec, &plan, true);
            Ok(EvalResult::finite(s.value, s.bound))
        }
    }
}

/// `f(z) = g(z)^M`; the bound is the first-order image `M |g|^(M-1) * bound(g)`.
pub fn eval_f(z: PlanePoint, spec: &SeriesFunctionSpec) -> std::result::Result<EvalResult, EvalError> {
    let g = eval_g(z, spec)?;
    if g.is_pole {
        return Ok(g);
    }
    let gv = g.value.to_complex().expect("finite series value");
    let m = spec.multiplicity;
    let value = gv.powu(m);
    let bound = m as f64 * gv.norm().powi(m as i32 - 1) * g.truncation_bound;
    Ok(EvalResult::finite(value, bound))
}

/// `f'(z) = M g^(M-1) g'`.
pub fn eval_f_deriv(z: PlanePoint, spec: &SeriesFunctionSpec) -> std::result::Result<EvalResult, EvalError> {
    let g = eval_g(z, spec)?;
    if g.is_pole {
        return Err(EvalError::NearPole);
    }
    let dg = eval_g_deriv(z, spec)?;
    let gv = g.value.to_complex().expect("finite series value");
    let dv = dg.value.to_complex().unwrap_or(Complex64::new(f64::INFINITY, 0.0));
    let m = spec.multiplicity;
    if m == 1 {
        return Ok(dg);
    }
    let mf = m as f64;
    let value = mf * gv.powu(m - 1) * dv;
    let bound = mf * gv.norm().powi(m as i32 - 1) * dg.truncation_bound
        + mf * (mf - 1.0) * gv.norm().powi(m as i32 - 2) * dv.norm() * g.truncation_bound;
    Ok(EvalResult::finite(value, bound))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(rho: f64, m: u32) -> SeriesFunctionSpec {
        SeriesFunctionSpec::new(rho, m).unwrap()
    }

    fn at(re: f64, im: f64) -> PlanePoint {
        PlanePoint::finite(re, im)
    }

    fn value(r: &EvalResult) -> Complex64 {
        r.value.to_complex().unwrap()
    }

    /// Plain truncated sum of the defining series, used as an independent check.
    fn naive_g(z: Complex64, mu: f64, terms: u64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for k in 1..=terms {
            let w = z / (k as f64).powf(mu);
            let x = w.powu(k as u32);
            s += 2.0 * x / (x * x - 1.0);
        }
        s
    }

    #[test]
    fn spec_validation() {
        assert!(SeriesFunctionSpec::new(0.0, 1).is_err());
        assert!(SeriesFunctionSpec::new(2.0, 0).is_err());
        assert!(SeriesFunctionSpec::with_margin(2.0, 1, 3).is_err());
        let s = spec(2.5, 1);
        assert!((s.mu() * s.rho() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn frozen_high_precision_values() {
        // 40-digit mpmath sums of 400 rings at the same binary inputs
        let cases = [
            (2.0, 1.5, 0.0, 0.455_358_136_504_069_07, 0.0),
            (2.0, 2.5, 0.0, 0.993_043_873_069_661_78, 0.0),
            (2.0, 2.5, 1.0, 1.126_703_243_594_292_9, -2.833_087_926_938_046),
            (4.0, -3.2, 0.7, -0.335_916_895_008_708_68, -0.223_300_606_130_349_83),
            (1.0, 7.1, -2.3, 0.327_049_038_997_374_15, 1.499_263_647_520_223_8),
            (2.0, 0.3, 0.4, -0.330_506_303_528_999_39, -0.954_255_927_832_082_9),
        ];
        for (rho, re, im, vr, vi) in cases {
            let exact = Complex64::new(vr, vi);
            let g = eval_g(at(re, im), &spec(rho, 1)).unwrap();
            let err = (value(&g) - exact).norm();
            assert!(err <= g.truncation_bound + 1e-14, "rho={rho} z={re}+{im}i err={err}");
            let wide = SeriesFunctionSpec::with_margin(rho, 1, 40).unwrap();
            let err = (value(&eval_g(at(re, im), &wide).unwrap()) - exact).norm();
            assert!(err < 5e-14, "rho={rho} z={re}+{im}i err={err}");
        }
    }

    #[test]
    fn zero_and_poles() {
        let s = spec(2.0, 1);
        assert_eq!(value(&eval_g(PlanePoint::ORIGIN, &s).unwrap()), Complex64::new(0.0, 0.0));
        assert_eq!(value(&eval_f(PlanePoint::ORIGIN, &spec(2.0, 3)).unwrap()), Complex64::new(0.0, 0.0));
        for rho in [0.5, 1.0, 2.0, 4.0] {
            let r = eval_g(at(1.0, 0.0), &spec(rho, 1)).unwrap();
            assert!(r.is_pole && r.value.at_infinity);
        }
        let s = spec(1.0, 2);
        for (k, l) in [(3u64, 1u64), (7, 13), (40, 0)] {
            let u = s.pole(k, l);
            assert!(eval_f(PlanePoint::from_complex(u), &s).unwrap().is_pole);
        }
        assert!(eval_g(PlanePoint::INFINITY, &s).is_err());
    }

    #[test]
    fn derivative_at_origin_is_minus_two() {
        for rho in [0.5, 1.0, 2.0, 4.0] {
            let d = eval_g_deriv(PlanePoint::ORIGIN, &spec(rho, 1)).unwrap();
            assert_eq!(value(&d), Complex64::new(-2.0, 0.0));
        }
    }

    #[test]
    fn derivative_matches_frozen_and_finite_differences() {
        let s = SeriesFunctionSpec::with_margin(2.0, 1, 40).unwrap();
        let d = value(&eval_g_deriv(at(2.5, 0.0), &s).unwrap());
        assert!((d - Complex64::new(-9.537_316_794_819_937, 0.0)).norm() / d.norm() < 1e-12);
        let d = value(&eval_g_deriv(at(2.5, 1.0), &s).unwrap());
        assert!((d - Complex64::new(0.160_686_141_949_242_3, -0.246_765_895_044_211_8)).norm() < 1e-13);

        let h = 1e-6;
        for (re, im) in [(2.5, 0.0), (0.7, -1.9), (5.2, 3.3)] {
            let z = Complex64::new(re, im);
            let fp = value(&eval_g(PlanePoint::from_complex(z + h), &s).unwrap());
            let fm = value(&eval_g(PlanePoint::from_complex(z - h), &s).unwrap());
            let fd = (fp - fm) / (2.0 * h);
            let d = value(&eval_g_deriv(PlanePoint::from_complex(z), &s).unwrap());
            assert!((fd - d).norm() / d.norm() < 1e-6, "z={z} fd={fd} d={d}");
        }
    }

    #[test]
    fn tail_cutoff_examples() {
        assert_eq!(tail_cutoff(0.0, 1.0, 4).unwrap(), 5);
        assert_eq!(series_tail_bound(5), 0.25);
        assert_eq!(tail_cutoff(8.0, 1.0, 4).unwrap(), 20);
        assert_eq!(series_tail_bound(20), 2.0 * 2f64.powi(-18));
        assert_eq!(tail_cutoff(50.0, 2.0, 4).unwrap(), 14);
    }

    #[test]
    fn cutoff_tail_respects_bound_against_long_sums() {
        // mu = 1, |z| = 8: K = 20 rings versus 60 rings
        for (mu, z) in [(1.0, Complex64::from_polar(8.0, 0.37)), (2.0, Complex64::from_polar(50.0, 2.1))] {
            let k = tail_cutoff(z.norm(), mu, 4).unwrap();
            let short = naive_g(z, mu, k);
            let long = naive_g(z, mu, 60);
            assert!((short - long).norm() <= series_tail_bound(k), "mu={mu}");
        }
    }

    #[test]
    fn windowed_sum_agrees_with_plain_sum() {
        // large |z| triggers skipping; compare with the naive full window
        let s = spec(2.0, 1);
        for z in [Complex64::new(150.3, 40.2), Complex64::new(-310.0, 12.5), Complex64::new(0.4, 499.0)] {
            let k = tail_cutoff(z.norm(), s.mu(), s.truncation_margin()).unwrap();
            let naive = naive_g(z, s.mu(), k);
            let fast = eval_g(PlanePoint::from_complex(z), &s).unwrap();
            assert!((value(&fast) - naive).norm() < 1e-10, "z={z}");
            assert!(fast.truncation_bound < 1e-15);
        }
    }

    #[test]
    fn residues_follow_partial_fractions() {
        let s = spec(1.0, 1);
        for (k, l) in [(1u64, 0u64), (2, 1), (3, 5), (6, 7)] {
            let u = s.pole(k, l);
            let v = s.residue(k, l);
            assert!((v.norm() - (k as f64).powf(s.mu() - 1.0)).abs() < 1e-12);
            let eps = 1e-7 * u.norm();
            let z = u + Complex64::new(eps, 0.0);
            let g = value(&eval_g(PlanePoint::from_complex(z), &s).unwrap());
            let principal = v / (z - u);
            assert!((g * (z - u) - v).norm() < 1e-5 * v.norm(), "k={k} l={l} g={g} p={principal}");
        }
    }

    #[test]
    fn near_pole_local_form_matches_partial_fractions() {
        let s = spec(2.0, 1);
        let (k, l) = (9u64, 4u64);
        let u = s.pole(k, l);
        let z = u + Complex64::from_polar(0.03, 1.1);
        // brute-force ring 9 as a sum of its 18 principal parts plus the other rings
        let polar = Polar::new(z);
        let mut other = Complex64::new(0.0, 0.0);
        let cutoff = tail_cutoff(z.norm(), s.mu(), s.truncation_margin()).unwrap();
        for j in 1..=cutoff {
            if j != k {
                other += ring_term(&polar, s.mu(), j);
            }
        }
        let ring: Complex64 = (0..2 * k).map(|m| s.residue(k, m) / (z - s.pole(k, m))).sum();
        let g = value(&eval_g(PlanePoint::from_complex(z), &s).unwrap());
        assert!((g - (ring + other)).norm() < 1e-12 * g.norm().max(1.0));
    }

    #[test]
    fn reflection_symmetry() {
        let s = spec(1.0, 1);
        for i in 0..100 {
            let z = Complex64::from_polar(0.3 + i as f64 * 0.7, 0.1 + i as f64 * 0.61);
            let a = value(&eval_g(PlanePoint::from_complex(z), &s).unwrap());
            let b = value(&eval_g(PlanePoint::from_complex(z.conj()), &s).unwrap());
            assert!((a.conj() - b).norm() <= 1e-13 * a.norm().max(1.0), "z={z}");
        }
    }

    #[test]
    fn powers_compose() {
        let s3 = spec(2.0, 3);
        let g = value(&eval_g(at(1.5, 0.0), &s3).unwrap());
        let f = value(&eval_f(at(1.5, 0.0), &s3).unwrap());
        assert_eq!(f, g.powu(3));
    }

    #[test]
    fn precision_limit_is_reported() {
        let s = spec(2.0, 1);
        assert!(matches!(eval_g(at(1e11, 0.0), &s), Err(EvalError::PrecisionExhausted { .. })));
    }
}
