//! Poles and residues of the series function, ordered by modulus.
//!
//! Ring `k` holds the `2k` poles `u_{k,l}` of modulus `k^mu`, so the rank of
//! `(k, l)` is `k (k - 1) + l + 1` and the counting function is `K (K + 1)`
//! with `K` the number of rings inside the radius. Entries are generated on
//! demand; nothing proportional to the pole count is stored.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{compensated_sum, SeriesFunctionSpec};
use crate::error::{Error, Result};
use crate::geometry::PlanePoint;

/// Largest atlas that may be materialized or exported.
pub const MAX_MATERIALIZED_ENTRIES: u64 = 5_000_000;

/// Largest ring index an atlas may reach.
const MAX_RING: u64 = 1_000_000_000;

/// Rings per parallel work unit; fixed so sums do not depend on thread count.
const RING_CHUNK: u64 = 4096;

/// Critical-exponent classification needs at least this many entries.
pub const MIN_THRESHOLD_ENTRIES: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoleEntry {
    pub j: u64,
    pub location: PlanePoint,
    pub scale: PlanePoint,
    pub multiplicity: u32,
    pub ring: u64,
    pub slot: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoleAtlas {
    spec: SeriesFunctionSpec,
    r_max: f64,
    max_ring: u64,
}

/// Number of rings `k >= 1` with `k^mu <= r`, exact at ring radii.
fn rings_within(r: f64, mu: f64) -> u64 {
    if !(r >= 1.0) {
        return 0;
    }
    let mut k = r.powf(1.0 / mu).floor().min(MAX_RING as f64 + 1.0) as u64;
    while k > 0 && (k as f64).powf(mu) > r {
        k -= 1;
    }
    while ((k + 1) as f64).powf(mu) <= r {
        k += 1;
    }
    k
}

pub fn build_atlas(rho: f64, multiplicity: u32, r_max: f64) -> Result<PoleAtlas> {
    let spec = SeriesFunctionSpec::new(rho, multiplicity)?;
    PoleAtlas::new(spec, r_max)
}

impl PoleAtlas {
    pub fn new(spec: SeriesFunctionSpec, r_max: f64) -> Result<Self> {
        if !(r_max >= 1.0 && r_max.is_finite()) {
            return Err(Error::invalid(format!("atlas radius must be at least 1, got {r_max}")));
        }
        if r_max.powf(1.0 / spec.mu()) > MAX_RING as f64 {
            return Err(Error::invalid(format!("atlas radius {r_max:e} needs more than {MAX_RING} rings")));
        }
        let max_ring = rings_within(r_max, spec.mu());
        Ok(PoleAtlas { spec, r_max, max_ring })
    }

    /// Atlas whose outermost ring is exactly `rings`.
    pub fn with_rings(rho: f64, multiplicity: u32, rings: u64) -> Result<Self> {
        let spec = SeriesFunctionSpec::new(rho, multiplicity)?;
        if rings == 0 {
            return Err(Error::invalid("atlas needs at least one ring"));
        }
        Self::new(spec, (rings as f64).powf(spec.mu()))
    }

    pub fn spec(&self) -> &SeriesFunctionSpec {
        &self.spec
    }

    pub fn rho(&self) -> f64 {
        self.spec.rho()
    }

    pub fn mu(&self) -> f64 {
        self.spec.mu()
    }

    pub fn multiplicity(&self) -> u32 {
        self.spec.multiplicity()
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn max_ring(&self) -> u64 {
        self.max_ring
    }

    pub fn len(&self) -> u64 {
        self.max_ring * (self.max_ring + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.max_ring == 0
    }

    pub fn entry_for(&self, ring: u64, slot: u64) -> PoleEntry {
        debug_assert!(ring >= 1 && slot < 2 * ring);
        PoleEntry {
            j: ring * (ring - 1) + slot + 1,
            location: PlanePoint::from_complex(self.spec.pole(ring, slot)),
            scale: PlanePoint::from_complex(self.spec.residue(ring, slot)),
            multiplicity: self.spec.multiplicity(),
            ring,
            slot,
        }
    }

    /// Entry of rank `j` (1-based).
    pub fn entry(&self, j: u64) -> Option<PoleEntry> {
        if j == 0 || j > self.len() {
            return None;
        }
        // ring k covers ranks k(k-1)+1 ..= k(k+1)
        let mut k = ((j as f64).sqrt()).floor() as u64;
        k = k.max(1);
        while k * (k + 1) < j {
            k += 1;
        }
        while k > 1 && (k - 1) * k >= j {
            k -= 1;
        }
        Some(self.entry_for(k, j - k * (k - 1) - 1))
    }

    /// All entries in rank order.
    pub fn entries(&self) -> impl Iterator<Item = PoleEntry> + '_ {
        (1..=self.max_ring).flat_map(move |k| (0..2 * k).map(move |l| self.entry_for(k, l)))
    }

    pub fn materialize(&self) -> Result<Vec<PoleEntry>> {
        if self.len() > MAX_MATERIALIZED_ENTRIES {
            return Err(Error::invalid(format!(
                "atlas has {} entries, more than the {MAX_MATERIALIZED_ENTRIES} that may be materialized",
                self.len()
            )));
        }
        Ok(self.entries().collect())
    }

    /// Sum of `per_ring(k)` over `lo..=hi`, in fixed chunks so the result is
    /// independent of scheduling.
    fn ring_sum(&self, lo: u64, hi: u64, per_ring: impl Fn(u64) -> f64 + Sync) -> f64 {
        if lo > hi {
            return 0.0;
        }
        let chunks = (hi - lo) / RING_CHUNK + 1;
        let partial: Vec<f64> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let a = lo + c * RING_CHUNK;
                let b = (a + RING_CHUNK - 1).min(hi);
                compensated_sum((a..=b).map(&per_ring))
            })
            .collect();
        compensated_sum(partial)
    }

    /// `(|b| / |a|^(1 + 1/M))^t` for every pole of ring `k`.
    fn lemma_term(&self, k: u64, t: f64) -> f64 {
        let a = self.spec.ring_modulus(k);
        let b = self.spec.residue_modulus(k);
        (b / a.powf(1.0 + 1.0 / self.multiplicity() as f64)).powf(t)
    }

    /// Sum of the cover terms over poles with `lo < |a| <= hi`.
    pub fn cover_sum_between(&self, t: f64, lo: f64, hi: f64) -> f64 {
        let first = rings_within(lo, self.mu()) + 1;
        let last = rings_within(hi.min(self.r_max), self.mu());
        self.ring_sum(first, last, |k| 2.0 * k as f64 * self.lemma_term(k, t))
    }
}

/// Number of poles with `|a| <= r`.
pub fn counting_function(atlas: &PoleAtlas, r: f64) -> Result<u64> {
    if r.is_nan() || r > atlas.r_max * (1.0 + 1e-12) {
        return Err(Error::invalid(format!("radius {r} is outside the atlas (r_max = {})", atlas.r_max)));
    }
    let k = rings_within(r, atlas.mu()).min(atlas.max_ring);
    Ok(k * (k + 1))
}

/// `sum_{|a_j| > skip_below} (|b_j| / |a_j|^(1 + 1/M))^t` over the atlas.
pub fn lemma31_partial_sum(atlas: &PoleAtlas, t: f64, skip_below: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 2.0) {
        return Err(Error::invalid(format!("exponent t must lie in (0, 2], got {t}")));
    }
    if !(skip_below >= 0.0) {
        return Err(Error::invalid(format!("skip radius must be non-negative, got {skip_below}")));
    }
    Ok(atlas.cover_sum_between(t, skip_below, atlas.r_max))
}

/// `2 M rho / (2 + M rho)`.
pub fn dimension_bound(rho: f64, multiplicity: u32) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) || multiplicity == 0 {
        return Err(Error::invalid(format!("need rho > 0 and M >= 1, got rho={rho}, M={multiplicity}")));
    }
    let m = multiplicity as f64;
    Ok(2.0 * m * rho / (2.0 + m * rho))
}

/// Result of the convergence-threshold bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdEstimate {
    pub value: f64,
    /// Width of the final bisection bracket.
    pub bracket_width: f64,
    pub iterations: u32,
}

/// Number of dyadic windows used to classify an exponent.
const WINDOWS: usize = 3;
const BISECTION_STEPS: u32 = 30;
const T_LOW: f64 = 0.01;
const T_HIGH: f64 = 2.0;

/// Least-squares slope of `y` against `x`.
pub(crate) fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Log-log slope of the cover sums over the windows `(r/2, r]` for the top
/// three dyadic radii below `r_max`.
pub fn window_slope(atlas: &PoleAtlas, t: f64) -> f64 {
    let mut xs = Vec::with_capacity(WINDOWS);
    let mut ys = Vec::with_capacity(WINDOWS);
    for i in 0..WINDOWS {
        let hi = atlas.r_max / 2f64.powi(i as i32);
        let s = atlas.cover_sum_between(t, hi / 2.0, hi);
        xs.push(hi.ln());
        ys.push(s.ln());
    }
    ls_slope(&xs, &ys)
}

/// Cover sums converge when the window sums shrink with the radius.
fn converges(atlas: &PoleAtlas, t: f64) -> bool {
    window_slope(atlas, t) < 0.0
}

/// Bisection for the exponent where the cover sums switch from divergent to
/// convergent.
pub fn critical_exponent(atlas: &PoleAtlas) -> Result<ThresholdEstimate> {
    if atlas.len() < MIN_THRESHOLD_ENTRIES {
        return Err(Error::invalid(format!(
            "atlas has {} entries; the threshold needs at least {MIN_THRESHOLD_ENTRIES}",
            atlas.len()
        )));
    }
    // the window sums must all be populated
    if rings_within(atlas.r_max / 2f64.powi(WINDOWS as i32), atlas.mu()) == rings_within(atlas.r_max / 2f64.powi(WINDOWS as i32 - 1), atlas.mu()) {
        return Err(Error::numerical("outermost dyadic windows contain no poles"));
    }
    // classification must switch exactly once across the search interval
    let probes = 16;
    let mut last = false;
    for i in 0..=probes {
        let t = T_LOW + (T_HIGH - T_LOW) * i as f64 / probes as f64;
        let c = converges(atlas, t);
        if last && !c {
            return Err(Error::numerical(format!(
                "convergence classification is not monotone in t near t = {t:.4}"
            )));
        }
        last = c;
    }
    if converges(atlas, T_LOW) || !converges(atlas, T_HIGH) {
        return Err(Error::numerical(format!(
            "no convergence threshold inside ({T_LOW}, {T_HIGH})"
        )));
    }
    let (mut lo, mut hi) = (T_LOW, T_HIGH);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if converges(atlas, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ThresholdEstimate {
        value: 0.5 * (lo + hi),
        bracket_width: hi - lo,
        iterations: BISECTION_STEPS,
    })
}

/// Octaves below `r_max` used by the order regression.
const ORDER_OCTAVES: i32 = 10;

/// Slope of `log n(r)` against `log r` over the top dyadic radii.
pub fn convergence_exponent_estimate(atlas: &PoleAtlas) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..=ORDER_OCTAVES {
        let r = atlas.r_max / 2f64.powi(i);
        let n = counting_function(atlas, r)?;
        if n == 0 {
            break;
        }
        xs.push(r.ln());
        ys.push((n as f64).ln());
    }
    let distinct = ys.windows(2).filter(|w| w[0] != w[1]).count();
    if atlas.max_ring < 2 || xs.len() < 2 || distinct == 0 {
        return Err(Error::numerical(
            "insufficient data: order regression needs at least two populated dyadic scales",
        ));
    }
    Ok(ls_slope(&xs, &ys))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PackingRow {
    pub radius: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `sum_{|a_j| <= r} |b_j|^2 <= 36 R^2 r^2` at `r = 1, 2, 4, ... <= r_max`.
pub fn packing_check(atlas: &PoleAtlas, r_big: f64) -> Vec<PackingRow> {
    let mut rows = Vec::new();
    let mut acc = crate::catalog::CompensatedSum::new();
    let mut ring = 0u64;
    let mut r = 1.0f64;
    while r <= atlas.r_max {
        let upto = rings_within(r, atlas.mu());
        while ring < upto {
            ring += 1;
            let b = atlas.spec.residue_modulus(ring);
            acc.add(num_complex::Complex64::new(2.0 * ring as f64 * b * b, 0.0));
        }
        let lhs = acc.value().re;
        let rhs = 36.0 * r_big * r_big * r * r;
        rows.push(PackingRow {
            radius: r,
            lhs,
            rhs,
            pass: lhs <= rhs,
        });
        r *= 2.0;
    }
    rows
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with columns `j,re_a,im_a,re_b,im_b,m,ring,slot`.
pub fn write_atlas_csv<W: Write>(atlas: &PoleAtlas, out: W) -> Result<()> {
    if atlas.len() > MAX_MATERIALIZED_ENTRIES {
        return Err(Error::invalid(format!(
            "atlas has {} entries; export is limited to {MAX_MATERIALIZED_ENTRIES}",
            atlas.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "re_a", "im_a", "re_b", "im_b", "m", "ring", "slot"])?;
    for e in atlas.entries() {
        w.write_record([
            e.j.to_string(),
            fmt_num(e.location.re),
            fmt_num(e.location.im),
            fmt_num(e.scale.re),
            fmt_num(e.scale.im),
            e.multiplicity.to_string(),
            e.ring.to_string(),
            e.slot.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<atlas csv>", e))?;
    Ok(())
}

pub fn save_atlas_csv(atlas: &PoleAtlas, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_atlas_csv(atlas, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_atlas_matches_enumeration() {
        let atlas = build_atlas(2.0, 1, 3.5).unwrap();
        assert_eq!(atlas.max_ring(), 3);
        assert_eq!(atlas.len(), 12);
        assert_eq!(counting_function(&atlas, 3.5).unwrap(), 12);
        let e = atlas.entry_for(1, 0);
        assert_eq!(e.location, PlanePoint::finite(1.0, 0.0));
        let e = atlas.entry_for(1, 1);
        assert!((e.location.re + 1.0).abs() < 1e-15 && e.location.im.abs() < 1e-15);
        let e = atlas.entry_for(2, 1);
        assert!(e.location.re.abs() < 1e-15 && (e.location.im - 2.0).abs() < 1e-15);
        assert!((e.scale.modulus() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_lookup_round_trips() {
        let atlas = build_atlas(1.0, 2, 400.0).unwrap();
        for (i, e) in atlas.entries().enumerate() {
            assert_eq!(e.j, i as u64 + 1);
            assert_eq!(atlas.entry(e.j), Some(e));
        }
        assert_eq!(atlas.entry(0), None);
        assert_eq!(atlas.entry(atlas.len() + 1), None);
    }

    #[test]
    fn counting_examples() {
        let atlas = build_atlas(2.0, 1, 100.0).unwrap();
        assert_eq!(counting_function(&atlas, 0.99).unwrap(), 0);
        let atlas = build_atlas(1.0, 1, 100.0).unwrap();
        assert_eq!(counting_function(&atlas, 9.5).unwrap(), 12);
        // right-continuous at the ring radius 9 = 3^2
        assert_eq!(counting_function(&atlas, 9.0).unwrap(), 12);
        assert_eq!(counting_function(&atlas, 8.999_999).unwrap(), 6);
        assert!(counting_function(&atlas, 101.0).is_err());
    }

    #[test]
    fn rejects_small_radius() {
        assert!(build_atlas(2.0, 1, 0.5).is_err());
    }

    #[test]
    fn single_ring_sum_is_two() {
        let atlas = build_atlas(2.0, 1, 1.5).unwrap();
        for t in [0.3, 1.0, 2.0] {
            assert_eq!(lemma31_partial_sum(&atlas, t, 0.0).unwrap(), 2.0);
        }
        assert!(convergence_exponent_estimate(&atlas).is_err());
    }

    #[test]
    fn dimension_bound_values() {
        for m in 1..6u32 {
            let mf = m as f64;
            assert!((dimension_bound(2.0, m).unwrap() - 2.0 * mf / (1.0 + mf)).abs() < 1e-15);
        }
        assert!((dimension_bound(1.0, 1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((dimension_bound(1e-9, 1).unwrap() - 1e-9).abs() < 1e-17);
        assert!(dimension_bound(0.0, 1).is_err());
    }

    #[test]
    fn csv_rows_and_refusal() {
        let atlas = build_atlas(2.0, 1, 3.5).unwrap();
        let mut buf = Vec::new();
        write_atlas_csv(&atlas, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 13);
        assert!(text.starts_with("j,re_a,im_a,re_b,im_b,m,ring,slot\n1,1.0000000000000000e0,"));
        let huge = build_atlas(2.0, 1, 1e7).unwrap();
        assert!(write_atlas_csv(&huge, Vec::new()).is_err());
    }
}
