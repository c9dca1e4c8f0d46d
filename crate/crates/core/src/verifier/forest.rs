//! Parameters for the disk-forest function and the inequalities they must meet.
//!
//! With disks `D(a_k, r_k)` inside `{|z| > 2}`, inner radii `r_k'`,
//! separations `d_k`, weights `eps_k` and pole orders `m_k`:
//!
//! | name                  | inequality                                |
//! |-----------------------|-------------------------------------------|
//! | `eps_sum`             | `sum eps_k < 1/2`                          |
//! | `derivative_floor`    | `eps_k m_k / r_k > 2`                      |
//! | `inner_disk_growth`   | `eps_k (r_k / r_k')^m_k > 3`               |
//! | `neighbor_decay`      | `(m_k / d_k)(r_k / d_k)^m_k <= 1`          |
//! | `annulus_area_budget` | `sum_{k in I_n} r_k^2 / m_k <= 3/32`       |
//!
//! where `I_n` lists the disks meeting `P_n = {2^n <= |z| < 2^(n+1)}`.

use std::io::Write;

use serde::Serialize;

use crate::catalog::{DiskForestSpec, ForestDisk};
use crate::error::{Error, Result};
use crate::geometry::{Annulus, Disk, PlanePoint};

/// Largest pole order the chooser will try.
pub const MAX_MULTIPLICITY: u64 = 1_000_000;

pub const ANNULUS_BUDGET: f64 = 3.0 / 32.0;

/// A disk of the layout before weights and orders are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayoutDisk {
    pub center: PlanePoint,
    pub radius: f64,
}

impl LayoutDisk {
    pub fn new(re: f64, im: f64, radius: f64) -> Self {
        LayoutDisk {
            center: PlanePoint::finite(re, im),
            radius,
        }
    }

    fn disk(&self) -> Result<Disk> {
        Disk::new(self.center, self.radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintRow {
    pub name: &'static str,
    /// Disk (1-based) or annulus index the row refers to.
    pub index: Option<u64>,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintReport {
    pub rows: Vec<ConstraintRow>,
    pub pass: bool,
}

impl ConstraintReport {
    fn from_rows(rows: Vec<ConstraintRow>) -> Self {
        let pass = rows.iter().all(|r| r.pass);
        ConstraintReport { rows, pass }
    }

    pub fn first_failure(&self) -> Option<&ConstraintRow> {
        self.rows.iter().find(|r| !r.pass)
    }

    pub fn rows_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a ConstraintRow> + 'a {
        self.rows.iter().filter(move |r| r.name == name)
    }

    /// `Ok` when every row passes, otherwise a constraint error naming the first failure.
    pub fn into_result(self) -> Result<Self> {
        match self.first_failure() {
            None => Ok(self),
            Some(row) => Err(Error::Constraint {
                name: row.name.to_string(),
                detail: format!(
                    "{}lhs = {:e}, threshold = {:e}",
                    row.index.map(|i| format!("index {i}: ")).unwrap_or_default(),
                    row.lhs,
                    row.rhs
                ),
            }),
        }
    }
}

pub fn write_report_csv<W: Write>(report: &ConstraintReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["constraint", "index", "lhs", "rhs", "pass"])?;
    for r in &report.rows {
        w.write_record([
            r.name.to_string(),
            r.index.map(|i| i.to_string()).unwrap_or_default(),
            format!("{:.16e}", r.lhs),
            format!("{:.16e}", r.rhs),
            r.pass.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<constraint csv>", e))?;
    Ok(())
}

#[derive(Debug, Serialize, serde::Deserialize)]
struct SpecRecord {
    re: f64,
    im: f64,
    radius: f64,
    inner_radius: f64,
    separation: f64,
    eps: f64,
    m: u32,
}

/// CSV with columns `re,im,radius,inner_radius,separation,eps,m`, one disk per row.
pub fn write_spec_csv<W: Write>(spec: &DiskForestSpec, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for d in spec.disks() {
        w.serialize(SpecRecord {
            re: d.center.re,
            im: d.center.im,
            radius: d.radius,
            inner_radius: d.inner_radius,
            separation: d.separation,
            eps: d.eps,
            m: d.multiplicity,
        })?;
    }
    w.flush().map_err(|e| Error::io("<forest spec csv>", e))?;
    Ok(())
}

/// Inverse of [`write_spec_csv`]. Only field-level checks are applied; use
/// [`validate_forest_params`] for the constraints.
pub fn read_spec_csv<R: std::io::Read>(input: R) -> Result<DiskForestSpec> {
    let mut r = csv::Reader::from_reader(input);
    let mut disks = Vec::new();
    for rec in r.deserialize() {
        let rec: SpecRecord = rec?;
        disks.push(ForestDisk {
            center: PlanePoint::finite(rec.re, rec.im),
            radius: rec.radius,
            inner_radius: rec.inner_radius,
            separation: rec.separation,
            eps: rec.eps,
            multiplicity: rec.m,
        });
    }
    DiskForestSpec::new(disks)
}

/// `min_{j != k} dist(a_k, D(a_j, r_j))` for every disk; infinite for a lone disk.
pub fn separations(layout: &[LayoutDisk]) -> Vec<f64> {
    layout
        .iter()
        .enumerate()
        .map(|(k, dk)| {
            layout
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, dj)| dk.center.distance(&dj.center) - dj.radius)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Annulus indices `n >= 1` with `P_n` meeting the disk.
fn annuli_met(center_modulus: f64, radius: f64) -> std::ops::RangeInclusive<u32> {
    let outer = center_modulus + radius;
    let inner = (center_modulus - radius).max(1.0);
    // P_n meets the open disk iff |a| + r > 2^n and |a| - r < 2^(n+1)
    let mut lo = inner.log2().floor().max(1.0) as u32;
    while lo > 1 && (center_modulus - radius) < 2f64.powi(lo as i32) {
        lo -= 1;
    }
    while !(center_modulus - radius < 2f64.powi(lo as i32 + 1)) {
        lo += 1;
    }
    let mut hi = outer.log2().floor().max(1.0) as u32;
    while !(outer > 2f64.powi(hi as i32)) && hi > lo {
        hi -= 1;
    }
    while outer > 2f64.powi(hi as i32 + 1) {
        hi += 1;
    }
    if !(outer > 2f64.powi(lo as i32)) {
        return 1..=0;
    }
    lo..=hi
}

/// `I_n` for every annulus met by some disk, as `(n, members)`.
pub fn annulus_members(disks: &[(f64, f64)]) -> Vec<(u32, Vec<usize>)> {
    let mut map: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for (k, &(modulus, radius)) in disks.iter().enumerate() {
        for n in annuli_met(modulus, radius) {
            map.entry(n).or_default().push(k);
        }
    }
    map.into_iter().collect()
}

fn log_neighbor_decay(m: f64, r: f64, d: f64) -> f64 {
    if d.is_infinite() {
        return f64::NEG_INFINITY;
    }
    m.ln() - d.ln() + m * (r.ln() - d.ln())
}

fn derivative_floor_ok(eps: f64, m: u64, r: f64) -> bool {
    eps * m as f64 / r > 2.0
}

fn inner_growth_ok(eps: f64, m: u64, r: f64, rp: f64) -> bool {
    eps.ln() + m as f64 * (r / rp).ln() > 3f64.ln()
}

fn neighbor_ok(m: u64, r: f64, d: f64) -> bool {
    log_neighbor_decay(m as f64, r, d) <= 0.0
}

fn check_layout(layout: &[LayoutDisk]) -> Result<()> {
    for (k, d) in layout.iter().enumerate() {
        d.disk()?;
        if !(d.radius < 1.0) {
            return Err(Error::invalid(format!("disk {} has radius {} >= 1", k + 1, d.radius)));
        }
        if !(d.center.modulus() - d.radius >= 2.0) {
            return Err(Error::invalid(format!(
                "disk {} is not contained in {{|z| > 2}} (|a| = {}, r = {})",
                k + 1,
                d.center.modulus(),
                d.radius
            )));
        }
    }
    for j in 0..layout.len() {
        for k in j + 1..layout.len() {
            if layout[j].disk()?.closures_meet(&layout[k].disk()?) {
                return Err(Error::invalid(format!("closed disks {} and {} intersect", j + 1, k + 1)));
            }
        }
    }
    Ok(())
}

/// Weights `eps_k = eps_budget 2^-k`, inner radii `r_k / 2`, and the smallest
/// orders meeting every constraint.
pub fn choose_forest_params(layout: &[LayoutDisk], eps_budget: f64) -> Result<DiskForestSpec> {
    if !(eps_budget > 0.0 && eps_budget < 0.5) {
        return Err(Error::invalid(format!("eps budget must lie in (0, 1/2), got {eps_budget}")));
    }
    check_layout(layout)?;
    let seps = separations(layout);
    let mut disks = Vec::with_capacity(layout.len());
    for (k, (d, &sep)) in layout.iter().zip(&seps).enumerate() {
        let eps = eps_budget * 2f64.powi(-(k as i32 + 1));
        if eps == 0.0 {
            return Err(Error::invalid(format!("weight of disk {} underflows", k + 1)));
        }
        let r = d.radius;
        let rp = r / 2.0;
        // start at the analytic minimum and correct by direct checks
        let guess_f = (2.0 * r / eps).floor().max(0.0);
        let guess_g = ((3.0 / eps).ln() / (r / rp).ln()).floor().max(0.0);
        let start = guess_f.max(guess_g).min(MAX_MULTIPLICITY as f64 + 1.0) as u64;
        let mut m = start.saturating_sub(1).max(1);
        while !(derivative_floor_ok(eps, m, r) && inner_growth_ok(eps, m, r, rp) && neighbor_ok(m, r, sep)) {
            m += 1;
            if m > MAX_MULTIPLICITY {
                return Err(Error::Constraint {
                    name: "derivative_floor".into(),
                    detail: format!("disk {} needs a pole order above {MAX_MULTIPLICITY}", k + 1),
                });
            }
        }
        disks.push(ForestDisk {
            center: d.center,
            radius: r,
            inner_radius: rp,
            separation: sep,
            eps,
            multiplicity: m as u32,
        });
    }
    // raise orders until every annulus meets its area budget
    let geometry: Vec<(f64, f64)> = disks.iter().map(|d| (d.center.modulus(), d.radius)).collect();
    for (_, members) in annulus_members(&geometry) {
        loop {
            let sum: f64 = members
                .iter()
                .map(|&k| disks[k].radius.powi(2) / disks[k].multiplicity as f64)
                .sum();
            if sum <= ANNULUS_BUDGET {
                break;
            }
            let &worst = members
                .iter()
                .max_by(|&&a, &&b| {
                    let ta = disks[a].radius.powi(2) / disks[a].multiplicity as f64;
                    let tb = disks[b].radius.powi(2) / disks[b].multiplicity as f64;
                    ta.total_cmp(&tb)
                })
                .expect("annulus has members");
            let d = &mut disks[worst];
            let mut m = d.multiplicity as u64 + 1;
            while !neighbor_ok(m, d.radius, d.separation) {
                m += 1;
            }
            if m > MAX_MULTIPLICITY {
                return Err(Error::Constraint {
                    name: "annulus_area_budget".into(),
                    detail: format!("disk {} needs a pole order above {MAX_MULTIPLICITY}", worst + 1),
                });
            }
            d.multiplicity = m as u32;
        }
    }
    let spec = DiskForestSpec::new(disks)?;
    validate_forest_params(&spec).into_result()?;
    Ok(spec)
}

fn row(name: &'static str, index: Option<u64>, lhs: f64, rhs: f64, pass: bool) -> ConstraintRow {
    ConstraintRow {
        name,
        index,
        lhs,
        rhs,
        pass,
    }
}

/// Evaluate every constraint as stated, plus the structural preconditions.
pub fn validate_forest_params(spec: &DiskForestSpec) -> ConstraintReport {
    let disks = spec.disks();
    let mut rows = Vec::new();
    let eps_sum = spec.eps_sum();
    rows.push(row("eps_sum", None, eps_sum, 0.5, eps_sum < 0.5));

    let layout: Vec<LayoutDisk> = disks
        .iter()
        .map(|d| LayoutDisk {
            center: d.center,
            radius: d.radius,
        })
        .collect();
    let seps = separations(&layout);

    for (k, d) in disks.iter().enumerate() {
        let idx = Some(k as u64 + 1);
        let m = d.multiplicity as f64;
        rows.push(row(
            "radius_order",
            idx,
            d.inner_radius / d.radius,
            1.0,
            d.inner_radius > 0.0 && d.inner_radius < d.radius && d.radius < 1.0,
        ));
        let gap = d.center.modulus() - d.radius;
        rows.push(row("outside_radius_2", idx, gap, 2.0, gap >= 2.0));
        rows.push(row("separation", idx, d.separation, d.radius, d.separation > d.radius));
        let rel = if seps[k].is_infinite() && d.separation.is_infinite() {
            0.0
        } else {
            (d.separation - seps[k]).abs() / seps[k].abs().max(1.0)
        };
        rows.push(row("separation_matches_layout", idx, rel, 1e-12, rel <= 1e-12));

        let lhs = d.eps * m / d.radius;
        rows.push(row("derivative_floor", idx, lhs, 2.0, lhs > 2.0));
        let log_lhs = d.eps.ln() + m * (d.radius / d.inner_radius).ln();
        rows.push(row("inner_disk_growth", idx, log_lhs.exp(), 3.0, log_lhs > 3f64.ln()));
        let log_lhs = log_neighbor_decay(m, d.radius, d.separation);
        let ok = d.separation > d.radius && log_lhs <= 0.0;
        rows.push(row("neighbor_decay", idx, log_lhs.exp(), 1.0, ok));
    }
    for j in 0..disks.len() {
        for k in j + 1..disks.len() {
            let gap = disks[j].center.distance(&disks[k].center) - disks[j].radius - disks[k].radius;
            rows.push(row("disjoint_closures", Some(j as u64 + 1), gap, 0.0, gap > 0.0));
        }
    }
    let geometry: Vec<(f64, f64)> = disks.iter().map(|d| (d.center.modulus(), d.radius)).collect();
    for (n, members) in annulus_members(&geometry) {
        let sum: f64 = members
            .iter()
            .map(|&k| disks[k].radius.powi(2) / disks[k].multiplicity as f64)
            .sum();
        rows.push(row("annulus_area_budget", Some(n as u64), sum, ANNULUS_BUDGET, sum <= ANNULUS_BUDGET));
    }
    ConstraintReport::from_rows(rows)
}

/// Area of `D(c, r) ∩ D(0, big)`.
fn lens_area(c: f64, r: f64, big: f64) -> f64 {
    use std::f64::consts::PI;
    if c + r <= big {
        return PI * r * r;
    }
    if c - r >= big || c >= big + r {
        return 0.0;
    }
    if c + big <= r {
        return PI * big * big;
    }
    let a1 = ((c * c + r * r - big * big) / (2.0 * c * r)).clamp(-1.0, 1.0).acos();
    let a2 = ((c * c + big * big - r * r) / (2.0 * c * big)).clamp(-1.0, 1.0).acos();
    let tri = 0.5 * ((-c + r + big) * (c + r - big) * (c - r + big) * (c + r + big)).max(0.0).sqrt();
    r * r * a1 + big * big * a2 - tri
}

/// Exact area of `P_n` not covered by the disks of radius `radius_of(d)`.
pub fn uncovered_area(disks: &[ForestDisk], n: u32, radius_of: impl Fn(&ForestDisk) -> f64) -> f64 {
    let p = Annulus::dyadic(n);
    let covered: f64 = disks
        .iter()
        .map(|d| {
            let c = d.center.modulus();
            let r = radius_of(d);
            lens_area(c, r, p.outer_radius) - lens_area(c, r, p.inner_radius)
        })
        .sum();
    p.area() - covered
}

/// Default layout: `per_annulus` equal disks on the middle circle `|z| = 1.5 * 2^n`
/// of each `P_n`, `n = 1 ..= n_max`.
pub fn default_layout(n_max: u32, per_annulus: usize, radius: f64) -> Result<Vec<LayoutDisk>> {
    if n_max == 0 || per_annulus == 0 {
        return Err(Error::invalid("layout needs at least one annulus and one disk per annulus"));
    }
    let mut out = Vec::new();
    for n in 1..=n_max {
        let c = 1.5 * 2f64.powi(n as i32);
        for i in 0..per_annulus {
            let theta = std::f64::consts::TAU * (i as f64 + 0.25 * n as f64) / per_annulus as f64;
            out.push(LayoutDisk {
                center: PlanePoint::from_polar(c, theta),
                radius,
            });
        }
    }
    check_layout(&out)?;
    Ok(out)
}
