//! Box-counting estimates and the nested-cover lower bound.

use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::atlas::ls_slope;
use crate::dynamics::{Classification, GridClassification};
use crate::error::{Error, Result};
use crate::geometry::{PlanePoint, Rect};
use crate::tolerances::TOL;

fn check_points(points: &[PlanePoint], region: &Rect) -> Result<()> {
    if points.is_empty() {
        return Err(Error::invalid("box counting needs at least one point"));
    }
    let slack = TOL.geometric * region.width.max(region.height);
    for p in points {
        let inside = p.is_finite()
            && p.re >= region.corner_re - slack
            && p.re <= region.corner_re + region.width + slack
            && p.im >= region.corner_im - slack
            && p.im <= region.corner_im + region.height + slack;
        if !inside {
            return Err(Error::invalid(format!("point {p} lies outside the counting region")));
        }
    }
    Ok(())
}

fn count_unchecked(points: &[PlanePoint], box_size: f64, region: &Rect) -> u64 {
    let boxes: HashSet<(i64, i64)> = points
        .iter()
        .map(|p| {
            (
                ((p.re - region.corner_re) / box_size).floor() as i64,
                ((p.im - region.corner_im) / box_size).floor() as i64,
            )
        })
        .collect();
    boxes.len() as u64
}

/// Occupied boxes of side `box_size` on the grid anchored at the region corner.
pub fn box_count(points: &[PlanePoint], box_size: f64, region: &Rect) -> Result<u64> {
    check_points(points, region)?;
    if !(box_size > 0.0 && box_size.is_finite()) {
        return Err(Error::invalid(format!("box size must be positive, got {box_size}")));
    }
    Ok(count_unchecked(points, box_size, region))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionEstimate {
    /// Fitted slope clamped to `[0, 2]`.
    pub value: f64,
    /// Raw least-squares slope.
    pub slope: f64,
    pub scales_used: Vec<f64>,
    pub counts: Vec<u64>,
    /// RMS residual of the log-log fit.
    pub fit_residual: f64,
    pub point_count: usize,
}

/// Slope of `log count` against `-log size`.
pub fn fit_box_dimension(points: &[PlanePoint], sizes: &[f64], region: &Rect) -> Result<DimensionEstimate> {
    check_points(points, region)?;
    if sizes.len() < 4 {
        return Err(Error::invalid(format!("need at least 4 box sizes, got {}", sizes.len())));
    }
    if sizes.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::invalid("box sizes must be positive"));
    }
    let counts: Vec<u64> = sizes.par_iter().map(|&s| count_unchecked(points, s, region)).collect();
    let xs: Vec<f64> = sizes.iter().map(|s| -s.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let slope = ls_slope(&xs, &ys);
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (my + slope * (x - mx));
            e * e
        })
        .sum();
    Ok(DimensionEstimate {
        value: slope.clamp(0.0, 2.0),
        slope,
        scales_used: sizes.to_vec(),
        counts,
        fit_residual: (rss / xs.len() as f64).sqrt(),
        point_count: points.len(),
    })
}

/// `2^-lo, ..., 2^-hi` times the longer side of the region.
pub fn dyadic_sizes(region: &Rect, lo: u32, hi: u32) -> Vec<f64> {
    let side = region.width.max(region.height);
    (lo..=hi).map(|k| side * 2f64.powi(-(k as i32))).collect()
}

/// Sets with known similarity dimension used to calibrate box counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CalibrationSet {
    /// Horizontal unit segment, dimension 1.
    Segment,
    /// Unit square, dimension 2.
    Square,
    /// Middle-thirds Cantor set, dimension `ln 2 / ln 3`.
    Cantor,
}

impl CalibrationSet {
    pub fn similarity_dimension(self) -> f64 {
        match self {
            CalibrationSet::Segment => 1.0,
            CalibrationSet::Square => 2.0,
            CalibrationSet::Cantor => 2f64.ln() / 3f64.ln(),
        }
    }

    /// Sample points at refinement `level`, box sizes resolved by them, and the unit region.
    pub fn generate(self, level: u32) -> Result<(Vec<PlanePoint>, Vec<f64>, Rect)> {
        let region = Rect::new(0.0, 0.0, 1.0, 1.0)?;
        // off-lattice height so no point sits on a box edge
        let y = 1.0 / 3.0 + 1e-3;
        let (points, sizes): (Vec<PlanePoint>, Vec<f64>) = match self {
            CalibrationSet::Segment | CalibrationSet::Square => {
                if !(4..=12).contains(&level) {
                    return Err(Error::invalid(format!("level must lie in 4..=12, got {level}")));
                }
                let n = 1usize << level;
                let c = |i: usize| (i as f64 + 0.5) / n as f64;
                let pts = if self == CalibrationSet::Segment {
                    (0..n).map(|i| PlanePoint::finite(c(i), y)).collect()
                } else {
                    (0..n * n).map(|i| PlanePoint::finite(c(i % n), c(i / n))).collect()
                };
                (pts, dyadic_sizes(&region, 1, level - 1))
            }
            CalibrationSet::Cantor => {
                if !(4..=20).contains(&level) {
                    return Err(Error::invalid(format!("level must lie in 4..=20, got {level}")));
                }
                // left ends of the 2^level intervals, built digit by digit
                let mut lefts = vec![0.0f64];
                for k in 1..=level {
                    let step = 2.0 * 3f64.powi(-(k as i32));
                    lefts = lefts.iter().flat_map(|&a| [a, a + step]).collect();
                }
                let half = 0.5 * 3f64.powi(-(level as i32));
                let pts = lefts.iter().map(|&a| PlanePoint::finite(a + half, y)).collect();
                (pts, (1..level).map(|k| 3f64.powi(-(k as i32))).collect())
            }
        };
        Ok((points, sizes, region))
    }
}

pub fn write_box_csv<W: Write>(est: &DimensionEstimate, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["box_size", "count"])?;
    for (s, c) in est.scales_used.iter().zip(&est.counts) {
        w.write_record([format!("{s:.16e}"), c.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<box csv>", e))?;
    Ok(())
}

/// Densities `Delta_l` and diameters `d_l` of a nested cover, held as
/// logarithms so that deep levels do not underflow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverSequence {
    log_deltas: Vec<f64>,
    log_diameters: Vec<f64>,
    ambient_dimension: u32,
}

impl CoverSequence {
    pub fn new(deltas: &[f64], diameters: &[f64], ambient_dimension: u32) -> Result<Self> {
        if deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            return Err(Error::invalid("densities must lie in (0, 1]"));
        }
        if diameters.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
            return Err(Error::invalid("diameters must lie in (0, 1)"));
        }
        Self::from_logs(
            deltas.iter().map(|d| d.ln()).collect(),
            diameters.iter().map(|d| d.ln()).collect(),
            ambient_dimension,
        )
    }

    pub fn from_logs(log_deltas: Vec<f64>, log_diameters: Vec<f64>, ambient_dimension: u32) -> Result<Self> {
        if log_deltas.is_empty() || log_deltas.len() != log_diameters.len() {
            return Err(Error::invalid(format!(
                "cover needs equal, non-empty sequences, got {} densities and {} diameters",
                log_deltas.len(),
                log_diameters.len()
            )));
        }
        if ambient_dimension == 0 {
            return Err(Error::invalid("ambient dimension must be positive"));
        }
        if log_deltas.iter().any(|v| !(*v <= 0.0 && v.is_finite())) {
            return Err(Error::invalid("densities must lie in (0, 1]"));
        }
        if log_diameters.iter().any(|v| !(*v < 0.0 && v.is_finite())) {
            return Err(Error::invalid("diameters must lie in (0, 1)"));
        }
        Ok(CoverSequence {
            log_deltas,
            log_diameters,
            ambient_dimension,
        })
    }

    pub fn levels(&self) -> usize {
        self.log_deltas.len()
    }

    pub fn ambient_dimension(&self) -> u32 {
        self.ambient_dimension
    }

    pub fn delta(&self, level: usize) -> f64 {
        self.log_deltas[level - 1].exp()
    }

    pub fn diameter(&self, level: usize) -> f64 {
        self.log_diameters[level - 1].exp()
    }

    /// `sum_{j <= l+1} |log Delta_j| / |log d_l|` for `l = 1 .. levels-1`.
    pub fn running_ratios(&self) -> Vec<f64> {
        let mut num = 0.0;
        let mut out = Vec::new();
        for l in 1..self.levels() {
            if l == 1 {
                num += -self.log_deltas[0];
            }
            num += -self.log_deltas[l];
            out.push(num / -self.log_diameters[l - 1]);
        }
        out
    }

    /// Increment ratios `|log Delta_{l+1}| / (|log d_l| - |log d_{l-1}|)`
    /// with `d_0 = 1`, for `l = 1 .. levels-1`.
    pub fn increment_ratios(&self) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        let mut prev = 0.0;
        for l in 1..self.levels() {
            let cur = -self.log_diameters[l - 1];
            let step = cur - prev;
            if !(step > 0.0) {
                return Err(Error::invalid(format!(
                    "diameters must decrease strictly; level {l} does not"
                )));
            }
            out.push(-self.log_deltas[l] / step);
            prev = cur;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McMullenBound {
    /// `n - max` ratio over the final third of levels.
    pub value: f64,
    pub max_ratio: f64,
    /// Spread of the ratios over the final third.
    pub spread: f64,
    pub levels_used: usize,
}

/// Lower bound `n - limsup ratio` for the dimension of the limit set.
///
/// The limsup is taken over increment ratios, which bound the running ratio's
/// limsup from above, so the bound never overstates the dimension.
pub fn mcmullen_bound(cover: &CoverSequence) -> Result<McMullenBound> {
    if cover.levels() < 2 {
        return Err(Error::invalid("the nested-cover bound needs at least 2 levels"));
    }
    let ratios = cover.increment_ratios()?;
    let start = (2 * ratios.len()) / 3;
    let tail = &ratios[start..];
    let max = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(McMullenBound {
        value: cover.ambient_dimension as f64 - max,
        max_ratio: max,
        spread: max - min,
        levels_used: tail.len(),
    })
}

/// `Delta_l = B / R^(2/M)` and `d_l = (A / R^(rho/2 + 1/M))^l`.
pub fn paper_cover_sequence(
    rho: f64,
    multiplicity: u32,
    r_big: f64,
    a_const: f64,
    b_const: f64,
    levels: usize,
) -> Result<CoverSequence> {
    if !(rho > 0.0) || multiplicity == 0 || !(r_big > 1.0) || !(a_const > 0.0) || !(b_const > 0.0) || levels == 0 {
        return Err(Error::invalid(
            "cover parameters need rho > 0, M >= 1, R > 1, A > 0, B > 0 and at least one level",
        ));
    }
    let m = multiplicity as f64;
    let ln_r = r_big.ln();
    let log_delta = b_const.ln() - 2.0 / m * ln_r;
    let log_ratio = a_const.ln() - (rho / 2.0 + 1.0 / m) * ln_r;
    if log_ratio >= 0.0 {
        return Err(Error::invalid(format!("R = {r_big:e} is too small: d_1 >= 1")));
    }
    if log_delta > 0.0 {
        return Err(Error::invalid(format!("R = {r_big:e} is too small: Delta > 1")));
    }
    CoverSequence::from_logs(
        vec![log_delta; levels],
        (1..=levels).map(|l| l as f64 * log_ratio).collect(),
        2,
    )
}

/// Polynomial extrapolation of `values` sampled at `x = 1 / ln R` to `x = 0`.
pub fn extrapolate_in_inverse_log(radii: &[f64], values: &[f64]) -> Result<f64> {
    if radii.len() != values.len() || radii.is_empty() {
        return Err(Error::invalid("extrapolation needs matching, non-empty samples"));
    }
    let xs: Vec<f64> = radii.iter().map(|r| 1.0 / r.ln()).collect();
    // Neville's scheme evaluated at 0
    let mut p = values.to_vec();
    let n = p.len();
    for step in 1..n {
        for i in 0..n - step {
            let (xi, xj) = (xs[i], xs[i + step]);
            if xi == xj {
                return Err(Error::invalid("extrapolation radii must be distinct"));
            }
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    }
    Ok(p[0])
}

pub fn write_cover_csv<W: Write>(cover: &CoverSequence, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["level", "log_delta", "log_diameter", "running_ratio"])?;
    let ratios = cover.running_ratios();
    for l in 1..=cover.levels() {
        let ratio = if l < cover.levels() {
            format!("{:.16e}", ratios[l - 1])
        } else {
            String::new()
        };
        w.write_record([
            l.to_string(),
            format!("{:.16e}", cover.log_deltas[l - 1]),
            format!("{:.16e}", cover.log_diameters[l - 1]),
            ratio,
        ])?;
    }
    w.flush().map_err(|e| Error::io("<cover csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile {
    /// Entry `l`: smallest escaping density among the `2^l x 2^l` blocks
    /// that meet the escaping set.
    pub densities: Vec<f64>,
    pub diagnostic: Option<String>,
}

pub fn measure_densities(grid: &GridClassification, refinement: u32) -> Result<DensityProfile> {
    let (nx, ny) = (grid.grid.nx, grid.grid.ny);
    if (1usize << refinement) > nx.min(ny) {
        return Err(Error::invalid(format!(
            "refinement {refinement} is finer than the {nx}x{ny} grid"
        )));
    }
    if grid.count(Classification::Escaping) == 0 {
        return Ok(DensityProfile {
            densities: Vec::new(),
            diagnostic: Some("grid has no escaping cells".into()),
        });
    }
    let mut densities = Vec::new();
    for level in 0..=refinement {
        let side = 1usize << level;
        let mut hits = vec![0usize; side * side];
        let mut totals = vec![0usize; side * side];
        for j in 0..ny {
            let bj = j * side / ny;
            for i in 0..nx {
                let b = bj * side + i * side / nx;
                totals[b] += 1;
                if grid.cells[j * nx + i] == Classification::Escaping {
                    hits[b] += 1;
                }
            }
        }
        let min = hits
            .iter()
            .zip(&totals)
            .filter(|(h, _)| **h > 0)
            .map(|(h, t)| *h as f64 / *t as f64)
            .fold(1.0, f64::min);
        densities.push(min);
    }
    Ok(DensityProfile {
        densities,
        diagnostic: None,
    })
}
