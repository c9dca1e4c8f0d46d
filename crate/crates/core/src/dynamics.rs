//! Orbits and escape classification at a threshold `R` over a finite horizon.
//!
//! A point is reported `Escaping` when every iterate from step 1 through the
//! horizon has modulus at least `R`. This is the finite-horizon stand-in for
//! `liminf |f^n(z)| >= R` and is always reported together with the horizon.

use std::io::Write;
use std::path::Path;

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::FunctionSpec;
use crate::error::{Error, Result};
use crate::geometry::{PlanePoint, Rect};
use crate::tolerances::TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Classification {
    Escaping,
    Returned,
    PoleHit,
    Undetermined,
}

impl Classification {
    pub const ALL: [Classification; 4] = [
        Classification::Escaping,
        Classification::Returned,
        Classification::PoleHit,
        Classification::Undetermined,
    ];

    /// CSV code: 0 escaping, 1 returned, 2 pole hit, 3 undetermined.
    pub fn code(self) -> u8 {
        match self {
            Classification::Escaping => 0,
            Classification::Returned => 1,
            Classification::PoleHit => 2,
            Classification::Undetermined => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Classification::Escaping => "escaping",
            Classification::Returned => "returned",
            Classification::PoleHit => "pole_hit",
            Classification::Undetermined => "undetermined",
        }
    }

    /// Fixed palette: white, black, red, grey.
    pub fn color(self) -> [u8; 3] {
        match self {
            Classification::Escaping => [0xFF, 0xFF, 0xFF],
            Classification::Returned => [0x00, 0x00, 0x00],
            Classification::PoleHit => [0xFF, 0x00, 0x00],
            Classification::Undetermined => [0x80, 0x80, 0x80],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitRecord {
    pub start: PlanePoint,
    /// `|f^n(z)|` for `n = 1 ..= steps_taken`; infinite once a pole is hit.
    pub moduli: Vec<f64>,
    pub classification: Classification,
    pub steps_taken: u32,
    pub escape_threshold: f64,
    pub horizon: u32,
    pub diagnostic: Option<String>,
}

fn check_orbit_args(threshold: f64, horizon: u32) -> Result<()> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if !(threshold > 1.0 && threshold.is_finite()) {
        return Err(Error::invalid(format!("escape threshold R must exceed 1, got {threshold}")));
    }
    Ok(())
}

pub fn iterate_orbit(f: &FunctionSpec, z0: PlanePoint, threshold: f64, horizon: u32) -> Result<OrbitRecord> {
    check_orbit_args(threshold, horizon)?;
    if !z0.is_finite() {
        return Err(Error::invalid("orbit must start at a finite point"));
    }
    Ok(run_orbit(f, z0, threshold, horizon, true))
}

fn run_orbit(f: &FunctionSpec, z0: PlanePoint, threshold: f64, horizon: u32, keep: bool) -> OrbitRecord {
    let mut moduli = Vec::new();
    let mut z = z0;
    let mut classification = Classification::Escaping;
    let mut steps = horizon;
    let mut diagnostic = None;
    for n in 1..=horizon {
        match f.eval(z) {
            Err(e) => {
                classification = Classification::Undetermined;
                diagnostic = Some(format!("step {n}: {e}"));
                steps = n - 1;
                break;
            }
            Ok(r) => {
                let m = r.value.modulus();
                if r.is_pole || r.value.at_infinity || m > TOL.overflow_modulus {
                    if keep {
                        moduli.push(f64::INFINITY);
                    }
                    classification = Classification::PoleHit;
                    steps = n;
                    break;
                }
                if keep {
                    moduli.push(m);
                }
                if m < threshold {
                    classification = Classification::Returned;
                    steps = n;
                    break;
                }
                z = r.value;
            }
        }
    }
    OrbitRecord {
        start: z0,
        moduli,
        classification,
        steps_taken: steps,
        escape_threshold: threshold,
        horizon,
        diagnostic,
    }
}

/// A rectangle sampled at cell centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub region: Rect,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(region: Rect, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::invalid(format!("grid resolution must be at least 2x2, got {nx}x{ny}")));
        }
        Ok(GridSpec { region, nx, ny })
    }

    /// Centre of cell `index = j * nx + i`.
    pub fn center(&self, index: usize) -> PlanePoint {
        let (i, j) = (index % self.nx, index / self.nx);
        PlanePoint::from_complex(self.region.cell_center(i, j, self.nx, self.ny))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridClassification {
    pub grid: GridSpec,
    pub threshold: f64,
    pub horizon: u32,
    /// Row-major from the bottom row: cell `(i, j)` is at `j * nx + i`.
    pub cells: Vec<Classification>,
    pub steps: Vec<u32>,
}

impl GridClassification {
    pub fn count(&self, class: Classification) -> usize {
        self.cells.iter().filter(|&&c| c == class).count()
    }
}

pub fn classify_grid(f: &FunctionSpec, grid: GridSpec, threshold: f64, horizon: u32) -> Result<GridClassification> {
    check_orbit_args(threshold, horizon)?;
    let n = grid.nx * grid.ny;
    let results: Vec<(Classification, u32)> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let rec = run_orbit(f, grid.center(idx), threshold, horizon, false);
            (rec.classification, rec.steps_taken)
        })
        .collect();
    let (cells, steps) = results.into_iter().unzip();
    Ok(GridClassification {
        grid,
        threshold,
        horizon,
        cells,
        steps,
    })
}

pub fn escaping_points(grid: &GridClassification) -> Vec<PlanePoint> {
    grid.cells
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == Classification::Escaping)
        .map(|(idx, _)| grid.grid.center(idx))
        .collect()
}

/// CSV with columns `index,re,im,class,steps`.
pub fn write_grid_csv<W: Write>(grid: &GridClassification, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "re", "im", "class", "steps"])?;
    for (idx, (c, s)) in grid.cells.iter().zip(&grid.steps).enumerate() {
        let p = grid.grid.center(idx);
        w.write_record([
            idx.to_string(),
            format!("{:.16e}", p.re),
            format!("{:.16e}", p.im),
            c.code().to_string(),
            s.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<grid csv>", e))?;
    Ok(())
}

/// One pixel per cell, top row = largest imaginary part.
pub fn grid_image(grid: &GridClassification) -> RgbImage {
    let (nx, ny) = (grid.grid.nx, grid.grid.ny);
    RgbImage::from_fn(nx as u32, ny as u32, |x, y| {
        let j = ny - 1 - y as usize;
        Rgb(grid.cells[j * nx + x as usize].color())
    })
}

pub fn save_grid_png(grid: &GridClassification, path: &Path) -> Result<()> {
    grid_image(grid).save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::RationalTest;

    fn square() -> FunctionSpec {
        FunctionSpec::Rational(RationalTest::Square)
    }

    #[test]
    fn square_orbits_follow_closed_form() {
        let rec = iterate_orbit(&square(), PlanePoint::finite(1.5, 0.0), 2.0, 5).unwrap();
        assert_eq!(rec.classification, Classification::Escaping);
        for (n, m) in rec.moduli.iter().enumerate() {
            let exact = 1.5f64.powi(1 << (n + 1));
            assert!((m - exact).abs() <= 1e-15 * exact);
        }
        let rec = iterate_orbit(&square(), PlanePoint::finite(1.2, 0.0), 2.0, 5).unwrap();
        assert_eq!(rec.classification, Classification::Returned);
        assert_eq!(rec.steps_taken, 1);
        let rec = iterate_orbit(&square(), PlanePoint::finite(1e200, 0.0), 2.0, 5).unwrap();
        assert_eq!(rec.classification, Classification::PoleHit);
    }

    #[test]
    fn reciprocal_pole_hit() {
        let f = FunctionSpec::Rational(RationalTest::Reciprocal);
        let rec = iterate_orbit(&f, PlanePoint::ORIGIN, 2.0, 5).unwrap();
        assert_eq!(rec.classification, Classification::PoleHit);
        assert_eq!(rec.steps_taken, 1);
    }

    #[test]
    fn argument_checks() {
        assert!(iterate_orbit(&square(), PlanePoint::ORIGIN, 2.0, 0).is_err());
        assert!(iterate_orbit(&square(), PlanePoint::ORIGIN, 1.0, 3).is_err());
        let region = Rect::centered_square(1.0).unwrap();
        assert!(GridSpec::new(region, 1, 5).is_err());
        let g = GridSpec::new(region, 2, 2).unwrap();
        assert!(classify_grid(&square(), g, 2.0, 0).is_err());
    }

    #[test]
    fn codes_round_trip() {
        for c in Classification::ALL {
            assert_eq!(Classification::from_code(c.code()), Some(c));
        }
        assert_eq!(Classification::from_code(4), None);
    }

    #[test]
    fn image_orientation() {
        let region = Rect::new(0.0, 0.0, 4.0, 4.0).unwrap();
        let grid = GridSpec::new(region, 2, 2).unwrap();
        // bottom-left centre 1+i maps to 2i and returns; top-right 3+3i escapes
        let g = classify_grid(&square(), grid, 3.0, 3).unwrap();
        let img = grid_image(&g);
        assert_eq!(g.cells[0], Classification::Returned);
        assert_eq!(img.get_pixel(0, 1).0, Classification::Returned.color());
        assert_eq!(g.cells[3], Classification::Escaping);
        assert_eq!(img.get_pixel(1, 0).0, Classification::Escaping.color());
    }
}
