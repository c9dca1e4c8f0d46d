//! Plane and sphere primitives: points with an explicit infinity, disks,
//! annuli, rectangular regions, the chordal metric and Koebe distortion
//! constants.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the Riemann sphere.
///
/// Finite points carry their coordinates; for the point at infinity the
/// coordinates are ignored by every operation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlanePoint {
    pub re: f64,
    pub im: f64,
    pub at_infinity: bool,
}

impl PlanePoint {
    pub const INFINITY: PlanePoint = PlanePoint {
        re: 0.0,
        im: 0.0,
        at_infinity: true,
    };

    pub const ORIGIN: PlanePoint = PlanePoint::finite(0.0, 0.0);

    pub const fn finite(re: f64, im: f64) -> Self {
        PlanePoint {
            re,
            im,
            at_infinity: false,
        }
    }

    pub fn from_polar(modulus: f64, arg: f64) -> Self {
        Self::from_complex(Complex64::from_polar(modulus, arg))
    }

    /// Non-finite components (overflow, NaN from `inf - inf`) collapse to infinity.
    pub fn from_complex(c: Complex64) -> Self {
        if c.re.is_finite() && c.im.is_finite() {
            Self::finite(c.re, c.im)
        } else {
            Self::INFINITY
        }
    }

    pub fn is_finite(&self) -> bool {
        !self.at_infinity
    }

    pub fn to_complex(&self) -> Option<Complex64> {
        (!self.at_infinity).then(|| Complex64::new(self.re, self.im))
    }

    /// `|z|`, or `+inf` for the point at infinity.
    pub fn modulus(&self) -> f64 {
        if self.at_infinity {
            f64::INFINITY
        } else {
            self.re.hypot(self.im)
        }
    }

    pub fn arg(&self) -> f64 {
        self.im.atan2(self.re)
    }

    pub fn to_polar(&self) -> (f64, f64) {
        (self.modulus(), self.arg())
    }

    pub fn conj(&self) -> Self {
        if self.at_infinity {
            *self
        } else {
            Self::finite(self.re, -self.im)
        }
    }

    /// Euclidean distance; infinite if either point is at infinity.
    pub fn distance(&self, other: &PlanePoint) -> f64 {
        match (self.to_complex(), other.to_complex()) {
            (Some(a), Some(b)) => (a - b).norm(),
            _ => f64::INFINITY,
        }
    }
}

impl PartialEq for PlanePoint {
    fn eq(&self, other: &Self) -> bool {
        match (self.at_infinity, other.at_infinity) {
            (true, true) => true,
            (false, false) => self.re == other.re && self.im == other.im,
            _ => false,
        }
    }
}

impl From<Complex64> for PlanePoint {
    fn from(c: Complex64) -> Self {
        Self::from_complex(c)
    }
}

impl fmt::Display for PlanePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.at_infinity {
            write!(f, "inf")
        } else if self.im < 0.0 {
            write!(f, "{}-{}i", self.re, -self.im)
        } else {
            write!(f, "{}+{}i", self.re, self.im)
        }
    }
}

/// Open disk `D(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    center: Complex64,
    radius: f64,
}

impl Disk {
    pub fn new(center: PlanePoint, radius: f64) -> Result<Self> {
        let center = center
            .to_complex()
            .ok_or_else(|| Error::invalid("disk center must be finite"))?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("disk radius must be positive, got {radius}")));
        }
        Ok(Disk { center, radius })
    }

    pub fn center(&self) -> Complex64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }

    /// Distance from `z` to the disk (zero inside).
    pub fn distance_from(&self, z: Complex64) -> f64 {
        ((z - self.center).norm() - self.radius).max(0.0)
    }

    /// Whether the closed disks intersect.
    pub fn closures_meet(&self, other: &Disk) -> bool {
        (self.center - other.center).norm() <= self.radius + other.radius
    }
}

/// Round annulus `{inner <= |z| < outer}` centred at the origin. An infinite
/// outer radius gives the exterior region `{|z| > R}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub inner_radius: f64,
    pub outer_radius: f64,
}

impl Annulus {
    pub fn new(inner_radius: f64, outer_radius: f64) -> Result<Self> {
        if !(inner_radius > 0.0 && inner_radius < outer_radius) {
            return Err(Error::invalid(format!(
                "annulus needs 0 < inner < outer, got {inner_radius}, {outer_radius}"
            )));
        }
        Ok(Annulus {
            inner_radius,
            outer_radius,
        })
    }

    /// `{2^n <= |z| < 2^(n+1)}`.
    pub fn dyadic(n: u32) -> Self {
        let inner = 2f64.powi(n as i32);
        Annulus {
            inner_radius: inner,
            outer_radius: 2.0 * inner,
        }
    }

    /// `{|z| > radius}`.
    pub fn exterior(radius: f64) -> Result<Self> {
        Self::new(radius, f64::INFINITY)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let r = z.norm();
        r >= self.inner_radius && r < self.outer_radius
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * (self.outer_radius.powi(2) - self.inner_radius.powi(2))
    }

    /// Whether the open disk meets the annulus.
    pub fn meets_disk(&self, disk: &Disk) -> bool {
        let c = disk.center().norm();
        c + disk.radius() > self.inner_radius && c - disk.radius() < self.outer_radius
    }
}

/// Axis-aligned rectangle `[corner.re, corner.re + width] x [corner.im, corner.im + height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub corner_re: f64,
    pub corner_im: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn new(corner_re: f64, corner_im: f64, width: f64, height: f64) -> Result<Self> {
        let ok = [corner_re, corner_im, width, height].iter().all(|v| v.is_finite())
            && width > 0.0
            && height > 0.0;
        if !ok {
            return Err(Error::invalid(format!(
                "rectangle needs finite corner and positive extent, got ({corner_re}, {corner_im}) {width}x{height}"
            )));
        }
        Ok(Rect {
            corner_re,
            corner_im,
            width,
            height,
        })
    }

    /// Square `[-half, half]^2`.
    pub fn centered_square(half: f64) -> Result<Self> {
        Self::new(-half, -half, 2.0 * half, 2.0 * half)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.corner_re
            && z.re <= self.corner_re + self.width
            && z.im >= self.corner_im
            && z.im <= self.corner_im + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Centre of cell `(i, j)` of an `nx` by `ny` subdivision; `j` counts upward.
    pub fn cell_center(&self, i: usize, j: usize, nx: usize, ny: usize) -> Complex64 {
        Complex64::new(
            self.corner_re + (i as f64 + 0.5) * self.width / nx as f64,
            self.corner_im + (j as f64 + 0.5) * self.height / ny as f64,
        )
    }
}

/// Chordal distance on the Riemann sphere (diameter 2).
pub fn spherical_distance(z1: PlanePoint, z2: PlanePoint) -> f64 {
    match (z1.to_complex(), z2.to_complex()) {
        (None, None) => 0.0,
        (Some(z), None) | (None, Some(z)) => 2.0 / (1.0 + z.norm_sqr()).sqrt(),
        (Some(a), Some(b)) => {
            let num = 2.0 * (a - b).norm();
            let den = (1.0 + a.norm_sqr()).sqrt() * (1.0 + b.norm_sqr()).sqrt();
            (num / den).min(2.0)
        }
    }
}

/// Factor turning a Euclidean diameter of a set inside `D(a, |a|/2)` into an
/// upper bound for its spherical diameter: `8 / |a|^(1 + 1/M)`.
pub fn spherical_diameter_factor(a_modulus: f64, multiplicity: u32) -> Result<f64> {
    if !(a_modulus >= 1.0) || !a_modulus.is_finite() {
        return Err(Error::invalid(format!("pole modulus must be >= 1, got {a_modulus}")));
    }
    if multiplicity == 0 {
        return Err(Error::invalid("multiplicity must be positive"));
    }
    Ok(8.0 / a_modulus.powf(1.0 + 1.0 / multiplicity as f64))
}

/// Koebe distortion constants for a univalent map on `D(a, r)` evaluated in
/// `D(a, lambda r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KoebeConstants {
    pub lambda: f64,
    /// `lambda / (1 + lambda)^2`
    pub offset_lower: f64,
    /// `lambda / (1 - lambda)^2`
    pub offset_upper: f64,
    /// `(1 - lambda) / (1 + lambda)^3`
    pub deriv_lower: f64,
    /// `(1 + lambda) / (1 - lambda)^3`
    pub deriv_upper: f64,
}

impl KoebeConstants {
    /// Bound on `|g'(u) / g'(v)|` over the smaller disk.
    pub fn distortion_ratio(&self) -> f64 {
        self.deriv_upper / self.deriv_lower
    }
}

pub fn koebe_constants(lambda: f64) -> Result<KoebeConstants> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::invalid(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    let p = 1.0 + lambda;
    let m = 1.0 - lambda;
    Ok(KoebeConstants {
        lambda,
        offset_lower: lambda / (p * p),
        offset_upper: lambda / (m * m),
        deriv_lower: m / (p * p * p),
        deriv_upper: p / (m * m * m),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(re: f64, im: f64) -> PlanePoint {
        PlanePoint::finite(re, im)
    }

    #[test]
    fn chordal_distance_examples() {
        assert_eq!(spherical_distance(p(0.0, 0.0), p(0.0, 0.0)), 0.0);
        assert!((spherical_distance(p(0.0, 0.0), p(1.0, 0.0)) - 2f64.sqrt()).abs() < 1e-15);
        // mpmath: 2 / sqrt(170)
        assert!((spherical_distance(p(3.0, 0.0), p(4.0, 0.0)) - 0.153_392_997_769_474_09).abs() < 1e-15);
    }

    #[test]
    fn chordal_distance_to_infinity() {
        assert_eq!(spherical_distance(PlanePoint::INFINITY, PlanePoint::INFINITY), 0.0);
        assert_eq!(spherical_distance(PlanePoint::ORIGIN, PlanePoint::INFINITY), 2.0);
        let mut last = 2.0;
        for r in [0.5, 1.0, 3.0, 10.0, 1e3] {
            let d = spherical_distance(p(r, 0.0), PlanePoint::INFINITY);
            assert!((d - 2.0 / (1.0 + r * r).sqrt()).abs() < 1e-15);
            assert!(d < last);
            last = d;
        }
    }

    #[test]
    fn infinity_ignores_coordinates() {
        let weird = PlanePoint {
            re: 5.0,
            im: -1.0,
            at_infinity: true,
        };
        assert_eq!(weird, PlanePoint::INFINITY);
        assert_eq!(spherical_distance(weird, p(1.0, 1.0)), spherical_distance(PlanePoint::INFINITY, p(1.0, 1.0)));
        assert_eq!(PlanePoint::from_complex(Complex64::new(f64::NAN, 0.0)), PlanePoint::INFINITY);
    }

    #[test]
    fn diameter_factor_examples() {
        assert_eq!(spherical_diameter_factor(1.0, 1).unwrap(), 8.0);
        assert!((spherical_diameter_factor(4.0, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((spherical_diameter_factor(100.0, 1).unwrap() - 8e-4).abs() < 1e-18);
        assert!(spherical_diameter_factor(0.5, 1).is_err());
    }

    #[test]
    fn koebe_examples() {
        let k = koebe_constants(0.5).unwrap();
        assert!((k.deriv_upper - 12.0).abs() < 1e-12);
        let k = koebe_constants(0.75).unwrap();
        assert!((1.0 / k.distortion_ratio() - (1.0f64 / 7.0).powi(4)).abs() < 1e-15);
        let k = koebe_constants(1e-9).unwrap();
        assert!((k.deriv_lower - 1.0).abs() < 1e-8 && (k.deriv_upper - 1.0).abs() < 1e-8);
        assert!((k.offset_lower - 1e-9).abs() < 1e-17 && (k.offset_upper - 1e-9).abs() < 1e-17);
        assert!(koebe_constants(0.0).is_err());
        assert!(koebe_constants(1.0).is_err());
    }

    #[test]
    fn koebe_monotone_in_lambda() {
        let mut prev = koebe_constants(0.01).unwrap();
        for i in 2..99 {
            let k = koebe_constants(i as f64 / 100.0).unwrap();
            assert!(k.offset_upper > prev.offset_upper);
            assert!(k.deriv_upper > prev.deriv_upper);
            assert!(k.deriv_lower < prev.deriv_lower);
            assert!(k.deriv_lower <= 1.0 && k.deriv_upper >= 1.0);
            assert!(k.offset_lower <= k.offset_upper);
            prev = k;
        }
    }

    #[test]
    fn region_types() {
        let d = Disk::new(p(3.0, 0.0), 0.5).unwrap();
        assert!(d.contains(d.center()));
        assert!(Disk::new(p(0.0, 0.0), 0.0).is_err());
        assert!(Disk::new(PlanePoint::INFINITY, 1.0).is_err());
        let a = Annulus::dyadic(2);
        assert_eq!((a.inner_radius, a.outer_radius), (4.0, 8.0));
        assert!(a.contains(Complex64::new(4.0, 0.0)) && !a.contains(Complex64::new(8.0, 0.0)));
        assert!(Annulus::new(2.0, 1.0).is_err());
        let ext = Annulus::exterior(5.0).unwrap();
        assert!(ext.contains(Complex64::new(1e9, 0.0)));
        let r = Rect::centered_square(5.0).unwrap();
        assert_eq!(r.cell_center(0, 0, 10, 10), Complex64::new(-4.5, -4.5));
    }

    fn finite_point() -> impl Strategy<Value = PlanePoint> {
        (-1e3f64..1e3, -1e3f64..1e3).prop_map(|(a, b)| p(a, b))
    }

    proptest! {
        #[test]
        fn chordal_metric_axioms(a in finite_point(), b in finite_point(), c in finite_point()) {
            let ab = spherical_distance(a, b);
            prop_assert_eq!(ab, spherical_distance(b, a));
            prop_assert!(ab <= 2.0);
            prop_assert!(ab <= spherical_distance(a, c) + spherical_distance(c, b) + 1e-12);
            prop_assert!(spherical_distance(a, PlanePoint::INFINITY) <= spherical_distance(a, c) + spherical_distance(c, PlanePoint::INFINITY) + 1e-12);
        }

        #[test]
        fn polar_round_trip(a in finite_point()) {
            prop_assume!(a.modulus() > 1e-300);
            let (r, t) = a.to_polar();
            let back = PlanePoint::from_polar(r, t);
            let err = a.distance(&back) / a.modulus();
            prop_assert!(err < 1e-12);
        }
    }
}
