//! `f(z) = sum_k eps_k (r_k / (z - a_k))^(m_k)` over a finite list of disks.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cmath::{from_log_polar, CompensatedSum};
use super::{EvalError, EvalResult};
use crate::error::{Error, Result};
use crate::geometry::{Disk, PlanePoint};
use crate::tolerances::TOL;

/// Log-moduli above this are reported as overflow to infinity.
const LOG_OVERFLOW: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestDisk {
    pub center: PlanePoint,
    pub radius: f64,
    /// Radius of the inner disk on which `|f| > 2`.
    pub inner_radius: f64,
    /// `min_{j != k} dist(a_k, D(a_j, r_j))`; infinite for a lone disk.
    pub separation: f64,
    pub eps: f64,
    pub multiplicity: u32,
}

impl ForestDisk {
    pub fn center_complex(&self) -> Complex64 {
        Complex64::new(self.center.re, self.center.im)
    }

    pub fn disk(&self) -> Disk {
        Disk::new(self.center, self.radius).expect("validated forest disk")
    }

    pub fn inner_disk(&self) -> Disk {
        Disk::new(self.center, self.inner_radius).expect("validated forest disk")
    }
}

/// The disk list. Only field-level sanity is enforced here; the inequalities
/// that make the construction work are checked by the forest validator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DiskForestSpec {
    disks: Vec<ForestDisk>,
}

impl DiskForestSpec {
    pub fn new(disks: Vec<ForestDisk>) -> Result<Self> {
        for (i, d) in disks.iter().enumerate() {
            let ok = d.center.is_finite()
                && d.center.re.is_finite()
                && d.center.im.is_finite()
                && d.radius > 0.0
                && d.radius.is_finite()
                && d.inner_radius > 0.0
                && d.eps > 0.0
                && d.eps.is_finite()
                && d.multiplicity >= 1
                && !d.separation.is_nan();
            if !ok {
                return Err(Error::invalid(format!("forest disk {} has a non-positive or non-finite field", i + 1)));
            }
        }
        Ok(DiskForestSpec { disks })
    }

    pub fn disks(&self) -> &[ForestDisk] {
        &self.disks
    }

    pub fn eps_sum(&self) -> f64 {
        super::compensated_sum(self.disks.iter().map(|d| d.eps))
    }

    /// Index of the disk `D(a_k, r_k)` containing `z`, if any.
    pub fn containing_disk(&self, z: Complex64) -> Option<usize> {
        self.disks
            .iter()
            .position(|d| (z - d.center_complex()).norm() < d.radius)
    }
}

fn input(z: PlanePoint) -> std::result::Result<Complex64, EvalError> {
    match z.to_complex() {
        Some(c) if c.re.is_finite() && c.im.is_finite() => Ok(c),
        _ => Err(EvalError::NonFinite),
    }
}

fn on_pole(zeta: Complex64, center: Complex64) -> bool {
    zeta.norm() < TOL.pole_rel * center.norm().max(1.0)
}

/// The forest function; exact up to rounding, so the bound is zero.
pub fn eval_forest(z: PlanePoint, spec: &DiskForestSpec) -> std::result::Result<EvalResult, EvalError> {
    let z = input(z)?;
    let mut acc = CompensatedSum::new();
    for d in &spec.disks {
        let zeta = z - d.center_complex();
        if on_pole(zeta, d.center_complex()) {
            return Ok(EvalResult::pole());
        }
        let m = d.multiplicity as f64;
        let log_mod = d.eps.ln() + m * (d.radius.ln() - zeta.norm().ln());
        if log_mod > LOG_OVERFLOW {
            return Ok(EvalResult::overflow());
        }
        acc.add(from_log_polar(log_mod, -m * zeta.arg()));
    }
    Ok(EvalResult::finite(acc.value(), 0.0))
}

/// `f'(z) = -sum_k eps_k m_k / (z - a_k) * (r_k / (z - a_k))^(m_k)`.
pub fn eval_forest_deriv(z: PlanePoint, spec: &DiskForestSpec) -> std::result::Result<EvalResult, EvalError> {
    let z = input(z)?;
    let mut acc = CompensatedSum::new();
    for d in &spec.disks {
        let zeta = z - d.center_complex();
        if on_pole(zeta, d.center_complex()) {
            return Err(EvalError::NearPole);
        }
        let m = d.multiplicity as f64;
        let log_mod = d.eps.ln() + m.ln() + m * d.radius.ln() - (m + 1.0) * zeta.norm().ln();
        if log_mod > LOG_OVERFLOW {
            return Ok(EvalResult::overflow());
        }
        acc.add(-from_log_polar(log_mod, -(m + 1.0) * zeta.arg()));
    }
    Ok(EvalResult::finite(acc.value(), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_disk(m: u32) -> DiskForestSpec {
        DiskForestSpec::new(vec![ForestDisk {
            center: PlanePoint::finite(4.0, 0.0),
            radius: 0.5,
            inner_radius: 0.25,
            separation: f64::INFINITY,
            eps: 0.125,
            multiplicity: m,
        }])
        .unwrap()
    }

    #[test]
    fn matches_direct_power() {
        let spec = one_disk(9);
        let z = Complex64::new(4.3, 0.2);
        let direct = 0.125 * (0.5 / (z - 4.0)).powu(9);
        let got = eval_forest(PlanePoint::from_complex(z), &spec).unwrap().value.to_complex().unwrap();
        assert!((got - direct).norm() < 1e-14 * direct.norm());
        let dd = -0.125 * 9.0 / (z - 4.0) * (0.5 / (z - 4.0)).powu(9);
        let gd = eval_forest_deriv(PlanePoint::from_complex(z), &spec)
            .unwrap()
            .value
            .to_complex()
            .unwrap();
        assert!((gd - dd).norm() < 1e-13 * dd.norm());
    }

    #[test]
    fn centre_is_pole_and_origin_small() {
        let spec = one_disk(9);
        assert!(eval_forest(PlanePoint::finite(4.0, 0.0), &spec).unwrap().is_pole);
        assert!(eval_forest(PlanePoint::ORIGIN, &spec).unwrap().value.modulus() < 0.5);
        let close = eval_forest(PlanePoint::finite(4.0 + 1e-10, 0.0), &one_disk(100)).unwrap();
        assert!(close.value.at_infinity && !close.is_pole);
    }

    #[test]
    fn rejects_bad_fields() {
        let mut d = one_disk(1).disks()[0];
        d.eps = 0.0;
        assert!(DiskForestSpec::new(vec![d]).is_err());
        assert!(DiskForestSpec::new(vec![]).unwrap().disks().is_empty());
    }
}
