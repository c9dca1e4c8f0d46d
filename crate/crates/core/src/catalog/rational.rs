//! Rational maps whose escaping sets are known in closed form.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{EvalError, EvalResult};
use crate::geometry::PlanePoint;
use crate::tolerances::TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RationalTest {
    /// `z^2`: `|f^n(z)| = |z|^(2^n)`.
    Square,
    /// `1/z`: pole at the origin, orbits alternate between `|z|` and `1/|z|`.
    Reciprocal,
}

impl RationalTest {
    pub fn eval(&self, z: PlanePoint) -> Result<EvalResult, EvalError> {
        let z = finite(z)?;
        match self {
            RationalTest::Square => Ok(EvalResult::finite(z * z, 0.0)),
            RationalTest::Reciprocal => {
                if z.norm() < TOL.pole_rel {
                    Ok(EvalResult::pole())
                } else {
                    Ok(EvalResult::finite(z.inv(), 0.0))
                }
            }
        }
    }

    pub fn eval_deriv(&self, z: PlanePoint) -> Result<EvalResult, EvalError> {
        let z = finite(z)?;
        match self {
            RationalTest::Square => Ok(EvalResult::finite(2.0 * z, 0.0)),
            RationalTest::Reciprocal => {
                if z.norm() < TOL.pole_rel {
                    Err(EvalError::NearPole)
                } else {
                    Ok(EvalResult::finite(-(z * z).inv(), 0.0))
                }
            }
        }
    }
}

fn finite(z: PlanePoint) -> Result<Complex64, EvalError> {
    z.to_complex()
        .filter(|c| c.re.is_finite() && c.im.is_finite())
        .ok_or(EvalError::NonFinite)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values() {
        let z = PlanePoint::finite(0.0, 2.0);
        assert_eq!(RationalTest::Square.eval(z).unwrap().value, PlanePoint::finite(-4.0, 0.0));
        assert_eq!(RationalTest::Reciprocal.eval(z).unwrap().value, PlanePoint::finite(0.0, -0.5));
        assert!(RationalTest::Reciprocal.eval(PlanePoint::ORIGIN).unwrap().is_pole);
        assert!(RationalTest::Reciprocal.eval_deriv(PlanePoint::ORIGIN).is_err());
    }
}
