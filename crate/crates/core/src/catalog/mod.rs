//! Evaluation of the meromorphic functions under study.

mod cmath;
pub mod forest;
pub mod rational;
pub mod series;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PlanePoint;

pub use cmath::{compensated_sum, CompensatedSum};
pub use forest::{eval_forest, eval_forest_deriv, DiskForestSpec, ForestDisk};
pub use rational::RationalTest;
pub use series::{
    eval_f, eval_f_deriv, eval_g, eval_g_deriv, series_tail_bound, tail_cutoff, SeriesFunctionSpec,
};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("non-finite input")]
    NonFinite,
    #[error("input lies on a pole")]
    NearPole,
    #[error("|z| = {modulus:e} is beyond the resolvable pole spacing")]
    PrecisionExhausted { modulus: f64 },
}

/// A function value together with a bound on its truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub value: PlanePoint,
    pub truncation_bound: f64,
    pub is_pole: bool,
}

impl EvalResult {
    pub fn finite(value: Complex64, truncation_bound: f64) -> Self {
        EvalResult {
            value: PlanePoint::from_complex(value),
            truncation_bound,
            is_pole: false,
        }
    }

    pub fn pole() -> Self {
        EvalResult {
            value: PlanePoint::INFINITY,
            truncation_bound: 0.0,
            is_pole: true,
        }
    }

    /// Overflowed but not on a pole.
    pub fn overflow() -> Self {
        EvalResult {
            value: PlanePoint::INFINITY,
            truncation_bound: 0.0,
            is_pole: false,
        }
    }
}

/// Which function to iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FunctionSpec {
    /// `f = g^M` built from the pole series.
    Series(SeriesFunctionSpec),
    /// Finite sum of high-order poles inside small disks.
    Forest(DiskForestSpec),
    /// Fixed rational maps with closed-form dynamics.
    Rational(RationalTest),
}

impl FunctionSpec {
    pub fn eval(&self, z: PlanePoint) -> Result<EvalResult, EvalError> {
        match self {
            FunctionSpec::Series(s) => eval_f(z, s),
            FunctionSpec::Forest(s) => eval_forest(z, s),
            FunctionSpec::Rational(r) => r.eval(z),
        }
    }

    pub fn eval_deriv(&self, z: PlanePoint) -> Result<EvalResult, EvalError> {
        match self {
            FunctionSpec::Series(s) => eval_f_deriv(z, s),
            FunctionSpec::Forest(s) => eval_forest_deriv(z, s),
            FunctionSpec::Rational(r) => r.eval_deriv(z),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            FunctionSpec::Series(s) => format!("series rho={} M={}", s.rho(), s.multiplicity()),
            FunctionSpec::Forest(s) => format!("forest disks={}", s.disks().len()),
            FunctionSpec::Rational(r) => format!("rational {r:?}"),
        }
    }
}
