//! Small complex helpers that `num-complex` does not provide.

use num_complex::Complex64;

/// `ln(1 + d)` accurate for small `|d|`.
pub fn log1p(d: Complex64) -> Complex64 {
    let re = 0.5 * (2.0 * d.re + d.norm_sqr()).ln_1p();
    let im = d.im.atan2(1.0 + d.re);
    Complex64::new(re, im)
}

/// `exp(s) - 1` accurate for small `|s|`.
pub fn expm1(s: Complex64) -> Complex64 {
    let (sin_b, cos_b) = s.im.sin_cos();
    let half_sin = (0.5 * s.im).sin();
    let re = s.re.exp_m1() * cos_b - 2.0 * half_sin * half_sin;
    let im = s.re.exp() * sin_b;
    Complex64::new(re, im)
}

/// `exp(log_modulus) * exp(i phase)`, flushing to zero on underflow.
#[inline]
pub fn from_log_polar(log_modulus: f64, phase: f64) -> Complex64 {
    if log_modulus < -745.0 {
        return Complex64::new(0.0, 0.0);
    }
    let m = log_modulus.exp();
    let (s, c) = phase.sin_cos();
    Complex64::new(m * c, m * s)
}

/// Neumaier-compensated running sum of complex terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: f64,
    im: f64,
    re_err: f64,
    im_err: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, &mut self.re_err, z.re);
        neumaier(&mut self.im, &mut self.im_err, z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.re_err, self.im + self.im_err)
    }
}

#[inline]
fn neumaier(sum: &mut f64, err: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *err += (*sum - t) + x;
    } else {
        *err += (x - t) + *sum;
    }
    *sum = t;
}

/// Neumaier-compensated sum of real values, in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut err = 0.0;
    for v in values {
        neumaier(&mut sum, &mut err, v);
    }
    sum + err
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log1p_and_expm1_small_arguments() {
        let d = Complex64::new(1e-14, -3e-15);
        let l = log1p(d);
        assert!((l - d).norm() < 1e-27);
        let e = expm1(d);
        assert!((e - d).norm() < 1e-27);
        let big = Complex64::new(0.7, -1.3);
        assert!((log1p(big) - (Complex64::new(1.0, 0.0) + big).ln()).norm() < 1e-15);
        assert!((expm1(big) - (big.exp() - 1.0)).norm() < 1e-15);
    }

    #[test]
    fn compensation_recovers_cancelled_terms() {
        let mut s = CompensatedSum::new();
        for z in [1e16, 1.0, -1e16, 1.0] {
            s.add(Complex64::new(z, -z));
        }
        assert_eq!(s.value(), Complex64::new(2.0, -2.0));
        assert_eq!(compensated_sum([1e16, 1.0, -1e16]), 1.0);
    }
}
