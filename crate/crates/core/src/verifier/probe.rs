//! Seeded Monte-Carlo checks of the disk-forest function.
//!
//! Work is split into fixed chunks of [`CHUNK`] samples. Chunk `c` draws from
//! ChaCha8 stream `c` of the run seed, so results do not depend on the number
//! of worker threads.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::forest::{uncovered_area, validate_forest_params};
use crate::catalog::{eval_forest, eval_forest_deriv, DiskForestSpec, ForestDisk};
use crate::error::{Error, Result};
use crate::geometry::{Annulus, PlanePoint};

pub const CHUNK: usize = 1024;
pub const MIN_PROBE_SAMPLES: usize = 1000;

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunks(samples: usize) -> impl IndexedParallelIterator<Item = (usize, usize)> {
    let n = samples.div_ceil(CHUNK);
    (0..n).into_par_iter().map(move |c| (c, CHUNK.min(samples - c * CHUNK)))
}

fn uniform_in_disk(rng: &mut ChaCha8Rng, center: Complex64, radius: f64) -> Complex64 {
    let r = radius * rng.random::<f64>().sqrt();
    let t = TAU * rng.random::<f64>();
    center + Complex64::from_polar(r, t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaProbeResult {
    pub annulus: u32,
    pub samples: usize,
    pub persisting: usize,
    /// `persisting / samples`.
    pub fraction_persisting: f64,
    pub horizon: u32,
    pub rng_seed: u64,
    /// Samples whose first `k` images all lie in a disk, `k = 1 ..= horizon`.
    pub survivors_by_step: Vec<usize>,
    /// Binomial standard error of the fraction.
    pub standard_error: f64,
}

/// `area(D(a, r') ∩ P_n)` for each disk.
fn inner_disk_weights(disks: &[ForestDisk], n: u32) -> Vec<f64> {
    let area = Annulus::dyadic(n).area();
    disks
        .iter()
        .map(|d| (area - uncovered_area(std::slice::from_ref(d), n, |d| d.inner_radius)).max(0.0))
        .collect()
}

/// Uniform point of `P_n ∩ ∪ D(a_j, r_j')`.
fn draw_start(rng: &mut ChaCha8Rng, spec: &DiskForestSpec, p: &Annulus, cumulative: &[f64]) -> Complex64 {
    let total = *cumulative.last().expect("nonempty weights");
    loop {
        let u = rng.random::<f64>() * total;
        let k = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
        let d = &spec.disks()[k];
        // the r'-disks are disjoint, so picking a disk by its area share and
        // rejecting outside P_n is uniform on the union
        let z = uniform_in_disk(rng, d.center_complex(), d.inner_radius);
        if p.contains(z) {
            return z;
        }
    }
}

fn persistence(spec: &DiskForestSpec, z0: Complex64, horizon: u32) -> u32 {
    let mut z = PlanePoint::from_complex(z0);
    for k in 1..=horizon {
        let w = match eval_forest(z, spec) {
            Ok(r) if !r.is_pole && r.value.is_finite() => r.value,
            _ => return k - 1,
        };
        match w.to_complex() {
            Some(c) if spec.containing_disk(c).is_some() => z = w,
            _ => return k - 1,
        }
    }
    horizon
}

/// Fraction of uniform starts in `P_n ∩ ∪ D(a_j, r_j')` whose first `horizon`
/// images all lie in `∪ D(a_j, r_j)`.
pub fn area_probe(spec: &DiskForestSpec, n: u32, samples: usize, horizon: u32, seed: u64) -> Result<AreaProbeResult> {
    validate_forest_params(spec).into_result()?;
    if samples < MIN_PROBE_SAMPLES {
        return Err(Error::invalid(format!("area probe needs at least {MIN_PROBE_SAMPLES} samples, got {samples}")));
    }
    if n == 0 {
        return Err(Error::invalid("annulus index must be at least 1"));
    }
    let p = Annulus::dyadic(n);
    let weights = inner_disk_weights(spec.disks(), n);
    let cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    if cumulative.last().copied().unwrap_or(0.0) <= 0.0 {
        return Err(Error::invalid(format!("no inner disk meets annulus P_{n}")));
    }
    let depths: Vec<u32> = chunks(samples)
        .flat_map_iter(|(c, len)| {
            let mut rng = chunk_rng(seed, c);
            (0..len)
                .map(|_| {
                    let z = draw_start(&mut rng, spec, &p, &cumulative);
                    persistence(spec, z, horizon)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let survivors_by_step: Vec<usize> = (1..=horizon)
        .map(|k| depths.iter().filter(|&&d| d >= k).count())
        .collect();
    let persisting = depths.iter().filter(|&&d| d >= horizon).count();
    let fraction = persisting as f64 / samples as f64;
    Ok(AreaProbeResult {
        annulus: n,
        samples,
        persisting,
        fraction_persisting: fraction,
        horizon,
        rng_seed: seed,
        survivors_by_step,
        standard_error: (fraction * (1.0 - fraction) / samples as f64).sqrt(),
    })
}

/// CSV with columns `annulus,samples,horizon,step,survivors,fraction,seed`.
pub fn write_probe_csv<W: Write>(results: &[AreaProbeResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["annulus", "samples", "horizon", "step", "survivors", "fraction", "seed"])?;
    for r in results {
        let steps = std::iter::once(r.samples).chain(r.survivors_by_step.iter().copied());
        for (step, count) in steps.enumerate() {
            w.write_record([
                r.annulus.to_string(),
                r.samples.to_string(),
                r.horizon.to_string(),
                step.to_string(),
                count.to_string(),
                format!("{:.16e}", count as f64 / r.samples as f64),
                r.rng_seed.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<probe csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyReport {
    pub seed: u64,
    /// Samples in `A` inside the smallest dyadic disk holding the forest; `|f| < 1/2` expected.
    pub outside_samples: usize,
    pub outside_violations: usize,
    pub outside_max_modulus: f64,
    /// Samples in the inner disks; `|f| > 2` expected.
    pub inner_samples: usize,
    pub inner_violations: usize,
    pub inner_min_modulus: f64,
    /// Samples in the punctured disks; `|f'| > 1` expected.
    pub derivative_samples: usize,
    pub derivative_violations: usize,
    pub derivative_min_modulus: f64,
    pub pass: bool,
}

#[derive(Clone, Copy)]
enum Stratum {
    Outside,
    /// Shell `r_k <= |z - a_k| < 2 r_k` outside every disk.
    Shell(usize),
    Inner(usize),
    Punctured(usize),
}

/// Modulus of `f` or `f'` at `z`; overflow counts as infinite.
fn modulus_at(spec: &DiskForestSpec, z: Complex64, deriv: bool) -> f64 {
    let p = PlanePoint::from_complex(z);
    let r = if deriv { eval_forest_deriv(p, spec) } else { eval_forest(p, spec) };
    match r {
        Ok(r) => r.value.modulus(),
        Err(_) => f64::INFINITY,
    }
}

/// Stratified check of `|f| < 1/2` on `A`, `|f| > 2` on the inner disks and
/// `|f'| > 1` on the punctured disks. A third of `samples` goes to each
/// stratum. Half of the `A` stratum lies in shells around the disks; the
/// disk strata are split evenly over disks.
pub fn forest_dichotomy(spec: &DiskForestSpec, samples: usize, seed: u64) -> Result<DichotomyReport> {
    let disks = spec.disks();
    if disks.is_empty() {
        return Err(Error::invalid("dichotomy check needs at least one disk"));
    }
    if samples < 3 * disks.len() {
        return Err(Error::invalid(format!("need at least {} samples for {} disks", 3 * disks.len(), disks.len())));
    }
    let outer = disks
        .iter()
        .map(|d| d.center.modulus() + d.radius)
        .fold(2.0, f64::max)
        .log2()
        .ceil()
        .exp2();
    let per_stratum = samples / 3;
    let per_disk = per_stratum / disks.len();
    let per_shell = per_stratum / 2 / disks.len();
    let global = per_stratum - per_shell * disks.len();
    let plan: Vec<Stratum> = (0..global)
        .map(|_| Stratum::Outside)
        .chain((0..disks.len()).flat_map(|k| std::iter::repeat_n(Stratum::Shell(k), per_shell)))
        .chain((0..disks.len()).flat_map(|k| std::iter::repeat_n(Stratum::Inner(k), per_disk)))
        .chain((0..disks.len()).flat_map(|k| std::iter::repeat_n(Stratum::Punctured(k), per_disk)))
        .collect();
    let draws: Vec<(Stratum, f64)> = plan
        .par_chunks(CHUNK)
        .enumerate()
        .flat_map_iter(|(c, strata)| {
            let mut rng = chunk_rng(seed, c);
            strata
                .iter()
                .map(|&s| {
                    let m = match s {
                        Stratum::Outside => loop {
                            let z = uniform_in_disk(&mut rng, Complex64::new(0.0, 0.0), outer);
                            if spec.containing_disk(z).is_none() {
                                break modulus_at(spec, z, false);
                            }
                        },
                        Stratum::Shell(k) => loop {
                            let d = &disks[k];
                            let z = uniform_in_disk(&mut rng, d.center_complex(), 2.0 * d.radius);
                            if spec.containing_disk(z).is_none() {
                                break modulus_at(spec, z, false);
                            }
                        },
                        Stratum::Inner(k) => {
                            let d = &disks[k];
                            modulus_at(spec, uniform_in_disk(&mut rng, d.center_complex(), d.inner_radius), false)
                        }
                        Stratum::Punctured(k) => {
                            let d = &disks[k];
                            modulus_at(spec, uniform_in_disk(&mut rng, d.center_complex(), d.radius), true)
                        }
                    };
                    (s, m)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mut rep = DichotomyReport {
        seed,
        outside_samples: 0,
        outside_violations: 0,
        outside_max_modulus: 0.0,
        inner_samples: 0,
        inner_violations: 0,
        inner_min_modulus: f64::INFINITY,
        derivative_samples: 0,
        derivative_violations: 0,
        derivative_min_modulus: f64::INFINITY,
        pass: false,
    };
    for (s, m) in draws {
        match s {
            Stratum::Outside | Stratum::Shell(_) => {
                rep.outside_samples += 1;
                rep.outside_violations += usize::from(!(m < 0.5));
                rep.outside_max_modulus = rep.outside_max_modulus.max(m);
            }
            Stratum::Inner(_) => {
                rep.inner_samples += 1;
                rep.inner_violations += usize::from(!(m > 2.0));
                rep.inner_min_modulus = rep.inner_min_modulus.min(m);
            }
            Stratum::Punctured(_) => {
                rep.derivative_samples += 1;
                rep.derivative_violations += usize::from(!(m > 1.0));
                rep.derivative_min_modulus = rep.derivative_min_modulus.min(m);
            }
        }
    }
    rep.pass = rep.outside_violations + rep.inner_violations + rep.derivative_violations == 0;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::forest::{choose_forest_params, default_layout};

    fn spec() -> DiskForestSpec {
        choose_forest_params(&default_layout(3, 2, 0.45).unwrap(), 0.45).unwrap()
    }

    #[test]
    fn zero_horizon_is_vacuous() {
        let r = area_probe(&spec(), 1, 1000, 0, 7).unwrap();
        assert_eq!(r.persisting, 1000);
        assert_eq!(r.fraction_persisting, 1.0);
    }

    #[test]
    fn probe_is_seed_deterministic() {
        let a = area_probe(&spec(), 2, 3000, 2, 11).unwrap();
        let b = area_probe(&spec(), 2, 3000, 2, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fraction_persisting, a.persisting as f64 / a.samples as f64);
        assert!(a.survivors_by_step.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn probe_preconditions() {
        assert!(area_probe(&spec(), 1, 999, 1, 0).is_err());
        assert!(area_probe(&spec(), 9, 1000, 1, 0).is_err());
        let mut d = spec().disks()[0];
        d.eps = 0.6;
        let bad = DiskForestSpec::new(vec![d]).unwrap();
        match area_probe(&bad, 1, 1000, 1, 0) {
            Err(Error::Constraint { name, .. }) => assert_eq!(name, "eps_sum"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dichotomy_holds_on_chosen_spec() {
        let rep = forest_dichotomy(&spec(), 3000, 5).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.inner_samples, 6 * (1000 / 6));
    }

    #[test]
    fn starts_lie_in_inner_disks_of_the_annulus() {
        let s = spec();
        let p = Annulus::dyadic(2);
        let cum: Vec<f64> = inner_disk_weights(s.disks(), 2)
            .iter()
            .scan(0.0, |a, x| {
                *a += x;
                Some(*a)
            })
            .collect();
        let mut rng = chunk_rng(3, 0);
        for _ in 0..200 {
            let z = draw_start(&mut rng, &s, &p, &cum);
            assert!(p.contains(z));
            assert!(s.disks().iter().any(|d| (z - d.center_complex()).norm() < d.inner_radius));
        }
    }
}
