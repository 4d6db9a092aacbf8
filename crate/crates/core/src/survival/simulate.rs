use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use statrs::function::erf::erfc;

use super::truth::{CovariateRange, GFunction, TruthSpec};
use super::{Family, SurvivalDataset, TAU};
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

pub type SubjectRng = ChaCha8Rng;

const MAX_EXPONENT: f64 = 700.0;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for one subject of one replication. The key is
/// derived from `(seed, replication)`, the subject selects the ChaCha
/// stream, so draws never depend on scheduling order.
pub fn subject_rng(seed: u64, replication: u64, subject: u64) -> SubjectRng {
    let mut state = seed ^ replication.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(subject);
    rng
}

/// Standard normal distribution function.
pub fn normal_cdf(y: f64) -> f64 {
    0.5 * erfc(-y / std::f64::consts::SQRT_2)
}

/// A stationary Gaussian AR(1) sequence of length `q` with unit marginal
/// variance.
pub fn ar1_normals(q: usize, rho: f64, rng: &mut impl Rng) -> Vec<f64> {
    let innov = (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(q);
    let mut prev = 0.0;
    for j in 0..q {
        let e: f64 = rng.sample(StandardNormal);
        prev = if j == 0 { e } else { rho * prev + innov * e };
        out.push(prev);
    }
    out
}

/// One covariate row: AR(1) Gaussian copula for the first `q` entries,
/// independent uniforms for the rest.
pub fn copula_row(
    p: usize,
    q: usize,
    rho: f64,
    range: CovariateRange,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut row: Vec<f64> = ar1_normals(q, rho, rng).into_iter().map(normal_cdf).collect();
    row.extend((q..p).map(|_| rng.random::<f64>()));
    if range == CovariateRange::Symmetric {
        row.iter_mut().for_each(|u| *u = 2.0 * *u - 1.0);
    }
    row
}

/// `n × p` covariates with U(0, 1) marginals.
pub fn gen_copula_covariates(
    n: usize,
    p: usize,
    q: usize,
    rho: f64,
    rng: &mut impl Rng,
) -> Array2<f64> {
    let mut x = Array2::zeros((n, p));
    for i in 0..n {
        let row = copula_row(p, q, rho, CovariateRange::Unit, rng);
        for (j, v) in row.into_iter().enumerate() {
            x[[i, j]] = v;
        }
    }
    x
}

/// Smallest `t ∈ [0, tau]` with `cumhaz(t) >= e`, by bisection to 1e-10.
/// Returns `f64::INFINITY` when the hazard accumulated by `tau` is below `e`.
pub fn inverse_hazard_sample(cumhaz: impl Fn(f64) -> f64, e: f64, tau: f64) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = tau;
    let mut f_lo = cumhaz(lo);
    let mut f_hi = cumhaz(hi);
    if f_lo > f_hi {
        return Err(Error::Numerical("cumulative hazard is not monotone".into()));
    }
    if f_hi < e {
        return Ok(f64::INFINITY);
    }
    if f_lo >= e {
        return Ok(lo);
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        let f_mid = cumhaz(mid);
        if f_mid < f_lo || f_mid > f_hi {
            return Err(Error::Numerical("cumulative hazard is not monotone".into()));
        }
        if f_mid >= e {
            hi = mid;
            f_hi = f_mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Ok(hi)
}

/// Hazard on [0, TAU] for a time-varying subject, with a tabulated
/// cumulative integral for fast inversion.
struct TimeVaryingHazard<'a> {
    terms: &'a [(usize, GFunction)],
    x: &'a [f64],
    baseline: f64,
    table: Vec<f64>,
    nodes: (Vec<f64>, Vec<f64>),
}

const HAZARD_PANELS: usize = 64;

impl<'a> TimeVaryingHazard<'a> {
    fn new(terms: &'a [(usize, GFunction)], x: &'a [f64], baseline: f64) -> Result<Self> {
        let nodes = gauss_legendre(8);
        let mut h = Self {
            terms,
            x,
            baseline,
            table: vec![0.0; HAZARD_PANELS + 1],
            nodes,
        };
        for k in 0..HAZARD_PANELS {
            let a = k as f64 / HAZARD_PANELS as f64;
            let b = (k + 1) as f64 / HAZARD_PANELS as f64;
            h.table[k + 1] = h.table[k] + h.integrate(a, b)?;
        }
        Ok(h)
    }

    fn exponent(&self, s: f64) -> f64 {
        self.terms.iter().map(|(j, g)| self.x[*j] * g.eval(s)).sum()
    }

    fn integrate(&self, a: f64, b: f64) -> Result<f64> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (xi, wi) in self.nodes.0.iter().zip(&self.nodes.1) {
            let eta = self.exponent(mid + half * xi);
            if eta > MAX_EXPONENT {
                return Err(hazard_overflow(eta));
            }
            acc += wi * half * self.baseline * eta.exp();
        }
        Ok(acc)
    }

    fn cumulative(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, TAU);
        let k = ((t * HAZARD_PANELS as f64).floor() as usize).min(HAZARD_PANELS - 1);
        let a = k as f64 / HAZARD_PANELS as f64;
        self.table[k] + self.integrate(a, t).unwrap_or(f64::INFINITY)
    }
}

fn hazard_overflow(eta: f64) -> Error {
    Error::Config(format!(
        "hazard exponent {eta:.1} exceeds {MAX_EXPONENT}; reduce the scale of the coefficient functions"
    ))
}

/// Draws `n` subjects from `truth`, replication `replication` of `seed`.
pub fn simulate(truth: &TruthSpec, n: usize, seed: u64, replication: u64) -> Result<SurvivalDataset> {
    truth.validate()?;
    let p = truth.p;
    let terms: Vec<(usize, GFunction)> = truth
        .functions
        .iter()
        .enumerate()
        .filter(|(_, g)| !g.is_zero())
        .map(|(j, g)| (j, *g))
        .collect();

    let mut times = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    let mut x = Array2::zeros((n, p));
    let mut zs = Vec::new();
    for i in 0..n {
        let mut rng = subject_rng(seed, replication, i as u64);
        let row = copula_row(p, truth.q, truth.rho, truth.covariate_range, &mut rng);
        let z: f64 = rng.random();
        let e: f64 = rng.sample(Exp1);
        let c = if truth.censor_rate > 0.0 {
            rng.sample::<f64, _>(Exp1) / truth.censor_rate
        } else {
            f64::INFINITY
        };

        let t0 = match truth.family {
            Family::IndexVc | Family::Additive => {
                let eta: f64 = match truth.family {
                    Family::IndexVc => {
                        truth.g0.eval(z) + terms.iter().map(|(j, g)| row[*j] * g.eval(z)).sum::<f64>()
                    }
                    _ => terms.iter().map(|(j, g)| g.eval(row[*j])).sum(),
                };
                if eta > MAX_EXPONENT {
                    return Err(hazard_overflow(eta));
                }
                e / (truth.baseline * eta.exp())
            }
            Family::TimeVarying => {
                let hazard = TimeVaryingHazard::new(&terms, &row, truth.baseline)?;
                inverse_hazard_sample(|t| hazard.cumulative(t), e, TAU)?
            }
        };
        let mut t = t0.min(c);
        let mut d = t0 <= c;
        if truth.family == Family::TimeVarying && t >= TAU {
            t = TAU;
            d = false;
        }
        times.push(t);
        status.push(d);
        for (j, v) in row.into_iter().enumerate() {
            x[[i, j]] = v;
        }
        if truth.family == Family::IndexVc {
            zs.push(z);
        }
    }
    let index = (truth.family == Family::IndexVc).then_some(zs);
    SurvivalDataset::new(times, status, x, index, truth.family)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_linear_hazards() {
        let t = inverse_hazard_sample(|t| t, 0.7, 1.0).unwrap();
        assert!((t - 0.7).abs() < 1e-9);
        let t = inverse_hazard_sample(|t| 0.5 * t, 0.2, 1.0).unwrap();
        assert!((t - 0.4).abs() < 1e-9);
    }

    #[test]
    fn inverse_of_exponential_hazard() {
        // 0.5 (e^t - 1) = 0.3  =>  t = ln 1.6
        let t = inverse_hazard_sample(|t| 0.5 * (t.exp() - 1.0), 0.3, 1.0).unwrap();
        assert!((t - 1.6f64.ln()).abs() < 1e-9);
        assert!((t - 0.470).abs() < 1e-3);
    }

    #[test]
    fn inverse_beyond_tau_is_infinite() {
        let t = inverse_hazard_sample(|t| 0.1 * t, 0.5, 1.0).unwrap();
        assert!(t.is_infinite());
    }

    #[test]
    fn non_monotone_hazard_is_detected() {
        assert!(inverse_hazard_sample(|t| 1.0 - t, 0.5, 1.0).is_err());
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-9);
        assert!((normal_cdf(-3.0) - 0.0013498980316300946).abs() < 1e-12);
    }

    #[test]
    fn subject_streams_are_reproducible_and_distinct() {
        let a: u64 = subject_rng(7, 0, 3).random();
        let b: u64 = subject_rng(7, 0, 3).random();
        let c: u64 = subject_rng(7, 0, 4).random();
        let d: u64 = subject_rng(7, 1, 3).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn simulation_is_deterministic() {
        let truth = TruthSpec::index_vc_table(12, 8);
        let a = simulate(&truth, 50, 11, 2).unwrap();
        let b = simulate(&truth, 50, 11, 2).unwrap();
        assert_eq!(a, b);
        let c = simulate(&truth, 50, 11, 3).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn overflowing_hazard_is_a_config_error() {
        let mut truth = TruthSpec::null(Family::IndexVc, 2, 0);
        truth.functions[0] = GFunction::Const(1e4);
        let err = simulate(&truth, 20, 1, 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
