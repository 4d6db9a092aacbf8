//! Measurable pieces of the oracle inequality on concrete instances.

use std::fmt::Write as _;

use ndarray::{s, Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::basis::OrthoBasis;
use crate::error::{Error, Result};
use crate::likelihood::{full_hessian, gradient, DesignExpansion, GroupLayout};
use crate::linalg::{max_asymmetry, min_eigenpair};
use crate::solver::FitResult;
use crate::survival::{Family, SurvivalDataset, TruthSpec};

/// One penalized slot: a scalar coordinate or a vector block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub coords: Vec<usize>,
    pub in_support: bool,
}

/// The slot decomposition behind `P_1` with the true support marked.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotSupport {
    pub slots: Vec<Slot>,
}

impl SlotSupport {
    /// Every nonempty scalar and vector slot of the layout, none in the support.
    pub fn from_layout(layout: &GroupLayout) -> Self {
        let mut slots = vec![];
        for blk in layout.blocks() {
            if let Some(i) = blk.scalar {
                slots.push(Slot {
                    coords: vec![i],
                    in_support: false,
                });
            }
            if !blk.vector.is_empty() {
                slots.push(Slot {
                    coords: blk.vector.clone().collect(),
                    in_support: false,
                });
            }
        }
        Self { slots }
    }

    /// Support given by the nonzero parts of a truth.
    pub fn from_truth(layout: &GroupLayout, truth: &TruthSpec) -> Self {
        let sc = truth.scalar_support();
        let sn = truth.vector_support();
        let mut slots = vec![];
        for blk in layout.blocks() {
            if let Some(i) = blk.scalar {
                slots.push(Slot {
                    coords: vec![i],
                    in_support: blk.covariate.is_some_and(|j| sc.contains(&j)),
                });
            }
            if !blk.vector.is_empty() {
                let rel = match blk.covariate {
                    Some(j) => sn.contains(&j),
                    None => !truth.g0.is_zero(),
                };
                slots.push(Slot {
                    coords: blk.vector.clone().collect(),
                    in_support: rel,
                });
            }
        }
        Self { slots }
    }

    /// Marks the given slot indices as the support.
    pub fn with_support(mut self, support: &[usize]) -> Self {
        for (k, s) in self.slots.iter_mut().enumerate() {
            s.in_support = support.contains(&k);
        }
        self
    }

    /// `s_0`.
    pub fn s0(&self) -> usize {
        self.slots.iter().filter(|s| s.in_support).count()
    }

    fn slot_norm(slot: &Slot, v: ArrayView1<f64>) -> f64 {
        slot.coords.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt()
    }

    /// `(P_1(θ_S), P_1(θ_S̄))`.
    pub fn split_p1(&self, v: ArrayView1<f64>) -> (f64, f64) {
        self.slots.iter().fold((0.0, 0.0), |(a, b), s| {
            let n = Self::slot_norm(s, v);
            if s.in_support {
                (a + n, b)
            } else {
                (a, b + n)
            }
        })
    }

    pub fn p1(&self, v: ArrayView1<f64>) -> f64 {
        let (a, b) = self.split_p1(v);
        a + b
    }

    pub fn in_cone(&self, v: ArrayView1<f64>, zeta: f64) -> bool {
        let (a, b) = self.split_p1(v);
        b <= zeta * a * (1.0 + 1e-12)
    }
}

/// `P_∞(v) = max_j max(|v_1j|, |v_-1j|)` over covariate blocks.
pub fn p_inf_norm(v: ArrayView1<f64>, layout: &GroupLayout) -> f64 {
    layout
        .blocks()
        .iter()
        .filter(|b| b.covariate.is_some())
        .map(|b| {
            let sc = b.scalar.map_or(0.0, |i| v[i].abs());
            let vv = v.slice(s![b.vector.clone()]);
            sc.max(vv.dot(&vv).sqrt())
        })
        .fold(0.0, f64::max)
}

/// `P_1` over all slots of the layout.
pub fn p1_norm(v: ArrayView1<f64>, layout: &GroupLayout) -> f64 {
    SlotSupport::from_layout(layout).p1(v)
}

/// `D_l = P_∞(l̇_p(γ*))`.
pub fn score_deviation(design: &DesignExpansion, gamma_star: ArrayView1<f64>) -> Result<f64> {
    let g = gradient(design, gamma_star)?;
    Ok(p_inf_norm(g.view(), design.layout()))
}

/// `C_W = 2 C_X √λ_max(A_0 A_0ᵀ)`. Families that evaluate the basis at the
/// covariate use `C_X = 1`.
pub fn c_w(basis: &OrthoBasis, data: &SurvivalDataset) -> f64 {
    let cx = match data.family() {
        Family::TimeVarying => data.covariate_bound(),
        _ => 1.0,
    };
    2.0 * cx * basis.transform_eigen().1.sqrt()
}

/// Coefficients of the basis projection of a truth, in the layout of `family`.
pub fn gamma_star(truth: &TruthSpec, layout: &GroupLayout, basis: &OrthoBasis) -> Result<Array1<f64>> {
    if layout.family() != truth.family || layout.basis_dim() != basis.dim() {
        return Err(Error::Config("truth, layout and basis disagree".into()));
    }
    let mut out = layout.zeros();
    for blk in layout.blocks() {
        let g = match blk.covariate {
            Some(j) => &truth.functions[j],
            None => &truth.g0,
        };
        let c = basis.project(|t| g.eval(t)).coefficients();
        let skip = match (truth.family, blk.covariate) {
            (Family::TimeVarying, _) | (Family::IndexVc, Some(_)) => 0,
            _ => 1,
        };
        let r = blk.range();
        out.slice_mut(s![r.clone()]).assign(&c.slice(s![skip..skip + r.len()]));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeOptions {
    pub samples: usize,
    pub seed: u64,
    /// Try the minimum eigenvector when it lies in the cone.
    pub eigenvector: bool,
    /// Hill-climbing steps applied to the best sampled direction.
    pub polish_steps: usize,
}

impl Default for ConeOptions {
    fn default() -> Self {
        Self {
            samples: 2000,
            seed: 0,
            eigenvector: true,
            polish_steps: 400,
        }
    }
}

/// Brackets for `κ²(ζ, Σ)` and `RE²(ζ, Σ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeBrackets {
    pub lambda_min: f64,
    pub kappa_sq: (f64, f64),
    pub re_sq: (f64, f64),
}

fn kappa_ratio(sigma: &Array2<f64>, support: &SlotSupport, th: &Array1<f64>) -> f64 {
    let (ps, _) = support.split_p1(th.view());
    support.s0() as f64 * th.dot(&sigma.dot(th)) / (ps * ps)
}

fn re_ratio(sigma: &Array2<f64>, th: &Array1<f64>) -> f64 {
    th.dot(&sigma.dot(th)) / th.dot(th)
}

/// Pulls a vector into the cone by shrinking its off-support slots.
fn into_cone(support: &SlotSupport, zeta: f64, th: &mut Array1<f64>, u: f64) {
    let (a, b) = support.split_p1(th.view());
    if b > zeta * a {
        let c = u * zeta * a / b;
        for slot in support.slots.iter().filter(|s| !s.in_support) {
            for &i in &slot.coords {
                th[i] *= c;
            }
        }
    }
}

/// Random cone directions used for the upper brackets.
pub fn cone_directions(dim: usize, support: &SlotSupport, zeta: f64, opts: &ConeOptions) -> Vec<Array1<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    (0..opts.samples)
        .map(|_| {
            let mut th = Array1::from_shape_fn(dim, |_| rng.sample::<f64, _>(StandardNormal));
            let u: f64 = rng.random();
            into_cone(support, zeta, &mut th, u);
            th
        })
        .collect()
}

fn polish(
    sigma: &Array2<f64>,
    support: &SlotSupport,
    zeta: f64,
    start: Array1<f64>,
    ratio: &dyn Fn(&Array1<f64>) -> f64,
    steps: usize,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut best = start;
    let mut val = ratio(&best);
    let mut scale = 0.3 * best.dot(&best).sqrt() / (sigma.nrows() as f64).sqrt();
    for _ in 0..steps {
        let mut cand = &best + &Array1::from_shape_fn(best.len(), |_| scale * rng.sample::<f64, _>(StandardNormal));
        into_cone(support, zeta, &mut cand, 1.0);
        let v = ratio(&cand);
        if v.is_finite() && v < val {
            best = cand;
            val = v;
        } else {
            scale *= 0.97;
        }
    }
    val
}

pub fn cone_quantities(
    sigma: &Array2<f64>,
    support: &SlotSupport,
    zeta: f64,
    opts: &ConeOptions,
) -> Result<ConeBrackets> {
    let asym = max_asymmetry(sigma);
    if asym > 1e-10 {
        return Err(Error::NotSymmetric(asym));
    }
    if support.s0() == 0 {
        return Err(Error::Config("cone quantities need a nonempty support".into()));
    }
    let dim = sigma.nrows();
    let (lmin, vmin) = min_eigenpair(sigma);
    let mut kap = f64::INFINITY;
    let mut re = f64::INFINITY;
    let mut best_k = None;
    let mut best_r = None;
    let mut consider = |th: Array1<f64>| {
        let (ps, _) = support.split_p1(th.view());
        if ps == 0.0 {
            return;
        }
        let k = kappa_ratio(sigma, support, &th);
        let r = re_ratio(sigma, &th);
        if k < kap {
            kap = k;
            best_k = Some(th.clone());
        }
        if r < re {
            re = r;
            best_r = Some(th);
        }
    };
    if opts.eigenvector && support.in_cone(vmin.view(), zeta) {
        consider(vmin);
    }
    for th in cone_directions(dim, support, zeta, opts) {
        consider(th);
    }
    if opts.polish_steps > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9);
        if let Some(th) = best_k {
            let f = |t: &Array1<f64>| kappa_ratio(sigma, support, t);
            kap = kap.min(polish(sigma, support, zeta, th, &f, opts.polish_steps, &mut rng));
        }
        if let Some(th) = best_r {
            let f = |t: &Array1<f64>| re_ratio(sigma, t);
            re = re.min(polish(sigma, support, zeta, th, &f, opts.polish_steps, &mut rng));
        }
    }
    Ok(ConeBrackets {
        lambda_min: lmin,
        kappa_sq: (lmin, kap.max(lmin)),
        re_sq: (lmin, re.max(lmin)),
    })
}

/// `τ* = 9 s_0 λ C_W / (4(1−ξ)κ²)` and the smaller root of `η e^{−η} = τ*`.
pub fn tau_eta(s0: usize, lambda: f64, c_w: f64, xi: f64, kappa_sq: f64) -> (f64, Option<f64>) {
    let tau = 9.0 * s0 as f64 * lambda * c_w / (4.0 * (1.0 - xi) * kappa_sq);
    (tau, smaller_root(tau))
}

/// Smaller solution of `η e^{−η} = τ`, or `None` when `τ ≥ 1/e`.
pub fn smaller_root(tau: f64) -> Option<f64> {
    if !(tau >= 0.0) || tau >= (-1.0f64).exp() {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if mid * (-mid).exp() < tau {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub lambda: f64,
    pub d_l: f64,
    pub xi: f64,
    pub zeta: f64,
    pub s0: usize,
    pub c_w: f64,
    pub lambda_min: f64,
    /// `L · λ_min(l̈_p(γ*))`.
    pub lambda_min_scaled: f64,
    pub kappa_sq_lower: f64,
    pub kappa_sq_upper: f64,
    pub re_sq_lower: f64,
    pub re_sq_upper: f64,
    pub tau_star: f64,
    pub eta_star: Option<f64>,
    pub bound: Option<f64>,
    pub achieved: f64,
    pub in_regime: bool,
    pub holds: Option<bool>,
    pub cone_ratio: f64,
    pub cone_limit: f64,
    pub cone_holds: bool,
    pub converged: bool,
    pub reason: Option<String>,
}

pub fn oracle_check(
    fit: &FitResult,
    design: &DesignExpansion,
    gamma_star: ArrayView1<f64>,
    support: &SlotSupport,
    c_w: f64,
    xi: f64,
    opts: &ConeOptions,
) -> Result<OracleReport> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::Config(format!("xi must lie in (0, 1), got {xi}")));
    }
    let zeta = (2.0 + xi) / (1.0 - xi);
    let d_l = score_deviation(design, gamma_star)?;
    let sigma = full_hessian(design, gamma_star)?;
    let br = cone_quantities(&sigma, support, zeta, opts)?;
    let s0 = support.s0();
    let lambda = fit.lambda;
    // conservative endpoint
    let (tau, eta) = tau_eta(s0, lambda, c_w, xi, br.kappa_sq.1);
    let theta = &fit.gamma_hat.flat - &gamma_star;
    let achieved = support.p1(theta.view());
    let (on, off) = support.split_p1(theta.view());
    let cone_ratio = if on > 0.0 {
        off / on
    } else if off > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let in_regime = d_l <= xi * lambda;
    let bound = eta.map(|e| e / c_w);
    let holds = match (in_regime, bound) {
        (true, Some(b)) => Some(achieved <= b),
        _ => None,
    };
    let reason = if !in_regime {
        Some("out of regime: D_l > xi * lambda".to_string())
    } else if eta.is_none() {
        Some("tau_star >= 1/e".to_string())
    } else {
        None
    };
    Ok(OracleReport {
        lambda,
        d_l,
        xi,
        zeta,
        s0,
        c_w,
        lambda_min: br.lambda_min,
        lambda_min_scaled: br.lambda_min * design.basis_dim() as f64,
        kappa_sq_lower: br.kappa_sq.0,
        kappa_sq_upper: br.kappa_sq.1,
        re_sq_lower: br.re_sq.0,
        re_sq_upper: br.re_sq.1,
        tau_star: tau,
        eta_star: eta,
        bound,
        achieved,
        in_regime,
        holds,
        cone_ratio,
        cone_limit: zeta,
        cone_holds: cone_ratio <= zeta + 1e-6,
        converged: fit.converged,
        reason,
    })
}

impl OracleReport {
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or("null".to_string(), |x| format!("{x:.10e}"));
        let num = |x: f64| format!("{x:.10e}");
        vec![
            ("lambda", num(self.lambda)),
            ("d_l", num(self.d_l)),
            ("xi", num(self.xi)),
            ("zeta", num(self.zeta)),
            ("s0", self.s0.to_string()),
            ("c_w", num(self.c_w)),
            ("lambda_min", num(self.lambda_min)),
            ("lambda_min_times_l", num(self.lambda_min_scaled)),
            ("kappa_sq_lower", num(self.kappa_sq_lower)),
            ("kappa_sq_upper", num(self.kappa_sq_upper)),
            ("re_sq_lower", num(self.re_sq_lower)),
            ("re_sq_upper", num(self.re_sq_upper)),
            ("tau_star", num(self.tau_star)),
            ("tau_uses", "kappa_sq_upper".to_string()),
            ("eta_star", opt(self.eta_star)),
            ("bound", opt(self.bound)),
            ("achieved", num(self.achieved)),
            ("in_regime", self.in_regime.to_string()),
            ("holds", self.holds.map_or("null".into(), |b| b.to_string())),
            ("cone_ratio", num(self.cone_ratio)),
            ("cone_limit", num(self.cone_limit)),
            ("cone_holds", self.cone_holds.to_string()),
            ("converged", self.converged.to_string()),
            ("reason", self.reason.clone().unwrap_or_default()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k:<20} {v}");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}

#[cfg(test)]
mod tests;
