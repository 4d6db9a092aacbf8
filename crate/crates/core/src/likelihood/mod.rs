//! Cox partial likelihood over an expanded design.

mod design;
mod layout;
mod standardize;

pub use design::{expand_design, expand_design_with, DesignExpansion, DesignOptions, EventGroup};
pub use layout::{Block, GroupCoefficients, GroupLayout};
pub use standardize::{standardize, Standardization};

use ndarray::{s, Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use design::Rows;

/// Largest dimension for which [`full_hessian`] materializes a matrix.
pub const FULL_HESSIAN_GUARD: usize = 2000;

/// Running log-sum-exp with optional weighted first and second moments.
#[derive(Debug, Clone, Copy)]
struct Lse {
    max: f64,
    sum: f64,
}

impl Lse {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    /// Adds `exp(x)`; returns (weight of new term, rescale factor of old terms).
    fn push(&mut self, x: f64) -> (f64, f64) {
        if x > self.max {
            let c = (self.max - x).exp();
            self.sum = self.sum * c + 1.0;
            self.max = x;
            (1.0, c)
        } else {
            let w = (x - self.max).exp();
            self.sum += w;
            (w, 1.0)
        }
    }

    fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// Weighted running variance (West's algorithm) with rescalable weights.
#[derive(Debug, Clone, Copy)]
struct WeightedVar {
    lse: Lse,
    mean: f64,
    ss: f64,
}

impl WeightedVar {
    fn new() -> Self {
        Self {
            lse: Lse::new(),
            mean: 0.0,
            ss: 0.0,
        }
    }

    fn push(&mut self, eta: f64, u: f64) {
        let (w, c) = self.lse.push(eta);
        self.ss *= c;
        let delta = u - self.mean;
        self.mean += w / self.lse.sum * delta;
        self.ss += w * delta * (u - self.mean);
    }

    fn variance(&self) -> f64 {
        (self.ss / self.lse.sum).max(0.0)
    }
}

fn check(design: &DesignExpansion, gamma: ArrayView1<f64>) -> Result<()> {
    if design.events().is_empty() {
        return Err(Error::NoEvents);
    }
    if gamma.len() != design.dim() {
        return Err(Error::DimensionMismatch {
            expected: design.dim(),
            got: gamma.len(),
        });
    }
    Ok(())
}

/// `Γ B̄(t_e)` for the time-varying family: one value per covariate.
fn tv_effects(gamma: ArrayView1<f64>, p: usize, l: usize, b: ArrayView1<f64>) -> Array1<f64> {
    Array1::from_shape_fn(p, |j| gamma.slice(s![j * l..(j + 1) * l]).dot(&b))
}

/// Log denominators `log S0_e` for every event (ascending order), static rows.
fn static_log_s0(design: &DesignExpansion, eta: &Array1<f64>) -> Vec<f64> {
    let events = design.events();
    let order = design.order();
    let mut out = vec![0.0; events.len()];
    let mut acc = Lse::new();
    let mut pos = 0;
    for e in events.iter().rev() {
        while pos < e.risk_len {
            acc.push(eta[order[pos]]);
            pos += 1;
        }
        out[e.index] = acc.value();
    }
    out
}

/// Per-subject gradient weights `ω_k = Σ_{e: k∈R_e} (d_e/n) π_ek − δ_k/n`, split
/// into the risk part and the event part.
fn static_weights(design: &DesignExpansion, eta: &Array1<f64>) -> (Array1<f64>, Vec<f64>) {
    let n = design.n() as f64;
    let events = design.events();
    let log_s0 = static_log_s0(design, eta);
    // cumulative log Σ_{e' ≤ e} (d_e'/n) exp(-log S0_e')
    let mut cum = Vec::with_capacity(events.len());
    let mut acc = Lse::new();
    for e in events {
        acc.push((e.multiplicity() as f64 / n).ln() - log_s0[e.index]);
        cum.push(acc.value());
    }
    let times = design.times();
    let risk = Array1::from_shape_fn(design.n(), |k| {
        let m = events.partition_point(|e| e.time <= times[k]);
        if m == 0 {
            0.0
        } else {
            (eta[k] + cum[m - 1]).exp()
        }
    });
    (risk, log_s0)
}

/// Negative log partial likelihood `l_p(γ)` with Breslow ties.
pub fn neg_log_pl(design: &DesignExpansion, gamma: ArrayView1<f64>) -> Result<f64> {
    check(design, gamma)?;
    let n = design.n() as f64;
    let mut total = 0.0;
    match &design.rows {
        Rows::Static(w) => {
            let eta = w.dot(&gamma);
            let log_s0 = static_log_s0(design, &eta);
            for e in design.events() {
                let lin: f64 = e.subjects.iter().map(|&i| eta[i]).sum();
                total += e.multiplicity() as f64 * log_s0[e.index] - lin;
            }
        }
        Rows::TimeVarying { x, basis } => {
            let order = design.order();
            let (p, l) = (design.p(), design.basis_dim());
            for e in design.events() {
                let g = tv_effects(gamma, p, l, basis.row(e.index));
                let mut acc = Lse::new();
                for &k in &order[..e.risk_len] {
                    acc.push(x.row(k).dot(&g));
                }
                let lin: f64 = e.subjects.iter().map(|&i| x.row(i).dot(&g)).sum();
                total += e.multiplicity() as f64 * acc.value() - lin;
            }
        }
    }
    Ok(total / n)
}

/// Gradient `l̇_p(γ)`.
pub fn gradient(design: &DesignExpansion, gamma: ArrayView1<f64>) -> Result<Array1<f64>> {
    Ok(value_and_gradient(design, gamma)?.1)
}

/// `l_p(γ)` and `l̇_p(γ)` in one sweep.
pub fn value_and_gradient(
    design: &DesignExpansion,
    gamma: ArrayView1<f64>,
) -> Result<(f64, Array1<f64>)> {
    check(design, gamma)?;
    let n = design.n() as f64;
    match &design.rows {
        Rows::Static(w) => {
            let eta = w.dot(&gamma);
            let (mut omega, log_s0) = static_weights(design, &eta);
            let mut value = 0.0;
            for e in design.events() {
                for &i in &e.subjects {
                    omega[i] -= 1.0 / n;
                    value -= eta[i];
                }
                value += e.multiplicity() as f64 * log_s0[e.index];
            }
            Ok((value / n, w.t().dot(&omega)))
        }
        Rows::TimeVarying { x, basis } => {
            let order = design.order();
            let (p, l) = (design.p(), design.basis_dim());
            let mut grad = Array1::zeros(design.dim());
            let mut value = 0.0;
            for e in design.events() {
                let b = basis.row(e.index);
                let g = tv_effects(gamma, p, l, b);
                let mut acc = Lse::new();
                let mut xbar = Array1::<f64>::zeros(p);
                for &k in &order[..e.risk_len] {
                    let xk = x.row(k);
                    let (wt, c) = acc.push(xk.dot(&g));
                    if c != 1.0 {
                        xbar *= c;
                    }
                    xbar.scaled_add(wt, &xk);
                }
                let d = e.multiplicity() as f64;
                let mut coef = xbar * (d / acc.sum);
                value += d * acc.value();
                for &i in &e.subjects {
                    coef -= &x.row(i);
                    value -= x.row(i).dot(&g);
                }
                for j in 0..p {
                    grad.slice_mut(s![j * l..(j + 1) * l])
                        .scaled_add(coef[j] / n, &b);
                }
            }
            Ok((value / n, grad))
        }
    }
}

/// Quadratic form `θᵀ l̈_p(γ) θ`, computed as risk-set weighted variances of `θᵀW_k(t)`.
pub fn hessian_quadratic(
    design: &DesignExpansion,
    gamma: ArrayView1<f64>,
    theta: ArrayView1<f64>,
) -> Result<f64> {
    check(design, gamma)?;
    check(design, theta)?;
    let n = design.n() as f64;
    let order = design.order();
    let mut total = 0.0;
    match &design.rows {
        Rows::Static(w) => {
            let eta = w.dot(&gamma);
            let u = w.dot(&theta);
            let mut acc = WeightedVar::new();
            let mut pos = 0;
            for e in design.events().iter().rev() {
                while pos < e.risk_len {
                    let k = order[pos];
                    acc.push(eta[k], u[k]);
                    pos += 1;
                }
                total += e.multiplicity() as f64 * acc.variance();
            }
        }
        Rows::TimeVarying { x, basis } => {
            let (p, l) = (design.p(), design.basis_dim());
            for e in design.events() {
                let b = basis.row(e.index);
                let g = tv_effects(gamma, p, l, b);
                let h = tv_effects(theta, p, l, b);
                let mut acc = WeightedVar::new();
                for &k in &order[..e.risk_len] {
                    let xk = x.row(k);
                    acc.push(xk.dot(&g), xk.dot(&h));
                }
                total += e.multiplicity() as f64 * acc.variance();
            }
        }
    }
    Ok(total / n)
}

/// Hessian-vector product `l̈_p(γ) θ` without forming the matrix.
pub fn hessian_vector(
    design: &DesignExpansion,
    gamma: ArrayView1<f64>,
    theta: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    check(design, gamma)?;
    check(design, theta)?;
    let n = design.n() as f64;
    let order = design.order();
    let events = design.events();
    match &design.rows {
        Rows::Static(w) => {
            let eta = w.dot(&gamma);
            let u = w.dot(&theta);
            let mut log_s0 = vec![0.0; events.len()];
            let mut ubar = vec![0.0; events.len()];
            let mut acc = WeightedVar::new();
            let mut pos = 0;
            for e in events.iter().rev() {
                while pos < e.risk_len {
                    let k = order[pos];
                    acc.push(eta[k], u[k]);
                    pos += 1;
                }
                log_s0[e.index] = acc.lse.value();
                ubar[e.index] = acc.mean;
            }
            // running (max, Σ c_e, Σ c_e ū_e) in units of exp(max)
            let mut cum = Vec::with_capacity(events.len());
            let (mut m, mut sa, mut sb) = (f64::NEG_INFINITY, 0.0, 0.0);
            for e in events {
                let lc = (e.multiplicity() as f64 / n).ln() - log_s0[e.index];
                if lc > m {
                    let c = (m - lc).exp();
                    sa *= c;
                    sb *= c;
                    m = lc;
                }
                let wt = (lc - m).exp();
                sa += wt;
                sb += wt * ubar[e.index];
                cum.push((m, sa, sb));
            }
            let times = design.times();
            let r = Array1::from_shape_fn(design.n(), |k| {
                let j = events.partition_point(|e| e.time <= times[k]);
                if j == 0 {
                    return 0.0;
                }
                let (m, sa, sb) = cum[j - 1];
                (eta[k] + m).exp() * (u[k] * sa - sb)
            });
            Ok(w.t().dot(&r))
        }
        Rows::TimeVarying { x, basis } => {
            let (p, l) = (design.p(), design.basis_dim());
            let mut out = Array1::zeros(design.dim());
            for e in events {
                let b = basis.row(e.index);
                let g = tv_effects(gamma, p, l, b);
                let h = tv_effects(theta, p, l, b);
                let risk = &order[..e.risk_len];
                let eta: Vec<f64> = risk.iter().map(|&k| x.row(k).dot(&g)).collect();
                let top = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let wts: Vec<f64> = eta.iter().map(|v| (v - top).exp()).collect();
                let total: f64 = wts.iter().sum();
                let mut xbar = Array1::<f64>::zeros(p);
                let mut ubar = 0.0;
                let mut us = Vec::with_capacity(risk.len());
                for (&k, &wt) in risk.iter().zip(&wts) {
                    let uk = x.row(k).dot(&h);
                    us.push(uk);
                    xbar.scaled_add(wt / total, &x.row(k));
                    ubar += wt / total * uk;
                }
                let mut cov = Array1::<f64>::zeros(p);
                for ((&k, &wt), &uk) in risk.iter().zip(&wts).zip(&us) {
                    cov.scaled_add(wt / total * (uk - ubar), &(&x.row(k) - &xbar));
                }
                let d = e.multiplicity() as f64 / n;
                for j in 0..p {
                    out.slice_mut(s![j * l..(j + 1) * l]).scaled_add(d * cov[j], &b);
                }
            }
            Ok(out)
        }
    }
}

/// Dense Hessian `l̈_p(γ)`; refuses dimensions above [`FULL_HESSIAN_GUARD`].
pub fn full_hessian(design: &DesignExpansion, gamma: ArrayView1<f64>) -> Result<Array2<f64>> {
    check(design, gamma)?;
    let dim = design.dim();
    if dim > FULL_HESSIAN_GUARD {
        return Err(Error::DimensionGuard {
            dim,
            guard: FULL_HESSIAN_GUARD,
        });
    }
    let n = design.n() as f64;
    let order = design.order();
    let mut h = Array2::<f64>::zeros((dim, dim));
    match &design.rows {
        Rows::Static(w) => {
            let eta = w.dot(&gamma);
            // centred second moments per risk set, accumulated by prefix
            let mut acc = Lse::new();
            let mut mean = Array1::<f64>::zeros(dim);
            let mut cov = Array2::<f64>::zeros((dim, dim));
            let mut pos = 0;
            for e in design.events().iter().rev() {
                while pos < e.risk_len {
                    let k = order[pos];
                    let (wt, c) = acc.push(eta[k]);
                    if c != 1.0 {
                        cov *= c;
                    }
                    let delta = &w.row(k) - &mean;
                    mean.scaled_add(wt / acc.sum, &delta);
                    let after = &w.row(k) - &mean;
                    for a in 0..dim {
                        let da = wt * delta[a];
                        if da != 0.0 {
                            cov.row_mut(a).scaled_add(da, &after);
                        }
                    }
                    pos += 1;
                }
                h.scaled_add(e.multiplicity() as f64 / acc.sum, &cov);
            }
        }
        Rows::TimeVarying { x, basis } => {
            let (p, l) = (design.p(), design.basis_dim());
            for e in design.events() {
                let b = basis.row(e.index);
                let g = tv_effects(gamma, p, l, b);
                let mut acc = Lse::new();
                let mut covs = Array2::<f64>::zeros((p, p));
                let mut mean = Array1::<f64>::zeros(p);
                for &k in &order[..e.risk_len] {
                    let xk = x.row(k);
                    let (wt, c) = acc.push(xk.dot(&g));
                    if c != 1.0 {
                        covs *= c;
                    }
                    let delta = &xk - &mean;
                    mean.scaled_add(wt / acc.sum, &delta);
                    let after = &xk - &mean;
                    for a in 0..p {
                        covs.row_mut(a).scaled_add(wt * delta[a], &after);
                    }
                }
                let scale = e.multiplicity() as f64 / acc.sum;
                for a in 0..p {
                    for c in 0..p {
                        let v = scale * covs[[a, c]];
                        if v == 0.0 {
                            continue;
                        }
                        for r in 0..l {
                            for q in 0..l {
                                h[[a * l + r, c * l + q]] += v * b[r] * b[q];
                            }
                        }
                    }
                }
            }
        }
    }
    h /= n;
    // symmetrize rounding from the rank-one updates
    let ht = h.t().to_owned();
    Ok((&h + &ht) * 0.5)
}

/// `D(θ) = max_t max_{i,j} |θᵀW_i(t) − θᵀW_j(t)|` over event times.
pub fn deviation(design: &DesignExpansion, theta: ArrayView1<f64>) -> Result<f64> {
    check(design, theta)?;
    let range = |it: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
        hi - lo
    };
    Ok(match &design.rows {
        Rows::Static(w) => {
            let u = w.dot(&theta);
            range(&mut u.iter().copied())
        }
        Rows::TimeVarying { x, basis } => {
            let (p, l) = (design.p(), design.basis_dim());
            design
                .events()
                .iter()
                .map(|e| {
                    let h = tv_effects(theta, p, l, basis.row(e.index));
                    range(&mut x.rows().into_iter().map(|r| r.dot(&h)))
                })
                .fold(0.0, f64::max)
        }
    })
}
