#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use vcox::likelihood::{full_hessian, gradient, DesignExpansion};
use vcox::solver::objective;
use vcox::{Family, PenaltyKind, PenaltySpec, SurvivalDataset};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(dim: usize, scale: f64, seed: u64) -> Array1<f64> {
    let mut r = rng(seed);
    Array1::from_shape_fn(dim, |_| r.random_range(-scale..scale))
}

/// Exponential times with a signal in the first two covariates.
pub fn signal_data(family: Family, n: usize, p: usize, strength: f64, seed: u64) -> SurvivalDataset {
    let mut r = rng(seed);
    let x = Array2::from_shape_fn((n, p), |_| match family {
        Family::TimeVarying => r.random_range(-1.0..1.0),
        _ => r.random_range(0.0..1.0),
    });
    let z: Option<Vec<f64>> = (family == Family::IndexVc).then(|| (0..n).map(|_| r.random_range(0.0..1.0)).collect());
    let mut times = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    for i in 0..n {
        let mut eta = strength * x[[i, 0]];
        if p > 1 {
            eta -= strength * x[[i, 1]] * x[[i, 1]];
        }
        if let Some(z) = &z {
            eta *= 1.0 + z[i];
        }
        let e: f64 = Exp1.sample(&mut r);
        let t = 0.5 * e / eta.exp();
        let c = r.random_range(0.2..1.5);
        times.push(t.min(c).max(1e-6));
        status.push(t <= c);
    }
    SurvivalDataset::new(times, status, x, z, family).unwrap()
}

pub fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Numerical minimizer of `½|x - v|² + τ·pen(x)` on one block `(scalar, vector)`.
///
/// The objective is invariant under rotations of the vector slot, so the
/// minimizer lies on the ray through `v_{-1}`; the remaining one- or
/// two-dimensional problems are solved by golden-section search.
pub fn prox_oracle(kind: PenaltyKind, v: &[f64], tau: f64) -> Vec<f64> {
    let s0 = v[0];
    let rest = &v[1..];
    let vn = norm(rest);
    let lo = s0.min(0.0);
    let hi = s0.max(0.0);
    let (s, r) = match kind {
        PenaltyKind::P1 => {
            let s = golden(|s| 0.5 * (s - s0).powi(2) + tau * s.abs(), lo, hi);
            let r = golden(|r| 0.5 * (r - vn).powi(2) + tau * r, 0.0, vn);
            (s, r)
        }
        PenaltyKind::GroupAll => {
            // ray through the whole block
            let full = s0.hypot(vn);
            let rho = golden(|r| 0.5 * (r - full).powi(2) + tau * r, 0.0, full);
            let k = if full > 0.0 { rho / full } else { 0.0 };
            (s0 * k, vn * k)
        }
        PenaltyKind::Ph => {
            let obj = |s: f64, r: f64| 0.5 * (s - s0).powi(2) + 0.5 * (r - vn).powi(2) + tau * (s.hypot(r) + r);
            let best_r = |s: f64| golden(|r| obj(s, r), 0.0, vn);
            let s = golden(|s| obj(s, best_r(s)), lo, hi);
            (s, best_r(s))
        }
    };
    let mut out = vec![s];
    out.extend(rest.iter().map(|x| if vn > 0.0 { x * r / vn } else { 0.0 }));
    out
}

pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = b.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[[i, j]]);
    let rhs = nalgebra::DVector::from_iterator(n, b.iter().copied());
    let x = m.lu().solve(&rhs).expect("nonsingular system");
    Array1::from_iter(x.iter().copied())
}

/// Minimum of the P1 objective over every sparsity pattern of the slots,
/// each pattern polished by damped Newton with the smooth penalty Hessian.
pub fn brute_force_p1(d: &DesignExpansion, lambda: f64) -> (Array1<f64>, f64) {
    let layout = d.layout().clone();
    let mut all_slots: Vec<(bool, Vec<usize>)> = vec![];
    for blk in layout.blocks() {
        if let Some(i) = blk.scalar {
            all_slots.push((true, vec![i]));
        }
        if !blk.vector.is_empty() {
            all_slots.push((false, blk.vector.clone().collect()));
        }
    }
    let m = all_slots.len();
    assert!(m <= 12, "too many slots for enumeration");
    let spec = PenaltySpec::new(PenaltyKind::P1, lambda);
    let q = |x: &Array1<f64>| objective(d, x.view(), &spec).unwrap();
    let mut best = (layout.zeros(), q(&layout.zeros()));
    for pattern in 1u32..(1 << m) {
        let slots: Vec<&(bool, Vec<usize>)> = (0..m).filter(|k| pattern >> k & 1 == 1).map(|k| &all_slots[k]).collect();
        let coords: Vec<usize> = slots.iter().flat_map(|(_, c)| c.clone()).collect();
        let k = coords.len();
        let mut x = layout.zeros();
        for &c in &coords {
            x[c] = 0.05;
        }
        for _ in 0..100 {
            let g = gradient(d, x.view()).unwrap();
            let h = full_hessian(d, x.view()).unwrap();
            let mut gs = Array1::from_iter(coords.iter().map(|&c| g[c]));
            let mut hs = Array2::from_shape_fn((k, k), |(a, b)| h[[coords[a], coords[b]]]);
            let mut off = 0;
            for (scalar, c) in &slots {
                if *scalar {
                    gs[off] += lambda * x[c[0]].signum();
                } else {
                    let v: Vec<f64> = c.iter().map(|&i| x[i]).collect();
                    let vn = norm(&v).max(1e-300);
                    for a in 0..c.len() {
                        gs[off + a] += lambda * v[a] / vn;
                        for b in 0..c.len() {
                            let eye = if a == b { 1.0 } else { 0.0 };
                            hs[[off + a, off + b]] += lambda * (eye - v[a] * v[b] / (vn * vn)) / vn;
                        }
                    }
                }
                off += c.len();
            }
            for i in 0..k {
                hs[[i, i]] += 1e-12;
            }
            let dir = solve(&hs, &gs);
            let q0 = q(&x);
            let mut t = 1.0;
            let mut moved = false;
            while t > 1e-10 {
                let mut trial = x.clone();
                for (i, &c) in coords.iter().enumerate() {
                    trial[c] -= t * dir[i];
                }
                if q(&trial) < q0 {
                    x = trial;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved || gs.iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-13 {
                break;
            }
        }
        let val = q(&x);
        if val < best.1 {
            best = (x, val);
        }
    }
    best
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
