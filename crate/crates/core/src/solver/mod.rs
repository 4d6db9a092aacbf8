//! Proximal gradient fits of penalized partial likelihoods.

mod penalty;

pub use penalty::{block_soft_threshold, kkt_from_gradient, penalty_value, prox, PenaltyKind, PenaltySpec};

use ndarray::{s, Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::likelihood::{
    gradient, hessian_quadratic, hessian_vector, neg_log_pl, value_and_gradient, DesignExpansion,
    GroupCoefficients,
};
use crate::linalg::solve_spd;

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub tol: f64,
    pub kkt_tol: f64,
    pub max_iter: usize,
    pub init: Option<Array1<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            kkt_tol: 1e-4,
            max_iter: 10_000,
            init: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub gamma_hat: GroupCoefficients,
    pub lambda: f64,
    pub objective_trace: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub step_size_final: f64,
}

impl FitResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }

    /// Number of penalized-or-not blocks with any nonzero coefficient.
    pub fn nonzero_blocks(&self) -> usize {
        self.gamma_hat
            .blocks()
            .iter()
            .filter(|(sc, v)| sc.is_some_and(|x| x != 0.0) || v.iter().any(|x| *x != 0.0))
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGrid {
    pub count: usize,
    pub ratio: f64,
}

impl Default for PathGrid {
    fn default() -> Self {
        Self {
            count: 50,
            ratio: 0.01,
        }
    }
}

impl PathGrid {
    pub fn lambdas(&self, lambda_max: f64) -> Vec<f64> {
        match self.count {
            0 => vec![],
            1 => vec![lambda_max],
            c => (0..c)
                .map(|i| lambda_max * self.ratio.powf(i as f64 / (c - 1) as f64))
                .collect(),
        }
    }
}

/// `Q(γ) = l_p(γ) + λ Penalty(γ)`.
pub fn objective(design: &DesignExpansion, gamma: ArrayView1<f64>, spec: &PenaltySpec) -> Result<f64> {
    Ok(neg_log_pl(design, gamma)? + spec.lambda * penalty_value(gamma, design.layout(), spec))
}

pub fn kkt_residual(design: &DesignExpansion, gamma: ArrayView1<f64>, spec: &PenaltySpec) -> Result<f64> {
    let g = gradient(design, gamma)?;
    Ok(kkt_from_gradient(gamma, g.view(), design.layout(), spec))
}

/// Coordinates of blocks left out of the penalty.
fn free_coordinates(design: &DesignExpansion, spec: &PenaltySpec) -> Vec<usize> {
    let layout = design.layout();
    layout
        .blocks()
        .iter()
        .enumerate()
        .filter(|(b, _)| !spec.is_penalized(layout, *b))
        .flat_map(|(_, blk)| blk.range())
        .collect()
}

/// Damped Newton over `coords` with every other coordinate held at `start`.
pub fn newton_subspace(
    design: &DesignExpansion,
    start: Array1<f64>,
    coords: &[usize],
    tol: f64,
    max_iter: usize,
) -> Result<Array1<f64>> {
    let mut x = start;
    if coords.is_empty() {
        return Ok(x);
    }
    let k = coords.len();
    for _ in 0..max_iter {
        let (f, g) = value_and_gradient(design, x.view())?;
        let gs = Array1::from_iter(coords.iter().map(|&c| g[c]));
        if gs.iter().map(|v| v.abs()).fold(0.0, f64::max) < tol {
            break;
        }
        let mut h = Array2::<f64>::zeros((k, k));
        for (a, &ca) in coords.iter().enumerate() {
            let mut e = Array1::zeros(x.len());
            e[ca] = 1.0;
            let hv = hessian_vector(design, x.view(), e.view())?;
            for (b, &cb) in coords.iter().enumerate() {
                h[[b, a]] = hv[cb];
            }
        }
        let ridge = 1e-12 * (0..k).map(|i| h[[i, i]]).fold(0.0, f64::max).max(1e-300);
        for i in 0..k {
            h[[i, i]] += ridge;
        }
        let dir = solve_spd(&h, &gs)?;
        let slope = -gs.dot(&dir);
        let mut t = 1.0;
        loop {
            let mut trial = x.clone();
            for (i, &c) in coords.iter().enumerate() {
                trial[c] -= t * dir[i];
            }
            let ft = neg_log_pl(design, trial.view())?;
            if ft <= f + 1e-4 * t * slope || t < 1e-12 {
                x = trial;
                break;
            }
            t *= 0.5;
        }
    }
    Ok(x)
}

/// Where the path starts: penalized blocks at zero, free blocks at their optimum.
fn null_fit(design: &DesignExpansion, spec: &PenaltySpec) -> Result<Array1<f64>> {
    let coords = free_coordinates(design, spec);
    newton_subspace(design, design.layout().zeros(), &coords, 1e-12, 100)
}

/// Smallest `λ` at which the penalized blocks are all zero at the optimum.
pub fn lambda_max(design: &DesignExpansion, spec: &PenaltySpec) -> Result<f64> {
    spec.validate(design.layout())?;
    let base = null_fit(design, spec)?;
    let g = gradient(design, base.view())?;
    let layout = design.layout();
    Ok(layout
        .blocks()
        .iter()
        .enumerate()
        .filter(|(b, _)| spec.is_penalized(layout, *b))
        .map(|(b, blk)| {
            let gv = g.slice(s![blk.vector.clone()]).to_owned();
            penalty::block_dual(spec.kind, blk.scalar.map(|i| g[i]), &gv) / spec.weight(b)
        })
        .fold(0.0, f64::max))
}

/// Largest eigenvalue of `l̈_p(γ)` by power iteration.
pub fn lipschitz_estimate(design: &DesignExpansion, gamma: ArrayView1<f64>, iterations: usize) -> Result<f64> {
    let dim = design.dim();
    let mut v = Array1::from_shape_fn(dim, |i| 1.0 + 0.1 * ((i * 7919) % 13) as f64);
    v /= v.dot(&v).sqrt();
    let mut est = 0.0;
    for _ in 0..iterations {
        let hv = hessian_vector(design, gamma, v.view())?;
        let nrm = hv.dot(&hv).sqrt();
        if nrm == 0.0 {
            break;
        }
        v = hv / nrm;
        est = hessian_quadratic(design, gamma, v.view())?;
    }
    Ok(est)
}

/// FISTA with backtracking, monotone and gradient restarts, and a KKT stopping test.
pub fn fit(design: &DesignExpansion, spec: &PenaltySpec, options: &FitOptions) -> Result<FitResult> {
    spec.validate(design.layout())?;
    let layout = design.layout().clone();
    let mut x = match &options.init {
        Some(init) if init.len() != design.dim() => {
            return Err(Error::DimensionMismatch {
                expected: design.dim(),
                got: init.len(),
            })
        }
        Some(init) => init.clone(),
        None => layout.zeros(),
    };
    let pen = |g: ArrayView1<f64>| spec.lambda * penalty_value(g, &layout, spec);

    let lip = lipschitz_estimate(design, layout.zeros().view(), 20)?;
    let mut step = if lip > 0.0 { 1.0 / lip } else { 1.0 };

    let mut qx = neg_log_pl(design, x.view())? + pen(x.view());
    let mut trace = vec![qx];
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut stalls = 0;
    let mut kkt = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iter {
        iterations += 1;
        let (fy, gy) = value_and_gradient(design, y.view())?;
        let (z, fz) = loop {
            let z = prox((&y - &(&gy * step)).view(), &layout, spec, step)?;
            let d = &z - &y;
            let fz = neg_log_pl(design, z.view())?;
            let bound = fy + gy.dot(&d) + d.dot(&d) / (2.0 * step);
            if fz <= bound + 1e-14 * fy.abs() || step < 1e-20 {
                break (z, fz);
            }
            step *= 0.5;
        };
        let qz = fz + pen(z.view());
        // increases at rounding level still move a stuck iterate
        if qz > qx + 1e-14 * qx.abs().max(1.0) {
            // monotone restart from the last accepted point
            if y == x {
                trace.push(qx);
                stalls += 1;
            } else {
                y = x.clone();
                t = 1.0;
                continue;
            }
        } else {
            let restart = (&y - &z).dot(&(&z - &x)) > 0.0;
            let t_next = if restart { 1.0 } else { (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0 };
            let momentum = if restart { 0.0 } else { (t - 1.0) / t_next };
            y = &z + &((&z - &x) * momentum);
            t = t_next;
            let rel = (qx - qz).abs() / qz.abs().max(1.0);
            x = z;
            qx = qz;
            trace.push(qx);
            if rel < options.tol {
                stalls += 1;
            } else {
                stalls = 0;
            }
        }
        if stalls >= 3 {
            kkt = kkt_from_gradient(x.view(), gradient(design, x.view())?.view(), &layout, spec);
            if kkt < options.kkt_tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        kkt = kkt_from_gradient(x.view(), gradient(design, x.view())?.view(), &layout, spec);
    }
    Ok(FitResult {
        gamma_hat: GroupCoefficients::new(x, layout),
        lambda: spec.lambda,
        objective_trace: trace,
        kkt_residual: kkt,
        iterations,
        converged,
        step_size_final: step,
    })
}

/// Fits over a geometric grid from `λ_max` down, warm-starting each point.
pub fn lambda_path(
    design: &DesignExpansion,
    spec: &PenaltySpec,
    grid: PathGrid,
    options: &FitOptions,
) -> Result<Vec<FitResult>> {
    let lmax = lambda_max(design, spec)?;
    let mut warm = Some(null_fit(design, spec)?);
    let mut out = Vec::with_capacity(grid.count);
    for lambda in grid.lambdas(lmax) {
        let opts = FitOptions {
            init: warm.take(),
            ..options.clone()
        };
        let res = fit(design, &spec.with_lambda(lambda), &opts)?;
        warm = Some(res.gamma_hat.flat.clone());
        out.push(res);
    }
    Ok(out)
}
