//! Equispaced clamped B-splines and the orthonormalized basis built from them.
//!
//! The orthonormal basis has `b_1 = 1/sqrt(L)`, `b_2 = sqrt(12/L)(t - 1/2)`
//! and `b_3..b_L` obtained by Gram-Schmidt on B-spline elements, each with
//! squared L2 norm `1/L`, so that `∫ B̄ B̄^T = I / L`.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::quadrature::CompositeRule;

/// Residual norm (relative) below which a Gram-Schmidt candidate is skipped.
const SKIP_TOLERANCE: f64 = 1e-10;

/// Gauss points per knot span when projecting arbitrary (non-polynomial)
/// functions.
pub const PROJECTION_NODES: usize = 16;

/// Grid size used for the reported sup-norm approximation error.
pub const SUP_GRID: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct RawBasis {
    dim: usize,
    order: usize,
    knots: Vec<f64>,
}

impl RawBasis {
    /// `dim` B-splines of the given order (degree `order - 1`) with clamped
    /// equispaced knots on [0, 1].
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        if order < 2 || dim < order {
            return Err(Error::InvalidDimension { dim, order });
        }
        let interior = dim - order;
        let spans = interior + 1;
        let mut knots = Vec::with_capacity(dim + order);
        knots.extend(std::iter::repeat_n(0.0, order));
        knots.extend((1..=interior).map(|i| i as f64 / spans as f64));
        knots.extend(std::iter::repeat_n(1.0, order));
        Ok(Self { dim, order, knots })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Distinct knot values, i.e. the span boundaries.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.knots.clone();
        b.dedup();
        b
    }

    /// Uniform knot spacing `1 / (L - order + 1)`.
    pub fn spacing(&self) -> f64 {
        1.0 / (self.dim - self.order + 1) as f64
    }

    /// Index of the knot span containing `t` (right-closed at t = 1).
    fn span(&self, t: f64) -> usize {
        let k = self.order;
        let last = self.dim - 1;
        if t >= 1.0 {
            return last;
        }
        // knots[k-1] = 0, knots[dim] = 1; uniform interior so compute directly
        let spans = (self.dim - self.order + 1) as f64;
        let s = (t.max(0.0) * spans).floor() as usize + k - 1;
        s.min(last)
    }

    /// Evaluate all `L` basis functions at `t`. Values outside [0, 1] are
    /// clamped to the boundary.
    pub fn eval(&self, t: f64) -> Array1<f64> {
        let mut out = Array1::zeros(self.dim);
        let (first, vals) = self.eval_local(t);
        for (i, v) in vals.into_iter().enumerate() {
            out[first + i] = v;
        }
        out
    }

    /// The `order` possibly-nonzero values at `t` and the index of the first.
    pub fn eval_local(&self, t: f64) -> (usize, Vec<f64>) {
        let t = t.clamp(0.0, 1.0);
        let k = self.order;
        let s = self.span(t);
        let u = &self.knots;
        // Cox-de Boor triangle (basis function values of increasing degree).
        let mut n = vec![0.0; k];
        let mut left = vec![0.0; k];
        let mut right = vec![0.0; k];
        n[0] = 1.0;
        for j in 1..k {
            left[j] = t - u[s + 1 - j];
            right[j] = u[s + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom > 0.0 { n[r] / denom } else { 0.0 };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        (s + 1 - k, n)
    }

    /// Greville abscissae: coefficients reproducing the identity `t`.
    pub fn greville(&self) -> Vec<f64> {
        let k = self.order;
        (0..self.dim)
            .map(|j| self.knots[j + 1..j + k].iter().sum::<f64>() / (k - 1) as f64)
            .collect()
    }

    /// Composite Gauss rule with `order + 2` nodes per knot span; exact for
    /// products of two splines of this order.
    pub fn exact_rule(&self) -> CompositeRule {
        CompositeRule::new(&self.breakpoints(), self.order + 2)
    }

    /// `Ω_0 = ∫ B_0 B_0^T`.
    pub fn gram(&self) -> Array2<f64> {
        let rule = self.exact_rule();
        let mut g = Array2::zeros((self.dim, self.dim));
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let (first, vals) = self.eval_local(t);
            for (a, va) in vals.iter().enumerate() {
                for (b, vb) in vals.iter().enumerate() {
                    g[[first + a, first + b]] += w * va * vb;
                }
            }
        }
        g
    }

    /// Extreme eigenvalues of `Ω_0`, each multiplied by `L` (the constants
    /// `C_1`, `C_2` of the `C/L` bracket).
    pub fn gram_eigen_bracket(&self) -> (f64, f64) {
        let ev = symmetric_eigenvalues(&self.gram());
        let l = self.dim as f64;
        (ev[0] * l, ev[ev.len() - 1] * l)
    }
}

/// The orthonormalized basis `B̄(t) = A_0 B_0(t)`.
#[derive(Debug, Clone)]
pub struct OrthoBasis {
    raw: RawBasis,
    a0: Array2<f64>,
    gram_tolerance: f64,
    gram_deviation: f64,
    transform_eigen: (f64, f64),
}

impl OrthoBasis {
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        Self::orthonormalize(RawBasis::new(dim, order)?)
    }

    pub fn orthonormalize(raw: RawBasis) -> Result<Self> {
        let l = raw.dim();
        let lf = l as f64;
        let omega = raw.gram();
        let inner = |a: &Array1<f64>, b: &Array1<f64>| a.dot(&omega.dot(b));

        let mut rows: Vec<Array1<f64>> = Vec::with_capacity(l);
        rows.push(Array1::from_elem(l, 1.0 / lf.sqrt()));
        let scale2 = (12.0 / lf).sqrt();
        rows.push(Array1::from_iter(
            raw.greville().into_iter().map(|x| scale2 * (x - 0.5)),
        ));

        // Elements 2..L-1 (1-based) in order, then L and 1 as fallbacks.
        let candidates = (1..l - 1).chain([l - 1, 0]);
        for c in candidates {
            if rows.len() == l {
                break;
            }
            let mut v = Array1::zeros(l);
            v[c] = 1.0;
            let start = inner(&v, &v).sqrt();
            for _ in 0..2 {
                for r in &rows {
                    let coef = inner(&v, r) / inner(r, r);
                    v.scaled_add(-coef, r);
                }
            }
            let norm = inner(&v, &v).sqrt();
            if norm < SKIP_TOLERANCE * start {
                continue;
            }
            v *= 1.0 / (norm * lf.sqrt());
            rows.push(v);
        }
        if rows.len() < l {
            return Err(Error::DegenerateBasis { needed: l });
        }

        let mut a0 = Array2::zeros((l, l));
        for (i, r) in rows.iter().enumerate() {
            a0.row_mut(i).assign(r);
        }
        let bar = a0.dot(&omega).dot(&a0.t()) * lf;
        let mut dev: f64 = 0.0;
        for i in 0..l {
            for j in 0..l {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((bar[[i, j]] - target).abs());
            }
        }
        let gram_tolerance = 1e-10;
        if dev > gram_tolerance {
            return Err(Error::DegenerateBasis { needed: l });
        }
        let ev = symmetric_eigenvalues(&a0.dot(&a0.t()));
        Ok(Self {
            raw,
            a0,
            gram_tolerance,
            gram_deviation: dev,
            transform_eigen: (ev[0], ev[ev.len() - 1]),
        })
    }

    pub fn dim(&self) -> usize {
        self.raw.dim()
    }

    pub fn order(&self) -> usize {
        self.raw.order()
    }

    pub fn raw(&self) -> &RawBasis {
        &self.raw
    }

    /// The `L × L` transform `A_0`.
    pub fn transform(&self) -> &Array2<f64> {
        &self.a0
    }

    pub fn gram_tolerance(&self) -> f64 {
        self.gram_tolerance
    }

    /// Max-abs deviation of `L ∫ B̄ B̄^T` from the identity, measured at
    /// construction.
    pub fn gram_deviation(&self) -> f64 {
        self.gram_deviation
    }

    /// (min, max) eigenvalues of `A_0 A_0^T`.
    pub fn transform_eigen(&self) -> (f64, f64) {
        self.transform_eigen
    }

    pub fn eval(&self, t: f64) -> Result<Array1<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(t));
        }
        Ok(self.eval_unchecked(t))
    }

    /// `B̄(t)` without the domain check (t is clamped).
    pub fn eval_unchecked(&self, t: f64) -> Array1<f64> {
        let (first, vals) = self.raw.eval_local(t);
        let mut out = Array1::zeros(self.dim());
        for (k, v) in vals.iter().enumerate() {
            out.scaled_add(*v, &self.a0.column(first + k));
        }
        out
    }

    /// `∫ B̄ B̄^T` computed with the exact rule.
    pub fn gram(&self) -> Array2<f64> {
        let rule = self.raw.exact_rule();
        let l = self.dim();
        let mut g = Array2::zeros((l, l));
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let b = self.eval_unchecked(t);
            for i in 0..l {
                for j in 0..l {
                    g[[i, j]] += w * b[i] * b[j];
                }
            }
        }
        g
    }

    /// A rule accurate for smooth non-polynomial integrands.
    pub fn projection_rule(&self) -> CompositeRule {
        CompositeRule::new(&self.raw.breakpoints(), PROJECTION_NODES)
    }

    /// Least-squares projection of `g` onto span(B̄).
    pub fn project(&self, g: impl Fn(f64) -> f64) -> ProjectedFunction {
        let l = self.dim();
        let rule = self.projection_rule();
        let mut c = Array1::<f64>::zeros(l);
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            let gt = g(t);
            c.scaled_add(w * gt, &self.eval_unchecked(t));
        }
        // Gram matrix is I / L.
        c *= l as f64;
        let sup_error = (0..SUP_GRID)
            .map(|i| {
                let t = i as f64 / (SUP_GRID - 1) as f64;
                (g(t) - self.eval_unchecked(t).dot(&c)).abs()
            })
            .fold(0.0, f64::max);
        ProjectedFunction {
            gamma1: c[0],
            gamma_rest: c.slice(ndarray::s![1..]).to_owned(),
            sup_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedFunction {
    /// Coefficient of the constant basis element.
    pub gamma1: f64,
    /// Coefficients of `b_2, ..., b_L`.
    pub gamma_rest: Array1<f64>,
    /// Max |g - B̄^T γ| over a 1000-point grid.
    pub sup_error: f64,
}

impl ProjectedFunction {
    pub fn coefficients(&self) -> Array1<f64> {
        let mut c = Array1::zeros(self.gamma_rest.len() + 1);
        c[0] = self.gamma1;
        c.slice_mut(ndarray::s![1..]).assign(&self.gamma_rest);
        c
    }
}
