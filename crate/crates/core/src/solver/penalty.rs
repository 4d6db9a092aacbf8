use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::likelihood::{Block, GroupLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyKind {
    /// `Σ_j w_j(|γ_1j| + |γ_-1j|)`
    P1,
    /// `Σ_j w_j{(|γ_1j|^q + |γ_-1j|^q)^{1/q} + |γ_-1j|}`
    Ph,
    /// `Σ_j w_j |γ_j|`
    GroupAll,
}

impl PenaltyKind {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::P1 => "p1",
            PenaltyKind::Ph => "ph",
            PenaltyKind::GroupAll => "group",
        }
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p1" => Ok(PenaltyKind::P1),
            "ph" => Ok(PenaltyKind::Ph),
            "group" | "groupall" | "group-all" => Ok(PenaltyKind::GroupAll),
            other => Err(Error::Config(format!("unknown penalty `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub q: f64,
    pub lambda: f64,
    /// Per-block multipliers; `None` means all ones.
    pub weights: Option<Vec<f64>>,
    /// Blocks excluded from the penalty in addition to the layout's own.
    pub unpenalized: Vec<usize>,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, lambda: f64) -> Self {
        Self {
            kind,
            q: 2.0,
            lambda,
            weights: None,
            unpenalized: Vec::new(),
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn validate(&self, layout: &GroupLayout) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Penalty(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if !(self.q > 1.0) {
            return Err(Error::Penalty(format!("exponent q must exceed 1, got {}", self.q)));
        }
        if self.kind == PenaltyKind::Ph && self.q != 2.0 {
            return Err(Error::UnsupportedExponent(self.q));
        }
        if let Some(w) = &self.weights {
            if w.len() != layout.blocks().len() {
                return Err(Error::Penalty(format!(
                    "expected {} block weights, got {}",
                    layout.blocks().len(),
                    w.len()
                )));
            }
            if let Some(bad) = w.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                return Err(Error::Penalty(format!("weights must be positive, got {bad}")));
            }
        }
        if let Some(&b) = self.unpenalized.iter().find(|&&b| b >= layout.blocks().len()) {
            return Err(Error::Penalty(format!("unpenalized block {b} out of range")));
        }
        Ok(())
    }

    pub fn is_penalized(&self, layout: &GroupLayout, b: usize) -> bool {
        layout.blocks()[b].penalized && !self.unpenalized.contains(&b)
    }

    pub fn weight(&self, b: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[b])
    }
}

fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Shrinks `v` toward zero by `t` in Euclidean norm.
pub fn block_soft_threshold(v: &mut [f64], t: f64) {
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm <= t {
        v.iter_mut().for_each(|x| *x = 0.0);
    } else {
        let c = 1.0 - t / nrm;
        v.iter_mut().for_each(|x| *x *= c);
    }
}

fn split(block: &Block, x: ArrayView1<f64>) -> (Option<f64>, Array1<f64>) {
    (
        block.scalar.map(|i| x[i]),
        x.slice(s![block.vector.clone()]).to_owned(),
    )
}

/// Block contribution to the penalty, before multiplying by `λ w`.
fn block_penalty(kind: PenaltyKind, scalar: Option<f64>, v: ArrayView1<f64>) -> f64 {
    let vn = norm(v);
    let Some(sv) = scalar else { return vn };
    match kind {
        PenaltyKind::P1 => sv.abs() + vn,
        PenaltyKind::Ph => sv.hypot(vn) + vn,
        PenaltyKind::GroupAll => sv.hypot(vn),
    }
}

/// `Penalty(γ)` without the factor `λ`.
pub fn penalty_value(gamma: ArrayView1<f64>, layout: &GroupLayout, spec: &PenaltySpec) -> f64 {
    layout
        .blocks()
        .iter()
        .enumerate()
        .filter(|(b, _)| spec.is_penalized(layout, *b))
        .map(|(b, block)| {
            let (sc, v) = split(block, gamma);
            spec.weight(b) * block_penalty(spec.kind, sc, v.view())
        })
        .sum()
}

/// `argmin_u ½|u − v|² + step·λ·Penalty(u)`.
pub fn prox(
    v: ArrayView1<f64>,
    layout: &GroupLayout,
    spec: &PenaltySpec,
    step: f64,
) -> Result<Array1<f64>> {
    if !(step > 0.0) {
        return Err(Error::Penalty(format!("prox step must be positive, got {step}")));
    }
    if spec.kind == PenaltyKind::Ph && spec.q != 2.0 {
        return Err(Error::UnsupportedExponent(spec.q));
    }
    let mut out = v.to_owned();
    for (b, block) in layout.blocks().iter().enumerate() {
        if !spec.is_penalized(layout, b) {
            continue;
        }
        let t = step * spec.lambda * spec.weight(b);
        if t == 0.0 {
            continue;
        }
        let mut vec: Vec<f64> = out.slice(s![block.vector.clone()]).to_vec();
        let mut scalar = block.scalar.map(|i| out[i]);
        match (spec.kind, scalar.as_mut()) {
            (_, None) => block_soft_threshold(&mut vec, t),
            (PenaltyKind::P1, Some(sv)) => {
                *sv = sv.signum() * (sv.abs() - t).max(0.0);
                block_soft_threshold(&mut vec, t);
            }
            (PenaltyKind::Ph, Some(sv)) => {
                block_soft_threshold(&mut vec, t);
                let mut whole = Vec::with_capacity(vec.len() + 1);
                whole.push(*sv);
                whole.extend_from_slice(&vec);
                block_soft_threshold(&mut whole, t);
                *sv = whole[0];
                vec.copy_from_slice(&whole[1..]);
            }
            (PenaltyKind::GroupAll, Some(sv)) => {
                let mut whole = Vec::with_capacity(vec.len() + 1);
                whole.push(*sv);
                whole.extend_from_slice(&vec);
                block_soft_threshold(&mut whole, t);
                *sv = whole[0];
                vec.copy_from_slice(&whole[1..]);
            }
        }
        if let (Some(i), Some(sv)) = (block.scalar, scalar) {
            out[i] = sv;
        }
        out.slice_mut(s![block.vector.clone()])
            .assign(&ArrayView1::from(&vec[..]));
    }
    Ok(out)
}

fn unit(v: &Array1<f64>) -> Array1<f64> {
    let n = norm(v.view());
    v / n
}

/// Distance from `−g` to `μ ∂ Penalty_b(γ_b)` for one block.
pub(crate) fn block_kkt(
    kind: PenaltyKind,
    mu: f64,
    scalar: Option<(f64, f64)>,
    v: &Array1<f64>,
    gv: &Array1<f64>,
) -> f64 {
    let vzero = v.iter().all(|x| *x == 0.0);
    let gvn = norm(gv.view());
    let group = |v: &Array1<f64>, gv: &Array1<f64>, mu: f64, vzero: bool| {
        if vzero {
            (norm(gv.view()) - mu).max(0.0)
        } else {
            norm((gv + &(unit(v) * mu)).view())
        }
    };
    let Some((sv, gs)) = scalar else {
        return group(v, gv, mu, vzero);
    };
    match kind {
        PenaltyKind::P1 => {
            let ds = if sv == 0.0 {
                (gs.abs() - mu).max(0.0)
            } else {
                (gs + mu * sv.signum()).abs()
            };
            ds.hypot(group(v, gv, mu, vzero))
        }
        PenaltyKind::GroupAll => {
            let mut u = Array1::zeros(v.len() + 1);
            u[0] = sv;
            u.slice_mut(s![1..]).assign(v);
            let mut g = Array1::zeros(v.len() + 1);
            g[0] = gs;
            g.slice_mut(s![1..]).assign(gv);
            group(&u, &g, mu, sv == 0.0 && vzero)
        }
        PenaltyKind::Ph => match (sv == 0.0, vzero) {
            (true, true) => (gs.hypot((gvn - mu).max(0.0)) - mu).max(0.0),
            (false, true) => (gs + mu * sv.signum()).abs().hypot((gvn - mu).max(0.0)),
            (true, false) => gs.abs().hypot(norm((gv + &(unit(v) * (2.0 * mu))).view())),
            (false, false) => {
                let un = sv.hypot(norm(v.view()));
                let ds = gs + mu * sv / un;
                let dv = gv + &(v * (mu / un)) + &(unit(v) * mu);
                ds.hypot(norm(dv.view()))
            }
        },
    }
}

/// Dual norm of a block gradient: the smallest `μ` with zero block optimal.
pub(crate) fn block_dual(kind: PenaltyKind, gs: Option<f64>, gv: &Array1<f64>) -> f64 {
    let gvn = norm(gv.view());
    let Some(gs) = gs else { return gvn };
    match kind {
        PenaltyKind::P1 => gs.abs().max(gvn),
        PenaltyKind::GroupAll => gs.hypot(gvn),
        PenaltyKind::Ph => {
            if gs.abs() < gvn {
                (gs * gs + gvn * gvn) / (2.0 * gvn)
            } else {
                gs.abs()
            }
        }
    }
}

/// Maximum over blocks of the KKT violation at `gamma` given `grad = l̇_p(gamma)`.
pub fn kkt_from_gradient(
    gamma: ArrayView1<f64>,
    grad: ArrayView1<f64>,
    layout: &GroupLayout,
    spec: &PenaltySpec,
) -> f64 {
    layout
        .blocks()
        .iter()
        .enumerate()
        .map(|(b, block)| {
            let (sc, v) = split(block, gamma);
            let (gs, gv) = split(block, grad);
            if !spec.is_penalized(layout, b) {
                return gs.unwrap_or(0.0).hypot(norm(gv.view()));
            }
            let mu = spec.lambda * spec.weight(b);
            block_kkt(spec.kind, mu, sc.zip(gs), &v, &gv)
        })
        .fold(0.0, f64::max)
}
