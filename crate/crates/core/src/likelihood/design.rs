use std::sync::Arc;

use ndarray::{s, Array1, Array2};

use super::layout::GroupLayout;
use crate::basis::OrthoBasis;
use crate::error::{Error, Result};
use crate::survival::{Family, SurvivalDataset};

/// Subjects failing at one distinct event time.
#[derive(Debug, Clone, PartialEq)]
pub struct EventGroup {
    pub time: f64,
    /// Index into the event-time list (ascending).
    pub index: usize,
    /// Size of the risk set `{k : T_k >= time}`; the risk set is the first
    /// `risk_len` entries of [`DesignExpansion::order`].
    pub risk_len: usize,
    pub subjects: Vec<usize>,
}

impl EventGroup {
    pub fn multiplicity(&self) -> usize {
        self.subjects.len()
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Rows {
    /// `W_i` does not depend on time; one row per subject.
    Static(Array2<f64>),
    /// `W_i(t) = X_i ⊗ B̄(t)`, stored as the covariates plus `B̄` at each
    /// event time.
    TimeVarying { x: Array2<f64>, basis: Array2<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DesignOptions {
    /// Put the index-model intercept block `g_0` under the penalty.
    pub penalize_intercept: bool,
}

/// Expanded covariates `W_i(t)` with the risk-set structure of the data.
#[derive(Debug, Clone)]
pub struct DesignExpansion {
    family: Family,
    n: usize,
    p: usize,
    basis_dim: usize,
    layout: Arc<GroupLayout>,
    times: Vec<f64>,
    status: Vec<bool>,
    order: Vec<usize>,
    events: Vec<EventGroup>,
    pub(crate) rows: Rows,
}

/// Builds `W` for the family of `data` with default options.
pub fn expand_design(data: &SurvivalDataset, basis: &OrthoBasis) -> Result<DesignExpansion> {
    expand_design_with(data, basis, DesignOptions::default())
}

pub fn expand_design_with(
    data: &SurvivalDataset,
    basis: &OrthoBasis,
    options: DesignOptions,
) -> Result<DesignExpansion> {
    let n = data.n();
    let p = data.p();
    let l = basis.dim();
    let family = data.family();
    let layout = Arc::new(GroupLayout::new(family, p, l, options.penalize_intercept));
    let x = data.covariates();

    if family.covariates_in_unit_interval() {
        for ((i, j), &v) in x.indexed_iter() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::CovariateDomain {
                    subject: i,
                    covariate: j,
                    value: v,
                });
            }
        }
    }

    let times = data.times().to_vec();
    let status = data.status().to_vec();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]).then(a.cmp(&b)));

    // distinct event times, ascending
    let mut event_times: Vec<f64> = (0..n).filter(|&i| status[i]).map(|i| times[i]).collect();
    event_times.sort_by(f64::total_cmp);
    event_times.dedup();
    let events: Vec<EventGroup> = event_times
        .iter()
        .enumerate()
        .map(|(index, &t)| EventGroup {
            time: t,
            index,
            risk_len: order.iter().take_while(|&&k| times[k] >= t).count(),
            subjects: (0..n).filter(|&i| status[i] && times[i] == t).collect(),
        })
        .collect();

    let rows = match family {
        Family::TimeVarying => {
            let mut b = Array2::zeros((events.len(), l));
            for e in &events {
                b.row_mut(e.index).assign(&basis.eval(e.time.min(1.0))?);
            }
            Rows::TimeVarying { x: x.clone(), basis: b }
        }
        Family::IndexVc => {
            let z = data
                .index()
                .ok_or_else(|| Error::Dataset("index-vc family requires an index".into()))?;
            let mut w = Array2::zeros((n, layout.dim()));
            for i in 0..n {
                let zi = z[i];
                if !(0.0..=1.0).contains(&zi) {
                    return Err(Error::Domain(zi));
                }
                let bz = basis.eval(zi)?;
                w.slice_mut(s![i, 0..l - 1]).assign(&bz.slice(s![1..]));
                for j in 0..p {
                    let start = (l - 1) + j * l;
                    let xij = x[[i, j]];
                    w.slice_mut(s![i, start..start + l]).assign(&(&bz * xij));
                }
            }
            Rows::Static(w)
        }
        Family::Additive => {
            let mut w = Array2::zeros((n, layout.dim()));
            for i in 0..n {
                for j in 0..p {
                    let bx = basis.eval(x[[i, j]])?;
                    let start = j * (l - 1);
                    w.slice_mut(s![i, start..start + l - 1]).assign(&bx.slice(s![1..]));
                }
            }
            Rows::Static(w)
        }
    };

    Ok(DesignExpansion {
        family,
        n,
        p,
        basis_dim: l,
        layout,
        times,
        status,
        order,
        events,
        rows,
    })
}

impl DesignExpansion {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn basis_dim(&self) -> usize {
        self.basis_dim
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn layout(&self) -> &Arc<GroupLayout> {
        &self.layout
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn status(&self) -> &[bool] {
        &self.status
    }

    /// Subjects sorted by decreasing observed time.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn events(&self) -> &[EventGroup] {
        &self.events
    }

    pub fn event_count(&self) -> usize {
        self.status.iter().filter(|d| **d).count()
    }

    pub fn risk_set_sizes(&self) -> Vec<(f64, usize, usize)> {
        self.events
            .iter()
            .map(|e| (e.time, e.risk_len, e.multiplicity()))
            .collect()
    }

    /// `W_i(t)` at the event time of `event` (any subject, any event).
    pub fn row_at(&self, subject: usize, event: usize) -> Array1<f64> {
        match &self.rows {
            Rows::Static(w) => w.row(subject).to_owned(),
            Rows::TimeVarying { x, basis } => {
                let b = basis.row(event);
                let mut out = Array1::zeros(self.dim());
                for j in 0..self.p {
                    let l = self.basis_dim;
                    out.slice_mut(s![j * l..(j + 1) * l])
                        .assign(&(&b * x[[subject, j]]));
                }
                out
            }
        }
    }

    /// Time-independent design matrix, when the family has one.
    pub fn static_rows(&self) -> Option<&Array2<f64>> {
        match &self.rows {
            Rows::Static(w) => Some(w),
            Rows::TimeVarying { .. } => None,
        }
    }

    /// Same rows regrouped under another block layout of equal dimension.
    pub fn with_layout(&self, layout: GroupLayout) -> Result<Self> {
        if layout.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: layout.dim(),
            });
        }
        Ok(Self {
            layout: Arc::new(layout),
            ..self.clone()
        })
    }

    /// A design with every subject duplicated `times` times.
    pub fn replicate(data: &SurvivalDataset, basis: &OrthoBasis, times: usize) -> Result<Self> {
        let mut d = data.clone();
        for _ in 1..times {
            d = d.concat(data)?;
        }
        expand_design(&d, basis)
    }
}
