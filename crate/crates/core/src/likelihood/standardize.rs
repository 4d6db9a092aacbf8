use ndarray::{s, Array1, Array2, ArrayView1};

use super::design::{DesignExpansion, Rows};
use crate::error::{Error, Result};

/// Block-diagonal reparametrization `γ = T β` that makes every penalized slot
/// orthonormal in the sample: `(1/n) W̃_gᵀ W̃_g = I` after centring.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    slots: Vec<(Vec<usize>, Array2<f64>)>,
    dim: usize,
}

impl Standardization {
    pub fn to_original(&self, beta: ArrayView1<f64>) -> Array1<f64> {
        let mut out = Array1::zeros(self.dim);
        for (coords, t) in &self.slots {
            let b = Array1::from_iter(coords.iter().map(|&i| beta[i]));
            for (k, &i) in coords.iter().enumerate() {
                out[i] = t.row(k).dot(&b);
            }
        }
        out
    }

    pub fn transform(&self, slot: usize) -> &Array2<f64> {
        &self.slots[slot].1
    }
}

/// Rewrites a time-independent design in standardized coordinates.
pub fn standardize(design: &DesignExpansion) -> Result<(DesignExpansion, Standardization)> {
    let Rows::Static(w) = &design.rows else {
        return Err(Error::Config(
            "standardization needs time-independent rows".into(),
        ));
    };
    let n = w.nrows() as f64;
    let mut slots = vec![];
    for blk in design.layout().blocks() {
        if let Some(i) = blk.scalar {
            slots.push(vec![i]);
        }
        if !blk.vector.is_empty() {
            slots.push(blk.vector.clone().collect());
        }
    }
    let mut out = w.clone();
    let mut transforms = Vec::with_capacity(slots.len());
    for coords in slots {
        let k = coords.len();
        let cols = Array2::from_shape_fn((w.nrows(), k), |(r, c)| w[[r, coords[c]]]);
        let mean = cols.mean_axis(ndarray::Axis(0)).unwrap();
        let centred = &cols - &mean;
        let cov = centred.t().dot(&centred) / n;
        let eig = nalgebra::SymmetricEigen::new(crate::linalg::to_dmatrix(&cov));
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let mut t = Array2::<f64>::zeros((k, k));
        for (e, &val) in eig.eigenvalues.iter().enumerate() {
            if val <= 1e-10 * top || val <= 0.0 {
                continue;
            }
            let v = eig.eigenvectors.column(e);
            let scale = 1.0 / val.sqrt();
            for a in 0..k {
                for b in 0..k {
                    t[[a, b]] += v[a] * v[b] * scale;
                }
            }
        }
        let newcols = cols.dot(&t);
        for (c, &i) in coords.iter().enumerate() {
            out.slice_mut(s![.., i]).assign(&newcols.column(c));
        }
        transforms.push((coords, t));
    }
    let mut std = design.clone();
    std.rows = Rows::Static(out);
    Ok((
        std,
        Standardization {
            slots: transforms,
            dim: design.dim(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::OrthoBasis;
    use crate::likelihood::{expand_design, neg_log_pl, value_and_gradient};
    use crate::survival::Family;
    use crate::testutil::{random_vec, signal_data};

    fn designs() -> Vec<DesignExpansion> {
        let b = OrthoBasis::new(5, 3).unwrap();
        [Family::IndexVc, Family::Additive]
            .into_iter()
            .map(|f| expand_design(&signal_data(f, 120, 4, 0.8, 3), &b).unwrap())
            .collect()
    }

    #[test]
    fn slots_are_orthonormal_after_centring() {
        for d in designs() {
            let (sd, _) = standardize(&d).unwrap();
            let w = sd.static_rows().unwrap();
            let n = w.nrows() as f64;
            for blk in sd.layout().blocks() {
                let mut slots: Vec<Vec<usize>> = blk.scalar.map(|i| vec![i]).into_iter().collect();
                slots.push(blk.vector.clone().collect());
                for coords in slots.into_iter().filter(|c| !c.is_empty()) {
                    let k = coords.len();
                    let cols = Array2::from_shape_fn((w.nrows(), k), |(r, c)| w[[r, coords[c]]]);
                    let centred = &cols - &cols.mean_axis(ndarray::Axis(0)).unwrap();
                    let cov = centred.t().dot(&centred) / n;
                    for a in 0..k {
                        for b in 0..k {
                            let want = if a == b { 1.0 } else { 0.0 };
                            assert!((cov[[a, b]] - want).abs() < 1e-9, "{a},{b}: {}", cov[[a, b]]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn likelihood_is_preserved_by_the_reparametrization() {
        for (s, d) in designs().into_iter().enumerate() {
            let (sd, st) = standardize(&d).unwrap();
            let beta = random_vec(d.dim(), 0.3, s as u64);
            let gamma = st.to_original(beta.view());
            let a = neg_log_pl(&sd, beta.view()).unwrap();
            let b = neg_log_pl(&d, gamma.view()).unwrap();
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            let (_, gb) = value_and_gradient(&sd, beta.view()).unwrap();
            let (_, gg) = value_and_gradient(&d, gamma.view()).unwrap();
            // chain rule: ∇β = Tᵀ ∇γ, slot by slot
            for (coords, t) in &st.slots {
                let g = Array1::from_iter(coords.iter().map(|&i| gg[i]));
                let want = t.t().dot(&g);
                for (k, &i) in coords.iter().enumerate() {
                    assert!((gb[i] - want[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn time_varying_rows_are_rejected() {
        let b = OrthoBasis::new(4, 3).unwrap();
        let d = expand_design(&signal_data(Family::TimeVarying, 30, 2, 0.5, 1), &b).unwrap();
        assert!(matches!(standardize(&d), Err(Error::Config(_))));
    }
}
