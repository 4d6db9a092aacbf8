use std::ops::Range;

use ndarray::{s, Array1, ArrayView1};

use crate::survival::Family;

/// One penalty group: an optional scalar slot (`γ_{1j}`, or the linear
/// coefficient `γ_{2j}` in the additive model) and a vector slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    /// Covariate index (0-based); `None` for the index-model intercept `g_0`.
    pub covariate: Option<usize>,
    pub scalar: Option<usize>,
    pub vector: Range<usize>,
    pub penalized: bool,
}

impl Block {
    pub fn range(&self) -> Range<usize> {
        let start = self.scalar.unwrap_or(self.vector.start);
        start..self.vector.end
    }

    pub fn len(&self) -> usize {
        self.range().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Block map of the coefficient vector for a model family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupLayout {
    family: Family,
    basis_dim: usize,
    blocks: Vec<Block>,
    dim: usize,
}

impl GroupLayout {
    /// Layout for `p` covariates and basis dimension `l`.
    ///
    /// * time-varying: `p` blocks of length `l` (`pL` total);
    /// * index-vc: an intercept block of length `l - 1` followed by `p`
    ///   blocks of length `l` (`(L-1) + pL`);
    /// * additive: `p` blocks of length `l - 1` (`p(L-1)`).
    pub fn new(family: Family, p: usize, l: usize, penalize_intercept: bool) -> Self {
        let mut blocks = Vec::with_capacity(p + 1);
        let mut offset = 0;
        if family == Family::IndexVc {
            blocks.push(Block {
                covariate: None,
                scalar: None,
                vector: 0..l - 1,
                penalized: penalize_intercept,
            });
            offset = l - 1;
        }
        let width = match family {
            Family::Additive => l - 1,
            _ => l,
        };
        for j in 0..p {
            let start = offset + j * width;
            blocks.push(Block {
                covariate: Some(j),
                scalar: Some(start),
                vector: start + 1..start + width,
                penalized: true,
            });
        }
        let dim = offset + p * width;
        Self {
            family,
            basis_dim: l,
            blocks,
            dim,
        }
    }

    /// A layout from explicit blocks (tests and synthetic problems).
    pub fn from_blocks(family: Family, basis_dim: usize, blocks: Vec<Block>) -> Self {
        let dim = blocks.iter().map(|b| b.range().end).max().unwrap_or(0);
        Self {
            family,
            basis_dim,
            blocks,
            dim,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn basis_dim(&self) -> usize {
        self.basis_dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Block belonging to covariate `j`.
    pub fn covariate_block(&self, j: usize) -> Option<&Block> {
        self.blocks.iter().find(|b| b.covariate == Some(j))
    }

    pub fn zeros(&self) -> Array1<f64> {
        Array1::zeros(self.dim)
    }
}

/// A coefficient vector together with its block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupCoefficients {
    pub flat: Array1<f64>,
    pub layout: std::sync::Arc<GroupLayout>,
}

impl GroupCoefficients {
    pub fn new(flat: Array1<f64>, layout: std::sync::Arc<GroupLayout>) -> Self {
        assert_eq!(flat.len(), layout.dim(), "coefficient length must match layout");
        Self { flat, layout }
    }

    pub fn zeros(layout: std::sync::Arc<GroupLayout>) -> Self {
        Self {
            flat: layout.zeros(),
            layout,
        }
    }

    /// Scalar slot of block `b` (zero when the block has none).
    pub fn scalar(&self, b: usize) -> f64 {
        self.layout.blocks()[b]
            .scalar
            .map_or(0.0, |i| self.flat[i])
    }

    pub fn vector(&self, b: usize) -> ArrayView1<'_, f64> {
        let r = self.layout.blocks()[b].vector.clone();
        self.flat.slice(s![r])
    }

    /// Split into per-block `(scalar, vector)` pairs.
    pub fn blocks(&self) -> Vec<(Option<f64>, Array1<f64>)> {
        self.layout
            .blocks()
            .iter()
            .map(|b| {
                (
                    b.scalar.map(|i| self.flat[i]),
                    self.flat.slice(s![b.vector.clone()]).to_owned(),
                )
            })
            .collect()
    }

    /// Inverse of [`blocks`](Self::blocks).
    pub fn from_blocks(
        parts: &[(Option<f64>, Array1<f64>)],
        layout: std::sync::Arc<GroupLayout>,
    ) -> Self {
        let mut flat = layout.zeros();
        for (b, (sc, v)) in layout.blocks().iter().zip(parts) {
            if let (Some(i), Some(x)) = (b.scalar, sc) {
                flat[i] = *x;
            }
            flat.slice_mut(s![b.vector.clone()]).assign(v);
        }
        Self { flat, layout }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn dimensions_per_family() {
        assert_eq!(GroupLayout::new(Family::TimeVarying, 2, 3, false).dim(), 6);
        assert_eq!(GroupLayout::new(Family::IndexVc, 2, 3, false).dim(), 8);
        assert_eq!(GroupLayout::new(Family::Additive, 2, 3, false).dim(), 4);
    }

    #[test]
    fn index_intercept_block_is_unpenalized_by_default() {
        let l = GroupLayout::new(Family::IndexVc, 3, 5, false);
        assert!(!l.blocks()[0].penalized);
        assert_eq!(l.blocks()[0].vector, 0..4);
        assert_eq!(l.blocks()[1].scalar, Some(4));
        let l = GroupLayout::new(Family::IndexVc, 3, 5, true);
        assert!(l.blocks()[0].penalized);
    }

    proptest! {
        #[test]
        fn block_split_round_trips(values in prop::collection::vec(-10.0f64..10.0, 23)) {
            // index-vc with p = 4, L = 4: 3 + 16 = 19; additive p = 5, L = 5: 20;
            // time-varying p = 5, L = 4: 20
            for layout in [
                GroupLayout::new(Family::IndexVc, 4, 4, false),
                GroupLayout::new(Family::Additive, 5, 5, false),
                GroupLayout::new(Family::TimeVarying, 5, 4, false),
            ] {
                let layout = Arc::new(layout);
                let flat = Array1::from_iter(values.iter().copied().take(layout.dim()));
                let g = GroupCoefficients::new(flat.clone(), layout.clone());
                let back = GroupCoefficients::from_blocks(&g.blocks(), layout);
                prop_assert_eq!(back.flat, flat);
            }
        }
    }
}
