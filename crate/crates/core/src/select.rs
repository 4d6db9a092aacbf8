//! Structure selection from fitted blocks and scoring against a known truth.

use std::fmt::Write as _;

use ndarray::{s, Array1};

use crate::basis::OrthoBasis;
use crate::error::{Error, Result};
use crate::likelihood::GroupCoefficients;
use crate::survival::{Family, TruthSpec};

/// Per-covariate function estimates recovered from a coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates {
    pub family: Family,
    pub basis_dim: usize,
    /// `ĝ_cj` (linear coefficient `γ̂_2j / √L` for the additive family).
    pub g_c: Vec<f64>,
    /// `‖ĝ_nj‖`.
    pub g_n_norms: Vec<f64>,
    /// Coefficients of the non-constant (nonlinear) part per covariate.
    pub g_n_coef: Vec<Array1<f64>>,
}

pub fn extract_estimates(gamma: &GroupCoefficients, basis: &OrthoBasis) -> Result<Estimates> {
    let layout = &gamma.layout;
    let l = basis.dim();
    if layout.basis_dim() != l {
        return Err(Error::DimensionMismatch {
            expected: l,
            got: layout.basis_dim(),
        });
    }
    let root = (l as f64).sqrt();
    let mut est = Estimates {
        family: layout.family(),
        basis_dim: l,
        g_c: vec![],
        g_n_norms: vec![],
        g_n_coef: vec![],
    };
    for (b, blk) in layout.blocks().iter().enumerate() {
        if blk.covariate.is_none() {
            continue;
        }
        let v = gamma.vector(b).to_owned();
        est.g_c.push(gamma.scalar(b) / root);
        est.g_n_norms.push(v.dot(&v).sqrt() / root);
        est.g_n_coef.push(v);
    }
    Ok(est)
}

impl Estimates {
    pub fn p(&self) -> usize {
        self.g_c.len()
    }

    /// First basis index carried by the vector slot.
    fn vector_offset(&self) -> usize {
        match self.family {
            Family::Additive => 2,
            _ => 1,
        }
    }

    /// `ĝ_nj(t)`: the non-constant (additive: nonlinear) part.
    pub fn g_n_at(&self, basis: &OrthoBasis, j: usize, t: f64) -> Result<f64> {
        let b = basis.eval(t)?;
        let off = self.vector_offset();
        Ok(b.slice(s![off..]).dot(&self.g_n_coef[j]))
    }

    /// `ĝ_j(t)`; the additive family omits the unidentified constant.
    pub fn g_at(&self, basis: &OrthoBasis, j: usize, t: f64) -> Result<f64> {
        let b = basis.eval(t)?;
        let root = (self.basis_dim as f64).sqrt();
        let scalar = match self.family {
            Family::Additive => self.g_c[j] * root * b[1],
            _ => self.g_c[j],
        };
        Ok(scalar + self.g_n_at(basis, j, t)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub family: Family,
    /// `Ŝ_c` (additive: `Ŝ_lin`), 0-based covariate indices.
    pub s_c_hat: Vec<usize>,
    /// `Ŝ_n` (additive: `Ŝ_nonlin`).
    pub s_n_hat: Vec<usize>,
    pub g_c_hat: Vec<f64>,
    pub g_n_norms: Vec<f64>,
    pub t_lambda: f64,
    pub hierarchy_repaired: Vec<usize>,
}

pub fn threshold_select(est: &Estimates, t_lambda: f64) -> SelectionResult {
    let p = est.p();
    let mut s_c: Vec<usize> = (0..p).filter(|&j| est.g_c[j].abs() > t_lambda).collect();
    let s_n: Vec<usize> = (0..p).filter(|&j| est.g_n_norms[j] > t_lambda).collect();
    let mut repaired = vec![];
    if est.family != Family::Additive {
        for &j in &s_n {
            if !s_c.contains(&j) {
                repaired.push(j);
            }
        }
        s_c.extend(&repaired);
        s_c.sort_unstable();
    }
    SelectionResult {
        family: est.family,
        s_c_hat: s_c,
        s_n_hat: s_n,
        g_c_hat: est.g_c.clone(),
        g_n_norms: est.g_n_norms.clone(),
        t_lambda,
        hierarchy_repaired: repaired,
    }
}

/// Labelled partition of the covariates for score tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouping {
    pub groups: Vec<(String, Vec<usize>)>,
}

impl Grouping {
    /// `{X1,X2}, {X3,X4}, {X5..Xq}, {Xq+1..Xp}`.
    pub fn table(p: usize, q: usize) -> Self {
        let label = |a: usize, b: usize| match b - a {
            1 => format!("X{}", a + 1),
            2 => format!("X{},X{}", a + 1, b),
            _ => format!("X{}-X{}", a + 1, b),
        };
        let mut cuts = vec![0, 2.min(p), 4.min(p), q.clamp(4.min(p), p), p];
        cuts.dedup();
        let groups = cuts
            .windows(2)
            .map(|w| (label(w[0], w[1]), (w[0]..w[1]).collect()))
            .collect();
        Self { groups }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let mut seen = vec![false; p];
        for (name, g) in &self.groups {
            for &j in g {
                if j >= p || seen[j] {
                    return Err(Error::Config(format!(
                        "grouping is not a partition of 1..{p} (group {name}, X{})",
                        j + 1
                    )));
                }
                seen[j] = true;
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!("grouping misses X{}", j + 1)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreCell {
    /// `None` where the cell has no relevant parts.
    pub failure: Option<f64>,
    pub correct: f64,
    /// `None` where the cell has no irrelevant parts.
    pub false_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionScores {
    pub family: Family,
    pub replications: usize,
    /// `(group label, scalar-part cell, vector-part cell)`.
    pub cells: Vec<(String, ScoreCell, ScoreCell)>,
}

pub fn score_selection(
    results: &[SelectionResult],
    truth: &TruthSpec,
    grouping: &Grouping,
) -> Result<SelectionScores> {
    grouping.validate(truth.p)?;
    let sc = truth.scalar_support();
    let sn = truth.vector_support();
    let cell = |members: &[usize], support: &[usize], pick: &dyn Fn(&SelectionResult) -> &Vec<usize>| {
        let (mut missed, mut wrong, mut relevant, mut total) = (0usize, 0usize, 0usize, 0usize);
        for r in results {
            let chosen = pick(r);
            for &j in members {
                let rel = support.contains(&j);
                let sel = chosen.contains(&j);
                total += 1;
                if rel {
                    relevant += 1;
                    missed += usize::from(!sel);
                } else {
                    wrong += usize::from(sel);
                }
            }
        }
        let tot = total.max(1) as f64;
        ScoreCell {
            failure: (relevant > 0).then(|| missed as f64 / tot),
            correct: (total - missed - wrong) as f64 / tot,
            false_rate: (relevant < total).then(|| wrong as f64 / tot),
        }
    };
    let cells = grouping
        .groups
        .iter()
        .map(|(name, members)| {
            (
                name.clone(),
                cell(members, &sc, &|r| &r.s_c_hat),
                cell(members, &sn, &|r| &r.s_n_hat),
            )
        })
        .collect();
    Ok(SelectionScores {
        family: truth.family,
        replications: results.len(),
        cells,
    })
}

impl SelectionScores {
    pub fn part_names(&self) -> (&'static str, &'static str) {
        match self.family {
            Family::Additive => ("linear", "nonlinear"),
            _ => ("const", "non-const"),
        }
    }

    /// Rows `[Failure, Correct, False]`, two columns per group.
    pub fn rows(&self) -> [(&'static str, Vec<Option<f64>>); 3] {
        let pick = |f: &dyn Fn(&ScoreCell) -> Option<f64>| {
            self.cells
                .iter()
                .flat_map(|(_, a, b)| [f(a), f(b)])
                .collect::<Vec<_>>()
        };
        [
            ("Failure", pick(&|c| c.failure)),
            ("Correct", pick(&|c| Some(c.correct))),
            ("False", pick(&|c| c.false_rate)),
        ]
    }

    pub fn to_text(&self) -> String {
        let (a, b) = self.part_names();
        let w = 10;
        let mut out = String::new();
        let _ = write!(out, "{:<8}", "");
        for (name, _, _) in &self.cells {
            let _ = write!(out, "{:^width$}", name, width = 2 * w);
        }
        out.push('\n');
        let _ = write!(out, "{:<8}", "");
        for _ in &self.cells {
            let _ = write!(out, "{a:>w$}{b:>w$}");
        }
        out.push('\n');
        for (label, vals) in self.rows() {
            let _ = write!(out, "{label:<8}");
            for v in vals {
                match v {
                    Some(x) => {
                        let _ = write!(out, "{x:>w$.3}");
                    }
                    None => {
                        let _ = write!(out, "{:>w$}", "—");
                    }
                }
            }
            out.push('\n');
        }
        out
    }

    /// Long-format CSV; null cells are left empty.
    pub fn to_csv(&self) -> String {
        let (a, b) = self.part_names();
        let mut out = String::from("group,part,failure,correct,false\n");
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        for (name, ca, cb) in &self.cells {
            for (part, c) in [(a, ca), (b, cb)] {
                let _ = writeln!(
                    out,
                    "\"{name}\",{part},{},{:.6},{}",
                    fmt(c.failure),
                    c.correct,
                    fmt(c.false_rate)
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::GroupLayout;
    use crate::quadrature::CompositeRule;
    use crate::survival::GFunction;
    use std::sync::Arc;

    fn est(family: Family, g_c: Vec<f64>, g_n: Vec<f64>) -> Estimates {
        Estimates {
            family,
            basis_dim: 4,
            g_n_coef: g_n.iter().map(|_| Array1::zeros(3)).collect(),
            g_c,
            g_n_norms: g_n,
        }
    }

    #[test]
    fn constant_part_scaling() {
        let basis = OrthoBasis::new(6, 3).unwrap();
        let layout = Arc::new(GroupLayout::new(Family::TimeVarying, 1, 6, false));
        let mut flat = layout.zeros();
        flat[0] = 2.0 * 6f64.sqrt();
        let e = extract_estimates(&GroupCoefficients::new(flat, layout), &basis).unwrap();
        assert!((e.g_c[0] - 2.0).abs() < 1e-14);
        assert_eq!(e.g_n_norms[0], 0.0);
        assert_eq!(e.g_n_at(&basis, 0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn nonconstant_norm_matches_quadrature() {
        let basis = OrthoBasis::new(6, 3).unwrap();
        let rule = CompositeRule::uniform(0.0, 1.0, 60, 8);
        for fam in [Family::TimeVarying, Family::Additive] {
            let layout = Arc::new(GroupLayout::new(fam, 2, 6, false));
            let flat = crate::testutil::random_vec(layout.dim(), 2.0, 4);
            let e = extract_estimates(&GroupCoefficients::new(flat, layout), &basis).unwrap();
            for j in 0..2 {
                let sq = rule.integrate(|t| e.g_n_at(&basis, j, t).unwrap().powi(2));
                assert!((sq - e.g_n_norms[j].powi(2)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn threshold_examples() {
        let r = threshold_select(&est(Family::IndexVc, vec![0.0, 0.0], vec![0.0, 0.0]), 0.0);
        assert!(r.s_c_hat.is_empty() && r.s_n_hat.is_empty());
        let r = threshold_select(&est(Family::IndexVc, vec![0.05, 0.5], vec![0.0, 0.2]), 0.1);
        assert_eq!(r.s_c_hat, vec![1]);
        assert_eq!(r.s_n_hat, vec![1]);
        let r = threshold_select(&est(Family::TimeVarying, vec![0.05], vec![0.3]), 0.1);
        assert_eq!(r.s_c_hat, vec![0]);
        assert_eq!(r.hierarchy_repaired, vec![0]);
        let r = threshold_select(&est(Family::Additive, vec![0.05], vec![0.3]), 0.1);
        assert!(r.s_c_hat.is_empty());
    }

    #[test]
    fn thresholding_is_monotone() {
        for seed in 0..20 {
            let v = crate::testutil::random_vec(20, 1.0, seed);
            let e = est(Family::IndexVc, v.slice(s![..10]).to_vec(), v.slice(s![10..]).mapv(f64::abs).to_vec());
            let lo = threshold_select(&e, 0.2);
            let hi = threshold_select(&e, 0.5);
            assert!(hi.s_n_hat.iter().all(|j| lo.s_n_hat.contains(j)));
            let union = |r: &SelectionResult| {
                let mut u = r.s_c_hat.clone();
                u.extend(&r.s_n_hat);
                u
            };
            assert!(union(&hi).iter().all(|j| union(&lo).contains(j)));
        }
    }

    fn toy_truth() -> TruthSpec {
        let mut t = TruthSpec::null(Family::IndexVc, 6, 5);
        t.functions[0] = GFunction::Const(1.0);
        t.functions[1] = GFunction::Const(1.0);
        t.functions[2] = GFunction::Lin(4.0);
        t.functions[3] = GFunction::Quad(4.0);
        t
    }

    fn result(s_c: Vec<usize>, s_n: Vec<usize>) -> SelectionResult {
        SelectionResult {
            family: Family::IndexVc,
            s_c_hat: s_c,
            s_n_hat: s_n,
            g_c_hat: vec![],
            g_n_norms: vec![],
            t_lambda: 0.1,
            hierarchy_repaired: vec![],
        }
    }

    #[test]
    fn perfect_and_greedy_selectors() {
        let t = toy_truth();
        let g = Grouping::table(6, 5);
        assert_eq!(g.groups.len(), 4);
        let perfect = vec![result(vec![0, 1, 2, 3], vec![2, 3]); 3];
        let sc = score_selection(&perfect, &t, &g).unwrap();
        for (_, a, b) in &sc.cells {
            for c in [a, b] {
                assert_eq!(c.correct, 1.0);
                assert!(c.failure.unwrap_or(0.0) == 0.0 && c.false_rate.unwrap_or(0.0) == 0.0);
            }
        }
        let all = vec![result((0..6).collect(), (0..6).collect()); 2];
        let sc = score_selection(&all, &t, &g).unwrap();
        assert_eq!(sc.cells[0].2.false_rate, Some(1.0));
        assert_eq!(sc.cells[3].1.false_rate, Some(1.0));
        assert_eq!(sc.cells[0].1.failure, Some(0.0));
        assert_eq!(sc.cells[0].1.false_rate, None);
        assert_eq!(sc.cells[0].2.failure, None);
    }

    #[test]
    fn complement_identities() {
        let t = toy_truth();
        let g = Grouping::table(6, 5);
        let rs = vec![result(vec![0, 2, 4], vec![3, 5]), result(vec![1, 3], vec![2])];
        let sc = score_selection(&rs, &t, &g).unwrap();
        for (_, a, b) in &sc.cells {
            for c in [a, b] {
                let other = c.failure.or(c.false_rate).unwrap();
                assert!((c.correct + other - 1.0).abs() < 1e-15);
                assert!((0.0..=1.0).contains(&c.correct));
            }
        }
        let text = sc.to_text();
        assert!(text.contains("—") && text.contains("Failure") && text.contains("X5"));
        assert_eq!(sc.to_csv().lines().count(), 1 + 8);
    }

    #[test]
    fn bad_grouping_is_rejected() {
        let t = toy_truth();
        let g = Grouping {
            groups: vec![("a".into(), vec![0, 1]), ("b".into(), vec![1, 2, 3, 4, 5])],
        };
        assert!(matches!(score_selection(&[], &t, &g), Err(Error::Config(_))));
    }
}
