//! Replicated simulate → fit → select runs.

use rayon::prelude::*;

use crate::basis::OrthoBasis;
use crate::error::{Error, Result};
use crate::likelihood::{expand_design_with, standardize, DesignOptions, GroupCoefficients};
use crate::select::{extract_estimates, score_selection, threshold_select, Estimates, Grouping, SelectionResult, SelectionScores};
use crate::solver::{fit, FitOptions, PenaltySpec};
use crate::survival::{simulate, TruthSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub truth: TruthSpec,
    pub n: usize,
    pub basis_dim: usize,
    pub order: usize,
    pub penalty: PenaltySpec,
    pub penalize_intercept: bool,
    /// Fit in per-slot orthonormalized coordinates (see [`standardize`]).
    pub standardize: bool,
    pub t_lambdas: Vec<f64>,
    /// Score-table grouping; `None` means [`Grouping::table`].
    pub grouping: Option<Grouping>,
    pub replications: usize,
    pub seed: u64,
    pub fit: FitOptions,
}

#[derive(Debug, Clone)]
pub struct ReplicationOutcome {
    pub replication: u64,
    pub censoring: f64,
    pub estimates: Estimates,
    /// One selection per entry of `t_lambdas`.
    pub selections: Vec<SelectionResult>,
    pub kkt_residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub outcomes: Vec<ReplicationOutcome>,
    pub failures: Vec<(u64, String)>,
    /// `(t_λ, scores)`.
    pub scores: Vec<(f64, SelectionScores)>,
}

impl SimulationReport {
    pub fn mean_censoring(&self) -> f64 {
        let k = self.outcomes.len().max(1) as f64;
        self.outcomes.iter().map(|o| o.censoring).sum::<f64>() / k
    }

    pub fn unconverged(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.converged).count()
    }
}

/// Largest fraction of failed replications tolerated before aborting.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

impl Experiment {
    pub fn basis(&self) -> Result<OrthoBasis> {
        OrthoBasis::new(self.basis_dim, self.order)
    }

    pub fn run_replication(&self, basis: &OrthoBasis, replication: u64) -> Result<ReplicationOutcome> {
        let data = simulate(&self.truth, self.n, self.seed, replication)?;
        let design = expand_design_with(
            &data,
            basis,
            DesignOptions {
                penalize_intercept: self.penalize_intercept,
            },
        )?;
        let (res, gamma) = if self.standardize {
            let (sd, st) = standardize(&design)?;
            let res = fit(&sd, &self.penalty, &self.fit)?;
            let g = GroupCoefficients::new(st.to_original(res.gamma_hat.flat.view()), design.layout().clone());
            (res, g)
        } else {
            let res = fit(&design, &self.penalty, &self.fit)?;
            let g = res.gamma_hat.clone();
            (res, g)
        };
        let estimates = extract_estimates(&gamma, basis)?;
        let selections = self.t_lambdas.iter().map(|&t| threshold_select(&estimates, t)).collect();
        Ok(ReplicationOutcome {
            replication,
            censoring: data.censoring_fraction(),
            estimates,
            selections,
            kkt_residual: res.kkt_residual,
            converged: res.converged,
            iterations: res.iterations,
        })
    }

    /// Runs all replications; results do not depend on `parallel`.
    pub fn run(&self, parallel: bool) -> Result<SimulationReport> {
        let basis = self.basis()?;
        let reps: Vec<u64> = (0..self.replications as u64).collect();
        let runs: Vec<Result<ReplicationOutcome>> = if parallel {
            reps.par_iter().map(|&r| self.run_replication(&basis, r)).collect()
        } else {
            reps.iter().map(|&r| self.run_replication(&basis, r)).collect()
        };
        let mut outcomes = vec![];
        let mut failures = vec![];
        for (r, run) in reps.iter().zip(runs) {
            match run {
                Ok(o) => outcomes.push(o),
                Err(e) => failures.push((*r, e.to_string())),
            }
        }
        if failures.len() as f64 > MAX_FAILURE_FRACTION * self.replications as f64 {
            return Err(Error::Numerical(format!(
                "{} of {} replications failed; first: {}",
                failures.len(),
                self.replications,
                failures[0].1
            )));
        }
        let grouping = self
            .grouping
            .clone()
            .unwrap_or_else(|| Grouping::table(self.truth.p, self.truth.q));
        let scores = self
            .t_lambdas
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let sel: Vec<SelectionResult> = outcomes.iter().map(|o| o.selections[k].clone()).collect();
                Ok((t, score_selection(&sel, &self.truth, &grouping)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SimulationReport {
            outcomes,
            failures,
            scores,
        })
    }
}
