//! Censored survival data: containers, CSV ingestion and synthetic
//! generation.

mod csv_io;
mod simulate;
mod truth;

pub use csv_io::{load_csv, read_csv, write_csv};
pub use simulate::{
    ar1_normals, copula_row, gen_copula_covariates, inverse_hazard_sample, normal_cdf, simulate,
    subject_rng, SubjectRng,
};
pub use truth::{CovariateRange, GFunction, PartStructure, TruthSpec};

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};

/// End of the observation window for time-varying coefficient models.
pub const TAU: f64 = 1.0;

/// Model family. Determines how covariates are expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Coefficients are functions of time: `exp{X^T g(t)}`.
    TimeVarying,
    /// Coefficients are functions of an index variable `Z`.
    IndexVc,
    /// `exp{Σ g_j(X_j)}`.
    Additive,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::TimeVarying => "time-varying",
            Family::IndexVc => "index-vc",
            Family::Additive => "additive",
        }
    }

    /// Whether covariates enter through the basis and must lie in [0, 1].
    pub fn covariates_in_unit_interval(self) -> bool {
        matches!(self, Family::IndexVc | Family::Additive)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "time-varying" | "timevarying" | "tv" => Ok(Family::TimeVarying),
            "index-vc" | "indexvc" | "index" => Ok(Family::IndexVc),
            "additive" => Ok(Family::Additive),
            other => Err(Error::Config(format!("unknown family `{other}`"))),
        }
    }
}

/// `n` subjects with observed time, event indicator and time-independent
/// covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    times: Vec<f64>,
    status: Vec<bool>,
    covariates: Array2<f64>,
    index: Option<Vec<f64>>,
    family: Family,
}

impl SurvivalDataset {
    /// Validates and builds a dataset. For the time-varying family,
    /// observations beyond `TAU` are censored at `TAU`.
    pub fn new(
        mut times: Vec<f64>,
        mut status: Vec<bool>,
        covariates: Array2<f64>,
        index: Option<Vec<f64>>,
        family: Family,
    ) -> Result<Self> {
        let n = times.len();
        if status.len() != n || covariates.nrows() != n {
            return Err(Error::Dataset(format!(
                "length mismatch: {} times, {} statuses, {} covariate rows",
                n,
                status.len(),
                covariates.nrows()
            )));
        }
        if let Some((i, t)) = times.iter().enumerate().find(|(_, t)| !(**t > 0.0)) {
            return Err(Error::Dataset(format!(
                "subject {i}: time must be positive, got {t}"
            )));
        }
        if covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::Dataset("non-finite covariate value".into()));
        }
        match (&index, family) {
            (None, Family::IndexVc) => {
                return Err(Error::Dataset("index-vc family requires an index column".into()))
            }
            (Some(z), _) if z.len() != n => {
                return Err(Error::Dataset("index length mismatch".into()))
            }
            _ => {}
        }
        if family == Family::TimeVarying {
            for (t, d) in times.iter_mut().zip(status.iter_mut()) {
                if *t > TAU {
                    *t = TAU;
                    *d = false;
                }
            }
        }
        Ok(Self {
            times,
            status,
            covariates,
            index,
            family,
        })
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn status(&self) -> &[bool] {
        &self.status
    }

    pub fn covariates(&self) -> &Array2<f64> {
        &self.covariates
    }

    pub fn index(&self) -> Option<&[f64]> {
        self.index.as_deref()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn events(&self) -> usize {
        self.status.iter().filter(|d| **d).count()
    }

    pub fn censoring_fraction(&self) -> f64 {
        1.0 - self.events() as f64 / self.n() as f64
    }

    /// Empirical `C_X = max |X_ij|`.
    pub fn covariate_bound(&self) -> f64 {
        self.covariates.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Same subjects with covariates multiplied by `factor`.
    pub fn scale_covariates(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.covariates.mapv_inplace(|v| v * factor);
        out
    }

    /// A copy with subjects reordered by `perm` (`perm[k]` is the source row).
    pub fn permute(&self, perm: &[usize]) -> Self {
        let n = self.n();
        assert_eq!(perm.len(), n);
        let mut covariates = Array2::zeros(self.covariates.dim());
        for (k, &src) in perm.iter().enumerate() {
            covariates.row_mut(k).assign(&self.covariates.row(src));
        }
        Self {
            times: perm.iter().map(|&i| self.times[i]).collect(),
            status: perm.iter().map(|&i| self.status[i]).collect(),
            covariates,
            index: self
                .index
                .as_ref()
                .map(|z| perm.iter().map(|&i| z[i]).collect()),
            family: self.family,
        }
    }

    /// Concatenation of two datasets of the same family and width.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.p() != other.p() || self.family != other.family {
            return Err(Error::Dataset("cannot concatenate incompatible datasets".into()));
        }
        let covariates =
            ndarray::concatenate(ndarray::Axis(0), &[self.covariates.view(), other.covariates.view()])
                .map_err(|e| Error::Dataset(e.to_string()))?;
        let index = match (&self.index, &other.index) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).copied().collect()),
            _ => None,
        };
        Self::new(
            self.times.iter().chain(&other.times).copied().collect(),
            self.status.iter().chain(&other.status).copied().collect(),
            covariates,
            index,
            self.family,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_nonpositive_times() {
        let err = SurvivalDataset::new(
            vec![1.0, 0.0],
            vec![true, false],
            array![[0.1], [0.2]],
            None,
            Family::Additive,
        )
        .unwrap_err();
        assert!(err.to_string().contains("subject 1"));
    }

    #[test]
    fn time_varying_truncates_at_tau() {
        let d = SurvivalDataset::new(
            vec![0.5, 1.7],
            vec![true, true],
            array![[0.1], [0.2]],
            None,
            Family::TimeVarying,
        )
        .unwrap();
        assert_eq!(d.times(), &[0.5, 1.0]);
        assert_eq!(d.status(), &[true, false]);
    }

    #[test]
    fn index_family_requires_index() {
        assert!(SurvivalDataset::new(
            vec![1.0],
            vec![true],
            array![[0.3]],
            None,
            Family::IndexVc
        )
        .is_err());
    }

    #[test]
    fn family_round_trips_through_name() {
        for f in [Family::TimeVarying, Family::IndexVc, Family::Additive] {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
    }
}
