use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use super::Family;
use crate::error::{Error, Result};
use crate::quadrature::CompositeRule;

/// Coefficient functions available to simulation configs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GFunction {
    Zero,
    /// `c`
    Const(f64),
    /// `a·u`
    Lin(f64),
    /// `a·u²`
    Quad(f64),
    /// `sin(2πu)`
    Sin1,
    /// `2^{-1/2} cos(2πu) + (u - 1/2)`
    Cos1PlusLin,
    /// `a·(u - 1/2)`; `a = √2` when written without an argument.
    CenteredLin(f64),
}

impl GFunction {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            GFunction::Zero => 0.0,
            GFunction::Const(c) => c,
            GFunction::Lin(a) => a * u,
            GFunction::Quad(a) => a * u * u,
            GFunction::Sin1 => (2.0 * PI * u).sin(),
            GFunction::Cos1PlusLin => (2.0 * PI * u).cos() / SQRT_2 + (u - 0.5),
            GFunction::CenteredLin(a) => a * (u - 0.5),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            GFunction::Zero => true,
            GFunction::Const(c) | GFunction::Lin(c) | GFunction::Quad(c) => c == 0.0,
            GFunction::CenteredLin(a) => a == 0.0,
            _ => false,
        }
    }

    /// Orthogonal decomposition into constant, linear and nonlinear parts.
    pub fn parts(&self) -> PartStructure {
        let rule = CompositeRule::uniform(0.0, 1.0, 64, 8);
        let constant = rule.integrate(|u| self.eval(u));
        let slope = 12.0 * rule.integrate(|u| self.eval(u) * (u - 0.5));
        let nonconst_sq = rule.integrate(|u| (self.eval(u) - constant).powi(2));
        let nonlin_sq =
            rule.integrate(|u| (self.eval(u) - constant - slope * (u - 0.5)).powi(2));
        PartStructure {
            constant,
            slope,
            nonconstant_norm: nonconst_sq.max(0.0).sqrt(),
            nonlinear_norm: nonlin_sq.max(0.0).sqrt(),
        }
    }
}

impl fmt::Display for GFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GFunction::Zero => write!(f, "zero"),
            GFunction::Const(c) => write!(f, "const({c})"),
            GFunction::Lin(a) => write!(f, "lin({a})"),
            GFunction::Quad(a) => write!(f, "quad({a})"),
            GFunction::Sin1 => write!(f, "sin1"),
            GFunction::Cos1PlusLin => write!(f, "cos1_plus_lin"),
            GFunction::CenteredLin(a) => write!(f, "centered_lin({a})"),
        }
    }
}

impl FromStr for GFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.find('(') {
            Some(open) => {
                let close = s
                    .rfind(')')
                    .filter(|&c| c > open)
                    .ok_or_else(|| Error::Config(format!("unbalanced parentheses in `{s}`")))?;
                let arg = s[open + 1..close]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad numeric argument in `{s}`")))?;
                (s[..open].trim(), Some(arg))
            }
            None => (s, None),
        };
        let need = |a: Option<f64>| {
            a.ok_or_else(|| Error::Config(format!("`{name}` requires an argument")))
        };
        match (name, arg) {
            ("zero", None) => Ok(GFunction::Zero),
            ("const", a) => Ok(GFunction::Const(need(a)?)),
            ("lin", a) => Ok(GFunction::Lin(need(a)?)),
            ("quad", a) => Ok(GFunction::Quad(need(a)?)),
            ("sin1", None) => Ok(GFunction::Sin1),
            ("cos1_plus_lin", None) => Ok(GFunction::Cos1PlusLin),
            ("centered_lin", a) => Ok(GFunction::CenteredLin(a.unwrap_or(SQRT_2))),
            _ => Err(Error::Config(format!("unknown coefficient function `{s}`"))),
        }
    }
}

/// Orthogonal parts of a coefficient function on [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartStructure {
    /// `g_c = ∫ g`.
    pub constant: f64,
    /// Coefficient on `(u - 1/2)`.
    pub slope: f64,
    /// `‖g - g_c‖`.
    pub nonconstant_norm: f64,
    /// `‖g - g_c - slope (u - 1/2)‖`.
    pub nonlinear_norm: f64,
}

const PART_TOL: f64 = 1e-10;

impl PartStructure {
    pub fn has_constant(&self) -> bool {
        self.constant.abs() > PART_TOL
    }
    pub fn has_nonconstant(&self) -> bool {
        self.nonconstant_norm > PART_TOL
    }
    pub fn has_linear(&self) -> bool {
        self.slope.abs() > PART_TOL
    }
    pub fn has_nonlinear(&self) -> bool {
        self.nonlinear_norm > PART_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariateRange {
    /// U(0, 1) marginals.
    Unit,
    /// Affinely mapped to U(-1, 1).
    Symmetric,
}

impl FromStr for CovariateRange {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "unit" => Ok(CovariateRange::Unit),
            "symmetric" => Ok(CovariateRange::Symmetric),
            other => Err(Error::Config(format!("unknown covariate range `{other}`"))),
        }
    }
}

impl fmt::Display for CovariateRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CovariateRange::Unit => "unit",
            CovariateRange::Symmetric => "symmetric",
        })
    }
}

/// Data-generating process for simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSpec {
    pub family: Family,
    pub p: usize,
    /// Number of leading AR(1)-copula covariates.
    pub q: usize,
    pub rho: f64,
    /// `g_1..g_p`.
    pub functions: Vec<GFunction>,
    /// Index-model intercept function `g_0(z)`.
    pub g0: GFunction,
    /// Constant baseline hazard `λ_0`.
    pub baseline: f64,
    /// Rate of the exponential censoring distribution (mean `1 / rate`);
    /// zero disables censoring.
    pub censor_rate: f64,
    pub covariate_range: CovariateRange,
}

impl TruthSpec {
    /// All-zero coefficients.
    pub fn null(family: Family, p: usize, q: usize) -> Self {
        Self {
            family,
            p,
            q,
            rho: 0.3,
            functions: vec![GFunction::Zero; p],
            g0: GFunction::Zero,
            baseline: 0.5,
            censor_rate: 0.0,
            covariate_range: match family {
                Family::TimeVarying => CovariateRange::Symmetric,
                _ => CovariateRange::Unit,
            },
        }
    }

    /// Index-variable model of the first simulation table:
    /// `g_1 = g_2 = 1, g_3 = 4z, g_4 = 4z²`, censoring mean `1/0.85`.
    pub fn index_vc_table(p: usize, q: usize) -> Self {
        let mut t = Self::null(Family::IndexVc, p, q);
        t.functions[0] = GFunction::Const(1.0);
        t.functions[1] = GFunction::Const(1.0);
        t.functions[2] = GFunction::Lin(4.0);
        t.functions[3] = GFunction::Quad(4.0);
        t.censor_rate = 0.85;
        t
    }

    /// Additive model of the second simulation table, censoring mean `1/0.80`.
    pub fn additive_table(p: usize, q: usize) -> Self {
        let mut t = Self::null(Family::Additive, p, q);
        t.functions[0] = GFunction::CenteredLin(SQRT_2);
        t.functions[1] = GFunction::CenteredLin(SQRT_2);
        t.functions[2] = GFunction::Cos1PlusLin;
        t.functions[3] = GFunction::Sin1;
        t.censor_rate = 0.80;
        t
    }

    pub fn validate(&self) -> Result<()> {
        if self.functions.len() != self.p {
            return Err(Error::Config(format!(
                "{} coefficient functions for p = {}",
                self.functions.len(),
                self.p
            )));
        }
        if self.q > self.p {
            return Err(Error::Config(format!("q = {} exceeds p = {}", self.q, self.p)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho = {} outside [0, 1)", self.rho)));
        }
        if !(self.baseline > 0.0) || self.censor_rate < 0.0 {
            return Err(Error::Config("baseline must be positive and censor rate nonnegative".into()));
        }
        if self.family == Family::Additive && self.covariate_range != CovariateRange::Unit {
            return Err(Error::Config("additive family needs unit-range covariates".into()));
        }
        if self.family != Family::Additive {
            for (j, g) in self.functions.iter().enumerate() {
                let parts = g.parts();
                if parts.has_nonconstant() && !parts.has_constant() {
                    return Err(Error::Config(format!(
                        "g_{} has a non-constant part but zero constant part",
                        j + 1
                    )));
                }
            }
        }
        Ok(())
    }

    /// Indices (0-based) with nonzero "scalar" part: constant part for the
    /// varying coefficient families, linear part for the additive family.
    pub fn scalar_support(&self) -> Vec<usize> {
        self.support(|p| match self.family {
            Family::Additive => p.has_linear(),
            _ => p.has_constant(),
        })
    }

    /// Indices with nonzero "vector" part: non-constant (or nonlinear) part.
    pub fn vector_support(&self) -> Vec<usize> {
        self.support(|p| match self.family {
            Family::Additive => p.has_nonlinear(),
            _ => p.has_nonconstant(),
        })
    }

    fn support(&self, pred: impl Fn(&PartStructure) -> bool) -> Vec<usize> {
        self.functions
            .iter()
            .enumerate()
            .filter(|(_, g)| pred(&g.parts()))
            .map(|(j, _)| j)
            .collect()
    }

    /// `s_0 = s_c + s_n`.
    pub fn sparsity(&self) -> usize {
        self.scalar_support().len() + self.vector_support().len()
    }
}
