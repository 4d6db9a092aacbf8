//! Run configuration files.
//!
//! One `key = value` pair per line. `#` starts a comment, blank lines are
//! ignored, keys may appear at most once and unknown keys are rejected.
//! Lists are comma separated. Coefficient functions are given as `g0`,
//! `g1` .. `gp` using the registry names of [`GFunction`]; unlisted ones are
//! zero. A `data` key selects a CSV source; otherwise the truth keys
//! describe a simulation. See `RunConfig::KEYS` for the full key list.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiment::Experiment;
use crate::select::Grouping;
use crate::solver::{FitOptions, PathGrid, PenaltyKind, PenaltySpec};
use crate::survival::{Family, GFunction, TruthSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    Path,
    Simulate,
    Diagnose,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Path => "path",
            Command::Simulate => "simulate",
            Command::Diagnose => "diagnose",
        }
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fit" => Ok(Command::Fit),
            "path" => Ok(Command::Path),
            "simulate" => Ok(Command::Simulate),
            "diagnose" => Ok(Command::Diagnose),
            other => Err(Error::Config(format!("unknown command `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, family: Family },
    Truth(TruthSpec),
}

impl DataSource {
    pub fn family(&self) -> Family {
        match self {
            DataSource::Csv { family, .. } => *family,
            DataSource::Truth(t) => t.family,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub source: DataSource,
    /// Sample size for simulated data.
    pub n: usize,
    pub basis_dim: usize,
    pub order: usize,
    pub penalty: PenaltySpec,
    /// One positive multiplier per block, whitespace or comma separated.
    pub weights_file: Option<PathBuf>,
    pub penalize_intercept: bool,
    pub standardize: bool,
    pub t_lambdas: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub output: PathBuf,
    /// Score-table grouping; `None` uses the table layout `{1,2},{3,4},{5..q},{q+1..p}`.
    pub grouping: Option<Grouping>,
    pub path: PathGrid,
    pub fit: FitOptions,
    pub xi: f64,
    pub cone_samples: usize,
    pub parallel: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Fit,
            source: DataSource::Truth(TruthSpec::null(Family::TimeVarying, 1, 0)),
            n: 300,
            basis_dim: 6,
            order: 3,
            penalty: PenaltySpec::new(PenaltyKind::P1, 0.1),
            weights_file: None,
            penalize_intercept: false,
            standardize: false,
            t_lambdas: vec![0.0],
            replications: 100,
            seed: 1,
            output: PathBuf::from("out"),
            grouping: None,
            path: PathGrid::default(),
            fit: FitOptions::default(),
            xi: 0.5,
            cone_samples: 2000,
            parallel: true,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true/false, got `{v}`"))),
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_num(key, s)).collect()
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// `1-2 | 3,4 | 5-8` (1-based, inclusive ranges).
pub fn parse_grouping(v: &str) -> Result<Grouping> {
    let mut groups = vec![];
    for part in v.split('|') {
        let mut idx = vec![];
        for item in part.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (a, b) = match item.split_once('-') {
                Some((a, b)) => (parse_num::<usize>("grouping", a)?, parse_num::<usize>("grouping", b)?),
                None => {
                    let a = parse_num::<usize>("grouping", item)?;
                    (a, a)
                }
            };
            if a == 0 || b < a {
                return Err(Error::Config(format!("grouping: bad range `{item}`")));
            }
            idx.extend(a - 1..b);
        }
        if idx.is_empty() {
            return Err(Error::Config("grouping: empty group".into()));
        }
        groups.push((group_label(&idx), idx));
    }
    Ok(Grouping { groups })
}

fn ranges(idx: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = vec![];
    for &j in idx {
        match out.last_mut() {
            Some((_, b)) if *b + 1 == j => *b = j,
            _ => out.push((j, j)),
        }
    }
    out
}

fn group_label(idx: &[usize]) -> String {
    ranges(idx)
        .iter()
        .map(|&(a, b)| match b - a {
            0 => format!("X{}", a + 1),
            1 => format!("X{},X{}", a + 1, b + 1),
            _ => format!("X{}-X{}", a + 1, b + 1),
        })
        .collect::<Vec<_>>()
        .join(",")
}

fn format_grouping(g: &Grouping) -> String {
    g.groups
        .iter()
        .map(|(_, idx)| {
            ranges(idx)
                .iter()
                .map(|&(a, b)| if a == b { format!("{}", a + 1) } else { format!("{}-{}", a + 1, b + 1) })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join(" | ")
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "command", "data", "family", "n", "p", "q", "rho", "lambda0", "censor_rate", "censor_mean",
        "covariates", "g0", "basis_dim", "order", "penalty", "penalty_q", "lambda", "weights_file",
        "penalize_intercept", "standardize", "t_lambda", "replications", "seed", "output", "grouping",
        "path_count", "path_ratio", "tol", "kkt_tol", "max_iter", "xi", "cone_samples", "parallel",
    ];

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv: BTreeMap<String, String> = BTreeMap::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", ln + 1)))?;
            let k = k.trim().to_string();
            let is_g = k.len() > 1 && k.starts_with('g') && k[1..].chars().all(|c| c.is_ascii_digit());
            if !is_g && !Self::KEYS.contains(&k.as_str()) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", ln + 1)));
            }
            if kv.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", ln + 1)));
            }
        }
        Self::from_map(kv)
    }

    fn from_map(mut kv: BTreeMap<String, String>) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut take = |k: &str| kv.remove(k);
        if let Some(v) = take("command") {
            c.command = v.parse()?;
        }
        let family: Family = take("family")
            .ok_or_else(|| Error::Config("missing key `family`".into()))?
            .parse()?;
        let data = take("data");
        let p: Option<usize> = take("p").map(|v| parse_num("p", &v)).transpose()?;
        let q: Option<usize> = take("q").map(|v| parse_num("q", &v)).transpose()?;
        let rho = take("rho");
        let lambda0 = take("lambda0");
        let rate = take("censor_rate");
        let mean = take("censor_mean");
        let range = take("covariates");
        let g0 = take("g0");
        if let Some(v) = take("n") {
            c.n = parse_num("n", &v)?;
        }
        if let Some(v) = take("basis_dim") {
            c.basis_dim = parse_num("basis_dim", &v)?;
        }
        if let Some(v) = take("order") {
            c.order = parse_num("order", &v)?;
        }
        if let Some(v) = take("penalty") {
            c.penalty.kind = v.parse()?;
        }
        if let Some(v) = take("penalty_q") {
            c.penalty.q = parse_num("penalty_q", &v)?;
        }
        if let Some(v) = take("lambda") {
            c.penalty.lambda = parse_num("lambda", &v)?;
        }
        c.weights_file = take("weights_file").map(PathBuf::from);
        if let Some(v) = take("penalize_intercept") {
            c.penalize_intercept = parse_bool("penalize_intercept", &v)?;
        }
        if let Some(v) = take("standardize") {
            c.standardize = parse_bool("standardize", &v)?;
        }
        if let Some(v) = take("t_lambda") {
            c.t_lambdas = parse_list("t_lambda", &v)?;
        }
        if let Some(v) = take("replications") {
            c.replications = parse_num("replications", &v)?;
        }
        if let Some(v) = take("seed") {
            c.seed = parse_num("seed", &v)?;
        }
        if let Some(v) = take("output") {
            c.output = PathBuf::from(v);
        }
        if let Some(v) = take("grouping") {
            c.grouping = Some(parse_grouping(&v)?);
        }
        if let Some(v) = take("path_count") {
            c.path.count = parse_num("path_count", &v)?;
        }
        if let Some(v) = take("path_ratio") {
            c.path.ratio = parse_num("path_ratio", &v)?;
        }
        if let Some(v) = take("tol") {
            c.fit.tol = parse_num("tol", &v)?;
        }
        if let Some(v) = take("kkt_tol") {
            c.fit.kkt_tol = parse_num("kkt_tol", &v)?;
        }
        if let Some(v) = take("max_iter") {
            c.fit.max_iter = parse_num("max_iter", &v)?;
        }
        if let Some(v) = take("xi") {
            c.xi = parse_num("xi", &v)?;
        }
        if let Some(v) = take("cone_samples") {
            c.cone_samples = parse_num("cone_samples", &v)?;
        }
        if let Some(v) = take("parallel") {
            c.parallel = parse_bool("parallel", &v)?;
        }
        let gs: Vec<(usize, String)> = kv
            .into_iter()
            .map(|(k, v)| Ok((parse_num::<usize>(&k, &k[1..])?, v)))
            .collect::<Result<_>>()?;
        c.source = match data {
            Some(path) => {
                if !gs.is_empty() || p.is_some() || g0.is_some() {
                    return Err(Error::Config("`data` cannot be combined with truth keys".into()));
                }
                DataSource::Csv {
                    path: PathBuf::from(path),
                    family,
                }
            }
            None => {
                let p = p.ok_or_else(|| Error::Config("missing key `p` (or `data`)".into()))?;
                let mut t = TruthSpec::null(family, p, q.unwrap_or(p));
                if let Some(v) = rho {
                    t.rho = parse_num("rho", &v)?;
                }
                if let Some(v) = lambda0 {
                    t.baseline = parse_num("lambda0", &v)?;
                }
                match (rate, mean) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config("give `censor_rate` or `censor_mean`, not both".into()))
                    }
                    (Some(v), None) => t.censor_rate = parse_num("censor_rate", &v)?,
                    (None, Some(v)) => {
                        let m: f64 = parse_num("censor_mean", &v)?;
                        t.censor_rate = if m > 0.0 { 1.0 / m } else { 0.0 };
                    }
                    (None, None) => {}
                }
                if let Some(v) = range {
                    t.covariate_range = v.parse()?;
                }
                if let Some(v) = g0 {
                    t.g0 = v.parse()?;
                }
                for (j, v) in gs {
                    if j == 0 || j > p {
                        return Err(Error::Config(format!("`g{j}` outside 1..{p}")));
                    }
                    t.functions[j - 1] = v.parse()?;
                }
                t.validate()?;
                DataSource::Truth(t)
            }
        };
        if let Some(g) = &c.grouping {
            if let DataSource::Truth(t) = &c.source {
                g.validate(t.p)?;
            }
        }
        Ok(c)
    }

    /// Fully resolved form; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut o = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(o, "{k} = {v}");
        };
        put("command", self.command.name().into());
        put("family", self.source.family().name().into());
        match &self.source {
            DataSource::Csv { path, .. } => put("data", path.display().to_string()),
            DataSource::Truth(t) => {
                put("n", self.n.to_string());
                put("p", t.p.to_string());
                put("q", t.q.to_string());
                put("rho", t.rho.to_string());
                put("lambda0", t.baseline.to_string());
                put("censor_rate", t.censor_rate.to_string());
                put("covariates", t.covariate_range.to_string());
                put("g0", t.g0.to_string());
                for (j, g) in t.functions.iter().enumerate().filter(|(_, g)| **g != GFunction::Zero) {
                    put(&format!("g{}", j + 1), g.to_string());
                }
            }
        }
        if matches!(self.source, DataSource::Csv { .. }) {
            put("n", self.n.to_string());
        }
        put("basis_dim", self.basis_dim.to_string());
        put("order", self.order.to_string());
        put("penalty", self.penalty.kind.name().into());
        put("penalty_q", self.penalty.q.to_string());
        put("lambda", self.penalty.lambda.to_string());
        if let Some(w) = &self.weights_file {
            put("weights_file", w.display().to_string());
        }
        put("penalize_intercept", self.penalize_intercept.to_string());
        put("standardize", self.standardize.to_string());
        put("t_lambda", join(&self.t_lambdas));
        put("replications", self.replications.to_string());
        put("seed", self.seed.to_string());
        put("output", self.output.display().to_string());
        if let Some(g) = &self.grouping {
            put("grouping", format_grouping(g));
        }
        put("path_count", self.path.count.to_string());
        put("path_ratio", self.path.ratio.to_string());
        put("tol", self.fit.tol.to_string());
        put("kkt_tol", self.fit.kkt_tol.to_string());
        put("max_iter", self.fit.max_iter.to_string());
        put("xi", self.xi.to_string());
        put("cone_samples", self.cone_samples.to_string());
        put("parallel", self.parallel.to_string());
        o
    }

    pub fn truth(&self) -> Result<&TruthSpec> {
        match &self.source {
            DataSource::Truth(t) => Ok(t),
            DataSource::Csv { .. } => Err(Error::Config(format!(
                "`{}` needs a simulation truth, not a data file",
                self.command.name()
            ))),
        }
    }

    pub fn experiment(&self) -> Result<Experiment> {
        Ok(Experiment {
            truth: self.truth()?.clone(),
            n: self.n,
            basis_dim: self.basis_dim,
            order: self.order,
            penalty: self.penalty.clone(),
            penalize_intercept: self.penalize_intercept,
            standardize: self.standardize,
            t_lambdas: self.t_lambdas.clone(),
            grouping: self.grouping.clone(),
            replications: self.replications,
            seed: self.seed,
            fit: FitOptions {
                init: None,
                ..self.fit.clone()
            },
        })
    }

    pub fn grouping_for(&self, p: usize, q: usize) -> Grouping {
        self.grouping.clone().unwrap_or_else(|| Grouping::table(p, q))
    }
}
