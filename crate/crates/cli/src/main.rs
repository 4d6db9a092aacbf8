use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vcox::config::{Command, DataSource, RunConfig};
use vcox::diagnostics::{c_w, gamma_star, oracle_check, ConeOptions, SlotSupport};
use vcox::likelihood::{expand_design_with, standardize, DesignExpansion, DesignOptions, GroupCoefficients};
use vcox::solver::{fit, lambda_max, lambda_path, FitResult, PenaltyKind};
use vcox::survival::{load_csv, simulate, write_csv, Family, SurvivalDataset};
use vcox::{extract_estimates, threshold_select, Error, OrthoBasis};

const TABLE1: &str = include_str!("../../../configs/table1.cfg");
const TABLE2: &str = include_str!("../../../configs/table2.cfg");
const DIAGNOSE: &str = include_str!("../../../configs/diagnose_small.cfg");

/// Group-lasso varying coefficient Cox models.
#[derive(Parser)]
#[command(name = "vcox", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Fit at one λ and write coefficients, function estimates and selections.
    Fit(Common),
    /// Fit a decreasing λ grid from λ_max with warm starts.
    Path(Common),
    /// Replicated simulate → fit → select runs with score tables.
    Simulate(Common),
    /// Oracle-inequality diagnostics on a small simulated instance.
    Diagnose(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Config file (`key = value` lines).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Built-in config: table1, table2 or diagnose-small.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// CSV data file (columns time, status, x1..xp[, z]).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    family: Option<Family>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long = "basis-dim")]
    basis_dim: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
    /// p1, ph or group.
    #[arg(long)]
    penalty: Option<PenaltyKind>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Comma separated thresholds.
    #[arg(long = "t-lambda", value_delimiter = ',')]
    t_lambda: Option<Vec<f64>>,
    #[arg(long = "path-count")]
    path_count: Option<usize>,
    #[arg(long = "path-ratio")]
    path_ratio: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "kkt-tol")]
    kkt_tol: Option<f64>,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// One positive multiplier per block.
    #[arg(long = "weights-file")]
    weights_file: Option<PathBuf>,
    /// Fit in per-slot orthonormalized coordinates.
    #[arg(long)]
    standardize: Option<bool>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, short = 'R')]
    replications: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run the simulation once per sample size, e.g. 100,200,300,400.
    #[arg(long = "n-sweep", value_delimiter = ',')]
    n_sweep: Option<Vec<usize>>,
    /// Write every simulated dataset as CSV.
    #[arg(long = "emit-data")]
    emit_data: bool,
    /// Write the basis sampled on a grid.
    #[arg(long = "dump-basis")]
    dump_basis: bool,
    /// Run replications on one thread.
    #[arg(long)]
    serial: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Sub::Fit(c) => (Command::Fit, c),
        Sub::Path(c) => (Command::Path, c),
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::Diagnose(c) => (Command::Diagnose, c),
    };
    match run(cmd, &common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) | Error::NoEvents | Error::NotSymmetric(_) | Error::DegenerateBasis { .. } => 1,
        _ => 2,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(dir: &Path, name: &str, body: &str) -> vcox::Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(io_err(&path))
}

fn resolve(cmd: Command, c: &Common) -> vcox::Result<RunConfig> {
    let text = match (&c.config, c.preset.as_deref()) {
        (Some(p), _) => Some(fs::read_to_string(p).map_err(io_err(p))?),
        (None, Some("table1")) => Some(TABLE1.to_string()),
        (None, Some("table2")) => Some(TABLE2.to_string()),
        (None, Some("diagnose-small")) => Some(DIAGNOSE.to_string()),
        (None, Some(other)) => return Err(Error::Config(format!("unknown preset `{other}`"))),
        (None, None) => None,
    };
    let mut cfg = match text {
        Some(t) => RunConfig::parse(&t)?,
        None => {
            let (Some(data), Some(family)) = (&c.data, c.family) else {
                return Err(Error::Config("give --config, --preset, or --data with --family".into()));
            };
            RunConfig {
                source: DataSource::Csv {
                    path: data.clone(),
                    family,
                },
                ..RunConfig::default()
            }
        }
    };
    cfg.command = cmd;
    if let Some(d) = &c.data {
        cfg.source = DataSource::Csv {
            path: d.clone(),
            family: c.family.unwrap_or(cfg.source.family()),
        };
    }
    if let Some(v) = &c.out {
        cfg.output = v.clone();
    }
    macro_rules! set {
        ($field:expr, $v:expr) => {
            if let Some(v) = $v {
                $field = v;
            }
        };
    }
    set!(cfg.basis_dim, c.basis_dim);
    set!(cfg.order, c.order);
    set!(cfg.penalty.kind, c.penalty);
    set!(cfg.penalty.lambda, c.lambda);
    set!(cfg.t_lambdas, c.t_lambda.clone());
    set!(cfg.path.count, c.path_count);
    set!(cfg.path.ratio, c.path_ratio);
    set!(cfg.fit.tol, c.tol);
    set!(cfg.fit.kkt_tol, c.kkt_tol);
    set!(cfg.fit.max_iter, c.max_iter);
    set!(cfg.standardize, c.standardize);
    set!(cfg.n, c.n);
    set!(cfg.replications, c.replications);
    set!(cfg.seed, c.seed);
    if c.weights_file.is_some() {
        cfg.weights_file = c.weights_file.clone();
    }
    if c.serial {
        cfg.parallel = false;
    }
    Ok(cfg)
}

fn run(cmd: Command, c: &Common) -> vcox::Result<()> {
    let cfg = resolve(cmd, c)?;
    match &c.n_sweep {
        Some(ns) if cmd == Command::Simulate => {
            for &n in ns {
                let mut sub = cfg.clone();
                sub.n = n;
                sub.output = cfg.output.join(format!("n{n}"));
                execute(&sub, c)?;
            }
            Ok(())
        }
        Some(_) => Err(Error::Config("--n-sweep applies to simulate only".into())),
        None => execute(&cfg, c),
    }
}

fn execute(cfg: &RunConfig, c: &Common) -> vcox::Result<()> {
    let dir = &cfg.output;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write(dir, "config.cfg", &cfg.serialize())?;
    match cfg.command {
        Command::Fit => run_fit(cfg),
        Command::Path => run_path(cfg),
        Command::Simulate => run_simulate(cfg, c.emit_data),
        Command::Diagnose => run_diagnose(cfg, c.dump_basis),
    }
}

fn basis_of(cfg: &RunConfig) -> vcox::Result<OrthoBasis> {
    OrthoBasis::new(cfg.basis_dim, cfg.order)
}

fn dataset(cfg: &RunConfig) -> vcox::Result<SurvivalDataset> {
    match &cfg.source {
        DataSource::Csv { path, family } => load_csv(path, *family),
        DataSource::Truth(t) => simulate(t, cfg.n, cfg.seed, 0),
    }
}

fn design_of(cfg: &RunConfig, data: &SurvivalDataset, basis: &OrthoBasis) -> vcox::Result<DesignExpansion> {
    expand_design_with(
        data,
        basis,
        DesignOptions {
            penalize_intercept: cfg.penalize_intercept,
        },
    )
}

fn penalty_of(cfg: &RunConfig) -> vcox::Result<vcox::PenaltySpec> {
    let mut spec = cfg.penalty.clone();
    if let Some(path) = &cfg.weights_file {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let w = text
            .split(|ch: char| ch.is_whitespace() || ch == ',')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("{}: `{s}` is not a number", path.display())))
            })
            .collect::<vcox::Result<Vec<_>>>()?;
        spec.weights = Some(w);
    }
    Ok(spec)
}

/// Fits on the raw or standardized design; coefficients come back on the raw scale.
fn fit_design(
    cfg: &RunConfig,
    design: &DesignExpansion,
    spec: &vcox::PenaltySpec,
) -> vcox::Result<(FitResult, GroupCoefficients)> {
    let opts = cfg.fit.clone();
    if cfg.standardize {
        let (sd, st) = standardize(design)?;
        let res = fit(&sd, spec, &opts)?;
        let g = GroupCoefficients::new(st.to_original(res.gamma_hat.flat.view()), design.layout().clone());
        Ok((res, g))
    } else {
        let res = fit(design, spec, &opts)?;
        let g = res.gamma_hat.clone();
        Ok((res, g))
    }
}

fn num(x: f64) -> String {
    format!("{x:.10e}")
}

fn run_fit(cfg: &RunConfig) -> vcox::Result<()> {
    let dir = &cfg.output;
    let basis = basis_of(cfg)?;
    let data = dataset(cfg)?;
    let design = design_of(cfg, &data, &basis)?;
    let spec = penalty_of(cfg)?;
    let (res, gamma) = fit_design(cfg, &design, &spec)?;
    let est = extract_estimates(&gamma, &basis)?;

    let mut coef = String::from("block,covariate,slot,index,value\n");
    for (b, blk) in gamma.layout.blocks().iter().enumerate() {
        let cov = blk.covariate.map_or("intercept".to_string(), |j| format!("x{}", j + 1));
        if let Some(i) = blk.scalar {
            coef.push_str(&format!("{b},{cov},scalar,{i},{}\n", num(gamma.flat[i])));
        }
        for i in blk.vector.clone() {
            coef.push_str(&format!("{b},{cov},vector,{i},{}\n", num(gamma.flat[i])));
        }
    }
    write(dir, "coefficients.csv", &coef)?;

    let mut gc = String::from("covariate,g_c,g_n_norm\n");
    for j in 0..est.p() {
        gc.push_str(&format!("x{},{},{}\n", j + 1, num(est.g_c[j]), num(est.g_n_norms[j])));
    }
    write(dir, "g_c.csv", &gc)?;

    let mut grid = String::from("t");
    for j in 0..est.p() {
        grid.push_str(&format!(",g_n{}", j + 1));
    }
    grid.push('\n');
    for k in 0..200 {
        let t = k as f64 / 199.0;
        grid.push_str(&num(t));
        for j in 0..est.p() {
            grid.push(',');
            grid.push_str(&num(est.g_n_at(&basis, j, t)?));
        }
        grid.push('\n');
    }
    write(dir, "g_n_grid.csv", &grid)?;

    let mut sel = String::new();
    for &t in &cfg.t_lambdas {
        let s = threshold_select(&est, t);
        let one = |v: &[usize]| v.iter().map(|j| format!("x{}", j + 1)).collect::<Vec<_>>().join(" ");
        sel.push_str(&format!(
            "t_lambda {t}\n  S_c {}\n  S_n {}\n  hierarchy_repaired {}\n",
            one(&s.s_c_hat),
            one(&s.s_n_hat),
            one(&s.hierarchy_repaired)
        ));
    }
    write(dir, "selection.txt", &sel)?;

    let lmax = if cfg.standardize {
        lambda_max(&standardize(&design)?.0, &spec)?
    } else {
        lambda_max(&design, &spec)?
    };
    let summary = format!(
        "n {}\nevents {}\nlambda {}\nlambda_max {}\nobjective {}\nkkt_residual {}\niterations {}\nconverged {}\nstep_size {}\n",
        data.n(),
        data.events(),
        num(res.lambda),
        num(lmax),
        num(res.objective()),
        num(res.kkt_residual),
        res.iterations,
        res.converged,
        num(res.step_size_final)
    );
    write(dir, "summary.txt", &summary)?;
    print!("{summary}{sel}");
    if !res.converged {
        return Err(Error::Numerical(format!(
            "did not converge in {} iterations (KKT residual {:.3e})",
            res.iterations, res.kkt_residual
        )));
    }
    Ok(())
}

fn run_path(cfg: &RunConfig) -> vcox::Result<()> {
    let dir = &cfg.output;
    let basis = basis_of(cfg)?;
    let data = dataset(cfg)?;
    let raw = design_of(cfg, &data, &basis)?;
    let spec = penalty_of(cfg)?;
    let (design, st) = if cfg.standardize {
        let (d, s) = standardize(&raw)?;
        (d, Some(s))
    } else {
        (raw.clone(), None)
    };
    let fits = lambda_path(&design, &spec, cfg.path, &cfg.fit)?;
    let t = cfg.t_lambdas.last().copied().unwrap_or(0.0);
    let mut table = String::from("lambda,objective,kkt_residual,iterations,converged,nonzero_blocks,s_c,s_n\n");
    let mut coef = String::from("lambda");
    for i in 0..raw.dim() {
        coef.push_str(&format!(",c{i}"));
    }
    coef.push('\n');
    let mut all_converged = true;
    for r in &fits {
        let flat = match &st {
            Some(s) => s.to_original(r.gamma_hat.flat.view()),
            None => r.gamma_hat.flat.clone(),
        };
        let g = GroupCoefficients::new(flat, raw.layout().clone());
        let sel = threshold_select(&extract_estimates(&g, &basis)?, t);
        all_converged &= r.converged;
        table.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            num(r.lambda),
            num(r.objective()),
            num(r.kkt_residual),
            r.iterations,
            r.converged,
            r.nonzero_blocks(),
            sel.s_c_hat.len(),
            sel.s_n_hat.len()
        ));
        coef.push_str(&num(r.lambda));
        for v in g.flat.iter() {
            coef.push(',');
            coef.push_str(&num(*v));
        }
        coef.push('\n');
    }
    write(dir, "path.csv", &table)?;
    write(dir, "path_coefficients.csv", &coef)?;
    print!("{table}");
    if !all_converged {
        return Err(Error::Numerical("some path points did not converge".into()));
    }
    Ok(())
}

fn run_simulate(cfg: &RunConfig, emit_data: bool) -> vcox::Result<()> {
    let dir = &cfg.output;
    let exp = cfg.experiment()?;
    if emit_data {
        let data_dir = dir.join("data");
        fs::create_dir_all(&data_dir).map_err(io_err(&data_dir))?;
        for r in 0..cfg.replications as u64 {
            let d = simulate(&exp.truth, cfg.n, cfg.seed, r)?;
            let path = data_dir.join(format!("rep{r:04}.csv"));
            let mut buf = vec![];
            write_csv(&d, &mut buf).map_err(io_err(&path))?;
            fs::write(&path, buf).map_err(io_err(&path))?;
        }
    }
    let report = exp.run(cfg.parallel)?;
    let mut text = format!(
        "family {}  n {}  replications {}  lambda {}  mean censoring {:.3}\nfailed {}  unconverged {}\n",
        exp.truth.family,
        cfg.n,
        cfg.replications,
        cfg.penalty.lambda,
        report.mean_censoring(),
        report.failures.len(),
        report.unconverged()
    );
    for (r, msg) in &report.failures {
        text.push_str(&format!("replication {r} failed: {msg}\n"));
    }
    for (t, scores) in &report.scores {
        text.push_str(&format!("\nt_lambda = {t}\n{}", scores.to_text()));
        write(dir, &format!("scores_t{t}.csv"), &scores.to_csv())?;
    }
    write(dir, "scores.txt", &text)?;
    let mut reps = String::from("replication,censoring,kkt_residual,iterations,converged\n");
    for o in &report.outcomes {
        reps.push_str(&format!(
            "{},{},{},{},{}\n",
            o.replication,
            num(o.censoring),
            num(o.kkt_residual),
            o.iterations,
            o.converged
        ));
    }
    write(dir, "replications.csv", &reps)?;
    print!("{text}");
    Ok(())
}

fn run_diagnose(cfg: &RunConfig, dump_basis: bool) -> vcox::Result<()> {
    let dir = &cfg.output;
    let truth = cfg.truth()?;
    let basis = basis_of(cfg)?;
    let data = dataset(cfg)?;
    let design = design_of(cfg, &data, &basis)?;
    if design.dim() > vcox::likelihood::FULL_HESSIAN_GUARD {
        return Err(Error::DimensionGuard {
            dim: design.dim(),
            guard: vcox::likelihood::FULL_HESSIAN_GUARD,
        });
    }
    let spec = penalty_of(cfg)?;
    let res = fit(&design, &spec, &cfg.fit)?;
    let gs = gamma_star(truth, design.layout(), &basis)?;
    let support = SlotSupport::from_truth(design.layout(), truth);
    let cw = c_w(&basis, &data);
    let opts = ConeOptions {
        samples: cfg.cone_samples,
        seed: cfg.seed,
        ..ConeOptions::default()
    };
    let report = oracle_check(&res, &design, gs.view(), &support, cw, cfg.xi, &opts)?;
    write(dir, "oracle.txt", &report.to_text())?;
    write(dir, "oracle.csv", &report.to_csv())?;
    if dump_basis {
        let l = basis.dim();
        let mut s = String::from("t");
        for k in 1..=l {
            s.push_str(&format!(",b{k}"));
        }
        s.push('\n');
        for k in 0..200 {
            let t = k as f64 / 199.0;
            s.push_str(&num(t));
            for v in basis.eval_unchecked(t).iter() {
                s.push(',');
                s.push_str(&num(*v));
            }
            s.push('\n');
        }
        write(dir, "basis.csv", &s)?;
        let a0 = basis.transform();
        let mut m = String::new();
        for row in a0.rows() {
            m.push_str(&row.iter().map(|v| num(*v)).collect::<Vec<_>>().join(","));
            m.push('\n');
        }
        write(dir, "basis_transform.csv", &m)?;
    }
    print!("{}", report.to_text());
    Ok(())
}
