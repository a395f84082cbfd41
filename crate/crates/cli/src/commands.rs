use std::path::Path;
use std::time::Instant;

use bdr_core::baselines::{cca, joint_samples, pca, SampleMoments, Which};
use bdr_core::diagnostics::{diagnostics_linear_gaussian, estimate_diagnostics, DiagnosticPair};
use bdr_core::inference::{sample_approx_posterior, ReducedPosterior};
use bdr_core::information::{cmi_data, cmi_param};
use bdr_core::io::{read_matrix_csv, read_vector_csv};
use bdr_core::model::{whitened_model, Whitened};
use bdr_core::problems::{build_problem, Problem};
use bdr_core::reduction::{
    bound, pareto_front, reduce_permutation, reduce_rotation, select_dims, CostModel, ReducedDims, Reduction,
    ReductionKind,
};
use bdr_core::{BayesModel, GaussianModel, Mat};
use serde::{Deserialize, Serialize};

use crate::config::{canonical, load_config, parse_config, render_normalized, RunConfig};
use crate::output::{fmt, sha256_hex, RunDir};
use crate::{Cli, Command, CostArg, Failure, KindArg, MethodArg, WhichArg};

pub fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::EstimateDiagnostics { model, n } => estimate(cli, model.as_deref(), *n),
        Command::Reduce { diag, kind } => reduce(cli, diag, *kind),
        Command::SelectDims { reduction, cost, ax, ay, eps } => select(cli, reduction, *cost, *ax, *ay, *eps),
        Command::Baseline { method, model, n, r } => baseline(cli, *method, model.as_deref(), *n, *r),
        Command::Cmi { which, dims, model, reduction, n, l } => {
            cmi(cli, *which, dims, model.as_deref(), reduction.as_deref(), *n, *l)
        }
        Command::Sample { model, reduction, r, s, y, n } => sample(cli, model.as_deref(), reduction, *r, *s, y, *n),
        Command::Experiment { name, model } => crate::experiment::run(cli, *name, model.as_deref()),
        Command::Validate { path } => validate(path),
    }
}

pub fn config_from(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let res = match path {
        Some(p) => load_config(p),
        None => parse_config(""),
    };
    res.map_err(|errs| Failure::Config(errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n")))
}

/// A built problem plus its whitened form when the run works in whitened coordinates.
pub struct Setup {
    pub cfg: RunConfig,
    pub problem: Problem<f64>,
    pub whitened: Option<Whitened<f64>>,
}

impl Setup {
    pub fn new(cfg: RunConfig) -> Result<Self, Failure> {
        let problem = build_problem::<f64>(&cfg.problem)?;
        let whitened = match problem.gaussian() {
            Some(g) if cfg.run.whitened => Some(whitened_model(g)?),
            _ => None,
        };
        Ok(Setup { cfg, problem, whitened })
    }

    pub fn from_path(path: Option<&Path>) -> Result<Self, Failure> {
        Setup::new(config_from(path)?)
    }

    pub fn model(&self) -> &dyn BayesModel<f64> {
        match &self.whitened {
            Some(w) => &w.model,
            None => self.problem.model(),
        }
    }

    pub fn gaussian(&self) -> Option<&GaussianModel> {
        match &self.whitened {
            Some(w) => Some(&w.model),
            None => self.problem.gaussian(),
        }
    }

    pub fn is_whitened(&self) -> bool {
        self.whitened.is_some()
    }

    /// Diagnostics in the run's coordinates; closed form for the linear problem.
    pub fn diagnostics(&self, n: usize, seed: u64) -> Result<DiagnosticPair<f64>, Failure> {
        if let (Problem::LinearGaussian(p), true) = (&self.problem, self.is_whitened()) {
            let (mut pair, _) = diagnostics_linear_gaussian(&p.g, p.model().whitening())?;
            pair.seed = seed;
            return Ok(pair);
        }
        Ok(estimate_diagnostics(self.model(), n, seed)?)
    }

    pub fn reduce(&self, pair: &DiagnosticPair<f64>) -> Result<Reduction<f64>, Failure> {
        Ok(match self.cfg.run.kind {
            ReductionKind::Rotation => reduce_rotation(pair)?,
            ReductionKind::Permutation => reduce_permutation(pair)?,
        })
    }

    pub fn inputs(&self, extra: &str) -> String {
        format!("{}\n{extra}", canonical(&self.cfg))
    }
}

pub fn column(v: &[f64]) -> Vec<Vec<String>> {
    v.iter().enumerate().map(|(i, x)| vec![i.to_string(), fmt(*x)]).collect()
}

pub fn finish(run: RunDir) -> Result<(), Failure> {
    let partial = run.is_partial();
    let m = run.finish()?;
    if partial {
        let failed: Vec<_> = m.stages.iter().filter(|s| !s.ok).map(|s| s.stage.clone()).collect();
        return Err(Failure::Partial(format!("failed stages: {}", failed.join(", "))));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct DiagSidecar {
    n: usize,
    seed: u64,
    whitened: bool,
    trace: f64,
    runtime_s: f64,
}

fn estimate(cli: &Cli, model: Option<&Path>, n: Option<usize>) -> Result<(), Failure> {
    let mut setup = Setup::from_path(model)?;
    if let Some(n) = n {
        setup.cfg.run.n = n as i64;
    }
    let n = setup.cfg.n();
    let mut run = RunDir::create(&cli.out, "estimate-diagnostics", &setup.inputs(""), cli.seed)?;
    let t0 = Instant::now();
    let pair = setup.diagnostics(n, cli.seed)?;
    let runtime_s = t0.elapsed().as_secs_f64();
    run.write_matrix("h_x.csv", "c", &pair.h_x)?;
    run.write_matrix("h_y.csv", "c", &pair.h_y)?;
    let trace = pair.h_x.trace();
    run.write_json("diagnostics.json", &DiagSidecar { n, seed: cli.seed, whitened: pair.whitened, trace, runtime_s })?;
    finish(run)
}

#[derive(Serialize, Deserialize)]
struct ReductionMeta {
    kind: ReductionKind,
    whitened: bool,
    d: usize,
    m: usize,
}

fn file_digest(path: &Path) -> Result<String, Failure> {
    Ok(sha256_hex(&std::fs::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?))
}

fn reduce(cli: &Cli, diag: &Path, kind: KindArg) -> Result<(), Failure> {
    let h_x: Mat = read_matrix_csv(&diag.join("h_x.csv"))?;
    let h_y: Mat = read_matrix_csv(&diag.join("h_y.csv"))?;
    let side: DiagSidecar = read_json(&diag.join("diagnostics.json"))?;
    let pair = DiagnosticPair::new(h_x, h_y, side.n, side.whitened, side.seed)?;
    let kind = match kind {
        KindArg::Rotation => ReductionKind::Rotation,
        KindArg::Permutation => ReductionKind::Permutation,
    };
    let inputs = format!(
        "{}\n{}\nkind={kind}",
        file_digest(&diag.join("h_x.csv"))?,
        file_digest(&diag.join("h_y.csv"))?
    );
    let mut run = RunDir::create(&cli.out, "reduce", &inputs, cli.seed)?;
    let red = match kind {
        ReductionKind::Rotation => reduce_rotation(&pair)?,
        ReductionKind::Permutation => reduce_permutation(&pair)?,
    };
    write_reduction(&mut run, &red, side.whitened)?;
    finish(run)
}

pub fn write_reduction(run: &mut RunDir, red: &Reduction<f64>, whitened: bool) -> Result<(), Failure> {
    run.write_matrix("u_basis.csv", "u", &red.u_basis)?;
    run.write_matrix("v_basis.csv", "v", &red.v_basis)?;
    run.write_csv("x_scores.csv", &["index", "score"], &column(&red.x_scores))?;
    run.write_csv("y_scores.csv", &["index", "score"], &column(&red.y_scores))?;
    let meta = ReductionMeta { kind: red.kind, whitened, d: red.dim_x(), m: red.dim_y() };
    run.write_json("reduction.json", &meta)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn read_scores(path: &Path) -> Result<Vec<f64>, Failure> {
    let m: Mat = read_matrix_csv(path)?;
    if m.cols() != 2 {
        return Err(Failure::Config(format!("{}: expected columns index, score", path.display())));
    }
    Ok(m.col(1))
}

/// Loads a reduction directory; returns it with its whitening flag.
pub fn read_reduction(dir: &Path) -> Result<(Reduction<f64>, bool), Failure> {
    let meta: ReductionMeta = read_json(&dir.join("reduction.json"))?;
    let red = Reduction::new(
        meta.kind,
        read_matrix_csv(&dir.join("u_basis.csv"))?,
        read_matrix_csv(&dir.join("v_basis.csv"))?,
        read_scores(&dir.join("x_scores.csv"))?,
        read_scores(&dir.join("y_scores.csv"))?,
    )?;
    Ok((red, meta.whitened))
}

fn reduction_digest(dir: &Path) -> Result<String, Failure> {
    let mut parts = Vec::new();
    for f in ["u_basis.csv", "v_basis.csv", "x_scores.csv", "y_scores.csv"] {
        parts.push(file_digest(&dir.join(f))?);
    }
    Ok(parts.join("\n"))
}

#[derive(Serialize)]
struct Selection {
    r: usize,
    s: usize,
    bound: f64,
    cost: f64,
}

fn select(cli: &Cli, reduction: &Path, cost: CostArg, ax: f64, ay: f64, eps: f64) -> Result<(), Failure> {
    let (red, _) = read_reduction(reduction)?;
    let model = match cost {
        CostArg::Linear => CostModel::Linear { ax, ay },
        CostArg::Quadratic => CostModel::Quadratic { ax, ay },
    };
    let dims = select_dims(&red, &model, eps)?;
    let front = pareto_front(&red, &model, eps)?;
    let inputs = format!("{}\ncost={cost:?} ax={ax} ay={ay} eps={eps}", reduction_digest(reduction)?);
    let mut run = RunDir::create(&cli.out, "select-dims", &inputs, cli.seed)?;
    let rows: Vec<Vec<String>> = front
        .iter()
        .map(|p: &ReducedDims<f64>| vec![p.r.to_string(), p.s.to_string(), fmt(p.bound), fmt(p.cost)])
        .collect();
    run.write_csv("pareto.csv", &["r", "s", "bound", "cost"], &rows)?;
    let sel = Selection { r: dims.r, s: dims.s, bound: dims.bound, cost: dims.cost };
    run.write_json("selection.json", &sel)?;
    println!("{}", serde_json::to_string(&sel).expect("serializable"));
    finish(run)
}

fn baseline(cli: &Cli, method: MethodArg, model: Option<&Path>, n: Option<usize>, r: usize) -> Result<(), Failure> {
    let mut setup = Setup::from_path(model)?;
    if let Some(n) = n {
        setup.cfg.run.n = n as i64;
    }
    let n = setup.cfg.n();
    let mut run = RunDir::create(&cli.out, "baseline", &setup.inputs(&format!("method={method:?} r={r}")), cli.seed)?;
    let (xs, ys) = joint_samples(setup.model(), n, cli.seed)?;
    let mo = SampleMoments::from_samples(&xs, &ys)?;
    match method {
        MethodArg::Pca => {
            for (which, tag) in [(Which::X, "x"), (Which::Y, "y")] {
                let pc = pca(&mo, which)?;
                let k = r.min(pc.scores.len());
                run.write_matrix(&format!("pca_{tag}_basis.csv"), "c", &pc.basis.columns(0, k))?;
                run.write_csv(&format!("pca_{tag}_scores.csv"), &["index", "variance"], &column(&pc.scores))?;
            }
        }
        MethodArg::Cca => {
            let c = cca(&mo, r, None)?;
            run.write_matrix("cca_x_basis.csv", "c", &c.u)?;
            run.write_matrix("cca_y_basis.csv", "c", &c.v)?;
            run.write_csv("cca_correlations.csv", &["index", "correlation"], &column(&c.correlations))?;
        }
    }
    finish(run)
}

/// Bound column of the CMI tables: `C̄²` times the discarded score mass.
pub fn cmi_rows(
    setup: &Setup,
    red: &Reduction<f64>,
    which: WhichArg,
    dims: &[usize],
    seed: u64,
    run: &mut RunDir,
) -> Vec<Vec<String>> {
    let (n, l, mode) = (setup.cfg.n(), setup.cfg.l(), setup.cfg.run.inner_mode);
    let c2 = setup.cfg.run.lsi_const * setup.cfg.run.lsi_const;
    let mut rows = Vec::new();
    for &k in dims {
        let tag = match which {
            WhichArg::Param => "param",
            WhichArg::Data => "data",
        };
        let res = match which {
            WhichArg::Param => cmi_param(setup.model(), red, k, n, l, seed, mode).and_then(|e| Ok((e, red.tail_x(k)?))),
            WhichArg::Data => cmi_data(setup.model(), red, k, n, l, seed, mode).and_then(|e| Ok((e, red.tail_y(k)?))),
        };
        match res {
            Ok((e, tail)) => {
                rows.push(vec![k.to_string(), fmt(e.value), fmt(e.std_error), fmt(c2 * tail)]);
                run.stage(&format!("cmi_{tag}_{k}"), Ok(()));
            }
            Err(e) => run.stage(&format!("cmi_{tag}_{k}"), Err(e.to_string())),
        }
    }
    rows
}

/// Reduction for an in-process run: loaded from `dir` or fitted from the model.
pub fn obtain_reduction(setup: &Setup, dir: Option<&Path>, seed: u64) -> Result<(Reduction<f64>, String), Failure> {
    match dir {
        Some(d) => {
            let (red, whitened) = read_reduction(d)?;
            if whitened != setup.is_whitened() {
                return Err(Failure::Config(format!(
                    "reduction in {} has whitened = {whitened}, the run has whitened = {}",
                    d.display(),
                    setup.is_whitened()
                )));
            }
            if red.dim_x() != setup.model().dim_x() || red.dim_y() != setup.model().dim_y() {
                return Err(Failure::Config(format!(
                    "reduction is {}x{}, the model is {}x{}",
                    red.dim_x(),
                    red.dim_y(),
                    setup.model().dim_x(),
                    setup.model().dim_y()
                )));
            }
            Ok((red, reduction_digest(d)?))
        }
        None => {
            let pair = setup.diagnostics(setup.cfg.n(), bdr_core::rng::derive_seed(seed, 7))?;
            Ok((setup.reduce(&pair)?, "fitted".into()))
        }
    }
}

fn cmi(
    cli: &Cli,
    which: WhichArg,
    dims: &[usize],
    model: Option<&Path>,
    reduction: Option<&Path>,
    n: Option<usize>,
    l: Option<usize>,
) -> Result<(), Failure> {
    let mut setup = Setup::from_path(model)?;
    if let Some(n) = n {
        setup.cfg.run.n = n as i64;
    }
    if let Some(l) = l {
        setup.cfg.run.l = l as i64;
    }
    let (red, red_inputs) = obtain_reduction(&setup, reduction, cli.seed)?;
    let extra = format!("which={which:?} dims={dims:?}\n{red_inputs}");
    let mut run = RunDir::create(&cli.out, "cmi", &setup.inputs(&extra), cli.seed)?;
    let rows = cmi_rows(&setup, &red, which, dims, cli.seed, &mut run);
    run.write_csv("cmi.csv", &["dim", "estimate", "std_error", "bound"], &rows)?;
    if rows.is_empty() {
        run.finish()?;
        return Err(Failure::Numerical("every CMI estimate failed".into()));
    }
    finish(run)
}

#[derive(Serialize)]
struct ChainSidecar {
    acceptance: f64,
    iact: Vec<f64>,
    ess: Vec<f64>,
    diverged: bool,
    burn_in: usize,
    runtime_s: f64,
}

#[allow(clippy::too_many_arguments)]
fn sample(
    cli: &Cli,
    model: Option<&Path>,
    reduction: &Path,
    r: usize,
    s: usize,
    y: &Path,
    n: usize,
) -> Result<(), Failure> {
    let setup = Setup::from_path(model)?;
    let gauss = setup
        .gaussian()
        .ok_or_else(|| Failure::Config("sample needs a problem with Gaussian prior and noise".into()))?;
    let (red, red_inputs) = obtain_reduction(&setup, Some(reduction), cli.seed)?;
    let y_obs: Vec<f64> = read_vector_csv(y)?;
    if y_obs.len() != gauss.dim_y() {
        return Err(Failure::Config(format!("data has {} values, the model expects {}", y_obs.len(), gauss.dim_y())));
    }
    let y_run = match &setup.whitened {
        Some(w) => w.whiten_y(&y_obs),
        None => y_obs.clone(),
    };
    let extra = format!("r={r} s={s} n={n}\n{red_inputs}\n{}", file_digest(y)?);
    let mut run = RunDir::create(&cli.out, "sample", &setup.inputs(&extra), cli.seed)?;
    let dims = ReducedDims { r, s, bound: bound(&red, r, s)?, cost: 0.0 };
    let post = ReducedPosterior::new(gauss, &red, dims, setup.cfg.l(), setup.cfg.run.inner_mode)?;
    let t0 = Instant::now();
    let out = sample_approx_posterior(&post, &y_run, n, &setup.cfg.mcmc, cli.seed)?;
    let runtime_s = t0.elapsed().as_secs_f64();
    let samples = match &setup.whitened {
        Some(w) => {
            let rows: Vec<Vec<f64>> = (0..out.samples.rows()).map(|i| w.unwhiten_x(&out.samples.row(i))).collect();
            Mat::from_rows(&rows)?
        }
        None => out.samples.clone(),
    };
    run.write_matrix("samples.csv", "x", &samples)?;
    run.write_json(
        "diagnostics.json",
        &ChainSidecar {
            acceptance: out.acceptance,
            iact: out.iact.clone(),
            ess: out.ess.clone(),
            diverged: out.diverged,
            burn_in: out.burn_in,
            runtime_s,
        },
    )?;
    run.stage("chain", if out.diverged { Err("acceptance below the divergence threshold".into()) } else { Ok(()) });
    finish(run)
}

fn validate(path: &Path) -> Result<(), Failure> {
    let src = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let cfg = parse_config(&src)
        .map_err(|errs| Failure::Config(errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n")))?;
    print!("{}", render_normalized(&cfg, &src));
    Ok(())
}
