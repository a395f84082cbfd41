//! Report drivers. Each writes one or more CSVs plus the manifest; a stage
//! that fails is recorded and the remaining stages still run.

use std::path::Path;

use bdr_core::baselines::{cca, joint_samples, pca, SampleMoments, Which};
use bdr_core::diagnostics::diagnostics_linear_gaussian;
use bdr_core::inference::{run_chains, ReducedPosterior};
use bdr_core::information::{gap_ratio, gaussian_expected_kl};
use bdr_core::problems::{Problem, ProblemName};
use bdr_core::reduction::{bound, tail_sums, ReducedDims};
use bdr_core::rng::{derive_seed, substream};
use bdr_core::spectral::sym_eig;
use bdr_core::BayesModel;

use crate::commands::{cmi_rows, finish, obtain_reduction, Setup};
use crate::output::{fmt, RunDir};
use crate::{Cli, ExperimentName, Failure, WhichArg};

pub fn run(cli: &Cli, name: ExperimentName, model: Option<&Path>) -> Result<(), Failure> {
    let setup = Setup::from_path(model)?;
    let tag = format!("experiment {name:?}");
    let mut run = RunDir::create(&cli.out, &tag, &setup.inputs(""), cli.seed)?;
    match name {
        ExperimentName::GapMap => gap_map(&setup, &mut run)?,
        ExperimentName::EigDecay => eig_decay(&setup, cli.seed, &mut run)?,
        ExperimentName::CmiCurves => cmi_curves(&setup, cli.seed, &mut run)?,
        ExperimentName::GoalOriented => goal_oriented(&setup, cli.seed, &mut run)?,
        ExperimentName::McmcStudy => mcmc_study(&setup, cli.seed, &mut run)?,
    }
    finish(run)
}

fn require(setup: &Setup, name: ProblemName, what: &str) -> Result<(), Failure> {
    if setup.problem.name() != name {
        return Err(Failure::Config(format!("{what} runs on the {name} problem, got {}", setup.problem.name())));
    }
    Ok(())
}

/// Expected KL, bound and their ratio over the full (r, s) grid.
fn gap_map(setup: &Setup, run: &mut RunDir) -> Result<(), Failure> {
    let Problem::LinearGaussian(p) = &setup.problem else {
        return Err(Failure::Config(format!("gap_map runs on the linear_gaussian problem, got {}", setup.problem.name())));
    };
    let (_, sigma) = diagnostics_linear_gaussian(&p.g, p.model().whitening())?;
    let sq: Vec<f64> = sigma.iter().map(|s| s * s).collect();
    let tails = tail_sums(&sq);
    let c2 = setup.cfg.run.lsi_const * setup.cfg.run.lsi_const;
    let d = sigma.len();
    let mut rows = Vec::with_capacity((d + 1) * (d + 1));
    for r in 0..=d {
        for s in 0..=d {
            let kl = gaussian_expected_kl(&sigma, r, s)?;
            let g = gap_ratio(&sigma, r, s, setup.cfg.run.lsi_const)?;
            let ratio = if g.degenerate { String::new() } else { fmt(g.value) };
            rows.push(vec![r.to_string(), s.to_string(), fmt(kl), fmt(c2 * (tails[r] + tails[s])), ratio]);
        }
    }
    run.write_csv("gap_map.csv", &["r", "s", "expected_kl", "bound", "ratio"], &rows)?;
    Ok(())
}

fn cell(v: &[f64], i: usize) -> String {
    v.get(i).map(|x| fmt(*x)).unwrap_or_default()
}

/// Diagnostic, PCA and CCA score decay side by side.
fn eig_decay(setup: &Setup, seed: u64, run: &mut RunDir) -> Result<(), Failure> {
    let pair = setup.diagnostics(setup.cfg.n(), derive_seed(seed, 1))?;
    let hx = sym_eig(&pair.h_x)?.values;
    let hy = sym_eig(&pair.h_y)?.values;
    let (tx, ty) = (tail_sums(&hx), tail_sums(&hy));
    let mut pca_x = Vec::new();
    let mut pca_y = Vec::new();
    let mut corr = Vec::new();
    let moments = joint_samples(setup.model(), setup.cfg.n(), derive_seed(seed, 2))
        .and_then(|(xs, ys)| SampleMoments::from_samples(&xs, &ys));
    match moments {
        Ok(mo) => {
            match pca(&mo, Which::X).and_then(|a| Ok((a, pca(&mo, Which::Y)?))) {
                Ok((a, b)) => {
                    pca_x = a.scores;
                    pca_y = b.scores;
                    run.stage("pca", Ok(()));
                }
                Err(e) => run.stage("pca", Err(e.to_string())),
            }
            let k = mo.dim_x().min(mo.dim_y());
            match cca(&mo, k, None) {
                Ok(c) => {
                    corr = c.correlations;
                    run.stage("cca", Ok(()));
                }
                Err(e) => run.stage("cca", Err(e.to_string())),
            }
        }
        Err(e) => run.stage("moments", Err(e.to_string())),
    }
    let len = hx.len().max(hy.len());
    let rows: Vec<Vec<String>> = (0..len)
        .map(|i| {
            vec![
                i.to_string(),
                cell(&hx, i),
                cell(&hy, i),
                cell(&tx, i + 1),
                cell(&ty, i + 1),
                cell(&pca_x, i),
                cell(&pca_y, i),
                cell(&corr, i),
            ]
        })
        .collect();
    run.write_csv(
        "eig_decay.csv",
        &["index", "h_x", "h_y", "h_x_tail", "h_y_tail", "pca_x", "pca_y", "cca"],
        &rows,
    )?;
    Ok(())
}

fn default_sweep(max: usize) -> Vec<usize> {
    let step = (max / 10).max(1);
    (0..=max).step_by(step).collect()
}

fn cmi_curves(setup: &Setup, seed: u64, run: &mut RunDir) -> Result<(), Failure> {
    let (red, _) = obtain_reduction(setup, None, seed)?;
    for (which, tag, max) in [(WhichArg::Param, "param", red.dim_x()), (WhichArg::Data, "data", red.dim_y())] {
        let dims: Vec<usize> = if setup.cfg.run.dims.is_empty() {
            default_sweep(max)
        } else {
            setup.cfg.run.dims.iter().copied().filter(|&k| k <= max).collect()
        };
        let rows = cmi_rows(setup, &red, which, &dims, derive_seed(seed, 3), run);
        run.write_csv(&format!("cmi_{tag}.csv"), &["dim", "estimate", "std_error", "bound"], &rows)?;
    }
    Ok(())
}

/// Leading `h_y` eigenvectors of the image problem laid out on the pixel grid.
fn goal_oriented(setup: &Setup, seed: u64, run: &mut RunDir) -> Result<(), Failure> {
    require(setup, ProblemName::Image, "goal_oriented")?;
    let grid = setup.cfg.problem.image.grid;
    let pair = setup.diagnostics(setup.cfg.n(), derive_seed(seed, 4))?;
    let sys = sym_eig(&pair.h_y)?;
    let modes = 4.min(sys.values.len());
    let mut rows = Vec::with_capacity(modes * grid * grid);
    let mut summary = Vec::with_capacity(modes);
    for k in 0..modes {
        let v = sys.vectors.col(k);
        for (p, x) in v.iter().enumerate() {
            rows.push(vec![k.to_string(), (p / grid).to_string(), (p % grid).to_string(), fmt(*x)]);
        }
        let (along_rows, along_cols) = axis_variances(&v, grid);
        summary.push(vec![k.to_string(), fmt(sys.values[k]), fmt(along_rows), fmt(along_cols)]);
    }
    run.write_csv("eigenvectors.csv", &["mode", "row", "col", "value"], &rows)?;
    run.write_csv("modes.csv", &["mode", "eigenvalue", "within_row_variance", "within_column_variance"], &summary)?;
    Ok(())
}

fn variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n
}

/// Mean variance within rows and within columns of a grid-shaped vector.
pub fn axis_variances(v: &[f64], grid: usize) -> (f64, f64) {
    let mut rows = 0.0;
    let mut cols = 0.0;
    for k in 0..grid {
        rows += variance(&v[k * grid..(k + 1) * grid]);
        let col: Vec<f64> = (0..grid).map(|i| v[i * grid + k]).collect();
        cols += variance(&col);
    }
    (rows / grid as f64, cols / grid as f64)
}

struct ChainSummary {
    acceptance: f64,
    iact: f64,
    mean: Vec<f64>,
    var: Vec<f64>,
}

fn column_moments(m: &bdr_core::Mat) -> (Vec<f64>, Vec<f64>) {
    let n = m.rows() as f64;
    let mean: Vec<f64> = (0..m.cols()).map(|j| m.col(j).iter().sum::<f64>() / n).collect();
    let var = (0..m.cols()).map(|j| m.col(j).iter().map(|x| (x - mean[j]).powi(2)).sum::<f64>() / (n - 1.0)).collect();
    (mean, var)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// IACT and moment error along r = s on one data realization. The reference
/// moments are those of the first (largest) dimension in the sweep.
fn mcmc_study(setup: &Setup, seed: u64, run: &mut RunDir) -> Result<(), Failure> {
    let gauss = setup
        .gaussian()
        .ok_or_else(|| Failure::Config("mcmc_study needs a problem with Gaussian prior and noise".into()))?;
    let (red, _) = obtain_reduction(setup, None, seed)?;
    let k_max = red.dim_x().min(red.dim_y());
    let mut dims: Vec<usize> = if setup.cfg.run.dims.is_empty() {
        vec![k_max, k_max / 2, k_max / 4, k_max / 10]
    } else {
        setup.cfg.run.dims.iter().copied().filter(|&k| k <= k_max).collect()
    };
    dims.retain(|&k| k > 0);
    dims.sort_unstable_by(|a, b| b.cmp(a));
    dims.dedup();
    let mut rng = substream(derive_seed(seed, 5), 0);
    let x_true = gauss.sample_prior(&mut rng)?;
    let y = gauss.sample_likelihood(&x_true, &mut rng)?;
    let chain_seeds: Vec<u64> = (0..setup.cfg.run.chains as u64).map(|c| derive_seed(seed, 100 + c)).collect();
    let mut summaries: Vec<(usize, ChainSummary)> = Vec::new();
    for &k in &dims {
        let stage = format!("chains_s{k}");
        let dims = ReducedDims { r: k, s: k, bound: bound(&red, k, k)?, cost: 0.0 };
        let post = match ReducedPosterior::new(gauss, &red, dims, setup.cfg.l(), setup.cfg.run.inner_mode) {
            Ok(p) => p,
            Err(e) => {
                run.stage(&stage, Err(e.to_string()));
                continue;
            }
        };
        let results = run_chains(&post, &y, setup.cfg.run.samples as usize, &setup.cfg.mcmc, &chain_seeds);
        let mut acc = Vec::new();
        let mut errs = Vec::new();
        for r in results {
            match r {
                Ok(ap) => acc.push(ap),
                Err(e) => errs.push(e.to_string()),
            }
        }
        if acc.is_empty() {
            run.stage(&stage, Err(errs.join("; ")));
            continue;
        }
        let c = acc.len() as f64;
        let acceptance = acc.iter().map(|a| a.acceptance).sum::<f64>() / c;
        let iact = acc.iter().map(|a| a.iact.iter().sum::<f64>() / a.iact.len() as f64).sum::<f64>() / c;
        let d = gauss.dim_x();
        let mut mean = vec![0.0; d];
        let mut var = vec![0.0; d];
        for a in &acc {
            let (m, v) = column_moments(&a.samples);
            for i in 0..d {
                mean[i] += m[i] / c;
                var[i] += v[i] / c;
            }
        }
        run.stage(&stage, if errs.is_empty() { Ok(()) } else { Err(errs.join("; ")) });
        summaries.push((k, ChainSummary { acceptance, iact, mean, var }));
    }
    let rows: Vec<Vec<String>> = match summaries.first() {
        None => Vec::new(),
        Some((_, reference)) => {
            let scale = reference.var.iter().sum::<f64>().sqrt();
            summaries
                .iter()
                .map(|(k, s)| {
                    vec![
                        k.to_string(),
                        fmt(s.acceptance),
                        fmt(s.iact),
                        fmt(diff_norm(&s.mean, &reference.mean) / scale),
                        fmt(diff_norm(&s.var, &reference.var) / norm(&reference.var)),
                    ]
                })
                .collect()
        }
    };
    run.write_csv("mcmc_study.csv", &["s", "acceptance", "iact_mean", "mean_error", "variance_error"], &rows)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_variances_of_stripes() {
        // Constant along each row, varying down the columns.
        let v: Vec<f64> = (0..16).map(|p| (p / 4) as f64).collect();
        let (rows, cols) = axis_variances(&v, 4);
        assert_eq!(rows, 0.0);
        assert!((cols - 1.25).abs() < 1e-15);
    }

    #[test]
    fn default_sweep_covers_ends() {
        assert_eq!(default_sweep(50), vec![0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50]);
        assert_eq!(default_sweep(3), vec![0, 1, 2, 3]);
    }
}
