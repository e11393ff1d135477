//! Problem construction, the solver × seed suite and its manifest.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, ensure, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use varag::baselines::{fgm_restart_period, BaselineConfig};
use varag::data::{
    geometric_spectrum, make_eb_quadratic_with, make_lasso_problem, make_logistic_problem_with, make_ridge_problem,
    read_csv, read_libsvm, synthetic_classification, synthetic_regression, FactoredQuadraticGap,
};
use varag::oracle::{compute_psi_star_with, OracleOptions};
use varag::schedule::{plan_stochastic, variance_constant};
use varag::stochastic::{stochastic_varag_run_with, SfoModel};
use varag::varag::varag_restarted_run_with;
use varag::verify::BoundReport;
use varag::{
    d0, nesterov_agd_run, prox_svrg_run, restart_length, svrg_pp_run, varag_run_with, Dataset, FiniteSumProblem,
    GapReference, PsiStar, Regime, Regularizer, RunOptions, RunTrace, ScheduleConfig, VaragOptions, RNG_ALGORITHM,
};

use crate::config::{Loss, ProblemSpec, RunConfig, Solver};

pub const MANIFEST_FILE: &str = "manifest.json";

/// A built problem with its reference solution.
#[derive(Debug, Clone)]
pub struct Instance {
    pub problem: FiniteSumProblem,
    pub psi_star: PsiStar,
    /// Exact gap of generated quadratic instances.
    pub exact_gap: Option<Arc<FactoredQuadraticGap>>,
    pub mu_bar: Option<f64>,
    pub label: String,
}

impl Instance {
    pub fn gap_reference(&self) -> GapReference {
        match (&self.exact_gap, self.psi_star.attained) {
            (Some(gap), _) => GapReference::Factored {
                gap: gap.clone(),
                value: self.psi_star.value,
            },
            (None, true) => GapReference::Minimizer {
                x: self.psi_star.x.clone(),
                value: self.psi_star.value,
            },
            (None, false) => GapReference::Value(self.psi_star.value),
        }
    }
}

fn load_dataset(spec: &ProblemSpec) -> anyhow::Result<(Dataset, String)> {
    let (mut data, label) = match &spec.dataset {
        Some(path) => {
            let data = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                read_csv(path, spec.label_column.as_deref())
            } else {
                read_libsvm(path)
            }
            .with_context(|| format!("loading {}", path.display()))?;
            (data, path.display().to_string())
        }
        None => {
            let data = match spec.loss {
                Loss::Logistic => synthetic_classification(spec.m, spec.n, spec.signal, spec.data_seed)?,
                _ => {
                    let support = if spec.support == 0 { spec.n } else { spec.support.min(spec.n) };
                    synthetic_regression(spec.m, spec.n, support, spec.noise, spec.data_seed)?
                }
            };
            let label = format!("synthetic:m={},n={},seed={},decay={}", spec.m, spec.n, spec.data_seed, spec.decay);
            (data, label)
        }
    };
    if spec.dataset.is_none() && spec.decay != 1.0 {
        data.decay_columns(spec.decay);
    }
    if spec.scale_features {
        data.scale_features();
    }
    if spec.append_bias {
        data.append_bias();
    }
    Ok((data, label))
}

pub fn eb_spectrum(spec: &ProblemSpec) -> Vec<f64> {
    spec.spectrum
        .clone()
        .unwrap_or_else(|| geometric_spectrum(spec.rank, spec.spectrum_hi, spec.spectrum_lo))
}

/// Builds the problem and computes its reference solution.
pub fn build_instance(spec: &ProblemSpec, oracle_tol: f64) -> anyhow::Result<Instance> {
    if spec.loss == Loss::EbQuadratic {
        let spectrum = eb_spectrum(spec);
        let inst = make_eb_quadratic_with(spec.m, spec.n, &spectrum, spec.heterogeneity, spec.data_seed)?;
        return Ok(Instance {
            psi_star: PsiStar {
                value: inst.psi_star,
                x: inst.x_star.clone(),
                attained: true,
                iterations: 0,
            },
            exact_gap: Some(inst.gap.clone()),
            mu_bar: Some(inst.mu_bar),
            problem: inst.problem,
            label: format!("eb-quadratic:m={},n={},seed={}", spec.m, spec.n, spec.data_seed),
        });
    }
    let (data, label) = load_dataset(spec)?;
    let problem = match spec.loss {
        Loss::Logistic => {
            let reg = if spec.lambda > 0.0 { Regularizer::L2Squared(spec.lambda) } else { Regularizer::Zero };
            make_logistic_problem_with(&data, reg)?
        }
        Loss::Lasso => make_lasso_problem(&data, spec.lambda)?,
        Loss::Ridge => make_ridge_problem(&data, spec.lambda)?,
        Loss::EbQuadratic => unreachable!(),
    };
    let psi_star = compute_psi_star_with(
        &problem,
        &OracleOptions {
            tol: oracle_tol,
            ..Default::default()
        },
    )?;
    Ok(Instance {
        problem,
        psi_star,
        exact_gap: None,
        mu_bar: None,
        label,
    })
}

pub fn schedule_config(cfg: &RunConfig, inst: &Instance) -> anyhow::Result<ScheduleConfig> {
    let p = &inst.problem;
    let (m, l) = (p.m(), p.mean_lipschitz());
    let sc = match cfg.regime {
        Regime::Smooth => ScheduleConfig::smooth(m, l),
        Regime::Unified => ScheduleConfig::unified(m, l, cfg.mu.unwrap_or(p.mu())),
        Regime::ErrorBound => {
            let mu_bar = cfg
                .mu_bar
                .or(inst.mu_bar)
                .ok_or_else(|| anyhow!("the error-bound regime needs mu_bar (set --mu-bar)"))?;
            ScheduleConfig::error_bound(m, l, mu_bar)
        }
    };
    sc.validate()?;
    Ok(sc)
}

fn start_point(cfg: &RunConfig, n: usize) -> anyhow::Result<Vec<f64>> {
    match &cfg.x0 {
        Some(x0) => {
            ensure!(x0.len() == n, "x0 has length {}, problem dimension is {n}", x0.len());
            Ok(x0.clone())
        }
        None => Ok(vec![0.0; n]),
    }
}

/// Independent stream for stochastic-oracle noise.
pub fn noise_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Everything shared by the runs of one suite.
pub struct Prepared {
    pub cfg: RunConfig,
    pub instance: Instance,
    pub schedule: ScheduleConfig,
    pub x0: Vec<f64>,
    pub d0: f64,
}

impl Prepared {
    pub fn new(cfg: &RunConfig) -> anyhow::Result<Self> {
        cfg.validate()?;
        let instance = build_instance(&cfg.problem, cfg.oracle_tol)?;
        let schedule = schedule_config(cfg, &instance)?;
        let x0 = start_point(cfg, instance.problem.dim())?;
        let d0 = d0(
            &instance.problem,
            &x0,
            instance.psi_star.value,
            &instance.psi_star.x,
            schedule.l,
        )?;
        Ok(Self {
            cfg: cfg.clone(),
            instance,
            schedule,
            x0,
            d0,
        })
    }

    fn run_options(&self) -> RunOptions {
        RunOptions {
            gap_reference: self.instance.gap_reference(),
            gap_threshold: self.cfg.gap_threshold,
            record_wall_clock: self.cfg.wall_clock,
            record_inner_iterates: false,
            dataset: self.instance.label.clone(),
        }
    }

    fn fgm_iterations(&self) -> anyhow::Result<usize> {
        if let Some(k) = self.cfg.fgm_iterations {
            return Ok(k);
        }
        let per_epoch = if self.schedule.regime == Regime::ErrorBound {
            restart_length(&self.schedule)?
        } else {
            1
        };
        Ok(2 * self.cfg.epochs * per_epoch)
    }

    /// Runs one solver for one seed.
    pub fn run(&self, solver: Solver, seed: u64) -> anyhow::Result<RunTrace> {
        let p = &self.instance.problem;
        let (cfg, sc, x0) = (&self.cfg, &self.schedule, &self.x0[..]);
        let run = self.run_options();
        let baseline = BaselineConfig {
            run: run.clone(),
            mu: cfg.mu,
            ..Default::default()
        };
        let opts = VaragOptions {
            run,
            ..Default::default()
        };
        let mut trace = match solver {
            Solver::Varag if sc.regime == Regime::ErrorBound => {
                varag_restarted_run_with(p, sc, x0, cfg.epochs, seed, &opts)?.trace
            }
            Solver::Varag => varag_run_with(p, sc, x0, cfg.epochs, seed, &opts)?.trace,
            Solver::StochasticVarag => {
                if sc.regime == Regime::ErrorBound {
                    bail!("the stochastic method has no error-bound schedule");
                }
                let (epochs, batches) = if cfg.sigma == 0.0 {
                    (cfg.epochs, vec![(1, 1); cfg.epochs])
                } else {
                    let eps = cfg.eps.ok_or_else(|| anyhow!("stochastic runs need --eps"))?;
                    let d0 = if self.instance.psi_star.attained {
                        self.d0
                    } else {
                        cfg.d0_bound
                            .ok_or_else(|| anyhow!("minimizer not attained; supply d0_bound for the planner"))?
                    };
                    let q = p.aggregate_lipschitz()?.probabilities;
                    let plan = plan_stochastic(sc, cfg.sigma, variance_constant(&q), eps, d0)?;
                    (plan.epochs, plan.batches)
                };
                let mut model = SfoModel::new(p, cfg.sigma, noise_seed(seed))?;
                stochastic_varag_run_with(&mut model, sc, &batches, x0, epochs, seed, &opts)?.trace
            }
            Solver::ProxSvrg => prox_svrg_run(p, &baseline, x0, cfg.epochs, seed)?.trace,
            Solver::SvrgPp => svrg_pp_run(p, &baseline, x0, cfg.epochs, seed)?.trace,
            Solver::Fgm => {
                let restart = cfg.fgm_restart.or(match sc.regime {
                    Regime::ErrorBound => sc.mu_bar.map(|mb| fgm_restart_period(sc.l, mb)),
                    _ => None,
                });
                let fgm = BaselineConfig {
                    restart_period: restart,
                    ..baseline
                };
                let mut t = nesterov_agd_run(p, &fgm, x0, self.fgm_iterations()?)?.trace;
                t.header.seed = seed;
                t
            }
        };
        if !self.instance.psi_star.attained {
            trace.header.notes.push_str(";psi_star_not_attained");
        }
        Ok(trace)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub loss: Loss,
    pub dataset: String,
    pub m: usize,
    pub n: usize,
    pub l: f64,
    pub mu: f64,
    pub mu_bar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub solver: Solver,
    pub seed: u64,
    pub file: String,
    pub epochs: usize,
    pub grad_evals: u64,
    pub sfo_calls: u64,
    pub final_objective: f64,
    pub final_gap: Option<f64>,
    pub evals_to_threshold: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub solver: Solver,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub rng: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub problem: ProblemSummary,
    pub schedule: ScheduleConfig,
    pub psi_star: f64,
    pub psi_star_attained: bool,
    pub oracle_iterations: usize,
    pub x_star: Vec<f64>,
    pub x0: Vec<f64>,
    pub d0: f64,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
}

impl Manifest {
    pub fn read(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn all_failed(&self) -> bool {
        self.runs.is_empty() && !self.failures.is_empty()
    }

    pub fn traces(&self, dir: &Path, solver: Solver) -> anyhow::Result<Vec<RunTrace>> {
        self.runs
            .iter()
            .filter(|r| r.solver == solver)
            .map(|r| {
                let path = dir.join(&r.file);
                let t = RunTrace::read_csv(&path).with_context(|| format!("reading {}", path.display()))?;
                t.validate()?;
                Ok(t)
            })
            .collect()
    }
}

pub fn trace_file_name(solver: Solver, seed: u64) -> String {
    format!("{}-seed{seed}.csv", solver.file_stem())
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Runs every solver for every seed, writes one trace per run and the
/// manifest into `out`.
pub fn run_suite(cfg: &RunConfig, out: &Path) -> anyhow::Result<Manifest> {
    let prep = Prepared::new(cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let jobs: Vec<(Solver, u64)> = cfg
        .solvers
        .iter()
        .flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let results: Vec<Result<RunRecord, RunFailure>> = jobs
        .par_iter()
        .map(|&(solver, seed)| {
            let fail = |e: anyhow::Error| RunFailure {
                solver,
                seed,
                error: format!("{e:#}"),
            };
            let trace = prep.run(solver, seed).map_err(fail)?;
            let file = trace_file_name(solver, seed);
            trace.write_csv(out.join(&file)).map_err(|e| fail(e.into()))?;
            let last = trace.last().expect("traces start with an epoch-0 record");
            Ok(RunRecord {
                solver,
                seed,
                file,
                epochs: last.epoch,
                grad_evals: last.grad_evals,
                sfo_calls: last.sfo_calls,
                final_objective: last.objective,
                final_gap: finite(last.gap),
                evals_to_threshold: cfg.gap_threshold.and_then(|thr| trace.evals_to_gap(thr)),
            })
        })
        .collect();
    let (mut runs, mut failures) = (Vec::new(), Vec::new());
    for r in results {
        match r {
            Ok(rec) => runs.push(rec),
            Err(f) => failures.push(f),
        }
    }
    let p = &prep.instance.problem;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        rng: RNG_ALGORITHM.to_string(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        problem: ProblemSummary {
            loss: cfg.problem.loss,
            dataset: prep.instance.label.clone(),
            m: p.m(),
            n: p.dim(),
            l: p.mean_lipschitz(),
            mu: p.mu(),
            mu_bar: prep.instance.mu_bar,
        },
        schedule: prep.schedule,
        psi_star: prep.instance.psi_star.value,
        psi_star_attained: prep.instance.psi_star.attained,
        oracle_iterations: prep.instance.psi_star.iterations,
        x_star: prep.instance.psi_star.x.clone(),
        x0: prep.x0.clone(),
        d0: prep.d0,
        runs,
        failures,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    std::fs::write(out.join(MANIFEST_FILE), bytes)?;
    Ok(manifest)
}

/// Checks the traces of `solver` in `dir` against the bounds for the
/// manifest's schedule.
pub fn verify_dir(dir: &Path, solver: Solver) -> anyhow::Result<BoundReport> {
    let manifest = Manifest::read(dir)?;
    let traces = manifest.traces(dir, solver)?;
    ensure!(!traces.is_empty(), "no {} traces in {}", solver.name(), dir.display());
    Ok(varag::verify_bounds(&traces, manifest.psi_star, manifest.d0, &manifest.schedule)?)
}

/// Default output directory for a config.
pub fn default_out_dir(cfg: &RunConfig) -> PathBuf {
    PathBuf::from(format!("runs/{}", &cfg.hash()[..12]))
}
