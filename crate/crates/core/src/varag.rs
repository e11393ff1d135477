//! Variance-reduced accelerated gradient method: epoch anchoring, the
//! accelerated inner loop, weighted epoch outputs and the restart wrapper
//! used under an error bound condition.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm_sq};
use crate::problem::FiniteSumProblem;
use crate::prox::{solve_prox_into, BregmanGeometry, ProxRequest};
use crate::run::{Recorder, RunOptions, RunOutput};
use crate::sampling::{expectation_by_enumeration, IndexSampler};
use crate::schedule::{make_epoch_schedule, restart_length, EpochSchedule, Regime, ScheduleConfig};
use crate::trace::{RunTrace, TraceHeader};

/// How `grad f_i(x_tilde)` is obtained inside the inner loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnchorMode {
    /// Stored during the full-gradient pass; one fresh evaluation per step.
    #[default]
    Cached,
    /// Recomputed on demand; two fresh evaluations per step, O(n) memory.
    Recompute,
}

#[derive(Debug, Clone, Default)]
pub struct VaragOptions {
    pub run: RunOptions,
    pub anchor_mode: AnchorMode,
    pub geometry: BregmanGeometry,
    pub alpha_override: Option<f64>,
    pub p_override: Option<f64>,
    pub epoch_length_override: Option<usize>,
    /// Check `x_bar_t - x_under_t = alpha (x_t - x_plus)` after every step.
    pub check_momentum_identity: bool,
}

/// Source of the anchor gradient and of the inner estimator.
pub(crate) trait EstimatorSource {
    /// Fills `g_tilde` for epoch `s` and caches whatever the estimator reuses.
    fn anchor(&mut self, s: usize, x_tilde: &[f64], g_tilde: &mut [f64]) -> Result<()>;

    /// Writes the estimate at `x_under` using component `i` into `out`.
    /// `inv_qm` is `1 / (q_i m)`.
    fn estimate(&mut self, i: usize, inv_qm: f64, x_under: &[f64], x_tilde: &[f64], g_tilde: &[f64], out: &mut [f64]);

    fn grad_evals(&self) -> u64;
    fn sfo_calls(&self) -> u64;
}

pub(crate) struct ExactSource<'a> {
    problem: &'a FiniteSumProblem,
    mode: AnchorMode,
    anchors: Vec<Vec<f64>>,
    buf: Vec<f64>,
    buf2: Vec<f64>,
    evals: u64,
}

impl<'a> ExactSource<'a> {
    pub fn new(problem: &'a FiniteSumProblem, mode: AnchorMode) -> Self {
        let n = problem.dim();
        Self {
            problem,
            mode,
            anchors: Vec::new(),
            buf: vec![0.0; n],
            buf2: vec![0.0; n],
            evals: 0,
        }
    }
}

impl EstimatorSource for ExactSource<'_> {
    fn anchor(&mut self, _s: usize, x_tilde: &[f64], g_tilde: &mut [f64]) -> Result<()> {
        let n = self.problem.dim();
        let m = self.problem.m();
        g_tilde.fill(0.0);
        if self.mode == AnchorMode::Cached && self.anchors.len() != m {
            self.anchors = vec![vec![0.0; n]; m];
        }
        for (i, c) in self.problem.components().iter().enumerate() {
            let g = match self.mode {
                AnchorMode::Cached => &mut self.anchors[i],
                AnchorMode::Recompute => &mut self.buf,
            };
            c.gradient_into(x_tilde, g);
            for (o, v) in g_tilde.iter_mut().zip(g.iter()) {
                *o += v;
            }
        }
        let inv = 1.0 / m as f64;
        for o in g_tilde.iter_mut() {
            *o *= inv;
        }
        self.evals += m as u64;
        Ok(())
    }

    fn estimate(&mut self, i: usize, inv_qm: f64, x_under: &[f64], x_tilde: &[f64], g_tilde: &[f64], out: &mut [f64]) {
        let c = &self.problem.components()[i];
        c.gradient_into(x_under, &mut self.buf);
        self.evals += 1;
        let anchor: &[f64] = match self.mode {
            AnchorMode::Cached => &self.anchors[i],
            AnchorMode::Recompute => {
                c.gradient_into(x_tilde, &mut self.buf2);
                self.evals += 1;
                &self.buf2
            }
        };
        for (((o, fresh), a), g) in out.iter_mut().zip(&self.buf).zip(anchor).zip(g_tilde) {
            *o = (fresh - a) * inv_qm + g;
        }
    }

    fn grad_evals(&self) -> u64 {
        self.evals
    }

    fn sfo_calls(&self) -> u64 {
        self.evals
    }
}

/// Shared driver for the deterministic and stochastic methods.
pub(crate) struct Engine<'a, S: EstimatorSource> {
    problem: &'a FiniteSumProblem,
    cfg: ScheduleConfig,
    opts: &'a VaragOptions,
    source: S,
    sampler: IndexSampler,
    inv_qm: Vec<f64>,
    pub recorder: Recorder<'a>,
    epoch_counter: usize,
}

pub(crate) fn check_run_inputs(problem: &FiniteSumProblem, cfg: &ScheduleConfig, x0: &[f64]) -> Result<()> {
    cfg.validate()?;
    problem.check_point(x0)?;
    if cfg.m != problem.m() {
        return Err(Error::InvalidParameter(format!(
            "schedule built for m = {} but problem has m = {}",
            cfg.m,
            problem.m()
        )));
    }
    let l = problem.mean_lipschitz();
    if cfg.l < l * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "schedule L = {} is below the problem's mean Lipschitz constant {l}",
            cfg.l
        )));
    }
    if cfg.mu > problem.mu() * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "schedule mu = {} exceeds the problem's modulus {}",
            cfg.mu,
            problem.mu()
        )));
    }
    Ok(())
}

impl<'a, S: EstimatorSource> Engine<'a, S> {
    pub fn new(
        problem: &'a FiniteSumProblem,
        cfg: &ScheduleConfig,
        opts: &'a VaragOptions,
        source: S,
        seed: u64,
        solver: &str,
    ) -> Result<Self> {
        let summary = problem.aggregate_lipschitz()?;
        let m = problem.m() as f64;
        let inv_qm = summary.probabilities.iter().map(|q| 1.0 / (q * m)).collect();
        let sampler = IndexSampler::new(summary.probabilities, seed)?;
        let mut header = TraceHeader::for_problem(solver, cfg.regime.name(), seed, problem);
        header.l = cfg.l;
        header.mu = cfg.mu;
        header.notes = format!("anchor={:?}", opts.anchor_mode).to_lowercase();
        Ok(Self {
            problem,
            cfg: *cfg,
            opts,
            source,
            sampler,
            inv_qm,
            recorder: Recorder::new(problem, &opts.run, header),
            epoch_counter: 0,
        })
    }

    pub fn record_start(&mut self, x0: &[f64]) -> bool {
        self.recorder.record(0, 0, 0, x0)
    }

    fn schedule(&self, s: usize) -> Result<EpochSchedule> {
        let base = make_epoch_schedule(&self.cfg, s)?;
        let o = self.opts;
        if o.alpha_override.is_none() && o.p_override.is_none() && o.epoch_length_override.is_none() {
            return Ok(base);
        }
        let alpha = o.alpha_override.unwrap_or(base.alpha);
        let p = o.p_override.unwrap_or(base.p);
        let t_len = o.epoch_length_override.unwrap_or(base.t_len);
        if !(alpha > 0.0 && alpha <= 1.0 && p >= 0.0 && alpha + p <= 1.0) || t_len == 0 {
            return Err(Error::InvalidParameter(format!(
                "override needs 0 < alpha <= 1, p >= 0, alpha + p <= 1, T >= 1 (got {alpha}, {p}, {t_len})"
            )));
        }
        Ok(EpochSchedule::from_parts(s, t_len, alpha, p, self.cfg.l, self.cfg.mu, base.theta_rule))
    }

    /// Runs `epochs` epochs from `x0`, numbering schedule epochs from 1.
    /// Returns the last epoch output and whether the gap threshold stopped
    /// the run.
    pub fn run_cycle(&mut self, x0: &[f64], epochs: usize) -> Result<(Vec<f64>, bool)> {
        let n = self.problem.dim();
        let mu = self.cfg.mu;
        let reg = self.problem.regularizer();
        let feasible = self.problem.feasible_set();
        let mut x_tilde = x0.to_vec();
        let mut x = x0.to_vec();
        let mut g_tilde = vec![0.0; n];
        let mut x_bar = vec![0.0; n];
        let mut x_under = vec![0.0; n];
        let mut x_next = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut acc = vec![0.0; n];

        for s in 1..=epochs {
            let e = self.schedule(s)?;
            let (alpha, p, gamma) = (e.alpha, e.p, e.gamma);
            let mg = mu * gamma;
            let keep = 1.0 - alpha - p;
            let c_bar = (1.0 + mg) * keep;
            let c_tilde = (1.0 + mg) * p;
            let den = 1.0 + mg * (1.0 - alpha);

            self.source.anchor(s, &x_tilde, &mut g_tilde)?;
            x_bar.copy_from_slice(&x_tilde);
            acc.fill(0.0);
            let mut theta_sum = 0.0;

            for &theta in &e.theta {
                let i = self.sampler.sample_index();
                for j in 0..n {
                    x_under[j] = (c_bar * x_bar[j] + alpha * x[j] + c_tilde * x_tilde[j]) / den;
                }
                self.source
                    .estimate(i, self.inv_qm[i], &x_under, &x_tilde, &g_tilde, &mut g);
                let req = ProxRequest {
                    g: &g,
                    x0: &x,
                    u0: &x_under,
                    gamma,
                    mu,
                };
                solve_prox_into(self.opts.geometry, &req, reg, feasible, &mut x_next)?;
                for j in 0..n {
                    x_bar[j] = keep * x_bar[j] + alpha * x_next[j] + p * x_tilde[j];
                }
                if self.opts.check_momentum_identity {
                    check_momentum(&x_bar, &x_under, &x_next, &x, alpha, mg)?;
                }
                std::mem::swap(&mut x, &mut x_next);
                self.recorder.inner(&x);
                for (a, b) in acc.iter_mut().zip(&x_bar) {
                    *a += theta * b;
                }
                theta_sum += theta;
            }
            for (xt, a) in x_tilde.iter_mut().zip(&acc) {
                *xt = a / theta_sum;
            }
            // Averaging can leave the box by round-off.
            feasible.project(&mut x_tilde);
            self.epoch_counter += 1;
            let stop = self.recorder.record(
                self.epoch_counter,
                self.source.grad_evals(),
                self.source.sfo_calls(),
                &x_tilde,
            );
            if stop {
                return Ok((x_tilde, true));
            }
        }
        Ok((x_tilde, false))
    }

    pub fn epoch_counter(&self) -> usize {
        self.epoch_counter
    }
}

fn check_momentum(x_bar: &[f64], x_under: &[f64], x_t: &[f64], x_prev: &[f64], alpha: f64, mg: f64) -> Result<()> {
    let mut err = 0.0;
    let mut scale: f64 = 1.0;
    for j in 0..x_bar.len() {
        let x_plus = (x_prev[j] + mg * x_under[j]) / (1.0 + mg);
        let d = (x_bar[j] - x_under[j]) - alpha * (x_t[j] - x_plus);
        err += d * d;
        scale = scale.max(x_bar[j].abs()).max(x_t[j].abs());
    }
    if err.sqrt() > 1e-10 * scale {
        return Err(Error::Invariant(format!("momentum identity violated by {:e}", err.sqrt())));
    }
    Ok(())
}

/// Runs `epochs` epochs and returns the final epoch output with its trace.
pub fn varag_run(
    problem: &FiniteSumProblem,
    cfg: &ScheduleConfig,
    x0: &[f64],
    epochs: usize,
    seed: u64,
) -> Result<(Vec<f64>, RunTrace)> {
    let out = varag_run_with(problem, cfg, x0, epochs, seed, &VaragOptions::default())?;
    Ok((out.x, out.trace))
}

pub fn varag_run_with(
    problem: &FiniteSumProblem,
    cfg: &ScheduleConfig,
    x0: &[f64],
    epochs: usize,
    seed: u64,
    opts: &VaragOptions,
) -> Result<RunOutput> {
    check_run_inputs(problem, cfg, x0)?;
    if epochs == 0 {
        return Err(Error::InvalidParameter("epochs must be at least 1".into()));
    }
    let source = ExactSource::new(problem, opts.anchor_mode);
    let mut engine = Engine::new(problem, cfg, opts, source, seed, "varag")?;
    if engine.record_start(x0) {
        return Ok(engine.recorder.finish(x0.to_vec()));
    }
    let (x, _) = engine.run_cycle(x0, epochs)?;
    Ok(engine.recorder.finish(x))
}

/// Restarts the method every `restart_length(cfg)` epochs from the previous
/// cycle's output, `restarts` times.
pub fn varag_restarted_run(
    problem: &FiniteSumProblem,
    cfg: &ScheduleConfig,
    x0: &[f64],
    restarts: usize,
    seed: u64,
) -> Result<(Vec<f64>, RunTrace)> {
    let out = varag_restarted_run_with(problem, cfg, x0, restarts, seed, &VaragOptions::default())?;
    Ok((out.x, out.trace))
}

pub fn varag_restarted_run_with(
    problem: &FiniteSumProblem,
    cfg: &ScheduleConfig,
    x0: &[f64],
    restarts: usize,
    seed: u64,
    opts: &VaragOptions,
) -> Result<RunOutput> {
    if cfg.regime != Regime::ErrorBound {
        return Err(Error::RegimeMismatch {
            expected: Regime::ErrorBound.name(),
            found: cfg.regime.name(),
        });
    }
    check_run_inputs(problem, cfg, x0)?;
    let cycle = restart_length(cfg)?;
    let source = ExactSource::new(problem, opts.anchor_mode);
    let mut engine = Engine::new(problem, cfg, opts, source, seed, "varag-restarted")?;
    engine.recorder.trace.header.notes.push_str(&format!(";cycle_len={cycle}"));
    let mut x = x0.to_vec();
    if engine.record_start(x0) {
        return Ok(engine.recorder.finish(x));
    }
    for _ in 0..restarts {
        let (next, stopped) = engine.run_cycle(&x, cycle)?;
        x = next;
        let end = engine.epoch_counter();
        engine.recorder.trace.header.cycle_ends.push(end);
        if stopped {
            break;
        }
    }
    Ok(engine.recorder.finish(x))
}

/// Exact moments of the inner estimator at `(x_under, x_tilde)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorDiagnostics {
    /// `E[G] - grad f(x_under)`.
    pub bias: Vec<f64>,
    /// `E ||G - grad f(x_under)||^2`.
    pub second_moment: f64,
    /// `2 L_Q [f(x_tilde) - f(x_under) - <grad f(x_under), x_tilde - x_under>]`.
    pub bound: f64,
}

pub const ENUMERATION_LIMIT: usize = 10_000;

pub fn estimator_diagnostics(
    problem: &FiniteSumProblem,
    x_under: &[f64],
    x_tilde: &[f64],
) -> Result<EstimatorDiagnostics> {
    let m = problem.m();
    if m > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            m,
            limit: ENUMERATION_LIMIT,
        });
    }
    let n = problem.dim();
    check_dim(n, x_under.len())?;
    check_dim(n, x_tilde.len())?;
    let summary = problem.aggregate_lipschitz()?;
    let q = &summary.probabilities;
    let grad_under = problem.eval_full_gradient(x_under)?;
    let g_tilde = problem.eval_full_gradient(x_tilde)?;

    let mut fresh = vec![0.0; n];
    let mut anchor = vec![0.0; n];
    let values: Vec<Vec<f64>> = problem
        .components()
        .iter()
        .zip(q)
        .map(|(c, qi)| {
            c.gradient_into(x_under, &mut fresh);
            c.gradient_into(x_tilde, &mut anchor);
            let inv_qm = 1.0 / (qi * m as f64);
            fresh
                .iter()
                .zip(&anchor)
                .zip(&g_tilde)
                .map(|((f, a), g)| (f - a) * inv_qm + g)
                .collect()
        })
        .collect();
    let mean = expectation_by_enumeration(q, &values)?;
    let bias: Vec<f64> = mean.iter().zip(&grad_under).map(|(a, b)| a - b).collect();
    let second_moment = values
        .iter()
        .zip(q)
        .map(|(v, qi)| qi * v.iter().zip(&grad_under).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();

    let f_diff: f64 = problem
        .components()
        .iter()
        .map(|c| c.value_difference(x_tilde, x_under))
        .sum::<f64>()
        / m as f64;
    let d: Vec<f64> = x_tilde.iter().zip(x_under).map(|(a, b)| a - b).collect();
    let bregman = (f_diff - dot(&grad_under, &d)).max(0.0);
    let bound = if norm_sq(&d) == 0.0 { 0.0 } else { 2.0 * summary.l_q * bregman };
    Ok(EstimatorDiagnostics {
        bias,
        second_moment,
        bound,
    })
}
