//! Stochastic first-order oracle and the mini-batched variant of the solver
//! that only sees noisy component gradients.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::problem::FiniteSumProblem;
use crate::run::RunOutput;
use crate::sampling::{rng_from_seed, SolverRng};
use crate::schedule::ScheduleConfig;
use crate::trace::RunTrace;
use crate::varag::{check_run_inputs, Engine, EstimatorSource, VaragOptions};

/// Noisy gradient oracle: `grad f_i(x) + eta` with `eta` isotropic Gaussian,
/// per-coordinate variance `sigma^2 / n`, so `E ||eta||^2 = sigma^2`.
#[derive(Debug, Clone)]
pub struct SfoModel<'a> {
    base: &'a FiniteSumProblem,
    sigma: f64,
    noise_rng: SolverRng,
    calls: u64,
}

impl<'a> SfoModel<'a> {
    pub fn new(base: &'a FiniteSumProblem, sigma: f64, noise_seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be nonnegative, got {sigma}")));
        }
        Ok(Self {
            base,
            sigma,
            noise_rng: rng_from_seed(noise_seed),
            calls: 0,
        })
    }

    pub fn problem(&self) -> &'a FiniteSumProblem {
        self.base
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub(crate) fn query_into(&mut self, i: usize, x: &[f64], out: &mut [f64]) {
        self.base.components()[i].gradient_into(x, out);
        self.calls += 1;
        if self.sigma > 0.0 {
            let sd = self.sigma / (out.len() as f64).sqrt();
            for o in out.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut self.noise_rng);
                *o += sd * z;
            }
        }
    }
}

pub fn sfo_query(model: &mut SfoModel<'_>, i: usize, x: &[f64]) -> Result<Vec<f64>> {
    let m = model.base.m();
    if i >= m {
        return Err(Error::IndexOutOfRange { index: i, m });
    }
    check_dim(model.base.dim(), x.len())?;
    let mut out = vec![0.0; x.len()];
    model.query_into(i, x, &mut out);
    Ok(out)
}

/// Mini-batched estimator: per-component anchors averaged over `B_s`
/// queries and inner estimates averaged over `b_s` queries.
pub struct SfoEstimator<'m, 'a> {
    model: &'m mut SfoModel<'a>,
    batches: Vec<(usize, usize)>,
    current: (usize, usize),
    anchors: Vec<Vec<f64>>,
    sum: Vec<f64>,
    buf: Vec<f64>,
    grad_evals: u64,
}

impl<'m, 'a> SfoEstimator<'m, 'a> {
    pub fn new(model: &'m mut SfoModel<'a>, batches: &[(usize, usize)]) -> Result<Self> {
        if batches.iter().any(|&(big, small)| big == 0 || small == 0) {
            return Err(Error::InvalidParameter("batch sizes must be at least 1".into()));
        }
        let n = model.base.dim();
        let m = model.base.m();
        Ok(Self {
            model,
            batches: batches.to_vec(),
            current: (1, 1),
            anchors: vec![vec![0.0; n]; m],
            sum: vec![0.0; n],
            buf: vec![0.0; n],
            grad_evals: 0,
        })
    }

    /// Per-component anchor estimates from the last [`Self::anchor_at`].
    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    /// Recomputes anchors at `x_tilde` with `big_b` queries each and returns
    /// their mean.
    pub fn anchor_at(&mut self, x_tilde: &[f64], big_b: usize) -> Vec<f64> {
        self.current.0 = big_b;
        let mut g = vec![0.0; x_tilde.len()];
        self.fill_anchors(x_tilde, &mut g);
        g
    }

    /// One inner estimate at `x_under` with `b` queries of component `i`.
    pub fn estimate_at(&mut self, i: usize, b: usize, x_under: &[f64], g_tilde: &[f64]) -> Vec<f64> {
        self.current.1 = b;
        let m = self.model.base.m() as f64;
        let q = self.model.base.aggregate_lipschitz().expect("validated problem").probabilities[i];
        let mut out = vec![0.0; x_under.len()];
        self.estimate(i, 1.0 / (q * m), x_under, x_under, g_tilde, &mut out);
        out
    }

    fn fill_anchors(&mut self, x_tilde: &[f64], g_tilde: &mut [f64]) {
        let big_b = self.current.0;
        let m = self.model.base.m();
        g_tilde.fill(0.0);
        let inv_b = 1.0 / big_b as f64;
        for i in 0..m {
            let mut anchor = std::mem::take(&mut self.anchors[i]);
            anchor.fill(0.0);
            for _ in 0..big_b {
                self.model.query_into(i, x_tilde, &mut self.buf);
                for (a, v) in anchor.iter_mut().zip(&self.buf) {
                    *a += v;
                }
            }
            for (a, g) in anchor.iter_mut().zip(g_tilde.iter_mut()) {
                *a *= inv_b;
                *g += *a;
            }
            self.anchors[i] = anchor;
        }
        let inv_m = 1.0 / m as f64;
        for g in g_tilde.iter_mut() {
            *g *= inv_m;
        }
        self.grad_evals += m as u64;
    }
}

impl EstimatorSource for SfoEstimator<'_, '_> {
    fn anchor(&mut self, s: usize, x_tilde: &[f64], g_tilde: &mut [f64]) -> Result<()> {
        self.current = *self.batches.get(s - 1).ok_or_else(|| {
            Error::InvalidParameter(format!("no batch sizes for epoch {s} ({} given)", self.batches.len()))
        })?;
        self.fill_anchors(x_tilde, g_tilde);
        Ok(())
    }

    fn estimate(&mut self, i: usize, inv_qm: f64, x_under: &[f64], _x_tilde: &[f64], g_tilde: &[f64], out: &mut [f64]) {
        let b = self.current.1;
        self.sum.fill(0.0);
        for _ in 0..b {
            self.model.query_into(i, x_under, &mut self.buf);
            for ((s, v), a) in self.sum.iter_mut().zip(&self.buf).zip(&self.anchors[i]) {
                *s += v - a;
            }
        }
        let scale = inv_qm / b as f64;
        for ((o, s), g) in out.iter_mut().zip(&self.sum).zip(g_tilde) {
            *o = s * scale + g;
        }
        self.grad_evals += 1;
    }

    fn grad_evals(&self) -> u64 {
        self.grad_evals
    }

    fn sfo_calls(&self) -> u64 {
        self.model.calls
    }
}

/// Runs the mini-batched method. `grad_evals` counts component accesses
/// (`m` per anchor, 1 per inner step); `sfo_calls` counts oracle queries.
pub fn stochastic_varag_run(
    model: &mut SfoModel<'_>,
    cfg: &ScheduleConfig,
    batches: &[(usize, usize)],
    x0: &[f64],
    epochs: usize,
    seed: u64,
) -> Result<(Vec<f64>, RunTrace)> {
    let out = stochastic_varag_run_with(model, cfg, batches, x0, epochs, seed, &VaragOptions::default())?;
    Ok((out.x, out.trace))
}

pub fn stochastic_varag_run_with(
    model: &mut SfoModel<'_>,
    cfg: &ScheduleConfig,
    batches: &[(usize, usize)],
    x0: &[f64],
    epochs: usize,
    seed: u64,
    opts: &VaragOptions,
) -> Result<RunOutput> {
    let problem = model.base;
    check_run_inputs(problem, cfg, x0)?;
    if epochs == 0 {
        return Err(Error::InvalidParameter("epochs must be at least 1".into()));
    }
    if batches.len() < epochs {
        return Err(Error::InvalidParameter(format!(
            "{} batch sizes for {epochs} epochs",
            batches.len()
        )));
    }
    let sigma = model.sigma;
    let source = SfoEstimator::new(model, batches)?;
    let solver = if sigma == 0.0 { "varag" } else { "stochastic-varag" };
    let mut engine = Engine::new(problem, cfg, opts, source, seed, solver)?;
    if sigma > 0.0 {
        engine.recorder.trace.header.notes.push_str(&format!(";sigma={sigma}"));
    }
    if engine.record_start(x0) {
        return Ok(engine.recorder.finish(x0.to_vec()));
    }
    let (x, _) = engine.run_cycle(x0, epochs)?;
    Ok(engine.recorder.finish(x))
}
