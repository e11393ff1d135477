//! Comparison solvers sharing the trace schema and gradient accounting:
//! proximal SVRG, SVRG with doubling epochs, and the accelerated full
//! gradient method with optional fixed-period restart.

use crate::error::{Error, Result};
use crate::problem::FiniteSumProblem;
use crate::prox::{solve_prox_into, BregmanGeometry, ProxRequest};
use crate::run::{Recorder, RunOptions, RunOutput};
use crate::sampling::IndexSampler;
use crate::trace::TraceHeader;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    ProxSvrg,
    SvrgPp,
    NesterovAgd,
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::ProxSvrg => "prox-svrg",
            BaselineKind::SvrgPp => "svrg++",
            BaselineKind::NesterovAgd => "fgm",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BaselineConfig {
    /// Step size; defaults to `1/(3L)` for prox-SVRG, `1/(7L)` for SVRG++
    /// and `1/L` for the full gradient method.
    pub step_size: Option<f64>,
    /// Fixed inner length for prox-SVRG (default `m`) or the first epoch
    /// length for SVRG++ (default `ceil(m/4)`).
    pub epoch_length: Option<usize>,
    /// Strong-convexity modulus used in the prox step of prox-SVRG;
    /// defaults to the problem's.
    pub mu: Option<f64>,
    /// Restart period of the full gradient method, in iterations.
    pub restart_period: Option<usize>,
    pub run: RunOptions,
}

fn positive(v: f64, what: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")))
    }
}

struct SvrgSetup {
    step: f64,
    mu: f64,
    inv_qm: Vec<f64>,
    sampler: IndexSampler,
}

fn svrg_setup(problem: &FiniteSumProblem, step: f64, mu: f64, seed: u64) -> Result<SvrgSetup> {
    let summary = problem.aggregate_lipschitz()?;
    let m = problem.m() as f64;
    Ok(SvrgSetup {
        step: positive(step, "step size")?,
        mu,
        inv_qm: summary.probabilities.iter().map(|q| 1.0 / (q * m)).collect(),
        sampler: IndexSampler::new(summary.probabilities, seed)?,
    })
}

/// Variance-reduced proximal loop shared by prox-SVRG and SVRG++. Each
/// epoch starts from the last inner iterate and outputs the inner average.
fn svrg_loop(
    problem: &FiniteSumProblem,
    x0: &[f64],
    epoch_lengths: impl Iterator<Item = usize>,
    mut setup: SvrgSetup,
    rec: &mut Recorder<'_>,
) -> Result<Vec<f64>> {
    let n = problem.dim();
    let m = problem.m();
    let reg = problem.regularizer();
    let feasible = problem.feasible_set();
    let mut anchors = vec![vec![0.0; n]; m];
    let mut g_tilde = vec![0.0; n];
    let mut x_tilde = x0.to_vec();
    let mut x = x0.to_vec();
    let mut x_next = vec![0.0; n];
    let mut fresh = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut sum = vec![0.0; n];
    let mut evals = 0u64;

    if rec.record(0, 0, 0, x0) {
        return Ok(x_tilde);
    }
    for (epoch, t_len) in epoch_lengths.enumerate() {
        g_tilde.fill(0.0);
        for (c, a) in problem.components().iter().zip(anchors.iter_mut()) {
            c.gradient_into(&x_tilde, a);
            for (o, v) in g_tilde.iter_mut().zip(a.iter()) {
                *o += v;
            }
        }
        let inv_m = 1.0 / m as f64;
        for o in g_tilde.iter_mut() {
            *o *= inv_m;
        }
        evals += m as u64;
        sum.fill(0.0);
        for _ in 0..t_len {
            let i = setup.sampler.sample_index();
            problem.components()[i].gradient_into(&x, &mut fresh);
            evals += 1;
            let w = setup.inv_qm[i];
            for (((o, f), a), gt) in g.iter_mut().zip(&fresh).zip(&anchors[i]).zip(&g_tilde) {
                *o = (f - a) * w + gt;
            }
            let req = ProxRequest {
                g: &g,
                x0: &x,
                u0: &x,
                gamma: setup.step,
                mu: setup.mu,
            };
            solve_prox_into(BregmanGeometry::Euclidean, &req, reg, feasible, &mut x_next)?;
            std::mem::swap(&mut x, &mut x_next);
            rec.inner(&x);
            for (s, v) in sum.iter_mut().zip(&x) {
                *s += v;
            }
        }
        for (xt, s) in x_tilde.iter_mut().zip(&sum) {
            *xt = s / t_len as f64;
        }
        feasible.project(&mut x_tilde);
        if rec.record(epoch + 1, evals, evals, &x_tilde) {
            break;
        }
    }
    Ok(x_tilde)
}

fn check_common(problem: &FiniteSumProblem, x0: &[f64], budget: usize) -> Result<()> {
    problem.check_point(x0)?;
    if budget == 0 {
        return Err(Error::InvalidParameter("budget must be at least 1".into()));
    }
    Ok(())
}

pub fn prox_svrg_run(
    problem: &FiniteSumProblem,
    cfg: &BaselineConfig,
    x0: &[f64],
    epochs: usize,
    seed: u64,
) -> Result<RunOutput> {
    check_common(problem, x0, epochs)?;
    let l = problem.mean_lipschitz();
    let step = cfg.step_size.unwrap_or(1.0 / (3.0 * l));
    let t_len = cfg.epoch_length.unwrap_or(problem.m());
    if t_len == 0 {
        return Err(Error::InvalidParameter("epoch length must be at least 1".into()));
    }
    let mu = cfg.mu.unwrap_or(problem.mu());
    if !(mu >= 0.0 && mu <= problem.mu() * (1.0 + 1e-12)) {
        return Err(Error::InvalidParameter(format!("mu {mu} outside [0, {}]", problem.mu())));
    }
    let setup = svrg_setup(problem, step, mu, seed)?;
    let mut header = TraceHeader::for_problem(BaselineKind::ProxSvrg.name(), "-", seed, problem);
    header.mu = mu;
    header.notes = format!("step={step};T={t_len}");
    let mut rec = Recorder::new(problem, &cfg.run, header);
    let x = svrg_loop(problem, x0, std::iter::repeat(t_len).take(epochs), setup, &mut rec)?;
    Ok(rec.finish(x))
}

pub fn svrg_pp_run(
    problem: &FiniteSumProblem,
    cfg: &BaselineConfig,
    x0: &[f64],
    epochs: usize,
    seed: u64,
) -> Result<RunOutput> {
    check_common(problem, x0, epochs)?;
    let l = problem.mean_lipschitz();
    let step = cfg.step_size.unwrap_or(1.0 / (7.0 * l));
    let t1 = cfg.epoch_length.unwrap_or(problem.m().div_ceil(4));
    if t1 == 0 {
        return Err(Error::InvalidParameter("epoch length must be at least 1".into()));
    }
    let setup = svrg_setup(problem, step, 0.0, seed)?;
    let mut header = TraceHeader::for_problem(BaselineKind::SvrgPp.name(), "-", seed, problem);
    header.mu = 0.0;
    header.notes = format!("step={step};T1={t1}");
    let mut rec = Recorder::new(problem, &cfg.run, header);
    let lengths = svrg_pp_epoch_lengths(t1, epochs).into_iter();
    let x = svrg_loop(problem, x0, lengths, setup, &mut rec)?;
    Ok(rec.finish(x))
}

/// Epoch lengths used by [`svrg_pp_run`].
pub fn svrg_pp_epoch_lengths(t1: usize, epochs: usize) -> Vec<usize> {
    (0..epochs).map(|s| t1 << s).collect()
}

/// Accelerated proximal full-gradient method. Every iteration costs `m`
/// component gradients and is recorded in the trace.
pub fn nesterov_agd_run(
    problem: &FiniteSumProblem,
    cfg: &BaselineConfig,
    x0: &[f64],
    iterations: usize,
) -> Result<RunOutput> {
    check_common(problem, x0, iterations)?;
    let n = problem.dim();
    let m = problem.m() as u64;
    let l = problem.mean_lipschitz();
    let step = positive(cfg.step_size.unwrap_or(1.0 / l), "step size")?;
    if cfg.restart_period == Some(0) {
        return Err(Error::InvalidParameter("restart period must be at least 1".into()));
    }
    let reg = problem.regularizer();
    let feasible = problem.feasible_set();
    let mut header = TraceHeader::for_problem(BaselineKind::NesterovAgd.name(), "-", 0, problem);
    header.notes = match cfg.restart_period {
        Some(r) => format!("step={step};restart={r}"),
        None => format!("step={step}"),
    };
    let mut rec = Recorder::new(problem, &cfg.run, header);

    let mut x = x0.to_vec();
    let mut x_prev = x0.to_vec();
    let mut y = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut t = 1.0f64;
    let mut since_restart = 0usize;
    if rec.record(0, 0, 0, &x) {
        return Ok(rec.finish(x));
    }
    for k in 1..=iterations {
        if matches!(cfg.restart_period, Some(r) if since_restart == r) {
            t = 1.0;
            since_restart = 0;
            x_prev.copy_from_slice(&x);
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        for j in 0..n {
            y[j] = x[j] + beta * (x[j] - x_prev[j]);
        }
        problem.full_gradient_into(&y, &mut grad);
        let req = ProxRequest {
            g: &grad,
            x0: &y,
            u0: &y,
            gamma: step,
            mu: 0.0,
        };
        std::mem::swap(&mut x_prev, &mut x);
        solve_prox_into(BregmanGeometry::Euclidean, &req, reg, feasible, &mut x)?;
        t = t_next;
        since_restart += 1;
        let evals = k as u64 * m;
        if rec.record(k, evals, evals, &x) {
            break;
        }
    }
    Ok(rec.finish(x))
}

/// `ceil(e * sqrt(L / mu_bar))`, a restart period for the full gradient
/// method under an error bound with modulus `mu_bar`.
pub fn fgm_restart_period(l: f64, mu_bar: f64) -> usize {
    (std::f64::consts::E * (l / mu_bar).sqrt()).ceil().max(1.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{FeasibleSet, FeatureVec, Regularizer, SmoothComponent};
    use crate::run::GapReference;

    #[test]
    fn doubling_lengths() {
        assert_eq!(svrg_pp_epoch_lengths(1, 5), vec![1, 2, 4, 8, 16]);
    }

    #[test]
    fn single_component_descends_linearly() {
        // f(x) = 0.5 (2x - 2)^2, minimizer 1; the estimator is exact when m = 1.
        let p = FiniteSumProblem::new(
            vec![SmoothComponent::least_squares(FeatureVec::Dense(vec![2.0]), 2.0)],
            Regularizer::Zero,
            FeasibleSet::Unbounded,
            0.0,
            1,
        )
        .unwrap();
        let cfg = BaselineConfig {
            step_size: Some(0.25),
            epoch_length: Some(1),
            run: RunOptions {
                gap_reference: GapReference::Value(0.0),
                record_inner_iterates: true,
                ..Default::default()
            },
            ..Default::default()
        };
        let out = prox_svrg_run(&p, &cfg, &[5.0], 3, 0).unwrap();
        // exact line-search step 1/4 lands on the minimizer in one step
        assert_eq!(out.inner_iterates[0], vec![1.0]);
        assert_eq!(out.x, vec![1.0]);
    }

    #[test]
    fn fgm_fixed_point_at_minimizer() {
        let p = FiniteSumProblem::new(
            vec![SmoothComponent::least_squares(FeatureVec::Dense(vec![1.0, 0.0]), 3.0)],
            Regularizer::Zero,
            FeasibleSet::Unbounded,
            0.0,
            2,
        )
        .unwrap();
        let out = nesterov_agd_run(&p, &BaselineConfig::default(), &[3.0, 0.0], 5).unwrap();
        assert_eq!(out.x, vec![3.0, 0.0]);
        assert_eq!(out.trace.last().unwrap().grad_evals, 5);
    }

    #[test]
    fn restart_period_formula() {
        assert_eq!(fgm_restart_period(1.0, 1.0), 3);
        assert_eq!(fgm_restart_period(100.0, 1.0), 28);
    }
}
