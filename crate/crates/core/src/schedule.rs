//! Per-epoch parameter policies: epoch length, step size, momentum weights
//! and output weights for the smooth, unified and error-bound regimes, plus
//! the mini-batch schedule of the stochastic variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Smooth,
    Unified,
    #[serde(alias = "error_bound")]
    ErrorBound,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Smooth => "smooth",
            Regime::Unified => "unified",
            Regime::ErrorBound => "error-bound",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smooth" => Ok(Regime::Smooth),
            "unified" => Ok(Regime::Unified),
            "error-bound" | "error_bound" => Ok(Regime::ErrorBound),
            other => Err(Error::InvalidParameter(format!("unknown regime {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub regime: Regime,
    pub m: usize,
    /// Mean Lipschitz constant.
    pub l: f64,
    pub mu: f64,
    /// Error-bound modulus; required by the error-bound regime.
    pub mu_bar: Option<f64>,
    pub s0: usize,
}

/// `floor(log2 m) + 1`.
pub fn default_s0(m: usize) -> usize {
    assert!(m >= 1);
    (usize::BITS - 1 - m.leading_zeros()) as usize + 1
}

/// Ceiling that ignores round-off just above an integer.
fn ceil_tolerant(x: f64) -> f64 {
    (x - 1e-12 * x.abs().max(1.0)).ceil()
}

impl ScheduleConfig {
    pub fn smooth(m: usize, l: f64) -> Self {
        Self {
            regime: Regime::Smooth,
            m,
            l,
            mu: 0.0,
            mu_bar: None,
            s0: default_s0(m),
        }
    }

    pub fn unified(m: usize, l: f64, mu: f64) -> Self {
        Self {
            regime: Regime::Unified,
            mu,
            ..Self::smooth(m, l)
        }
    }

    /// Error-bound regime; `s0` is fixed to 4.
    pub fn error_bound(m: usize, l: f64, mu_bar: f64) -> Self {
        Self {
            regime: Regime::ErrorBound,
            m,
            l,
            mu: 0.0,
            mu_bar: Some(mu_bar),
            s0: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("m must be positive".into()));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::InvalidParameter(format!("L must be positive, got {}", self.l)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu must be nonnegative, got {}", self.mu)));
        }
        if self.s0 == 0 {
            return Err(Error::InvalidParameter("s0 must be at least 1".into()));
        }
        if self.regime == Regime::ErrorBound {
            match self.mu_bar {
                Some(mb) if mb > 0.0 && mb.is_finite() => {}
                _ => return Err(Error::InvalidParameter("error-bound regime needs a positive mu_bar".into())),
            }
        }
        Ok(())
    }

    /// First epoch length of the error-bound regime, `min(m, ceil(L / mu_bar))`.
    pub fn error_bound_t1(&self) -> Result<usize> {
        let mb = self
            .mu_bar
            .ok_or_else(|| Error::InvalidParameter("mu_bar missing".into()))?;
        let ratio = ceil_tolerant(self.l / mb).max(1.0);
        Ok(if ratio >= self.m as f64 { self.m } else { ratio as usize })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaRule {
    Smooth,
    StronglyConvex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSchedule {
    pub s: usize,
    pub t_len: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub p: f64,
    /// Output weights. Under the strongly convex rule they are divided by
    /// `Gamma_{T-1}` so the last weight is 1; only ratios matter.
    pub theta: Vec<f64>,
    pub theta_rule: ThetaRule,
}

impl EpochSchedule {
    /// Builds the epoch from explicit `(T, alpha, p)`; `gamma = 1/(3 L alpha)`.
    pub fn from_parts(s: usize, t_len: usize, alpha: f64, p: f64, l: f64, mu: f64, rule: ThetaRule) -> Self {
        let gamma = 1.0 / (3.0 * l * alpha);
        let theta = match rule {
            ThetaRule::Smooth => smooth_theta(t_len, gamma, alpha, p),
            ThetaRule::StronglyConvex => strongly_convex_theta(t_len, gamma, alpha, p, mu),
        };
        Self {
            s,
            t_len,
            gamma,
            alpha,
            p,
            theta,
            theta_rule: rule,
        }
    }

    pub fn theta_sum(&self) -> f64 {
        self.theta.iter().sum()
    }
}

fn smooth_theta(t_len: usize, gamma: f64, alpha: f64, p: f64) -> Vec<f64> {
    let mut theta = vec![gamma / alpha * (alpha + p); t_len];
    theta[t_len - 1] = gamma / alpha;
    theta
}

fn strongly_convex_theta(t_len: usize, gamma: f64, alpha: f64, p: f64, mu: f64) -> Vec<f64> {
    let r = 1.0 + mu * gamma;
    let ln_r = r.ln();
    let keep = 1.0 - alpha - p;
    (1..=t_len)
        .map(|t| {
            if t == t_len {
                1.0
            } else {
                // Gamma_{t-1}/Gamma_{T-1} - keep * Gamma_t/Gamma_{T-1}
                let base = ((t as f64 - t_len as f64) * ln_r).exp();
                base - keep * base * r
            }
        })
        .collect()
}

fn smooth_length_and_alpha(s: usize, s0: usize) -> (usize, f64) {
    if s <= s0 {
        (1usize << (s - 1), 0.5)
    } else {
        (1usize << (s0 - 1), 2.0 / ((s - s0) as f64 + 4.0))
    }
}

pub fn make_epoch_schedule(cfg: &ScheduleConfig, s: usize) -> Result<EpochSchedule> {
    cfg.validate()?;
    if s < 1 {
        return Err(Error::InvalidParameter("epoch index starts at 1".into()));
    }
    let p = 0.5;
    match cfg.regime {
        Regime::Smooth => {
            let (t_len, alpha) = smooth_length_and_alpha(s, cfg.s0);
            Ok(EpochSchedule::from_parts(s, t_len, alpha, p, cfg.l, cfg.mu, ThetaRule::Smooth))
        }
        Regime::Unified => {
            let (t_len, smooth_alpha) = smooth_length_and_alpha(s, cfg.s0);
            let m = cfg.m as f64;
            let alpha = if s <= cfg.s0 {
                smooth_alpha
            } else {
                smooth_alpha.max((m * cfg.mu / (3.0 * cfg.l)).sqrt().min(0.5))
            };
            let boundary = cfg.s0 as f64 + (12.0 * cfg.l / (m * cfg.mu)).sqrt() - 4.0;
            let smooth_branch =
                s <= cfg.s0 || ((s as f64) <= boundary && m < 3.0 * cfg.l / (4.0 * cfg.mu));
            let rule = if smooth_branch {
                ThetaRule::Smooth
            } else {
                ThetaRule::StronglyConvex
            };
            Ok(EpochSchedule::from_parts(s, t_len, alpha, p, cfg.l, cfg.mu, rule))
        }
        Regime::ErrorBound => {
            let t1 = cfg.error_bound_t1()?;
            let (t_len, alpha) = if s <= cfg.s0 {
                (t1 << (s - 1), 0.5)
            } else {
                (t1 << (cfg.s0 - 1), 2.0 / ((s - cfg.s0) as f64 + 4.0))
            };
            Ok(EpochSchedule::from_parts(s, t_len, alpha, p, cfg.l, cfg.mu, ThetaRule::Smooth))
        }
    }
}

/// Number of epochs per restart cycle in the error-bound regime,
/// `ceil(4 + 4 sqrt(L / (mu_bar m)))`.
pub fn restart_length(cfg: &ScheduleConfig) -> Result<usize> {
    if cfg.regime != Regime::ErrorBound {
        return Err(Error::RegimeMismatch {
            expected: Regime::ErrorBound.name(),
            found: cfg.regime.name(),
        });
    }
    cfg.validate()?;
    let mb = cfg.mu_bar.unwrap();
    Ok(ceil_tolerant(4.0 + 4.0 * (cfg.l / (mb * cfg.m as f64)).sqrt()) as usize)
}

/// `C = sum_i 1 / (q_i m^2)`.
pub fn variance_constant(q: &[f64]) -> f64 {
    let m = q.len() as f64;
    q.iter().map(|qi| 1.0 / (qi * m * m)).sum()
}

/// Mini-batch sizes `(B_s, b_s)` for `s_total` epochs targeting accuracy
/// `epsilon` under per-query noise `sigma` (standard deviation).
///
/// Plans with `s_total <= s0` use `b1 = (2/3)^{s_total} 15 C sigma^2 / (L eps)`;
/// longer plans use `b1 = (2/3)^{s0} 30 C sigma^2 m / (L D0)` and
/// `b' = 10 C sigma^2 (s_total - s0) / (L eps)`, which needs `d0`.
pub fn make_batch_schedule(
    cfg: &ScheduleConfig,
    sigma: f64,
    c: f64,
    epsilon: f64,
    s_total: usize,
    d0: Option<f64>,
) -> Result<Vec<(usize, usize)>> {
    cfg.validate()?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(sigma >= 0.0) || !(c > 0.0) {
        return Err(Error::InvalidParameter("sigma must be nonnegative and C positive".into()));
    }
    if sigma == 0.0 {
        return Ok(vec![(1, 1); s_total]);
    }
    let var = sigma * sigma;
    let (l, s0) = (cfg.l, cfg.s0);
    let (b1, b_tail) = if s_total <= s0 {
        ((2.0f64 / 3.0).powi(s_total as i32) * 15.0 * c * var / (l * epsilon), 0.0)
    } else {
        let d0 = d0
            .filter(|d| *d > 0.0)
            .ok_or_else(|| Error::InvalidParameter("plans beyond s0 epochs need a positive D0".into()))?;
        let b1 = (2.0f64 / 3.0).powi(s0 as i32) * 30.0 * c * var * cfg.m as f64 / (l * d0);
        let tail = 10.0 * c * var * (s_total - s0) as f64 / (l * epsilon);
        (b1, tail)
    };
    let to_batch = |b: f64| ceil_tolerant(b).max(1.0) as usize;
    Ok((1..=s_total)
        .map(|j| {
            let b = if j <= s0 {
                to_batch(b1 * 1.5f64.powi(j as i32 - 1))
            } else {
                to_batch(b_tail)
            };
            (b, b)
        })
        .collect())
}

/// Epoch budget and batches for a stochastic run targeting `epsilon`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPlan {
    pub epochs: usize,
    pub batches: Vec<(usize, usize)>,
}

/// Chooses the epoch count from `(D0, epsilon)`: `min(ceil(log2(D0/eps)), s0)`
/// when `m >= D0/eps`, otherwise `ceil(s0 + sqrt(32 D0 / (m eps)) - 4)`.
pub fn plan_stochastic(cfg: &ScheduleConfig, sigma: f64, c: f64, epsilon: f64, d0: f64) -> Result<StochasticPlan> {
    if !(d0 > 0.0) || !(epsilon > 0.0) {
        return Err(Error::InvalidParameter("D0 and epsilon must be positive".into()));
    }
    let m = cfg.m as f64;
    let ratio = d0 / epsilon;
    let epochs = if m >= ratio {
        (ceil_tolerant(ratio.log2()).max(1.0) as usize).min(cfg.s0)
    } else {
        ceil_tolerant(cfg.s0 as f64 + (32.0 * ratio / m).sqrt() - 4.0) as usize
    };
    let batches = make_batch_schedule(cfg, sigma, c, epsilon, epochs, Some(d0))?;
    Ok(StochasticPlan { epochs, batches })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulePropertyReport {
    /// `w_s = L_s - R_{s+1}` for consecutive pairs.
    pub w: Vec<f64>,
    pub min_w: f64,
    pub negative: bool,
}

/// `L_s = gamma/alpha + (T-1) gamma (alpha+p)/alpha`.
pub fn lhs_weight(e: &EpochSchedule) -> f64 {
    e.gamma / e.alpha + (e.t_len as f64 - 1.0) * e.gamma * (e.alpha + e.p) / e.alpha
}

/// `R_s = gamma (1-alpha)/alpha + (T-1) gamma p / alpha`.
pub fn rhs_weight(e: &EpochSchedule) -> f64 {
    e.gamma * (1.0 - e.alpha) / e.alpha + (e.t_len as f64 - 1.0) * e.gamma * e.p / e.alpha
}

pub fn verify_schedule_property(schedules: &[EpochSchedule]) -> Result<SchedulePropertyReport> {
    if schedules.len() < 2 {
        return Err(Error::InvalidParameter("need at least two epochs".into()));
    }
    if schedules.iter().any(|e| e.theta_rule != ThetaRule::Smooth) {
        return Err(Error::InvalidParameter("schedule property applies to the smooth rule".into()));
    }
    let w: Vec<f64> = schedules
        .windows(2)
        .map(|pair| lhs_weight(&pair[0]) - rhs_weight(&pair[1]))
        .collect();
    let min_w = w.iter().copied().fold(f64::INFINITY, f64::min);
    // Round-off tolerance relative to the magnitude of L_s.
    let scale = schedules.iter().map(lhs_weight).fold(0.0, f64::max);
    Ok(SchedulePropertyReport {
        negative: min_w < -1e-12 * scale,
        w,
        min_w,
    })
}
