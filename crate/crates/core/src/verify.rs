//! Seed-averaged checks of traces against the theoretical gap envelopes.

use crate::error::{Error, Result};
use crate::schedule::{Regime, ScheduleConfig};
use crate::trace::RunTrace;

/// Multiplier on expectation bounds when comparing seed means.
pub const BOUND_SLACK: f64 = 1.5;
/// Per-cycle contraction guaranteed by one restart cycle.
pub const CYCLE_CONTRACTION: f64 = 5.0 / 16.0;
/// Multiplier on [`CYCLE_CONTRACTION`].
pub const CYCLE_SLACK: f64 = 1.15;
pub const MIN_SEEDS: usize = 10;

/// Expected-gap envelope after epoch `s >= 1` for the smooth and unified
/// regimes; `None` for the error-bound regime, which is checked per cycle.
pub fn gap_envelope(cfg: &ScheduleConfig, s: usize, d0: f64) -> Option<f64> {
    if s == 0 || cfg.regime == Regime::ErrorBound {
        return None;
    }
    let s0 = cfg.s0;
    if s <= s0 {
        return Some(0.5f64.powi(s as i32 + 1) * d0);
    }
    let m = cfg.m as f64;
    let sublinear = 16.0 * d0 / (((s - s0) as f64 + 4.0).powi(2) * m);
    if cfg.regime == Regime::Smooth || cfg.mu == 0.0 {
        return Some(sublinear);
    }
    let (l, mu) = (cfg.l, cfg.mu);
    if m >= 3.0 * l / (4.0 * mu) {
        return Some(0.8f64.powi(s as i32) * d0);
    }
    let s_bar = s0 as f64 + (12.0 * l / (m * mu)).sqrt() - 4.0;
    if (s as f64) <= s_bar {
        Some(sublinear)
    } else {
        let rate = 1.0 + (mu / (3.0 * m * l)).sqrt();
        Some(rate.powf(-m * (s as f64 - s_bar) / 2.0) * d0 * 4.0 * mu / (3.0 * l))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    /// Epoch index, or cycle index for the error-bound regime.
    pub index: usize,
    pub mean_gap: f64,
    pub bound: f64,
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
    pub max_ratio: f64,
    pub pass: bool,
}

impl BoundReport {
    fn from_checks(checks: Vec<BoundCheck>) -> Self {
        let max_ratio = checks.iter().map(|c| c.ratio).fold(0.0, f64::max);
        let pass = checks.iter().all(|c| c.pass);
        Self {
            checks,
            max_ratio,
            pass,
        }
    }
}

/// Mean gap across traces at each record position. Records without a finite
/// gap fall back to `objective - psi_star`.
pub fn mean_gaps(traces: &[RunTrace], psi_star: f64) -> Result<Vec<(usize, f64)>> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidParameter("no traces".into()))?;
    let len = traces.iter().map(|t| t.records.len()).min().unwrap_or(0);
    let mut out = Vec::with_capacity(len);
    for k in 0..len {
        let epoch = first.records[k].epoch;
        let mut sum = 0.0;
        for t in traces {
            let r = &t.records[k];
            if r.epoch != epoch {
                return Err(Error::InvalidParameter(format!(
                    "traces disagree on epoch numbering at position {k}"
                )));
            }
            sum += if r.gap.is_finite() { r.gap } else { r.objective - psi_star };
        }
        out.push((epoch, sum / traces.len() as f64));
    }
    Ok(out)
}

fn check_traces(traces: &[RunTrace], cfg: &ScheduleConfig) -> Result<()> {
    if traces.len() < MIN_SEEDS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_SEEDS} seeds, got {}",
            traces.len()
        )));
    }
    for t in traces {
        if t.header.regime != cfg.regime.name() {
            return Err(Error::RegimeMismatch {
                expected: cfg.regime.name(),
                found: t.header.regime.parse::<Regime>().map(|r| r.name()).unwrap_or("unknown"),
            });
        }
        if t.header.m != cfg.m {
            return Err(Error::InvalidParameter("trace and schedule disagree on m".into()));
        }
    }
    Ok(())
}

/// Compares seed-mean gaps with the envelope times [`BOUND_SLACK`] at every
/// epoch (smooth and unified regimes) or the per-cycle contraction with
/// [`CYCLE_CONTRACTION`] times [`CYCLE_SLACK`] (error-bound regime).
pub fn verify_bounds(traces: &[RunTrace], psi_star: f64, d0: f64, cfg: &ScheduleConfig) -> Result<BoundReport> {
    check_traces(traces, cfg)?;
    let means = mean_gaps(traces, psi_star)?;
    if cfg.regime == Regime::ErrorBound {
        return Ok(verify_cycles(&means, &traces[0].header.cycle_ends));
    }
    let checks = means
        .iter()
        .filter_map(|&(epoch, gap)| {
            gap_envelope(cfg, epoch, d0).map(|env| {
                let bound = BOUND_SLACK * env;
                BoundCheck {
                    index: epoch,
                    mean_gap: gap,
                    bound,
                    ratio: gap / bound,
                    pass: gap <= bound,
                }
            })
        })
        .collect();
    Ok(BoundReport::from_checks(checks))
}

/// Per-cycle ratios of mean gaps at consecutive cycle boundaries (epoch 0
/// opens the first cycle).
pub fn verify_cycles(means: &[(usize, f64)], cycle_ends: &[usize]) -> BoundReport {
    let at = |epoch: usize| means.iter().find(|(e, _)| *e == epoch).map(|(_, g)| *g);
    let limit = CYCLE_CONTRACTION * CYCLE_SLACK;
    let mut checks = Vec::new();
    let mut start = 0usize;
    for (k, &end) in cycle_ends.iter().enumerate() {
        if let (Some(g0), Some(g1)) = (at(start), at(end)) {
            let ratio = g1 / g0;
            checks.push(BoundCheck {
                index: k + 1,
                mean_gap: g1,
                bound: limit * g0,
                ratio: ratio / limit,
                pass: ratio <= limit,
            });
        }
        start = end;
    }
    BoundReport::from_checks(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_cases() {
        let smooth = ScheduleConfig::smooth(64, 1.0);
        assert_eq!(gap_envelope(&smooth, 3, 1.0), Some(1.0 / 16.0));
        assert_eq!(gap_envelope(&smooth, 8, 1.0), Some(16.0 / (25.0 * 64.0)));
        assert_eq!(gap_envelope(&smooth, 0, 1.0), None);
        let linear = ScheduleConfig::unified(100, 1.0, 0.01);
        assert_eq!(gap_envelope(&linear, 9, 2.0), Some(0.8f64.powi(9) * 2.0));
        // m = 16 < 3L/(4 mu) = 750, s_bar = 5 + sqrt(750) - 4
        let slow = ScheduleConfig::unified(16, 1.0, 1e-3);
        assert_eq!(gap_envelope(&slow, 10, 1.0), Some(16.0 / (81.0 * 16.0)));
        let s_bar = 1.0 + 750f64.sqrt();
        let expected = (1.0 + (1e-3 / 48.0f64).sqrt()).powf(-8.0 * (40.0 - s_bar)) * 4e-3 / 3.0;
        assert!((gap_envelope(&slow, 40, 1.0).unwrap() - expected).abs() < 1e-15);
        assert_eq!(gap_envelope(&ScheduleConfig::error_bound(10, 1.0, 0.1), 2, 1.0), None);
    }

    #[test]
    fn cycle_ratios() {
        let means = vec![(0, 1.0), (4, 0.3), (8, 0.2)];
        let r = verify_cycles(&means, &[4, 8]);
        assert_eq!(r.checks.len(), 2);
        assert!(r.checks[0].pass);
        assert!(!r.checks[1].pass);
        assert!(!r.pass);
    }
}
