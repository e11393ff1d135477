//! Options and bookkeeping shared by every solver loop.

use std::sync::Arc;
use std::time::Instant;

use crate::data::FactoredQuadraticGap;
use crate::problem::FiniteSumProblem;
use crate::trace::{EpochRecord, RunTrace, TraceHeader};

/// What gaps in a trace are measured against.
#[derive(Debug, Clone, Default, PartialEq)]
pub enum GapReference {
    /// Gaps are recorded as NaN.
    #[default]
    None,
    Value(f64),
    /// Known minimizer; gaps use [`FiniteSumProblem::objective_difference`],
    /// which stays accurate for very small gaps.
    Minimizer { x: Vec<f64>, value: f64 },
    /// Exact factored gap of a quadratic instance.
    Factored { gap: Arc<FactoredQuadraticGap>, value: f64 },
}

impl GapReference {
    pub fn gap(&self, problem: &FiniteSumProblem, x: &[f64], objective: f64) -> f64 {
        match self {
            GapReference::None => f64::NAN,
            GapReference::Value(v) => objective - v,
            GapReference::Minimizer { x: xs, .. } => problem.objective_difference(x, xs),
            GapReference::Factored { gap, .. } => gap.gap(x),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            GapReference::None => None,
            GapReference::Value(v)
            | GapReference::Minimizer { value: v, .. }
            | GapReference::Factored { value: v, .. } => Some(*v),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub gap_reference: GapReference,
    /// Stop after the first epoch whose gap is at most this value.
    pub gap_threshold: Option<f64>,
    /// Off by default so traces replay byte-identically; `wall_ms` is 0.
    pub record_wall_clock: bool,
    /// Keep every inner iterate `x_t` in the output.
    pub record_inner_iterates: bool,
    pub dataset: String,
}

/// Result of one solver run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub x: Vec<f64>,
    pub trace: RunTrace,
    /// Inner iterates in order, when requested.
    pub inner_iterates: Vec<Vec<f64>>,
}

pub(crate) struct Recorder<'a> {
    problem: &'a FiniteSumProblem,
    opts: &'a RunOptions,
    started: Instant,
    pub trace: RunTrace,
    pub inner_iterates: Vec<Vec<f64>>,
}

impl<'a> Recorder<'a> {
    pub fn new(problem: &'a FiniteSumProblem, opts: &'a RunOptions, mut header: TraceHeader) -> Self {
        header.dataset = opts.dataset.clone();
        Self {
            problem,
            opts,
            started: Instant::now(),
            trace: RunTrace::new(header),
            inner_iterates: Vec::new(),
        }
    }

    /// Appends a record for `x`; returns true when the gap threshold is met.
    pub fn record(&mut self, epoch: usize, grad_evals: u64, sfo_calls: u64, x: &[f64]) -> bool {
        let objective = self.problem.objective_unchecked(x);
        let gap = self.opts.gap_reference.gap(self.problem, x, objective);
        let wall_ms = if self.opts.record_wall_clock {
            self.started.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        self.trace.records.push(EpochRecord {
            epoch,
            grad_evals,
            sfo_calls,
            objective,
            gap,
            wall_ms,
        });
        matches!(self.opts.gap_threshold, Some(thr) if gap <= thr)
    }

    pub fn inner(&mut self, x: &[f64]) {
        if self.opts.record_inner_iterates {
            self.inner_iterates.push(x.to_vec());
        }
    }

    pub fn finish(self, x: Vec<f64>) -> RunOutput {
        RunOutput {
            x,
            trace: self.trace,
            inner_iterates: self.inner_iterates,
        }
    }
}
