//! Finite-sum composite problems `psi(x) = (1/m) sum_i f_i(x) + h(x)`.
//!
//! Components are indexed from 0 in this API.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, dot, matvec, norm_sq, power_iteration};

/// Floor applied to sampling probabilities, relative to the Lipschitz sum.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

const POWER_ITERATIONS: usize = 200;
const POWER_TOLERANCE: f64 = 1e-10;

/// A feature vector, dense or sparse (0-based indices, ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureVec {
    Dense(Vec<f64>),
    Sparse { indices: Vec<u32>, values: Vec<f64> },
}

impl FeatureVec {
    pub fn dot(&self, x: &[f64]) -> f64 {
        match self {
            FeatureVec::Dense(a) => dot(a, x),
            FeatureVec::Sparse { indices, values } => indices
                .iter()
                .zip(values)
                .map(|(&j, v)| v * x[j as usize])
                .sum(),
        }
    }

    /// `out += alpha * a`
    pub fn axpy_into(&self, alpha: f64, out: &mut [f64]) {
        match self {
            FeatureVec::Dense(a) => axpy(alpha, a, out),
            FeatureVec::Sparse { indices, values } => {
                for (&j, v) in indices.iter().zip(values) {
                    out[j as usize] += alpha * v;
                }
            }
        }
    }

    pub fn norm_sq(&self) -> f64 {
        match self {
            FeatureVec::Dense(a) => norm_sq(a),
            FeatureVec::Sparse { values, .. } => norm_sq(values),
        }
    }

    /// Smallest dimension able to hold this vector.
    pub fn min_dim(&self) -> usize {
        match self {
            FeatureVec::Dense(a) => a.len(),
            FeatureVec::Sparse { indices, .. } => indices.last().map_or(0, |&j| j as usize + 1),
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        match self {
            FeatureVec::Dense(a) => {
                let mut v = a.clone();
                v.resize(n, 0.0);
                v
            }
            FeatureVec::Sparse { indices, values } => {
                let mut v = vec![0.0; n];
                for (&j, &x) in indices.iter().zip(values) {
                    v[j as usize] = x;
                }
                v
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            FeatureVec::Dense(a) => a.iter().all(|v| v.is_finite()),
            FeatureVec::Sparse { values, .. } => values.iter().all(|v| v.is_finite()),
        }
    }
}

/// User-supplied smooth convex component.
pub trait SmoothFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);
    fn lipschitz(&self) -> f64;
}

#[derive(Debug, Clone)]
pub enum ComponentKind {
    /// `log(1 + exp(-b a^T x))`
    Logistic { a: FeatureVec, b: f64 },
    /// `0.5 (a^T x - b)^2 + ridge * ||x||^2`
    LeastSquares { a: FeatureVec, b: f64, ridge: f64 },
    /// `0.5 x^T Q x + q^T x`, `Q` row-major symmetric PSD.
    Quadratic { q_mat: Arc<[f64]>, q_vec: Vec<f64> },
    Custom(Arc<dyn SmoothFunction>),
}

/// One smooth component `f_i` together with its gradient Lipschitz constant.
#[derive(Debug, Clone)]
pub struct SmoothComponent {
    kind: ComponentKind,
    lipschitz: f64,
}

impl SmoothComponent {
    pub fn logistic(a: FeatureVec, b: f64) -> Self {
        let lipschitz = a.norm_sq() / 4.0;
        Self {
            kind: ComponentKind::Logistic { a, b },
            lipschitz,
        }
    }

    pub fn least_squares(a: FeatureVec, b: f64) -> Self {
        Self::ridge_least_squares(a, b, 0.0)
    }

    pub fn ridge_least_squares(a: FeatureVec, b: f64, ridge: f64) -> Self {
        let lipschitz = a.norm_sq() + 2.0 * ridge;
        Self {
            kind: ComponentKind::LeastSquares { a, b, ridge },
            lipschitz,
        }
    }

    /// Quadratic component; `q_mat` is row-major `n x n`. The Lipschitz
    /// constant is estimated by power iteration.
    pub fn quadratic(q_mat: Vec<f64>, q_vec: Vec<f64>) -> Result<Self> {
        let n = q_vec.len();
        check_dim(n * n, q_mat.len())?;
        for r in 0..n {
            for c in 0..r {
                let (a, b) = (q_mat[r * n + c], q_mat[c * n + r]);
                if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::InvalidProblem("quadratic matrix is not symmetric".into()));
                }
            }
        }
        let lipschitz = power_iteration(&q_mat, n, POWER_ITERATIONS, POWER_TOLERANCE);
        Ok(Self {
            kind: ComponentKind::Quadratic {
                q_mat: q_mat.into(),
                q_vec,
            },
            lipschitz,
        })
    }

    pub fn custom(f: Arc<dyn SmoothFunction>) -> Self {
        let lipschitz = f.lipschitz();
        Self {
            kind: ComponentKind::Custom(f),
            lipschitz,
        }
    }

    pub fn kind(&self) -> &ComponentKind {
        &self.kind
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn min_dim(&self) -> usize {
        match &self.kind {
            ComponentKind::Logistic { a, .. } | ComponentKind::LeastSquares { a, .. } => a.min_dim(),
            ComponentKind::Quadratic { q_vec, .. } => q_vec.len(),
            ComponentKind::Custom(f) => f.dim(),
        }
    }

    fn exact_dim(&self) -> Option<usize> {
        match &self.kind {
            ComponentKind::Logistic { a: FeatureVec::Dense(a), .. }
            | ComponentKind::LeastSquares { a: FeatureVec::Dense(a), .. } => Some(a.len()),
            ComponentKind::Quadratic { q_vec, .. } => Some(q_vec.len()),
            ComponentKind::Custom(f) => Some(f.dim()),
            _ => None,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ComponentKind::Logistic { a, b } => log1p_exp(-b * a.dot(x)),
            ComponentKind::LeastSquares { a, b, ridge } => {
                let r = a.dot(x) - b;
                let mut v = 0.5 * r * r;
                if *ridge != 0.0 {
                    v += ridge * norm_sq(x);
                }
                v
            }
            ComponentKind::Quadratic { q_mat, q_vec } => {
                let n = q_vec.len();
                let quad: f64 = q_mat
                    .chunks_exact(n)
                    .zip(x)
                    .map(|(row, xi)| xi * dot(row, x))
                    .sum();
                0.5 * quad + dot(q_vec, x)
            }
            ComponentKind::Custom(f) => f.value(x),
        }
    }

    /// Writes `grad f_i(x)` into `out` (overwriting it).
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            ComponentKind::Logistic { a, b } => {
                out.fill(0.0);
                let z = b * a.dot(x);
                // -b / (1 + exp(z)), stable for large |z|
                let coef = -b * sigmoid(-z);
                a.axpy_into(coef, out);
            }
            ComponentKind::LeastSquares { a, b, ridge } => {
                if *ridge != 0.0 {
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = 2.0 * ridge * xi;
                    }
                } else {
                    out.fill(0.0);
                }
                let r = a.dot(x) - b;
                a.axpy_into(r, out);
            }
            ComponentKind::Quadratic { q_mat, q_vec } => {
                matvec(q_mat, q_vec.len(), x, out);
                for (o, q) in out.iter_mut().zip(q_vec) {
                    *o += q;
                }
            }
            ComponentKind::Custom(f) => f.gradient_into(x, out),
        }
    }

    /// `f_i(x) - f_i(y)`, computed from the difference `x - y` where the
    /// component is quadratic so that tiny gaps keep their relative accuracy.
    pub fn value_difference(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            ComponentKind::Quadratic { q_mat, q_vec } => {
                // f(x) - f(y) = <Q (x + y)/2 + q, x - y>
                let n = q_vec.len();
                let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
                let mut qm = vec![0.0; n];
                matvec(q_mat, n, &mid, &mut qm);
                qm.iter().zip(q_vec).zip(&d).map(|((a, q), di)| (a + q) * di).sum()
            }
            ComponentKind::LeastSquares { a, b, ridge } => {
                let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
                let ad = a.dot(&d);
                let ry = a.dot(y) - b;
                // 0.5 (r_y + a.d)^2 - 0.5 r_y^2 = a.d (r_y + 0.5 a.d)
                let mut v = ad * (ry + 0.5 * ad);
                if *ridge != 0.0 {
                    let s: f64 = d.iter().zip(y).map(|(di, yi)| di * (2.0 * yi + di)).sum();
                    v += ridge * s;
                }
                v
            }
            _ => self.value(x) - self.value(y),
        }
    }
}

/// `ln(1 + e^t)` without overflow.
pub fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// `1 / (1 + e^{-t})`
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// The nonsmooth term `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "weight", rename_all = "snake_case")]
pub enum Regularizer {
    Zero,
    /// `lambda * ||x||_1`
    L1(f64),
    /// `lambda * ||x||_2^2`
    L2Squared(f64),
    /// Indicator of the problem's box feasible set.
    BoxIndicator,
}

impl Regularizer {
    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::Zero => "zero",
            Regularizer::L1(_) => "l1",
            Regularizer::L2Squared(_) => "l2_squared",
            Regularizer::BoxIndicator => "box_indicator",
        }
    }

    pub fn weight(&self) -> f64 {
        match self {
            Regularizer::L1(w) | Regularizer::L2Squared(w) => *w,
            _ => 0.0,
        }
    }

    /// Value of `h` at `x`; the box indicator is checked separately.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Regularizer::Zero | Regularizer::BoxIndicator => 0.0,
            Regularizer::L1(w) => w * x.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::L2Squared(w) => w * norm_sq(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibleSet {
    Unbounded,
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl FeasibleSet {
    pub fn name(&self) -> &'static str {
        match self {
            FeasibleSet::Unbounded => "unbounded",
            FeasibleSet::Box { .. } => "box",
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            FeasibleSet::Unbounded => true,
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi),
        }
    }

    pub fn project(&self, x: &mut [f64]) {
        if let FeasibleSet::Box { lower, upper } = self {
            for (v, (lo, hi)) in x.iter_mut().zip(lower.iter().zip(upper)) {
                *v = v.clamp(*lo, *hi);
            }
        }
    }
}

/// Aggregated smoothness data of a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzSummary {
    /// Mean Lipschitz constant `L = (1/m) sum L_i`.
    pub mean: f64,
    /// `L_Q = (1/m) max_i L_i / q_i`.
    pub l_q: f64,
    /// Sampling distribution `q`.
    pub probabilities: Vec<f64>,
}

/// Immutable finite-sum problem. Safe to share across concurrent runs.
#[derive(Debug, Clone)]
pub struct FiniteSumProblem {
    components: Vec<SmoothComponent>,
    regularizer: Regularizer,
    feasible: FeasibleSet,
    mu: f64,
    dim: usize,
}

impl FiniteSumProblem {
    pub fn new(
        components: Vec<SmoothComponent>,
        regularizer: Regularizer,
        feasible: FeasibleSet,
        mu: f64,
        dim: usize,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidProblem("at least one component required".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidProblem("dimension must be positive".into()));
        }
        for (i, c) in components.iter().enumerate() {
            match c.exact_dim() {
                Some(d) if d != dim => {
                    return Err(Error::InvalidProblem(format!(
                        "component {i} has dimension {d}, expected {dim}"
                    )))
                }
                _ if c.min_dim() > dim => {
                    return Err(Error::InvalidProblem(format!(
                        "component {i} needs dimension {}",
                        c.min_dim()
                    )))
                }
                _ => {}
            }
            if let ComponentKind::Logistic { a, .. } | ComponentKind::LeastSquares { a, .. } = &c.kind {
                if !a.is_finite() {
                    return Err(Error::InvalidProblem(format!("component {i} has non-finite features")));
                }
            }
            if !(c.lipschitz.is_finite() && c.lipschitz >= 0.0) {
                return Err(Error::InvalidProblem(format!(
                    "component {i} has invalid Lipschitz constant {}",
                    c.lipschitz
                )));
            }
        }
        let w = regularizer.weight();
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidProblem("regularizer weight must be nonnegative".into()));
        }
        if let FeasibleSet::Box { lower, upper } = &feasible {
            check_dim(dim, lower.len())?;
            check_dim(dim, upper.len())?;
            if lower.iter().zip(upper).any(|(l, u)| l > u) {
                return Err(Error::InvalidProblem("box lower bound exceeds upper bound".into()));
            }
        }
        if matches!(regularizer, Regularizer::BoxIndicator) && !matches!(feasible, FeasibleSet::Box { .. }) {
            return Err(Error::InvalidProblem("box indicator requires a box feasible set".into()));
        }
        let problem = Self {
            components,
            regularizer,
            feasible,
            mu: 0.0,
            dim,
        };
        problem.with_mu(mu)
    }

    /// Replaces the strong-convexity modulus.
    pub fn with_mu(mut self, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::InvalidProblem("mu must be nonnegative".into()));
        }
        let l = self.mean_lipschitz();
        if mu > l * (1.0 + 1e-12) {
            return Err(Error::InvalidProblem(format!("mu = {mu} exceeds mean Lipschitz constant {l}")));
        }
        self.mu = mu;
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    pub fn feasible_set(&self) -> &FeasibleSet {
        &self.feasible
    }

    pub fn components(&self) -> &[SmoothComponent] {
        &self.components
    }

    pub fn component(&self, i: usize) -> Result<&SmoothComponent> {
        self.components
            .get(i)
            .ok_or(Error::IndexOutOfRange { index: i, m: self.m() })
    }

    pub fn mean_lipschitz(&self) -> f64 {
        self.components.iter().map(|c| c.lipschitz).sum::<f64>() / self.m() as f64
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        if !self.feasible.contains(x) {
            return Err(Error::Infeasible);
        }
        Ok(())
    }

    /// `psi(x) = (1/m) sum f_i(x) + h(x)`.
    pub fn eval_objective(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.objective_unchecked(x))
    }

    pub(crate) fn objective_unchecked(&self, x: &[f64]) -> f64 {
        self.smooth_value(x) + self.regularizer.value(x)
    }

    /// `f(x) = (1/m) sum f_i(x)`.
    pub fn smooth_value(&self, x: &[f64]) -> f64 {
        self.components.iter().map(|c| c.value(x)).sum::<f64>() / self.m() as f64
    }

    /// `psi(x) - psi(y)` with improved accuracy when `x` is close to `y`.
    pub fn objective_difference(&self, x: &[f64], y: &[f64]) -> f64 {
        let smooth = self
            .components
            .iter()
            .map(|c| c.value_difference(x, y))
            .sum::<f64>()
            / self.m() as f64;
        smooth + self.regularizer.value(x) - self.regularizer.value(y)
    }

    pub fn eval_component_gradient(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        let c = self.component(i)?;
        check_dim(self.dim, x.len())?;
        let mut g = vec![0.0; self.dim];
        c.gradient_into(x, &mut g);
        Ok(g)
    }

    pub fn eval_full_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        let mut g = vec![0.0; self.dim];
        self.full_gradient_into(x, &mut g);
        Ok(g)
    }

    pub(crate) fn full_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut buf = vec![0.0; self.dim];
        for c in &self.components {
            c.gradient_into(x, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += b;
            }
        }
        let inv = 1.0 / self.m() as f64;
        for o in out.iter_mut() {
            *o *= inv;
        }
    }

    /// Mean Lipschitz constant, sampling distribution `q_i ∝ L_i` (floored at
    /// `1e-12 * sum L` and renormalized) and `L_Q`.
    pub fn aggregate_lipschitz(&self) -> Result<LipschitzSummary> {
        let ls: Vec<f64> = self.components.iter().map(|c| c.lipschitz).collect();
        aggregate_lipschitz(&ls)
    }
}

/// See [`FiniteSumProblem::aggregate_lipschitz`].
pub fn aggregate_lipschitz(lipschitz: &[f64]) -> Result<LipschitzSummary> {
    let m = lipschitz.len();
    if m == 0 {
        return Err(Error::InvalidProblem("no components".into()));
    }
    let total: f64 = lipschitz.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroLipschitz);
    }
    let floor = PROBABILITY_FLOOR * total;
    let floored: Vec<f64> = lipschitz.iter().map(|&l| l.max(floor)).collect();
    let z: f64 = floored.iter().sum();
    let probabilities: Vec<f64> = floored.iter().map(|l| l / z).collect();
    let l_q = lipschitz
        .iter()
        .zip(&probabilities)
        .map(|(l, q)| l / q)
        .fold(0.0, f64::max)
        / m as f64;
    Ok(LipschitzSummary {
        mean: total / m as f64,
        l_q,
        probabilities,
    })
}
