//! High-accuracy reference solutions: `psi*` and the initial-condition
//! constant `D0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{dist_sq, norm};
use crate::problem::{ComponentKind, FeasibleSet, FeatureVec, FiniteSumProblem, Regularizer};
use crate::prox::{solve_prox_into, BregmanGeometry, ProxRequest};

#[derive(Debug, Clone, PartialEq)]
pub struct PsiStar {
    pub value: f64,
    pub x: Vec<f64>,
    /// False when the iterates were still drifting at termination, which
    /// happens when the infimum is not attained.
    pub attained: bool,
    /// 0 for closed-form solutions.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Consecutive small objective changes required to stop.
    pub patience: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iter: 2_000_000,
            patience: 50,
        }
    }
}

pub fn compute_psi_star(problem: &FiniteSumProblem, tol: f64) -> Result<PsiStar> {
    compute_psi_star_with(
        problem,
        &OracleOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn compute_psi_star_with(problem: &FiniteSumProblem, opts: &OracleOptions) -> Result<PsiStar> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if let Some(sol) = closed_form(problem)? {
        return Ok(sol);
    }
    restarted_fista(problem, opts)
}

/// Normal equations for problems whose smooth part is quadratic and whose
/// regularizer is zero or squared-l2, on the whole space.
fn closed_form(problem: &FiniteSumProblem) -> Result<Option<PsiStar>> {
    if !matches!(problem.feasible_set(), FeasibleSet::Unbounded) {
        return Ok(None);
    }
    let reg_weight = match problem.regularizer() {
        Regularizer::Zero => 0.0,
        Regularizer::L2Squared(l) => l,
        _ => return Ok(None),
    };
    let n = problem.dim();
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut c = DVector::<f64>::zeros(n);
    for comp in problem.components() {
        match comp.kind() {
            ComponentKind::Quadratic { q_mat, q_vec } => {
                h += DMatrix::from_row_slice(n, n, q_mat);
                c += DVector::from_column_slice(q_vec);
            }
            ComponentKind::LeastSquares { a, b, ridge } => {
                let dense = match a {
                    FeatureVec::Dense(v) if v.len() == n => DVector::from_column_slice(v),
                    other => DVector::from_vec(other.to_dense(n)),
                };
                h += &dense * dense.transpose();
                for k in 0..n {
                    h[(k, k)] += 2.0 * ridge;
                }
                c -= dense * *b;
            }
            _ => return Ok(None),
        }
    }
    let m = problem.m() as f64;
    h /= m;
    c /= m;
    for k in 0..n {
        h[(k, k)] += 2.0 * reg_weight;
    }
    let rhs = -c;
    let x = match h.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => {
            let svd = h.svd(true, true);
            let max_sv = svd.singular_values.max();
            svd.solve(&rhs, 1e-12 * max_sv.max(f64::MIN_POSITIVE))
                .map_err(|e| Error::InvalidProblem(format!("normal equations: {e}")))?
        }
    };
    let x: Vec<f64> = x.iter().copied().collect();
    let value = problem.eval_objective(&x)?;
    Ok(Some(PsiStar {
        value,
        x,
        attained: true,
        iterations: 0,
    }))
}

/// Accelerated proximal gradient with function-value restart. Stops after
/// `patience` consecutive iterations whose objective change is below
/// `tol * max(1, |psi|)`.
fn restarted_fista(problem: &FiniteSumProblem, opts: &OracleOptions) -> Result<PsiStar> {
    let n = problem.dim();
    let l = problem
        .components()
        .iter()
        .map(|c| c.lipschitz())
        .sum::<f64>()
        / problem.m() as f64;
    if !(l > 0.0) {
        return Err(Error::ZeroLipschitz);
    }
    let step = 1.0 / l;
    let reg = problem.regularizer();
    let feasible = problem.feasible_set();
    let mut x = vec![0.0; n];
    feasible.project(&mut x);
    let mut x_prev = x.clone();
    let mut y = x.clone();
    let mut grad = vec![0.0; n];
    let mut t = 1.0f64;
    let mut psi = problem.eval_objective(&x)?;
    let mut calm = 0usize;
    let mut snapshot = x.clone();
    let mut snapshot_at = 1usize;

    for k in 1..=opts.max_iter {
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
        let psi_next = problem.eval_objective(&x)?;
        if psi_next > psi {
            // Momentum overshoot: drop it and take a plain step from x_prev.
            t = 1.0;
            problem.full_gradient_into(&x_prev, &mut grad);
            let req = ProxRequest {
                g: &grad,
                x0: &x_prev,
                u0: &x_prev,
                gamma: step,
                mu: 0.0,
            };
            solve_prox_into(BregmanGeometry::Euclidean, &req, reg, feasible, &mut x)?;
            let psi_plain = problem.eval_objective(&x)?;
            let change = (psi - psi_plain).abs();
            psi = psi_plain.min(psi);
            x_prev.copy_from_slice(&x);
            calm = if change < opts.tol * psi.abs().max(1.0) { calm + 1 } else { 0 };
        } else {
            t = t_next;
            let change = psi - psi_next;
            psi = psi_next;
            calm = if change < opts.tol * psi.abs().max(1.0) { calm + 1 } else { 0 };
        }
        if k == 2 * snapshot_at {
            snapshot.copy_from_slice(&x);
            snapshot_at = k;
        }
        if calm >= opts.patience {
            let drift = dist_sq(&x, &snapshot).sqrt();
            return Ok(PsiStar {
                value: psi,
                attained: drift <= 1e-6 * norm(&x).max(1.0),
                x,
                iterations: k,
            });
        }
    }
    Err(Error::OracleBudgetExhausted {
        iterations: opts.max_iter,
    })
}

/// `D0 = 2 [psi(x0) - psi*] + 3 L V(x0, x*)` with the Euclidean `V`.
pub fn d0(problem: &FiniteSumProblem, x0: &[f64], psi_star: f64, x_star: &[f64], l: f64) -> Result<f64> {
    let psi0 = problem.eval_objective(x0)?;
    crate::error::check_dim(x0.len(), x_star.len())?;
    Ok(2.0 * (psi0 - psi_star) + 3.0 * l * 0.5 * dist_sq(x0, x_star))
}
