//! Bregman prox-function and the composite prox-mapping
//!
//! ```text
//! argmin_{x in X} gamma * [<g, x> + h(x) + mu * V(u0, x)] + V(x0, x)
//! ```

use crate::error::{check_dim, Error, Result};
use crate::linalg::dist_sq;
use crate::problem::{FeasibleSet, Regularizer};

/// Distance-generating geometry. Only the Euclidean kind exists today; solver
/// code goes through this type so other kinds can be added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BregmanGeometry {
    #[default]
    Euclidean,
}

impl BregmanGeometry {
    /// `V(a, x)`; for the Euclidean kind `0.5 * ||x - a||^2`.
    pub fn distance(&self, a: &[f64], x: &[f64]) -> Result<f64> {
        check_dim(a.len(), x.len())?;
        Ok(self.distance_unchecked(a, x))
    }

    pub(crate) fn distance_unchecked(&self, a: &[f64], x: &[f64]) -> f64 {
        match self {
            BregmanGeometry::Euclidean => 0.5 * dist_sq(a, x),
        }
    }
}

/// Inputs of one prox-mapping evaluation.
#[derive(Debug, Clone, Copy)]
pub struct ProxRequest<'a> {
    /// Gradient estimate.
    pub g: &'a [f64],
    /// Prox center.
    pub x0: &'a [f64],
    /// Strong-convexity center.
    pub u0: &'a [f64],
    pub gamma: f64,
    pub mu: f64,
}

/// Coordinatewise soft-thresholding `sign(c) * max(|c| - tau, 0)`.
#[inline]
pub fn soft_threshold(c: f64, tau: f64) -> f64 {
    if c > tau {
        c - tau
    } else if c < -tau {
        c + tau
    } else {
        0.0
    }
}

/// Checks that the (regularizer, feasible set) pair has a closed-form prox.
pub fn check_supported(reg: Regularizer, feasible: &FeasibleSet) -> Result<()> {
    match (reg, feasible) {
        (Regularizer::Zero | Regularizer::L1(_) | Regularizer::L2Squared(_), FeasibleSet::Unbounded)
        | (Regularizer::Zero | Regularizer::BoxIndicator, FeasibleSet::Box { .. }) => Ok(()),
        _ => Err(Error::UnsupportedProx {
            regularizer: reg.name(),
            feasible: feasible.name(),
        }),
    }
}

/// Exact minimizer of the prox-mapping, written into `out`.
pub fn solve_prox_into(
    geom: BregmanGeometry,
    req: &ProxRequest<'_>,
    reg: Regularizer,
    feasible: &FeasibleSet,
    out: &mut [f64],
) -> Result<()> {
    if !(req.gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {}", req.gamma)));
    }
    if !(req.mu >= 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be nonnegative, got {}", req.mu)));
    }
    let n = req.x0.len();
    check_dim(n, req.g.len())?;
    check_dim(n, req.u0.len())?;
    check_dim(n, out.len())?;
    check_supported(reg, feasible)?;
    let BregmanGeometry::Euclidean = geom;

    let gm = req.gamma * req.mu;
    let denom = 1.0 + gm;
    // Center of the smooth part of the prox objective.
    for (o, ((x0, u0), g)) in out.iter_mut().zip(req.x0.iter().zip(req.u0).zip(req.g)) {
        *o = (x0 + gm * u0 - req.gamma * g) / denom;
    }
    match reg {
        Regularizer::Zero | Regularizer::BoxIndicator => feasible.project(out),
        Regularizer::L1(lambda) => {
            let tau = req.gamma * lambda / denom;
            for o in out.iter_mut() {
                *o = soft_threshold(*o, tau);
            }
        }
        Regularizer::L2Squared(lambda) => {
            let shrink = denom / (denom + 2.0 * req.gamma * lambda);
            for o in out.iter_mut() {
                *o *= shrink;
            }
        }
    }
    Ok(())
}

pub fn solve_prox(
    geom: BregmanGeometry,
    req: &ProxRequest<'_>,
    reg: Regularizer,
    feasible: &FeasibleSet,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; req.x0.len()];
    solve_prox_into(geom, req, reg, feasible, &mut out)?;
    Ok(out)
}

/// Value of the prox objective at `x`.
pub fn prox_objective(geom: BregmanGeometry, req: &ProxRequest<'_>, reg: Regularizer, x: &[f64]) -> f64 {
    let lin: f64 = req.g.iter().zip(x).map(|(g, v)| g * v).sum();
    req.gamma * (lin + reg.value(x) + req.mu * geom.distance_unchecked(req.u0, x))
        + geom.distance_unchecked(req.x0, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bregman_examples() {
        let g = BregmanGeometry::Euclidean;
        assert_eq!(g.distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(g.distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5);
        assert!(g.distance(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn stationary_center() {
        let x0 = [0.3, -2.0];
        let req = ProxRequest {
            g: &[0.0, 0.0],
            x0: &x0,
            u0: &[5.0, 5.0],
            gamma: 0.7,
            mu: 0.0,
        };
        let x = solve_prox(BregmanGeometry::Euclidean, &req, Regularizer::Zero, &FeasibleSet::Unbounded).unwrap();
        assert_eq!(x, x0.to_vec());
    }

    #[test]
    fn box_clamps() {
        let req = ProxRequest {
            g: &[-10.0, 10.0],
            x0: &[0.0, 0.0],
            u0: &[0.0, 0.0],
            gamma: 1.0,
            mu: 0.0,
        };
        let set = FeasibleSet::Box {
            lower: vec![-1.0, -1.0],
            upper: vec![1.0, 1.0],
        };
        let x = solve_prox(BregmanGeometry::Euclidean, &req, Regularizer::Zero, &set).unwrap();
        assert_eq!(x, vec![1.0, -1.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let req = ProxRequest {
            g: &[0.0],
            x0: &[0.0],
            u0: &[0.0],
            gamma: 0.0,
            mu: 0.0,
        };
        assert!(matches!(
            solve_prox(BregmanGeometry::Euclidean, &req, Regularizer::Zero, &FeasibleSet::Unbounded),
            Err(Error::InvalidParameter(_))
        ));
        let req = ProxRequest { gamma: 1.0, ..req };
        let set = FeasibleSet::Box {
            lower: vec![-1.0],
            upper: vec![1.0],
        };
        assert!(matches!(
            solve_prox(BregmanGeometry::Euclidean, &req, Regularizer::L1(0.1), &set),
            Err(Error::UnsupportedProx { .. })
        ));
    }
}
