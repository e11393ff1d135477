//! Component gradients and the prox-mapping checked against independent
//! numerical oracles.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varag::problem::SmoothComponent;
use varag::prox::prox_objective;
use varag::{solve_prox, BregmanGeometry, FeasibleSet, FeatureVec, FiniteSumProblem, ProxRequest, Regularizer};

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect()
}

fn random_components(rng: &mut ChaCha8Rng, n: usize) -> Vec<SmoothComponent> {
    let a = random_vec(rng, n, 1.0);
    let b = random_vec(rng, 1, 2.0)[0];
    let g = random_vec(rng, n * n, 1.0);
    // G^T G is symmetric positive semidefinite.
    let mut q = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            q[r * n + c] = (0..n).map(|k| g[k * n + r] * g[k * n + c]).sum();
        }
    }
    let sparse_idx: Vec<u32> = (0..n as u32).step_by(2).collect();
    let sparse_val = random_vec(rng, sparse_idx.len(), 1.0);
    vec![
        SmoothComponent::logistic(FeatureVec::Dense(a.clone()), if b > 0.0 { 1.0 } else { -1.0 }),
        SmoothComponent::least_squares(FeatureVec::Dense(a.clone()), b),
        SmoothComponent::ridge_least_squares(FeatureVec::Dense(a), b, 0.3),
        SmoothComponent::quadratic(q, random_vec(rng, n, 1.0)).unwrap(),
        SmoothComponent::logistic(
            FeatureVec::Sparse {
                indices: sparse_idx,
                values: sparse_val,
            },
            1.0,
        ),
    ]
}

fn gradient(c: &SmoothComponent, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    c.gradient_into(x, &mut g);
    g
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 6;
    for _ in 0..20 {
        for c in random_components(&mut rng, n) {
            let x = random_vec(&mut rng, n, 2.0);
            let g = gradient(&c, &x);
            let h = 1e-6;
            for j in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (c.value(&xp) - c.value(&xm)) / (2.0 * h);
                let tol = 1e-5 * g[j].abs().max(1.0);
                assert!((fd - g[j]).abs() <= tol, "{:?} coord {j}: fd {fd} vs {}", c.kind(), g[j]);
            }
        }
    }
}

#[test]
fn full_gradient_is_mean_of_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 5;
    let comps: Vec<_> = (0..10)
        .map(|_| SmoothComponent::least_squares(FeatureVec::Dense(random_vec(&mut rng, n, 1.0)), rng.random()))
        .collect();
    let x = random_vec(&mut rng, n, 1.0);
    let mut expected = vec![0.0; n];
    for c in &comps {
        for (e, g) in expected.iter_mut().zip(gradient(c, &x)) {
            *e += g / 10.0;
        }
    }
    let p = FiniteSumProblem::new(comps, Regularizer::Zero, FeasibleSet::Unbounded, 0.0, n).unwrap();
    let full = p.eval_full_gradient(&x).unwrap();
    for (a, b) in full.iter().zip(&expected) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn lipschitz_constant_of_feature_pair() {
    let c = SmoothComponent::logistic(FeatureVec::Dense(vec![3.0, 4.0]), 1.0);
    assert_eq!(c.lipschitz(), 6.25);
}

proptest! {
    #[test]
    fn components_are_convex_and_smooth(seed in 0u64..500, scale in 0.1f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 4;
        for c in random_components(&mut rng, n) {
            let x = random_vec(&mut rng, n, scale);
            let y = random_vec(&mut rng, n, scale);
            let g = gradient(&c, &x);
            let lin = c.value(&x) + g.iter().zip(x.iter().zip(&y)).map(|(g, (a, b))| g * (b - a)).sum::<f64>();
            let d2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
            let fy = c.value(&y);
            let tol = 1e-9 * (1.0 + fy.abs());
            prop_assert!(fy >= lin - tol);
            prop_assert!(fy <= lin + 0.5 * c.lipschitz() * d2 + tol);
        }
    }
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    while hi - lo > tol {
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
        a = hi - r * (hi - lo);
        b = lo + r * (hi - lo);
    }
    0.5 * (lo + hi)
}

#[test]
fn l1_prox_one_dimensional() {
    let req = ProxRequest {
        g: &[0.3],
        x0: &[1.0],
        u0: &[0.0],
        gamma: 1.0,
        mu: 0.0,
    };
    let reg = Regularizer::L1(0.2);
    let out = solve_prox(BregmanGeometry::Euclidean, &req, reg, &FeasibleSet::Unbounded).unwrap();
    assert!((out[0] - 0.5).abs() < 1e-15);
    let oracle = golden_section(|v| prox_objective(BregmanGeometry::Euclidean, &req, reg, &[v]), -3.0, 3.0, 1e-10);
    assert!((out[0] - oracle).abs() < 1e-8);
}

/// Gradient descent on the smooth prox objective, projected onto the box.
fn projected_gradient(req: &ProxRequest<'_>, lambda_sq: f64, feasible: &FeasibleSet) -> Vec<f64> {
    let n = req.x0.len();
    let curvature = 1.0 + req.gamma * req.mu + 2.0 * req.gamma * lambda_sq;
    let step = 1.0 / curvature;
    let mut x = req.x0.to_vec();
    for _ in 0..10_000 {
        for j in 0..n {
            let grad = req.gamma * (req.g[j] + 2.0 * lambda_sq * x[j] + req.mu * (x[j] - req.u0[j])) + (x[j] - req.x0[j]);
            x[j] -= step * grad;
        }
        feasible.project(&mut x);
    }
    x
}

#[test]
fn l2_prox_matches_projected_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let (g, x0, u0) = (random_vec(&mut rng, 2, 2.0), random_vec(&mut rng, 2, 2.0), random_vec(&mut rng, 2, 2.0));
        let req = ProxRequest {
            g: &g,
            x0: &x0,
            u0: &u0,
            gamma: 0.7,
            mu: 0.5,
        };
        let out = solve_prox(BregmanGeometry::Euclidean, &req, Regularizer::L2Squared(0.1), &FeasibleSet::Unbounded).unwrap();
        let oracle = projected_gradient(&req, 0.1, &FeasibleSet::Unbounded);
        for (a, b) in out.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-7);
        }
        let boxed = FeasibleSet::Box {
            lower: vec![-0.5, -0.5],
            upper: vec![0.5, 0.5],
        };
        let out = solve_prox(BregmanGeometry::Euclidean, &req, Regularizer::BoxIndicator, &boxed).unwrap();
        let oracle = projected_gradient(&req, 0.0, &boxed);
        for (a, b) in out.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-7);
        }
    }
}

fn prox_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64, f64, usize)> {
    let v = || prop::collection::vec(-3.0f64..3.0, 3);
    (v(), v(), v(), v(), 0.01f64..5.0, 0.0f64..3.0, 0usize..4)
}

fn setup(kind: usize) -> (Regularizer, FeasibleSet) {
    match kind {
        0 => (Regularizer::Zero, FeasibleSet::Unbounded),
        1 => (Regularizer::L1(0.4), FeasibleSet::Unbounded),
        2 => (Regularizer::L2Squared(0.25), FeasibleSet::Unbounded),
        _ => (
            Regularizer::BoxIndicator,
            FeasibleSet::Box {
                lower: vec![-1.0; 3],
                upper: vec![1.0; 3],
            },
        ),
    }
}

proptest! {
    /// The prox objective is (1 + mu gamma)-strongly convex with respect to
    /// `V`, so its minimizer `x+` satisfies
    /// `Phi(u) >= Phi(x+) + (1 + mu gamma) V(x+, u)` for every feasible `u`.
    #[test]
    fn three_point_inequality((g, x0, u0, u, gamma, mu, kind) in prox_case()) {
        let (reg, feasible) = setup(kind);
        let geom = BregmanGeometry::Euclidean;
        let req = ProxRequest { g: &g, x0: &x0, u0: &u0, gamma, mu };
        let xp = solve_prox(geom, &req, reg, &feasible).unwrap();
        prop_assert!(feasible.contains(&xp));
        let mut u = u;
        feasible.project(&mut u);
        let lhs = prox_objective(geom, &req, reg, &xp) + (1.0 + mu * gamma) * geom.distance(&xp, &u).unwrap();
        let rhs = prox_objective(geom, &req, reg, &u);
        prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs.abs()));
    }

    #[test]
    fn prox_is_nonexpansive_in_the_gradient((g, x0, u0, h, gamma, mu, kind) in prox_case()) {
        let (reg, feasible) = setup(kind);
        let geom = BregmanGeometry::Euclidean;
        let a = solve_prox(geom, &ProxRequest { g: &g, x0: &x0, u0: &u0, gamma, mu }, reg, &feasible).unwrap();
        let b = solve_prox(geom, &ProxRequest { g: &h, x0: &x0, u0: &u0, gamma, mu }, reg, &feasible).unwrap();
        let da: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let dg: f64 = g.iter().zip(&h).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        prop_assert!(da <= gamma / (1.0 + gamma * mu) * dg + 1e-12);
    }

    #[test]
    fn euclidean_distance_is_half_squared_norm(a in prop::collection::vec(-5.0f64..5.0, 4), x in prop::collection::vec(-5.0f64..5.0, 4)) {
        let v = BregmanGeometry::Euclidean.distance(&a, &x).unwrap();
        let half: f64 = 0.5 * a.iter().zip(&x).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        prop_assert!((v - half).abs() <= 1e-12 * (1.0 + half));
    }
}
