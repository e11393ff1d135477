//! Dataset round trips and problem builders against dense linear algebra
//! written out here.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varag::data::{
    geometric_spectrum, make_eb_quadratic, make_lasso_problem, make_logistic_problem, make_ridge_problem, parse_csv,
    parse_libsvm, synthetic_regression, write_libsvm,
};
use varag::problem::ComponentKind;
use varag::{compute_psi_star, Dataset, FeatureVec};

/// Cyclic Jacobi rotations; returns eigenvalues and column eigenvectors
/// (row-major `n x n`).
fn jacobi_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for k in 0..n {
        v[k * n + k] = 1.0;
    }
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|k| a[k * n + k]).collect(), v)
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Vec<f64> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap();
        for k in 0..n {
            a.swap(col * n + k, piv * n + k);
        }
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            for k in col..n {
                a[r * n + k] -= f * a[col * n + k];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r * n + k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    x
}

#[test]
fn eb_instance_satisfies_the_error_bound() {
    let (m, n) = (40, 8);
    let inst = make_eb_quadratic(m, n, &geometric_spectrum(5, 1.0, 1e-2), 3).unwrap();
    let mut mean = vec![0.0; n * n];
    for c in inst.problem.components() {
        let ComponentKind::Quadratic { q_mat, .. } = c.kind() else {
            panic!("expected quadratic components")
        };
        for (o, v) in mean.iter_mut().zip(q_mat.iter()) {
            *o += v / m as f64;
        }
    }
    let (eig, vecs) = jacobi_eigen(mean, n);
    let top = eig.iter().copied().fold(0.0, f64::max);
    let range: Vec<usize> = (0..n).filter(|&k| eig[k] > 1e-10 * top).collect();
    assert_eq!(range.len(), 5, "rank-deficient mean Hessian");
    assert_eq!(inst.problem.mu(), 0.0);
    let mu_bar = range.iter().map(|&k| eig[k]).fold(f64::INFINITY, f64::min);
    assert!((mu_bar - inst.mu_bar).abs() <= 1e-8 * inst.mu_bar);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let x: Vec<f64> = (0..n).map(|_| 4.0 * rng.random::<f64>() - 2.0).collect();
        let d: Vec<f64> = x.iter().zip(&inst.x_star).map(|(a, b)| a - b).collect();
        let dist_sq: f64 = range
            .iter()
            .map(|&k| (0..n).map(|r| vecs[r * n + k] * d[r]).sum::<f64>().powi(2))
            .sum();
        let gap = inst.problem.eval_objective(&x).unwrap() - inst.psi_star;
        assert!(0.5 * dist_sq <= gap / mu_bar * (1.0 + 1e-9) + 1e-12);
        assert!((inst.gap.gap(&x) - gap).abs() <= 1e-10 * gap.max(1.0));
    }
}

#[test]
fn ridge_closed_form_matches_normal_equations() {
    let data = synthetic_regression(30, 6, 6, 0.2, 4).unwrap();
    let lambda = 0.05;
    let p = make_ridge_problem(&data, lambda).unwrap();
    let (m, n) = (data.m(), data.n);
    let mut h = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for (row, b) in data.rows.iter().zip(&data.labels) {
        let a = row.to_dense(n);
        for r in 0..n {
            rhs[r] += a[r] * b / m as f64;
            for c in 0..n {
                h[r * n + c] += a[r] * a[c] / m as f64;
            }
        }
    }
    for k in 0..n {
        h[k * n + k] += 2.0 * lambda;
    }
    let x = solve_dense(h, rhs, n);
    let ps = compute_psi_star(&p, 1e-14).unwrap();
    for (a, b) in ps.x.iter().zip(&x) {
        assert!((a - b).abs() <= 1e-10);
    }
    assert_eq!(p.mu(), 2.0 * lambda);
}

#[test]
fn lasso_objective_at_origin() {
    let data = synthetic_regression(25, 4, 2, 0.3, 5).unwrap();
    let p = make_lasso_problem(&data, 0.1).unwrap();
    let expected = 0.5 * data.labels.iter().map(|b| b * b).sum::<f64>() / 25.0;
    assert!((p.eval_objective(&[0.0; 4]).unwrap() - expected).abs() <= 1e-14);
}

#[test]
fn classification_needs_signed_labels() {
    let data = Dataset::new(vec![FeatureVec::Dense(vec![1.0]); 2], vec![1.0, 0.0], 1).unwrap();
    assert!(make_logistic_problem(&data).is_err());
}

#[test]
fn csv_and_libsvm_agree() {
    let csv = "y,a,b\n1,0.5,0\n-1,0,2.25\n";
    let from_csv = parse_csv(csv.as_bytes(), Some("y")).unwrap();
    let from_svm = parse_libsvm("1 1:0.5\n-1 2:2.25\n".as_bytes(), Some(2)).unwrap();
    assert_eq!(from_csv.labels, from_svm.labels);
    for (a, b) in from_csv.rows.iter().zip(&from_svm.rows) {
        assert_eq!(a.to_dense(2), b.to_dense(2));
    }
}

fn sparse_rows() -> impl Strategy<Value = Vec<(f64, Vec<(u32, f64)>)>> {
    let entry = (0u32..50, prop::num::f64::NORMAL);
    let row = (prop::num::f64::NORMAL, prop::collection::vec(entry, 0..8));
    prop::collection::vec(row, 1..20)
}

proptest! {
    #[test]
    fn libsvm_round_trip_is_exact(rows in sparse_rows()) {
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for (b, mut entries) in rows {
            entries.sort_by_key(|e| e.0);
            entries.dedup_by_key(|e| e.0);
            labels.push(b);
            feats.push(FeatureVec::Sparse {
                indices: entries.iter().map(|e| e.0).collect(),
                values: entries.iter().map(|e| e.1).collect(),
            });
        }
        let data = Dataset::new(feats, labels, 50).unwrap();
        let mut buf = Vec::new();
        write_libsvm(&data, &mut buf).unwrap();
        let back = parse_libsvm(buf.as_slice(), Some(50)).unwrap();
        prop_assert_eq!(&back.labels, &data.labels);
        prop_assert_eq!(&back.rows, &data.rows);
    }
}
