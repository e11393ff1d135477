//! Small dense-vector kernels shared by the solvers.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    for v in x {
        *v *= alpha;
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite row-major matrix
/// by power iteration: stops after `max_iter` steps or when the Rayleigh
/// quotient changes by less than `rel_tol` relatively.
pub fn power_iteration(matrix: &[f64], n: usize, max_iter: usize, rel_tol: f64) -> f64 {
    debug_assert_eq!(matrix.len(), n * n);
    // Deterministic, non-degenerate start vector.
    let mut v: Vec<f64> = (0..n).map(|k| 1.0 + (k as f64 + 1.0).sqrt() * 1e-3).collect();
    let nv = norm(&v);
    scale(1.0 / nv, &mut v);
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        matvec(matrix, n, &v, &mut w);
        let next = dot(&v, &w);
        let nw = norm(&w);
        if nw == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        let done = (next - lambda).abs() <= rel_tol * next.abs().max(f64::MIN_POSITIVE);
        lambda = next;
        if done {
            break;
        }
    }
    // Rayleigh quotient of the final normalized iterate.
    matvec(matrix, n, &v, &mut w);
    dot(&v, &w).max(lambda)
}

/// `out = M x` for a row-major `n x n` matrix.
#[inline]
pub fn matvec(matrix: &[f64], n: usize, x: &[f64], out: &mut [f64]) {
    for (row, o) in matrix.chunks_exact(n).zip(out.iter_mut()) {
        *o = dot(row, x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_diagonal() {
        let m = [3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        let l = power_iteration(&m, 3, 200, 1e-10);
        assert!((l - 3.0).abs() < 1e-6, "{l}");
    }

    #[test]
    fn power_iteration_zero_matrix() {
        assert_eq!(power_iteration(&[0.0; 4], 2, 200, 1e-10), 0.0);
    }
}
