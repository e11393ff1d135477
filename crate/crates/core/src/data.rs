//! Dataset ingestion (LIBSVM, CSV), problem builders and synthetic
//! instance generators.

use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::problem::{FeasibleSet, FeatureVec, FiniteSumProblem, Regularizer, SmoothComponent};
use crate::sampling::{rng_from_seed, SolverRng};

/// Labeled rows sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub rows: Vec<FeatureVec>,
    pub labels: Vec<f64>,
    pub n: usize,
    /// Columns were divided by their largest magnitude.
    pub scaled: bool,
    /// A constant 1 feature was appended as the last column.
    pub bias: bool,
}

impl Dataset {
    pub fn new(rows: Vec<FeatureVec>, labels: Vec<f64>, n: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::NoRows);
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        if labels.iter().any(|b| !b.is_finite()) || rows.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidProblem("dataset contains non-finite entries".into()));
        }
        if let Some(r) = rows.iter().position(|r| r.min_dim() > n) {
            return Err(Error::InvalidProblem(format!("row {r} exceeds dimension {n}")));
        }
        Ok(Self {
            rows,
            labels,
            n,
            scaled: false,
            bias: false,
        })
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    /// Divides every column by its largest magnitude so entries lie in
    /// `[-1, 1]`; all-zero columns are left alone. Sparsity is preserved.
    pub fn scale_features(&mut self) {
        let mut max_abs = vec![0.0f64; self.n];
        for r in &self.rows {
            match r {
                FeatureVec::Dense(a) => {
                    for (mx, v) in max_abs.iter_mut().zip(a) {
                        *mx = mx.max(v.abs());
                    }
                }
                FeatureVec::Sparse { indices, values } => {
                    for (&j, v) in indices.iter().zip(values) {
                        let mx = &mut max_abs[j as usize];
                        *mx = mx.max(v.abs());
                    }
                }
            }
        }
        let inv = |mx: f64| if mx > 0.0 { 1.0 / mx } else { 1.0 };
        for r in &mut self.rows {
            match r {
                FeatureVec::Dense(a) => {
                    for (v, mx) in a.iter_mut().zip(&max_abs) {
                        *v *= inv(*mx);
                    }
                }
                FeatureVec::Sparse { indices, values } => {
                    for (&j, v) in indices.iter().zip(values.iter_mut()) {
                        *v *= inv(max_abs[j as usize]);
                    }
                }
            }
        }
        self.scaled = true;
    }

    /// Multiplies column `j` by `rate^j`, which spreads the spectrum of the
    /// feature covariance.
    pub fn decay_columns(&mut self, rate: f64) {
        let scale = |j: usize| rate.powi(j as i32);
        for r in &mut self.rows {
            match r {
                FeatureVec::Dense(a) => {
                    for (j, v) in a.iter_mut().enumerate() {
                        *v *= scale(j);
                    }
                }
                FeatureVec::Sparse { indices, values } => {
                    for (&j, v) in indices.iter().zip(values.iter_mut()) {
                        *v *= scale(j as usize);
                    }
                }
            }
        }
    }

    /// Appends a constant feature equal to 1.
    pub fn append_bias(&mut self) {
        let j = self.n;
        for r in &mut self.rows {
            match r {
                FeatureVec::Dense(a) => {
                    a.resize(j, 0.0);
                    a.push(1.0);
                }
                FeatureVec::Sparse { indices, values } => {
                    indices.push(j as u32);
                    values.push(1.0);
                }
            }
        }
        self.n += 1;
        self.bias = true;
    }

    fn check_binary_labels(&self) -> Result<()> {
        match self.labels.iter().position(|&b| b != 1.0 && b != -1.0) {
            Some(r) => Err(Error::InvalidProblem(format!(
                "row {r} has label {}; classification needs labels in {{-1, +1}}",
                self.labels[r]
            ))),
            None => Ok(()),
        }
    }

    fn densify(&self, r: &FeatureVec) -> FeatureVec {
        match r {
            FeatureVec::Dense(a) if a.len() == self.n => r.clone(),
            _ => FeatureVec::Dense(r.to_dense(self.n)),
        }
    }
}

/// Parses LIBSVM text: `label idx:val ...` with 1-based ascending indices.
/// `n` is the largest index seen unless `n_override` is given.
pub fn parse_libsvm<R: BufRead>(reader: R, n_override: Option<usize>) -> Result<Dataset> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut n_seen = 0usize;
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: lineno, message };
        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: f64 = label_tok
            .parse()
            .map_err(|_| err(format!("invalid label {label_tok:?}")))?;
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected idx:val, found {tok:?}")))?;
            let idx: u64 = idx.parse().map_err(|_| err(format!("invalid index {idx:?}")))?;
            if idx == 0 || idx > u32::MAX as u64 {
                return Err(err(format!("index {idx} out of range (indices are 1-based)")));
            }
            let val: f64 = val.parse().map_err(|_| err(format!("invalid value {val:?}")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite value {val}")));
            }
            let j = (idx - 1) as u32;
            if indices.last().is_some_and(|&prev| j <= prev) {
                return Err(err(format!("index {idx} is not ascending")));
            }
            if let Some(n) = n_override {
                if idx as usize > n {
                    return Err(err(format!("index {idx} exceeds dimension {n}")));
                }
            }
            n_seen = n_seen.max(idx as usize);
            indices.push(j);
            values.push(val);
        }
        if !label.is_finite() {
            return Err(err("non-finite label".into()));
        }
        labels.push(label);
        rows.push(FeatureVec::Sparse { indices, values });
    }
    let n = n_override.unwrap_or(n_seen).max(1);
    Dataset::new(rows, labels, n)
}

pub fn read_libsvm(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    parse_libsvm(std::io::BufReader::new(file), None)
}

/// Writes nonzero entries only; values use the shortest round-trip format.
pub fn write_libsvm<W: Write>(data: &Dataset, mut w: W) -> Result<()> {
    for (r, b) in data.rows.iter().zip(&data.labels) {
        write!(w, "{b}")?;
        match r {
            FeatureVec::Dense(a) => {
                for (j, v) in a.iter().enumerate().filter(|(_, v)| **v != 0.0) {
                    write!(w, " {}:{v}", j + 1)?;
                }
            }
            FeatureVec::Sparse { indices, values } => {
                for (j, v) in indices.iter().zip(values) {
                    write!(w, " {}:{v}", j + 1)?;
                }
            }
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_libsvm_file(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_libsvm(data, std::io::BufWriter::new(file))
}

/// Reads a CSV file with a header row. The label column is `label_column`
/// when given, otherwise the first column; all other columns are features.
pub fn parse_csv<R: std::io::Read>(reader: R, label_column: Option<&str>) -> Result<Dataset> {
    let mut csv = csv::Reader::from_reader(reader);
    let headers = csv.headers()?.clone();
    let label_idx = match label_column {
        Some(name) => headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("no column named {name:?}"),
            })?,
        None => 0,
    };
    let n = headers.len().saturating_sub(1);
    if n == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "need a label column and at least one feature column".into(),
        });
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (k, rec) in csv.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        let mut feats = Vec::with_capacity(n);
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid number {field:?} in column {}", j + 1),
            })?;
            if j == label_idx {
                labels.push(v);
            } else {
                feats.push(v);
            }
        }
        rows.push(FeatureVec::Dense(feats));
    }
    Dataset::new(rows, labels, n)
}

pub fn read_csv(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Dataset> {
    parse_csv(std::fs::File::open(path)?, label_column)
}

/// `f_i(x) = log(1 + exp(-b_i a_i^T x))`, `h = 0`, `mu = 0`.
pub fn make_logistic_problem(data: &Dataset) -> Result<FiniteSumProblem> {
    make_logistic_problem_with(data, Regularizer::Zero)
}

/// Logistic components with an arbitrary regularizer.
pub fn make_logistic_problem_with(data: &Dataset, reg: Regularizer) -> Result<FiniteSumProblem> {
    data.check_binary_labels()?;
    let comps = data
        .rows
        .iter()
        .zip(&data.labels)
        .map(|(a, b)| SmoothComponent::logistic(a.clone(), *b))
        .collect();
    FiniteSumProblem::new(comps, reg, FeasibleSet::Unbounded, 0.0, data.n)
}

/// `f_i(x) = 0.5 (a_i^T x - b_i)^2`, `h = lambda ||x||_1`, `mu = 0`.
pub fn make_lasso_problem(data: &Dataset, lambda: f64) -> Result<FiniteSumProblem> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be nonnegative, got {lambda}")));
    }
    let comps = data
        .rows
        .iter()
        .zip(&data.labels)
        .map(|(a, b)| SmoothComponent::least_squares(a.clone(), *b))
        .collect();
    let reg = if lambda == 0.0 { Regularizer::Zero } else { Regularizer::L1(lambda) };
    FiniteSumProblem::new(comps, reg, FeasibleSet::Unbounded, 0.0, data.n)
}

/// `f_i(x) = 0.5 (a_i^T x - b_i)^2 + lambda ||x||^2`, `h = 0`, `mu = 2 lambda`.
pub fn make_ridge_problem(data: &Dataset, lambda: f64) -> Result<FiniteSumProblem> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let comps = data
        .rows
        .iter()
        .zip(&data.labels)
        .map(|(a, b)| SmoothComponent::ridge_least_squares(data.densify(a), *b, lambda))
        .collect();
    FiniteSumProblem::new(comps, Regularizer::Zero, FeasibleSet::Unbounded, 2.0 * lambda, data.n)
}

fn gaussian(rng: &mut SolverRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Rows `a_i ~ N(0, I/n)` with labels drawn from a logistic model with a
/// planted weight vector of norm `signal`.
pub fn synthetic_classification(m: usize, n: usize, signal: f64, seed: u64) -> Result<Dataset> {
    let mut rng = rng_from_seed(seed);
    let mut w: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
    let wn = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for v in &mut w {
        *v *= signal / wn;
    }
    let sd = 1.0 / (n as f64).sqrt();
    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let a: Vec<f64> = (0..n).map(|_| sd * gaussian(&mut rng)).collect();
        let z: f64 = a.iter().zip(&w).map(|(x, y)| x * y).sum();
        let u: f64 = rng.random();
        labels.push(if u < crate::problem::sigmoid(z) { 1.0 } else { -1.0 });
        rows.push(FeatureVec::Dense(a));
    }
    Dataset::new(rows, labels, n)
}

/// Rows `a_i ~ N(0, I/n)`, targets `b_i = a_i^T w + noise * N(0, 1)` with
/// `w ~ N(0, I)`; only the first `support` entries of `w` are nonzero.
pub fn synthetic_regression(m: usize, n: usize, support: usize, noise: f64, seed: u64) -> Result<Dataset> {
    let mut rng = rng_from_seed(seed);
    let w: Vec<f64> = (0..n)
        .map(|j| {
            let g = gaussian(&mut rng);
            if j < support {
                g
            } else {
                0.0
            }
        })
        .collect();
    let sd = 1.0 / (n as f64).sqrt();
    let mut rows = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let a: Vec<f64> = (0..n).map(|_| sd * gaussian(&mut rng)).collect();
        let z: f64 = a.iter().zip(&w).map(|(x, y)| x * y).sum();
        labels.push(z + noise * gaussian(&mut rng));
        rows.push(FeatureVec::Dense(a));
    }
    Dataset::new(rows, labels, n)
}

/// Quadratic finite-sum instance satisfying an error bound condition.
#[derive(Debug, Clone)]
pub struct EbInstance {
    pub problem: FiniteSumProblem,
    pub x_star: Vec<f64>,
    /// Smallest nonzero eigenvalue of the mean Hessian.
    pub mu_bar: f64,
    pub psi_star: f64,
    /// Factored form of the gap, accurate far below round-off of `psi`.
    pub gap: Arc<FactoredQuadraticGap>,
}

/// `psi(x) - psi* = 0.5 w^T C w` with `w = W (x - x*)`, `W` an `r x n`
/// matrix and `C` an `r x r` PSD matrix, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredQuadraticGap {
    pub x_star: Vec<f64>,
    pub w: Vec<f64>,
    pub core: Vec<f64>,
    pub rank: usize,
}

impl FactoredQuadraticGap {
    pub fn gap(&self, x: &[f64]) -> f64 {
        let n = self.x_star.len();
        let d: Vec<f64> = x.iter().zip(&self.x_star).map(|(a, b)| a - b).collect();
        let w: Vec<f64> = self.w.chunks_exact(n).map(|row| dot(row, &d)).collect();
        let cw: Vec<f64> = self.core.chunks_exact(self.rank).map(|row| dot(row, &w)).collect();
        0.5 * dot(&w, &cw)
    }
}

/// [`make_eb_quadratic_with`] with full heterogeneity.
pub fn make_eb_quadratic(m: usize, n: usize, spectrum: &[f64], seed: u64) -> Result<EbInstance> {
    make_eb_quadratic_with(m, n, spectrum, 1.0, seed)
}

/// Builds `f_i(x) = 0.5 x^T Q_i x + q_i^T x` with `q_i = -Q_i x_s`.
///
/// `spectrum` (padded with zeros to length `n`) is the expected spectrum of
/// the mean Hessian in a random orthonormal basis `U`. With `r` nonzero
/// entries `s`, `Q_i = U_r S^{1/2} M_i S^{1/2} U_r^T` where
/// `M_i = (1 - h) I + (h / r) G_i G_i^T` and `G_i` is an `r x r` Gaussian
/// matrix, so `E[M_i] = I`. `h = heterogeneity` in `[0, 1]`.
pub fn make_eb_quadratic_with(
    m: usize,
    n: usize,
    spectrum: &[f64],
    heterogeneity: f64,
    seed: u64,
) -> Result<EbInstance> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("m and n must be positive".into()));
    }
    if spectrum.len() > n || spectrum.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::InvalidParameter("spectrum needs at most n nonnegative entries".into()));
    }
    if !(0.0..=1.0).contains(&heterogeneity) {
        return Err(Error::InvalidParameter("heterogeneity must lie in [0, 1]".into()));
    }
    let support: Vec<f64> = spectrum.iter().copied().filter(|s| *s > 0.0).collect();
    let r = support.len();
    if r == 0 {
        return Err(Error::InvalidParameter("spectrum is all zero".into()));
    }
    let mut rng = rng_from_seed(seed);
    let g = DMatrix::from_fn(n, n, |_, _| gaussian(&mut rng));
    let u = g.qr().q();
    let sqrt_s = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(r, support.iter().map(|s| s.sqrt())));
    let basis = u.columns(0, r) * sqrt_s; // U_r S^{1/2}
    let x_s: Vec<f64> = (0..n).map(|_| gaussian(&mut rng)).collect();
    let xs_vec = nalgebra::DVector::from_column_slice(&x_s);

    let mut mean = DMatrix::<f64>::zeros(n, n);
    let mut core = DMatrix::<f64>::zeros(r, r);
    let mut comps = Vec::with_capacity(m);
    for _ in 0..m {
        let gi = DMatrix::from_fn(r, r, |_, _| gaussian(&mut rng));
        let mi = DMatrix::<f64>::identity(r, r) * (1.0 - heterogeneity) + (&gi * gi.transpose()) * (heterogeneity / r as f64);
        core += &mi;
        let mut qi = &basis * mi * basis.transpose();
        qi = (&qi + qi.transpose()) * 0.5;
        mean += &qi;
        let q_vec: Vec<f64> = (-(&qi * &xs_vec)).iter().copied().collect();
        // nalgebra is column-major; qi is symmetric so the layout is the same.
        let q_mat: Vec<f64> = qi.as_slice().to_vec();
        comps.push(SmoothComponent::quadratic(q_mat, q_vec)?);
    }
    mean /= m as f64;
    core /= m as f64;
    let eig = SymmetricEigen::new(mean).eigenvalues;
    let max_eig = eig.iter().copied().fold(0.0, f64::max);
    let mu_bar = eig
        .iter()
        .copied()
        .filter(|&e| e > 1e-10 * max_eig)
        .fold(f64::INFINITY, f64::min);
    let problem = FiniteSumProblem::new(comps, Regularizer::Zero, FeasibleSet::Unbounded, 0.0, n)?;
    let psi_star = problem.eval_objective(&x_s)?;
    // Column-major columns of `basis` are the rows of `W = basis^T`.
    let gap = FactoredQuadraticGap {
        x_star: x_s.clone(),
        w: basis.as_slice().to_vec(),
        core: core.transpose().as_slice().to_vec(),
        rank: r,
    };
    Ok(EbInstance {
        problem,
        x_star: x_s,
        mu_bar,
        psi_star,
        gap: Arc::new(gap),
    })
}

/// `count` values spread geometrically from `hi` down to `lo`.
pub fn geometric_spectrum(count: usize, hi: f64, lo: f64) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    (0..count)
        .map(|k| hi * (lo / hi).powf(k as f64 / (count - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn libsvm_line() {
        let d = parse_libsvm("+1 1:0.5 3:2\n".as_bytes(), None).unwrap();
        assert_eq!(d.labels, vec![1.0]);
        assert_eq!(d.n, 3);
        assert_eq!(d.rows[0].to_dense(3), vec![0.5, 0.0, 2.0]);
    }

    #[test]
    fn libsvm_errors() {
        assert!(matches!(parse_libsvm("".as_bytes(), None), Err(Error::NoRows)));
        assert!(matches!(
            parse_libsvm("1 1:1\n-1 3:1 2:1\n".as_bytes(), None),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse_libsvm("1 0:1\n".as_bytes(), None), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_libsvm("x 1:1\n".as_bytes(), None), Err(Error::Parse { .. })));
        assert!(matches!(parse_libsvm("1 1-1\n".as_bytes(), None), Err(Error::Parse { .. })));
        assert!(parse_libsvm("1 4:1\n".as_bytes(), Some(3)).is_err());
        assert_eq!(parse_libsvm("1 2:1\n".as_bytes(), Some(5)).unwrap().n, 5);
    }

    #[test]
    fn csv_label_column() {
        let text = "x1,y,x2\n1.5,-1,2\n0,1,3\n";
        let d = parse_csv(text.as_bytes(), Some("y")).unwrap();
        assert_eq!(d.labels, vec![-1.0, 1.0]);
        assert_eq!(d.rows[1], FeatureVec::Dense(vec![0.0, 3.0]));
        let d = parse_csv(text.as_bytes(), None).unwrap();
        assert_eq!(d.labels, vec![1.5, 0.0]);
        assert!(matches!(parse_csv("a,b\n1,z\n".as_bytes(), None), Err(Error::Parse { line: 2, .. })));
        assert!(parse_csv("a,b\n".as_bytes(), None).is_err());
    }

    #[test]
    fn logistic_builder() {
        let d = Dataset::new(vec![FeatureVec::Dense(vec![3.0, 4.0])], vec![1.0], 2).unwrap();
        let p = make_logistic_problem(&d).unwrap();
        assert_eq!(p.m(), 1);
        assert_eq!(p.components()[0].lipschitz(), 6.25);
        let bad = Dataset::new(vec![FeatureVec::Dense(vec![1.0])], vec![0.0], 1).unwrap();
        assert!(make_logistic_problem(&bad).is_err());
    }

    #[test]
    fn lasso_and_ridge_builders() {
        let d = synthetic_regression(10, 3, 3, 0.1, 1).unwrap();
        let lasso = make_lasso_problem(&d, 0.0).unwrap();
        assert_eq!(lasso.regularizer(), Regularizer::Zero);
        let half_mean_sq = 0.5 * d.labels.iter().map(|b| b * b).sum::<f64>() / 10.0;
        let p = make_lasso_problem(&d, 0.3).unwrap();
        assert!((p.eval_objective(&[0.0; 3]).unwrap() - half_mean_sq).abs() < 1e-14);
        assert!(make_lasso_problem(&d, -1.0).is_err());
        let r = make_ridge_problem(&d, 1e-6).unwrap();
        assert_eq!(r.mu(), 2e-6);
        let a0 = d.rows[0].norm_sq();
        assert!((r.components()[0].lipschitz() - (a0 + 2e-6)).abs() < 1e-15);
        assert!(make_ridge_problem(&d, 0.0).is_err());
    }

    #[test]
    fn scaling_and_bias() {
        let mut d = Dataset::new(
            vec![FeatureVec::Dense(vec![2.0, -4.0]), FeatureVec::Sparse { indices: vec![0], values: vec![-1.0] }],
            vec![1.0, -1.0],
            2,
        )
        .unwrap();
        d.scale_features();
        assert_eq!(d.rows[0], FeatureVec::Dense(vec![1.0, -1.0]));
        d.append_bias();
        assert_eq!(d.n, 3);
        assert_eq!(d.rows[1].to_dense(3), vec![-0.5, 0.0, 1.0]);
        assert!(d.scaled && d.bias);
    }

    #[test]
    fn identity_eb_instance() {
        let inst = make_eb_quadratic_with(5, 3, &[1.0, 1.0, 1.0], 0.0, 9).unwrap();
        assert!((inst.mu_bar - 1.0).abs() < 1e-12);
        for c in inst.problem.components() {
            assert!((c.lipschitz() - 1.0).abs() < 1e-9);
        }
        assert!(make_eb_quadratic(4, 3, &[0.0, 0.0], 1).is_err());
        assert!(make_eb_quadratic(4, 2, &[1.0, 1.0, 1.0], 1).is_err());
    }

    #[test]
    fn eb_minimizer_is_stationary() {
        let inst = make_eb_quadratic(30, 8, &[1.0, 0.5, 0.1], 4).unwrap();
        let g = inst.problem.eval_full_gradient(&inst.x_star).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12), "{g:?}");
        assert!(inst.mu_bar > 0.0 && inst.mu_bar < 0.2);
        let x: Vec<f64> = inst.x_star.iter().enumerate().map(|(j, v)| v + 0.1 * j as f64).collect();
        let direct = inst.problem.eval_objective(&x).unwrap() - inst.psi_star;
        assert!((inst.gap.gap(&x) - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn geometric_spectrum_endpoints() {
        let s = geometric_spectrum(5, 1.0, 0.01);
        assert_eq!(s[0], 1.0);
        assert!((s[4] - 0.01).abs() < 1e-15);
    }
}
