//! Seeded sampling of component indices from a discrete distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};

/// The generator used for every random stream in the crate.
pub type SolverRng = ChaCha8Rng;

/// Name recorded in trace headers and manifests.
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.9, seed_from_u64)";

pub fn rng_from_seed(seed: u64) -> SolverRng {
    SolverRng::seed_from_u64(seed)
}

/// Inverse-CDF sampler over `{0, .., m-1}`.
#[derive(Debug, Clone)]
pub struct IndexSampler {
    probabilities: Vec<f64>,
    cumulative: Vec<f64>,
    rng: SolverRng,
}

impl IndexSampler {
    pub fn new(probabilities: Vec<f64>, seed: u64) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidParameter("empty distribution".into()));
        }
        if probabilities.iter().any(|&q| !(q > 0.0 && q.is_finite())) {
            return Err(Error::InvalidParameter("probabilities must be positive".into()));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}")));
        }
        let mut acc = 0.0;
        let mut cumulative: Vec<f64> = probabilities
            .iter()
            .map(|q| {
                acc += q;
                acc
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self {
            probabilities,
            cumulative,
            rng: rng_from_seed(seed),
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    /// Smallest `i` with `cumulative[i] >= u`.
    pub fn locate(&self, u: f64) -> usize {
        self.cumulative
            .partition_point(|&c| c < u)
            .min(self.cumulative.len() - 1)
    }

    pub fn sample_index(&mut self) -> usize {
        let u: f64 = self.rng.random();
        self.locate(u)
    }
}

/// `sum_i q_i * values_i`, the exact expectation of a discrete vector-valued
/// random variable.
pub fn expectation_by_enumeration(q: &[f64], values: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_dim(q.len(), values.len())?;
    let n = values.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for (qi, v) in q.iter().zip(values) {
        check_dim(n, v.len())?;
        for (o, x) in out.iter_mut().zip(v) {
            *o += qi * x;
        }
    }
    Ok(out)
}
