//! Experiment configuration, read from JSON or assembled from flags.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, ensure, Context};
use serde::{Deserialize, Serialize};
use varag::Regime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    Logistic,
    Lasso,
    Ridge,
    #[serde(alias = "eb_quadratic")]
    EbQuadratic,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::Logistic => "logistic",
            Loss::Lasso => "lasso",
            Loss::Ridge => "ridge",
            Loss::EbQuadratic => "eb-quadratic",
        }
    }
}

impl FromStr for Loss {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Ok(match s {
            "logistic" => Loss::Logistic,
            "lasso" => Loss::Lasso,
            "ridge" => Loss::Ridge,
            "eb-quadratic" | "eb_quadratic" => Loss::EbQuadratic,
            other => bail!("unknown loss {other:?} (expected logistic, lasso, ridge or eb-quadratic)"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Solver {
    #[serde(rename = "varag")]
    Varag,
    #[serde(rename = "stochastic-varag")]
    StochasticVarag,
    #[serde(rename = "prox-svrg")]
    ProxSvrg,
    #[serde(rename = "svrg++")]
    SvrgPp,
    #[serde(rename = "fgm")]
    Fgm,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Varag => "varag",
            Solver::StochasticVarag => "stochastic-varag",
            Solver::ProxSvrg => "prox-svrg",
            Solver::SvrgPp => "svrg++",
            Solver::Fgm => "fgm",
        }
    }

    /// Name safe to use in a file name.
    pub fn file_stem(self) -> &'static str {
        match self {
            Solver::SvrgPp => "svrgpp",
            other => other.name(),
        }
    }
}

impl FromStr for Solver {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Ok(match s {
            "varag" => Solver::Varag,
            "stochastic-varag" => Solver::StochasticVarag,
            "prox-svrg" => Solver::ProxSvrg,
            "svrg++" | "svrgpp" => Solver::SvrgPp,
            "fgm" => Solver::Fgm,
            other => bail!("unknown solver {other:?}"),
        })
    }
}

/// Where the data comes from and how the problem is built. Without a
/// dataset path a synthetic instance is generated from the fields below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpec {
    pub loss: Loss,
    pub lambda: f64,
    /// LIBSVM file, or CSV when the extension is `.csv`.
    pub dataset: Option<PathBuf>,
    pub label_column: Option<String>,
    pub scale_features: bool,
    pub append_bias: bool,
    pub m: usize,
    pub n: usize,
    pub data_seed: u64,
    /// Column `j` of synthetic features is multiplied by `decay^j`.
    pub decay: f64,
    /// Norm of the planted classifier.
    pub signal: f64,
    /// Nonzeros in the planted regression vector (0 means all).
    pub support: usize,
    pub noise: f64,
    /// Error-bound instances: explicit spectrum, or `rank` values spread
    /// geometrically from `spectrum_hi` to `spectrum_lo`.
    pub spectrum: Option<Vec<f64>>,
    pub rank: usize,
    pub spectrum_hi: f64,
    pub spectrum_lo: f64,
    pub heterogeneity: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            loss: Loss::Logistic,
            lambda: 0.0,
            dataset: None,
            label_column: None,
            scale_features: false,
            append_bias: false,
            m: 256,
            n: 20,
            data_seed: 1,
            decay: 1.0,
            signal: 2.0,
            support: 0,
            noise: 0.1,
            spectrum: None,
            rank: 10,
            spectrum_hi: 1.0,
            spectrum_lo: 1e-3,
            heterogeneity: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub solvers: Vec<Solver>,
    pub regime: Regime,
    /// Epochs per run; restart cycles for the error-bound regime.
    pub epochs: usize,
    /// Iterations of the full gradient method; defaults to `2 * epochs`
    /// (one pass each), or enough passes to match ten restart cycles.
    pub fgm_iterations: Option<usize>,
    pub fgm_restart: Option<usize>,
    pub seeds: Vec<u64>,
    /// Starting point; zeros when absent.
    pub x0: Option<Vec<f64>>,
    /// Strong-convexity modulus used by the solver; the problem's by default.
    pub mu: Option<f64>,
    /// Error-bound modulus; generated instances supply their own.
    pub mu_bar: Option<f64>,
    pub gap_threshold: Option<f64>,
    pub sigma: f64,
    pub eps: Option<f64>,
    /// Upper bound on `D0` used by the stochastic planner when the oracle
    /// minimizer is not attained.
    pub d0_bound: Option<f64>,
    pub oracle_tol: f64,
    pub wall_clock: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::default(),
            solvers: vec![Solver::Varag],
            regime: Regime::Unified,
            epochs: 20,
            fgm_iterations: None,
            fgm_restart: None,
            seeds: vec![0],
            x0: None,
            mu: None,
            mu_bar: None,
            gap_threshold: None,
            sigma: 0.0,
            eps: None,
            d0_bound: None,
            oracle_tol: 1e-13,
            wall_clock: false,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        ensure!(!self.seeds.is_empty(), "at least one seed is required");
        ensure!(self.epochs >= 1, "epochs must be at least 1");
        ensure!(!self.solvers.is_empty(), "at least one solver is required");
        ensure!(self.sigma >= 0.0 && self.sigma.is_finite(), "sigma must be nonnegative");
        ensure!(self.oracle_tol > 0.0, "oracle tolerance must be positive");
        if self.solvers.contains(&Solver::StochasticVarag) && self.sigma > 0.0 {
            ensure!(self.eps.is_some(), "stochastic runs with sigma > 0 need --eps");
        }
        if let Some(x0) = &self.x0 {
            ensure!(x0.iter().all(|v| v.is_finite()), "x0 must be finite");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// `N` means seeds `0..N`; `a..b` a half-open range; `a,b,c` a list.
pub fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        ensure!(a < b, "empty seed range {s}");
        return Ok((a..b).collect());
    }
    if s.contains(',') {
        return s
            .split(',')
            .map(|t| t.trim().parse::<u64>().with_context(|| format!("bad seed {t:?}")))
            .collect();
    }
    let count: u64 = s.parse().with_context(|| format!("bad seed count {s:?}"))?;
    ensure!(count >= 1, "at least one seed is required");
    Ok((0..count).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_forms() {
        assert_eq!(parse_seeds("3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("5..7").unwrap(), vec![5, 6]);
        assert_eq!(parse_seeds("4, 9").unwrap(), vec![4, 9]);
        assert!(parse_seeds("0").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn json_round_trip_and_hash() {
        let cfg = RunConfig {
            solvers: vec![Solver::Varag, Solver::SvrgPp],
            regime: Regime::ErrorBound,
            ..Default::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert!(text.contains("\"svrg++\"") && text.contains("\"error-bound\""));
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let partial: RunConfig = serde_json::from_str(r#"{"epochs": 3, "problem": {"loss": "ridge", "lambda": 0.1}}"#).unwrap();
        assert_eq!(partial.epochs, 3);
        assert_eq!(partial.problem.loss, Loss::Ridge);
        assert!(serde_json::from_str::<RunConfig>(r#"{"epoch": 3}"#).is_err());
    }
}
