//! Command-line surface.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use varag::data::make_eb_quadratic_with;
use varag::problem::ComponentKind;
use varag::Regime;

use crate::config::{parse_seeds, Loss, RunConfig, Solver};
use crate::suite::{self, default_out_dir, eb_spectrum, run_suite, verify_dir, Prepared};

#[derive(Debug, Parser)]
#[command(name = "varag", version, about = "Variance-reduced accelerated gradient experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one solver for one seed and write its trace.
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Trace file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute psi* and D0 for the configured problem.
    Oracle {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run every solver over every seed; writes traces and a manifest.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the traces in a bench directory against the theoretical bounds.
    Verify {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "varag")]
        solver: String,
    },
    /// Generate an error-bound quadratic instance and write it as JSON.
    GenEb {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags shared by the problem-building subcommands. Each one overrides
/// the corresponding field of `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// LIBSVM or CSV file; a synthetic instance is generated otherwise.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub scale_features: bool,
    #[arg(long)]
    pub append_bias: bool,
    /// logistic | lasso | ridge | eb-quadratic
    #[arg(long)]
    pub loss: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// smooth | unified | error-bound
    #[arg(long)]
    pub regime: Option<String>,
    /// Comma-separated: varag, stochastic-varag, prox-svrg, svrg++, fgm
    #[arg(long)]
    pub solvers: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// `N` (seeds 0..N), `a..b` or `a,b,c`
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub mu_bar: Option<f64>,
    #[arg(long)]
    pub gap_threshold: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub spectrum_hi: Option<f64>,
    #[arg(long)]
    pub spectrum_lo: Option<f64>,
    #[arg(long)]
    pub fgm_iterations: Option<usize>,
    #[arg(long)]
    pub wall_clock: bool,
}

impl CommonArgs {
    pub fn to_config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_json_file(path)?,
            None => RunConfig::default(),
        };
        let p = &mut cfg.problem;
        if let Some(d) = &self.dataset {
            p.dataset = Some(d.clone());
        }
        if let Some(c) = &self.label_column {
            p.label_column = Some(c.clone());
        }
        p.scale_features |= self.scale_features;
        p.append_bias |= self.append_bias;
        if let Some(l) = &self.loss {
            p.loss = l.parse()?;
        }
        macro_rules! set {
            ($($src:ident => $dst:expr),* $(,)?) => {$(
                if let Some(v) = self.$src {
                    $dst = v;
                }
            )*};
        }
        set!(
            lambda => p.lambda,
            m => p.m,
            n => p.n,
            data_seed => p.data_seed,
            decay => p.decay,
            rank => p.rank,
            spectrum_hi => p.spectrum_hi,
            spectrum_lo => p.spectrum_lo,
            epochs => cfg.epochs,
            sigma => cfg.sigma,
        );
        if let Some(r) = &self.regime {
            cfg.regime = r.parse::<Regime>()?;
        }
        if let Some(s) = &self.solvers {
            cfg.solvers = s.split(',').map(|t| t.trim().parse()).collect::<anyhow::Result<_>>()?;
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s)?;
        }
        cfg.eps = self.eps.or(cfg.eps);
        cfg.mu = self.mu.or(cfg.mu);
        cfg.mu_bar = self.mu_bar.or(cfg.mu_bar);
        cfg.gap_threshold = self.gap_threshold.or(cfg.gap_threshold);
        cfg.fgm_iterations = self.fgm_iterations.or(cfg.fgm_iterations);
        cfg.wall_clock |= self.wall_clock;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct OracleReport {
    loss: Loss,
    dataset: String,
    m: usize,
    n: usize,
    l: f64,
    mu: f64,
    mu_bar: Option<f64>,
    psi_star: f64,
    attained: bool,
    iterations: usize,
    d0: f64,
    x_star: Vec<f64>,
}

#[derive(Serialize)]
struct EbComponent {
    q_mat: Vec<f64>,
    q_vec: Vec<f64>,
}

#[derive(Serialize)]
struct EbExport {
    m: usize,
    n: usize,
    seed: u64,
    spectrum: Vec<f64>,
    heterogeneity: f64,
    l: f64,
    mu_bar: f64,
    psi_star: f64,
    x_star: Vec<f64>,
    /// Row-major `q_mat` (`n x n`) and `q_vec` per component.
    components: Vec<EbComponent>,
}

fn write_json(value: &impl Serialize, out: Option<&Path>) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    match out {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => Ok(std::io::stdout().write_all(&bytes)?),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Solve { common, out } => {
            let cfg = common.to_config()?;
            let prep = Prepared::new(&cfg)?;
            let trace = prep.run(cfg.solvers[0], cfg.seeds[0])?;
            match &out {
                Some(path) => trace.write_csv(path)?,
                None => trace.write_to(std::io::stdout().lock())?,
            }
            if let (Some(path), Some(last)) = (&out, trace.last()) {
                eprintln!(
                    "{} seed {}: {} epochs, {} gradient evaluations, objective {:.12e}, gap {:.3e} -> {}",
                    cfg.solvers[0].name(),
                    cfg.seeds[0],
                    last.epoch,
                    last.grad_evals,
                    last.objective,
                    last.gap,
                    path.display()
                );
            }
            Ok(0)
        }
        Command::Oracle { common } => {
            let cfg = common.to_config()?;
            let prep = Prepared::new(&cfg)?;
            let p = &prep.instance.problem;
            write_json(
                &OracleReport {
                    loss: cfg.problem.loss,
                    dataset: prep.instance.label.clone(),
                    m: p.m(),
                    n: p.dim(),
                    l: p.mean_lipschitz(),
                    mu: p.mu(),
                    mu_bar: prep.instance.mu_bar,
                    psi_star: prep.instance.psi_star.value,
                    attained: prep.instance.psi_star.attained,
                    iterations: prep.instance.psi_star.iterations,
                    d0: prep.d0,
                    x_star: prep.instance.psi_star.x.clone(),
                },
                None,
            )?;
            Ok(0)
        }
        Command::Bench { common, out } => {
            let cfg = common.to_config()?;
            let out = out.unwrap_or_else(|| default_out_dir(&cfg));
            let manifest = run_suite(&cfg, &out)?;
            println!("{:<18} {:>6} {:>8} {:>12} {:>14}", "solver", "seed", "epochs", "grad_evals", "final_gap");
            for r in &manifest.runs {
                let gap = r.final_gap.map_or("-".to_string(), |g| format!("{g:.3e}"));
                println!("{:<18} {:>6} {:>8} {:>12} {:>14}", r.solver.name(), r.seed, r.epochs, r.grad_evals, gap);
            }
            for f in &manifest.failures {
                eprintln!("FAILED {} seed {}: {}", f.solver.name(), f.seed, f.error);
            }
            println!("wrote {} traces and {} to {}", manifest.runs.len(), suite::MANIFEST_FILE, out.display());
            Ok(if manifest.all_failed() { 1 } else { 0 })
        }
        Command::Verify { out, solver } => {
            let solver: Solver = solver.parse()?;
            let report = verify_dir(&out, solver)?;
            for c in &report.checks {
                println!(
                    "{:>4}  mean_gap={:.6e}  bound={:.6e}  ratio={:.4}  {}",
                    c.index,
                    c.mean_gap,
                    c.bound,
                    c.ratio,
                    if c.pass { "pass" } else { "FAIL" }
                );
            }
            println!("max ratio {:.4}: {}", report.max_ratio, if report.pass { "PASS" } else { "FAIL" });
            Ok(if report.pass { 0 } else { 1 })
        }
        Command::GenEb { common, out } => {
            let mut cfg = common.to_config()?;
            cfg.problem.loss = Loss::EbQuadratic;
            let spec = &cfg.problem;
            let spectrum = eb_spectrum(spec);
            let inst = make_eb_quadratic_with(spec.m, spec.n, &spectrum, spec.heterogeneity, spec.data_seed)?;
            let components = inst
                .problem
                .components()
                .iter()
                .map(|c| match c.kind() {
                    ComponentKind::Quadratic { q_mat, q_vec } => Ok(EbComponent {
                        q_mat: q_mat.to_vec(),
                        q_vec: q_vec.to_vec(),
                    }),
                    _ => bail!("generator produced a non-quadratic component"),
                })
                .collect::<anyhow::Result<_>>()?;
            write_json(
                &EbExport {
                    m: spec.m,
                    n: spec.n,
                    seed: spec.data_seed,
                    spectrum,
                    heterogeneity: spec.heterogeneity,
                    l: inst.problem.mean_lipschitz(),
                    mu_bar: inst.mu_bar,
                    psi_star: inst.psi_star,
                    x_star: inst.x_star.clone(),
                    components,
                },
                out.as_deref(),
            )?;
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let cli = Cli::try_parse_from([
            "varag", "bench", "--loss", "ridge", "--lambda", "0.5", "--regime", "smooth", "--seeds", "2..4",
            "--solvers", "varag,svrg++", "--epochs", "7",
        ])
        .unwrap();
        let Command::Bench { common, .. } = cli.command else {
            panic!("expected bench")
        };
        let cfg = common.to_config().unwrap();
        assert_eq!(cfg.problem.loss, Loss::Ridge);
        assert_eq!(cfg.problem.lambda, 0.5);
        assert_eq!(cfg.regime, Regime::Smooth);
        assert_eq!(cfg.seeds, vec![2, 3]);
        assert_eq!(cfg.solvers, vec![Solver::Varag, Solver::SvrgPp]);
        assert_eq!(cfg.epochs, 7);
    }

    #[test]
    fn bad_flags_are_rejected() {
        let parse = |args: &[&str]| {
            let cli = Cli::try_parse_from(args).unwrap();
            let Command::Oracle { common } = cli.command else {
                panic!("expected oracle")
            };
            common.to_config()
        };
        assert!(parse(&["varag", "oracle", "--loss", "hinge"]).is_err());
        assert!(parse(&["varag", "oracle", "--regime", "fast"]).is_err());
        assert!(parse(&["varag", "oracle", "--solvers", "sgd"]).is_err());
        assert!(parse(&["varag", "oracle", "--epochs", "0"]).is_err());
    }
}
