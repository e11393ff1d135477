//! Per-epoch run telemetry and its CSV encoding.
//!
//! A trace file is a block of `# key=value` header lines followed by a CSV
//! table with the columns in [`TRACE_COLUMNS`].

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::FiniteSumProblem;

pub const TRACE_COLUMNS: [&str; 6] = ["epoch", "grad_evals", "sfo_calls", "objective", "gap", "wall_ms"];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceHeader {
    pub solver: String,
    pub regime: String,
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub l: f64,
    pub mu: f64,
    pub dataset: String,
    pub rng: String,
    /// Free-form solver settings, e.g. step-size policy.
    pub notes: String,
    /// Epoch indices that close a restart cycle.
    pub cycle_ends: Vec<usize>,
}

impl TraceHeader {
    pub fn for_problem(solver: &str, regime: &str, seed: u64, problem: &FiniteSumProblem) -> Self {
        Self {
            solver: solver.to_string(),
            regime: regime.to_string(),
            seed,
            m: problem.m(),
            n: problem.dim(),
            l: problem.mean_lipschitz(),
            mu: problem.mu(),
            dataset: String::new(),
            rng: crate::sampling::RNG_ALGORITHM.to_string(),
            notes: String::new(),
            cycle_ends: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub grad_evals: u64,
    pub sfo_calls: u64,
    pub objective: f64,
    pub gap: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub header: TraceHeader,
    pub records: Vec<EpochRecord>,
}

impl RunTrace {
    pub fn new(header: TraceHeader) -> Self {
        Self {
            header,
            records: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gap).collect()
    }

    /// Gradient evaluations at the first record whose gap is at most
    /// `threshold`.
    pub fn evals_to_gap(&self, threshold: f64) -> Option<u64> {
        self.records.iter().find(|r| r.gap <= threshold).map(|r| r.grad_evals)
    }

    /// Records ordered by epoch with strictly increasing `grad_evals`.
    pub fn validate(&self) -> Result<()> {
        for w in self.records.windows(2) {
            if w[1].epoch <= w[0].epoch {
                return Err(Error::Invariant(format!("epoch {} follows {}", w[1].epoch, w[0].epoch)));
            }
            if w[1].grad_evals <= w[0].grad_evals {
                return Err(Error::Invariant(format!(
                    "grad_evals not increasing at epoch {}",
                    w[1].epoch
                )));
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let h = &self.header;
        let cycle_ends: Vec<String> = h.cycle_ends.iter().map(|c| c.to_string()).collect();
        let lines = [
            ("solver", h.solver.clone()),
            ("regime", h.regime.clone()),
            ("seed", h.seed.to_string()),
            ("m", h.m.to_string()),
            ("n", h.n.to_string()),
            ("L", h.l.to_string()),
            ("mu", h.mu.to_string()),
            ("dataset", h.dataset.clone()),
            ("rng", h.rng.clone()),
            ("notes", h.notes.clone()),
            ("cycle_ends", cycle_ends.join(";")),
        ];
        for (k, v) in lines {
            writeln!(w, "# {k}={}", v.replace('\n', " "))?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(TRACE_COLUMNS)?;
        for r in &self.records {
            csv.write_record([
                r.epoch.to_string(),
                r.grad_evals.to_string(),
                r.sfo_calls.to_string(),
                r.objective.to_string(),
                r.gap.to_string(),
                r.wall_ms.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut header = TraceHeader::default();
        let mut body = String::new();
        let mut header_line = None;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest.split_once('=').ok_or_else(|| Error::Parse {
                    line: idx + 1,
                    message: "header line without '='".into(),
                })?;
                apply_header_field(&mut header, k, v).map_err(|message| Error::Parse { line: idx + 1, message })?;
            } else {
                header_line.get_or_insert(idx + 1);
                body.push_str(&line);
                body.push('\n');
            }
        }
        let first = header_line.ok_or(Error::NoRows)?;
        let mut csv = csv::Reader::from_reader(body.as_bytes());
        let columns: Vec<String> = csv.headers()?.iter().map(str::to_string).collect();
        if columns != TRACE_COLUMNS {
            return Err(Error::Parse {
                line: first,
                message: format!("unexpected columns {columns:?}"),
            });
        }
        let mut records = Vec::new();
        for (k, row) in csv.records().enumerate() {
            let row = row?;
            let line = first + k + 1;
            let field = |j: usize| row.get(j).unwrap_or("");
            let bad = |what: &str| Error::Parse {
                line,
                message: format!("invalid {what}"),
            };
            records.push(EpochRecord {
                epoch: field(0).parse().map_err(|_| bad("epoch"))?,
                grad_evals: field(1).parse().map_err(|_| bad("grad_evals"))?,
                sfo_calls: field(2).parse().map_err(|_| bad("sfo_calls"))?,
                objective: field(3).parse().map_err(|_| bad("objective"))?,
                gap: field(4).parse().map_err(|_| bad("gap"))?,
                wall_ms: field(5).parse().map_err(|_| bad("wall_ms"))?,
            });
        }
        let trace = Self { header, records };
        trace.validate()?;
        Ok(trace)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

fn apply_header_field(h: &mut TraceHeader, key: &str, value: &str) -> std::result::Result<(), String> {
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("{key}: {e}"));
    let int = |v: &str| v.parse::<usize>().map_err(|e| format!("{key}: {e}"));
    match key {
        "solver" => h.solver = value.to_string(),
        "regime" => h.regime = value.to_string(),
        "seed" => h.seed = value.parse().map_err(|e| format!("seed: {e}"))?,
        "m" => h.m = int(value)?,
        "n" => h.n = int(value)?,
        "L" => h.l = num(value)?,
        "mu" => h.mu = num(value)?,
        "dataset" => h.dataset = value.to_string(),
        "rng" => h.rng = value.to_string(),
        "notes" => h.notes = value.to_string(),
        "cycle_ends" => {
            h.cycle_ends = value
                .split(';')
                .filter(|s| !s.is_empty())
                .map(int)
                .collect::<std::result::Result<_, _>>()?
        }
        // Unknown keys are tolerated for forward compatibility.
        _ => {}
    }
    Ok(())
}
