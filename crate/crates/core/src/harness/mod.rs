//! Experiment harness: configuration, seeded single runs and ensembles,
//! CSV emission, the parameter-study sweeps, and the gradient check.

pub mod config;
pub mod experiments;
pub mod gradcheck;

use std::path::Path;

use rayon::prelude::*;

use crate::metrics::{summarize, EnsembleSummary, RunRecord};
use crate::optim::train;
use crate::{Error, Result};

pub use config::{InitKind, OptimizerKind, RunConfig};

/// Seed for ensemble member `index` under base seed `base`.
///
/// SplitMix64 finaliser applied to `base + (index+1)·0x9E3779B97F4A7C15`.
/// Counter-based, so members can run under any parallel schedule, on any
/// platform, and still draw identical seeds.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scientific notation with 17 significant digits; round-trips every f64
/// exactly. NaN and infinities keep their standard spellings.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV row per completed run: full configuration plus outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: crate::form::Method,
    pub optimizer: OptimizerKind,
    pub init: InitKind,
    pub layers: usize,
    pub neurons: usize,
    pub ntp: usize,
    pub lambda: f64,
    pub xend: f64,
    pub kmax: u64,
    pub seed: u64,
    pub delta_u: f64,
    pub final_cost: f64,
    pub diverged: bool,
    pub wall_ms: u64,
}

pub const RESULT_HEADER: &str =
    "method,optimizer,init,layers,neurons,ntp,lambda,xend,kmax,seed,delta_u,final_cost,diverged,wall_ms";

impl ResultRow {
    fn from_record(cfg: &RunConfig, seed: u64, record: &RunRecord) -> Self {
        ResultRow {
            method: cfg.method,
            optimizer: cfg.optimizer,
            init: cfg.init,
            layers: cfg.layers,
            neurons: cfg.neurons,
            ntp: cfg.ntp,
            lambda: cfg.lambda,
            xend: cfg.xend,
            kmax: cfg.kmax,
            seed,
            delta_u: record.delta_u,
            final_cost: record.final_cost,
            diverged: record.diverged,
            // wall time is inherently non-deterministic, so it stays 0
            // unless timing output is requested
            wall_ms: if cfg.timing {
                record.wall.as_millis() as u64
            } else {
                0
            },
        }
    }

    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method.as_str(),
            self.optimizer.as_str(),
            self.init.to_key(),
            self.layers,
            self.neurons,
            self.ntp,
            format_float(self.lambda),
            format_float(self.xend),
            self.kmax,
            self.seed,
            format_float(self.delta_u),
            format_float(self.final_cost),
            u8::from(self.diverged),
            self.wall_ms,
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 14 {
            return Err(Error::config(
                "csv",
                format!("expected 14 columns, got {}", fields.len()),
            ));
        }
        fn num<T: std::str::FromStr>(field: &str, name: &str) -> Result<T> {
            field
                .parse()
                .map_err(|_| Error::config(name, format!("cannot parse `{field}`")))
        }
        Ok(ResultRow {
            method: fields[0].parse()?,
            optimizer: fields[1].parse()?,
            init: fields[2].parse()?,
            layers: num(fields[3], "layers")?,
            neurons: num(fields[4], "neurons")?,
            ntp: num(fields[5], "ntp")?,
            lambda: num(fields[6], "lambda")?,
            xend: num(fields[7], "xend")?,
            kmax: num(fields[8], "kmax")?,
            seed: num(fields[9], "seed")?,
            delta_u: num(fields[10], "delta_u")?,
            final_cost: num(fields[11], "final_cost")?,
            diverged: match fields[12] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::config(
                        "diverged",
                        format!("expected 0 or 1, got `{other}`"),
                    ))
                }
            },
            wall_ms: num(fields[13], "wall_ms")?,
        })
    }
}

/// Writes a header line plus rows to `path`.
pub fn write_csv(path: &Path, header: &str, lines: &[String]) -> Result<()> {
    let mut out = String::with_capacity(header.len() + lines.iter().map(|l| l.len() + 1).sum::<usize>() + 1);
    out.push_str(header);
    out.push('\n');
    for line in lines {
        out.push_str(line);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Reads back a rows CSV written by [`write_csv`] with [`RESULT_HEADER`].
pub fn read_result_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == RESULT_HEADER => {}
        _ => return Err(Error::config("csv", "missing or unexpected header")),
    }
    lines.map(ResultRow::parse_csv_line).collect()
}

/// Outcome of a single training run.
#[derive(Debug, Clone)]
pub struct SingleOutcome {
    pub row: ResultRow,
    pub record: RunRecord,
    pub final_params: crate::net::NetworkParameters,
}

/// Trains once with the configured seed.
pub fn run_single(cfg: &RunConfig) -> Result<SingleOutcome> {
    run_single_with_history(cfg, false)
}

/// Trains once, optionally recording a log-subsampled cost/error history.
pub fn run_single_with_history(cfg: &RunConfig, record_history: bool) -> Result<SingleOutcome> {
    let (ivp, grid) = cfg.problem()?;
    let training = cfg.training(record_history)?;
    let (record, final_params) = crate::optim::train_full(&training, &ivp, &grid)?;
    Ok(SingleOutcome {
        row: ResultRow::from_record(cfg, cfg.seed, &record),
        record,
        final_params,
    })
}

/// Outcome of a seeded ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleOutcome {
    /// One row per member, in member order regardless of schedule.
    pub rows: Vec<ResultRow>,
    pub records: Vec<RunRecord>,
    /// `None` when every member diverged.
    pub summary: Option<EnsembleSummary>,
}

/// Runs `R` training runs with seeds `mix_seed(base, r)` on a worker pool
/// and summarises the numeric errors.
pub fn run_ensemble(cfg: &RunConfig) -> Result<EnsembleOutcome> {
    let runs = cfg.runs_or(100);
    if runs == 0 {
        return Err(Error::config("runs", "ensemble needs at least 1 run"));
    }
    let (ivp, grid) = cfg.problem()?;
    let training = cfg.training(false)?;
    let pool = worker_pool(cfg.workers_or_default())?;
    let records: Result<Vec<RunRecord>> = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|r| {
                let mut t = training.clone();
                t.seed = mix_seed(cfg.seed, r as u64);
                train(&t, &ivp, &grid)
            })
            .collect()
    });
    let records = records?;
    let rows = records
        .iter()
        .map(|rec| ResultRow::from_record(cfg, rec.seed, rec))
        .collect();
    let summary = summarize(&records);
    Ok(EnsembleOutcome {
        rows,
        records,
        summary,
    })
}

pub(crate) fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))
}
