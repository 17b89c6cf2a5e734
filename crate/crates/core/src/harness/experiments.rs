//! The six parameter-study sweeps.
//!
//! Every experiment emits plot-ready CSV files into an output directory, one
//! file per figure panel (or per table), with the sweep value in the first
//! column. Averaged experiments compare a constant initialisation against
//! the mean error of an ensemble of random initialisations; diverged runs
//! are excluded from means and reported in their own column.
//!
//! Seeds are counter-based: member `r` of the ensemble at sweep point `s`
//! of panel `p` draws seed `mix(mix(mix(base, p), s), r)`, so results do not
//! depend on scheduling.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::form::Method;
use crate::harness::{
    format_float, mix_seed, run_ensemble, worker_pool, write_csv, InitKind, OptimizerKind,
    RunConfig, RESULT_HEADER,
};
use crate::metrics::{average_error, RunRecord};
use crate::optim::train;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    /// Weight initialisation sweep: constant base value c, with random
    /// perturbations of width 1e-2 centred on c.
    Exp1,
    /// Number of hidden layer neurons.
    Exp2,
    /// Number of hidden layers at five neurons per layer, as a table.
    Exp3,
    /// Epoch budget, log-spaced from 1 to 1e5.
    Exp4,
    /// Stiffness parameter (part 1) and domain size (part 2).
    Exp5,
    /// Optimiser comparison: per-run results plus ensemble statistics.
    Exp6,
}

impl ExperimentId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentId::Exp1 => "exp1",
            ExperimentId::Exp2 => "exp2",
            ExperimentId::Exp3 => "exp3",
            ExperimentId::Exp4 => "exp4",
            ExperimentId::Exp5 => "exp5",
            ExperimentId::Exp6 => "exp6",
        }
    }
}

/// One figure panel: method × optimiser × number of training points.
#[derive(Debug, Clone, Copy)]
struct Panel {
    method: Method,
    optimizer: OptimizerKind,
    ntp: usize,
}

fn panels() -> Vec<Panel> {
    let mut out = Vec::new();
    for method in [Method::Tsm, Method::Mtsm] {
        for optimizer in [OptimizerKind::Cbp, OptimizerKind::Adam] {
            for ntp in [10, 20, 40] {
                out.push(Panel {
                    method,
                    optimizer,
                    ntp,
                });
            }
        }
    }
    out
}

fn panel_config(base: &RunConfig, panel: Panel) -> RunConfig {
    RunConfig {
        method: panel.method,
        optimizer: panel.optimizer,
        ntp: panel.ntp,
        ..base.clone()
    }
}

fn panel_file(out_dir: &Path, experiment: &str, panel: Panel) -> PathBuf {
    out_dir.join(format!(
        "{experiment}_{}_{}_ntp{}.csv",
        panel.method.as_str(),
        panel.optimizer.as_str(),
        panel.ntp
    ))
}

fn parse_sweep<T: std::str::FromStr>(values: &[String], field: &str) -> Result<Vec<T>> {
    if values.is_empty() {
        return Err(Error::config(field, "sweep must not be empty"));
    }
    values
        .iter()
        .map(|v| {
            v.parse()
                .map_err(|_| Error::config(field, format!("cannot parse sweep value `{v}`")))
        })
        .collect()
}

fn point_seed(base: u64, panel: usize, point: usize) -> u64 {
    mix_seed(mix_seed(base, panel as u64), point as u64)
}

fn single_record(cfg: &RunConfig) -> Result<RunRecord> {
    let (ivp, grid) = cfg.problem()?;
    train(&cfg.training(false)?, &ivp, &grid)
}

fn ensemble_records(
    pool: &rayon::ThreadPool,
    cfg: &RunConfig,
    runs: usize,
    base_seed: u64,
) -> Result<Vec<RunRecord>> {
    let (ivp, grid) = cfg.problem()?;
    let training = cfg.training(false)?;
    pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|r| {
                let mut t = training.clone();
                t.seed = mix_seed(base_seed, r as u64);
                train(&t, &ivp, &grid)
            })
            .collect()
    })
}

const SWEEP_COLUMNS: &str = "delta_u_const,const_diverged,mean_delta_u_rnd,rnd_diverged,rnd_runs";

/// One line of an averaged sweep: constant-init error next to the ensemble
/// mean of random-init errors.
fn sweep_line(
    pool: &rayon::ThreadPool,
    label: &str,
    const_cfg: &RunConfig,
    rnd_cfg: &RunConfig,
    runs: usize,
    seed: u64,
) -> Result<String> {
    let const_rec = single_record(const_cfg)?;
    let records = ensemble_records(pool, rnd_cfg, runs, seed)?;
    let mean = average_error(&records);
    let diverged = records.iter().filter(|r| r.diverged).count();
    Ok(format!(
        "{label},{},{},{},{diverged},{runs}",
        format_float(const_rec.delta_u),
        u8::from(const_rec.diverged),
        format_float(mean.value),
    ))
}

/// Runs one experiment and returns the paths of the files it wrote.
pub fn run_experiment(
    id: ExperimentId,
    base: &RunConfig,
    sweep: Option<&[String]>,
    xend_sweep: Option<&[String]>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.display().to_string(),
        source: e,
    })?;
    let pool = worker_pool(base.workers_or_default())?;
    match id {
        ExperimentId::Exp1 => exp1(base, sweep, out_dir, &pool),
        ExperimentId::Exp2 => exp2(base, sweep, out_dir, &pool),
        ExperimentId::Exp3 => exp3(base, sweep, out_dir, &pool),
        ExperimentId::Exp4 => exp4(base, sweep, out_dir, &pool),
        ExperimentId::Exp5 => exp5(base, sweep, xend_sweep, out_dir, &pool),
        ExperimentId::Exp6 => exp6(base, sweep, out_dir),
    }
}

/// Weight initialisation sweep. Default base values cover [-1, 1] in 0.05
/// steps; around each base value c the random runs draw from
/// [c - 5e-3, c + 5e-3).
fn exp1(
    base: &RunConfig,
    sweep: Option<&[String]>,
    out_dir: &Path,
    pool: &rayon::ThreadPool,
) -> Result<Vec<PathBuf>> {
    let values: Vec<f64> = match sweep {
        Some(s) => parse_sweep(s, "sweep")?,
        None => (0..=40).map(|i| i as f64 * 0.05 - 1.0).collect(),
    };
    let runs = base.runs_or(100);
    let mut files = Vec::new();
    for (pi, panel) in panels().into_iter().enumerate() {
        let cfg = panel_config(base, panel);
        let mut lines = Vec::with_capacity(values.len());
        for (si, &c) in values.iter().enumerate() {
            let const_cfg = RunConfig {
                init: InitKind::Constant(c),
                ..cfg.clone()
            };
            let rnd_cfg = RunConfig {
                init: InitKind::Uniform(c - 5e-3, c + 5e-3),
                ..cfg.clone()
            };
            lines.push(sweep_line(
                pool,
                &format_float(c),
                &const_cfg,
                &rnd_cfg,
                runs,
                point_seed(base.seed, pi, si),
            )?);
        }
        let path = panel_file(out_dir, "exp1", panel);
        write_csv(&path, &format!("init_value,{SWEEP_COLUMNS}"), &lines)?;
        files.push(path);
    }
    Ok(files)
}

/// Hidden-layer-neuron sweep, default H = 1..10.
fn exp2(
    base: &RunConfig,
    sweep: Option<&[String]>,
    out_dir: &Path,
    pool: &rayon::ThreadPool,
) -> Result<Vec<PathBuf>> {
    let values: Vec<usize> = match sweep {
        Some(s) => parse_sweep(s, "sweep")?,
        None => (1..=10).collect(),
    };
    let runs = base.runs_or(100);
    let mut files = Vec::new();
    for (pi, panel) in panels().into_iter().enumerate() {
        let cfg = panel_config(base, panel);
        let mut lines = Vec::with_capacity(values.len());
        for (si, &h) in values.iter().enumerate() {
            let const_cfg = RunConfig {
                neurons: h,
                init: InitKind::Constant(0.0),
                ..cfg.clone()
            };
            let rnd_cfg = RunConfig {
                neurons: h,
                init: InitKind::Uniform(0.0, 1e-2),
                ..cfg.clone()
            };
            lines.push(sweep_line(
                pool,
                &h.to_string(),
                &const_cfg,
                &rnd_cfg,
                runs,
                point_seed(base.seed, pi, si),
            )?);
        }
        let path = panel_file(out_dir, "exp2", panel);
        write_csv(&path, &format!("neurons,{SWEEP_COLUMNS}"), &lines)?;
        files.push(path);
    }
    Ok(files)
}

/// Hidden-layer sweep as a table per training-point count: rows are layer
/// counts, columns the method × optimiser × initialisation cells.
fn exp3(
    base: &RunConfig,
    sweep: Option<&[String]>,
    out_dir: &Path,
    pool: &rayon::ThreadPool,
) -> Result<Vec<PathBuf>> {
    let layer_values: Vec<usize> = match sweep {
        Some(s) => parse_sweep(s, "sweep")?,
        None => (1..=5).collect(),
    };
    let runs = base.runs_or(100);
    let mut files = Vec::new();
    for (ni, &ntp) in [10usize, 20, 40].iter().enumerate() {
        let mut lines = Vec::with_capacity(layer_values.len());
        for (si, &layers) in layer_values.iter().enumerate() {
            let mut cells = Vec::with_capacity(8);
            for (oi, optimizer) in [OptimizerKind::Cbp, OptimizerKind::Adam].into_iter().enumerate()
            {
                // constant-init columns first, then random-init means
                for init in [InitKind::Constant(0.0), InitKind::Uniform(0.0, 1e-2)] {
                    for (mi, method) in [Method::Tsm, Method::Mtsm].into_iter().enumerate() {
                        let cfg = RunConfig {
                            method,
                            optimizer,
                            ntp,
                            layers,
                            neurons: 5,
                            init,
                            ..base.clone()
                        };
                        let value = match init {
                            InitKind::Constant(_) => single_record(&cfg)?.delta_u,
                            InitKind::Uniform(..) => {
                                let seed = point_seed(
                                    base.seed,
                                    ni * 4 + oi * 2 + mi,
                                    si,
                                );
                                let records = ensemble_records(pool, &cfg, runs, seed)?;
                                average_error(&records).value
                            }
                        };
                        cells.push(format_float(value));
                    }
                }
            }
            lines.push(format!("{layers},{}", cells.join(",")));
        }
        let path = out_dir.join(format!("exp3_ntp{ntp}.csv"));
        write_csv(
            &path,
            "hidden_layers,cbp_tsm_const,cbp_mtsm_const,cbp_tsm_rnd,cbp_mtsm_rnd,adam_tsm_const,adam_mtsm_const,adam_tsm_rnd,adam_mtsm_rnd",
            &lines,
        )?;
        files.push(path);
    }
    Ok(files)
}

/// Epoch-budget sweep, default log-spaced 1, 2, 5, 10, ..., 1e5.
fn exp4(
    base: &RunConfig,
    sweep: Option<&[String]>,
    out_dir: &Path,
    pool: &rayon::ThreadPool,
) -> Result<Vec<PathBuf>> {
    let values: Vec<u64> = match sweep {
        Some(s) => parse_sweep(s, "sweep")?,
        None => {
            let mut v = Vec::new();
            for decade in [1u64, 10, 100, 1_000, 10_000] {
                for m in [1, 2, 5] {
                    v.push(m * decade);
                }
            }
            v.push(100_000);
            v
        }
    };
    let runs = base.runs_or(100);
    let mut files = Vec::new();
    for (pi, panel) in panels().into_iter().enumerate() {
        let cfg = panel_config(base, panel);
        let mut lines = Vec::with_capacity(values.len());
        for (si, &kmax) in values.iter().enumerate() {
            let const_cfg = RunConfig {
                kmax,
                init: InitKind::Constant(0.0),
                ..cfg.clone()
            };
            let rnd_cfg = RunConfig {
                kmax,
                init: InitKind::Uniform(0.0, 1e-2),
                ..cfg.clone()
            };
            lines.push(sweep_line(
                pool,
                &kmax.to_string(),
                &const_cfg,
                &rnd_cfg,
                runs,
                point_seed(base.seed, pi, si),
            )?);
        }
        let path = panel_file(out_dir, "exp4", panel);
        write_csv(&path, &format!("kmax,{SWEEP_COLUMNS}"), &lines)?;
        files.push(path);
    }
    Ok(files)
}

/// Stiffness sweep (part 1, default λ = -0.5 .. -10 in -0.5 steps) and
/// domain-size sweep (part 2, default x_end = 0.05 .. 3 in 0.05 steps).
fn exp5(
    base: &RunConfig,
    sweep: Option<&[String]>,
    xend_sweep: Option<&[String]>,
    out_dir: &Path,
    pool: &rayon::ThreadPool,
) -> Result<Vec<PathBuf>> {
    let lambdas: Vec<f64> = match sweep {
        Some(s) => parse_sweep(s, "sweep")?,
        None => (1..=20).map(|i| -0.5 * i as f64).collect(),
    };
    let xends: Vec<f64> = match xend_sweep {
        Some(s) => parse_sweep(s, "xend-sweep")?,
        None => (1..=60).map(|i| 0.05 * i as f64).collect(),
    };
    let runs = base.runs_or(100);
    let mut files = Vec::new();
    for (pi, panel) in panels().into_iter().enumerate() {
        let cfg = panel_config(base, panel);

        let mut lines = Vec::with_capacity(lambdas.len());
        for (si, &lambda) in lambdas.iter().enumerate() {
            let const_cfg = RunConfig {
                lambda,
                init: InitKind::Constant(0.0),
                ..cfg.clone()
            };
            let rnd_cfg = RunConfig {
                lambda,
                init: InitKind::Uniform(0.0, 1e-2),
                ..cfg.clone()
            };
            lines.push(sweep_line(
                pool,
                &format_float(lambda),
                &const_cfg,
                &rnd_cfg,
                runs,
                point_seed(base.seed, pi, si),
            )?);
        }
        let path = panel_file(out_dir, "exp5_lambda", panel);
        write_csv(&path, &format!("lambda,{SWEEP_COLUMNS}"), &lines)?;
        files.push(path);

        let mut lines = Vec::with_capacity(xends.len());
        for (si, &xend) in xends.iter().enumerate() {
            let const_cfg = RunConfig {
                xend,
                init: InitKind::Constant(0.0),
                ..cfg.clone()
            };
            let rnd_cfg = RunConfig {
                xend,
                init: InitKind::Uniform(0.0, 1e-2),
                ..cfg.clone()
            };
            lines.push(sweep_line(
                pool,
                &format_float(xend),
                &const_cfg,
                &rnd_cfg,
                runs,
                point_seed(base.seed, 100 + pi, si),
            )?);
        }
        let path = panel_file(out_dir, "exp5_domain", panel);
        write_csv(&path, &format!("xend,{SWEEP_COLUMNS}"), &lines)?;
        files.push(path);
    }
    Ok(files)
}

/// Optimiser comparison over {Adam, cBP, vBP} × {TSM, mTSM} × ntP, with
/// per-run rows and a statistics table for the random-init ensembles.
/// Defaults to 1e3 runs per combination; scale with `runs`.
fn exp6(base: &RunConfig, sweep: Option<&[String]>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let ntps: Vec<usize> = match sweep {
        Some(s) => parse_sweep(s, "sweep")?,
        None => vec![10, 20, 40],
    };
    let runs = base.runs_or(1_000);

    let mut row_lines = Vec::new();
    let mut stat_lines = Vec::new();
    let mut const_lines = Vec::new();
    let mut combo = 0u64;
    for method in [Method::Tsm, Method::Mtsm] {
        for &ntp in &ntps {
            for optimizer in [OptimizerKind::Adam, OptimizerKind::Cbp, OptimizerKind::Vbp] {
                let cfg = RunConfig {
                    method,
                    optimizer,
                    ntp,
                    init: InitKind::Uniform(0.0, 1e-2),
                    seed: mix_seed(base.seed, combo),
                    runs: Some(runs),
                    ..base.clone()
                };
                combo += 1;
                let outcome = run_ensemble(&cfg)?;
                row_lines.extend(outcome.rows.iter().map(|r| r.to_csv_line()));
                let diverged = outcome.records.iter().filter(|r| r.diverged).count();
                let prefix = format!("{},{},{}", method.as_str(), ntp, optimizer.as_str());
                match outcome.summary {
                    Some(s) => stat_lines.push(format!(
                        "{prefix},{},{diverged},{},{},{},{},{}",
                        s.count,
                        format_float(s.mean),
                        format_float(s.std_dev),
                        format_float(s.q10),
                        format_float(s.q20),
                        format_float(s.q30),
                    )),
                    None => stat_lines.push(format!(
                        "{prefix},0,{diverged},NaN,NaN,NaN,NaN,NaN"
                    )),
                }

                let const_cfg = RunConfig {
                    init: InitKind::Constant(0.0),
                    ..cfg.clone()
                };
                let rec = single_record(&const_cfg)?;
                const_lines.push(format!(
                    "{prefix},{},{},{}",
                    format_float(rec.delta_u),
                    format_float(rec.final_cost),
                    u8::from(rec.diverged),
                ));
            }
        }
    }

    let runs_path = out_dir.join("exp6_runs.csv");
    write_csv(&runs_path, RESULT_HEADER, &row_lines)?;
    let stats_path = out_dir.join("exp6_stats.csv");
    write_csv(
        &stats_path,
        "method,ntp,optimizer,runs,diverged,mean,std_dev,q10,q20,q30",
        &stat_lines,
    )?;
    let const_path = out_dir.join("exp6_const.csv");
    write_csv(
        &const_path,
        "method,ntp,optimizer,delta_u,final_cost,diverged",
        &const_lines,
    )?;
    Ok(vec![runs_path, stats_path, const_path])
}
