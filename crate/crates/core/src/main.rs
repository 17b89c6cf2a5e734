//! Command line harness: single runs, seeded ensembles, the six parameter
//! studies, and the gradient check.
//!
//! Exit codes: 0 success, 1 configuration error, 2 gradient check failure,
//! 3 i/o error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use neuralform::harness::experiments::{run_experiment, ExperimentId};
use neuralform::harness::gradcheck::{run_gradcheck, GradcheckOptions};
use neuralform::harness::{
    format_float, run_ensemble, run_single_with_history, write_csv, RunConfig, RESULT_HEADER,
};
use neuralform::{Error, Result};

#[derive(Parser)]
#[command(
    name = "neuralform",
    version,
    about = "Neural-network solver for the stiff linear IVP u' = λu, u(0) = 1, \
             with TSM/mTSM cost constructions and reproducible parameter studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once and emit one result row
    Single(SingleArgs),
    /// Run a seeded ensemble and summarise the numeric errors
    Ensemble(CommonArgs),
    /// Weight-initialisation sweep
    Exp1(ExpArgs),
    /// Hidden-layer-neuron sweep
    Exp2(ExpArgs),
    /// Hidden-layer sweep (table per training-point count)
    Exp3(ExpArgs),
    /// Epoch-budget sweep
    Exp4(ExpArgs),
    /// Stiffness sweep and domain-size sweep
    Exp5(ExpArgs),
    /// Optimiser comparison with ensemble statistics
    Exp6(ExpArgs),
    /// Validate analytic gradients against the finite-difference oracle
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Config file with key=value lines; CLI flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (single/ensemble) or directory (experiments)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ensemble size
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads; defaults to available parallelism
    #[arg(long)]
    workers: Option<usize>,
    /// tsm | mtsm
    #[arg(long)]
    method: Option<String>,
    /// adam | cbp | vbp
    #[arg(long)]
    optimizer: Option<String>,
    /// const[:c] | rand[:lo:hi]
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    neurons: Option<usize>,
    /// Number of training points
    #[arg(long)]
    ntp: Option<usize>,
    /// Stiffness parameter
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Domain end: training points cover [0, xend]
    #[arg(long)]
    xend: Option<f64>,
    /// Epoch budget
    #[arg(long)]
    kmax: Option<u64>,
    /// Record measured wall times in the wall_ms column (off by default so
    /// output files are byte-identical across reruns)
    #[arg(long)]
    timing: bool,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(v) = &self.method {
            cfg.apply("method", v)?;
        }
        if let Some(v) = &self.optimizer {
            cfg.apply("optimizer", v)?;
        }
        if let Some(v) = &self.init {
            cfg.apply("init", v)?;
        }
        if let Some(v) = self.layers {
            cfg.layers = v;
        }
        if let Some(v) = self.neurons {
            cfg.neurons = v;
        }
        if let Some(v) = self.ntp {
            cfg.ntp = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.xend {
            cfg.xend = v;
        }
        if let Some(v) = self.kmax {
            cfg.kmax = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.runs {
            cfg.runs = Some(v);
        }
        if let Some(v) = self.workers {
            cfg.workers = Some(v);
        }
        if self.timing {
            cfg.timing = true;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SingleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Write the log-subsampled cost/error trajectory to this CSV file
    #[arg(long)]
    history_out: Option<PathBuf>,
    /// Write the final weight vector to this CSV file
    #[arg(long)]
    dump_weights: Option<PathBuf>,
}

#[derive(Args)]
struct ExpArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Override the primary sweep axis (comma-separated values)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    sweep: Option<Vec<String>>,
    /// Override the exp5 domain-size axis (comma-separated values)
    #[arg(long, value_delimiter = ',')]
    xend_sweep: Option<Vec<String>>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Scaled-error threshold
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Random weight draws per architecture and method
    #[arg(long, default_value_t = 5)]
    draws: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, hide = true, allow_negative_numbers = true)]
    corrupt: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Single(args) => single(args),
        Command::Ensemble(args) => ensemble(args),
        Command::Exp1(args) => experiment(ExperimentId::Exp1, args),
        Command::Exp2(args) => experiment(ExperimentId::Exp2, args),
        Command::Exp3(args) => experiment(ExperimentId::Exp3, args),
        Command::Exp4(args) => experiment(ExperimentId::Exp4, args),
        Command::Exp5(args) => experiment(ExperimentId::Exp5, args),
        Command::Exp6(args) => experiment(ExperimentId::Exp6, args),
        Command::Gradcheck(args) => gradcheck(args),
    }
}

fn single(args: SingleArgs) -> Result<ExitCode> {
    let cfg = args.common.resolve()?;
    let outcome = run_single_with_history(&cfg, args.history_out.is_some())?;
    match &args.common.out {
        Some(path) => write_csv(path, RESULT_HEADER, &[outcome.row.to_csv_line()])?,
        None => {
            println!("{RESULT_HEADER}");
            println!("{}", outcome.row.to_csv_line());
        }
    }
    if let Some(path) = &args.history_out {
        let lines: Vec<String> = outcome
            .record
            .history
            .as_deref()
            .unwrap_or(&[])
            .iter()
            .map(|h| {
                format!(
                    "{},{},{}",
                    h.epoch,
                    format_float(h.cost),
                    format_float(h.delta_u)
                )
            })
            .collect();
        write_csv(path, "epoch,cost,delta_u", &lines)?;
    }
    if let Some(path) = &args.dump_weights {
        let lines: Vec<String> = outcome
            .final_params
            .weights()
            .iter()
            .enumerate()
            .map(|(i, w)| format!("{i},{}", format_float(*w)))
            .collect();
        write_csv(path, "index,weight", &lines)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn ensemble(args: CommonArgs) -> Result<ExitCode> {
    let cfg = args.resolve()?;
    let outcome = run_ensemble(&cfg)?;
    let lines: Vec<String> = outcome.rows.iter().map(|r| r.to_csv_line()).collect();
    match &args.out {
        Some(path) => write_csv(path, RESULT_HEADER, &lines)?,
        None => {
            println!("{RESULT_HEADER}");
            for line in &lines {
                println!("{line}");
            }
        }
    }
    match &outcome.summary {
        Some(s) => eprintln!(
            "runs={} diverged={} mean={} std={} q10={} q20={} q30={}",
            s.count + s.diverged,
            s.diverged,
            format_float(s.mean),
            format_float(s.std_dev),
            format_float(s.q10),
            format_float(s.q20),
            format_float(s.q30),
        ),
        None => eprintln!("all {} runs diverged", outcome.rows.len()),
    }
    Ok(ExitCode::SUCCESS)
}

fn experiment(id: ExperimentId, args: ExpArgs) -> Result<ExitCode> {
    let cfg = args.common.resolve()?;
    let out_dir = args
        .common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("results").join(id.as_str()));
    let files = run_experiment(
        id,
        &cfg,
        args.sweep.as_deref(),
        args.xend_sweep.as_deref(),
        &out_dir,
    )?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn gradcheck(args: GradcheckArgs) -> Result<ExitCode> {
    if !(args.tolerance > 0.0) {
        return Err(Error::config("tolerance", "must be positive"));
    }
    let report = run_gradcheck(&GradcheckOptions {
        tolerance: args.tolerance,
        draws: args.draws.max(1),
        seed: args.seed,
        corrupt: args.corrupt,
    })?;
    for case in &report.cases {
        println!(
            "L={} H={:<2} {:<4}  max scaled error {:.3e}",
            case.layers,
            case.neurons,
            case.method.as_str(),
            case.max_err
        );
    }
    println!(
        "closed-form vs reverse accumulation (L=1): max abs deviation {:.3e}",
        report.closed_form_max_abs
    );
    println!(
        "max scaled error {:.3e} against tolerance {:.1e}: {}",
        report.max_err,
        report.tolerance,
        if report.passed { "ok" } else { "FAIL" }
    );
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
