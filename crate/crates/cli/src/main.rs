use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use depu::bounds::{calibrate_constants, BoundFamily, CalibrationOptions, TailPoint};
use depu::harness::{self, emit_outputs, ExperimentConfig, ExperimentKind, ExperimentResult, HarnessError, ResultFile};
use serde_json::json;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_PROPERTY: u8 = 4;

#[derive(Parser)]
#[command(name = "depu", version, about = "U-statistics under dependence: experiments and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Cap on estimated kernel evaluations (overrides the config).
    #[arg(long)]
    budget: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Hoeffding,
    Merlevede,
    Theorem1,
}

impl From<FamilyArg> for BoundFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Hoeffding => BoundFamily::Hoeffding,
            FamilyArg::Merlevede => BoundFamily::Merlevede,
            FamilyArg::Theorem1 => BoundFamily::Theorem1,
        }
    }
}

#[derive(Args)]
struct CalibrateArgs {
    /// `result.json` of a tail experiment.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for `calibration.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Path lengths used for fitting (default: all).
    #[arg(long, value_delimiter = ',')]
    train_t: Vec<usize>,
    /// Path lengths the fitted bound is checked against.
    #[arg(long, value_delimiter = ',')]
    holdout_t: Vec<usize>,
    #[arg(long, value_enum, default_value = "theorem1")]
    family: FamilyArg,
    /// Offset constant for the `theorem1` family (default: estimated from
    /// the mean deviations of the training cells).
    #[arg(long)]
    c4: Option<f64>,
    /// Binomial standard errors of slack allowed on held-out points.
    #[arg(long, default_value_t = 3.0)]
    slack: f64,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate sample paths and write them as CSV.
    Simulate(Common),
    /// Monte Carlo tail probabilities against the bound families.
    Tail(Common),
    /// Max-norm deviation of correlation matrices over a (T, p) grid.
    Scaling(Common),
    /// Exact bias |θ* − θ| of a finite chain over a T grid.
    Bias(Common),
    /// Telescoping decomposition checks on finite-chain paths.
    DecomposeCheck(Common),
    /// Exact mixing coefficients of a finite chain.
    MixingProfile(Common),
    /// Bernstein-envelope dominance of empirical log-MGFs.
    MgfCheck(Common),
    /// Fit bound constants to the tails of a previous `tail` run.
    Calibrate(CalibrateArgs),
}

struct Failure {
    code: u8,
    message: String,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        let code = if e.is_budget() {
            EXIT_BUDGET
        } else if matches!(e, HarnessError::Io { .. }) {
            EXIT_FAILURE
        } else {
            EXIT_CONFIG
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_error(message: String) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message,
    }
}

fn set_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(config_error("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_error(e.to_string()))?;
    }
    Ok(())
}

fn run_experiment(kind: ExperimentKind, common: &Common) -> Result<u8, Failure> {
    set_threads(common.threads)?;
    let mut config = ExperimentConfig::from_path(&common.config)?;
    let kind = config.resolve_kind(Some(kind))?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(budget) = common.budget {
        config.budget = budget;
    }
    let out = common
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| config_error("no output directory: pass --out or set `output_dir`".into()))?;
    let output = harness::run(&config, kind)?;
    let written = emit_outputs(&output, &out)?;
    summarize(&output.result);
    for check in &output.checks {
        println!(
            "check {}: {} ({})",
            check.name,
            if check.passed { "pass" } else { "FAIL" },
            check.detail
        );
    }
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(if output.all_checks_passed() { 0 } else { EXIT_PROPERTY })
}

fn summarize(result: &ExperimentResult) {
    match result {
        ExperimentResult::Simulate(s) => println!("simulated {} paths of {}", s.lengths.len(), s.process),
        ExperimentResult::Tail(t) => {
            for c in &t.cells {
                println!(
                    "T={} rms={:.4e} dominated={}",
                    c.t, c.rms_deviation, c.bound_dominates
                );
            }
            if let Some(s) = t.rms_slope {
                println!("log-log RMS slope {s:.4}");
            }
        }
        ExperimentResult::Scaling(s) => {
            for c in &s.cells {
                println!("T={} p={} median={:.4e} ratio={:.4}", c.t, c.p, c.median, c.ratio_to_rate);
            }
            if let Some(spread) = s.ratio_spread {
                println!("ratio spread {spread:.4}");
            }
        }
        ExperimentResult::BiasCurve(b) => {
            for p in &b.points {
                println!("T={} bias={:.4e} sqrt(T)*bias={:.4e}", p.t, p.bias, p.scaled);
            }
        }
        ExperimentResult::DecomposeCheck(d) => println!(
            "max residual {:.3e}, max |B|/2M {:.4}, max |E B| {:.3e}",
            d.max_residual, d.max_b_ratio, d.max_p1
        ),
        ExperimentResult::MixingProfile(m) => {
            for p in &m.profiles {
                println!("{:?}: gamma={:?}", p.kind, p.fitted_gamma);
            }
        }
        ExperimentResult::MgfCheck(m) => {
            for c in &m.cells {
                println!("n={} max excess {:.3e}", c.summands, c.max_excess);
            }
        }
    }
}

fn read_tail_result(path: &Path) -> Result<depu::harness::TailExperiment, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: EXIT_FAILURE,
        message: format!("{}: {e}", path.display()),
    })?;
    let file: ResultFile =
        serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    match file.result {
        ExperimentResult::Tail(t) => Ok(t),
        _ => Err(config_error(format!("{} is not a tail experiment result", path.display()))),
    }
}

fn run_calibrate(args: &CalibrateArgs) -> Result<u8, Failure> {
    set_threads(args.threads)?;
    let tail = read_tail_result(&args.input)?;
    let select = |ts: &[usize]| -> Vec<(TailPoint, f64)> {
        tail.cells
            .iter()
            .filter(|c| ts.is_empty() || ts.contains(&c.t))
            .flat_map(|c| {
                c.points.iter().map(move |p| {
                    (
                        TailPoint {
                            x: p.x,
                            t: c.t,
                            m: tail.kernel_bound,
                            tail: p.empirical,
                        },
                        p.stderr,
                    )
                })
            })
            .collect()
    };
    let train: Vec<TailPoint> = select(&args.train_t).into_iter().map(|(p, _)| p).collect();
    let options = CalibrationOptions {
        family: args.family.into(),
        c4: match (args.family, args.c4) {
            (FamilyArg::Theorem1, None) => tail.offset_estimate(&args.train_t).unwrap_or(0.0),
            (FamilyArg::Theorem1, Some(c4)) => c4,
            _ => 0.0,
        },
        ..CalibrationOptions::default()
    };
    let cal = calibrate_constants(&train, &options, &tail.constants).map_err(|e| config_error(e.to_string()))?;
    let mut holdout = Vec::new();
    let mut all_dominated = true;
    if !args.holdout_t.is_empty() {
        for (p, se) in select(&args.holdout_t) {
            let bound = harness_bound(&options, cal.constant, &p)?;
            let dominated = p.tail <= bound + args.slack * se;
            all_dominated &= dominated;
            holdout.push(json!({"t": p.t, "x": p.x, "empirical": p.tail, "stderr": se, "bound": bound, "dominated": dominated}));
        }
        if holdout.is_empty() {
            return Err(config_error("no held-out points match --holdout-t".into()));
        }
    }
    let report = json!({"calibration": cal, "holdout": holdout, "holdout_dominated": all_dominated});
    let text = serde_json::to_string_pretty(&report).map_err(|e| config_error(e.to_string()))?;
    println!(
        "calibrated constant {:.6} ({:?}, c4 = {:.6}){}",
        cal.constant,
        options.family,
        options.c4,
        if cal.capped { " [capped: no binding point]" } else { "" }
    );
    if !holdout.is_empty() {
        println!("held-out dominance: {}", if all_dominated { "pass" } else { "FAIL" });
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).map_err(|e| Failure {
            code: EXIT_FAILURE,
            message: format!("{}: {e}", dir.display()),
        })?;
        let path = dir.join("calibration.json");
        std::fs::write(&path, text + "\n").map_err(|e| Failure {
            code: EXIT_FAILURE,
            message: format!("{}: {e}", path.display()),
        })?;
    } else {
        println!("{text}");
    }
    Ok(if all_dominated { 0 } else { EXIT_PROPERTY })
}

fn harness_bound(options: &CalibrationOptions, constant: f64, p: &TailPoint) -> Result<f64, Failure> {
    let shifted = p.x - options.c4 * p.m / (p.t as f64).sqrt();
    if shifted <= 0.0 {
        return Ok(2.0);
    }
    options
        .family
        .bound(shifted, p.t, p.m, constant)
        .map_err(|e| config_error(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(c) => run_experiment(ExperimentKind::Simulate, c),
        Command::Tail(c) => run_experiment(ExperimentKind::Tail, c),
        Command::Scaling(c) => run_experiment(ExperimentKind::Scaling, c),
        Command::Bias(c) => run_experiment(ExperimentKind::BiasCurve, c),
        Command::DecomposeCheck(c) => run_experiment(ExperimentKind::DecomposeCheck, c),
        Command::MixingProfile(c) => run_experiment(ExperimentKind::MixingProfile, c),
        Command::MgfCheck(c) => run_experiment(ExperimentKind::MgfCheck, c),
        Command::Calibrate(a) => run_calibrate(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
