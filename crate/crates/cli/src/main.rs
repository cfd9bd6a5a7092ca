//! `treecert` command-line front end.
//!
//! Exit codes: 0 when the property holds or the run completed, 1 when a
//! property is violated, 2 on usage or input errors.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use treecert::{
    argmax, batch_robustness, check_range, load_model_file, read_test_set, BatchOptions, Ensemble,
    Enumerator, ImageDims, Mapping, RangeSpec, Region, RobustnessMode, SelectionStrategy,
    SlidingWindow, Verdict,
};

#[derive(Parser)]
#[command(name = "treecert", version, about = "Formal verification of tree ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the model on one comma-separated input row.
    Eval {
        model: PathBuf,
        row: String,
        #[arg(long)]
        json: bool,
    },
    /// Check that every output stays within [alpha, beta] over the domain.
    CheckRange {
        model: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Lower bound, one value for all outputs or a comma-separated list.
        #[arg(long, default_value = "-inf", allow_hyphen_values = true)]
        alpha: String,
        /// Upper bound, one value for all outputs or a comma-separated list.
        #[arg(long, default_value = "inf", allow_hyphen_values = true)]
        beta: String,
    },
    /// Robustness against noise over a labelled CSV test set.
    CheckRobustness {
        model: PathBuf,
        #[arg(long)]
        testset: PathBuf,
        #[arg(long)]
        epsilon: f32,
        /// Confine noise to a sliding window: WIDTH,HEIGHT,STRIDE.
        #[arg(long)]
        window: Option<String>,
        /// Image layout for --window: WIDTH,HEIGHT (row-major pixels).
        #[arg(long)]
        image_dims: Option<String>,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Count the equivalence classes of the model over the domain.
    CountClasses {
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Input box, `lo:hi` per dimension separated by commas; a single pair
    /// applies to every dimension. Defaults to unbounded.
    #[arg(long, allow_hyphen_values = true)]
    domain: Option<String>,
    /// Child selection order: left, right or least-points.
    #[arg(long, default_value = "least-points")]
    strategy: SelectionStrategy,
    /// Print a JSON report instead of text.
    #[arg(long)]
    json: bool,
}

type Failure = Box<dyn std::error::Error>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Failure> {
    match command {
        Command::Eval { model, row, json } => eval(&model, &row, json),
        Command::CheckRange {
            model,
            common,
            alpha,
            beta,
        } => range(&model, &common, &alpha, &beta),
        Command::CheckRobustness {
            model,
            testset,
            epsilon,
            window,
            image_dims,
            jobs,
            common,
        } => {
            let mode = match (window, image_dims) {
                (None, None) => RobustnessMode::Full,
                (Some(w), Some(d)) => {
                    let [width, height, stride] = numbers::<3>(&w, "--window")?;
                    let [iw, ih] = numbers::<2>(&d, "--image-dims")?;
                    RobustnessMode::Window {
                        window: SlidingWindow {
                            width,
                            height,
                            stride,
                        },
                        image: ImageDims {
                            width: iw,
                            height: ih,
                        },
                    }
                }
                (Some(_), None) => return Err("--window requires --image-dims".into()),
                (None, Some(_)) => return Err("--image-dims is only used with --window".into()),
            };
            robustness(&model, &testset, epsilon, mode, jobs, &common)
        }
        Command::CountClasses { model, common } => count(&model, &common),
    }
}

fn load(path: &Path) -> Result<Ensemble, Failure> {
    load_model_file(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn domain(e: &Ensemble, common: &Common) -> Result<Region, Failure> {
    Ok(match &common.domain {
        Some(text) => Region::parse_domain(text, e.n_inputs())?,
        None => Region::unbounded(e.n_inputs()),
    })
}

fn numbers<const N: usize>(text: &str, flag: &str) -> Result<[usize; N], Failure> {
    let parsed: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("{flag} {text:?}: {e}"))?;
    parsed
        .try_into()
        .map_err(|_| format!("{flag} expects {N} comma-separated integers, got {text:?}").into())
}

fn bounds(text: &str, m: usize, flag: &str) -> Result<Vec<f64>, Failure> {
    let values: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| format!("{flag} {text:?}: {e}"))?;
    match values.len() {
        1 => Ok(vec![values[0]; m]),
        n if n == m => Ok(values),
        n => Err(format!("{flag} has {n} values but the model has {m} outputs").into()),
    }
}

fn join(values: &[f32]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn print_json(value: &impl Serialize) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    outputs: Vec<f32>,
    class: usize,
}

fn eval(model: &Path, row: &str, json: bool) -> Result<ExitCode, Failure> {
    let e = load(model)?;
    let x: Vec<f32> = row
        .split(',')
        .map(|p| p.trim().parse::<f32>())
        .collect::<Result<_, _>>()
        .map_err(|err| format!("input row {row:?}: {err}"))?;
    let outputs = e.eval(&x)?;
    let report = EvalReport {
        class: argmax(&outputs),
        outputs,
    };
    if json {
        print_json(&report)?;
    } else {
        println!("{}", join(&report.outputs));
        println!("class: {}", report.class);
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct Counterexample {
    region: String,
    output: String,
}

impl From<&Mapping> for Counterexample {
    fn from(m: &Mapping) -> Self {
        Counterexample {
            region: m.region.to_string(),
            output: m.outputs.to_string(),
        }
    }
}

#[derive(Serialize)]
struct RunReport {
    verdict: &'static str,
    method: String,
    classes_visited: u64,
    /// Seconds spent verifying, excluding model load.
    elapsed: f64,
    counterexample: Option<Counterexample>,
}

impl RunReport {
    fn print(&self, json: bool) -> Result<(), Failure> {
        if json {
            return print_json(self);
        }
        println!("verdict: {}", self.verdict);
        println!("method: {}", self.method);
        println!("classes_visited: {}", self.classes_visited);
        println!("elapsed: {:.6}s", self.elapsed);
        if let Some(c) = &self.counterexample {
            println!("counterexample: {} -> {}", c.region, c.output);
        }
        Ok(())
    }
}

fn verdict_tag(v: &Verdict) -> &'static str {
    if v.is_pass() {
        "pass"
    } else {
        "fail"
    }
}

fn range(model: &Path, common: &Common, alpha: &str, beta: &str) -> Result<ExitCode, Failure> {
    let e = load(model)?;
    let region = domain(&e, common)?;
    let spec = RangeSpec::new(
        bounds(alpha, e.n_outputs(), "--alpha")?,
        bounds(beta, e.n_outputs(), "--beta")?,
    )?;
    let start = Instant::now();
    let r = check_range(&e, &region, &spec, common.strategy)?;
    let report = RunReport {
        verdict: verdict_tag(&r.verdict),
        method: r.method.to_string(),
        classes_visited: r.stats.classes,
        elapsed: start.elapsed().as_secs_f64(),
        counterexample: r.verdict.counterexample().map(Counterexample::from),
    };
    report.print(common.json)?;
    Ok(if r.verdict.is_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[derive(Serialize)]
struct RobustnessReport {
    robustness: f64,
    robust: usize,
    total: usize,
    accuracy: f64,
    correct: usize,
    /// Zero-based indices of correctly classified samples that are not robust.
    failures: Vec<usize>,
    /// Zero-based indices of misclassified samples.
    misclassified: Vec<usize>,
    elapsed: f64,
}

fn indices(list: &[usize]) -> String {
    if list.is_empty() {
        "none".into()
    } else {
        list.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
    }
}

fn robustness(
    model: &Path,
    testset: &Path,
    epsilon: f32,
    mode: RobustnessMode,
    jobs: usize,
    common: &Common,
) -> Result<ExitCode, Failure> {
    let e = load(model)?;
    let file = File::open(testset).map_err(|err| format!("{}: {err}", testset.display()))?;
    let samples = read_test_set(file, e.n_inputs())
        .map_err(|err| format!("{}: {err}", testset.display()))?;
    let opts = BatchOptions {
        epsilon,
        mode,
        strategy: common.strategy,
        domain: common
            .domain
            .as_deref()
            .map(|d| Region::parse_domain(d, e.n_inputs()))
            .transpose()?,
        jobs,
    };
    let start = Instant::now();
    let s = batch_robustness(&e, &samples, &opts)?;
    let report = RobustnessReport {
        robustness: s.robustness_percent(),
        robust: s.robust,
        total: s.total,
        accuracy: s.accuracy_percent(),
        correct: s.correct,
        failures: s.failures,
        misclassified: s.misclassified,
        elapsed: start.elapsed().as_secs_f64(),
    };
    if common.json {
        print_json(&report)?;
    } else {
        println!(
            "robustness: {:.1}% ({}/{})",
            report.robustness, report.robust, report.total
        );
        println!(
            "accuracy: {:.1}% ({}/{})",
            report.accuracy, report.correct, report.total
        );
        println!("failures: {}", indices(&report.failures));
        println!("misclassified: {}", indices(&report.misclassified));
        println!("elapsed: {:.6}s", report.elapsed);
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CountReport {
    classes: u64,
    nodes_visited: u64,
    discarded_combinations: String,
    elapsed: f64,
}

fn count(model: &Path, common: &Common) -> Result<ExitCode, Failure> {
    let e = load(model)?;
    let enumerator = Enumerator::new(&e, domain(&e, common)?)?.strategy(common.strategy);
    let start = Instant::now();
    let stats = enumerator.count()?;
    let elapsed: Duration = start.elapsed();
    let report = CountReport {
        classes: stats.classes,
        nodes_visited: stats.nodes_visited,
        // u128 does not fit a JSON number portably
        discarded_combinations: stats.discarded_combinations.to_string(),
        elapsed: elapsed.as_secs_f64(),
    };
    if common.json {
        print_json(&report)?;
    } else {
        println!("classes: {}", report.classes);
        println!("nodes_visited: {}", report.nodes_visited);
        println!("discarded_combinations: {}", report.discarded_combinations);
        println!("elapsed: {:.6}s", report.elapsed);
    }
    Ok(ExitCode::SUCCESS)
}
