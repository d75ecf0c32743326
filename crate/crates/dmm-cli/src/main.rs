//! Command-line front end: simulate mixture data, run an estimator on a
//! sample file, or sweep a benchmark scenario into a CSV table.

mod benchmark;

use benchmark::{run_benchmark, Scenario};
use clap::{Args, Parser, Subcommand};
use dmm::baselines::{em_fit, EmConfig};
use dmm::estimators::{
    dmm_known_variance, estimate_unbounded, lindsay_unknown_variance, EstimatorConfig,
    UnboundedOptions,
};
use dmm::GaussianMixture;
use serde_json::json;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dmm", about = "Gaussian mixture estimation by denoised moments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw samples from a mixture model JSON and write them newline-delimited.
    Simulate {
        /// Path to a model JSON {"weights": [...], "means": [...], "sigma2": s}.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one estimator on a newline-delimited sample file.
    Estimate(EstimateArgs),
    /// Run a benchmark scenario JSON and emit a CSV table.
    Benchmark {
        /// Path to a scenario JSON.
        #[arg(long)]
        scenario: PathBuf,
        /// Output CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Parallel worker bound for the grid sweep.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Args)]
struct EstimateArgs {
    /// Path to a newline-delimited sample file.
    #[arg(long)]
    samples: PathBuf,
    #[arg(long, value_parser = ["dmm", "lindsay", "em", "unbounded"])]
    estimator: String,
    #[arg(long)]
    k: usize,
    /// Known component variance; required for dmm, optional for em/unbounded.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Interval believed to contain the means.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    interval: Option<Vec<f64>>,
    /// Median-of-batches count for the moment pass.
    #[arg(long, default_value_t = 1)]
    batches: usize,
    /// Weight threshold for the unbounded estimator.
    #[arg(long)]
    tau: Option<f64>,
    /// Cluster radius for the unbounded estimator.
    #[arg(long, value_name = "L")]
    l: Option<f64>,
    /// Seed for randomized estimators (em restarts).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { model, n, seed, out } => cmd_simulate(&model, n, seed, out.as_deref()),
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Benchmark { scenario, out, jobs } => {
            cmd_benchmark(&scenario, out.as_deref(), jobs)
        }
    }
}

fn read_file(path: &std::path::Path) -> Result<String, ExitCode> {
    fs::read_to_string(path).map_err(|e| {
        eprintln!("cannot read {}: {e}", path.display());
        ExitCode::from(2)
    })
}

fn write_output(out: Option<&std::path::Path>, content: &str) -> ExitCode {
    match out {
        Some(path) => {
            if let Err(e) = fs::write(path, content) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        None => {
            print!("{content}");
            ExitCode::SUCCESS
        }
    }
}

fn cmd_simulate(
    model_path: &std::path::Path,
    n: usize,
    seed: u64,
    out: Option<&std::path::Path>,
) -> ExitCode {
    let text = match read_file(model_path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let model = match GaussianMixture::from_json(&text) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("invalid model JSON: {e}");
            return ExitCode::from(2);
        }
    };
    let mut content = String::new();
    for x in model.sample(n, seed) {
        content.push_str(&format!("{x}\n"));
    }
    write_output(out, &content)
}

fn parse_samples(text: &str) -> Result<Vec<f64>, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.parse::<f64>()
                .map_err(|e| format!("line {}: {e}", i + 1))
        })
        .collect()
}

fn cmd_estimate(args: &EstimateArgs) -> ExitCode {
    let text = match read_file(&args.samples) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let samples = match parse_samples(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("invalid sample file: {e}");
            return ExitCode::from(2);
        }
    };

    let mut config = EstimatorConfig::new(args.k);
    config.sigma2 = args.sigma2;
    config.batches = args.batches.max(1);
    if let Some(bounds) = &args.interval {
        config.interval = Some((bounds[0], bounds[1]));
    }

    let outcome: Result<String, dmm::DmmError> = match args.estimator.as_str() {
        "dmm" => dmm_known_variance(&samples, &config).map(|r| r.to_json()),
        "lindsay" => lindsay_unknown_variance(&samples, &config).map(|r| r.to_json()),
        "em" => em_fit(&samples, &EmConfig::new(args.k, args.sigma2, args.seed)).map(|fit| {
            json!({
                "model": {
                    "weights": fit.mixture.mixing.weights(),
                    "means": fit.mixture.mixing.atoms(),
                    "sigma2": fit.mixture.sigma2,
                },
                "log_likelihood": fit.log_likelihood,
                "iterations": fit.iterations,
            })
            .to_string()
        }),
        "unbounded" => {
            let tau = args.tau.unwrap_or(1.0 / (2.0 * args.k as f64));
            let mut options = UnboundedOptions::new(tau);
            options.cluster_radius = args.l;
            estimate_unbounded(&samples, &config, &options).map(|report| {
                json!({
                    "means": report.means,
                    "intervals": report
                        .clusters
                        .iter()
                        .map(|(c, _)| [c.bounds().0, c.bounds().1])
                        .collect::<Vec<_>>(),
                    "diagnostics": report.diagnostics,
                })
                .to_string()
            })
        }
        _ => unreachable!("clap restricts the choices"),
    };

    match outcome {
        Ok(report) => write_output(args.out.as_deref(), &format!("{report}\n")),
        Err(e) => {
            println!("{}", json!({ "error": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}

fn cmd_benchmark(
    scenario_path: &std::path::Path,
    out: Option<&std::path::Path>,
    jobs: Option<usize>,
) -> ExitCode {
    let text = match read_file(scenario_path) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let scenario: Scenario = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("invalid scenario JSON: {e}");
            return ExitCode::from(2);
        }
    };
    match run_benchmark(&scenario, jobs) {
        Ok(csv) => write_output(out, &csv),
        Err(e) => {
            eprintln!("benchmark failed: {e}");
            ExitCode::FAILURE
        }
    }
}
