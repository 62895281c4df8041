use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wwc::arma::ArmaOrder;
use wwc::cli::{cmd_bench, cmd_detect, cmd_estimate, cmd_simulate, DetectOptions, EstimateOptions};

#[derive(Parser)]
#[command(name = "wwc", version, about = "Wrong-way cycling ratio from sparse frame pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario: ground truth, sparse pairs and dense frames.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the two-frame detector over a frame-pair file.
    Detect {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "t-gap")]
        t_gap: Option<f64>,
        #[arg(long = "div-max")]
        div_max: Option<f64>,
        #[arg(long = "no-ensemble")]
        no_ensemble: bool,
    },
    /// Fit ARMA models to a count-series file and report the wrong-way ratio.
    Estimate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "orders-right", value_parser = parse_order)]
        orders_right: Option<ArmaOrder>,
        #[arg(long = "orders-wrong", value_parser = parse_order)]
        orders_wrong: Option<ArmaOrder>,
    },
    /// Compare the sparse pipeline, its detection-only ablation and the dense tracker.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Comma-separated method names (default: all registered).
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
    },
}

fn parse_order(s: &str) -> Result<ArmaOrder, String> {
    s.parse().map_err(|e: wwc::Error| e.to_string())
}

fn fmt_ratio(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |r| format!("{r:.4}"))
}

fn run(cli: Cli) -> wwc::Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let s = cmd_simulate(config.as_deref(), &out, seed)?;
            let gt = &s.ground_truth;
            println!(
                "simulated {} right-way, {} wrong-way (ratio {}); {} samples, {} dense frames -> {}",
                gt.n_right,
                gt.n_wrong,
                fmt_ratio(gt.true_ratio),
                s.samples,
                s.dense_frames,
                out.display()
            );
        }
        Command::Detect {
            input,
            out,
            t_gap,
            div_max,
            no_ensemble,
        } => {
            let opts = DetectOptions {
                t_gap,
                div_max,
                no_ensemble,
            };
            let counts = cmd_detect(&input, &out, &opts)?;
            let (r, w) = counts
                .iter()
                .fold((0u64, 0u64), |(r, w), c| (r + u64::from(c.d_r), w + u64::from(c.d_w)));
            println!("{} samples, raw counts right {r} wrong {w} -> {}", counts.len(), out.display());
        }
        Command::Estimate {
            input,
            out,
            orders_right,
            orders_wrong,
        } => {
            let opts = EstimateOptions {
                orders_right,
                orders_wrong,
            };
            let est = cmd_estimate(&input, &out, &opts)?;
            let rep = &est.report;
            println!(
                "ratio {:.4} (sum right {:.2}, sum wrong {:.2}){}",
                rep.ratio,
                rep.sum_r,
                rep.sum_w,
                if rep.negative_mass_warning {
                    "; warning: negative deflated counts"
                } else {
                    ""
                }
            );
        }
        Command::Bench {
            config,
            out,
            seeds,
            methods,
        } => {
            let table = cmd_bench(config.as_deref(), &out, seeds, methods.as_deref())?;
            for m in &table.summaries {
                println!(
                    "{:<24} frames {:>8.0}  wall {:>9.2} ms  mean |err| {}",
                    m.method,
                    m.mean_frames,
                    m.mean_wall_ms,
                    fmt_ratio(m.mean_abs_error)
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
