use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use barcode_grad::barcode::barcodes_to_csv;
use barcode_grad::complex::ComplexFile;
use barcode_grad::config::Config;
use barcode_grad::optimizer::Status;
use barcode_grad::persistence::total_template;
use barcode_grad::verify;

#[derive(Parser)]
#[command(name = "barcode-grad", version, about = "Persistence barcodes, their derivatives, and optimization through them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Barcodes of a filtered complex as CSV, plus the barcode template as JSON.
    Persistence {
        /// JSON file with "simplices" and "values".
        file: PathBuf,
        /// Comma-separated degrees; all degrees when omitted.
        #[arg(long, value_delimiter = ',')]
        degrees: Option<Vec<usize>>,
        /// Directory receiving barcode.csv and template.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gradient descent driven by a JSON experiment configuration.
    Optimize {
        config: Option<PathBuf>,
        /// Directory receiving trace.jsonl, final_barcode.csv, final_filter.json and snapshots/.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the configuration with all defaults filled in, then exit.
        #[arg(long)]
        print_config: bool,
    },
    /// Run a verification suite: oracle, stability, isometry or gradients.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

/// Usage and validation failures exit with 2, runtime failures with 1.
enum Failure {
    Usage(String),
    Runtime(String),
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn persistence(file: &Path, degrees: Option<Vec<usize>>, out: Option<PathBuf>) -> Result<(), Failure> {
    let f = ComplexFile::load(file).and_then(|c| c.filter()).map_err(usage)?;
    let k = f.complex();
    let degrees = degrees.unwrap_or_else(|| (0..=k.dim()).collect());
    if let Some(&p) = degrees.iter().find(|&&p| p > k.dim()) {
        return Err(usage(format!("degree {p} exceeds the complex dimension {}", k.dim())));
    }
    let template = total_template(&f);
    let bars: Vec<_> = degrees
        .iter()
        .map(|&p| (p, template.degree(p).realize(f.values())))
        .collect();
    let csv = barcodes_to_csv(bars.iter().map(|(p, b)| (*p, b)));
    print!("{csv}");
    if let Some(dir) = out {
        create_dir(&dir)?;
        write(&dir.join("barcode.csv"), &csv)?;
        let simplices: Vec<&[usize]> = k.simplices().iter().map(|s| s.vertices()).collect();
        let selected: Vec<_> = degrees.iter().map(|&p| template.degree(p)).collect();
        let doc = json!({ "simplices": simplices, "degrees": selected });
        write(&dir.join("template.json"), &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))?;
    }
    Ok(())
}

fn optimize(config: Option<PathBuf>, out: Option<PathBuf>, print_config: bool) -> Result<(), Failure> {
    let cfg = match &config {
        Some(path) => Config::load(path).map_err(usage)?,
        None if print_config => Config::example(),
        None => return Err(usage("a configuration file is required")),
    };
    if print_config {
        println!("{}", cfg.to_pretty_json());
        return Ok(());
    }
    let problem = cfg.build().map_err(usage)?;
    let trace = problem.run().map_err(runtime)?;
    let last = trace.records.last().expect("trace is never empty");
    let final_bars = trace.barcodes.last().expect("one snapshot per record");
    let final_csv = barcodes_to_csv(final_bars.iter().map(|(p, b)| (*p, b)));
    let status = serde_json::to_value(trace.status).expect("json");
    let summary = format!(
        "status: {} iterations: {} initial loss: {} final loss: {}",
        status.as_str().unwrap_or("?"),
        last.iter,
        trace.records[0].loss,
        last.loss
    );
    match out {
        Some(dir) => {
            create_dir(&dir.join("snapshots"))?;
            write(&dir.join("trace.jsonl"), &trace.to_jsonl())?;
            write(&dir.join("final_barcode.csv"), &final_csv)?;
            for (r, bars) in trace.records.iter().zip(&trace.barcodes) {
                let csv = barcodes_to_csv(bars.iter().map(|(p, b)| (*p, b)));
                write(&dir.join("snapshots").join(format!("iter_{:05}.csv", r.iter)), &csv)?;
            }
            let f = problem.parametrization.as_ref();
            let values = f.values(&last.theta).map_err(runtime)?;
            let simplices: Vec<&[usize]> = f.complex().simplices().iter().map(|s| s.vertices()).collect();
            let doc = json!({ "simplices": simplices, "values": values });
            write(&dir.join("final_filter.json"), &(serde_json::to_string_pretty(&doc).expect("json") + "\n"))?;
            println!("{summary}");
        }
        None => {
            print!("{}", trace.to_jsonl());
            eprintln!("{summary}");
        }
    }
    if trace.status == Status::Stalled {
        eprintln!("stopped at a singular parameter");
    }
    Ok(())
}

fn run_verify(suite: &str, seed: u64, out: &Path) -> Result<bool, Failure> {
    let report = verify::run_suite(suite, seed).map_err(usage)?;
    create_dir(out)?;
    let text = serde_json::to_string_pretty(&report).expect("json") + "\n";
    write(&out.join(format!("{suite}.json")), &text)?;
    println!(
        "{suite}: {} ({} instances, {} failures)",
        if report.passed { "pass" } else { "FAIL" },
        report.instances,
        report.failures.len()
    );
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Persistence { file, degrees, out } => persistence(&file, degrees, out).map(|_| true),
        Command::Optimize {
            config,
            out,
            print_config,
        } => optimize(config, out, print_config).map(|_| true),
        Command::Verify { suite, seed, out } => run_verify(&suite, seed, &out),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
