use clap::Parser;
use ldpglass::harness::{self, ExperimentConfig, Mode, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

/// Run one experiment and write `<out>/report.json` and `<out>/report.csv`.
///
/// Values come from built-in defaults, then the JSON config, then the flags
/// below (later wins). The exit code is 0 only when every assertion passes.
#[derive(Parser, Debug)]
#[command(name = "ldpglass", version)]
struct Cli {
    /// iamp_goe | maxcut_sparse | universality | unroll_check | validate_moments | parisi_opt
    mode: String,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    qbar: Option<f64>,
    /// Number of γ atoms.
    #[arg(long)]
    k: Option<usize>,
    /// Repeat to run several seeds; replaces the config's list.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output directory (default: the config's `out`, else `out/<mode>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mode = match Mode::parse(&cli.mode) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let ov = Overrides {
        mode: Some(mode),
        n: cli.n,
        d: cli.d,
        delta: cli.delta,
        qbar: cli.qbar,
        k: cli.k,
        seeds: cli.seeds,
        out: cli.out,
    };
    let cfg = match ExperimentConfig::from_path(&cli.config, &ov) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out").join(mode.name()));
    let report = harness::run(&cfg);
    if let Err(e) = report.write(&out) {
        eprintln!("error writing report to {}: {e}", out.display());
        return ExitCode::from(2);
    }
    for a in &report.assertions {
        println!("{} {} = {:.6} {} {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.value, a.op, a.threshold);
    }
    for f in &report.flags {
        println!("FLAG {f}");
    }
    if let Some(e) = &report.error {
        println!("ERROR {e}");
    }
    println!("report written to {}", out.display());
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
