use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pdmr_core::experiment::{
    run_scenario, validate_config, ExperimentError, Provenance, Readout, RunOptions, RunReport,
    Scenario, ScenarioConfig,
};

const EXIT_INVALID: u8 = 2;
const EXIT_FIT_FAILURES: u8 = 3;

#[derive(Parser)]
#[command(name = "pdmr", version, about = "Pulsed PDMR/ODMR digital twin")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its output bundle.
    Run {
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write per-point detector traces and timeline dumps.
        #[arg(long)]
        raw_traces: bool,
        /// Emit SVG plots next to the CSVs.
        #[arg(long)]
        plots: bool,
        /// Output directory; defaults to the config's `output_dir`, then
        /// `$PDMR_TWIN_OUT/<scenario>`, then `out/<scenario>`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = "PDMR_TWIN_OUT", hide_env_values = true, hide = true)]
        default_out: Option<PathBuf>,
    },
    /// Check a config and list every violation.
    Validate { config: PathBuf },
    /// Print the available scenarios.
    ListScenarios,
}

fn load(path: &Path) -> Result<ScenarioConfig, ExitCode> {
    ScenarioConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_INVALID)
    })
}

fn summarize(report: &RunReport) {
    println!(
        "scenario {} seed {} ({:.1} s)",
        report.scenario, report.seed, report.elapsed_s
    );
    for r in [Readout::Electrical, Readout::Optical] {
        if let Some(fit) = report.fit(r) {
            let params: Vec<String> = fit
                .params
                .iter()
                .map(|p| format!("{}={:.6e}±{:.2e}", p.name, p.value, p.error))
                .collect();
            println!("  {} {}: {}", r.name(), fit.model, params.join(" "));
        }
    }
    for (r, s) in &report.spectra {
        if let Some((f, a)) = s.peak() {
            println!(
                "  {} residual spectrum peak {:.1} kHz ({a:.3e})",
                r.name(),
                f * 1e-3
            );
        }
    }
    for w in &report.wavelengths {
        let fmt = |c: &Option<Result<pdmr_core::experiment::ContrastEstimate, String>>| match c {
            Some(Ok(c)) => format!("{:.4}%", c.contrast_percent),
            Some(Err(e)) => format!("failed ({e})"),
            None => "-".into(),
        };
        println!(
            "  {:6.1} nm  electrical {}  optical {}",
            w.wavelength_nm,
            fmt(&w.electrical),
            fmt(&w.optical)
        );
    }
    for img in &report.confocal {
        println!(
            "  confocal {} um spot: max {:.3} nA",
            img.spot_diameter_um,
            img.max() * 1e9
        );
    }
    if let Some(dir) = report.files.first().and_then(|f| f.parent()) {
        println!(
            "  wrote {} files under {}",
            report.files.len(),
            dir.display()
        );
    }
}

fn run(
    config: PathBuf,
    seed: Option<u64>,
    raw_traces: bool,
    plots: bool,
    out: Option<PathBuf>,
    default_out: Option<PathBuf>,
) -> ExitCode {
    let mut cfg = match load(&config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let source = std::path::absolute(&config).unwrap_or(config);
    cfg.provenance = Some(Provenance {
        source_config: Some(source),
        ..Provenance::default()
    });
    let out_dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| {
        default_out
            .unwrap_or_else(|| PathBuf::from("out"))
            .join(cfg.scenario.name())
    });
    let opts = RunOptions {
        out_dir: Some(out_dir),
        seed,
        raw_traces,
        plots,
    };
    match run_scenario(&cfg, &opts) {
        Ok(report) => {
            summarize(&report);
            let failures = report.failures();
            if failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for f in &failures {
                    eprintln!("fit failure: {f}");
                }
                ExitCode::from(EXIT_FIT_FAILURES)
            }
        }
        Err(e @ ExperimentError::Invalid(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            raw_traces,
            plots,
            out,
            default_out,
        } => run(config, seed, raw_traces, plots, out, default_out),
        Command::Validate { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let violations = validate_config(&cfg);
            if violations.is_empty() {
                println!("{}: ok ({})", config.display(), cfg.scenario);
                ExitCode::SUCCESS
            } else {
                for v in &violations {
                    println!("{v}");
                }
                ExitCode::from(EXIT_INVALID)
            }
        }
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<18} {}", s.name(), s.summary());
            }
            ExitCode::SUCCESS
        }
    }
}
