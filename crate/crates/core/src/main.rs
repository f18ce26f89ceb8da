use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use grc_core::gateway::ConfidenceModel;
use grc_core::harness::report::summary_line;
use grc_core::harness::{self, CommandOutcome, HarnessError, Overrides, SweepMode, SynthSpec};

/// Selective accept/abstain control for generative OCR.
///
/// Exit status: 0 on success, 1 if any sample failed with an error,
/// 2 on a fatal error.
#[derive(Parser)]
#[command(name = "grc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// View-protocol seed; overrides `protocol.seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallelism: Option<usize>,
}

impl Inputs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            parallelism: self.parallelism,
            out: self.out.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate at one operating point.
    Run {
        #[command(flatten)]
        inputs: Inputs,
        /// Operating point; defaults to `default_m` from the config.
        #[arg(long)]
        m: Option<u32>,
    },
    /// Sweep the operating-point family, or view counts with --k-list.
    Sweep {
        #[command(flatten)]
        inputs: Inputs,
        /// Comma-separated view counts, e.g. 3,5,7.
        #[arg(long, value_delimiter = ',')]
        k_list: Option<Vec<u32>>,
        /// Operating point held fixed during a --k-list sweep.
        #[arg(long)]
        m: Option<u32>,
    },
    /// Compare against a held-out-calibrated confidence threshold.
    Baseline {
        #[command(flatten)]
        inputs: Inputs,
        /// Operating point whose coverage the threshold targets.
        #[arg(long)]
        m: Option<u32>,
    },
    /// Run the full controller and its partial variants side by side.
    Ablate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        m: Option<u32>,
    },
    /// Generate a synthetic corpus with a matching scripted backend.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        p_overgen: f64,
        #[arg(long, default_value_t = 0.10)]
        p_substitute: f64,
        #[arg(long, default_value_t = 0.15)]
        p_unstable: f64,
        #[arg(long, default_value_t = 3)]
        overgen_repeat: u32,
        /// Confidence model of the scripted backend: oracle or overconfident.
        #[arg(long, default_value = "overconfident", value_parser = parse_confidence)]
        confidence: ConfidenceModel,
    },
}

fn parse_confidence(s: &str) -> Result<ConfidenceModel, String> {
    match s {
        "oracle" => Ok(ConfidenceModel::Oracle),
        "overconfident" => Ok(ConfidenceModel::Overconfident),
        other => Err(format!("unknown confidence model {other:?}")),
    }
}

fn dispatch(command: Command) -> Result<CommandOutcome, HarnessError> {
    match command {
        Command::Run { inputs, m } => harness::cmd_run(&inputs.config, &inputs.manifest, m, &inputs.overrides()),
        Command::Sweep { inputs, k_list, m } => {
            let mode = k_list.map_or(SweepMode::M, SweepMode::K);
            harness::cmd_sweep(&inputs.config, &inputs.manifest, &mode, m, &inputs.overrides())
        }
        Command::Baseline { inputs, m } => {
            harness::cmd_baseline(&inputs.config, &inputs.manifest, m, &inputs.overrides())
        }
        Command::Ablate { inputs, m } => harness::cmd_ablate(&inputs.config, &inputs.manifest, m, &inputs.overrides()),
        Command::Synth {
            out,
            n,
            seed,
            p_overgen,
            p_substitute,
            p_unstable,
            overgen_repeat,
            confidence,
        } => {
            let spec = SynthSpec {
                n,
                seed,
                p_overgen,
                p_substitute,
                p_unstable,
                overgen_repeat,
                confidence_model: confidence,
                ..SynthSpec::default()
            };
            harness::cmd_synth(&spec, &out)
        }
    }
}

fn report(outcome: &CommandOutcome) {
    if let Some(c) = &outcome.calibration {
        println!(
            "calibrated threshold {} on {} held-out samples (target coverage {:.2}%)",
            c.threshold, c.heldout_n, c.target_coverage_pct
        );
    }
    for row in &outcome.rows {
        println!("{}", summary_line(row));
    }
    println!("outputs in {}", outcome.out_dir.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = dispatch(cli.command);
    if let Ok(outcome) = &result {
        report(outcome);
    }
    match result {
        Ok(outcome) if outcome.n_errors > 0 => {
            eprintln!("grc: {} sample(s) failed; see records for details", outcome.n_errors);
            ExitCode::from(1)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("grc: {e}");
            ExitCode::from(2)
        }
    }
}
