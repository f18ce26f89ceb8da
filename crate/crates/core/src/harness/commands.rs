//! Command implementations behind the `grc` binary. Each command loads its
//! inputs, runs the evaluator, and writes all outputs from this thread once
//! aggregation is done. Nothing here prints; the binary reports the outcome.

use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::manifest::load_manifest;
use super::report::{write_json, write_records_jsonl, write_rows_csv, write_trajectory_csv, Calibration, Report};
use super::synth::{generate_corpus, SynthSpec};
use super::HarnessError;
use crate::controller::{operating_point_for, Ablation, OperatingPoint};
use crate::evaluation::{
    calibrate_confidence_threshold, evaluate, evaluate_confidence_baseline, split_heldout, sweep_operating_points,
    sweep_query_budget, EvalError, EvalSettings, LabeledSample, ReportRow,
};
use crate::gateway::Gateway;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    /// Replaces the view-protocol seed.
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepMode {
    /// Every operating point of the configured family.
    M,
    /// Fixed operating point, one row per view count.
    K(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub rows: Vec<ReportRow>,
    /// Samples that failed with an error, summed over rows.
    pub n_errors: usize,
    pub out_dir: PathBuf,
    /// Set by `cmd_baseline` only.
    pub calibration: Option<Calibration>,
}

impl CommandOutcome {
    fn new(rows: Vec<ReportRow>, out_dir: PathBuf) -> Self {
        Self {
            n_errors: rows.iter().map(|r| r.n_errors).sum(),
            rows,
            out_dir,
            calibration: None,
        }
    }
}

struct Session {
    config: RunConfig,
    settings: EvalSettings,
    samples: Vec<LabeledSample>,
    gateway: Gateway,
    out_dir: PathBuf,
}

impl Session {
    fn open(config_path: &Path, manifest_path: &Path, overrides: &Overrides) -> Result<Self, HarnessError> {
        let mut config = RunConfig::load(config_path)?;
        if let Some(seed) = overrides.seed {
            config.protocol.seed = seed;
        }
        if let Some(p) = overrides.parallelism {
            config.parallelism = p;
        }
        if let Some(out) = &overrides.out {
            config.output_dir = out.clone();
        }
        config.validate().map_err(|message| HarnessError::Config {
            path: config_path.to_path_buf(),
            message,
        })?;
        let manifest = load_manifest(manifest_path, config.protocol.case_insensitive)?;
        let samples = manifest.load_samples()?;
        let gateway = config.build_gateway()?;
        let out_dir = config.output_dir.clone();
        std::fs::create_dir_all(&out_dir).map_err(|e| HarnessError::io(&out_dir, e))?;
        Ok(Self {
            settings: config.eval_settings(&manifest.dataset_name),
            config,
            samples,
            gateway,
            out_dir,
        })
    }

    fn op(&self, m: Option<u32>) -> Result<OperatingPoint, HarnessError> {
        let m = m.unwrap_or(self.config.default_m);
        Ok(operating_point_for(m, &self.config.operating_points).map_err(EvalError::from)?)
    }

    fn report(&self, command: &str, rows: &[ReportRow], calibration: Option<Calibration>) -> Report {
        Report {
            command: command.to_string(),
            dataset: self.settings.dataset_name.clone(),
            backend: self.gateway.identity().to_string(),
            protocol: self.config.protocol.clone(),
            length_bound: self.config.length_bound.clone(),
            operating_points: self.config.operating_points.clone(),
            rows: rows.to_vec(),
            calibration,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Evaluates at one operating point and writes `records.jsonl`,
/// `report.json`, and `report.csv`.
pub fn cmd_run(
    config_path: &Path,
    manifest_path: &Path,
    m: Option<u32>,
    overrides: &Overrides,
) -> Result<CommandOutcome, HarnessError> {
    let s = Session::open(config_path, manifest_path, overrides)?;
    let op = s.op(m)?;
    let (records, row) = evaluate(&s.samples, &s.settings, &s.gateway, &op, s.config.ablation)?;
    let rows = vec![row];
    write_records_jsonl(&s.path("records.jsonl"), &records)?;
    write_json(&s.path("report.json"), &s.report("run", &rows, None))?;
    write_rows_csv(&s.path("report.csv"), &rows)?;
    Ok(CommandOutcome::new(rows, s.out_dir))
}

/// Risk-coverage sweep over the family (`SweepMode::M`) or a query-budget
/// sweep over view counts (`SweepMode::K`). Writes `report.json`,
/// `report.csv`, and `trajectory.csv`.
pub fn cmd_sweep(
    config_path: &Path,
    manifest_path: &Path,
    mode: &SweepMode,
    m: Option<u32>,
    overrides: &Overrides,
) -> Result<CommandOutcome, HarnessError> {
    let s = Session::open(config_path, manifest_path, overrides)?;
    let (command, rows) = match mode {
        SweepMode::M => {
            // The single-pass row goes first so its anchor replies seed the
            // cache for every operating point after it.
            let base_op = s.op(None)?;
            let (_, base) = evaluate(&s.samples, &s.settings, &s.gateway, &base_op, Ablation::AlwaysAccept)?;
            let mut rows = vec![base];
            rows.extend(sweep_operating_points(
                &s.samples,
                &s.settings,
                &s.gateway,
                &s.config.operating_points,
                s.config.ablation,
            )?);
            ("sweep_m", rows)
        }
        SweepMode::K(k_list) => {
            if k_list.is_empty() {
                return Err(HarnessError::Output("--k-list is empty".into()));
            }
            let op = s.op(m)?;
            let rows = sweep_query_budget(&s.samples, &s.settings, &s.gateway, &op, k_list, s.config.cache)?;
            ("sweep_k", rows)
        }
    };
    write_json(&s.path("report.json"), &s.report(command, &rows, None))?;
    write_rows_csv(&s.path("report.csv"), &rows)?;
    write_trajectory_csv(&s.path("trajectory.csv"), &rows)?;
    Ok(CommandOutcome::new(rows, s.out_dir))
}

/// Calibrates the confidence threshold on a held-out split so the baseline
/// targets the coverage GRC reaches there at `target_m`, then evaluates GRC,
/// the baseline, and the single-pass system on the remainder.
pub fn cmd_baseline(
    config_path: &Path,
    manifest_path: &Path,
    target_m: Option<u32>,
    overrides: &Overrides,
) -> Result<CommandOutcome, HarnessError> {
    let s = Session::open(config_path, manifest_path, overrides)?;
    let op = s.op(target_m)?;
    let (heldout, test) = split_heldout(&s.samples, s.config.heldout_fraction);
    if heldout.is_empty() || test.is_empty() {
        return Err(HarnessError::Output(format!(
            "held-out split of {} samples left {} held out and {} for test; both must be nonempty",
            s.samples.len(),
            heldout.len(),
            test.len()
        )));
    }
    let (heldout_records, heldout_row) = evaluate(&heldout, &s.settings, &s.gateway, &op, Ablation::Full)?;
    let threshold = calibrate_confidence_threshold(&heldout_records, heldout_row.coverage())?;

    let (records, grc) = evaluate(&test, &s.settings, &s.gateway, &op, Ablation::Full)?;
    let (_, conf) = evaluate_confidence_baseline(&test, &s.settings, &s.gateway, threshold)?;
    let (_, single) = evaluate(&test, &s.settings, &s.gateway, &op, Ablation::AlwaysAccept)?;
    let calibration = Calibration {
        target_m: op.m,
        target_coverage_pct: heldout_row.coverage_pct,
        threshold,
        heldout_n: heldout.len(),
        test_n: test.len(),
        realized_coverage_pct: conf.coverage_pct,
    };
    let rows = vec![grc, conf, single];
    write_records_jsonl(&s.path("records.jsonl"), &records)?;
    write_json(&s.path("report.json"), &s.report("baseline", &rows, Some(calibration.clone())))?;
    write_rows_csv(&s.path("report.csv"), &rows)?;
    Ok(CommandOutcome {
        calibration: Some(calibration),
        ..CommandOutcome::new(rows, s.out_dir)
    })
}

/// Runs the four controller variants at the default operating point.
/// Writes `report.json` and `ablation.csv`.
pub fn cmd_ablate(
    config_path: &Path,
    manifest_path: &Path,
    m: Option<u32>,
    overrides: &Overrides,
) -> Result<CommandOutcome, HarnessError> {
    let s = Session::open(config_path, manifest_path, overrides)?;
    let op = s.op(m)?;
    let rows = Ablation::ALL
        .iter()
        .map(|&a| evaluate(&s.samples, &s.settings, &s.gateway, &op, a).map(|(_, row)| row))
        .collect::<Result<Vec<_>, _>>()?;
    write_json(&s.path("report.json"), &s.report("ablate", &rows, None))?;
    write_rows_csv(&s.path("ablation.csv"), &rows)?;
    Ok(CommandOutcome::new(rows, s.out_dir))
}

/// Writes a synthetic corpus with its scripted backend spec and config.
pub fn cmd_synth(spec: &SynthSpec, out_dir: &Path) -> Result<CommandOutcome, HarnessError> {
    generate_corpus(spec, out_dir)?;
    Ok(CommandOutcome::new(Vec::new(), out_dir.to_path_buf()))
}
