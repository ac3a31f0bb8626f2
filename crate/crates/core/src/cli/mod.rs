//! Command-line orchestration of the pipeline stages.

mod config;
mod svg;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ndarray::Array2;
use serde::Serialize;

use crate::classify::{fit_classifier, ClassifierMethod, ClassifierSpec};
use crate::cluster::{clustering_sweep, write_sweep, ClusterMethod, SweepCell, SweepConfig, SWEEP_REDUCTIONS};
use crate::cohort::{build_timelines, label_all, read_cohort, sample_cohort, write_cohort, CohortLabel};
use crate::data::{generate_events, read_events, write_events};
use crate::error::{Error, Result};
use crate::eval::{cross_validate, roc_curve, auc, write_roc, CvOptions, CvReport, RocCurve};
use crate::featurize::{cohort_vocabulary, featurize, read_matrix, write_matrix, FeatureMatrix};
use crate::par::{derive_seed, tag};
use crate::reduce::{
    fit_reducer, read_embedding, write_embedding, Embedding, KernelKind, KernelSpec, ReducerMethod,
};

pub use config::{parse_list, PipelineConfig, CONFIG_KEYS};
pub use svg::roc_svg;

#[derive(Debug, Parser)]
#[command(name = "refractory", version, about = "AED-resistance prediction pipeline on patient event streams")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Flat `key = value` settings file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Global seed; overrides the config file.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Directory holding stage artifacts; overrides the config file.
    #[arg(long, global = true, value_name = "PATH")]
    workdir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic event table.
    Synth {
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Label patients and sample a balanced case/control cohort.
    Cohort,
    /// Count pre-index events per cohort patient.
    Featurize,
    /// Fit the configured reducer and write the embedding.
    Reduce,
    /// Score every reduction × clusterer pair against the cohort labels.
    ClusterSweep,
    /// Fit the configured classifier on the embedding.
    Train {
        /// Also cross-validate GBDT over the α and depth grids. Optional
        /// `alpha=[..]`, `depth=[..]` or `gamma=[..]` values replace a grid.
        #[arg(long, num_args = 0.., value_name = "GRID")]
        sweep: Option<Vec<String>>,
    },
    /// Cross-validate every estimator and write the evaluation reports.
    Evaluate,
    /// Run every stage in order with one shared seed.
    RunAll,
}

/// Failure of a named pipeline stage.
#[derive(Debug, thiserror::Error)]
#[error("{stage}: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on a runtime or validation failure, 2 on a usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let config = match resolve_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: configuration: {e}");
            return 2;
        }
    };
    match dispatch(&cli.command, &config) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        config.seed = seed;
    }
    if let Some(dir) = &cli.common.workdir {
        config.workdir = dir.clone();
    }
    if let Command::Train { sweep: Some(grids) } = &cli.command {
        for g in grids {
            let (name, values) = g
                .split_once('=')
                .ok_or_else(|| Error::validation(format!("sweep grid {g:?} is not name=[values]")))?;
            let key = match name.trim() {
                "alpha" => "alpha_grid",
                "depth" => "depth_grid",
                "gamma" => "gamma_grid",
                other => return Err(Error::validation(format!("unknown sweep grid {other:?}"))),
            };
            config.set(key, values).map_err(Error::Validation)?;
            if parse_list(values, |s| Ok::<_, ()>(s.to_string())).map_or(true, |v| v.is_empty()) {
                return Err(Error::validation(format!("sweep grid {name} is empty")));
            }
        }
    }
    config.finalize()
}

fn dispatch(command: &Command, config: &PipelineConfig) -> std::result::Result<(), StageError> {
    let stage = |stage: &'static str| move |source: Error| StageError { stage, source };
    match command {
        Command::Synth { out } => cmd_synth(config, out).map(drop).map_err(stage("synth")),
        Command::Cohort => cmd_cohort(config).map(drop).map_err(stage("cohort")),
        Command::Featurize => cmd_featurize(config).map(drop).map_err(stage("featurize")),
        Command::Reduce => cmd_reduce(config).map(drop).map_err(stage("reduce")),
        Command::ClusterSweep => cmd_cluster_sweep(config).map(drop).map_err(stage("cluster-sweep")),
        Command::Train { sweep } => cmd_train(config, sweep.is_some()).map(drop).map_err(stage("train")),
        Command::Evaluate => cmd_evaluate(config).map(drop).map_err(stage("evaluate")),
        Command::RunAll => cmd_run_all(config).map(drop),
    }
}

/// Artifact file names inside the work directory.
pub mod artifacts {
    pub const EVENTS: &str = "events.csv";
    pub const COHORT: &str = "cohort.csv";
    pub const FEATURES: &str = "features.csv";
    pub const EMBEDDING: &str = "embedding.csv";
    pub const REDUCER: &str = "reducer.json";
    pub const CLUSTER_SWEEP: &str = "cluster_sweep.csv";
    pub const MODEL: &str = "model.json";
    pub const ALPHA_SWEEP: &str = "alpha_sweep.csv";
    pub const DEPTH_SWEEP: &str = "depth_sweep.csv";
    pub const GAMMA_SWEEP: &str = "gamma_sweep.csv";
    pub const AUC_TABLE: &str = "auc_table.csv";
    pub const CV_REPORT: &str = "cv_report.json";
    pub const ROC_SVG: &str = "roc.svg";
    pub const RUN_REPORT: &str = "run_report.json";
    pub const TIMINGS: &str = "timings.json";

    pub fn roc(name: &str) -> String {
        format!("roc_{name}.csv")
    }
}

fn require(path: PathBuf, subcommand: &'static str) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::Dependency {
            artifact: path,
            subcommand,
        })
    }
}

fn ensure_workdir(config: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&config.workdir).map_err(|e| Error::io(&config.workdir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn cmd_synth(config: &PipelineConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let table = generate_events(&config.generator)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_events(&table, out)?;
    println!(
        "synth: {} events for {} patients -> {}",
        table.len(),
        table.patient_ids().len(),
        out.display()
    );
    Ok(vec![out.to_path_buf()])
}

pub fn cmd_cohort(config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let events = read_events(require(config.events_path(), "synth")?)?;
    ensure_workdir(config)?;
    let labeled = label_all(&build_timelines(&events));
    let cohort = sample_cohort(&labeled, config.n_per_class, config.seed)?;
    let out = config.workdir.join(artifacts::COHORT);
    write_cohort(&cohort, &out)?;
    println!(
        "cohort: {} eligible patients, sampled {} CASE + {} CONTROL -> {}",
        labeled.len(),
        cohort.count(CohortLabel::Case),
        cohort.count(CohortLabel::Control),
        out.display()
    );
    Ok(vec![out])
}

pub fn cmd_featurize(config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let events = read_events(require(config.events_path(), "synth")?)?;
    let cohort = read_cohort(require(config.workdir.join(artifacts::COHORT), "cohort")?)?;
    let timelines = build_timelines(&events);
    let vocabulary = cohort_vocabulary(&cohort, &timelines)?;
    let matrix = featurize(&cohort, &timelines, &vocabulary)?;
    let out = config.workdir.join(artifacts::FEATURES);
    write_matrix(&matrix, &out)?;
    println!(
        "featurize: {} rows x {} features -> {}",
        matrix.n_rows(),
        matrix.n_features(),
        out.display()
    );
    Ok(vec![out])
}

fn load_features(config: &PipelineConfig) -> Result<(FeatureMatrix, Vec<bool>)> {
    let matrix = read_matrix(require(config.workdir.join(artifacts::FEATURES), "featurize")?)?;
    let y = matrix
        .case_mask()
        .ok_or_else(|| Error::validation("features file has no label column"))?;
    Ok((matrix, y))
}

fn load_embedding(config: &PipelineConfig, features: &FeatureMatrix) -> Result<Embedding> {
    let embedding = read_embedding(require(config.workdir.join(artifacts::EMBEDDING), "reduce")?)?;
    if embedding.row_ids != features.row_ids() {
        return Err(Error::validation("embedding rows do not match the feature rows"));
    }
    Ok(embedding)
}

#[derive(Debug, Serialize)]
struct ReducerSummary {
    method: ReducerMethod,
    requested_components: usize,
    n_components: usize,
    kernel: Option<KernelSpec>,
    eigenvalues: Vec<f64>,
}

pub fn cmd_reduce(config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let (matrix, _) = load_features(config)?;
    let x = matrix.to_f64();
    let seed = derive_seed(config.seed, &[tag("reduce")]);
    let model = fit_reducer(config.reducer, &x, config.n_components, &config.reducer_params, seed)?;
    let embedding = Embedding::new(matrix.row_ids().to_vec(), model.fit_embedding().clone(), config.reducer)?;
    let out = config.workdir.join(artifacts::EMBEDDING);
    write_embedding(&embedding, &out)?;
    let summary = ReducerSummary {
        method: config.reducer,
        requested_components: config.n_components,
        n_components: model.n_components(),
        kernel: (config.reducer == ReducerMethod::Kpca)
            .then(|| config.reducer_params.kernel_spec(&x))
            .transpose()?,
        eigenvalues: model.eigenvalues().to_vec(),
    };
    let summary_path = config.workdir.join(artifacts::REDUCER);
    write_json(&summary_path, &summary)?;
    println!(
        "reduce: {} with {} components -> {}",
        config.reducer,
        model.n_components(),
        out.display()
    );
    Ok(vec![out, summary_path])
}

pub fn cmd_cluster_sweep(config: &PipelineConfig) -> Result<(Vec<PathBuf>, Vec<SweepCell>)> {
    let (matrix, y) = load_features(config)?;
    let truth: Vec<usize> = y.iter().map(|&c| usize::from(c)).collect();
    let sweep = SweepConfig {
        n_components: config.sweep_components,
        reducer: config.reducer_params.clone(),
        cluster: config.cluster.clone(),
        seed: config.seed,
    };
    let cells = clustering_sweep(&matrix.to_f64(), &truth, &SWEEP_REDUCTIONS, &ClusterMethod::ALL, &sweep)?;
    let out = config.workdir.join(artifacts::CLUSTER_SWEEP);
    write_sweep(&cells, &out)?;
    let (ari, ami) = max_abs_scores(&cells);
    println!(
        "cluster-sweep: {} cells, {} failed, max |ARI| {ari:.4}, max |AMI| {ami:.4} -> {}",
        cells.len(),
        cells.iter().filter(|c| !c.is_ok()).count(),
        out.display()
    );
    Ok((vec![out], cells))
}

fn max_abs_scores(cells: &[SweepCell]) -> (f64, f64) {
    cells.iter().filter(|c| c.is_ok()).fold((0.0_f64, 0.0_f64), |(a, m), c| {
        (a.max(c.adjusted_rand.abs()), m.max(c.adjusted_mutual_info.abs()))
    })
}

fn cv_options(config: &PipelineConfig) -> CvOptions {
    CvOptions {
        k: config.k_folds,
        seed: config.seed,
        stratified: config.stratified,
    }
}

/// One row of a hyperparameter sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

fn write_sweep_table(path: &Path, name: &str, rows: &[SweepRow]) -> Result<()> {
    let mut text = format!("{name},mean_accuracy,std_accuracy\n");
    for r in rows {
        text.push_str(&format!("{},{},{}\n", r.value, r.mean_accuracy, r.std_accuracy));
    }
    write_text(path, &text)
}

#[derive(Debug, Default)]
pub struct TrainOutcome {
    pub alpha: Vec<SweepRow>,
    pub depth: Vec<SweepRow>,
    pub gamma: Vec<SweepRow>,
}

pub fn cmd_train(config: &PipelineConfig, sweep: bool) -> Result<(Vec<PathBuf>, TrainOutcome)> {
    let (matrix, y) = load_features(config)?;
    let embedding = load_embedding(config, &matrix)?;
    let z = &embedding.values;
    let model = fit_classifier(&config.classifier, z, &y)?;
    let names: Vec<String> = (0..z.ncols()).map(|c| format!("c{c}")).collect();
    let model_path = config.workdir.join(artifacts::MODEL);
    write_json(&model_path, &model.summary(Some(&names)))?;
    println!("train: {} on {} rows -> {}", config.classifier.method, z.nrows(), model_path.display());
    let mut written = vec![model_path];
    let mut outcome = TrainOutcome::default();
    if !sweep {
        return Ok((written, outcome));
    }
    if config.alpha_grid.is_empty() || config.depth_grid.is_empty() {
        return Err(Error::validation("alpha and depth grids must be non-empty for --sweep"));
    }
    let gbdt = ClassifierSpec {
        method: ClassifierMethod::Gbdt,
        ..config.classifier.clone()
    };
    let opts = cv_options(config);
    let row = |value: f64, x: &Array2<f64>, spec: &ClassifierSpec| -> Result<SweepRow> {
        let r = cross_validate(x, &y, spec, &opts)?;
        Ok(SweepRow {
            value,
            mean_accuracy: r.mean,
            std_accuracy: r.std,
        })
    };
    for &alpha in &config.alpha_grid {
        let spec = ClassifierSpec {
            learning_rate: alpha,
            ..gbdt.clone()
        };
        spec.validate()?;
        outcome.alpha.push(row(alpha, z, &spec)?);
    }
    for &depth in &config.depth_grid {
        let spec = ClassifierSpec {
            max_depth: depth,
            ..gbdt.clone()
        };
        outcome.depth.push(row(depth as f64, z, &spec)?);
    }
    let alpha_path = config.workdir.join(artifacts::ALPHA_SWEEP);
    write_sweep_table(&alpha_path, "alpha", &outcome.alpha)?;
    let depth_path = config.workdir.join(artifacts::DEPTH_SWEEP);
    write_sweep_table(&depth_path, "depth", &outcome.depth)?;
    written.extend([alpha_path, depth_path]);
    if !config.gamma_grid.is_empty() {
        let x = matrix.to_f64();
        for &gamma in &config.gamma_grid {
            let mut params = config.reducer_params.clone();
            params.kernel = KernelKind::Rbf;
            params.gamma = Some(gamma);
            let seed = derive_seed(config.seed, &[tag("reduce")]);
            let reduced = fit_reducer(ReducerMethod::Kpca, &x, config.n_components, &params, seed)?;
            outcome.gamma.push(row(gamma, reduced.fit_embedding(), &gbdt)?);
        }
        let gamma_path = config.workdir.join(artifacts::GAMMA_SWEEP);
        write_sweep_table(&gamma_path, "gamma", &outcome.gamma)?;
        written.push(gamma_path);
    }
    println!(
        "train --sweep: {} alpha, {} depth, {} gamma settings",
        outcome.alpha.len(),
        outcome.depth.len(),
        outcome.gamma.len()
    );
    Ok((written, outcome))
}

/// Cross-validated scores of one estimator on one input representation.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorScore {
    pub estimator: String,
    pub input: &'static str,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_fold_auc: f64,
    /// AUC of the pooled out-of-fold scores.
    pub pooled_auc: f64,
}

#[derive(Debug)]
pub struct EvaluateOutcome {
    pub scores: Vec<EstimatorScore>,
    pub report: CvReport,
}

/// Name of the raw-count logistic regression baseline in evaluation tables.
pub const RAW_BASELINE: &str = "logreg_raw";

pub fn cmd_evaluate(config: &PipelineConfig) -> Result<(Vec<PathBuf>, EvaluateOutcome)> {
    let (matrix, y) = load_features(config)?;
    let embedding = load_embedding(config, &matrix)?;
    let opts = cv_options(config);
    let raw = matrix.to_f64();

    let mut runs: Vec<(String, &'static str, ClassifierSpec, &Array2<f64>)> = config
        .estimators
        .iter()
        .map(|&m| {
            let spec = ClassifierSpec {
                method: m,
                ..config.classifier.clone()
            };
            (m.as_str().to_string(), "embedding", spec, &embedding.values)
        })
        .collect();
    let baseline = ClassifierSpec {
        method: ClassifierMethod::Logreg,
        ..config.classifier.clone()
    };
    runs.push((RAW_BASELINE.to_string(), "raw", baseline, &raw));

    let mut written = Vec::new();
    let mut scores = Vec::new();
    let mut curves: Vec<(String, f64, RocCurve)> = Vec::new();
    let mut headline: Option<CvReport> = None;
    for (name, input, spec, x) in runs {
        let report = cross_validate(x, &y, &spec, &opts)?;
        let curve = roc_curve(&report.oof_scores, &y)?;
        let pooled = auc(&curve)?;
        let path = config.workdir.join(artifacts::roc(&name));
        write_roc(&curve, &path)?;
        written.push(path);
        let finite: Vec<f64> = report.fold_auc.iter().copied().filter(|a| a.is_finite()).collect();
        let mean_fold_auc = if finite.is_empty() {
            f64::NAN
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        println!(
            "evaluate: {name:<12} ({input}) accuracy {:.4} ± {:.4}, AUC {pooled:.4}",
            report.mean, report.std
        );
        scores.push(EstimatorScore {
            estimator: name.clone(),
            input,
            mean_accuracy: report.mean,
            std_accuracy: report.std,
            mean_fold_auc,
            pooled_auc: pooled,
        });
        if input == "embedding" && spec.method == config.classifier.method && headline.is_none() {
            headline = Some(report);
        }
        curves.push((name, pooled, curve));
    }
    let report = match headline {
        Some(r) => r,
        None => cross_validate(&embedding.values, &y, &config.classifier, &opts)?,
    };

    let table_path = config.workdir.join(artifacts::AUC_TABLE);
    let mut table = String::from("estimator,input,mean_accuracy,std_accuracy,mean_fold_auc,pooled_auc\n");
    for s in &scores {
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.estimator, s.input, s.mean_accuracy, s.std_accuracy, s.mean_fold_auc, s.pooled_auc
        ));
    }
    write_text(&table_path, &table)?;
    let report_path = config.workdir.join(artifacts::CV_REPORT);
    write_json(&report_path, &report)?;
    let svg_path = config.workdir.join(artifacts::ROC_SVG);
    let plotted: Vec<(String, f64, &RocCurve)> = curves.iter().map(|(n, a, c)| (n.clone(), *a, c)).collect();
    write_text(&svg_path, &roc_svg(&plotted))?;
    written.extend([table_path, report_path, svg_path]);
    Ok((written, EvaluateOutcome { scores, report }))
}

#[derive(Debug, Serialize)]
pub struct HeadlineMetrics {
    pub classifier: ClassifierMethod,
    pub cv_mean_accuracy: f64,
    pub cv_std_accuracy: f64,
    pub cv_fold_accuracy: Vec<f64>,
    pub raw_logreg_mean_accuracy: f64,
    pub pooled_auc: BTreeMap<String, f64>,
    pub cluster_max_abs_ari: f64,
    pub cluster_max_abs_ami: f64,
    pub cluster_failed_cells: usize,
    pub best_alpha: Option<f64>,
    pub best_depth: Option<usize>,
}

/// Summary of a `run-all` invocation. Stage wall-clock timings live in a
/// separate `timings.json` so this report is reproducible byte for byte.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub stages: Vec<&'static str>,
    pub artifacts: Vec<String>,
    pub timings: &'static str,
    pub metrics: HeadlineMetrics,
}

fn best_by_accuracy(rows: &[SweepRow]) -> Option<f64> {
    rows.iter()
        .fold(None, |best: Option<&SweepRow>, r| match best {
            Some(b) if b.mean_accuracy >= r.mean_accuracy => Some(b),
            _ => Some(r),
        })
        .map(|r| r.value)
}

pub fn cmd_run_all(config: &PipelineConfig) -> std::result::Result<RunReport, StageError> {
    let wrap = |stage: &'static str| move |source: Error| StageError { stage, source };
    ensure_workdir(config).map_err(wrap("run-all"))?;
    let mut config = config.clone();
    config.events = Some(config.workdir.join(artifacts::EVENTS));
    let mut artifacts = Vec::new();
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, timings: &mut BTreeMap<&'static str, f64>| {
        timings.insert(name, clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };

    artifacts.extend(cmd_synth(&config, &config.events_path()).map_err(wrap("synth"))?);
    lap("synth", &mut timings);
    artifacts.extend(cmd_cohort(&config).map_err(wrap("cohort"))?);
    lap("cohort", &mut timings);
    artifacts.extend(cmd_featurize(&config).map_err(wrap("featurize"))?);
    lap("featurize", &mut timings);
    artifacts.extend(cmd_reduce(&config).map_err(wrap("reduce"))?);
    lap("reduce", &mut timings);
    let (paths, cells) = cmd_cluster_sweep(&config).map_err(wrap("cluster-sweep"))?;
    artifacts.extend(paths);
    lap("cluster-sweep", &mut timings);
    let (paths, train) = cmd_train(&config, true).map_err(wrap("train"))?;
    artifacts.extend(paths);
    lap("train", &mut timings);
    let (paths, eval) = cmd_evaluate(&config).map_err(wrap("evaluate"))?;
    artifacts.extend(paths);
    lap("evaluate", &mut timings);

    let (max_ari, max_ami) = max_abs_scores(&cells);
    let raw = eval
        .scores
        .iter()
        .find(|s| s.estimator == RAW_BASELINE)
        .map_or(f64::NAN, |s| s.mean_accuracy);
    let metrics = HeadlineMetrics {
        classifier: config.classifier.method,
        cv_mean_accuracy: eval.report.mean,
        cv_std_accuracy: eval.report.std,
        cv_fold_accuracy: eval.report.fold_accuracy.clone(),
        raw_logreg_mean_accuracy: raw,
        pooled_auc: eval.scores.iter().map(|s| (s.estimator.clone(), s.pooled_auc)).collect(),
        cluster_max_abs_ari: max_ari,
        cluster_max_abs_ami: max_ami,
        cluster_failed_cells: cells.iter().filter(|c| !c.is_ok()).count(),
        best_alpha: best_by_accuracy(&train.alpha),
        best_depth: best_by_accuracy(&train.depth).map(|d| d as usize),
    };
    let mut names: Vec<String> = artifacts
        .iter()
        .map(|p| {
            p.strip_prefix(&config.workdir)
                .unwrap_or(p)
                .to_string_lossy()
                .into_owned()
        })
        .collect();
    names.push(artifacts::RUN_REPORT.to_string());
    let report = RunReport {
        config: config.clone(),
        stages: vec!["synth", "cohort", "featurize", "reduce", "cluster-sweep", "train", "evaluate"],
        artifacts: names,
        timings: artifacts::TIMINGS,
        metrics,
    };
    let report_path = config.workdir.join(artifacts::RUN_REPORT);
    write_json(&report_path, &report).map_err(wrap("run-all"))?;
    write_json(&config.workdir.join(artifacts::TIMINGS), &timings).map_err(wrap("run-all"))?;
    println!(
        "run-all: CV accuracy {:.4} ± {:.4} -> {}",
        report.metrics.cv_mean_accuracy,
        report.metrics.cv_std_accuracy,
        report_path.display()
    );
    Ok(report)
}
