use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::classify::{ClassifierMethod, ClassifierSpec};
use crate::cluster::{ClusterConfig, ClusterMethod, Linkage};
use crate::data::GeneratorConfig;
use crate::error::{Error, Result};
use crate::reduce::{KernelKind, ReducerMethod, ReducerParams};

/// Every setting of a pipeline run. Paths are not echoed into reports so
/// that reports depend only on the seed and model settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    #[serde(skip)]
    pub workdir: PathBuf,
    /// Events file read by `cohort` and `featurize`; defaults to
    /// `<workdir>/events.csv`.
    #[serde(skip)]
    pub events: Option<PathBuf>,
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub n_per_class: usize,
    pub reducer: ReducerMethod,
    pub n_components: usize,
    pub reducer_params: ReducerParams,
    pub classifier: ClassifierSpec,
    pub estimators: Vec<ClassifierMethod>,
    pub alpha_grid: Vec<f64>,
    pub depth_grid: Vec<usize>,
    pub gamma_grid: Vec<f64>,
    pub k_folds: usize,
    pub stratified: bool,
    pub cluster: ClusterConfig,
    pub sweep_components: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            workdir: PathBuf::from("work"),
            events: None,
            seed: 0,
            generator: GeneratorConfig::default(),
            n_per_class: 200,
            reducer: ReducerMethod::Kpca,
            n_components: 20,
            reducer_params: ReducerParams::default(),
            classifier: ClassifierSpec::new(ClassifierMethod::Gbdt),
            estimators: ClassifierMethod::ALL.to_vec(),
            alpha_grid: vec![0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0],
            depth_grid: vec![1, 2, 3, 4, 5, 6, 8],
            gamma_grid: Vec::new(),
            k_folds: 7,
            stratified: true,
            cluster: ClusterConfig::new(ClusterMethod::Kmeans),
            sweep_components: 20,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "workdir",
    "events",
    "seed",
    "n_case",
    "n_control",
    "n_codes",
    "n_signal_codes",
    "noise_scale",
    "shell_radii",
    "shell_mirror",
    "signal_offset",
    "background_rate",
    "post_index_rate",
    "n_per_class",
    "reducer",
    "n_components",
    "kernel",
    "gamma",
    "n_neighbors",
    "ica_tolerance",
    "ica_max_iter",
    "classifier",
    "learning_rate",
    "max_depth",
    "n_stages",
    "l2",
    "logreg_max_iter",
    "logreg_tolerance",
    "svm_lambda",
    "svm_iterations",
    "svm_gamma",
    "estimators",
    "alpha_grid",
    "depth_grid",
    "gamma_grid",
    "k_folds",
    "stratified",
    "n_clusters",
    "cluster_restarts",
    "cluster_max_iter",
    "gmm_max_iter",
    "gmm_tolerance",
    "affinity_gamma",
    "linkage",
    "sweep_components",
];

fn scalar<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>().map_err(|_| format!("cannot parse {v:?}"))
}

fn parsed<T>(v: &str) -> std::result::Result<T, String>
where
    T: FromStr<Err = String>,
{
    v.parse::<T>()
}

/// `none` / `auto` map to `None`.
fn optional<T: FromStr>(v: &str) -> std::result::Result<Option<T>, String> {
    if v.eq_ignore_ascii_case("none") || v.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        scalar(v).map(Some)
    }
}

/// Accepts `[a, b, c]` or `a, b, c`; `[]` is the empty list.
pub fn parse_list<T, E>(v: &str, item: impl Fn(&str) -> std::result::Result<T, E>) -> std::result::Result<Vec<T>, E> {
    let inner = v.trim().trim_start_matches('[').trim_end_matches(']').trim();
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|s| item(s.trim())).collect()
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got {v:?}")),
    }
}

impl PipelineConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        let g = &mut self.generator;
        match key {
            "workdir" => self.workdir = PathBuf::from(v),
            "events" => self.events = Some(PathBuf::from(v)),
            "seed" => self.seed = scalar(v)?,
            "n_case" => g.n_case = scalar(v)?,
            "n_control" => g.n_control = scalar(v)?,
            "n_codes" => g.n_codes = scalar(v)?,
            "n_signal_codes" => g.n_signal_codes = scalar(v)?,
            "noise_scale" => g.noise_scale = scalar(v)?,
            "shell_radii" => {
                let r: Vec<f64> = parse_list(v, scalar)?;
                if r.len() != 2 {
                    return Err("shell_radii needs two values (control, case)".into());
                }
                g.shell_radii = (r[0], r[1]);
            }
            "shell_mirror" => g.shell_mirror = optional(v)?,
            "signal_offset" => g.signal_offset = scalar(v)?,
            "background_rate" => g.background_rate = scalar(v)?,
            "post_index_rate" => g.post_index_rate = scalar(v)?,
            "n_per_class" => self.n_per_class = scalar(v)?,
            "reducer" => self.reducer = parsed(v)?,
            "n_components" => self.n_components = scalar(v)?,
            "kernel" => {
                self.reducer_params.kernel = match v.to_ascii_lowercase().as_str() {
                    "rbf" => KernelKind::Rbf,
                    "linear" => KernelKind::Linear,
                    _ => return Err(format!("unknown kernel {v:?}")),
                }
            }
            "gamma" => self.reducer_params.gamma = optional(v)?,
            "n_neighbors" => self.reducer_params.n_neighbors = scalar(v)?,
            "ica_tolerance" => self.reducer_params.ica_tolerance = scalar(v)?,
            "ica_max_iter" => self.reducer_params.ica_max_iter = scalar(v)?,
            "classifier" => self.classifier.method = parsed(v)?,
            "learning_rate" => self.classifier.learning_rate = scalar(v)?,
            "max_depth" => self.classifier.max_depth = scalar(v)?,
            "n_stages" => self.classifier.n_stages = scalar(v)?,
            "l2" => self.classifier.l2 = scalar(v)?,
            "logreg_max_iter" => self.classifier.max_iter = scalar(v)?,
            "logreg_tolerance" => self.classifier.tolerance = scalar(v)?,
            "svm_lambda" => self.classifier.svm_lambda = scalar(v)?,
            "svm_iterations" => self.classifier.svm_iterations = scalar(v)?,
            "svm_gamma" => self.classifier.svm_gamma = optional(v)?,
            "estimators" => self.estimators = parse_list(v, parsed)?,
            "alpha_grid" => self.alpha_grid = parse_list(v, scalar)?,
            "depth_grid" => self.depth_grid = parse_list(v, scalar)?,
            "gamma_grid" => self.gamma_grid = parse_list(v, scalar)?,
            "k_folds" => self.k_folds = scalar(v)?,
            "stratified" => self.stratified = boolean(v)?,
            "n_clusters" => self.cluster.n_clusters = scalar(v)?,
            "cluster_restarts" => self.cluster.restarts = scalar(v)?,
            "cluster_max_iter" => self.cluster.max_iter = scalar(v)?,
            "gmm_max_iter" => self.cluster.gmm_max_iter = scalar(v)?,
            "gmm_tolerance" => self.cluster.gmm_tolerance = scalar(v)?,
            "affinity_gamma" => self.cluster.affinity_gamma = optional(v)?,
            "linkage" => self.cluster.linkage = parsed::<Linkage>(v)?,
            "sweep_components" => self.sweep_components = scalar(v)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut config = PipelineConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`".into()))?;
            config.set(key.trim(), value).map_err(err)?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Propagates the global seed and checks cross-field constraints.
    pub fn finalize(mut self) -> Result<Self> {
        self.generator.seed = self.seed;
        self.classifier.seed = self.seed;
        self.cluster.seed = self.seed;
        self.generator.validate()?;
        self.classifier.validate()?;
        if self.n_per_class == 0 {
            return Err(Error::validation("n_per_class must be positive"));
        }
        if self.k_folds < 2 {
            return Err(Error::validation("k_folds must be at least 2"));
        }
        if self.n_components == 0 || self.sweep_components == 0 {
            return Err(Error::validation("component counts must be positive"));
        }
        if self.estimators.is_empty() {
            return Err(Error::validation("estimators list is empty"));
        }
        Ok(self)
    }

    pub fn events_path(&self) -> PathBuf {
        self.events.clone().unwrap_or_else(|| self.workdir.join("events.csv"))
    }
}
