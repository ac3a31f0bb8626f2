use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::Serialize;

use super::{fit_clusters, ClusterConfig, ClusterMethod};
use crate::error::{Error, Result};
use crate::eval::{adjusted_mutual_info, adjusted_rand};
use crate::par::{derive_seed, map_range, map_slice, tag};
use crate::reduce::{fit_reducer, ReducerMethod, ReducerParams};

pub const SWEEP_HEADER: &str = "reduction,method,adjusted_rand,adjusted_mutual_info,status";

/// Input representation for one sweep row: the raw matrix or a reducer's
/// training embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(into = "String")]
pub enum Reduction {
    None,
    Reduce(ReducerMethod),
}

pub const SWEEP_REDUCTIONS: [Reduction; 5] = [
    Reduction::None,
    Reduction::Reduce(ReducerMethod::Pca),
    Reduction::Reduce(ReducerMethod::Ica),
    Reduction::Reduce(ReducerMethod::Kpca),
    Reduction::Reduce(ReducerMethod::Isomap),
];

impl Reduction {
    pub fn as_str(self) -> &'static str {
        match self {
            Reduction::None => "none",
            Reduction::Reduce(m) => m.as_str(),
        }
    }
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<Reduction> for String {
    fn from(r: Reduction) -> String {
        r.as_str().to_string()
    }
}

impl FromStr for Reduction {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("none") {
            Ok(Reduction::None)
        } else {
            s.parse().map(Reduction::Reduce)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub n_components: usize,
    pub reducer: ReducerParams,
    /// Template for every clusterer; `method` and `seed` are set per cell.
    pub cluster: ClusterConfig,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_components: 20,
            reducer: ReducerParams::default(),
            cluster: ClusterConfig::new(ClusterMethod::Kmeans),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub reduction: Reduction,
    pub method: ClusterMethod,
    pub adjusted_rand: f64,
    pub adjusted_mutual_info: f64,
    /// `ok`, or `failed: <reason>` with NaN scores.
    pub status: String,
}

impl SweepCell {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn failed(reduction: Reduction, method: ClusterMethod, err: &Error) -> Self {
        SweepCell {
            reduction,
            method,
            adjusted_rand: f64::NAN,
            adjusted_mutual_info: f64::NAN,
            status: format!("failed: {err}"),
        }
    }
}

/// Scores every reduction × method pair against `truth`. Reducers are fitted
/// once each; cell failures are recorded instead of aborting the sweep.
pub fn clustering_sweep(
    x_raw: &Array2<f64>,
    truth: &[usize],
    reductions: &[Reduction],
    methods: &[ClusterMethod],
    config: &SweepConfig,
) -> Result<Vec<SweepCell>> {
    if truth.len() != x_raw.nrows() {
        return Err(Error::Dimension {
            expected: x_raw.nrows(),
            got: truth.len(),
        });
    }
    let inputs = map_slice(reductions, |&r| -> Result<Array2<f64>> {
        match r {
            Reduction::None => Ok(x_raw.clone()),
            Reduction::Reduce(m) => {
                let k = config.n_components.min(x_raw.nrows()).min(match m {
                    ReducerMethod::Pca | ReducerMethod::Ica => x_raw.ncols(),
                    _ => usize::MAX,
                });
                let seed = derive_seed(config.seed, &[tag(m.as_str())]);
                Ok(fit_reducer(m, x_raw, k, &config.reducer, seed)?.fit_embedding().clone())
            }
        }
    });
    let n_methods = methods.len();
    let cells = map_range(reductions.len() * n_methods, |c| {
        let reduction = reductions[c / n_methods];
        let method = methods[c % n_methods];
        let input = match &inputs[c / n_methods] {
            Ok(x) => x,
            Err(e) => return SweepCell::failed(reduction, method, e),
        };
        let cfg = ClusterConfig {
            method,
            seed: derive_seed(config.seed, &[tag(reduction.as_str()), tag(method.as_str())]),
            ..config.cluster.clone()
        };
        let scored = fit_clusters(&cfg, input).and_then(|a| {
            Ok((adjusted_rand(truth, &a.labels)?, adjusted_mutual_info(truth, &a.labels)?))
        });
        match scored {
            Ok((ari, ami)) => SweepCell {
                reduction,
                method,
                adjusted_rand: ari,
                adjusted_mutual_info: ami,
                status: "ok".into(),
            },
            Err(e) => SweepCell::failed(reduction, method, &e),
        }
    });
    Ok(cells)
}

pub fn write_sweep(cells: &[SweepCell], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "{SWEEP_HEADER}").map_err(io)?;
    for c in cells {
        let status: String = c
            .status
            .chars()
            .map(|ch| if matches!(ch, ',' | '\n' | '\r') { ';' } else { ch })
            .collect();
        writeln!(
            out,
            "{},{},{},{},{}",
            c.reduction, c.method, c.adjusted_rand, c.adjusted_mutual_info, status
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_sweep(path: impl AsRef<Path>) -> Result<Vec<SweepCell>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut cells = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if idx == 0 {
            if line != SWEEP_HEADER {
                return Err(parse_err(1, format!("expected header {SWEEP_HEADER:?}")));
            }
            continue;
        }
        let f: Vec<&str> = line.splitn(5, ',').collect();
        if f.len() != 5 {
            return Err(parse_err(idx + 1, "expected 5 fields".into()));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(idx + 1, format!("bad number {s:?}")));
        cells.push(SweepCell {
            reduction: f[0].parse().map_err(|m| parse_err(idx + 1, m))?,
            method: f[1].parse().map_err(|m| parse_err(idx + 1, m))?,
            adjusted_rand: num(f[2])?,
            adjusted_mutual_info: num(f[3])?,
            status: f[4].to_string(),
        });
    }
    Ok(cells)
}
