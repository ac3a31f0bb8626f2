//! Dimensionality reduction with a fit/transform split: PCA, kernel PCA,
//! FastICA and ISOMAP.

mod ica;
mod isomap;
mod kernel;
mod kpca;
mod pca;

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::all_finite;

pub use ica::IcaModel;
pub use isomap::IsomapModel;
pub use kernel::{center_kernel, default_gamma, gram, gram_symmetric, rbf_kernel, KernelSpec};
pub use kpca::KpcaModel;
pub use pca::PcaModel;

/// Relative eigenvalue floor below which a spectral component is dropped.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReducerMethod {
    Pca,
    Kpca,
    Ica,
    Isomap,
}

impl ReducerMethod {
    pub const ALL: [ReducerMethod; 4] = [
        ReducerMethod::Pca,
        ReducerMethod::Ica,
        ReducerMethod::Kpca,
        ReducerMethod::Isomap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReducerMethod::Pca => "pca",
            ReducerMethod::Kpca => "kpca",
            ReducerMethod::Ica => "ica",
            ReducerMethod::Isomap => "isomap",
        }
    }
}

impl fmt::Display for ReducerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReducerMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(ReducerMethod::Pca),
            "kpca" | "kernelpca" => Ok(ReducerMethod::Kpca),
            "ica" => Ok(ReducerMethod::Ica),
            "isomap" => Ok(ReducerMethod::Isomap),
            _ => Err(format!("unknown reducer {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
}

/// Method-specific settings for [`fit_reducer`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducerParams {
    pub kernel: KernelKind,
    /// RBF gamma; `None` picks [`default_gamma`] on the training data.
    pub gamma: Option<f64>,
    pub n_neighbors: usize,
    pub ica_tolerance: f64,
    pub ica_max_iter: usize,
}

impl Default for ReducerParams {
    fn default() -> Self {
        ReducerParams {
            kernel: KernelKind::Rbf,
            gamma: None,
            n_neighbors: 10,
            ica_tolerance: 1e-4,
            ica_max_iter: 200,
        }
    }
}

impl ReducerParams {
    pub fn kernel_spec(&self, x: &Array2<f64>) -> Result<KernelSpec> {
        match self.kernel {
            KernelKind::Linear => Ok(KernelSpec::Linear),
            KernelKind::Rbf => KernelSpec::rbf(self.gamma.unwrap_or_else(|| default_gamma(x))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ReducerModel {
    Pca(PcaModel),
    Kpca(KpcaModel),
    Ica(IcaModel),
    Isomap(IsomapModel),
}

/// Fits a reducer with `k` output components.
///
/// Kernel PCA and ISOMAP drop components whose eigenvalue is not positive,
/// so their effective component count may be smaller than `k`.
pub fn fit_reducer(
    method: ReducerMethod,
    x: &Array2<f64>,
    k: usize,
    params: &ReducerParams,
    seed: u64,
) -> Result<ReducerModel> {
    let (n, d) = x.dim();
    if n < 2 {
        return Err(Error::validation(format!("need at least 2 rows, got {n}")));
    }
    if !all_finite(x) {
        return Err(Error::validation("input matrix has non-finite entries"));
    }
    let limit = match method {
        ReducerMethod::Pca | ReducerMethod::Ica => n.min(d),
        ReducerMethod::Kpca | ReducerMethod::Isomap => n,
    };
    if k == 0 || k > limit {
        return Err(Error::validation(format!(
            "{method}: n_components {k} outside 1..={limit}"
        )));
    }
    Ok(match method {
        ReducerMethod::Pca => ReducerModel::Pca(PcaModel::fit(x, k)?),
        ReducerMethod::Kpca => ReducerModel::Kpca(KpcaModel::fit(x, k, params.kernel_spec(x)?)?),
        ReducerMethod::Ica => ReducerModel::Ica(IcaModel::fit(
            x,
            k,
            params.ica_tolerance,
            params.ica_max_iter,
            seed,
        )?),
        ReducerMethod::Isomap => ReducerModel::Isomap(IsomapModel::fit(x, k, params.n_neighbors)?),
    })
}

impl ReducerModel {
    pub fn method(&self) -> ReducerMethod {
        match self {
            ReducerModel::Pca(_) => ReducerMethod::Pca,
            ReducerModel::Kpca(_) => ReducerMethod::Kpca,
            ReducerModel::Ica(_) => ReducerMethod::Ica,
            ReducerModel::Isomap(_) => ReducerMethod::Isomap,
        }
    }

    pub fn n_components(&self) -> usize {
        match self {
            ReducerModel::Pca(m) => m.axes.ncols(),
            ReducerModel::Kpca(m) => m.alphas.ncols(),
            ReducerModel::Ica(m) => m.unmixing.nrows(),
            ReducerModel::Isomap(m) => m.embedding.ncols(),
        }
    }

    fn n_features(&self) -> usize {
        match self {
            ReducerModel::Pca(m) => m.mean.len(),
            ReducerModel::Kpca(m) => m.train.ncols(),
            ReducerModel::Ica(m) => m.mean.len(),
            ReducerModel::Isomap(m) => m.train.ncols(),
        }
    }

    /// Spectrum retained by the model (empty for ICA).
    pub fn eigenvalues(&self) -> &[f64] {
        match self {
            ReducerModel::Pca(m) => &m.explained_variance,
            ReducerModel::Kpca(m) => &m.eigenvalues,
            ReducerModel::Ica(_) => &[],
            ReducerModel::Isomap(m) => &m.eigenvalues,
        }
    }

    /// Coordinates of the training rows as computed during fitting.
    pub fn fit_embedding(&self) -> &Array2<f64> {
        match self {
            ReducerModel::Pca(m) => &m.scores,
            ReducerModel::Kpca(m) => &m.embedding,
            ReducerModel::Ica(m) => &m.sources,
            ReducerModel::Isomap(m) => &m.embedding,
        }
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::Dimension {
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        match self {
            ReducerModel::Pca(m) => Ok(m.transform(x)),
            ReducerModel::Kpca(m) => Ok(m.transform(x)),
            ReducerModel::Ica(m) => Ok(m.transform(x)),
            ReducerModel::Isomap(m) => m.transform(x),
        }
    }

    pub fn embed(&self, row_ids: &[String], x: &Array2<f64>) -> Result<Embedding> {
        Embedding::new(row_ids.to_vec(), self.transform(x)?, self.method())
    }
}

/// Reduced coordinates, one row per input row.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub row_ids: Vec<String>,
    pub values: Array2<f64>,
    pub method: Option<ReducerMethod>,
}

impl Embedding {
    pub fn new(row_ids: Vec<String>, values: Array2<f64>, method: ReducerMethod) -> Result<Self> {
        if row_ids.len() != values.nrows() {
            return Err(Error::Dimension {
                expected: row_ids.len(),
                got: values.nrows(),
            });
        }
        if !all_finite(&values) {
            return Err(Error::validation("embedding has non-finite entries"));
        }
        Ok(Embedding {
            row_ids,
            values,
            method: Some(method),
        })
    }
}

pub fn write_embedding(e: &Embedding, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |err| Error::io(path, err);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let mut header = String::from("patient_id");
    for c in 0..e.values.ncols() {
        header.push_str(&format!(",c{c}"));
    }
    writeln!(out, "{header}").map_err(io)?;
    for (id, row) in e.row_ids.iter().zip(e.values.rows()) {
        let mut line = id.clone();
        for v in row {
            line.push_str(&format!(",{v:.16e}"));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_embedding(path: impl AsRef<Path>) -> Result<Embedding> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header".into()))?
        .map_err(|e| Error::io(path, e))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols[0] != "patient_id" || cols[1..].iter().enumerate().any(|(i, c)| *c != format!("c{i}")) {
        return Err(parse_err(1, "expected patient_id,c0..c{k-1}".into()));
    }
    let k = cols.len() - 1;
    let mut ids = Vec::new();
    let mut vals = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != k + 1 {
            return Err(parse_err(idx + 2, format!("expected {} fields", k + 1)));
        }
        ids.push(f[0].to_string());
        for c in &f[1..] {
            vals.push(
                c.parse::<f64>()
                    .map_err(|_| parse_err(idx + 2, format!("bad value {c:?}")))?,
            );
        }
    }
    let values = Array2::from_shape_vec((ids.len(), k), vals).expect("arity checked");
    Ok(Embedding {
        row_ids: ids,
        values,
        method: None,
    })
}

/// Keeps the leading eigenpairs whose eigenvalue exceeds the relative floor.
pub(crate) fn leading_positive(values: &[f64], k: usize) -> usize {
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let floor = EIGENVALUE_TOLERANCE * top.max(f64::MIN_POSITIVE);
    values.iter().take(k).take_while(|&&v| v > floor).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn bounds_are_checked() {
        let x = array![[1.0, 2.0], [3.0, 5.0], [0.0, 1.0]];
        let p = ReducerParams::default();
        assert!(fit_reducer(ReducerMethod::Pca, &x, 3, &p, 0).is_err());
        assert!(fit_reducer(ReducerMethod::Pca, &x, 0, &p, 0).is_err());
        assert!(fit_reducer(ReducerMethod::Kpca, &x, 4, &p, 0).is_err());
        assert!(fit_reducer(ReducerMethod::Pca, &array![[1.0, 2.0]], 1, &p, 0).is_err());
        assert!(fit_reducer(ReducerMethod::Pca, &array![[1.0, f64::NAN], [0.0, 0.0]], 1, &p, 0).is_err());
    }

    #[test]
    fn transform_dimension_mismatch() {
        let x = array![[1.0, 2.0], [3.0, 5.0], [0.0, 1.0]];
        let m = fit_reducer(ReducerMethod::Pca, &x, 1, &ReducerParams::default(), 0).unwrap();
        assert!(matches!(m.transform(&array![[1.0, 2.0, 3.0]]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn embedding_csv_round_trip() {
        let e = Embedding::new(
            vec!["a".into(), "b".into()],
            array![[0.1, -1.0 / 3.0], [1e-300, 12345.678]],
            ReducerMethod::Pca,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        write_embedding(&e, &p).unwrap();
        let back = read_embedding(&p).unwrap();
        assert_eq!(back.values, e.values);
        assert_eq!(back.row_ids, e.row_ids);
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("patient_id,c0,c1\n"));
    }
}
