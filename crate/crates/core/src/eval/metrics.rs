use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Cross-tabulation of two labelings over the same points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    row_sums: Vec<u64>,
    col_sums: Vec<u64>,
    n: u64,
}

impl ContingencyTable {
    pub fn new(a: &[usize], b: &[usize]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Dimension {
                expected: a.len(),
                got: b.len(),
            });
        }
        let ia = dense_index(a);
        let ib = dense_index(b);
        let (r, c) = (ia.len(), ib.len());
        let mut counts = vec![vec![0u64; c]; r];
        for (x, y) in a.iter().zip(b) {
            counts[ia[x]][ib[y]] += 1;
        }
        let row_sums = counts.iter().map(|row| row.iter().sum()).collect();
        let col_sums = (0..c).map(|j| counts.iter().map(|row| row[j]).sum()).collect();
        Ok(ContingencyTable {
            counts,
            row_sums,
            col_sums,
            n: a.len() as u64,
        })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn row_sums(&self) -> &[u64] {
        &self.row_sums
    }

    pub fn col_sums(&self) -> &[u64] {
        &self.col_sums
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    /// True when the two labelings induce the same partition.
    pub fn is_identity(&self) -> bool {
        self.counts.len() == self.col_sums.len()
            && self
                .counts
                .iter()
                .all(|row| row.iter().filter(|&&v| v > 0).count() == 1)
    }
}

fn dense_index(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut map = BTreeMap::new();
    for &l in labels {
        map.entry(l).or_insert(0);
    }
    for (i, v) in map.values_mut().enumerate() {
        *v = i;
    }
    map
}

fn check_inputs(a: &[usize], b: &[usize]) -> Result<ContingencyTable> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::validation("need at least two labeled points"));
    }
    ContingencyTable::new(a, b)
}

fn comb2(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index.
///
/// When the chance-corrected denominator vanishes (both partitions a single
/// cluster, or both all singletons) the partitions are identical and the
/// score is 1.
pub fn adjusted_rand(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = check_inputs(a, b)?;
    let index: f64 = t.counts.iter().flatten().map(|&v| comb2(v)).sum();
    let sum_a: f64 = t.row_sums.iter().map(|&v| comb2(v)).sum();
    let sum_b: f64 = t.col_sums.iter().map(|&v| comb2(v)).sum();
    let total = comb2(t.n);
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(if t.is_identity() { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

fn entropy(sums: &[u64], n: u64) -> f64 {
    let n = n as f64;
    sums.iter()
        .filter(|&&v| v > 0)
        .map(|&v| {
            let p = v as f64 / n;
            -p * p.ln()
        })
        .sum()
}

pub fn mutual_info(t: &ContingencyTable) -> f64 {
    let n = t.n as f64;
    let mut mi = 0.0;
    for (i, row) in t.counts.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (t.row_sums[i] as f64 * t.col_sums[j] as f64)).ln();
            }
        }
    }
    mi
}

/// Expected mutual information under the hypergeometric model of random
/// labelings with fixed marginals.
pub fn expected_mutual_info(t: &ContingencyTable) -> f64 {
    let n = t.n as usize;
    let mut ln_fact = vec![0.0; n + 1];
    for k in 1..=n {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let nf = n as f64;
    let mut emi = 0.0;
    for &ai in &t.row_sums {
        for &bj in &t.col_sums {
            let (ai, bj) = (ai as usize, bj as usize);
            let lo = (ai + bj).saturating_sub(n).max(1);
            let hi = ai.min(bj);
            let fixed = ln_fact[ai] + ln_fact[bj] + ln_fact[n - ai] + ln_fact[n - bj] - ln_fact[n];
            for nij in lo..=hi {
                let log_p = fixed
                    - ln_fact[nij]
                    - ln_fact[ai - nij]
                    - ln_fact[bj - nij]
                    - ln_fact[n + nij - ai - bj];
                let x = nij as f64;
                emi += x / nf * (nf * x / (ai as f64 * bj as f64)).ln() * log_p.exp();
            }
        }
    }
    emi
}

/// Adjusted mutual information with arithmetic-mean entropy normalization.
///
/// Both-single-cluster inputs score 1. If one labeling is constant the
/// score is 0. Any other vanishing denominator means the partitions are
/// identical (1) or it is treated as no agreement (0).
pub fn adjusted_mutual_info(a: &[usize], b: &[usize]) -> Result<f64> {
    let t = check_inputs(a, b)?;
    if t.row_sums.len() == 1 && t.col_sums.len() == 1 {
        return Ok(1.0);
    }
    let mi = mutual_info(&t);
    let emi = expected_mutual_info(&t);
    let normalizer = 0.5 * (entropy(&t.row_sums, t.n) + entropy(&t.col_sums, t.n));
    let denom = normalizer - emi;
    if denom.abs() <= 1e-12 * normalizer.max(1.0) {
        return Ok(if t.is_identity() { 1.0 } else { 0.0 });
    }
    Ok((mi - emi) / denom)
}

pub fn accuracy(predicted: &[bool], truth: &[bool]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::validation("accuracy of an empty set"));
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}
