//! Recorded chains and their summaries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bitmat::{popcount, prediction_counts, BinaryMatrix};
use crate::error::{Error, Result};
use crate::finite::{FiniteConfig, ModelState};
use crate::ibp::IbpConfig;

/// Configuration of the run that produced a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum RunConfig {
    Finite(FiniteConfig),
    Ibp(IbpConfig),
}

impl RunConfig {
    pub fn burn_in(&self) -> usize {
        match self {
            RunConfig::Finite(c) => c.burn_in,
            RunConfig::Ibp(c) => c.burn_in,
        }
    }

    pub fn n_samples(&self) -> usize {
        match self {
            RunConfig::Finite(c) => c.n_samples,
            RunConfig::Ibp(c) => c.n_samples,
        }
    }
}

/// One recorded state.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub latent: usize,
    pub lambda: f64,
    pub z: Option<BinaryMatrix>,
    pub u: Option<BinaryMatrix>,
}

impl Sample {
    pub fn from_state(state: &ModelState, with_factors: bool) -> Self {
        Sample {
            latent: state.latent(),
            lambda: state.lambda.get(),
            z: with_factors.then(|| state.z.clone()),
            u: with_factors.then(|| state.u.clone()),
        }
    }

    pub fn factors(&self) -> Option<(&BinaryMatrix, &BinaryMatrix)> {
        self.z.as_ref().zip(self.u.as_ref())
    }
}

/// Post-burn-in samples of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub n_rows: usize,
    pub n_cols: usize,
    pub burn_in: usize,
    pub config: RunConfig,
    pub samples: Vec<Sample>,
}

impl Chain {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        burn_in: usize,
        config: RunConfig,
        samples: Vec<Sample>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("chain has no samples".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            let shapes_ok = match (&s.z, &s.u) {
                (Some(z), Some(u)) => {
                    z.shape() == (n_rows, s.latent) && u.shape() == (n_cols, s.latent)
                }
                (None, None) => true,
                _ => false,
            };
            if !shapes_ok {
                return Err(Error::Shape(format!(
                    "sample {i} factors inconsistent with {n_rows}x{n_cols} data and L={}",
                    s.latent
                )));
            }
        }
        Ok(Chain {
            n_rows,
            n_cols,
            burn_in,
            config,
            samples,
        })
    }

    pub fn latent_trace(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.latent).collect()
    }

    pub fn lambda_trace(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.lambda).collect()
    }

    pub fn has_factors(&self) -> bool {
        self.samples.iter().all(|s| s.z.is_some())
    }

    /// Index of the first sample whose latent dimension equals the mode.
    pub fn reference_index(&self) -> Result<usize> {
        let mode = l_summary(self)?.mode;
        Ok(self
            .samples
            .iter()
            .position(|s| s.latent == mode)
            .expect("mode is drawn from the trace"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LSummary {
    pub mode: usize,
    pub mean: f64,
    pub histogram: BTreeMap<usize, f64>,
}

/// Mode (ties resolved towards the smaller value), mean and histogram of the
/// latent-dimension trace.
pub fn l_summary(chain: &Chain) -> Result<LSummary> {
    summarize_trace(&chain.latent_trace())
}

pub fn summarize_trace(trace: &[usize]) -> Result<LSummary> {
    if trace.is_empty() {
        return Err(Error::Empty("latent trace is empty".into()));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in trace {
        *counts.entry(l).or_default() += 1;
    }
    let (&mode, _) = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .expect("nonempty");
    let n = trace.len() as f64;
    let mean = trace.iter().sum::<usize>() as f64 / n;
    let histogram = counts.into_iter().map(|(l, c)| (l, c as f64 / n)).collect();
    Ok(LSummary {
        mode,
        mean,
        histogram,
    })
}

/// Row-major matrix of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        RealMatrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn from_binary(m: &BinaryMatrix) -> Self {
        let mut out = RealMatrix::zeros(m.n_rows(), m.n_cols());
        for (r, c) in m.iter_ones() {
            out.data[r * m.n_cols() + c] = 1.0;
        }
        out
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(RealMatrix {
            n_rows: rows.len(),
            n_cols,
            data: rows.concat(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n_cols + c]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        if self.n_cols == 0 {
            return vec![Vec::new(); self.n_rows];
        }
        self.data.chunks(self.n_cols).map(<[f64]>::to_vec).collect()
    }
}

/// `|a & b| / |a | b|`; two empty sets count as identical.
fn jaccard(a: &[u64], b: &[u64]) -> f64 {
    let inter: usize = a.iter().zip(b).map(|(x, y)| (x & y).count_ones() as usize).sum();
    let union: usize = a.iter().zip(b).map(|(x, y)| (x | y).count_ones() as usize).sum();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Greedy one-to-one matching of `cols` against `refs` by descending Jaccard
/// similarity; only pairs with positive similarity are matched. Ties go to the
/// lowest indices.
fn greedy_match(cols: &BinaryMatrix, refs: &[Vec<u64>]) -> Vec<Option<usize>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..cols.n_rows() {
        for (j, r) in refs.iter().enumerate() {
            let s = jaccard(cols.row_words(i), r);
            if s > 0.0 {
                pairs.push((s, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut assigned = vec![None; cols.n_rows()];
    let mut taken = vec![false; refs.len()];
    for (_, i, j) in pairs {
        if assigned[i].is_none() && !taken[j] {
            assigned[i] = Some(j);
            taken[j] = true;
        }
    }
    assigned
}

/// Marginal posterior means of both factors after aligning every sample's
/// columns to a reference sample with the modal latent dimension. Both
/// means have one column per reference column; each entry is the fraction
/// of all samples in which the matched column is set.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedMeans {
    pub z: RealMatrix,
    pub u: RealMatrix,
}

pub fn aligned_means(chain: &Chain) -> Result<AlignedMeans> {
    if !chain.has_factors() {
        return Err(Error::Config("chain was recorded without factor snapshots".into()));
    }
    let reference = &chain.samples[chain.reference_index()?];
    let refs: Vec<Vec<u64>> = {
        let zt = reference.z.as_ref().expect("checked").transpose();
        (0..zt.n_rows()).map(|l| zt.row_words(l).to_vec()).collect()
    };
    let (n, d) = (chain.n_rows, chain.n_cols);
    let mut z_sum: Vec<Vec<f64>> = vec![vec![0.0; n]; refs.len()];
    let mut u_sum: Vec<Vec<f64>> = vec![vec![0.0; d]; refs.len()];

    for sample in &chain.samples {
        let (z, u) = sample.factors().expect("checked");
        let zt = z.transpose();
        let mapping = greedy_match(&zt, &refs);
        for (l, target) in mapping.into_iter().enumerate() {
            // Columns with no counterpart in the reference are left out.
            let Some(j) = target else { continue };
            for (r, acc) in z_sum[j].iter_mut().enumerate() {
                if z.get(r, l) {
                    *acc += 1.0;
                }
            }
            for (r, acc) in u_sum[j].iter_mut().enumerate() {
                if u.get(r, l) {
                    *acc += 1.0;
                }
            }
        }
    }

    let count = chain.samples.len() as f64;
    let assemble = |sums: &[Vec<f64>], rows: usize| {
        let rows: Vec<Vec<f64>> = (0..rows)
            .map(|r| sums.iter().map(|col| col[r] / count).collect())
            .collect();
        let mut m = RealMatrix::from_rows(&rows).expect("rectangular");
        m.n_cols = sums.len();
        m
    };
    Ok(AlignedMeans {
        z: assemble(&z_sum, n),
        u: assemble(&u_sum, d),
    })
}

/// Marginal posterior mean of `Z`, `N x L_ref`.
pub fn marginal_mean_z(chain: &Chain) -> Result<RealMatrix> {
    Ok(aligned_means(chain)?.z)
}

/// Fraction of entries the Boolean reconstruction gets wrong.
pub fn reconstruction_error(x: &BinaryMatrix, z: &BinaryMatrix, u: &BinaryMatrix) -> Result<f64> {
    let c = prediction_counts(x, z, u)?;
    let total = c.total();
    Ok(if total == 0 {
        0.0
    } else {
        c.wrong() as f64 / total as f64
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub inferred: usize,
    pub truth: usize,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorMatch {
    pub pairs: Vec<MatchedPair>,
    /// Sum of matched similarities divided by the number of true columns.
    pub mean_jaccard: f64,
}

/// Greedily pairs columns of `inferred` with columns of `truth` by descending
/// Jaccard similarity of their supports.
pub fn match_factors(inferred: &BinaryMatrix, truth: &BinaryMatrix) -> Result<FactorMatch> {
    if inferred.n_rows() != truth.n_rows() {
        return Err(Error::Shape(format!(
            "inferred factor has {} rows, truth has {}",
            inferred.n_rows(),
            truth.n_rows()
        )));
    }
    let it = inferred.transpose();
    let tt = truth.transpose();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..it.n_rows() {
        for j in 0..tt.n_rows() {
            let s = jaccard(it.row_words(i), tt.row_words(j));
            if s > 0.0 {
                pairs.push((s, i, j));
            }
        }
    }
    // Tie-break on the inferred column's contents, not its position, so that
    // permuting the inferred columns cannot change the result.
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.2.cmp(&b.2))
            .then_with(|| it.row_words(a.1).cmp(it.row_words(b.1)))
            .then(a.1.cmp(&b.1))
    });
    let mut used_i = vec![false; it.n_rows()];
    let mut used_j = vec![false; tt.n_rows()];
    let mut matched = Vec::new();
    for (s, i, j) in pairs {
        if !used_i[i] && !used_j[j] {
            used_i[i] = true;
            used_j[j] = true;
            matched.push(MatchedPair {
                inferred: i,
                truth: j,
                jaccard: s,
            });
        }
    }
    let mean_jaccard = if tt.n_rows() == 0 {
        0.0
    } else {
        matched.iter().map(|p| p.jaccard).sum::<f64>() / tt.n_rows() as f64
    };
    Ok(FactorMatch {
        pairs: matched,
        mean_jaccard,
    })
}

/// Number of ones in a packed column, exposed for diagnostics.
pub fn column_sizes(m: &BinaryMatrix) -> Vec<usize> {
    let t = m.transpose();
    (0..t.n_rows()).map(|l| popcount(t.row_words(l))).collect()
}
