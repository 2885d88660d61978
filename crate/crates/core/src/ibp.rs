//! Nonparametric sampler with an Indian Buffet Process prior on `Z`.
//!
//! Rows of `Z` are visited in order. For each row the represented columns
//! used by other rows are resampled with prior `m_{-n,l} / N`, columns used
//! only by this row are dropped, and a fresh number of row-specific columns
//! is drawn. That draw depends on the data only through the row's false and
//! true negatives: positions already predicted as one cannot be changed by
//! new codes, and a negative prediction flips to one exactly when some new
//! code covers it.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::bitmat::{
    active_coverage, get_bit, prediction_counts_t, row_counts, set_bit, BinaryMatrix,
    PredictionCounts,
};
use crate::error::{Error, Result};
use crate::finite::{check_data, sweep_rows, ModelState, RowKernel};
use crate::likelihood::{lambda_mle, log_sigmoid, logit, sigmoid, NoiseParam, LAMBDA_INIT};
use crate::posterior::{Chain, RunConfig, Sample};
use crate::rng::{RowStreams, StreamRng, StreamTag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbpConfig {
    /// IBP concentration.
    pub alpha: f64,
    /// Prior probability of a one in `U`.
    pub q: f64,
    /// New-dish counts are drawn from `0..lprime_max`.
    pub lprime_max: usize,
    pub n_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub lambda_init: f64,
    pub record_factors: bool,
}

impl Default for IbpConfig {
    fn default() -> Self {
        IbpConfig {
            alpha: 1.0,
            q: 0.5,
            lprime_max: 10,
            n_samples: 200,
            burn_in: 100,
            seed: 0,
            lambda_init: LAMBDA_INIT,
            record_factors: true,
        }
    }
}

impl IbpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::Config(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if self.lprime_max == 0 {
            return Err(Error::Config("lprime_max must be at least 1".into()));
        }
        if self.burn_in >= self.n_samples {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than the number of samples ({})",
                self.burn_in, self.n_samples
            )));
        }
        NoiseParam::new(self.lambda_init)?;
        Ok(())
    }
}

/// Number of ones per column of `Z`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ColumnCounts(Vec<usize>);

impl ColumnCounts {
    pub fn from_z(z: &BinaryMatrix) -> Self {
        let mut m = vec![0; z.n_cols()];
        for (_, l) in z.iter_ones() {
            m[l] += 1;
        }
        ColumnCounts(m)
    }

    pub fn get(&self, l: usize) -> usize {
        self.0[l]
    }

    /// `m_{-n,l}`: ones in column `l` outside row `n`.
    pub fn without_row(&self, z: &BinaryMatrix, n: usize, l: usize) -> usize {
        self.0[l] - usize::from(z.get(n, l))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Log-likelihood contributions of one negative prediction as a function of
/// the number of new columns `L'`.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketTable {
    /// Per false negative (`x = 1`).
    pub fn_terms: Vec<f64>,
    /// Per true negative (`x = 0`).
    pub tn_terms: Vec<f64>,
    pub lambda: f64,
    pub q: f64,
}

/// With `p0 = (1 - q)^L'` the probability that all `L'` new code entries at a
/// position are zero:
/// `fn_terms[L'] = log(p0 s(-lambda) + (1 - p0) s(lambda))` and
/// `tn_terms[L'] = log(p0 s(lambda) + (1 - p0) s(-lambda))`.
pub fn build_bracket_table(lambda: f64, q: f64, lprime_max: usize) -> BracketTable {
    let hit = sigmoid(lambda);
    let miss = sigmoid(-lambda);
    let mut fn_terms = Vec::with_capacity(lprime_max);
    let mut tn_terms = Vec::with_capacity(lprime_max);
    for k in 0..lprime_max {
        let p0 = (1.0 - q).powi(k as i32);
        if k == 0 {
            fn_terms.push(log_sigmoid(-lambda));
            tn_terms.push(log_sigmoid(lambda));
        } else {
            fn_terms.push((p0 * miss + (1.0 - p0) * hit).ln());
            tn_terms.push((p0 * hit + (1.0 - p0) * miss).ln());
        }
    }
    BracketTable {
        fn_terms,
        tn_terms,
        lambda,
        q,
    }
}

pub fn poisson_log_pmf(k: usize, rate: f64) -> f64 {
    let log_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    if k == 0 {
        -rate
    } else {
        k as f64 * rate.ln() - rate - log_fact
    }
}

/// Unnormalised log posterior of `L' = 0..table.len()` new columns for a row
/// with `tn` true and `fn_` false negatives, under a `Poisson(alpha / n_rows)`
/// prior. Terms from positive predictions are omitted; they are the same for
/// every `L'`.
pub fn new_dish_log_weights_from_counts(
    tn: usize,
    fn_: usize,
    table: &BracketTable,
    alpha: f64,
    n_rows: usize,
) -> Vec<f64> {
    let rate = alpha / n_rows as f64;
    table
        .fn_terms
        .iter()
        .zip(&table.tn_terms)
        .enumerate()
        .map(|(k, (a, b))| poisson_log_pmf(k, rate) + fn_ as f64 * a + tn as f64 * b)
        .collect()
}

/// Exponentiates log weights after subtracting their maximum and normalises.
pub fn normalize_log_weights(log_w: &[f64]) -> Vec<f64> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

fn draw_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Draws a matrix from the IBP by the sequential customer construction.
pub fn sample_ibp_prior(n_rows: usize, alpha: f64, rng: &mut impl Rng) -> BinaryMatrix {
    let mut z = BinaryMatrix::with_col_capacity(n_rows, 0, 64);
    let mut m: Vec<usize> = Vec::new();
    for i in 0..n_rows {
        let customer = (i + 1) as f64;
        for (l, count) in m.iter_mut().enumerate() {
            if rng.random::<f64>() < *count as f64 / customer {
                z.set(i, l, true);
                *count += 1;
            }
        }
        let rate = alpha / customer;
        let new = if rate > 0.0 {
            Poisson::new(rate).expect("positive rate").sample(rng) as usize
        } else {
            0
        };
        let start = z.n_cols();
        z.push_cols(new);
        for l in start..start + new {
            z.set(i, l, true);
            m.push(1);
        }
    }
    z
}

/// Sampler state. `U` is kept transposed (`L x D`) so that its codes can be
/// added and removed as whole rows while `Z` is swept.
pub struct IbpSampler<'a> {
    x: &'a BinaryMatrix,
    xt: BinaryMatrix,
    config: IbpConfig,
    z: BinaryMatrix,
    ut: BinaryMatrix,
    lambda: NoiseParam,
    counts: Vec<usize>,
    table: BracketTable,
    sweeps: u64,
}

impl<'a> IbpSampler<'a> {
    /// Starts from an empty factorisation (`L = 0`).
    pub fn new(x: &'a BinaryMatrix, config: IbpConfig) -> Result<Self> {
        config.validate()?;
        check_data(x)?;
        let state = ModelState::new(
            BinaryMatrix::zeros(x.n_rows(), 0),
            BinaryMatrix::zeros(x.n_cols(), 0),
            NoiseParam::new(config.lambda_init)?,
        )?;
        Self::from_state(x, config, state)
    }

    pub fn from_state(x: &'a BinaryMatrix, config: IbpConfig, state: ModelState) -> Result<Self> {
        config.validate()?;
        check_data(x)?;
        if state.z.n_rows() != x.n_rows() || state.u.n_rows() != x.n_cols() {
            return Err(Error::Shape("factors do not fit the data".into()));
        }
        let mut z = BinaryMatrix::with_col_capacity(x.n_rows(), 0, 64);
        z.push_cols(state.latent());
        for (r, c) in state.z.iter_ones() {
            z.set(r, c, true);
        }
        let counts = ColumnCounts::from_z(&z).0;
        let table = build_bracket_table(state.lambda.get(), config.q, config.lprime_max);
        Ok(IbpSampler {
            x,
            xt: x.transpose(),
            ut: state.u.transpose(),
            lambda: state.lambda,
            config,
            z,
            counts,
            table,
            sweeps: 0,
        })
    }

    pub fn latent(&self) -> usize {
        self.z.n_cols()
    }

    pub fn lambda(&self) -> NoiseParam {
        self.lambda
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn config(&self) -> &IbpConfig {
        &self.config
    }

    pub fn table(&self) -> &BracketTable {
        &self.table
    }

    pub fn z(&self) -> &BinaryMatrix {
        &self.z
    }

    pub fn column_counts(&self) -> ColumnCounts {
        ColumnCounts(self.counts.clone())
    }

    pub fn state(&self) -> ModelState {
        ModelState {
            z: self.z.clone(),
            u: self.ut.transpose(),
            lambda: self.lambda,
        }
    }

    pub fn counts(&self) -> PredictionCounts {
        prediction_counts_t(self.x, &self.z, &self.ut)
    }

    fn m_without(&self, n: usize, l: usize) -> usize {
        self.counts[l] - usize::from(self.z.get(n, l))
    }

    /// `p(z[n][l] = 1 | rest)` for a column used by at least one other row.
    pub fn existing_code_prob_one(&self, n: usize, l: usize) -> Result<f64> {
        if n >= self.z.n_rows() || l >= self.latent() {
            return Err(Error::Index(format!("({n}, {l})")));
        }
        let m = self.m_without(n, l);
        if m == 0 {
            return Err(Error::Singleton { row: n, col: l });
        }
        let mut kernel = RowKernel::new(self.x.row_len_words());
        let row = self.z.row_words(n);
        kernel.cover(row, &self.ut);
        let e = kernel.evidence(self.x.row_words(n), self.ut.row_words(l), get_bit(row, l));
        let prior = logit(m as f64 / self.z.n_rows() as f64);
        Ok(sigmoid(prior + self.lambda.get() * e as f64))
    }

    fn remove_column(&mut self, l: usize) {
        self.z.remove_col(l);
        self.ut.remove_row(l);
        self.counts.remove(l);
    }

    /// Drops every column whose only one is in row `n`. Returns how many
    /// were removed.
    pub fn prune_singletons(&mut self, n: usize) -> usize {
        let mut removed = 0;
        for l in (0..self.latent()).rev() {
            if self.m_without(n, l) == 0 {
                self.remove_column(l);
                removed += 1;
            }
        }
        removed
    }

    /// Current `(tn, fn_)` of row `n`.
    pub fn row_negatives(&self, n: usize) -> (usize, usize) {
        let mut cover = vec![0u64; self.x.row_len_words()];
        active_coverage(self.z.row_words(n), &self.ut, &mut cover);
        let c = row_counts(self.x.row_words(n), &cover, self.x.n_cols());
        (c.tn, c.fn_)
    }

    pub fn new_dish_log_weights(&self, n: usize) -> Vec<f64> {
        let (tn, fn_) = self.row_negatives(n);
        new_dish_log_weights_from_counts(tn, fn_, &self.table, self.config.alpha, self.z.n_rows())
    }

    fn refresh_table(&mut self) {
        if self.table.lambda != self.lambda.get() || self.table.q != self.config.q {
            self.table = build_bracket_table(self.lambda.get(), self.config.q, self.config.lprime_max);
        }
    }

    /// Draws the number of new columns for row `n`, appends them with
    /// `z[n][new] = 1`, and fills their codes by one conditional pass.
    /// Returns the number added.
    pub fn sample_new_dishes(&mut self, n: usize, rng: &mut StreamRng) -> usize {
        let (tn, fn_) = self.row_negatives(n);
        self.add_new_dishes(n, tn, fn_, rng)
    }

    fn add_new_dishes(&mut self, n: usize, tn: usize, fn_: usize, rng: &mut StreamRng) -> usize {
        let log_w = new_dish_log_weights_from_counts(
            tn,
            fn_,
            &self.table,
            self.config.alpha,
            self.z.n_rows(),
        );
        let k = draw_index(&normalize_log_weights(&log_w), rng);
        if k == 0 {
            return 0;
        }

        let old = self.latent();
        let width = self.x.row_len_words();
        let mut cover = vec![0u64; width];
        active_coverage(self.z.row_words(n), &self.ut, &mut cover);

        self.z.push_cols(k);
        for l in old..old + k {
            self.z.set(n, l, true);
        }
        self.counts.extend(std::iter::repeat_n(1, k));
        self.ut.push_zero_rows(k);

        let lambda = self.lambda.get();
        let prior = logit(self.config.q);
        let p_blocked = sigmoid(prior);
        let p_one = sigmoid(lambda + prior);
        let p_zero = sigmoid(-lambda + prior);
        let x = self.x.row_words(n);
        let d_total = self.x.n_cols();
        let mut others = vec![0u64; width];
        for j in old..old + k {
            others.copy_from_slice(&cover);
            for jj in old..old + k {
                if jj != j {
                    for (o, w) in others.iter_mut().zip(self.ut.row_words(jj)) {
                        *o |= w;
                    }
                }
            }
            let code = self.ut.row_words_mut(j);
            for d in 0..d_total {
                let p = if get_bit(&others, d) {
                    p_blocked
                } else if get_bit(x, d) {
                    p_one
                } else {
                    p_zero
                };
                set_bit(code, d, rng.random::<f64>() < p);
            }
        }
        k
    }

    /// Full update of row `n`: prune, resample shared columns, add new ones.
    pub(crate) fn update_row(&mut self, n: usize, rng: &mut StreamRng, kernel: &mut RowKernel) {
        self.prune_singletons(n);
        let n_rows = self.z.n_rows() as f64;
        let m_without: Vec<usize> = (0..self.latent()).map(|l| self.m_without(n, l)).collect();
        let priors: Vec<f64> = m_without.iter().map(|&m| logit(m as f64 / n_rows)).collect();
        let x = self.x.row_words(n);
        let row = self.z.row_words_mut(n);
        kernel.update_row(x, row, &self.ut, self.lambda.get(), |l| priors[l], rng);
        for (l, m) in m_without.into_iter().enumerate() {
            self.counts[l] = m + usize::from(self.z.get(n, l));
        }
        let c = row_counts(self.x.row_words(n), kernel.covered(), self.x.n_cols());
        self.add_new_dishes(n, c.tn, c.fn_, rng);
    }

    /// Sweeps every row of `Z` in order, then all of `U`, then updates the
    /// noise level.
    pub fn sweep(&mut self) {
        self.refresh_table();
        let mut kernel = RowKernel::new(self.x.row_len_words());
        let rows = RowStreams::new(self.config.seed, self.sweeps, StreamTag::IbpRow);
        for n in 0..self.z.n_rows() {
            let mut rng = rows.row(n);
            self.update_row(n, &mut rng, &mut kernel);
        }

        let mut u = self.ut.transpose();
        let zt = self.z.transpose();
        let streams = RowStreams::new(self.config.seed, self.sweeps, StreamTag::SweepU);
        sweep_rows(&self.xt, &mut u, &zt, self.lambda.get(), logit(self.config.q), streams);
        self.ut = u.transpose();

        self.lambda = lambda_mle(&self.counts());
        self.refresh_table();
        self.sweeps += 1;
    }

    pub fn snapshot(&self) -> Sample {
        if self.config.record_factors {
            Sample::from_state(&self.state(), true)
        } else {
            Sample {
                latent: self.latent(),
                lambda: self.lambda.get(),
                z: None,
                u: None,
            }
        }
    }
}

/// Runs `n_samples` sweeps from an empty factorisation and records those
/// after burn-in.
pub fn run_ibp(x: &BinaryMatrix, config: IbpConfig) -> Result<Chain> {
    let mut sampler = IbpSampler::new(x, config.clone())?;
    let mut samples = Vec::with_capacity(config.n_samples - config.burn_in);
    for i in 0..config.n_samples {
        sampler.sweep();
        if i >= config.burn_in {
            samples.push(sampler.snapshot());
        }
    }
    Chain::new(x.n_rows(), x.n_cols(), config.burn_in, RunConfig::Ibp(config), samples)
}
