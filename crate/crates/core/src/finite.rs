//! Gibbs sampler for a fixed number of latent dimensions.
//!
//! The full conditional of a single factor entry only sees the data entries
//! its code can still change: positions where the code is set and no other
//! active code of the same row already emits a one. Both conditions are
//! evaluated a word at a time from two coverage masks (`once`: covered by at
//! least one active code, `twice`: by at least two).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitmat::{
    get_bit, intersects, prediction_counts_t, set_bit, BinaryMatrix, BitRow, PredictionCounts,
    WORD_BITS,
};
use crate::error::{Error, Result};
use crate::likelihood::{lambda_mle, logit, sigmoid, NoiseParam, LAMBDA_INIT};
use crate::posterior::{Chain, RunConfig, Sample};
use crate::rng::{stream_rng, RowStreams, StreamRng, StreamTag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteConfig {
    pub latent: usize,
    pub prior_z: f64,
    pub prior_u: f64,
    pub n_samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub lambda_init: f64,
    /// Keep factor snapshots in the chain, not just the traces.
    pub record_factors: bool,
}

impl FiniteConfig {
    pub fn new(latent: usize) -> Self {
        FiniteConfig {
            latent,
            prior_z: 0.5,
            prior_u: 0.5,
            n_samples: 200,
            burn_in: 100,
            seed: 0,
            lambda_init: LAMBDA_INIT,
            record_factors: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent == 0 {
            return Err(Error::Config("latent dimension must be at least 1".into()));
        }
        for (name, p) in [("prior_z", self.prior_z), ("prior_u", self.prior_u)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {p}")));
            }
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

/// Current factors and noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// `N x L`
    pub z: BinaryMatrix,
    /// `D x L`
    pub u: BinaryMatrix,
    pub lambda: NoiseParam,
}

impl ModelState {
    pub fn new(z: BinaryMatrix, u: BinaryMatrix, lambda: NoiseParam) -> Result<Self> {
        if z.n_cols() != u.n_cols() {
            return Err(Error::Shape(format!(
                "Z has {} columns, U has {}",
                z.n_cols(),
                u.n_cols()
            )));
        }
        Ok(ModelState { z, u, lambda })
    }

    pub fn latent(&self) -> usize {
        self.z.n_cols()
    }
}

/// Probability that `z[l] = 1` given the rest of the row, the codes `u`
/// (`D x L`), the data row and the prior log-odds.
///
/// Data positions where `u[d][l] = 0`, or where another active code already
/// covers `d`, contribute nothing and are skipped.
pub fn conditional_prob_one(
    x_row: BitRow<'_>,
    z_row: BitRow<'_>,
    u: &BinaryMatrix,
    l: usize,
    lambda: f64,
    prior_logit: f64,
) -> Result<f64> {
    if l >= z_row.len() {
        return Err(Error::Index(format!(
            "latent index {l} with {} latent dimensions",
            z_row.len()
        )));
    }
    if x_row.len() != u.n_rows() || z_row.len() != u.n_cols() {
        return Err(Error::Shape(format!(
            "row lengths ({}, {}) do not match U {}x{}",
            x_row.len(),
            z_row.len(),
            u.n_rows(),
            u.n_cols()
        )));
    }
    let mut others = z_row.words().to_vec();
    set_bit(&mut others, l, false);
    let mut evidence: i64 = 0;
    for d in 0..u.n_rows() {
        if !u.get(d, l) || intersects(&others, u.row(d).words()) {
            continue;
        }
        evidence += if x_row.get(d) { 1 } else { -1 };
    }
    Ok(sigmoid(lambda * evidence as f64 + prior_logit))
}

/// Scratch state for updating one factor row against a set of codes.
pub(crate) struct RowKernel {
    once: Vec<u64>,
    twice: Vec<u64>,
}

impl RowKernel {
    pub(crate) fn new(width_words: usize) -> Self {
        RowKernel {
            once: vec![0; width_words],
            twice: vec![0; width_words],
        }
    }

    /// Recomputes the coverage masks for the active codes of `factor_row`.
    /// `codes_t` is `L x D`.
    pub(crate) fn cover(&mut self, factor_row: &[u64], codes_t: &BinaryMatrix) {
        self.once.fill(0);
        self.twice.fill(0);
        for (wi, &w) in factor_row.iter().enumerate() {
            let mut bits = w;
            while bits != 0 {
                let l = wi * WORD_BITS + bits.trailing_zeros() as usize;
                self.add_code(codes_t.row_words(l));
                bits &= bits - 1;
            }
        }
    }

    #[inline]
    pub(crate) fn add_code(&mut self, code: &[u64]) {
        for ((o, t), c) in self.once.iter_mut().zip(self.twice.iter_mut()).zip(code) {
            *t |= *o & c;
            *o |= c;
        }
    }

    /// Positions covered by at least one active code.
    pub(crate) fn covered(&self) -> &[u64] {
        &self.once
    }

    /// Sum of `2x - 1` over positions only `code` could switch.
    #[inline]
    pub(crate) fn evidence(&self, x: &[u64], code: &[u64], code_active: bool) -> i64 {
        let other = if code_active { &self.twice } else { &self.once };
        let mut hits = 0u32;
        let mut total = 0u32;
        for ((c, o), xw) in code.iter().zip(other).zip(x) {
            let free = c & !o;
            hits += (free & xw).count_ones();
            total += free.count_ones();
        }
        2 * hits as i64 - total as i64
    }

    /// Resamples every entry of `factor_row` in ascending order.
    pub(crate) fn update_row(
        &mut self,
        x: &[u64],
        factor_row: &mut [u64],
        codes_t: &BinaryMatrix,
        lambda: f64,
        prior_logit: impl Fn(usize) -> f64,
        rng: &mut StreamRng,
    ) {
        self.cover(factor_row, codes_t);
        for l in 0..codes_t.n_rows() {
            let active = get_bit(factor_row, l);
            let code = codes_t.row_words(l);
            let e = self.evidence(x, code, active);
            let p = sigmoid(lambda * e as f64 + prior_logit(l));
            let draw = rng.random::<f64>() < p;
            if draw != active {
                set_bit(factor_row, l, draw);
                if draw {
                    self.add_code(code);
                } else {
                    self.cover(factor_row, codes_t);
                }
            }
        }
    }
}

/// Resamples every row of `factor` in parallel. `data` holds one row per
/// factor row; `codes_t` is the other factor transposed (`L x data cols`).
pub(crate) fn sweep_rows(
    data: &BinaryMatrix,
    factor: &mut BinaryMatrix,
    codes_t: &BinaryMatrix,
    lambda: f64,
    prior_logit: f64,
    streams: RowStreams,
) {
    debug_assert_eq!(data.n_rows(), factor.n_rows());
    debug_assert_eq!(data.n_cols(), codes_t.n_cols());
    debug_assert_eq!(factor.n_cols(), codes_t.n_rows());
    let used = factor.row_len_words();
    let width = data.row_len_words();
    factor
        .par_row_chunks_mut()
        .enumerate()
        .for_each_init(
            || RowKernel::new(width),
            |kernel, (r, chunk)| {
                let mut rng = streams.row(r);
                kernel.update_row(
                    data.row_words(r),
                    &mut chunk[..used],
                    codes_t,
                    lambda,
                    |_| prior_logit,
                    &mut rng,
                );
            },
        );
}

/// Resamples all of `Z` given `U` and the noise level.
pub fn sweep_z(x: &BinaryMatrix, state: &mut ModelState, prior_logit: f64, streams: RowStreams) {
    let ut = state.u.transpose();
    sweep_rows(x, &mut state.z, &ut, state.lambda.get(), prior_logit, streams);
}

/// Resamples all of `U` given `Z`; `xt` is the data transposed (`D x N`).
pub fn sweep_u(xt: &BinaryMatrix, state: &mut ModelState, prior_logit: f64, streams: RowStreams) {
    let zt = state.z.transpose();
    sweep_rows(xt, &mut state.u, &zt, state.lambda.get(), prior_logit, streams);
}

pub(crate) fn check_data(x: &BinaryMatrix) -> Result<()> {
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(Error::Empty(format!(
            "data matrix is {}x{}",
            x.n_rows(),
            x.n_cols()
        )));
    }
    Ok(())
}

pub struct FiniteSampler<'a> {
    x: &'a BinaryMatrix,
    xt: BinaryMatrix,
    config: FiniteConfig,
    state: ModelState,
    sweeps: u64,
}

impl<'a> FiniteSampler<'a> {
    /// Starts from iid Bernoulli(1/2) factors drawn from the configured seed.
    pub fn new(x: &'a BinaryMatrix, config: FiniteConfig) -> Result<Self> {
        config.validate()?;
        check_data(x)?;
        let mut rng = stream_rng(config.seed, 0, StreamTag::Init, 0);
        let z = BinaryMatrix::from_fn(x.n_rows(), config.latent, |_, _| rng.random_bool(0.5));
        let u = BinaryMatrix::from_fn(x.n_cols(), config.latent, |_, _| rng.random_bool(0.5));
        let state = ModelState::new(z, u, NoiseParam::new(config.lambda_init)?)?;
        Self::with_state(x, config, state)
    }

    pub fn with_state(x: &'a BinaryMatrix, config: FiniteConfig, state: ModelState) -> Result<Self> {
        config.validate()?;
        check_data(x)?;
        if state.z.n_rows() != x.n_rows() || state.u.n_rows() != x.n_cols() {
            return Err(Error::Shape(format!(
                "factors {}x{} / {}x{} do not fit data {}x{}",
                state.z.n_rows(),
                state.z.n_cols(),
                state.u.n_rows(),
                state.u.n_cols(),
                x.n_rows(),
                x.n_cols()
            )));
        }
        Ok(FiniteSampler {
            x,
            xt: x.transpose(),
            config,
            state,
            sweeps: 0,
        })
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn config(&self) -> &FiniteConfig {
        &self.config
    }

    pub fn sweeps(&self) -> u64 {
        self.sweeps
    }

    pub fn sweep_z(&mut self) {
        let streams = RowStreams::new(self.config.seed, self.sweeps, StreamTag::SweepZ);
        sweep_z(self.x, &mut self.state, logit(self.config.prior_z), streams);
    }

    pub fn sweep_u(&mut self) {
        let streams = RowStreams::new(self.config.seed, self.sweeps, StreamTag::SweepU);
        sweep_u(&self.xt, &mut self.state, logit(self.config.prior_u), streams);
    }

    pub fn counts(&self) -> PredictionCounts {
        prediction_counts_t(self.x, &self.state.z, &self.state.u.transpose())
    }

    /// One sweep over `Z`, one over `U`, then the noise update.
    pub fn step(&mut self) {
        self.sweep_z();
        self.sweep_u();
        self.state.lambda = lambda_mle(&self.counts());
        self.sweeps += 1;
    }

    pub fn snapshot(&self) -> Sample {
        Sample::from_state(&self.state, self.config.record_factors)
    }
}

/// Runs `n_samples` Gibbs steps and records those after burn-in.
pub fn run_finite(x: &BinaryMatrix, config: FiniteConfig) -> Result<Chain> {
    let mut sampler = FiniteSampler::new(x, config.clone())?;
    let mut samples = Vec::with_capacity(config.n_samples - config.burn_in);
    for i in 0..config.n_samples {
        sampler.step();
        if i >= config.burn_in {
            samples.push(sampler.snapshot());
        }
    }
    Chain::new(
        x.n_rows(),
        x.n_cols(),
        config.burn_in,
        RunConfig::Finite(config),
        samples,
    )
}
