//! Synthetic data: planted Boolean factorisations and bit-flip noise.

use rand::Rng;

use crate::bitmat::{boolean_product, BinaryMatrix};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamTag};

const MAX_COLUMN_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub x: BinaryMatrix,
    pub z_true: BinaryMatrix,
    pub u_true: BinaryMatrix,
    pub noise_level: f64,
    pub seed: u64,
}

/// Factor density `d` for which iid Bernoulli(d) factors of rank `latent`
/// give an expected data density of `target`: `1 - (1 - d^2)^L = target`.
pub fn factor_density_for(latent: usize, target: f64) -> Result<f64> {
    if latent == 0 {
        return Err(Error::Config("latent dimension must be at least 1".into()));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Config(format!("target density must lie in (0, 1), got {target}")));
    }
    Ok((1.0 - (1.0 - target).powf(1.0 / latent as f64)).sqrt())
}

/// Factor density giving data with half its entries set.
pub fn balanced_factor_density(latent: usize) -> Result<f64> {
    factor_density_for(latent, 0.5)
}

/// Draws an `rows x cols` Bernoulli(p) matrix, redrawing any column that comes
/// out all zero.
fn bernoulli_factor(rows: usize, cols: usize, p: f64, rng: &mut impl Rng) -> BinaryMatrix {
    let mut m = BinaryMatrix::zeros(rows, cols);
    for c in 0..cols {
        for _ in 0..MAX_COLUMN_RETRIES {
            for r in 0..rows {
                m.set(r, c, rng.random_bool(p));
            }
            if m.col_count_ones(c) > 0 {
                break;
            }
        }
    }
    m
}

/// Planted dataset with balanced density.
pub fn generate(rows: usize, cols: usize, latent: usize, seed: u64) -> Result<SyntheticDataset> {
    generate_with_density(rows, cols, latent, 0.5, seed)
}

/// Planted dataset whose expected density is `target`.
pub fn generate_with_density(
    rows: usize,
    cols: usize,
    latent: usize,
    target: f64,
    seed: u64,
) -> Result<SyntheticDataset> {
    if rows == 0 || cols == 0 {
        return Err(Error::Config(format!("data must be nonempty, got {rows}x{cols}")));
    }
    let p = factor_density_for(latent, target)?;
    let mut rng = stream_rng(seed, 0, StreamTag::Synth, 0);
    let z_true = bernoulli_factor(rows, latent, p, &mut rng);
    let u_true = bernoulli_factor(cols, latent, p, &mut rng);
    let x = boolean_product(&z_true, &u_true)?;
    Ok(SyntheticDataset {
        x,
        z_true,
        u_true,
        noise_level: 0.0,
        seed,
    })
}

/// Flips each entry independently with probability `p_flip`.
pub fn add_noise(x: &BinaryMatrix, p_flip: f64, seed: u64) -> Result<BinaryMatrix> {
    if !(0.0..=0.5).contains(&p_flip) {
        return Err(Error::Config(format!("flip probability must lie in [0, 0.5], got {p_flip}")));
    }
    let mut rng = stream_rng(seed, 0, StreamTag::Noise, 0);
    let mut out = x.clone();
    if p_flip == 0.0 {
        return Ok(out);
    }
    for r in 0..x.n_rows() {
        for c in 0..x.n_cols() {
            if rng.random_bool(p_flip) {
                out.set(r, c, !x.get(r, c));
            }
        }
    }
    Ok(out)
}

impl SyntheticDataset {
    /// Returns the dataset with noise applied to `x`; the ground truth is kept.
    pub fn with_noise(mut self, p_flip: f64, seed: u64) -> Result<Self> {
        self.x = add_noise(&self.x, p_flip, seed)?;
        self.noise_level = p_flip;
        Ok(self)
    }
}
