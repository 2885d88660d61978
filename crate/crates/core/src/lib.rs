//! Probabilistic Boolean matrix factorisation by Gibbs sampling.
//!
//! Binary data `X` (`N x D`) is modelled as the Boolean product of two
//! binary factors, `Z` (`N x L`) and `U` (`D x L`), observed through
//! symmetric bit-flip noise. Two samplers are provided: [`finite`] for a
//! fixed `L`, and [`ibp`] which places an Indian Buffet Process prior on
//! `Z` and infers `L`.

pub mod bitmat;
pub mod cli;
pub mod error;
pub mod finite;
pub mod ibp;
pub mod io;
pub mod likelihood;
pub mod posterior;
pub mod rng;
pub mod synth;

pub use bitmat::{boolean_product, prediction_counts, BinaryMatrix, BitRow, BitVector, PredictionCounts};
pub use error::{Error, Result};
pub use finite::{run_finite, FiniteConfig, FiniteSampler, ModelState};
pub use ibp::{run_ibp, IbpConfig, IbpSampler};
pub use likelihood::NoiseParam;
pub use posterior::{Chain, LSummary, RunConfig, Sample};
pub use synth::SyntheticDataset;
