//! Python bindings for `ibpbmf`.
//!
//! Matrices cross the boundary as nested lists of 0/1 integers. Long-running
//! samplers release the interpreter lock while they work.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;

use ibpbmf::io::{DatasetSpec, MatrixFormat};
use ibpbmf::likelihood::{lambda_mle_with, NoiseParam};
use ibpbmf::posterior::{l_summary, marginal_mean_z, reconstruction_error};
use ibpbmf::{Error, FiniteConfig, IbpConfig};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Index(_) => PyIndexError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_format(format: Option<&str>, path: &std::path::Path) -> PyResult<MatrixFormat> {
    match format {
        Some(f) => f.parse().map_err(PyValueError::new_err),
        None => Ok(MatrixFormat::from_extension(path)),
    }
}

/// Bit-packed binary matrix.
#[pyclass(name = "BinaryMatrix", module = "pyibpbmf", eq, from_py_object)]
#[derive(Clone, PartialEq)]
pub struct PyBinaryMatrix {
    inner: ibpbmf::BinaryMatrix,
}

impl From<ibpbmf::BinaryMatrix> for PyBinaryMatrix {
    fn from(inner: ibpbmf::BinaryMatrix) -> Self {
        PyBinaryMatrix { inner }
    }
}

#[pymethods]
impl PyBinaryMatrix {
    /// Builds a matrix from a list of equal-length rows of 0/1 values.
    #[new]
    fn new(rows: Vec<Vec<i64>>) -> PyResult<Self> {
        let mut bytes = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (c, &v) in row.iter().enumerate() {
                match v {
                    0 | 1 => out.push(v as u8),
                    _ => {
                        return Err(PyValueError::new_err(format!(
                            "entry ({r}, {c}) is {v}, expected 0 or 1"
                        )))
                    }
                }
            }
            bytes.push(out);
        }
        ibpbmf::BinaryMatrix::from_rows(&bytes)
            .map(Into::into)
            .map_err(to_py)
    }

    #[staticmethod]
    fn zeros(n_rows: usize, n_cols: usize) -> Self {
        ibpbmf::BinaryMatrix::zeros(n_rows, n_cols).into()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    fn get(&self, row: usize, col: usize) -> PyResult<bool> {
        self.check(row, col)?;
        Ok(self.inner.get(row, col))
    }

    fn set(&mut self, row: usize, col: usize, value: bool) -> PyResult<()> {
        self.check(row, col)?;
        self.inner.set(row, col, value);
        Ok(())
    }

    fn count_ones(&self) -> usize {
        self.inner.count_ones()
    }

    fn density(&self) -> f64 {
        self.inner.density()
    }

    fn transpose(&self) -> Self {
        self.inner.transpose().into()
    }

    fn to_list(&self) -> Vec<Vec<u32>> {
        self.inner
            .to_rows()
            .into_iter()
            .map(|row| row.into_iter().map(u32::from).collect())
            .collect()
    }

    fn __repr__(&self) -> String {
        let (r, c) = self.inner.shape();
        format!("BinaryMatrix({r}x{c}, ones={})", self.inner.count_ones())
    }
}

impl PyBinaryMatrix {
    fn check(&self, row: usize, col: usize) -> PyResult<()> {
        let (r, c) = self.inner.shape();
        if row >= r || col >= c {
            return Err(PyIndexError::new_err(format!("({row}, {col}) outside {r}x{c}")));
        }
        Ok(())
    }
}

/// Recorded post-burn-in samples of a run.
#[pyclass(name = "Chain", module = "pyibpbmf")]
pub struct PyChain {
    inner: ibpbmf::Chain,
}

#[pymethods]
impl PyChain {
    #[getter]
    fn l_trace(&self) -> Vec<usize> {
        self.inner.latent_trace()
    }

    #[getter]
    fn lambda_trace(&self) -> Vec<f64> {
        self.inner.lambda_trace()
    }

    #[getter]
    fn burn_in(&self) -> usize {
        self.inner.burn_in
    }

    fn __len__(&self) -> usize {
        self.inner.samples.len()
    }

    /// Mode, mean and histogram of the latent dimension.
    fn l_summary(&self) -> PyResult<(usize, f64, BTreeMap<usize, f64>)> {
        let s = l_summary(&self.inner).map_err(to_py)?;
        Ok((s.mode, s.mean, s.histogram))
    }

    /// Posterior mean of `Z` after aligning columns to a modal sample.
    fn marginal_mean_z(&self) -> PyResult<Vec<Vec<f64>>> {
        Ok(marginal_mean_z(&self.inner).map_err(to_py)?.to_rows())
    }

    /// Factors `(Z, U)` of sample `index`, or `None` if only traces were kept.
    fn factors(&self, index: usize) -> PyResult<Option<(PyBinaryMatrix, PyBinaryMatrix)>> {
        let sample = self
            .inner
            .samples
            .get(index)
            .ok_or_else(|| PyIndexError::new_err(format!("sample {index} out of range")))?;
        Ok(sample
            .factors()
            .map(|(z, u)| (z.clone().into(), u.clone().into())))
    }

    /// Fraction of entries of `x` that the modal reference sample gets wrong.
    fn reconstruction_error(&self, x: &PyBinaryMatrix) -> PyResult<f64> {
        let i = self.inner.reference_index().map_err(to_py)?;
        let (z, u) = self.inner.samples[i]
            .factors()
            .ok_or_else(|| PyValueError::new_err("chain holds traces only"))?;
        reconstruction_error(&x.inner, z, u).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        ibpbmf::io::save_chain(&self.inner, path).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Chain({}x{}, {} samples)",
            self.inner.n_rows,
            self.inner.n_cols,
            self.inner.samples.len()
        )
    }
}

#[pyfunction]
fn boolean_product(z: &PyBinaryMatrix, u: &PyBinaryMatrix) -> PyResult<PyBinaryMatrix> {
    ibpbmf::boolean_product(&z.inner, &u.inner)
        .map(Into::into)
        .map_err(to_py)
}

/// Returns a dict with keys `tp`, `fp`, `tn`, `fn`.
#[pyfunction]
fn prediction_counts(
    x: &PyBinaryMatrix,
    z: &PyBinaryMatrix,
    u: &PyBinaryMatrix,
) -> PyResult<BTreeMap<&'static str, usize>> {
    let c = ibpbmf::prediction_counts(&x.inner, &z.inner, &u.inner).map_err(to_py)?;
    Ok(BTreeMap::from([("tp", c.tp), ("fp", c.fp), ("tn", c.tn), ("fn", c.fn_)]))
}

#[pyfunction]
fn log_likelihood(
    x: &PyBinaryMatrix,
    z: &PyBinaryMatrix,
    u: &PyBinaryMatrix,
    lam: f64,
) -> PyResult<f64> {
    let lam = NoiseParam::new(lam).map_err(to_py)?;
    ibpbmf::likelihood::log_likelihood(&x.inner, &z.inner, &u.inner, lam).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (correct, wrong, smoothed = true))]
fn lambda_mle(correct: usize, wrong: usize, smoothed: bool) -> f64 {
    let counts = ibpbmf::PredictionCounts {
        tp: correct,
        fp: wrong,
        tn: 0,
        fn_: 0,
    };
    lambda_mle_with(&counts, smoothed).get()
}

/// Planted dataset. Returns `(x, z_true, u_true)`.
#[pyfunction]
#[pyo3(signature = (rows, cols, latent, seed = 0, noise = 0.0, density = 0.5))]
fn generate(
    rows: usize,
    cols: usize,
    latent: usize,
    seed: u64,
    noise: f64,
    density: f64,
) -> PyResult<(PyBinaryMatrix, PyBinaryMatrix, PyBinaryMatrix)> {
    let ds = ibpbmf::synth::generate_with_density(rows, cols, latent, density, seed)
        .and_then(|d| d.with_noise(noise, seed))
        .map_err(to_py)?;
    Ok((ds.x.into(), ds.z_true.into(), ds.u_true.into()))
}

#[pyfunction]
#[pyo3(signature = (
    x, latent, samples = 200, burn_in = 100, seed = 0,
    prior_z = 0.5, prior_u = 0.5, record_factors = true
))]
#[allow(clippy::too_many_arguments)]
fn run_finite(
    py: Python<'_>,
    x: &PyBinaryMatrix,
    latent: usize,
    samples: usize,
    burn_in: usize,
    seed: u64,
    prior_z: f64,
    prior_u: f64,
    record_factors: bool,
) -> PyResult<PyChain> {
    let config = FiniteConfig {
        prior_z,
        prior_u,
        n_samples: samples,
        burn_in,
        seed,
        record_factors,
        ..FiniteConfig::new(latent)
    };
    let x = &x.inner;
    let chain = py.detach(|| ibpbmf::run_finite(x, config)).map_err(to_py)?;
    Ok(PyChain { inner: chain })
}

#[pyfunction]
#[pyo3(signature = (
    x, alpha = 1.0, q = 0.5, lprime_max = 10, samples = 200, burn_in = 100,
    seed = 0, record_factors = true
))]
#[allow(clippy::too_many_arguments)]
fn run_ibp(
    py: Python<'_>,
    x: &PyBinaryMatrix,
    alpha: f64,
    q: f64,
    lprime_max: usize,
    samples: usize,
    burn_in: usize,
    seed: u64,
    record_factors: bool,
) -> PyResult<PyChain> {
    let config = IbpConfig {
        alpha,
        q,
        lprime_max,
        n_samples: samples,
        burn_in,
        seed,
        record_factors,
        ..IbpConfig::default()
    };
    let x = &x.inner;
    let chain = py.detach(|| ibpbmf::run_ibp(x, config)).map_err(to_py)?;
    Ok(PyChain { inner: chain })
}

/// Reads a matrix. Entries above `threshold` become ones; with
/// `threshold=None` every entry must already be 0 or 1.
#[pyfunction]
#[pyo3(signature = (path, format = None, threshold = Some(0.0)))]
fn load(path: PathBuf, format: Option<&str>, threshold: Option<f64>) -> PyResult<PyBinaryMatrix> {
    let format = parse_format(format, &path)?;
    let spec = DatasetSpec {
        path,
        format,
        binarize_threshold: threshold,
    };
    ibpbmf::io::load(&spec).map(Into::into).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (m, path, format = None))]
fn save(m: &PyBinaryMatrix, path: PathBuf, format: Option<&str>) -> PyResult<()> {
    let format = parse_format(format, &path)?;
    ibpbmf::io::save_matrix(&m.inner, &path, format).map_err(to_py)
}

#[pyfunction]
fn load_chain(path: PathBuf) -> PyResult<PyChain> {
    let inner = ibpbmf::io::load_chain(path).map_err(to_py)?;
    Ok(PyChain { inner })
}

#[pymodule]
fn pyibpbmf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBinaryMatrix>()?;
    m.add_class::<PyChain>()?;
    m.add_function(wrap_pyfunction!(boolean_product, m)?)?;
    m.add_function(wrap_pyfunction!(prediction_counts, m)?)?;
    m.add_function(wrap_pyfunction!(log_likelihood, m)?)?;
    m.add_function(wrap_pyfunction!(lambda_mle, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(run_finite, m)?)?;
    m.add_function(wrap_pyfunction!(run_ibp, m)?)?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    m.add_function(wrap_pyfunction!(save, m)?)?;
    m.add_function(wrap_pyfunction!(load_chain, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
