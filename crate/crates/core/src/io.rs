//! Reading and writing matrices, chains and heatmaps.
//!
//! Matrix formats:
//!
//! * `dense-csv`: one line per row, comma-separated numbers.
//! * `sparse-coo`: a header line `N D`, then one `row col [value]` line per
//!   entry with zero-based indices. A missing value means 1.
//!
//! Numbers are treated as counts and binarised as `value > threshold`.
//!
//! A chain directory holds `chain.toml` (layout version, shape, run
//! configuration), `trace.csv` (`sample_index,L,lambda`) and, when factors
//! were recorded, `samples/z_<index>.coo` and `samples/u_<index>.coo`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bitmat::BinaryMatrix;
use crate::error::{Error, Result};
use crate::posterior::{Chain, RealMatrix, RunConfig, Sample};

pub const CHAIN_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFormat {
    DenseCsv,
    SparseCoo,
}

impl MatrixFormat {
    /// `.csv` files are dense, anything else sparse.
    pub fn from_extension(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => MatrixFormat::DenseCsv,
            _ => MatrixFormat::SparseCoo,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MatrixFormat::DenseCsv => "dense-csv",
            MatrixFormat::SparseCoo => "sparse-coo",
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dense-csv" | "dense" | "csv" => Ok(MatrixFormat::DenseCsv),
            "sparse-coo" | "sparse" | "coo" => Ok(MatrixFormat::SparseCoo),
            other => Err(format!("unknown matrix format '{other}' (expected dense-csv or sparse-coo)")),
        }
    }
}

impl std::fmt::Display for MatrixFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub format: MatrixFormat,
    /// `Some(t)`: entries `> t` become 1. `None`: entries must already be
    /// exactly 0 or 1.
    pub binarize_threshold: Option<f64>,
}

impl DatasetSpec {
    pub fn new(path: impl Into<PathBuf>, format: MatrixFormat) -> Self {
        DatasetSpec {
            path: path.into(),
            format,
            binarize_threshold: Some(0.0),
        }
    }
}

struct Binarizer<'a> {
    path: &'a Path,
    threshold: Option<f64>,
}

impl Binarizer<'_> {
    fn parse(&self, token: &str, line: usize) -> Result<bool> {
        let err = |msg: String| Error::Parse {
            path: self.path.to_path_buf(),
            line,
            msg,
        };
        let v: f64 = token
            .trim()
            .parse()
            .map_err(|_| err(format!("'{}' is not a number", token.trim())))?;
        if !v.is_finite() || v < 0.0 {
            return Err(err(format!("value {v} is not a nonnegative count")));
        }
        match self.threshold {
            Some(t) => Ok(v > t),
            None if v == 0.0 => Ok(false),
            None if v == 1.0 => Ok(true),
            None => Err(err(format!("value {v} is not binary"))),
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-blank lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_dense(text: &str, bin: &Binarizer<'_>) -> Result<BinaryMatrix> {
    let mut rows: Vec<Vec<u8>> = Vec::new();
    let mut width = None;
    for (line, content) in content_lines(text) {
        let row = content
            .split(',')
            .map(|t| bin.parse(t, line).map(u8::from))
            .collect::<Result<Vec<u8>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    path: bin.path.to_path_buf(),
                    line,
                    msg: format!("expected {w} values, found {}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::format(bin.path, "empty file"));
    }
    BinaryMatrix::from_rows(&rows)
}

fn parse_coo(text: &str, bin: &Binarizer<'_>, allow_empty_shape: bool) -> Result<BinaryMatrix> {
    let path = bin.path;
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| Error::format(path, "empty file"))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let parse_dim = |t: &str| {
        t.parse::<usize>()
            .map_err(|_| err(hline, format!("bad dimension '{t}' in header")))
    };
    let (n, d) = match dims.as_slice() {
        [a, b] => (parse_dim(a)?, parse_dim(b)?),
        _ => return Err(err(hline, "header must be 'N D'".into())),
    };
    if !allow_empty_shape && (n == 0 || d == 0) {
        return Err(err(hline, format!("empty matrix shape {n}x{d}")));
    }
    let mut m = BinaryMatrix::zeros(n, d);
    for (line, content) in lines {
        let fields: Vec<&str> = content.split_whitespace().collect();
        let (r, c, value) = match fields.as_slice() {
            [r, c] => (*r, *c, None),
            [r, c, v] => (*r, *c, Some(*v)),
            _ => return Err(err(line, "expected 'row col [value]'".into())),
        };
        let index = |t: &str, bound: usize, what: &str| -> Result<usize> {
            let i: usize = t
                .parse()
                .map_err(|_| err(line, format!("bad {what} index '{t}'")))?;
            if i >= bound {
                return Err(err(line, format!("{what} index {i} out of range for size {bound}")));
            }
            Ok(i)
        };
        let r = index(r, n, "row")?;
        let c = index(c, d, "column")?;
        let on = match value {
            Some(v) => bin.parse(v, line)?,
            None => true,
        };
        if on {
            m.set(r, c, true);
        }
    }
    Ok(m)
}

/// Reads a dataset and binarises it.
pub fn load(spec: &DatasetSpec) -> Result<BinaryMatrix> {
    if let Some(t) = spec.binarize_threshold {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::Config(format!("binarisation threshold must be finite and nonnegative, got {t}")));
        }
    }
    let text = read_text(&spec.path)?;
    let bin = Binarizer {
        path: &spec.path,
        threshold: spec.binarize_threshold,
    };
    match spec.format {
        MatrixFormat::DenseCsv => parse_dense(&text, &bin),
        MatrixFormat::SparseCoo => parse_coo(&text, &bin, false),
    }
}

/// Reads a matrix that is already 0/1, choosing the format by extension.
pub fn load_binary(path: impl AsRef<Path>) -> Result<BinaryMatrix> {
    let path = path.as_ref();
    load(&DatasetSpec {
        path: path.to_path_buf(),
        format: MatrixFormat::from_extension(path),
        binarize_threshold: None,
    })
}

fn dense_text(m: &BinaryMatrix) -> String {
    let mut out = String::with_capacity(m.n_rows() * (2 * m.n_cols() + 1));
    for r in 0..m.n_rows() {
        for (c, bit) in m.row(r).iter().enumerate() {
            if c > 0 {
                out.push(',');
            }
            out.push(if bit { '1' } else { '0' });
        }
        out.push('\n');
    }
    out
}

fn coo_text(m: &BinaryMatrix) -> String {
    let mut out = format!("{} {}\n", m.n_rows(), m.n_cols());
    for (r, c) in m.iter_ones() {
        let _ = writeln!(out, "{r} {c}");
    }
    out
}

pub fn save_matrix(m: &BinaryMatrix, path: impl AsRef<Path>, format: MatrixFormat) -> Result<()> {
    let path = path.as_ref();
    if m.n_rows() == 0 || m.n_cols() == 0 {
        return Err(Error::Empty(format!(
            "refusing to write a {}x{} matrix to {}",
            m.n_rows(),
            m.n_cols(),
            path.display()
        )));
    }
    let text = match format {
        MatrixFormat::DenseCsv => dense_text(m),
        MatrixFormat::SparseCoo => coo_text(m),
    };
    write_text(path, &text)
}

#[derive(Debug, Serialize, Deserialize)]
struct ChainHeader {
    format_version: u32,
    n_rows: usize,
    n_cols: usize,
    burn_in: usize,
    n_recorded: usize,
    has_factors: bool,
    config: RunConfig,
}

fn snapshot_path(dir: &Path, factor: char, index: usize) -> PathBuf {
    dir.join("samples").join(format!("{factor}_{index:06}.coo"))
}

/// Trace table with one row per recorded sample. Sample indices count sweeps
/// from zero, so the first row is `burn_in`.
pub fn trace_csv(chain: &Chain) -> String {
    let mut out = String::from("sample_index,L,lambda\n");
    for (i, s) in chain.samples.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", chain.burn_in + i, s.latent, s.lambda);
    }
    out
}

pub fn save_chain(chain: &Chain, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    if chain.samples.is_empty() {
        return Err(Error::Empty("chain has no samples".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let header = ChainHeader {
        format_version: CHAIN_FORMAT_VERSION,
        n_rows: chain.n_rows,
        n_cols: chain.n_cols,
        burn_in: chain.burn_in,
        n_recorded: chain.samples.len(),
        has_factors: chain.has_factors(),
        config: chain.config.clone(),
    };
    let toml = toml::to_string(&header).map_err(|e| Error::format(dir.join("chain.toml"), e.to_string()))?;
    write_text(&dir.join("chain.toml"), &toml)?;
    write_text(&dir.join("trace.csv"), &trace_csv(chain))?;
    if header.has_factors {
        let samples = dir.join("samples");
        fs::create_dir_all(&samples).map_err(|e| Error::io(&samples, e))?;
        for (i, s) in chain.samples.iter().enumerate() {
            let (z, u) = s.factors().expect("has_factors");
            let index = chain.burn_in + i;
            write_text(&snapshot_path(dir, 'z', index), &coo_text(z))?;
            write_text(&snapshot_path(dir, 'u', index), &coo_text(u))?;
        }
    }
    Ok(())
}

pub fn load_chain(dir: impl AsRef<Path>) -> Result<Chain> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::format(dir, "chain directory does not exist"));
    }
    let header_path = dir.join("chain.toml");
    let header: ChainHeader = toml::from_str(&read_text(&header_path)?)
        .map_err(|e| Error::format(&header_path, e.to_string()))?;
    if header.format_version != CHAIN_FORMAT_VERSION {
        return Err(Error::format(
            &header_path,
            format!(
                "chain layout version {} is not supported (expected {CHAIN_FORMAT_VERSION})",
                header.format_version
            ),
        ));
    }

    let trace_path = dir.join("trace.csv");
    let text = read_text(&trace_path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "sample_index,L,lambda")) => {}
        _ => return Err(Error::format(&trace_path, "missing header 'sample_index,L,lambda'")),
    }
    let mut samples = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            path: trace_path.clone(),
            line: i + 1,
            msg: msg.to_string(),
        };
        let fields: Vec<&str> = line.split(',').collect();
        let [index, latent, lambda] = fields.as_slice() else {
            return Err(bad("expected three fields"));
        };
        let index: usize = index.parse().map_err(|_| bad("bad sample index"))?;
        let latent: usize = latent.parse().map_err(|_| bad("bad latent dimension"))?;
        let lambda: f64 = lambda.parse().map_err(|_| bad("bad lambda"))?;
        if index != header.burn_in + samples.len() {
            return Err(bad("sample indices are not consecutive after burn-in"));
        }
        let (z, u) = if header.has_factors {
            let load = |factor: char| -> Result<BinaryMatrix> {
                let p = snapshot_path(dir, factor, index);
                parse_coo(&read_text(&p)?, &Binarizer { path: &p, threshold: None }, true)
            };
            (Some(load('z')?), Some(load('u')?))
        } else {
            (None, None)
        };
        samples.push(Sample {
            latent,
            lambda,
            z,
            u,
        });
    }
    if samples.len() != header.n_recorded {
        return Err(Error::format(
            &trace_path,
            format!("expected {} samples, found {}", header.n_recorded, samples.len()),
        ));
    }
    Chain::new(header.n_rows, header.n_cols, header.burn_in, header.config, samples)
}

/// Writes a binary greyscale PGM, one pixel per entry, 1 as black and 0 as
/// white.
pub fn export_heatmap(m: &RealMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(v) = m.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Config(format!("heatmap values must lie in [0, 1], found {v}")));
    }
    let mut bytes = format!("P5\n{} {}\n255\n", m.n_cols(), m.n_rows()).into_bytes();
    bytes.extend(m.values().iter().map(|v| ((1.0 - v) * 255.0).round() as u8));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::finite::FiniteConfig;
    use proptest::prelude::*;
    use tempfile::tempdir;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn m(rows: &[&[u8]]) -> BinaryMatrix {
        BinaryMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn load_examples() {
        let dir = tempdir().unwrap();
        let dense = write(dir.path(), "a.csv", "0,1\n1,0\n");
        assert_eq!(load(&DatasetSpec::new(&dense, MatrixFormat::DenseCsv)).unwrap(), m(&[&[0, 1], &[1, 0]]));
        let sparse = write(dir.path(), "a.coo", "2 2\n0 1\n1 0\n");
        assert_eq!(load(&DatasetSpec::new(&sparse, MatrixFormat::SparseCoo)).unwrap(), m(&[&[0, 1], &[1, 0]]));
        let counts = write(dir.path(), "c.csv", "0,3\n1,0");
        assert_eq!(load(&DatasetSpec::new(&counts, MatrixFormat::DenseCsv)).unwrap(), m(&[&[0, 1], &[1, 0]]));
        let valued = write(dir.path(), "v.coo", "2 3\n0 1 4\n1 2 0\n");
        assert_eq!(load(&DatasetSpec::new(&valued, MatrixFormat::SparseCoo)).unwrap(), m(&[&[0, 1, 0], &[0, 0, 0]]));
        let mut spec = DatasetSpec::new(&counts, MatrixFormat::DenseCsv);
        spec.binarize_threshold = Some(2.0);
        assert_eq!(load(&spec).unwrap(), m(&[&[0, 1], &[0, 0]]));
    }

    #[test]
    fn load_errors() {
        let dir = tempdir().unwrap();
        let ragged = write(dir.path(), "r.csv", "0,1\n1\n");
        match load(&DatasetSpec::new(&ragged, MatrixFormat::DenseCsv)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let junk = write(dir.path(), "j.csv", "0,x\n");
        assert!(matches!(load(&DatasetSpec::new(&junk, MatrixFormat::DenseCsv)), Err(Error::Parse { line: 1, .. })));
        let neg = write(dir.path(), "n.csv", "0,-1\n");
        assert!(load(&DatasetSpec::new(&neg, MatrixFormat::DenseCsv)).is_err());
        let oob = write(dir.path(), "o.coo", "2 2\n0 1\n2 0\n");
        assert!(matches!(load(&DatasetSpec::new(&oob, MatrixFormat::SparseCoo)), Err(Error::Parse { line: 3, .. })));
        let empty = write(dir.path(), "e.coo", "");
        assert!(matches!(load(&DatasetSpec::new(&empty, MatrixFormat::SparseCoo)), Err(Error::Format { .. })));
        let empty = write(dir.path(), "e.csv", "\n");
        assert!(load(&DatasetSpec::new(&empty, MatrixFormat::DenseCsv)).is_err());
        let strict = write(dir.path(), "s.csv", "0,2\n");
        let mut spec = DatasetSpec::new(&strict, MatrixFormat::DenseCsv);
        spec.binarize_threshold = None;
        assert!(load(&spec).is_err());
        assert!(matches!(
            load(&DatasetSpec::new(dir.path().join("missing.csv"), MatrixFormat::DenseCsv)),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn save_rejects_empty() {
        let dir = tempdir().unwrap();
        assert!(save_matrix(&BinaryMatrix::zeros(0, 0), dir.path().join("x.coo"), MatrixFormat::SparseCoo).is_err());
        assert!(save_matrix(&BinaryMatrix::ones(2, 2), dir.path().join("no/such/dir.csv"), MatrixFormat::DenseCsv).is_err());
    }

    #[test]
    fn trailing_zero_rows_survive() {
        let dir = tempdir().unwrap();
        let mut a = BinaryMatrix::zeros(5, 7);
        a.set(0, 0, true);
        let p = dir.path().join("a.coo");
        save_matrix(&a, &p, MatrixFormat::SparseCoo).unwrap();
        assert_eq!(load_binary(&p).unwrap(), a);
    }

    fn arb_matrix() -> impl Strategy<Value = BinaryMatrix> {
        (1usize..=16, 1usize..=16).prop_flat_map(|(r, c)| {
            proptest::collection::vec(any::<bool>(), r * c)
                .prop_map(move |v| BinaryMatrix::from_fn(r, c, |i, j| v[i * c + j]))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn matrix_round_trips(a in arb_matrix()) {
            let dir = tempdir().unwrap();
            let dense = dir.path().join("a.csv");
            let sparse = dir.path().join("a.coo");
            save_matrix(&a, &dense, MatrixFormat::DenseCsv).unwrap();
            save_matrix(&a, &sparse, MatrixFormat::SparseCoo).unwrap();
            let from_dense = load(&DatasetSpec::new(&dense, MatrixFormat::DenseCsv)).unwrap();
            let from_sparse = load(&DatasetSpec::new(&sparse, MatrixFormat::SparseCoo)).unwrap();
            prop_assert_eq!(&from_dense, &a);
            prop_assert_eq!(&from_sparse, &from_dense);
        }
    }

    fn small_chain(with_factors: bool) -> Chain {
        let x = crate::synth::generate(12, 15, 2, 4).unwrap().x;
        let cfg = FiniteConfig {
            n_samples: 8,
            burn_in: 3,
            record_factors: with_factors,
            ..FiniteConfig::new(2)
        };
        crate::finite::run_finite(&x, cfg).unwrap()
    }

    #[test]
    fn chain_round_trip() {
        for with_factors in [true, false] {
            let dir = tempdir().unwrap();
            let chain = small_chain(with_factors);
            save_chain(&chain, dir.path()).unwrap();
            assert_eq!(load_chain(dir.path()).unwrap(), chain);
            let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
            assert_eq!(trace.lines().count(), 1 + 5);
            assert!(trace.lines().nth(1).unwrap().starts_with("3,"));
        }
    }

    #[test]
    fn chain_with_empty_factors_round_trips() {
        let x = BinaryMatrix::zeros(6, 5);
        let chain = crate::ibp::run_ibp(&x, crate::ibp::IbpConfig { n_samples: 6, burn_in: 2, ..Default::default() }).unwrap();
        let dir = tempdir().unwrap();
        save_chain(&chain, dir.path()).unwrap();
        assert_eq!(load_chain(dir.path()).unwrap(), chain);
    }

    #[test]
    fn chain_errors() {
        let dir = tempdir().unwrap();
        assert!(load_chain(dir.path().join("missing")).is_err());

        let mut chain = small_chain(true);
        chain.samples.clear();
        assert!(save_chain(&chain, dir.path()).is_err());

        let chain = small_chain(true);
        save_chain(&chain, dir.path()).unwrap();
        let header = dir.path().join("chain.toml");
        let text = fs::read_to_string(&header).unwrap();
        fs::write(&header, text.replace("format_version = 1", "format_version = 99")).unwrap();
        assert!(matches!(load_chain(dir.path()), Err(Error::Format { .. })));
        fs::write(&header, &text).unwrap();

        fs::write(dir.path().join("samples/z_000004.coo"), "12 2\n40 0\n").unwrap();
        assert!(matches!(load_chain(dir.path()), Err(Error::Parse { .. })));
    }

    #[test]
    fn heatmap_pixels() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("h.pgm");
        export_heatmap(&RealMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(), &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
        assert_eq!(&bytes[11..], &[0, 255, 255, 0]);

        export_heatmap(&RealMatrix::from_rows(&[vec![1.0; 3], vec![1.0; 3]]).unwrap(), &p).unwrap();
        assert!(fs::read(&p).unwrap()[11..].iter().all(|&b| b == 0));

        assert!(export_heatmap(&RealMatrix::from_rows(&[vec![1.5]]).unwrap(), &p).is_err());
        assert!(export_heatmap(&RealMatrix::from_rows(&[vec![f64::NAN]]).unwrap(), &p).is_err());
    }
}
