//! Command-line front end.
//!
//! Every subcommand writes a `manifest.toml` next to its outputs. The
//! manifest echoes each flag value, so re-running with the same flags
//! reproduces the traces byte for byte, whatever the thread count.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize, Serializer};

use crate::bitmat::BinaryMatrix;
use crate::error::{Error, Result};
use crate::finite::{run_finite, FiniteConfig};
use crate::ibp::{run_ibp, IbpConfig};
use crate::io::{
    export_heatmap, load, load_binary, load_chain, save_chain, save_matrix, trace_csv,
    DatasetSpec, MatrixFormat,
};
use crate::posterior::{l_summary, marginal_mean_z, match_factors, reconstruction_error, Chain};
use crate::synth::generate_with_density;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("IBPBMF_GIT_DESCRIBE"), ")");

/// Prints a line, ignoring a closed stdout.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

/// Seeds are stored as TOML integers, which are signed 64-bit.
const MAX_SEED: u64 = i64::MAX as u64;

/// Worker thread count. Zero means one per available core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Threads(pub usize);

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Threads(0));
        }
        match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected 'auto' or a positive integer, got '{s}'")),
            Ok(n) => Ok(Threads(n)),
        }
    }
}

impl fmt::Display for Threads {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => f.write_str("auto"),
            n => write!(f, "{n}"),
        }
    }
}

impl Serialize for Threads {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Parser)]
#[command(name = "ibpbmf", version = VERSION, about = "Boolean matrix factorisation by Gibbs sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a planted synthetic dataset and its true factors.
    Generate(GenerateArgs),
    /// Run a sampler on a dataset.
    Fit(FitArgs),
    /// Recompute summaries from a saved chain.
    Summarize(SummarizeArgs),
    /// Time the IBP sampler on a synthetic dataset.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub rows: u64,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub cols: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub latent: u64,
    /// Expected fraction of ones in the noiseless data.
    #[arg(long, default_value_t = 0.5)]
    pub density: f64,
    /// Bit-flip probability applied after generation.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u64).range(..=MAX_SEED))]
    pub seed: u64,
    #[arg(long, default_value = "dense-csv")]
    #[serde(serialize_with = "display")]
    pub format: MatrixFormat,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Finite,
    Ibp,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[arg(long, value_enum)]
    pub model: Model,
    #[arg(long)]
    pub input: PathBuf,
    /// Input format. Inferred from the extension when omitted.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "display_opt")]
    pub format: Option<MatrixFormat>,
    /// Entries above this value count as ones.
    #[arg(long, default_value_t = 0.0, conflicts_with = "strict")]
    pub threshold: f64,
    /// Reject any entry that is not exactly 0 or 1.
    #[arg(long)]
    pub strict: bool,
    /// Total number of sweeps, burn-in included.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    /// Latent dimension of the finite model.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latent: Option<u64>,
    #[arg(long, default_value_t = 0.5)]
    pub prior_z: f64,
    #[arg(long, default_value_t = 0.5)]
    pub prior_u: f64,
    #[arg(long, default_value_t = 10)]
    pub lprime_max: usize,
    #[arg(long, default_value_t = crate::likelihood::LAMBDA_INIT)]
    pub lambda_init: f64,
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u64).range(..=MAX_SEED))]
    pub seed: u64,
    #[arg(long, env = "IBPBMF_THREADS", default_value = "auto")]
    pub threads: Threads,
    /// Record only the L and lambda traces, not the factor snapshots.
    #[arg(long)]
    pub no_factors: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub chain: PathBuf,
    /// Data the chain was fitted to. Defaults to the input named in the
    /// manifest beside the chain, if any.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// True `U`, as a matrix file or a directory written by `generate`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    /// Output directory. Defaults to the chain directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "bench")]
pub struct BenchArgs {
    #[arg(long, default_value_t = 301, value_parser = clap::value_parser!(u64).range(1..))]
    pub rows: u64,
    #[arg(long, default_value_t = 21000, value_parser = clap::value_parser!(u64).range(1..))]
    pub cols: u64,
    #[arg(long, default_value_t = 0.35)]
    pub density: f64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub latent: u64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    #[arg(long, default_value_t = 10)]
    pub lprime_max: usize,
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u64).range(..=MAX_SEED))]
    pub seed: u64,
    #[arg(long, env = "IBPBMF_THREADS", default_value = "auto")]
    pub threads: Threads,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for BenchArgs {
    fn default() -> Self {
        BenchArgs::parse_from(["bench"])
    }
}

fn display<T: fmt::Display, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn display_opt<T: fmt::Display, S: Serializer>(
    v: &Option<T>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.collect_str(v),
        None => s.serialize_none(),
    }
}

/// Record of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub duration_secs: f64,
    pub outputs: Vec<PathBuf>,
    pub args: toml::Table,
}

impl RunManifest {
    fn new(subcommand: &str, args: &impl Serialize) -> Result<Self> {
        let args = toml::Table::try_from(args)
            .map_err(|e| Error::Config(format!("cannot record arguments: {e}")))?;
        Ok(RunManifest {
            subcommand: subcommand.to_string(),
            version: VERSION.to_string(),
            duration_secs: 0.0,
            outputs: Vec::new(),
            args,
        })
    }

    fn write(&self, dir: &Path) -> Result<()> {
        write_toml(&dir.join("manifest.toml"), self)
    }
}

/// Posterior summary written by `fit` and `summarize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: Model,
    pub n_recorded: usize,
    pub l_mode: usize,
    pub l_mean: f64,
    /// Posterior mass of each latent dimension, keyed by its decimal value.
    pub l_histogram: BTreeMap<String, f64>,
    pub lambda_mean: f64,
    pub lambda_last: f64,
    /// Fraction of entries the modal reference sample gets wrong.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor_match: Option<MatchSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchSummary {
    pub mean_jaccard: f64,
    /// `[inferred column, true column]` pairs.
    pub pairs: Vec<[usize; 2]>,
    pub jaccard: Vec<f64>,
}

/// Summaries of a chain. Error and matching use the first sample whose
/// latent dimension equals the mode, and need recorded factors.
pub fn summarize_chain(
    chain: &Chain,
    x: Option<&BinaryMatrix>,
    truth_u: Option<&BinaryMatrix>,
) -> Result<RunSummary> {
    let ls = l_summary(chain)?;
    let lambdas = chain.lambda_trace();
    let reference = if chain.has_factors() {
        chain.samples[chain.reference_index()?].factors()
    } else {
        None
    };
    let reconstruction_error = match (x, reference) {
        (Some(x), Some((z, u))) => Some(reconstruction_error(x, z, u)?),
        _ => None,
    };
    let factor_match = match (truth_u, reference) {
        (Some(truth), Some((_, u))) => {
            if truth.n_rows() != chain.n_cols {
                return Err(Error::Shape(format!(
                    "true U has {} rows, data has {} columns",
                    truth.n_rows(),
                    chain.n_cols
                )));
            }
            let m = match_factors(u, truth)?;
            Some(MatchSummary {
                mean_jaccard: m.mean_jaccard,
                pairs: m.pairs.iter().map(|p| [p.inferred, p.truth]).collect(),
                jaccard: m.pairs.iter().map(|p| p.jaccard).collect(),
            })
        }
        _ => None,
    };
    Ok(RunSummary {
        model: match chain.config {
            crate::posterior::RunConfig::Finite(_) => Model::Finite,
            crate::posterior::RunConfig::Ibp(_) => Model::Ibp,
        },
        n_recorded: chain.samples.len(),
        l_mode: ls.mode,
        l_mean: ls.mean,
        l_histogram: ls.histogram.iter().map(|(l, p)| (l.to_string(), *p)).collect(),
        lambda_mean: lambdas.iter().sum::<f64>() / lambdas.len() as f64,
        lambda_last: *lambdas.last().expect("nonempty chain"),
        reconstruction_error,
        factor_match,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: Threads, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.0)
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_toml(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::format(path, e.to_string()))?;
    write_text(path, &text)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn extension(format: MatrixFormat) -> &'static str {
    match format {
        MatrixFormat::DenseCsv => "csv",
        MatrixFormat::SparseCoo => "coo",
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let mut manifest = RunManifest::new("generate", args)?;
    let ds = generate_with_density(
        args.rows as usize,
        args.cols as usize,
        args.latent as usize,
        args.density,
        args.seed,
    )?
    .with_noise(args.noise, args.seed)?;
    create_dir(&args.out)?;
    let ext = extension(args.format);
    for (name, m) in [("x", &ds.x), ("z_true", &ds.z_true), ("u_true", &ds.u_true)] {
        let path = args.out.join(format!("{name}.{ext}"));
        save_matrix(m, &path, args.format)?;
        manifest.outputs.push(path);
    }
    manifest.duration_secs = start.elapsed().as_secs_f64();
    manifest.write(&args.out)?;
    say!(
        "wrote {}x{} dataset (L={}, density {:.3}) to {}",
        args.rows,
        args.cols,
        args.latent,
        ds.x.density(),
        args.out.display()
    );
    Ok(manifest)
}

fn load_input(args: &FitArgs) -> Result<BinaryMatrix> {
    let format = args
        .format
        .unwrap_or_else(|| MatrixFormat::from_extension(&args.input));
    let mut spec = DatasetSpec::new(&args.input, format);
    spec.binarize_threshold = if args.strict { None } else { Some(args.threshold) };
    load(&spec)
}

fn fit_chain(args: &FitArgs, x: &BinaryMatrix) -> Result<Chain> {
    match args.model {
        Model::Finite => {
            let latent = args.latent.ok_or_else(|| {
                Error::Config("--latent is required for the finite model".into())
            })?;
            let config = FiniteConfig {
                latent: latent as usize,
                prior_z: args.prior_z,
                prior_u: args.prior_u,
                n_samples: args.samples,
                burn_in: args.burn_in,
                seed: args.seed,
                lambda_init: args.lambda_init,
                record_factors: !args.no_factors,
            };
            config.validate()?;
            with_threads(args.threads, || run_finite(x, config))?
        }
        Model::Ibp => {
            if args.latent.is_some() {
                return Err(Error::Config("--latent applies to the finite model only".into()));
            }
            let config = IbpConfig {
                alpha: args.alpha,
                q: args.q,
                lprime_max: args.lprime_max,
                n_samples: args.samples,
                burn_in: args.burn_in,
                seed: args.seed,
                lambda_init: args.lambda_init,
                record_factors: !args.no_factors,
            };
            config.validate()?;
            with_threads(args.threads, || run_ibp(x, config))?
        }
    }
}

/// Writes the chain, traces, summary and heatmap of a finished run into
/// `out`, returning the written paths.
fn write_outputs(
    chain: &Chain,
    summary: &RunSummary,
    out: &Path,
    save_full_chain: bool,
) -> Result<Vec<PathBuf>> {
    create_dir(out)?;
    let mut written = Vec::new();
    if save_full_chain {
        let dir = out.join("chain");
        save_chain(chain, &dir)?;
        written.push(dir);
    }
    let trace = out.join("trace.csv");
    write_text(&trace, &trace_csv(chain))?;
    written.push(trace);
    let summary_path = out.join("summary.toml");
    write_toml(&summary_path, summary)?;
    written.push(summary_path);
    if chain.has_factors() {
        let heatmap = out.join("heatmap.pgm");
        export_heatmap(&marginal_mean_z(chain)?, &heatmap)?;
        written.push(heatmap);
    }
    Ok(written)
}

pub fn cmd_fit(args: &FitArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let mut manifest = RunManifest::new("fit", args)?;
    let x = load_input(args)?;
    let chain = fit_chain(args, &x)?;
    let summary = summarize_chain(&chain, Some(&x), None)?;
    manifest.outputs = write_outputs(&chain, &summary, &args.out, true)?;
    manifest.duration_secs = start.elapsed().as_secs_f64();
    manifest.write(&args.out)?;
    print_summary(&summary);
    say!("wall-clock: {:.3} s", manifest.duration_secs);
    Ok(manifest)
}

fn print_summary(s: &RunSummary) {
    say!(
        "L mode {} mean {:.3} over {} samples; lambda mean {:.4}",
        s.l_mode, s.l_mean, s.n_recorded, s.lambda_mean
    );
    if let Some(e) = s.reconstruction_error {
        say!("reconstruction error {e:.6}");
    }
    if let Some(m) = &s.factor_match {
        say!("mean Jaccard against truth {:.4}", m.mean_jaccard);
    }
}

/// Input path recorded by a `fit` manifest in the parent of `chain_dir`.
fn manifest_input(chain_dir: &Path) -> Option<PathBuf> {
    let path = chain_dir.parent()?.join("manifest.toml");
    let manifest: RunManifest = toml::from_str(&fs::read_to_string(path).ok()?).ok()?;
    (manifest.subcommand == "fit")
        .then(|| manifest.args.get("input")?.as_str().map(PathBuf::from))
        .flatten()
}

fn load_truth(path: &Path) -> Result<BinaryMatrix> {
    if path.is_dir() {
        for ext in ["csv", "coo"] {
            let candidate = path.join(format!("u_true.{ext}"));
            if candidate.exists() {
                return load_binary(candidate);
            }
        }
        return Err(Error::format(path, "directory holds no u_true.csv or u_true.coo"));
    }
    load_binary(path)
}

pub fn cmd_summarize(args: &SummarizeArgs) -> Result<RunManifest> {
    let start = Instant::now();
    let mut manifest = RunManifest::new("summarize", args)?;
    let chain = load_chain(&args.chain)?;
    let input = args.input.clone().or_else(|| manifest_input(&args.chain));
    let x = input.map(load_binary).transpose()?;
    if let Some(x) = &x {
        if x.shape() != (chain.n_rows, chain.n_cols) {
            return Err(Error::Shape(format!(
                "input is {}x{}, chain was fitted to {}x{}",
                x.n_rows(),
                x.n_cols(),
                chain.n_rows,
                chain.n_cols
            )));
        }
    }
    let truth = args.truth.as_deref().map(load_truth).transpose()?;
    let summary = summarize_chain(&chain, x.as_ref(), truth.as_ref())?;
    let out = args.out.clone().unwrap_or_else(|| args.chain.clone());
    manifest.outputs = write_outputs(&chain, &summary, &out, false)?;
    manifest.duration_secs = start.elapsed().as_secs_f64();
    manifest.write(&out)?;
    print_summary(&summary);
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: usize,
    pub cols: usize,
    pub density: f64,
    pub samples: usize,
    pub generate_secs: f64,
    pub fit_secs: f64,
    pub total_secs: f64,
    pub samples_per_sec: f64,
    pub l_mode: usize,
    pub l_mean: f64,
}

/// Generates a dataset of the requested shape and density and times an IBP
/// run on it. Only traces are recorded.
pub fn bench(args: &BenchArgs) -> Result<(BenchReport, Chain)> {
    let start = Instant::now();
    let ds = generate_with_density(
        args.rows as usize,
        args.cols as usize,
        args.latent as usize,
        args.density,
        args.seed,
    )?;
    let generate_secs = start.elapsed().as_secs_f64();
    let config = IbpConfig {
        alpha: args.alpha,
        q: args.q,
        lprime_max: args.lprime_max,
        n_samples: args.samples,
        burn_in: args.burn_in,
        seed: args.seed,
        record_factors: false,
        ..IbpConfig::default()
    };
    config.validate()?;
    let fit_start = Instant::now();
    let chain = with_threads(args.threads, || run_ibp(&ds.x, config))??;
    let fit_secs = fit_start.elapsed().as_secs_f64();
    let ls = l_summary(&chain)?;
    let report = BenchReport {
        rows: ds.x.n_rows(),
        cols: ds.x.n_cols(),
        density: ds.x.density(),
        samples: args.samples,
        generate_secs,
        fit_secs,
        total_secs: start.elapsed().as_secs_f64(),
        samples_per_sec: args.samples as f64 / fit_secs,
        l_mode: ls.mode,
        l_mean: ls.mean,
    };
    Ok((report, chain))
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport> {
    let mut manifest = RunManifest::new("bench", args)?;
    let (report, chain) = bench(args)?;
    say!(
        "{}x{} (density {:.3}): {} sweeps in {:.2} s ({:.1} sweeps/s), generation {:.2} s",
        report.rows,
        report.cols,
        report.density,
        report.samples,
        report.fit_secs,
        report.samples_per_sec,
        report.generate_secs
    );
    say!("L mode {} mean {:.2}", report.l_mode, report.l_mean);
    if let Some(out) = &args.out {
        create_dir(out)?;
        let report_path = out.join("report.toml");
        write_toml(&report_path, &report)?;
        let trace = out.join("trace.csv");
        write_text(&trace, &trace_csv(&chain))?;
        manifest.outputs = vec![report_path, trace];
        manifest.duration_secs = report.total_secs;
        manifest.write(out)?;
    }
    Ok(report)
}

/// Parses `args` and runs the subcommand. Returns the process exit code:
/// 0 on success, 2 for usage errors, 1 for runtime failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a).map(drop),
        Command::Fit(a) => cmd_fit(a).map(drop),
        Command::Summarize(a) => cmd_summarize(a).map(drop),
        Command::Bench(a) => cmd_bench(a).map(drop),
    };
    match result {
        Ok(()) => 0,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
