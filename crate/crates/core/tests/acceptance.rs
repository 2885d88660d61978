//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use ibpbmf::bitmat::BinaryMatrix;
use ibpbmf::cli::{bench, summarize_chain, with_threads, BenchArgs, Threads};
use ibpbmf::finite::conditional_prob_one;
use ibpbmf::ibp::{
    build_bracket_table, new_dish_log_weights_from_counts, normalize_log_weights,
    poisson_log_pmf, sample_ibp_prior,
};
use ibpbmf::io::trace_csv;
use ibpbmf::likelihood::{lambda_mle_with, log_likelihood_counts, log_sigmoid, LAMBDA_MAX};
use ibpbmf::posterior::l_summary;
use ibpbmf::synth::generate;
use ibpbmf::{
    prediction_counts, run_finite, run_ibp, FiniteConfig, IbpConfig, IbpSampler, ModelState,
    NoiseParam, PredictionCounts,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// Dimension recovery on synthetic data.

const RECOVERY_LATENTS: [usize; 9] = [2, 3, 4, 5, 6, 7, 8, 9, 10];

/// Posterior mode of `L` for each planted dimension at the given noise level.
fn recovery_modes(noise: f64) -> Vec<(usize, usize)> {
    RECOVERY_LATENTS
        .iter()
        .map(|&l| {
            let seed = l as u64;
            let ds = generate(200, 500, l, seed)
                .and_then(|d| d.with_noise(noise, seed))
                .expect("generate");
            let config = IbpConfig {
                seed,
                record_factors: false,
                ..IbpConfig::default()
            };
            let chain = run_ibp(&ds.x, config).expect("run_ibp");
            (l, l_summary(&chain).expect("summary").mode)
        })
        .collect()
}

fn describe_modes(modes: &[(usize, usize)]) -> String {
    modes
        .iter()
        .map(|(t, m)| format!("{t}->{m}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn noiseless_recovery() -> Outcome {
    let modes = recovery_modes(0.0);
    let hits = modes.iter().filter(|(t, m)| t == m).count();
    outcome(hits >= 8, format!("{hits}/9 exact (need 8); {}", describe_modes(&modes)))
}

fn ten_percent_noise() -> Outcome {
    let modes = recovery_modes(0.1);
    let hits = modes.iter().filter(|(t, m)| t.abs_diff(*m) <= 1).count();
    outcome(hits >= 8, format!("{hits}/9 within 1 (need 8); {}", describe_modes(&modes)))
}

fn twenty_percent_noise() -> Outcome {
    let modes = recovery_modes(0.2);
    let bias = modes.iter().map(|&(t, m)| m as f64 - t as f64).sum::<f64>() / 9.0;
    outcome(
        (0.0..=2.5).contains(&bias),
        format!("mean(mode - L*) = {bias:.3} (need [0, 2.5]); {}", describe_modes(&modes)),
    )
}

// ---------------------------------------------------------------------------
// Scalability.

fn scalability() -> Outcome {
    let (report, _) = bench(&BenchArgs::default()).expect("bench");
    outcome(
        report.total_secs <= 120.0,
        format!(
            "{}x{} density {:.3}, {} sweeps in {:.2} s (limit 120 s)",
            report.rows, report.cols, report.density, report.samples, report.total_secs
        ),
    )
}

// ---------------------------------------------------------------------------
// Conditional oracles.

/// Log-likelihood of all of `x` under `z`, `u` and `lambda`, summed entry by
/// entry from the definition of the Boolean product.
fn full_loglik(x: &BinaryMatrix, z: &BinaryMatrix, u: &BinaryMatrix, lambda: f64) -> f64 {
    let mut total = 0.0;
    for n in 0..x.n_rows() {
        for d in 0..x.n_cols() {
            let predicted = (0..z.n_cols()).any(|l| z.get(n, l) && u.get(d, l));
            let correct = predicted == x.get(n, d);
            total += log_sigmoid(if correct { lambda } else { -lambda });
        }
    }
    total
}

/// Entry of one factor.
#[derive(Clone, Copy)]
enum Target {
    Z(usize, usize),
    U(usize, usize),
}

/// `p(entry = 1 | rest)` by evaluating the whole-data likelihood at both
/// values of the entry.
fn enumerated_prob_one(
    x: &BinaryMatrix,
    z: &BinaryMatrix,
    u: &BinaryMatrix,
    lambda: f64,
    prior_one: f64,
    target: Target,
) -> f64 {
    let mut log_post = [0.0; 2];
    for (v, slot) in log_post.iter_mut().enumerate() {
        let (mut z2, mut u2) = (z.clone(), u.clone());
        match target {
            Target::Z(r, c) => z2.set(r, c, v == 1),
            Target::U(r, c) => u2.set(r, c, v == 1),
        }
        let prior = if v == 1 { prior_one } else { 1.0 - prior_one };
        *slot = prior.ln() + full_loglik(x, &z2, &u2, lambda);
    }
    1.0 / (1.0 + (log_post[0] - log_post[1]).exp())
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> BinaryMatrix {
    BinaryMatrix::from_fn(rows, cols, |_, _| rng.random_bool(0.5))
}

fn conditional_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_z: f64 = 0.0;
    let mut worst_u: f64 = 0.0;
    let mut worst_ibp: f64 = 0.0;
    let mut ibp_cases = 0;
    let mut finite_cases = 0;
    while finite_cases < 1000 || ibp_cases < 1000 {
        let n_rows = rng.random_range(1..=4);
        let n_cols = rng.random_range(1..=4);
        let latent = rng.random_range(1..=3);
        let x = random_matrix(n_rows, n_cols, &mut rng);
        let z = random_matrix(n_rows, latent, &mut rng);
        let u = random_matrix(n_cols, latent, &mut rng);
        let lambda = rng.random_range(0.0..3.0);
        let l = rng.random_range(0..latent);

        if finite_cases < 1000 {
            let prior_z: f64 = rng.random_range(0.05..0.95);
            let n = rng.random_range(0..n_rows);
            let fast = conditional_prob_one(x.row(n), z.row(n), &u, l, lambda, logit(prior_z))
                .expect("conditional");
            let slow = enumerated_prob_one(&x, &z, &u, lambda, prior_z, Target::Z(n, l));
            worst_z = worst_z.max((fast - slow).abs());

            let prior_u: f64 = rng.random_range(0.05..0.95);
            let d = rng.random_range(0..n_cols);
            let xt = x.transpose();
            let fast = conditional_prob_one(xt.row(d), u.row(d), &z, l, lambda, logit(prior_u))
                .expect("conditional");
            let slow = enumerated_prob_one(&x, &z, &u, lambda, prior_u, Target::U(d, l));
            worst_u = worst_u.max((fast - slow).abs());
            finite_cases += 1;
        }

        let n = rng.random_range(0..n_rows);
        let m_without = (0..n_rows).filter(|&r| r != n && z.get(r, l)).count();
        if ibp_cases < 1000 && m_without > 0 {
            let state = ModelState::new(z.clone(), u.clone(), NoiseParam::new(lambda).unwrap())
                .expect("state");
            let sampler = IbpSampler::from_state(&x, IbpConfig::default(), state).expect("sampler");
            let fast = sampler.existing_code_prob_one(n, l).expect("existing column");
            let prior = m_without as f64 / n_rows as f64;
            let slow = enumerated_prob_one(&x, &z, &u, lambda, prior, Target::Z(n, l));
            worst_ibp = worst_ibp.max((fast - slow).abs());
            ibp_cases += 1;
        }
    }
    let worst = worst_z.max(worst_u).max(worst_ibp);
    outcome(
        worst <= 1e-12,
        format!(
            "max |error| z {worst_z:.2e}, u {worst_u:.2e}, ibp {worst_ibp:.2e} over 1000 instances each (limit 1e-12)"
        ),
    )
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Kinds of entry in a row before new columns are added.
#[derive(Clone, Copy)]
enum Entry {
    FalseNegative,
    TrueNegative,
    /// Already predicted one; the flag is the observed value.
    Positive(bool),
}

/// `log sum over all new-U configurations of p(U_new) p(x_row | U_new)` with
/// the row switched on for all `k` new columns.
fn exhaustive_row_marginal(row: &[Entry], k: usize, lambda: f64, q: f64) -> f64 {
    let d = row.len();
    let bits = d * k;
    let mut terms = Vec::with_capacity(1 << bits);
    for config in 0u32..(1u32 << bits) {
        let ones = config.count_ones() as f64;
        let mut log_term = ones * q.ln() + (bits as f64 - ones) * (1.0 - q).ln();
        for (j, e) in row.iter().enumerate() {
            let covered = (0..k).any(|c| config >> (j * k + c) & 1 == 1);
            let (x, predicted) = match e {
                Entry::FalseNegative => (true, covered),
                Entry::TrueNegative => (false, covered),
                Entry::Positive(x) => (*x, true),
            };
            log_term += log_sigmoid(if x == predicted { lambda } else { -lambda });
        }
        terms.push(log_term);
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn new_dish_oracle() -> Outcome {
    const LPRIME: usize = 4;
    let (alpha, n_rows) = (1.0, 5);
    let mut worst_abs: f64 = 0.0;
    let mut worst_cancel: f64 = 0.0;
    let mut cases = 0;
    for lambda in [0.0, 0.7, 2.0] {
        for q in [0.3, 0.5] {
            let table = build_bracket_table(lambda, q, LPRIME);
            for fn_ in 0..=3 {
                for tn in 0..=3 {
                    for pos1 in 0..=(6 - fn_ - tn).min(3) {
                        for pos0 in 0..=(6 - fn_ - tn - pos1) {
                            let mut row = vec![Entry::FalseNegative; fn_];
                            row.extend(std::iter::repeat_n(Entry::TrueNegative, tn));
                            row.extend(std::iter::repeat_n(Entry::Positive(true), pos1));
                            row.extend(std::iter::repeat_n(Entry::Positive(false), pos0));
                            if row.is_empty() {
                                continue;
                            }
                            let weights =
                                new_dish_log_weights_from_counts(tn, fn_, &table, alpha, n_rows);
                            let positive_const = pos1 as f64 * log_sigmoid(lambda)
                                + pos0 as f64 * log_sigmoid(-lambda);
                            let rate = alpha / n_rows as f64;
                            let exact: Vec<f64> = (0..LPRIME)
                                .map(|k| {
                                    poisson_log_pmf(k, rate)
                                        + exhaustive_row_marginal(&row, k, lambda, q)
                                })
                                .collect();
                            for k in 0..LPRIME {
                                worst_abs =
                                    worst_abs.max((weights[k] + positive_const - exact[k]).abs());
                            }
                            let negatives_only = &row[..fn_ + tn];
                            let exact_neg: Vec<f64> = (0..LPRIME)
                                .map(|k| {
                                    poisson_log_pmf(k, rate)
                                        + exhaustive_row_marginal(negatives_only, k, lambda, q)
                                })
                                .collect();
                            let p_full = normalize_log_weights(&exact);
                            let p_neg = normalize_log_weights(&exact_neg);
                            let p_fast = normalize_log_weights(&weights);
                            for k in 0..LPRIME {
                                worst_cancel = worst_cancel
                                    .max((p_full[k] - p_neg[k]).abs())
                                    .max((p_full[k] - p_fast[k]).abs());
                            }
                            cases += 1;
                        }
                    }
                }
            }
        }
    }
    outcome(
        worst_abs <= 1e-10 && worst_cancel <= 1e-12,
        format!(
            "{cases} rows: max |log-weight error| {worst_abs:.2e} (limit 1e-10), \
             max normalised difference with positives {worst_cancel:.2e} (limit 1e-12)"
        ),
    )
}

// ---------------------------------------------------------------------------
// Noise precision.

fn lambda_mle_grid() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid: Vec<f64> = (0..)
        .map(|i| i as f64 * 1e-3)
        .take_while(|&v| v <= LAMBDA_MAX)
        .collect();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let correct = rng.random_range(0..2000);
        // A few configurations with no wrong predictions exercise the cap.
        let wrong = if i % 20 == 0 { 0 } else { rng.random_range(0..2000) };
        let counts = PredictionCounts {
            tp: correct,
            tn: 0,
            fp: wrong,
            fn_: 0,
        };
        let best = grid
            .iter()
            .copied()
            .max_by(|a, b| {
                log_likelihood_counts(&counts, *a)
                    .total_cmp(&log_likelihood_counts(&counts, *b))
            })
            .unwrap();
        let mle = lambda_mle_with(&counts, false).get();
        worst = worst.max((mle - best).abs());
    }
    outcome(worst <= 1e-3, format!("max |mle - grid argmax| {worst:.2e} over 100 configurations (resolution 1e-3)"))
}

// ---------------------------------------------------------------------------
// IBP prior.

fn ibp_prior_columns() -> Outcome {
    let n_rows = 20;
    let mut lines = Vec::new();
    let mut pass = true;
    for (i, alpha) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| sample_ibp_prior(n_rows, alpha, &mut rng).n_cols() as f64)
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        let se = (var / draws.len() as f64).sqrt();
        let expected = alpha * (1..=n_rows).map(|n| 1.0 / n as f64).sum::<f64>();
        let z = (mean - expected) / se;
        pass &= z.abs() <= 3.0;
        lines.push(format!("alpha {alpha}: mean {mean:.4} vs {expected:.4} ({z:+.2} SE)"));
    }
    outcome(pass, lines.join("; "))
}

// ---------------------------------------------------------------------------
// Finite model.

fn finite_reconstruction() -> Outcome {
    let mut errors = Vec::new();
    for seed in 0..10 {
        let ds = generate(200, 500, 5, seed).expect("generate");
        let config = FiniteConfig {
            seed,
            ..FiniteConfig::new(5)
        };
        let chain = run_finite(&ds.x, config).expect("run_finite");
        let summary = summarize_chain(&chain, Some(&ds.x), None).expect("summary");
        errors.push(summary.reconstruction_error.expect("factors recorded"));
    }
    let good = errors.iter().filter(|&&e| e <= 0.01).count();
    let listed = errors.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>().join(" ");
    outcome(good >= 9, format!("{good}/10 seeds with error <= 0.01 (need 9); errors {listed}"))
}

// ---------------------------------------------------------------------------
// Determinism across thread counts.

fn thread_determinism() -> Outcome {
    let ds = generate(120, 300, 4, 11)
        .and_then(|d| d.with_noise(0.05, 11))
        .expect("generate");
    let ibp = IbpConfig {
        n_samples: 40,
        burn_in: 10,
        seed: 3,
        ..IbpConfig::default()
    };
    let finite = FiniteConfig {
        n_samples: 40,
        burn_in: 10,
        seed: 3,
        ..FiniteConfig::new(4)
    };
    let run = |threads: usize| {
        let t = Threads(threads);
        let a = with_threads(t, || run_ibp(&ds.x, ibp.clone())).unwrap().unwrap();
        let b = with_threads(t, || run_finite(&ds.x, finite.clone())).unwrap().unwrap();
        (a, b)
    };
    let (ibp1, fin1) = run(1);
    let mut identical = true;
    for threads in [2, 4, 8] {
        let (ibp_n, fin_n) = run(threads);
        identical &= trace_csv(&ibp1) == trace_csv(&ibp_n) && ibp1 == ibp_n;
        identical &= trace_csv(&fin1) == trace_csv(&fin_n) && fin1 == fin_n;
    }
    let last = ibp1.samples.last().unwrap();
    let (z, u) = last.factors().unwrap();
    let counts = prediction_counts(&ds.x, z, u).unwrap();
    outcome(
        identical,
        format!(
            "traces and factors for 1 vs 2/4/8 threads {}; final IBP sample L={} with {} wrong entries",
            if identical { "byte-identical" } else { "DIFFER" },
            last.latent,
            counts.wrong()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("noiseless dimension recovery", noiseless_recovery),
        ("dimension recovery at 10% noise", ten_percent_noise),
        ("dimension recovery at 20% noise", twenty_percent_noise),
        ("301x21000 benchmark under 120 s", scalability),
        ("conditionals match enumeration", conditional_oracle),
        ("new-dish weights match exhaustive marginal", new_dish_oracle),
        ("noise precision matches grid search", lambda_mle_grid),
        ("IBP prior column count", ibp_prior_columns),
        ("finite model reconstruction", finite_reconstruction),
        ("determinism across thread counts", thread_determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        if !result.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {} {name}: {} [{:.1} s]",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
