//! Capacity references, Monte-Carlo rate experiments and privacy audits.
//!
//! Costs and entropies are in q-ary units: one downloaded field symbol costs
//! one unit.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::Arc;

use itertools::Itertools;
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::entropy::{h_mono_set_bruteforce, h_mono_single, MonomialSet};
use crate::error::{Error, Result};
use crate::ffield::{make_field_with_bound, prime_power, FiniteField};
use crate::scheme::{
    gen_queries_leaky, gen_queries_with, run_transcript, ConfigRecord, Mode, Query, QueryLayout,
    QueryRandomness, SchemeConfig,
};

/// Batches used for batch-means standard errors.
pub const BATCHES: usize = 20;

/// Significance level of the sampled privacy audit.
pub const AUDIT_SIGNIFICANCE: f64 = 1e-3;

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// `(1 + 1/n + ⋯ + 1/n^{f−1})^{−1}`.
pub fn c_pir(n: usize, f: usize) -> Result<f64> {
    if n < 2 || f < 1 {
        return Err(Error::Precondition(format!(
            "capacity needs n >= 2 and f >= 1, got n = {n}, f = {f}"
        )));
    }
    let n = n as f64;
    Ok(1.0 / (0..f).map(|i| n.powi(-(i as i32))).sum::<f64>())
}

/// Probability that none of the `n^μ f` stored symbols is zero.
pub fn no_zero_probability(n: usize, mu: usize, f: usize, q: u64) -> f64 {
    let count = (n as f64).powi(mu as i32) * f as f64;
    (1.0 - 1.0 / q as f64).powf(count)
}

/// Expected download `n^μ (π/C_PIR(n, r) + (1 − π)/C_PIR(n, μ))`.
pub fn predicted_avg_cost(n: usize, mu: usize, r: usize, f: usize, q: u64) -> Result<f64> {
    if r > mu {
        return Err(Error::Precondition(format!("rank {r} exceeds μ = {mu}")));
    }
    let pi = if r < mu {
        no_zero_probability(n, mu, f, q)
    } else {
        0.0
    };
    cost_from_probability(n, mu, r, pi)
}

/// The same expression at a given probability of multiplicative mode.
pub fn cost_from_probability(n: usize, mu: usize, r: usize, pi: f64) -> Result<f64> {
    let lambda = (n as f64).powi(mu as i32);
    let reduced = if r == 0 { 0.0 } else { 1.0 / c_pir(n, r)? };
    Ok(lambda * (pi * reduced + (1.0 - pi) / c_pir(n, mu)?))
}

/// `λ · min_v H_q(φ_v(X))`.
pub fn min_function_entropy(ms: &MonomialSet, q: u64, lambda: usize) -> Result<f64> {
    let mut min = f64::INFINITY;
    for i in 0..ms.len() {
        let h = h_mono_single(ms.exponents(i), q)?;
        min = min.min(h.value_qary.expect("field in context"));
    }
    Ok(lambda as f64 * min)
}

/// `2H/(H_joint + H)` for two functions of equal entropy `H`, in bits.
pub fn two_function_capacity(ms: &MonomialSet, field: &FiniteField, bound: u64) -> Result<f64> {
    if ms.len() != 2 {
        return Err(Error::Precondition(format!(
            "two functions needed, got {}",
            ms.len()
        )));
    }
    let q = field.order();
    let h1 = h_mono_single(ms.exponents(0), q)?.value_bits;
    let h2 = h_mono_single(ms.exponents(1), q)?.value_bits;
    if (h1 - h2).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "function entropies differ ({h1} vs {h2} bits)"
        )));
    }
    let joint = h_mono_set_bruteforce(ms, field, bound)?.value_bits;
    if joint + h1 <= 0.0 {
        return Err(Error::Precondition("both functions are constant".into()));
    }
    Ok(2.0 * h1 / (joint + h1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeFrequencies {
    pub pir: f64,
    pub multiplicative: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub c_pir_r: f64,
    pub c_pir_mu: f64,
    pub predicted_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ConfigRecord,
    pub seed: u64,
    pub trials: usize,
    pub empirical_avg_download_qary: f64,
    pub download_standard_error: f64,
    pub min_func_entropy_qary: f64,
    pub empirical_rate: f64,
    pub rate_standard_error: f64,
    pub mode_frequencies: ModeFrequencies,
    pub decode_failure_rate: f64,
    /// Successful decodes that disagree with direct evaluation.
    pub decode_mismatches: usize,
    /// Requests uploaded per trial over both query sets; not part of the rate.
    pub average_upload: f64,
    pub reference: Reference,
}

struct Trial {
    download: usize,
    mode: Mode,
    failed: bool,
    mismatch: bool,
    upload: usize,
}

/// Mean of each of `BATCHES` contiguous batches, and the standard error of
/// the overall mean derived from their spread.
fn batch_means_se(xs: &[f64]) -> f64 {
    let batches = BATCHES.min(xs.len());
    if batches < 2 {
        return 0.0;
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| {
            let lo = b * xs.len() / batches;
            let hi = (b + 1) * xs.len() / batches;
            xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

/// Runs `trials` independent transcripts with uniform storage and uniform
/// desired index. Trial `t` draws from stream `t` of a generator seeded with
/// `seed`, so the report does not depend on scheduling.
pub fn run_experiment(config: &SchemeConfig, trials: usize, seed: u64) -> Result<ExperimentReport> {
    if trials == 0 {
        return Err(Error::Precondition("at least one trial is needed".into()));
    }
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let v = rng.random_range(0..config.mu());
            let transcript = run_transcript(config, v, rng.random(), rng.random())?;
            let matches = transcript.matches_direct_evaluation(config);
            Ok(Trial {
                download: transcript.total_download(),
                mode: transcript.mode,
                failed: matches.is_none(),
                mismatch: matches == Some(false),
                upload: transcript.upload(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let downloads: Vec<f64> = outcomes.iter().map(|t| t.download as f64).collect();
    let avg = downloads.iter().sum::<f64>() / trials as f64;
    let se = batch_means_se(&downloads);
    let q = config.field().order();
    let entropy = min_function_entropy(config.monomials(), q, config.lambda())?;
    let mult = outcomes
        .iter()
        .filter(|t| t.mode == Mode::Multiplicative)
        .count() as f64
        / trials as f64;
    let (n, mu, r) = (config.n(), config.mu(), config.rank());
    Ok(ExperimentReport {
        config: config.record(),
        seed,
        trials,
        empirical_avg_download_qary: avg,
        download_standard_error: se,
        min_func_entropy_qary: entropy,
        empirical_rate: entropy / avg,
        rate_standard_error: entropy * se / (avg * avg),
        mode_frequencies: ModeFrequencies {
            pir: 1.0 - mult,
            multiplicative: mult,
        },
        decode_failure_rate: outcomes.iter().filter(|t| t.failed).count() as f64 / trials as f64,
        decode_mismatches: outcomes.iter().filter(|t| t.mismatch).count(),
        average_upload: outcomes.iter().map(|t| t.upload as f64).sum::<f64>() / trials as f64,
        reference: Reference {
            c_pir_r: c_pir(n, r)?,
            c_pir_mu: c_pir(n, mu)?,
            predicted_cost: predicted_avg_cost(n, mu, r, config.messages(), q)?,
        },
    })
}

/// One CSV row of a convergence study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub q: u64,
    pub n: usize,
    pub mu: usize,
    pub r: usize,
    pub trials: usize,
    pub avg_cost: f64,
    pub rate: f64,
    pub c_pir_r: f64,
    pub failure_rate: f64,
}

impl From<&ExperimentReport> for ConvergenceRow {
    fn from(r: &ExperimentReport) -> Self {
        let (p, k) = r
            .config
            .field
            .split_once('^')
            .map(|(p, k)| (p.parse::<u64>().unwrap(), k.parse::<u32>().unwrap()))
            .expect("field recorded as p^k");
        Self {
            q: p.pow(k),
            n: r.config.n,
            mu: r.config.mu,
            r: r.config.rank,
            trials: r.trials,
            avg_cost: r.empirical_avg_download_qary,
            rate: r.empirical_rate,
            c_pir_r: r.reference.c_pir_r,
            failure_rate: r.decode_failure_rate,
        }
    }
}

/// One experiment per field order in `q_grid`, all with the same seed.
pub fn convergence_study(
    n: usize,
    ms: &MonomialSet,
    q_grid: &[u64],
    trials: usize,
    seed: u64,
    table_bound: u64,
) -> Result<Vec<ExperimentReport>> {
    q_grid
        .iter()
        .map(|&q| {
            let (p, k) = prime_power(q)
                .ok_or_else(|| Error::FieldSpec(format!("{q} is not a prime power")))?;
            let field = Arc::new(make_field_with_bound(p, k, table_bound)?);
            let config = SchemeConfig::new(n, ms.clone(), field)?;
            run_experiment(&config, trials, seed)
        })
        .collect()
}

pub fn write_convergence_csv<W: Write>(reports: &[ExperimentReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(ConvergenceRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditMode {
    Exhaustive,
    Sampled,
}

/// Maps layout, desired index and randomness to the per-database queries.
pub type QueryGenerator = fn(&QueryLayout, usize, &QueryRandomness) -> Result<Vec<Query>>;

/// The scheme's own generator, returning the flagged query set.
pub fn private_generator(
    layout: &QueryLayout,
    v: usize,
    rnd: &QueryRandomness,
) -> Result<Vec<Query>> {
    Ok(gen_queries_with(layout, v, rnd)?.plc)
}

/// Negative control that leaks the desired index through request order.
pub fn leaky_generator(
    layout: &QueryLayout,
    v: usize,
    rnd: &QueryRandomness,
) -> Result<Vec<Query>> {
    gen_queries_leaky(layout, v, rnd)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatabaseAudit {
    pub database: usize,
    /// Distinct queries (exhaustive) or fingerprints (sampled) observed.
    pub distinct: usize,
    /// Exhaustive: whether every index induces the same distribution.
    pub identical: Option<bool>,
    pub statistic: Option<f64>,
    pub degrees_of_freedom: Option<usize>,
    pub p_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyAudit {
    pub mode: AuditMode,
    pub passed: bool,
    /// Randomness outcomes (exhaustive) or samples (sampled) per index.
    pub draws_per_index: u64,
    pub significance: Option<f64>,
    pub databases: Vec<DatabaseAudit>,
}

/// `λ! · 2^{bits}`, the number of equally likely randomness outcomes.
pub fn randomness_space(layout: &QueryLayout) -> BigUint {
    let fact: BigUint = (1..=layout.lambda() as u64).map(BigUint::from).product();
    fact << layout.sign_bits()
}

/// Checks that each database's query distribution does not depend on the
/// desired index. Exhaustive mode enumerates every randomness outcome and
/// fails when `budget` is smaller than that space; sampled mode draws
/// `samples` outcomes per index and runs a chi-square homogeneity test on
/// coarse query fingerprints.
pub fn privacy_audit(
    layout: &QueryLayout,
    generator: QueryGenerator,
    mode: AuditMode,
    budget: u64,
    samples: u64,
    seed: u64,
) -> Result<PrivacyAudit> {
    match mode {
        AuditMode::Exhaustive => exhaustive_audit(layout, generator, budget),
        AuditMode::Sampled => sampled_audit(layout, generator, samples, seed),
    }
}

fn exhaustive_audit(
    layout: &QueryLayout,
    generator: QueryGenerator,
    budget: u64,
) -> Result<PrivacyAudit> {
    let space = randomness_space(layout);
    if space > BigUint::from(budget) {
        return Err(Error::EnumerationBound {
            size: space.to_string(),
            bound: budget,
        });
    }
    let (n, mu, lambda) = (layout.databases(), layout.functions(), layout.lambda());
    let bits = layout.sign_bits();
    let permutations: Vec<Vec<usize>> = (0..lambda).permutations(lambda).collect();
    let distributions = (0..mu)
        .into_par_iter()
        .map(|v| {
            let mut counts: Vec<HashMap<Query, u64>> = vec![HashMap::new(); n];
            for permutation in &permutations {
                for word in 0..1u64 << bits {
                    let rnd = QueryRandomness {
                        permutation: permutation.clone(),
                        signs: (0..bits).map(|i| word >> i & 1 == 1).collect(),
                    };
                    for (db, q) in generator(layout, v, &rnd)?.into_iter().enumerate() {
                        *counts[db].entry(q).or_default() += 1;
                    }
                }
            }
            Ok(counts)
        })
        .collect::<Result<Vec<_>>>()?;

    let databases: Vec<DatabaseAudit> = (0..n)
        .map(|db| {
            let identical = distributions.iter().all(|d| d[db] == distributions[0][db]);
            DatabaseAudit {
                database: db,
                distinct: distributions[0][db].len(),
                identical: Some(identical),
                statistic: None,
                degrees_of_freedom: None,
                p_value: None,
            }
        })
        .collect();
    Ok(PrivacyAudit {
        mode: AuditMode::Exhaustive,
        passed: databases.iter().all(|d| d.identical == Some(true)),
        draws_per_index: space.to_u64().expect("within budget"),
        significance: None,
        databases,
    })
}

/// Request skeleton (function sets and flags), the signs of the first four
/// requests, and the subpacket of the very first term.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Fingerprint {
    skeleton: Vec<(u64, bool)>,
    signs: Vec<i8>,
    first_subpacket: usize,
}

impl Fingerprint {
    fn of(q: &Query) -> Self {
        let skeleton = q
            .requests()
            .map(|r| {
                (
                    r.terms.iter().fold(0u64, |m, t| m | 1 << t.function),
                    r.redundant,
                )
            })
            .collect();
        let signs = q
            .requests()
            .take(4)
            .flat_map(|r| r.terms.iter().map(|t| t.sign))
            .collect();
        let first_subpacket = q.requests().next().map_or(0, |r| r.terms[0].subpacket);
        Self {
            skeleton,
            signs,
            first_subpacket,
        }
    }
}

fn sampled_audit(
    layout: &QueryLayout,
    generator: QueryGenerator,
    samples: u64,
    seed: u64,
) -> Result<PrivacyAudit> {
    if samples == 0 {
        return Err(Error::Precondition("at least one sample is needed".into()));
    }
    let (n, mu) = (layout.databases(), layout.functions());
    let tallies = (0..mu)
        .into_par_iter()
        .map(|v| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(v as u64);
            let mut counts: Vec<HashMap<Fingerprint, u64>> = vec![HashMap::new(); n];
            for _ in 0..samples {
                let rnd = QueryRandomness::sample(layout, &mut rng);
                for (db, q) in generator(layout, v, &rnd)?.iter().enumerate() {
                    *counts[db].entry(Fingerprint::of(q)).or_default() += 1;
                }
            }
            Ok(counts)
        })
        .collect::<Result<Vec<_>>>()?;

    let databases = (0..n)
        .map(|db| {
            let mut table: BTreeMap<&Fingerprint, Vec<u64>> = BTreeMap::new();
            for (v, counts) in tallies.iter().enumerate() {
                for (fp, &c) in &counts[db] {
                    table.entry(fp).or_insert_with(|| vec![0; mu])[v] = c;
                }
            }
            let rows: Vec<Vec<u64>> = table.into_values().collect();
            let (statistic, dof) = chi_square_homogeneity(&rows);
            let p_value = if dof == 0 {
                1.0
            } else {
                ChiSquared::new(dof as f64)
                    .map_err(|e| Error::Precondition(e.to_string()))?
                    .sf(statistic)
            };
            Ok(DatabaseAudit {
                database: db,
                distinct: rows.len(),
                identical: None,
                statistic: Some(statistic),
                degrees_of_freedom: Some(dof),
                p_value: Some(p_value),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PrivacyAudit {
        mode: AuditMode::Sampled,
        passed: databases
            .iter()
            .all(|d| d.p_value.unwrap() >= AUDIT_SIGNIFICANCE),
        draws_per_index: samples,
        significance: Some(AUDIT_SIGNIFICANCE),
        databases,
    })
}

/// Pearson statistic and degrees of freedom for a categories × groups table.
pub fn chi_square_homogeneity(rows: &[Vec<u64>]) -> (f64, usize) {
    let groups = rows.first().map_or(0, Vec::len);
    let total: u64 = rows.iter().flatten().sum();
    if rows.len() < 2 || groups < 2 || total == 0 {
        return (0.0, 0);
    }
    let col_totals: Vec<u64> = (0..groups)
        .map(|g| rows.iter().map(|r| r[g]).sum())
        .collect();
    let used_cols = col_totals.iter().filter(|&&c| c > 0).count();
    let mut stat = 0.0;
    for row in rows {
        let row_total: u64 = row.iter().sum();
        for (g, &observed) in row.iter().enumerate() {
            let expected = row_total as f64 * col_totals[g] as f64 / total as f64;
            if expected > 0.0 {
                stat += (observed as f64 - expected).powi(2) / expected;
            }
        }
    }
    (stat, (rows.len() - 1) * used_cols.saturating_sub(1))
}
