use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use pmc_core::entropy::{
    h_lin_vec, h_mono_set_bruteforce, h_mono_set_decomposition, h_mono_single, EntropyResult,
    MonomialSet, DEFAULT_ENUMERATION_BOUND,
};
use pmc_core::ffield::{
    make_field_with_bound, parse_field_spec, prime_power, FiniteField, DEFAULT_TABLE_BOUND,
};
use pmc_core::harness::{
    c_pir, convergence_study, leaky_generator, privacy_audit, private_generator,
    two_function_capacity, write_convergence_csv, AuditMode,
};
use pmc_core::intlinalg::{smith_normal_form, IntMatrix};
use pmc_core::scheme::{run_transcript, SchemeConfig};
use serde::Serialize;

const TABLE_BOUND_VAR: &str = "PMC_TABLE_BOUND";

/// Private monomial computation: entropy tools, the retrieval scheme and its
/// experiments.
#[derive(Debug, Parser)]
#[command(name = "pmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Entropy of monomial evaluations over GF(q), or of A·Y over Z_m.
    Entropy {
        /// Field as p^k; required unless --modulus is given.
        #[arg(long)]
        field: Option<String>,
        /// Degree matrix as a JSON array of arrays, or a path to a file holding one.
        #[arg(long)]
        matrix: String,
        /// Defaults to formula for one row and decomposition otherwise.
        #[arg(long, value_enum)]
        method: Option<EntropyMethod>,
        /// Compute H(A·Y) for Y uniform on Z_m^t instead.
        #[arg(long, conflicts_with = "field")]
        modulus: Option<u64>,
        /// Limit on q^f for brute-force enumeration.
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BOUND)]
        bound: u64,
    },
    /// Smith normal form of an integer matrix.
    Snf {
        /// JSON array of arrays, or a path to a file holding one.
        #[arg(long)]
        matrix: String,
    },
    /// One end-to-end run of the scheme, printed as a JSON transcript.
    SchemeRun {
        #[arg(long)]
        field: String,
        #[arg(long)]
        matrix: String,
        /// Number of databases.
        #[arg(long)]
        n: usize,
        /// Desired function, 0-based.
        #[arg(long)]
        v: usize,
        /// Seed of the user's query randomness.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seed of the uniform storage; defaults to --seed.
        #[arg(long)]
        storage_seed: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Monte-Carlo rate experiments over a list of field orders.
    Convergence {
        #[arg(long)]
        matrix: String,
        #[arg(long)]
        n: usize,
        /// Comma-separated prime powers.
        #[arg(long, value_delimiter = ',', required = true)]
        q_grid: Vec<u64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Checks that database queries do not depend on the desired index.
    PrivacyAudit {
        #[arg(long)]
        matrix: String,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum)]
        mode: AuditModeArg,
        /// Largest randomness space an exhaustive audit may enumerate.
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        /// Samples per desired index in sampled mode.
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Audit the planted-leak generator instead of the scheme.
        #[arg(long)]
        leaky: bool,
    },
    /// PIR capacity C_PIR(n, f), or the two-function capacity of a matrix.
    Capacity {
        #[arg(long, required_unless_present = "matrix")]
        n: Option<usize>,
        #[arg(long, required_unless_present = "matrix")]
        f: Option<usize>,
        /// Two-row degree matrix; needs --field.
        #[arg(long, requires = "field", conflicts_with_all = ["n", "f"])]
        matrix: Option<String>,
        #[arg(long)]
        field: Option<String>,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BOUND)]
        bound: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EntropyMethod {
    Formula,
    BruteForce,
    Decomposition,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AuditModeArg {
    Exhaustive,
    Sampled,
}

fn table_bound() -> Result<u64> {
    match std::env::var(TABLE_BOUND_VAR) {
        Ok(s) => s
            .trim()
            .parse()
            .with_context(|| format!("{TABLE_BOUND_VAR} must be an unsigned integer, got {s:?}")),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_TABLE_BOUND),
        Err(e) => Err(e).context(TABLE_BOUND_VAR),
    }
}

fn field(spec: &str) -> Result<Arc<FiniteField>> {
    let (p, k) = parse_field_spec(spec)?;
    Ok(Arc::new(make_field_with_bound(p, k, table_bound()?)?))
}

fn matrix(source: &str) -> Result<IntMatrix> {
    let text = if source.trim_start().starts_with('[') {
        source.to_owned()
    } else {
        fs::read_to_string(source).with_context(|| format!("reading matrix file {source}"))?
    };
    serde_json::from_str(&text).with_context(|| format!("malformed matrix {source:?}"))
}

fn monomials(source: &str) -> Result<MonomialSet> {
    Ok(MonomialSet::new(matrix(source)?)?)
}

fn emit_json<T: Serialize>(value: &T, output: Option<&PathBuf>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(text.as_bytes(), output)
}

fn emit(bytes: &[u8], output: Option<&PathBuf>) -> Result<()> {
    match output {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => Ok(io::stdout().write_all(bytes)?),
    }
}

fn entropy(
    field_spec: Option<&str>,
    matrix_src: &str,
    method: Option<EntropyMethod>,
    modulus: Option<u64>,
    bound: u64,
) -> Result<EntropyResult> {
    if let Some(m) = modulus {
        if !matches!(method, None | Some(EntropyMethod::Formula)) {
            bail!("--modulus only supports the formula method");
        }
        return Ok(h_lin_vec(&matrix(matrix_src)?, &m.into())?);
    }
    let Some(spec) = field_spec else {
        bail!("either --field or --modulus is required");
    };
    let ms = monomials(matrix_src)?;
    let method = method.unwrap_or(if ms.len() == 1 {
        EntropyMethod::Formula
    } else {
        EntropyMethod::Decomposition
    });
    match method {
        EntropyMethod::Formula => {
            if ms.len() != 1 {
                bail!("the formula method needs a single row; use decomposition or brute-force");
            }
            let (p, k) = parse_field_spec(spec)?;
            Ok(h_mono_single(ms.exponents(0), p.pow(k))?)
        }
        EntropyMethod::BruteForce => Ok(h_mono_set_bruteforce(&ms, &*field(spec)?, bound)?),
        EntropyMethod::Decomposition => {
            let f = field(spec)?;
            Ok(h_mono_set_decomposition(&ms, f.order(), Some((&f, bound)))?)
        }
    }
}

#[derive(Serialize)]
struct SnfOutput {
    rank: usize,
    invariant_factors: Vec<serde_json::Value>,
    d: IntMatrix,
    p: IntMatrix,
    q: IntMatrix,
}

/// A JSON number when it fits `i64`, a decimal string otherwise.
fn big_to_json(x: impl ToString) -> serde_json::Value {
    let s = x.to_string();
    s.parse::<i64>().map_or_else(|_| s.into(), Into::into)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Entropy {
            field,
            matrix,
            method,
            modulus,
            bound,
        } => emit_json(
            &entropy(field.as_deref(), &matrix, method, modulus, bound)?,
            None,
        ),
        Command::Snf { matrix: src } => {
            let snf = smith_normal_form(&matrix(&src)?);
            emit_json(
                &SnfOutput {
                    rank: snf.rank(),
                    invariant_factors: snf.invariant_factors.iter().map(big_to_json).collect(),
                    d: snf.d,
                    p: snf.p,
                    q: snf.q,
                },
                None,
            )
        }
        Command::SchemeRun {
            field: spec,
            matrix,
            n,
            v,
            seed,
            storage_seed,
            output,
        } => {
            let config = SchemeConfig::new(n, monomials(&matrix)?, field(&spec)?)?;
            let t = run_transcript(&config, v, storage_seed.unwrap_or(seed), seed)?;
            emit_json(&t.record(&config), output.as_ref())
        }
        Command::Convergence {
            matrix,
            n,
            q_grid,
            trials,
            seed,
            format,
            output,
        } => {
            if let Some(bad) = q_grid.iter().find(|&&q| prime_power(q).is_none()) {
                bail!("q-grid entry {bad} is not a prime power");
            }
            let reports = convergence_study(
                n,
                &monomials(&matrix)?,
                &q_grid,
                trials,
                seed,
                table_bound()?,
            )?;
            match format {
                Format::Json => emit_json(&reports, output.as_ref()),
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_convergence_csv(&reports, &mut buf)?;
                    emit(&buf, output.as_ref())
                }
            }
        }
        Command::PrivacyAudit {
            matrix,
            n,
            mode,
            budget,
            samples,
            seed,
            leaky,
        } => {
            let layout = pmc_core::scheme::QueryLayout::new(n, &monomials(&matrix)?)?;
            let generator = if leaky {
                leaky_generator
            } else {
                private_generator
            };
            let mode = match mode {
                AuditModeArg::Exhaustive => AuditMode::Exhaustive,
                AuditModeArg::Sampled => AuditMode::Sampled,
            };
            emit_json(
                &privacy_audit(&layout, generator, mode, budget, samples, seed)?,
                None,
            )
        }
        Command::Capacity {
            n,
            f,
            matrix,
            field: spec,
            bound,
        } => {
            if let Some(src) = matrix {
                let spec = spec.expect("required by clap");
                let value = two_function_capacity(&monomials(&src)?, &*field(&spec)?, bound)?;
                emit_json(
                    &serde_json::json!({ "field": spec, "two_function_capacity": value }),
                    None,
                )
            } else {
                let (n, f) = (n.expect("required by clap"), f.expect("required by clap"));
                emit_json(
                    &serde_json::json!({ "n": n, "f": f, "c_pir": c_pir(n, f)? }),
                    None,
                )
            }
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
