//! Private retrieval of one of `μ` monomial functions from `n` replicated
//! databases.
//!
//! The user uploads two query sets. Databases answer the first with signed
//! sums of evaluations (a PIR scheme that ignores the structure of the
//! functions). When storage has no zero and the functions are dependent,
//! they instead answer the second set multiplicatively and drop the symbols
//! the user can reconstruct from integer relations between the exponents.

mod answer;
mod decode;
mod layout;
mod query;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use answer::{
    answer_mult, answer_pir, direct_evaluation, dispatch, evaluate_all, respond, Answer, Mode,
    Storage,
};
pub use decode::{decode, infer_mode};
pub use layout::{BlockLayout, QueryLayout, Relation, RowRelation, MAX_SUBPACKETS};
pub use query::{
    gen_queries, gen_queries_leaky, gen_queries_with, Block, DecodePlan, GeneratedQueries, Query,
    QueryRandomness, Recovery, Request, SymbolRef, Term,
};

use crate::entropy::MonomialSet;
use crate::error::{Error, Result};
use crate::ffield::{Elem, FiniteField};
use crate::intlinalg::IntMatrix;

#[derive(Clone, Debug)]
pub struct SchemeConfig {
    monomials: MonomialSet,
    field: Arc<FiniteField>,
    layout: QueryLayout,
}

impl SchemeConfig {
    pub fn new(n: usize, monomials: MonomialSet, field: Arc<FiniteField>) -> Result<Self> {
        let layout = QueryLayout::new(n, &monomials)?;
        Ok(Self {
            monomials,
            field,
            layout,
        })
    }

    pub fn n(&self) -> usize {
        self.layout.databases()
    }

    pub fn mu(&self) -> usize {
        self.monomials.len()
    }

    /// Number of messages `f`, the number of variables of each function.
    pub fn messages(&self) -> usize {
        self.monomials.variables()
    }

    pub fn lambda(&self) -> usize {
        self.layout.lambda()
    }

    pub fn rank(&self) -> usize {
        self.monomials.rank()
    }

    pub fn monomials(&self) -> &MonomialSet {
        &self.monomials
    }

    pub fn field(&self) -> &FiniteField {
        &self.field
    }

    pub fn layout(&self) -> &QueryLayout {
        &self.layout
    }

    pub fn record(&self) -> ConfigRecord {
        ConfigRecord {
            n: self.n(),
            mu: self.mu(),
            f: self.messages(),
            lambda: self.lambda(),
            rank: self.rank(),
            field: format!("{}^{}", self.field.characteristic(), self.field.degree()),
            degree_matrix: self.monomials.degree_matrix().clone(),
        }
    }

    /// Uniform storage from a seed.
    pub fn random_storage(&self, seed: u64) -> Storage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Storage::random(self.messages(), self.lambda(), &self.field, &mut rng)
    }
}

#[derive(Clone, Debug)]
pub struct Transcript {
    pub storage_seed: Option<u64>,
    pub user_seed: u64,
    pub desired: usize,
    pub storage: Storage,
    pub queries: GeneratedQueries,
    pub answers: Vec<Answer>,
    pub mode: Mode,
    /// `Err` holds the message of a decode failure.
    pub decoded: std::result::Result<Vec<Elem>, String>,
    /// Symbols downloaded from each database.
    pub downloaded: Vec<usize>,
}

impl Transcript {
    pub fn total_download(&self) -> usize {
        self.downloaded.iter().sum()
    }

    /// Requests uploaded over both query sets.
    pub fn upload(&self) -> usize {
        self.queries
            .pir
            .iter()
            .chain(&self.queries.plc)
            .map(|q| q.requests().count())
            .sum()
    }

    /// `None` on decode failure.
    pub fn matches_direct_evaluation(&self, config: &SchemeConfig) -> Option<bool> {
        self.decoded.as_ref().ok().map(|d| {
            *d == direct_evaluation(
                &self.storage,
                config.monomials(),
                config.field(),
                self.desired,
            )
        })
    }

    pub fn record(&self, config: &SchemeConfig) -> TranscriptRecord {
        let field = config.field();
        let fmt = |xs: &[Elem]| xs.iter().map(|&x| field.format(x)).collect::<Vec<_>>();
        TranscriptRecord {
            config: config.record(),
            storage_seed: self.storage_seed,
            user_seed: self.user_seed,
            desired: self.desired,
            mode: self.mode,
            downloaded: self.downloaded.clone(),
            upload: self.upload(),
            pir_queries: self.queries.pir.clone(),
            plc_queries: self.queries.plc.clone(),
            answers: self.answers.iter().map(|a| fmt(&a.symbols)).collect(),
            decoded: self.decoded.as_ref().ok().map(|d| fmt(d)),
            decode_error: self.decoded.as_ref().err().cloned(),
            matches_direct: self.matches_direct_evaluation(config),
        }
    }
}

/// Serializable form of a transcript; field elements use the canonical
/// coefficient text encoding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub config: ConfigRecord,
    pub storage_seed: Option<u64>,
    pub user_seed: u64,
    pub desired: usize,
    pub mode: Mode,
    pub downloaded: Vec<usize>,
    pub upload: usize,
    pub pir_queries: Vec<Query>,
    pub plc_queries: Vec<Query>,
    pub answers: Vec<Vec<String>>,
    pub decoded: Option<Vec<String>>,
    pub decode_error: Option<String>,
    pub matches_direct: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub n: usize,
    pub mu: usize,
    pub f: usize,
    pub lambda: usize,
    pub rank: usize,
    pub field: String,
    pub degree_matrix: IntMatrix,
}

/// One full run: storage from `storage_seed`, queries from `user_seed`.
pub fn run_transcript(
    config: &SchemeConfig,
    v: usize,
    storage_seed: u64,
    user_seed: u64,
) -> Result<Transcript> {
    let storage = config.random_storage(storage_seed);
    let mut t = run_with_storage(config, v, storage, user_seed)?;
    t.storage_seed = Some(storage_seed);
    Ok(t)
}

pub fn run_with_storage(
    config: &SchemeConfig,
    v: usize,
    storage: Storage,
    user_seed: u64,
) -> Result<Transcript> {
    if storage.messages() != config.messages() || storage.lambda() != config.lambda() {
        return Err(Error::Precondition(format!(
            "storage is {}×{}, the scheme needs {}×{}",
            storage.messages(),
            storage.lambda(),
            config.messages(),
            config.lambda()
        )));
    }
    let queries = gen_queries(config.layout(), v, user_seed)?;
    let answers = queries
        .pir
        .iter()
        .zip(&queries.plc)
        .map(|(pir, plc)| respond(pir, plc, &storage, config.monomials(), config.field()))
        .collect::<Result<Vec<_>>>()?;
    let mode = infer_mode(config.layout(), &answers)?;
    let decoded = match decode(config.layout(), &queries.plan, &answers, config.field()) {
        Ok(d) => Ok(d),
        Err(Error::Decode(msg)) => Err(msg),
        Err(e) => return Err(e),
    };
    let downloaded = answers.iter().map(|a| a.symbols.len()).collect();
    Ok(Transcript {
        storage_seed: None,
        user_seed,
        desired: v,
        storage,
        queries,
        answers,
        mode,
        decoded,
        downloaded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffield::make_field;

    fn config(n: usize, rows: &[Vec<i64>], p: u64, k: u32) -> SchemeConfig {
        SchemeConfig::new(
            n,
            MonomialSet::from_rows(rows).unwrap(),
            Arc::new(make_field(p, k).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn single_function_downloads_two_symbols() {
        let c = config(2, &[vec![1]], 5, 1);
        let t = run_transcript(&c, 0, 1, 2).unwrap();
        assert_eq!(t.mode, Mode::Pir);
        assert_eq!(t.total_download(), 2);
        assert_eq!(t.matches_direct_evaluation(&c), Some(true));
    }

    #[test]
    fn pir_and_multiplicative_download_counts() {
        let c = config(2, &[vec![1, 0], vec![0, 1], vec![1, 1]], 5, 1);
        let nonzero = Storage::from_fn(2, 8, |i, j| c.field().elem(1 + ((i + j) % 4) as u64));
        let t = run_with_storage(&c, 2, nonzero, 9).unwrap();
        assert_eq!(t.mode, Mode::Multiplicative);
        assert_eq!(t.downloaded, vec![6, 6]);
        assert_eq!(t.matches_direct_evaluation(&c), Some(true));

        let zero = Storage::from_fn(2, 8, |i, j| c.field().elem(((i + j) % 5) as u64));
        let t = run_with_storage(&c, 0, zero, 9).unwrap();
        assert_eq!(t.mode, Mode::Pir);
        assert_eq!(t.total_download(), 14);
        assert_eq!(t.matches_direct_evaluation(&c), Some(true));
    }

    #[test]
    fn decodes_every_index_in_both_modes() {
        let cases: Vec<(usize, Vec<Vec<i64>>, u64, u32)> = vec![
            (2, vec![vec![1, 0], vec![0, 1], vec![1, 1]], 7, 1),
            (3, vec![vec![1, 0], vec![0, 1], vec![1, 1]], 5, 1),
            (2, vec![vec![1, 2], vec![2, 4], vec![3, 6]], 3, 2),
            (
                2,
                vec![vec![1, 0, 1], vec![0, 1, 1], vec![1, 1, 2], vec![-1, 2, 1]],
                11,
                1,
            ),
            (3, vec![vec![2], vec![3]], 2, 3),
            (2, vec![vec![1, 0], vec![0, 1]], 2, 3),
        ];
        for (n, rows, p, k) in cases {
            let c = config(n, &rows, p, k);
            for v in 0..c.mu() {
                for seed in 0..6 {
                    let t = run_transcript(&c, v, seed, 100 + seed).unwrap();
                    assert_eq!(
                        t.matches_direct_evaluation(&c),
                        Some(true),
                        "rows {rows:?} q={p}^{k} v={v} seed={seed} mode={:?}",
                        t.mode
                    );
                }
            }
        }
    }

    #[test]
    fn non_unit_multiplier_is_a_decode_failure() {
        // 2·(3) = 3·(2): the suppressed symbol is only known up to a square root.
        let c = config(2, &[vec![2], vec![3]], 7, 1);
        assert_eq!(c.layout().basis(), &[0]);
        let nonzero = Storage::from_fn(1, 4, |_, j| c.field().elem(1 + j as u64));
        let t = run_with_storage(&c, 0, nonzero, 3).unwrap();
        assert_eq!(t.mode, Mode::Multiplicative);
        assert!(t.decoded.is_err());
        assert_eq!(t.matches_direct_evaluation(&c), None);
    }

    #[test]
    fn record_is_deterministic_json() {
        let c = config(2, &[vec![1, 0], vec![0, 1], vec![1, 1]], 3, 2);
        let a = serde_json::to_string(&run_transcript(&c, 1, 5, 6).unwrap().record(&c)).unwrap();
        let b = serde_json::to_string(&run_transcript(&c, 1, 5, 6).unwrap().record(&c)).unwrap();
        assert_eq!(a, b);
        let back: TranscriptRecord = serde_json::from_str(&a).unwrap();
        assert_eq!(back.config.field, "3^2");
        assert_eq!(back.decoded.unwrap().len(), 8);
    }
}
