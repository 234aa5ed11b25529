use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layout::{mask, QueryLayout};
use crate::error::{Error, Result};

/// One `(function, subpacket, sign)` triple of a symbol request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term {
    pub function: usize,
    pub subpacket: usize,
    pub sign: i8,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Request {
    pub terms: Vec<Term>,
    /// Suppressed by a database answering multiplicatively.
    pub redundant: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    pub requests: Vec<Request>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Query {
    pub database: usize,
    pub blocks: Vec<Block>,
}

impl Query {
    pub fn requests(&self) -> impl Iterator<Item = &Request> {
        self.blocks.iter().flat_map(|b| &b.requests)
    }

    /// Same requests with every redundancy flag cleared.
    pub fn without_flags(&self) -> Query {
        let mut q = self.clone();
        for r in q.blocks.iter_mut().flat_map(|b| &mut b.requests) {
            r.redundant = false;
        }
        q
    }
}

/// The user's private randomness: a permutation of the subpacket indices and
/// one sign bit per request and per fresh label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRandomness {
    pub permutation: Vec<usize>,
    pub signs: Vec<bool>,
}

impl QueryRandomness {
    pub fn sample<R: Rng + ?Sized>(layout: &QueryLayout, rng: &mut R) -> Self {
        let mut permutation: Vec<usize> = (0..layout.lambda()).collect();
        permutation.shuffle(rng);
        let signs = (0..layout.sign_bits()).map(|_| rng.random()).collect();
        Self { permutation, signs }
    }

    pub fn from_seed(layout: &QueryLayout, seed: u64) -> Self {
        Self::sample(layout, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Location of a symbol: database, 0-based block, position within the block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolRef {
    pub database: usize,
    pub block: usize,
    pub position: usize,
}

/// How one desired evaluation is peeled: `F_v = sign·(y − κ·y_side)`, or
/// `(Y · Y_side^{−κ})^{sign}` multiplicatively.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recovery {
    pub subpacket: usize,
    pub symbol: SymbolRef,
    pub sign: i8,
    pub side_info: Option<(SymbolRef, i8)>,
}

/// Private decoding data kept by the user.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodePlan {
    pub desired: usize,
    /// Per-symbol sign `σ`, indexed `[database][block][position]`.
    pub sigma: Vec<Vec<Vec<i8>>>,
    /// One entry per subpacket of `F_v`.
    pub recoveries: Vec<Recovery>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedQueries {
    pub pir: Vec<Query>,
    pub plc: Vec<Query>,
    pub plan: DecodePlan,
}

fn parity_sign(count: usize) -> i8 {
    if count.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Sign of `e_u ∧ e_T` relative to the sorted wedge of `T ∪ {u}`.
fn wedge_sign(u: usize, t: u64) -> i8 {
    parity_sign((t & ((1u64 << u) - 1)).count_ones() as usize)
}

fn bits(m: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |&i| m >> i & 1 == 1)
}

struct SignStream<'a> {
    bits: &'a [bool],
    cursor: usize,
}

impl SignStream<'_> {
    fn next(&mut self) -> i8 {
        let b = self.bits[self.cursor];
        self.cursor += 1;
        if b {
            -1
        } else {
            1
        }
    }
}

pub fn gen_queries(layout: &QueryLayout, v: usize, seed: u64) -> Result<GeneratedQueries> {
    gen_queries_with(layout, v, &QueryRandomness::from_seed(layout, seed))
}

/// Builds both query sets from explicit randomness.
///
/// In group `g` of block `b` at database `d`, labels `T ∌ v` take fresh
/// subpackets in order from the permutation. A label `T ∋ v` reuses the
/// subpacket of label `T∖{v}` in the source group at another database, so
/// that the undesired part of symbol `T∖{v} ∪ {v}` equals ±(source symbol
/// `T∖{v}`), which the user has already downloaded.
pub fn gen_queries_with(
    layout: &QueryLayout,
    v: usize,
    rnd: &QueryRandomness,
) -> Result<GeneratedQueries> {
    let (n, mu, lambda) = (layout.databases(), layout.functions(), layout.lambda());
    if v >= mu {
        return Err(Error::Precondition(format!(
            "desired index {v} out of range for {mu} functions"
        )));
    }
    if rnd.permutation.len() != lambda || rnd.signs.len() != layout.sign_bits() {
        return Err(Error::Precondition(
            "randomness does not match the query layout".into(),
        ));
    }
    let vbit = 1u64 << v;
    let mut signs = SignStream {
        bits: &rnd.signs,
        cursor: 0,
    };
    let mut fresh = 0;
    let mut queries: Vec<Query> = (0..n)
        .map(|database| Query {
            database,
            blocks: Vec::with_capacity(mu),
        })
        .collect();
    let mut sigma = vec![Vec::with_capacity(mu); n];
    let mut recoveries = Vec::with_capacity(lambda);
    // (subpacket, τ) per label, indexed [database][group][label]; previous block only.
    let mut prev_labels: Vec<Vec<Vec<(usize, i8)>>> = Vec::new();

    for (bi, bl) in layout.blocks().iter().enumerate() {
        let per_group = bl.symbols_per_group();
        let mut labels_here = Vec::with_capacity(n);
        for db in 0..n {
            let mut requests = Vec::with_capacity(bl.groups * per_group);
            let mut block_sigma = Vec::with_capacity(bl.groups * per_group);
            let mut group_labels = Vec::with_capacity(bl.groups);
            for g in 0..bl.groups {
                let group_sigma: Vec<i8> = (0..per_group).map(|_| signs.next()).collect();
                let source = (bi > 0).then(|| layout.source_group(db, bi, g));
                let labels: Vec<(usize, i8)> = bl
                    .labels
                    .iter()
                    .map(|t| {
                        let t = mask(t);
                        if t & vbit == 0 {
                            let sp = rnd.permutation[fresh];
                            fresh += 1;
                            (sp, signs.next())
                        } else {
                            let (sdb, sg) = source.expect("labels containing v need b ≥ 2");
                            let base = t & !vbit;
                            let pos = layout.blocks()[bi - 1].label_position(base);
                            let (sp, tau) = prev_labels[sdb][sg][pos];
                            let beta = parity_sign((base >> v >> 1).count_ones() as usize);
                            (sp, tau * beta)
                        }
                    })
                    .collect();

                for (si, s) in bl.subsets.iter().enumerate() {
                    let s = mask(s);
                    let terms: Vec<Term> = bits(s)
                        .map(|u| {
                            let t = s & !(1 << u);
                            let (sp, tau) = labels[bl.label_position(t)];
                            Term {
                                function: u,
                                subpacket: sp,
                                sign: group_sigma[si] * wedge_sign(u, t) * tau,
                            }
                        })
                        .collect();
                    if s & vbit != 0 {
                        let t = s & !vbit;
                        let desired = terms.iter().find(|term| term.function == v).unwrap();
                        let side_info = source.map(|(sdb, sg)| {
                            let prev = &layout.blocks()[bi - 1];
                            let position = sg * prev.symbols_per_group() + prev.subset_position(t);
                            let src = &queries[sdb].blocks[bi - 1].requests[position];
                            let mine = terms.iter().find(|term| term.function != v).unwrap();
                            let theirs = src
                                .terms
                                .iter()
                                .find(|x| x.function == mine.function)
                                .unwrap();
                            debug_assert_eq!(mine.subpacket, theirs.subpacket);
                            let kappa = mine.sign * theirs.sign;
                            let symbol = SymbolRef {
                                database: sdb,
                                block: bi - 1,
                                position,
                            };
                            (symbol, kappa)
                        });
                        recoveries.push(Recovery {
                            subpacket: desired.subpacket,
                            symbol: SymbolRef {
                                database: db,
                                block: bi,
                                position: requests.len(),
                            },
                            sign: desired.sign,
                            side_info,
                        });
                    }
                    requests.push(Request {
                        terms,
                        redundant: bl.redundant[si],
                    });
                }
                block_sigma.extend(group_sigma);
                group_labels.push(labels);
            }
            queries[db].blocks.push(Block { requests });
            sigma[db].push(block_sigma);
            labels_here.push(group_labels);
        }
        prev_labels = labels_here;
    }
    debug_assert_eq!(fresh, lambda);
    debug_assert_eq!(signs.cursor, rnd.signs.len());

    recoveries.sort_by_key(|r| r.subpacket);
    let pir = queries.iter().map(Query::without_flags).collect();
    Ok(GeneratedQueries {
        pir,
        plc: queries,
        plan: DecodePlan {
            desired: v,
            sigma,
            recoveries,
        },
    })
}

/// A deliberately non-private generator: requests whose function set
/// contains the desired index are moved to the front of every block. Used
/// as a negative control for the privacy audit.
pub fn gen_queries_leaky(
    layout: &QueryLayout,
    v: usize,
    rnd: &QueryRandomness,
) -> Result<Vec<Query>> {
    let mut queries = gen_queries_with(layout, v, rnd)?.plc;
    for q in &mut queries {
        for b in &mut q.blocks {
            b.requests
                .sort_by_key(|r| !r.terms.iter().any(|t| t.function == v));
        }
    }
    Ok(queries)
}
