//! Public structure of the queries: blocks, groups, subsets and the linear
//! relations that make some symbols redundant.
//!
//! Block `b` of every database consists of `(n−1)^{b−1}` groups. A group owns
//! one subpacket label per `(b−1)`-subset `T` of the functions and one symbol
//! per `b`-subset `S`; the symbol for `S` combines `φ_u` evaluated at the
//! label of `S∖{u}` for every `u ∈ S`, with the alternating sign of
//! `e_u ∧ e_{S∖u}`. Viewed as linear forms in the label variables, the
//! symbols of a group span `W ∧ Λ^{b−1}`, `W` the column space of the degree
//! matrix, whose codimension is `C(μ−r, b)`. The relations are the `b`-fold
//! wedges of left-kernel vectors of the degree matrix.
//!
//! Everything here depends only on `n` and the degree matrix, never on the
//! desired index.

use std::collections::HashMap;

use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::entropy::MonomialSet;
use crate::error::{Error, Result};
use crate::intlinalg::{rank_int, solve_left_multiple, IntMatrix};

/// Upper limit on the subpacketization `n^μ`.
pub const MAX_SUBPACKETS: usize = 1 << 20;

// Above this many candidate basis subsets the basis is chosen greedily.
const BASIS_SEARCH_LIMIT: usize = 2_000;

/// `multiplier · z_target + Σ coeff · z_position = 0` over the integers, where
/// `z_S` is a group symbol with its per-symbol sign removed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub target: usize,
    pub multiplier: BigInt,
    pub terms: Vec<(usize, BigInt)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    /// Number of functions per symbol (`b`).
    pub size: usize,
    /// `(n−1)^{b−1}`.
    pub groups: usize,
    /// All `b`-subsets of the functions, lexicographic.
    pub subsets: Vec<Vec<usize>>,
    /// All `(b−1)`-subsets, lexicographic; one subpacket label each.
    pub labels: Vec<Vec<usize>>,
    pub redundant: Vec<bool>,
    pub relations: Vec<Relation>,
    label_index: HashMap<u64, usize>,
    subset_index: HashMap<u64, usize>,
}

impl BlockLayout {
    pub fn symbols_per_group(&self) -> usize {
        self.subsets.len()
    }

    pub fn redundant_per_group(&self) -> usize {
        self.redundant.iter().filter(|&&r| r).count()
    }

    pub fn label_position(&self, mask: u64) -> usize {
        self.label_index[&mask]
    }

    pub fn subset_position(&self, mask: u64) -> usize {
        self.subset_index[&mask]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryLayout {
    n: usize,
    mu: usize,
    rank: usize,
    lambda: usize,
    basis: Vec<usize>,
    dependent: Vec<usize>,
    /// For each dependent function `w`: `m_w·a_w = Σ_{u∈basis} c_u a_u`.
    row_relations: Vec<RowRelation>,
    blocks: Vec<BlockLayout>,
}

/// `(w, m_w, c)`: `m_w·a_w = Σ c_u a_u` over the basis rows.
pub type RowRelation = (usize, BigInt, Vec<BigInt>);

pub(crate) fn mask(set: &[usize]) -> u64 {
    set.iter().fold(0, |m, &u| m | 1 << u)
}

impl QueryLayout {
    pub fn new(n: usize, monomials: &MonomialSet) -> Result<Self> {
        let mu = monomials.len();
        if n < 2 {
            return Err(Error::Precondition(format!(
                "at least two databases are needed, got {n}"
            )));
        }
        if mu == 0 || mu > 20 {
            return Err(Error::Precondition(format!(
                "number of functions must be in 1..=20, got {mu}"
            )));
        }
        let lambda = (n as u64)
            .checked_pow(mu as u32)
            .filter(|&l| l <= MAX_SUBPACKETS as u64)
            .ok_or_else(|| {
                Error::Precondition(format!(
                    "subpacketization {n}^{mu} exceeds {MAX_SUBPACKETS}"
                ))
            })? as usize;
        let a = monomials.degree_matrix();
        let rank = monomials.rank();
        let (basis, row_relations) = choose_basis(a, rank);
        let dependent: Vec<usize> = (0..mu).filter(|u| !basis.contains(u)).collect();

        // Left-kernel vectors k_w = m_w e_w − Σ c_u e_u, one row per dependent w.
        let kernel = if dependent.is_empty() {
            None
        } else {
            let mut k = IntMatrix::zeros(dependent.len(), mu);
            for (row, (w, m, coeffs)) in row_relations.iter().enumerate() {
                k[(row, *w)] = m.clone();
                for (c, &u) in coeffs.iter().zip(&basis) {
                    k[(row, u)] = -c;
                }
            }
            Some(k)
        };

        let blocks = (1..=mu)
            .map(|b| {
                let subsets: Vec<Vec<usize>> = (0..mu).combinations(b).collect();
                let labels: Vec<Vec<usize>> = (0..mu).combinations(b - 1).collect();
                let redundant: Vec<bool> = subsets
                    .iter()
                    .map(|s| s.iter().all(|u| dependent.contains(u)))
                    .collect();
                let relations = match &kernel {
                    Some(k) => block_relations(k, &dependent, &subsets, &redundant),
                    None => Vec::new(),
                };
                BlockLayout {
                    size: b,
                    groups: (n - 1).pow(b as u32 - 1),
                    label_index: labels
                        .iter()
                        .enumerate()
                        .map(|(i, t)| (mask(t), i))
                        .collect(),
                    subset_index: subsets
                        .iter()
                        .enumerate()
                        .map(|(i, s)| (mask(s), i))
                        .collect(),
                    subsets,
                    labels,
                    redundant,
                    relations,
                }
            })
            .collect();

        Ok(Self {
            n,
            mu,
            rank,
            lambda,
            basis,
            dependent,
            row_relations,
            blocks,
        })
    }

    pub fn databases(&self) -> usize {
        self.n
    }

    pub fn functions(&self) -> usize {
        self.mu
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Subpackets per message, `n^μ`.
    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn basis(&self) -> &[usize] {
        &self.basis
    }

    pub fn dependent(&self) -> &[usize] {
        &self.dependent
    }

    /// `(w, m_w, c)` with `m_w·a_w = Σ c_u a_u` over the basis rows.
    pub fn row_relations(&self) -> &[RowRelation] {
        &self.row_relations
    }

    pub fn blocks(&self) -> &[BlockLayout] {
        &self.blocks
    }

    /// Symbols per database in block `b` (0-based), with and without the
    /// redundant ones: `((n−1)^b C(μ, b+1), (n−1)^b C(μ−r, b+1))`.
    pub fn block_counts(&self, b: usize) -> (usize, usize) {
        let bl = &self.blocks[b];
        (
            bl.groups * bl.symbols_per_group(),
            bl.groups * bl.redundant_per_group(),
        )
    }

    /// Symbols one database sends when nothing is suppressed.
    pub fn pir_download_per_database(&self) -> usize {
        (0..self.mu).map(|b| self.block_counts(b).0).sum()
    }

    /// Symbols one database sends when redundant symbols are suppressed.
    pub fn reduced_download_per_database(&self) -> usize {
        (0..self.mu)
            .map(|b| {
                let (all, red) = self.block_counts(b);
                all - red
            })
            .sum()
    }

    /// Block and group in the database `source` whose undesired-only symbols
    /// feed group `group` of block `block` (0-based, `block ≥ 1`) at `database`.
    pub(crate) fn source_group(
        &self,
        database: usize,
        block: usize,
        group: usize,
    ) -> (usize, usize) {
        debug_assert!(block >= 1);
        let per = self.blocks[block - 1].groups;
        let idx = group / per;
        let source = (0..self.n).filter(|&d| d != database).nth(idx).unwrap();
        (source, group % per)
    }

    /// Number of sign bits consumed per query generation.
    pub fn sign_bits(&self) -> usize {
        let per_db: usize = self
            .blocks
            .iter()
            .map(|bl| {
                let fresh_labels = bl.labels.iter().filter(|t| !t.contains(&0)).count();
                bl.groups * (bl.subsets.len() + fresh_labels)
            })
            .sum();
        per_db * self.n
    }
}

/// Picks `r` independent rows so that the remaining rows are integer
/// combinations of them whenever possible. Candidates are scanned in
/// lexicographic order; the first with the fewest non-unit multipliers (then
/// the smallest product of multipliers) wins.
fn choose_basis(a: &IntMatrix, rank: usize) -> (Vec<usize>, Vec<RowRelation>) {
    let mu = a.rows();
    let cols: Vec<usize> = (0..a.cols()).collect();
    let relations_for = |basis: &[usize]| -> Option<Vec<RowRelation>> {
        let sub = a.select(basis, &cols);
        if rank_int(&sub) != rank {
            return None;
        }
        (0..mu)
            .filter(|u| !basis.contains(u))
            .map(|w| solve_left_multiple(&sub, a.row(w)).map(|(m, c)| (w, m, c)))
            .collect()
    };
    let score = |rels: &[RowRelation]| {
        let non_unit = rels.iter().filter(|(_, m, _)| !m.is_one()).count();
        let product: BigInt = rels.iter().map(|(_, m, _)| m.clone()).product();
        (non_unit, product)
    };

    let candidates = (0..mu).combinations(rank);
    let count = crate::harness::binomial(mu as u64, rank as u64);
    if count <= BASIS_SEARCH_LIMIT as u64 {
        let mut best: Option<(Vec<usize>, Vec<_>)> = None;
        for basis in candidates {
            if let Some(rels) = relations_for(&basis) {
                let better = best.as_ref().is_none_or(|(_, b)| score(&rels) < score(b));
                if better {
                    best = Some((basis, rels));
                }
            }
        }
        return best.expect("some r rows are independent");
    }

    // Greedy: keep each row that raises the rank.
    let mut basis = Vec::new();
    for u in 0..mu {
        basis.push(u);
        if rank_int(&a.select(&basis, &cols)) < basis.len() {
            basis.pop();
        }
        if basis.len() == rank {
            break;
        }
    }
    let rels = relations_for(&basis).expect("greedy basis spans the row space");
    (basis, rels)
}

/// Relations of one block: for every redundant subset `S0` (all of it
/// dependent), `c(S) = det K[S0, S]`. Because `K` restricted to the dependent
/// columns is diagonal, `c` vanishes on every other redundant subset.
fn block_relations(
    kernel: &IntMatrix,
    dependent: &[usize],
    subsets: &[Vec<usize>],
    redundant: &[bool],
) -> Vec<Relation> {
    subsets
        .iter()
        .enumerate()
        .filter(|&(i, _)| redundant[i])
        .map(|(target, s0)| {
            let rows: Vec<usize> = s0
                .iter()
                .map(|w| dependent.iter().position(|d| d == w).unwrap())
                .collect();
            let coeff = |s: &[usize]| {
                kernel
                    .select(&rows, s)
                    .determinant()
                    .expect("square selection")
            };
            let multiplier = coeff(s0);
            let terms = subsets
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != target)
                .map(|(i, s)| (i, coeff(s)))
                .filter(|(_, c)| !c.is_zero())
                .collect::<Vec<_>>();
            debug_assert!(terms.iter().all(|&(i, _)| !redundant[i]));
            Relation {
                target,
                multiplier,
                terms,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(n: usize, rows: &[Vec<i64>]) -> QueryLayout {
        QueryLayout::new(n, &MonomialSet::from_rows(rows).unwrap()).unwrap()
    }

    fn binom(n: usize, k: usize) -> usize {
        crate::harness::binomial(n as u64, k as u64) as usize
    }

    #[test]
    fn counts_for_three_functions_rank_two() {
        let l = layout(2, &[vec![1, 0], vec![0, 1], vec![1, 1]]);
        assert_eq!(l.lambda(), 8);
        assert_eq!(l.basis(), &[0, 1]);
        assert_eq!(l.dependent(), &[2]);
        let per_block: Vec<usize> = (0..3)
            .map(|b| {
                let (all, red) = l.block_counts(b);
                all - red
            })
            .collect();
        assert_eq!(per_block, vec![2, 3, 1]);
        assert_eq!(l.pir_download_per_database(), 7);
        assert_eq!(l.reduced_download_per_database(), 6);
    }

    #[test]
    fn counts_match_binomial_formulas() {
        let matrices: Vec<Vec<Vec<i64>>> = vec![
            vec![vec![1]],
            vec![vec![1, 0], vec![0, 1]],
            vec![vec![1], vec![2]],
            vec![vec![1, 0], vec![0, 1], vec![1, 1]],
            vec![vec![1], vec![2], vec![3]],
            vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]],
        ];
        for n in [2, 3] {
            for rows in &matrices {
                let l = layout(n, rows);
                let (mu, r) = (l.functions(), l.rank());
                for b in 1..=mu {
                    let (all, red) = l.block_counts(b - 1);
                    assert_eq!(all, (n - 1).pow(b as u32 - 1) * binom(mu, b));
                    assert_eq!(red, (n - 1).pow(b as u32 - 1) * binom(mu - r, b));
                }
            }
        }
    }

    #[test]
    fn basis_prefers_integer_dependencies() {
        // With basis {0,1}, row 2 needs multiplier 2; with {0,2}, row 1 = 2·row2 − row0.
        let l = layout(2, &[vec![2, 0], vec![0, 2], vec![1, 1]]);
        assert_eq!(l.basis(), &[0, 2]);
        assert!(l.row_relations().iter().all(|(_, m, _)| m.is_one()));

        let l = layout(2, &[vec![2, 0], vec![0, 2], vec![1, 1], vec![0, 1]]);
        assert!(l.row_relations().iter().all(|(_, m, _)| m.is_one()));
    }

    #[test]
    fn relations_vanish_identically() {
        // Check Σ c(S) z_S = 0 for random integer label vectors.
        let rows = vec![
            vec![1, 2, 0],
            vec![0, 1, 1],
            vec![1, 3, 1],
            vec![2, 4, 0],
            vec![1, 1, -1],
        ];
        let ms = MonomialSet::from_rows(&rows).unwrap();
        let l = QueryLayout::new(2, &ms).unwrap();
        assert_eq!(l.rank(), 2);
        let f = rows[0].len();
        let mut seed = 7u64;
        let mut next = || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seed >> 33) % 21) as i64 - 10
        };
        for bl in l.blocks() {
            let x: Vec<Vec<i64>> = bl
                .labels
                .iter()
                .map(|_| (0..f).map(|_| next()).collect())
                .collect();
            let z: Vec<i64> = bl
                .subsets
                .iter()
                .map(|s| {
                    s.iter()
                        .map(|&u| {
                            let t: Vec<usize> = s.iter().copied().filter(|&w| w != u).collect();
                            let sign = if t.iter().filter(|&&w| w < u).count() % 2 == 0 {
                                1
                            } else {
                                -1
                            };
                            let xt = &x[bl.label_position(mask(&t))];
                            sign * rows[u].iter().zip(xt).map(|(a, b)| a * b).sum::<i64>()
                        })
                        .sum()
                })
                .collect();
            assert_eq!(bl.relations.len(), bl.redundant_per_group());
            for rel in &bl.relations {
                let mut total = BigInt::from(z[rel.target]) * &rel.multiplier;
                for (pos, c) in &rel.terms {
                    total += BigInt::from(z[*pos]) * c;
                }
                assert!(total.is_zero(), "relation {rel:?} in block {}", bl.size);
            }
        }
    }

    #[test]
    fn rejects_degenerate_configs() {
        let ms = MonomialSet::from_rows(&[vec![1]]).unwrap();
        assert!(QueryLayout::new(1, &ms).is_err());
        let big: Vec<Vec<i64>> = (0..21).map(|_| vec![1]).collect();
        assert!(QueryLayout::new(2, &MonomialSet::from_rows(&big).unwrap()).is_err());
    }
}
