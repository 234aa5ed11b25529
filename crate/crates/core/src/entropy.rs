//! Entropies of linear images over `Z_m` and of monomials over `GF(q)`.
//!
//! All variables are independent and uniform. Linear entropies come straight
//! from the Smith normal form. For monomials, a single monomial has a closed
//! form; a set of monomials is computed either by enumerating every input or
//! by conditioning on which variables are zero, where each branch is a linear
//! image over `Z_{q-1}` in the discrete-log domain.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ffield::{Elem, FiniteField};
use crate::intlinalg::{minors_gcd, rank_ffield, smith_normal_form, IntMatrix};

/// Default limit on `q^f` for enumeration oracles.
pub const DEFAULT_ENUMERATION_BOUND: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Formula,
    BruteForce,
    Decomposition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    pub value_bits: f64,
    /// `value_bits / log2(q)` when a field is in context.
    pub value_qary: Option<f64>,
    pub method: Method,
}

impl EntropyResult {
    fn bits(value_bits: f64, method: Method) -> Self {
        Self {
            value_bits,
            value_qary: None,
            method,
        }
    }

    fn in_field(value_bits: f64, q: u64, method: Method) -> Self {
        Self {
            value_bits,
            value_qary: Some(value_bits / (q as f64).log2()),
            method,
        }
    }
}

fn log2_big(x: &BigInt) -> f64 {
    // Only used on values bounded by the modulus, which fit an f64 exactly
    // enough for entropy purposes.
    x.to_f64().expect("finite").log2()
}

fn check_modulus(m: &BigInt) -> Result<()> {
    if *m <= BigInt::one() {
        return Err(Error::Modulus(m.to_string()));
    }
    Ok(())
}

/// `H(a·Y)` for `Y` uniform on `Z_m`: `log m − log gcd(a, m)`.
pub fn h_lin_single(a: &BigInt, m: &BigInt) -> Result<EntropyResult> {
    check_modulus(m)?;
    let g = a.gcd(m);
    Ok(EntropyResult::bits(
        log2_big(m) - log2_big(&g),
        Method::Formula,
    ))
}

/// `H(A·Y)` for `Y` uniform on `Z_m^t`: `r log m − Σ_{i≤r} log gcd(d_i, m)`
/// with `r` the integer rank and `d_i` the invariant factors.
pub fn h_lin_vec(a: &IntMatrix, m: &BigInt) -> Result<EntropyResult> {
    check_modulus(m)?;
    let snf = smith_normal_form(a);
    let r = snf.rank();
    let value = sum_gcd_terms(&snf.invariant_factors[..r], m);
    debug_assert!({
        let reduced = h_lin_vec_reduced_rank(a, m)?.value_bits;
        (reduced - value).abs() < 1e-9
    });
    Ok(EntropyResult::bits(value, Method::Formula))
}

/// The same entropy summed over the invariant factors not divisible by `m`;
/// the dropped terms have `gcd(d_i, m) = m` and contribute zero.
///
/// The cut-off is not [`crate::intlinalg::rank_mod`]: for `d = (2, 4)` and `m = 8` every
/// 2×2 minor vanishes mod 8, yet `d_2` still contributes one bit.
pub fn h_lin_vec_reduced_rank(a: &IntMatrix, m: &BigInt) -> Result<EntropyResult> {
    check_modulus(m)?;
    let snf = smith_normal_form(a);
    let factors = &snf.invariant_factors[..snf.rank()];
    let r_prime = factors.iter().take_while(|d| !d.is_multiple_of(m)).count();
    Ok(EntropyResult::bits(
        sum_gcd_terms(&factors[..r_prime], m),
        Method::Formula,
    ))
}

fn sum_gcd_terms(factors: &[BigInt], m: &BigInt) -> f64 {
    let log_m = log2_big(m);
    factors.iter().map(|d| log_m - log2_big(&d.gcd(m))).sum()
}

/// `(r log m − log g_r, r log m)`, the range `H(A·Y)` moves in once
/// `m` exceeds the largest invariant factor.
pub fn h_lin_bounds(a: &IntMatrix, m: &BigInt) -> Result<(f64, f64)> {
    check_modulus(m)?;
    let snf = smith_normal_form(a);
    let r = snf.rank();
    if r == 0 {
        return Ok((0.0, 0.0));
    }
    let d_r = &snf.invariant_factors[r - 1];
    if m <= d_r {
        return Err(Error::Precondition(format!(
            "bounds need m > d_r = {d_r}, got m = {m}"
        )));
    }
    let g_r = minors_gcd(a, r)?;
    let upper = r as f64 * log2_big(m);
    Ok((upper - log2_big(&g_r), upper))
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Precondition(format!(
            "binary entropy needs a probability, got {p}"
        )));
    }
    Ok(entropy_term(p) + entropy_term(1.0 - p))
}

fn entropy_term(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Entropy of `X_1^{a_1} ⋯ X_t^{a_t}` over `GF(q)`:
/// `h(π) + π log((q−1)/gcd(a, q−1))` with `π = (1 − 1/q)^τ` and `τ` the
/// number of nonzero exponents.
pub fn h_mono_single(exponents: &[i64], q: u64) -> Result<EntropyResult> {
    if q < 2 {
        return Err(Error::Precondition(format!("field order {q} < 2")));
    }
    let tau = exponents.iter().filter(|&&a| a != 0).count() as i32;
    let pi = (1.0 - 1.0 / q as f64).powi(tau);
    let order = q as i64 - 1;
    let g = exponents.iter().fold(order, |g, &a| g.gcd(&a));
    let value = binary_entropy(pi)? + pi * ((order / g) as f64).log2();
    Ok(EntropyResult::in_field(value, q, Method::Formula))
}

/// Degree matrix of a set of monomials: row `i` holds the exponents of
/// `φ_i(x) = x_1^{a_i1} ⋯ x_f^{a_if}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "IntMatrix", into = "IntMatrix")]
pub struct MonomialSet {
    degree_matrix: IntMatrix,
    exponents: Vec<Vec<i64>>,
    rank: usize,
    g_rank: BigInt,
    invariant_factors: Vec<BigInt>,
}

impl TryFrom<IntMatrix> for MonomialSet {
    type Error = Error;

    fn try_from(m: IntMatrix) -> Result<Self> {
        MonomialSet::new(m)
    }
}

impl From<MonomialSet> for IntMatrix {
    fn from(m: MonomialSet) -> Self {
        m.degree_matrix
    }
}

impl MonomialSet {
    pub fn new(degree_matrix: IntMatrix) -> Result<Self> {
        if let Some(i) = (0..degree_matrix.rows()).find(|&i| degree_matrix.is_zero_row(i)) {
            return Err(Error::InvalidMatrix(format!(
                "row {i} is zero: constant functions are not allowed"
            )));
        }
        let exponents = degree_matrix
            .to_i64_rows()
            .ok_or_else(|| Error::InvalidMatrix("exponents must fit in 64-bit integers".into()))?;
        let snf = smith_normal_form(&degree_matrix);
        let rank = snf.rank();
        let g_rank = snf.factor_product(rank);
        Ok(Self {
            degree_matrix,
            exponents,
            rank,
            g_rank,
            invariant_factors: snf.invariant_factors,
        })
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<Self> {
        Self::new(IntMatrix::from_rows(rows)?)
    }

    pub fn degree_matrix(&self) -> &IntMatrix {
        &self.degree_matrix
    }

    /// Number of monomials (`μ`).
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Number of variables (`f`).
    pub fn variables(&self) -> usize {
        self.degree_matrix.cols()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// gcd of the `r×r` minors, `r` the integer rank.
    pub fn g_rank(&self) -> &BigInt {
        &self.g_rank
    }

    pub fn invariant_factors(&self) -> &[BigInt] {
        &self.invariant_factors
    }

    pub fn exponents(&self, i: usize) -> &[i64] {
        &self.exponents[i]
    }

    /// `φ_i(x)`. The value is zero whenever a variable with a nonzero
    /// exponent (of either sign) is zero.
    pub fn evaluate(&self, i: usize, x: &[Elem], field: &FiniteField) -> Elem {
        eval_monomial(&self.exponents[i], x, field)
    }
}

pub(crate) fn eval_monomial(exponents: &[i64], x: &[Elem], field: &FiniteField) -> Elem {
    debug_assert_eq!(exponents.len(), x.len());
    let order = (field.order() - 1) as i128;
    let mut log = 0i128;
    for (&a, &xi) in exponents.iter().zip(x) {
        if a == 0 {
            continue;
        }
        match field.dlog(xi) {
            Ok(l) => log += a as i128 * l as i128,
            Err(_) => return Elem::ZERO,
        }
    }
    field.exp(log.rem_euclid(order) as u64)
}

/// Shannon entropy in bits of an empirical distribution given by counts.
pub fn entropy_of_counts<I: IntoIterator<Item = u64>>(counts: I) -> f64 {
    let counts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
    let total: u64 = counts.iter().sum();
    let total = total as f64;
    counts.iter().map(|&c| entropy_term(c as f64 / total)).sum()
}

fn enumeration_size(q: u64, f: usize, bound: u64) -> Result<u64> {
    (q as u128)
        .checked_pow(f as u32)
        .filter(|&n| n <= bound as u128)
        .map(|n| n as u64)
        .ok_or_else(|| Error::EnumerationBound {
            size: format!("{q}^{f}"),
            bound,
        })
}

/// Joint entropy of all monomials by enumerating every input in `GF(q)^f`.
pub fn h_mono_set_bruteforce(
    ms: &MonomialSet,
    field: &FiniteField,
    bound: u64,
) -> Result<EntropyResult> {
    let q = field.order();
    let f = ms.variables();
    let total = enumeration_size(q, f, bound)?;
    let mu = ms.len();

    // Each input is tallied by its output tuple, packed into one integer when
    // q^μ fits in 128 bits.
    let packable = (q as u128).checked_pow(mu as u32).is_some();
    let mut x = vec![Elem::ZERO; f];
    let mut packed: Vec<u128> = Vec::new();
    let mut keyed: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    if packable {
        packed.reserve(total as usize);
    }
    for idx in 0..total {
        let mut rest = idx;
        for xi in x.iter_mut() {
            *xi = field.elem(rest % q);
            rest /= q;
        }
        if packable {
            let key = (0..mu).fold(0u128, |acc, i| {
                acc * q as u128 + ms.evaluate(i, &x, field).encoding() as u128
            });
            packed.push(key);
        } else {
            let key = (0..mu)
                .map(|i| ms.evaluate(i, &x, field).encoding())
                .collect();
            *keyed.entry(key).or_default() += 1;
        }
    }
    let value = if packable {
        packed.sort_unstable();
        let runs = packed.chunk_by(|a, b| a == b).map(|c| c.len() as u64);
        entropy_of_counts(runs)
    } else {
        entropy_of_counts(keyed.into_values())
    };
    Ok(EntropyResult::in_field(value, q, Method::BruteForce))
}

/// Joint entropy of all monomials by conditioning on the zero pattern of the
/// inputs.
///
/// A zero pattern (set of zero variables) kills exactly the monomials that
/// use one of those variables. Patterns are grouped by the set of killed
/// monomials; these groups have disjoint supports. Inside a group the
/// surviving monomials are nonzero and, in the log domain, uniform on the
/// image of their exponent rows over `Z_{q-1}`. When every pattern in a group
/// induces the same image, the group is uniform on it and the result is
/// exact; otherwise this falls back to enumeration (flagged as
/// [`Method::BruteForce`]).
pub fn h_mono_set_decomposition(
    ms: &MonomialSet,
    q: u64,
    fallback: Option<(&FiniteField, u64)>,
) -> Result<EntropyResult> {
    if q < 2 {
        return Err(Error::Precondition(format!("field order {q} < 2")));
    }
    let f = ms.variables();
    let mu = ms.len();
    if f > 30 {
        return Err(Error::Precondition(format!(
            "{f} variables: zero-pattern enumeration is limited to 30"
        )));
    }
    let used: Vec<usize> = (0..f)
        .filter(|&j| (0..mu).any(|i| ms.exponents(i)[j] != 0))
        .collect();
    let p_zero = 1.0 / q as f64;

    // dead-set mask -> (probability, image key)
    struct Group {
        prob: f64,
        image: Vec<Vec<i64>>,
        consistent: bool,
    }
    let mut groups: BTreeMap<u64, Group> = BTreeMap::new();
    for pattern in 0u64..(1 << used.len()) {
        let zeros: Vec<usize> = (0..used.len())
            .filter(|b| pattern >> b & 1 == 1)
            .map(|b| used[b])
            .collect();
        let prob = p_zero.powi(zeros.len() as i32)
            * (1.0 - p_zero).powi((used.len() - zeros.len()) as i32);
        let dead = (0..mu)
            .filter(|&i| zeros.iter().any(|&j| ms.exponents(i)[j] != 0))
            .fold(0u64, |acc, i| acc | 1 << i);
        // Live rows restricted to live variables.
        let image: Vec<Vec<i64>> = (0..mu)
            .filter(|i| dead >> i & 1 == 0)
            .map(|i| {
                used.iter()
                    .filter(|j| !zeros.contains(j))
                    .map(|&j| ms.exponents(i)[j])
                    .collect()
            })
            .collect();
        let image = strip_zero_columns(image);
        match groups.get_mut(&dead) {
            Some(g) => {
                g.prob += prob;
                g.consistent &= g.image == image;
            }
            None => {
                groups.insert(
                    dead,
                    Group {
                        prob,
                        image,
                        consistent: true,
                    },
                );
            }
        }
    }

    if groups.values().any(|g| !g.consistent) {
        let (field, bound) = fallback.ok_or_else(|| {
            Error::Precondition("decomposition needs enumeration but no field was given".into())
        })?;
        return h_mono_set_bruteforce(ms, field, bound);
    }

    let modulus = BigInt::from(q - 1);
    let mut value = 0.0;
    for g in groups.values() {
        value += entropy_term(g.prob);
        if g.image.is_empty() || g.image[0].is_empty() || q == 2 {
            continue;
        }
        let image = IntMatrix::from_rows(&g.image)?;
        value += g.prob * h_lin_vec(&image, &modulus)?.value_bits;
    }
    Ok(EntropyResult::in_field(value, q, Method::Decomposition))
}

fn strip_zero_columns(rows: Vec<Vec<i64>>) -> Vec<Vec<i64>> {
    let Some(width) = rows.first().map(Vec::len) else {
        return rows;
    };
    let keep: Vec<usize> = (0..width)
        .filter(|&j| rows.iter().any(|r| r[j] != 0))
        .collect();
    rows.into_iter()
        .map(|r| keep.iter().map(|&j| r[j]).collect())
        .collect()
}

/// `|H_q(M) − H_q(L)|`, with `L = A·X` over `GF(q)` (so
/// `H_q(L) = rank_{GF(q)} A`). Requires `p ∤ g_r(A)`.
pub fn h_gap_mono_vs_lin(
    ms: &MonomialSet,
    field: &FiniteField,
    method: Method,
    bound: u64,
) -> Result<f64> {
    let p = BigInt::from(field.characteristic());
    if ms.g_rank().is_multiple_of(&p) {
        return Err(Error::Precondition(format!(
            "characteristic {p} divides g_r(A) = {}; monomial and linear entropies need not agree",
            ms.g_rank()
        )));
    }
    let linear = rank_ffield(ms.degree_matrix(), field) as f64;
    let mono = match method {
        Method::BruteForce => h_mono_set_bruteforce(ms, field, bound)?,
        Method::Decomposition => h_mono_set_decomposition(ms, field.order(), Some((field, bound)))?,
        Method::Formula => {
            return Err(Error::Precondition(
                "no closed form for the joint entropy of several monomials".into(),
            ))
        }
    };
    Ok((mono.value_qary.expect("field context") - linear).abs())
}
