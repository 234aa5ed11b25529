//! Exact integer linear algebra.
//!
//! Everything here works on [`IntMatrix`], a dense matrix of arbitrary
//! precision integers. The central routine is [`smith_normal_form`], which
//! returns unimodular `P`, `Q` with `D = P·A·Q` diagonal; ranks, gcds of
//! minors and integer solutions of `x·A = m·b` are all read off from it.

use std::fmt;

use itertools::Itertools;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ffield::FiniteField;

/// Dense integer matrix with at least one row and one column.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<BigInt>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row vectors; all rows must have the same length.
    pub fn from_rows<T>(rows: &[Vec<T>]) -> Result<Self>
    where
        T: Clone + Into<BigInt>,
    {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidMatrix("ragged rows".into()));
        }
        let data = rows.iter().flatten().cloned().map(Into::into).collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn is_zero_row(&self, i: usize) -> bool {
        self.row(i).iter().all(Zero::is_zero)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    /// Matrix product; panics on a dimension mismatch.
    pub fn mul(&self, rhs: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in product");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = &self[(i, l)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * &rhs[(l, j)];
                }
            }
        }
        out
    }

    /// Submatrix on the given (ordered) row and column index lists.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> IntMatrix {
        let data = rows
            .iter()
            .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self[(i, j)].clone())
            .collect();
        IntMatrix::new(rows.len(), cols.len(), data).expect("non-empty selection")
    }

    /// Entries as `i64` when every entry fits.
    pub fn to_i64_rows(&self) -> Option<Vec<Vec<i64>>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(ToPrimitive::to_i64).collect())
            .collect()
    }

    /// Determinant of a square matrix by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> Result<BigInt> {
        if self.rows != self.cols {
            return Err(Error::InvalidMatrix(format!(
                "determinant of a non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        Ok(bareiss_det(self.rows, self.data.clone()))
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// `row[dst] += factor * row[src]`
    fn add_row_multiple(&mut self, dst: usize, src: usize, factor: &BigInt) {
        for j in 0..self.cols {
            let v = &self[(src, j)] * factor;
            self[(dst, j)] += v;
        }
    }

    /// `col[dst] += factor * col[src]`
    fn add_col_multiple(&mut self, dst: usize, src: usize, factor: &BigInt) {
        for i in 0..self.rows {
            let v = &self[(i, src)] * factor;
            self[(i, dst)] += v;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let v = -&self[(i, j)];
            self[(i, j)] = v;
        }
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;

    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[{}]", self.row(i).iter().join(", "))?;
        }
        write!(f, "]")
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

// JSON form is an array of arrays. Entries that do not fit an i64 are written
// as decimal strings.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonEntry {
    Int(i64),
    Big(String),
}

impl Serialize for IntMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<JsonEntry>> = (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .map(|x| match x.to_i64() {
                        Some(v) => JsonEntry::Int(v),
                        None => JsonEntry::Big(x.to_string()),
                    })
                    .collect()
            })
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IntMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rows: Vec<Vec<JsonEntry>> = Vec::deserialize(deserializer)?;
        let rows = rows
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|e| match e {
                        JsonEntry::Int(v) => Ok(BigInt::from(v)),
                        JsonEntry::Big(s) => s.parse::<BigInt>().map_err(D::Error::custom),
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        IntMatrix::from_rows(&rows).map_err(D::Error::custom)
    }
}

fn bareiss_det(n: usize, mut m: Vec<BigInt>) -> BigInt {
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if m[k * n + k].is_zero() {
            let Some(swap) = (k + 1..n).find(|&i| !m[i * n + k].is_zero()) else {
                return BigInt::zero();
            };
            for j in 0..n {
                m.swap(k * n + j, swap * n + j);
            }
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&m[i * n + j] * &m[k * n + k] - &m[i * n + k] * &m[k * n + j]) / &prev;
                m[i * n + j] = v;
            }
        }
        prev = m[k * n + k].clone();
    }
    if n == 0 {
        return BigInt::one();
    }
    sign * &m[n * n - 1]
}

/// Result of [`smith_normal_form`]: `d = p · a · q`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmithDecomposition {
    pub d: IntMatrix,
    pub p: IntMatrix,
    pub q: IntMatrix,
    /// `d_1, ..., d_min(s,t)`, nonnegative, each dividing the next.
    pub invariant_factors: Vec<BigInt>,
}

impl SmithDecomposition {
    /// Number of nonzero invariant factors, i.e. the rank over the integers.
    pub fn rank(&self) -> usize {
        self.invariant_factors
            .iter()
            .take_while(|d| !d.is_zero())
            .count()
    }

    /// `d_1 · d_2 ⋯ d_k`, which equals the gcd of all `k×k` minors.
    pub fn factor_product(&self, k: usize) -> BigInt {
        self.invariant_factors[..k].iter().product()
    }
}

/// Smith normal form by elementary row and column operations, pivoting on the
/// entry of least absolute value.
pub fn smith_normal_form(a: &IntMatrix) -> SmithDecomposition {
    let (s, t) = (a.rows(), a.cols());
    let mut d = a.clone();
    let mut p = IntMatrix::identity(s);
    let mut q = IntMatrix::identity(t);
    let diag = s.min(t);

    for k in 0..diag {
        // Least nonzero entry of the trailing submatrix becomes the pivot.
        let pivot = (k..s)
            .cartesian_product(k..t)
            .filter(|&(i, j)| !d[(i, j)].is_zero())
            .min_by(|&x, &y| d[x].abs().cmp(&d[y].abs()));
        let Some((pi, pj)) = pivot else {
            break;
        };
        d.swap_rows(k, pi);
        p.swap_rows(k, pi);
        d.swap_cols(k, pj);
        q.swap_cols(k, pj);

        loop {
            for i in k + 1..s {
                if !d[(i, k)].is_zero() {
                    let f = -d[(i, k)].div_floor(&d[(k, k)]);
                    d.add_row_multiple(i, k, &f);
                    p.add_row_multiple(i, k, &f);
                }
            }
            for j in k + 1..t {
                if !d[(k, j)].is_zero() {
                    let f = -d[(k, j)].div_floor(&d[(k, k)]);
                    d.add_col_multiple(j, k, &f);
                    q.add_col_multiple(j, k, &f);
                }
            }

            // A nonzero remainder is smaller than the pivot; make it the pivot.
            let in_col = (k + 1..s)
                .filter(|&i| !d[(i, k)].is_zero())
                .min_by(|&x, &y| d[(x, k)].abs().cmp(&d[(y, k)].abs()));
            if let Some(i) = in_col {
                d.swap_rows(k, i);
                p.swap_rows(k, i);
                continue;
            }
            let in_row = (k + 1..t)
                .filter(|&j| !d[(k, j)].is_zero())
                .min_by(|&x, &y| d[(k, x)].abs().cmp(&d[(k, y)].abs()));
            if let Some(j) = in_row {
                d.swap_cols(k, j);
                q.swap_cols(k, j);
                continue;
            }

            // Row and column are clear; the pivot must divide the rest.
            let offending = (k + 1..s)
                .cartesian_product(k + 1..t)
                .find(|&(i, j)| !d[(i, j)].is_multiple_of(&d[(k, k)]));
            match offending {
                Some((i, _)) => {
                    let one = BigInt::one();
                    d.add_row_multiple(k, i, &one);
                    p.add_row_multiple(k, i, &one);
                }
                None => break,
            }
        }

        if d[(k, k)].is_negative() {
            d.negate_row(k);
            p.negate_row(k);
        }
    }

    let invariant_factors = (0..diag).map(|i| d[(i, i)].clone()).collect();
    SmithDecomposition {
        d,
        p,
        q,
        invariant_factors,
    }
}

// Above this many k×k submatrices, g_k is read off the Smith form instead.
const MINOR_ENUMERATION_LIMIT: u64 = 100_000;

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i as u64 + 1))
}

/// gcd of all `k×k` minors, with `gcd(0, ..., 0) = 0`.
pub fn minors_gcd(a: &IntMatrix, k: usize) -> Result<BigInt> {
    let max = a.rows().min(a.cols());
    if k == 0 || k > max {
        return Err(Error::MinorOrder { k, max });
    }
    let count = binomial(a.rows(), k).saturating_mul(binomial(a.cols(), k));
    if count > MINOR_ENUMERATION_LIMIT {
        return Ok(smith_normal_form(a).factor_product(k));
    }
    Ok(minors_gcd_enumerated(a, k))
}

/// gcd of minors by explicit enumeration of every `k×k` submatrix.
pub fn minors_gcd_enumerated(a: &IntMatrix, k: usize) -> BigInt {
    let mut g = BigInt::zero();
    for rows in (0..a.rows()).combinations(k) {
        for cols in (0..a.cols()).combinations(k) {
            let det = a
                .select(&rows, &cols)
                .determinant()
                .expect("square submatrix");
            g = g.gcd(&det);
            if g.is_one() {
                return g;
            }
        }
    }
    g
}

/// Rank over the integers (equivalently over the rationals).
pub fn rank_int(a: &IntMatrix) -> usize {
    smith_normal_form(a).rank()
}

/// Largest `k` such that some `k×k` minor is nonzero modulo `m`.
///
/// A `k×k` minor is nonzero mod `m` for some choice of rows and columns
/// exactly when `m` does not divide `g_k`, and `g_k | g_{k+1}`, so this is the
/// largest `k` with `m ∤ d_1⋯d_k`. Note that this is the determinantal rank,
/// not the rank of the image as a `Z_m`-module.
pub fn rank_mod(a: &IntMatrix, m: &BigInt) -> Result<usize> {
    if *m <= BigInt::one() {
        return Err(Error::Modulus(m.to_string()));
    }
    let snf = smith_normal_form(a);
    let mut product = BigInt::one();
    let mut rank = 0;
    for d in &snf.invariant_factors {
        product *= d;
        if product.is_multiple_of(m) {
            break;
        }
        rank += 1;
    }
    Ok(rank)
}

/// Rank of `A` viewed over `GF(q)`; the entries live in the prime subfield,
/// so this is Gaussian elimination modulo the characteristic.
pub fn rank_ffield(a: &IntMatrix, field: &FiniteField) -> usize {
    rank_mod_prime(a, field.characteristic())
}

pub fn rank_mod_prime(a: &IntMatrix, p: u64) -> usize {
    let pb = BigInt::from(p);
    let (s, t) = (a.rows(), a.cols());
    let mut m: Vec<Vec<u64>> = (0..s)
        .map(|i| {
            a.row(i)
                .iter()
                .map(|x| x.mod_floor(&pb).to_u64().expect("reduced below p"))
                .collect()
        })
        .collect();
    let mulmod = |x: u64, y: u64| ((x as u128 * y as u128) % p as u128) as u64;
    let mut rank = 0;
    for col in 0..t {
        let Some(pivot) = (rank..s).find(|&i| m[i][col] != 0) else {
            continue;
        };
        m.swap(rank, pivot);
        let inv = mod_inverse_u64(m[rank][col], p).expect("nonzero mod prime");
        for x in &mut m[rank][col..] {
            *x = mulmod(*x, inv);
        }
        let pivot_row = m[rank].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != rank && row[col] != 0 {
                let f = row[col];
                for (x, &y) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x = (*x + p - mulmod(f, y)) % p;
                }
            }
        }
        rank += 1;
        if rank == s {
            break;
        }
    }
    rank
}

pub(crate) fn mod_inverse_u64(a: u64, m: u64) -> Option<u64> {
    let e = (a as i128).extended_gcd(&(m as i128));
    if e.gcd != 1 {
        return None;
    }
    Some(e.x.rem_euclid(m as i128) as u64)
}

/// Smallest `m > 0` and integer `x` with `x · basis = m · target`, or `None`
/// when `target` is outside the rational row space of `basis`.
pub fn solve_left_multiple(basis: &IntMatrix, target: &[BigInt]) -> Option<(BigInt, Vec<BigInt>)> {
    assert_eq!(target.len(), basis.cols(), "target length mismatch");
    // D = P·B·Q, so x·B = m·a  <=>  (x·P⁻¹)·D = m·(a·Q).
    let snf = smith_normal_form(basis);
    let rank = snf.rank();
    let t = basis.cols();
    let aq: Vec<BigInt> = (0..t)
        .map(|j| {
            target
                .iter()
                .enumerate()
                .map(|(i, a)| a * &snf.q[(i, j)])
                .sum()
        })
        .collect();
    if aq[rank..].iter().any(|v| !v.is_zero()) {
        return None;
    }
    let multiplier = (0..rank).fold(BigInt::one(), |acc, i| {
        let d = &snf.invariant_factors[i];
        acc.lcm(&(d / d.gcd(&aq[i])))
    });
    let y: Vec<BigInt> = (0..basis.rows())
        .map(|i| {
            if i < rank {
                &multiplier * &aq[i] / &snf.invariant_factors[i]
            } else {
                BigInt::zero()
            }
        })
        .collect();
    let x = (0..basis.rows())
        .map(|j| {
            y.iter()
                .enumerate()
                .map(|(i, yi)| yi * &snf.p[(i, j)])
                .sum()
        })
        .collect();
    Some((multiplier, x))
}

/// Integer coefficients `c` (one per row other than `i`, in row order) with
/// `row_i = Σ c_j row_j`, or `None` if row `i` is outside the integer span of
/// the other rows.
pub fn integer_row_dependency(a: &IntMatrix, i: usize) -> Result<Option<Vec<BigInt>>> {
    if i >= a.rows() {
        return Err(Error::RowIndex {
            index: i,
            rows: a.rows(),
        });
    }
    if a.rows() == 1 {
        // The empty combination spans only the zero row.
        return Ok(a.is_zero_row(0).then(Vec::new));
    }
    let others: Vec<usize> = (0..a.rows()).filter(|&j| j != i).collect();
    let cols: Vec<usize> = (0..a.cols()).collect();
    let basis = a.select(&others, &cols);
    Ok(solve_left_multiple(&basis, a.row(i)).and_then(|(m, x)| m.is_one().then_some(x)))
}
