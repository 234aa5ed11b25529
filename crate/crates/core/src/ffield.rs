//! `GF(p^k)` with full exp/log tables.
//!
//! Elements are stored by their canonical encoding `Σ c_i p^i`, where
//! `c_0 + c_1 x + ... + c_{k-1} x^{k-1}` is the polynomial-basis
//! representative modulo the field's defining polynomial. Multiplication,
//! inversion and powers go through the discrete-log tables; addition works
//! digit by digit.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest field order for which tables are built unless overridden.
pub const DEFAULT_TABLE_BOUND: u64 = 1 << 22;

/// A field element by canonical encoding; only meaningful together with the
/// [`FiniteField`] that produced it.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Elem(u32);

impl Elem {
    pub const ZERO: Elem = Elem(0);
    pub const ONE: Elem = Elem(1);

    pub fn encoding(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct FiniteField {
    p: u64,
    k: u32,
    q: u64,
    /// Monic defining polynomial, low degree first, length `k + 1`.
    modulus: Vec<u64>,
    generator: Elem,
    exp_table: Vec<u32>,
    dlog_table: Vec<u32>,
}

impl fmt::Debug for FiniteField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteField")
            .field("p", &self.p)
            .field("k", &self.k)
            .field("modulus", &self.modulus)
            .field("generator", &self.generator)
            .finish_non_exhaustive()
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Splits `q = p^k` into `(p, k)`, or `None` if `q` is not a prime power.
pub fn prime_power(q: u64) -> Option<(u64, u32)> {
    let factors = prime_factors(q);
    if factors.len() != 1 {
        return None;
    }
    let p = factors[0];
    let mut k = 0;
    let mut r = q;
    while r > 1 {
        r /= p;
        k += 1;
    }
    Some((p, k))
}

/// Parses a field specification of the form `"p^k"` (or a bare prime `"p"`).
pub fn parse_field_spec(spec: &str) -> Result<(u64, u32)> {
    let bad = || Error::FieldSpec(spec.to_string());
    let (p, k) = match spec.trim().split_once('^') {
        Some((p, k)) => (
            p.trim().parse::<u64>().map_err(|_| bad())?,
            k.trim().parse::<u32>().map_err(|_| bad())?,
        ),
        None => (spec.trim().parse::<u64>().map_err(|_| bad())?, 1),
    };
    if k == 0 || !is_prime(p) {
        return Err(bad());
    }
    Ok((p, k))
}

// Polynomials over F_p, low degree first, used only during construction.
mod poly {
    pub fn trim(mut a: Vec<u64>) -> Vec<u64> {
        while a.last() == Some(&0) {
            a.pop();
        }
        a
    }

    pub fn rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
        // m is monic.
        let mut r = trim(a.to_vec());
        let dm = m.len() - 1;
        while r.len() > dm {
            let lead = *r.last().unwrap();
            let shift = r.len() - 1 - dm;
            for (i, &c) in m.iter().enumerate() {
                let idx = shift + i;
                r[idx] = (r[idx] + p - (lead * c) % p) % p;
            }
            r = trim(r);
        }
        r
    }

    pub fn mulmod(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = (out[i + j] + x * y) % p;
            }
        }
        rem(&out, m, p)
    }

    pub fn powmod(base: &[u64], mut e: u64, m: &[u64], p: u64) -> Vec<u64> {
        let mut result = vec![1u64];
        let mut b = rem(base, m, p);
        while e > 0 {
            if e & 1 == 1 {
                result = mulmod(&result, &b, m, p);
            }
            b = mulmod(&b, &b, m, p);
            e >>= 1;
        }
        trim(result)
    }
}

fn digits(mut v: u64, p: u64, k: u32) -> Vec<u64> {
    (0..k)
        .map(|_| {
            let d = v % p;
            v /= p;
            d
        })
        .collect()
}

fn undigits(d: &[u64], p: u64) -> u64 {
    d.iter().rev().fold(0, |acc, &c| acc * p + c)
}

fn is_irreducible(m: &[u64], p: u64) -> bool {
    let k = m.len() - 1;
    // Any factorization has a monic factor of degree at most k/2.
    for deg in 1..=k / 2 {
        for low in 0..p.pow(deg as u32) {
            let mut d = digits(low, p, deg as u32);
            d.push(1);
            if poly::rem(m, &d, p).is_empty() {
                return false;
            }
        }
    }
    true
}

/// Builds `GF(p^k)` with the default table bound.
pub fn make_field(p: u64, k: u32) -> Result<FiniteField> {
    make_field_with_bound(p, k, DEFAULT_TABLE_BOUND)
}

/// Builds `GF(p^k)`: lexicographically smallest monic irreducible modulus
/// (comparing coefficients from the constant term up) and the generator with
/// the smallest encoding.
pub fn make_field_with_bound(p: u64, k: u32, bound: u64) -> Result<FiniteField> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if k == 0 {
        return Err(Error::FieldSpec(format!("{p}^0")));
    }
    let q = p
        .checked_pow(k)
        .filter(|&q| q <= bound && q <= u32::MAX as u64)
        .ok_or(Error::TableBound {
            q: p.saturating_pow(k),
            bound,
        })?;

    // c_0 is the most significant position of the search order.
    let modulus = (0..q)
        .map(|idx| {
            let mut m: Vec<u64> = digits(idx, p, k).into_iter().rev().collect();
            m.push(1);
            m
        })
        .find(|m| is_irreducible(m, p))
        .expect("an irreducible polynomial of every degree exists");

    let order = q - 1;
    let factors = prime_factors(order);
    let generator = (1..q)
        .find(|&e| {
            let g = poly::trim(digits(e, p, k));
            factors
                .iter()
                .all(|&l| poly::powmod(&g, order / l, &modulus, p) != [1])
        })
        .expect("the multiplicative group is cyclic");

    let g_poly = poly::trim(digits(generator, p, k));
    let mut exp_table = Vec::with_capacity(order as usize);
    let mut dlog_table = vec![0u32; q as usize];
    let mut cur = vec![1u64];
    for l in 0..order {
        let mut padded = cur.clone();
        padded.resize(k as usize, 0);
        let enc = undigits(&padded, p) as u32;
        exp_table.push(enc);
        dlog_table[enc as usize] = l as u32;
        cur = poly::mulmod(&cur, &g_poly, &modulus, p);
    }

    Ok(FiniteField {
        p,
        k,
        q,
        modulus,
        generator: Elem(generator as u32),
        exp_table,
        dlog_table,
    })
}

impl FiniteField {
    pub fn characteristic(&self) -> u64 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.k
    }

    pub fn order(&self) -> u64 {
        self.q
    }

    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }

    pub fn generator(&self) -> Elem {
        self.generator
    }

    /// The element with canonical encoding `enc`.
    pub fn elem(&self, enc: u64) -> Elem {
        assert!(
            enc < self.q,
            "encoding {enc} out of range for GF({})",
            self.q
        );
        Elem(enc as u32)
    }

    pub fn elements(&self) -> impl Iterator<Item = Elem> {
        (0..self.q as u32).map(Elem)
    }

    pub fn from_coeffs(&self, coeffs: &[u64]) -> Result<Elem> {
        if coeffs.len() != self.k as usize || coeffs.iter().any(|&c| c >= self.p) {
            return Err(Error::Precondition(format!(
                "expected {} coefficients below {}, got {coeffs:?}",
                self.k, self.p
            )));
        }
        Ok(Elem(undigits(coeffs, self.p) as u32))
    }

    pub fn coeffs(&self, x: Elem) -> Vec<u64> {
        digits(x.0 as u64, self.p, self.k)
    }

    /// Canonical text: comma-separated coefficients, low degree first.
    pub fn format(&self, x: Elem) -> String {
        self.coeffs(x)
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse(&self, s: &str) -> Result<Elem> {
        let coeffs = s
            .split(',')
            .map(|c| c.trim().parse::<u64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Precondition(format!("bad element {s:?}: {e}")))?;
        self.from_coeffs(&coeffs)
    }

    pub fn add(&self, a: Elem, b: Elem) -> Elem {
        if self.p == 2 {
            return Elem(a.0 ^ b.0);
        }
        if self.k == 1 {
            return Elem(((a.0 as u64 + b.0 as u64) % self.p) as u32);
        }
        let (mut x, mut y) = (a.0 as u64, b.0 as u64);
        let mut out = 0u64;
        let mut place = 1u64;
        for _ in 0..self.k {
            out += ((x % self.p + y % self.p) % self.p) * place;
            x /= self.p;
            y /= self.p;
            place *= self.p;
        }
        Elem(out as u32)
    }

    pub fn neg(&self, a: Elem) -> Elem {
        if self.p == 2 {
            return a;
        }
        let mut x = a.0 as u64;
        let mut out = 0u64;
        let mut place = 1u64;
        for _ in 0..self.k {
            out += ((self.p - x % self.p) % self.p) * place;
            x /= self.p;
            place *= self.p;
        }
        Elem(out as u32)
    }

    pub fn sub(&self, a: Elem, b: Elem) -> Elem {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: Elem, b: Elem) -> Elem {
        if a.is_zero() || b.is_zero() {
            return Elem::ZERO;
        }
        let l = self.dlog_table[a.0 as usize] as u64 + self.dlog_table[b.0 as usize] as u64;
        Elem(self.exp_table[(l % (self.q - 1)) as usize])
    }

    pub fn inv(&self, a: Elem) -> Result<Elem> {
        if a.is_zero() {
            return Err(Error::ZeroInverse);
        }
        let l = self.dlog_table[a.0 as usize] as u64;
        Ok(Elem(
            self.exp_table[((self.q - 1 - l) % (self.q - 1)) as usize],
        ))
    }

    /// `a^e` for any integer `e`; `0^0 = 1`, and negative powers of zero are
    /// an error.
    pub fn pow(&self, a: Elem, e: i64) -> Result<Elem> {
        if a.is_zero() {
            return match e {
                0 => Ok(Elem::ONE),
                e if e > 0 => Ok(Elem::ZERO),
                _ => Err(Error::ZeroInverse),
            };
        }
        let l = self.dlog_table[a.0 as usize] as i128 * e as i128;
        Ok(self.exp(l.rem_euclid((self.q - 1) as i128) as u64))
    }

    /// Discrete logarithm to the field's generator, in `Z_{q-1}`.
    pub fn dlog(&self, a: Elem) -> Result<u64> {
        if a.is_zero() {
            return Err(Error::DlogZero);
        }
        Ok(self.dlog_table[a.0 as usize] as u64)
    }

    /// `generator^l`; `l` is reduced modulo `q - 1`.
    pub fn exp(&self, l: u64) -> Elem {
        Elem(self.exp_table[(l % (self.q - 1)) as usize])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gf2() {
        let f = make_field(2, 1).unwrap();
        assert_eq!(f.order(), 2);
        assert_eq!(f.generator(), Elem::ONE);
        assert_eq!(f.dlog(Elem::ONE).unwrap(), 0);
        assert_eq!(f.add(Elem::ONE, Elem::ONE), Elem::ZERO);
    }

    #[test]
    fn gf5_generator_and_inverse() {
        let f = make_field(5, 1).unwrap();
        assert_eq!(f.generator(), f.elem(2));
        assert_eq!(f.mul(f.elem(2), f.elem(3)), Elem::ONE);
        assert_eq!(f.inv(f.elem(2)).unwrap(), f.elem(3));
        assert_eq!(f.inv(Elem::ONE).unwrap(), Elem::ONE);
        assert!(matches!(f.inv(Elem::ZERO), Err(Error::ZeroInverse)));
    }

    #[test]
    fn gf9_generator_has_full_order() {
        let f = make_field(3, 2).unwrap();
        let g = f.generator();
        let mut x = Elem::ONE;
        for i in 1..=8 {
            x = f.mul(x, g);
            assert_eq!(x == Elem::ONE, i == 8, "g^{i}");
        }
        for x in f.elements().skip(1) {
            assert!(f.dlog(x).unwrap() < 8);
        }
        // x^2 + 1 is the smallest monic irreducible quadratic over F_3 in
        // constant-first order: x^2, x^2+x, x^2+2x all vanish at 0.
        assert_eq!(f.modulus(), &[1, 0, 1]);
    }

    #[test]
    fn dlog_basics() {
        let f = make_field(7, 1).unwrap();
        assert_eq!(f.dlog(Elem::ONE).unwrap(), 0);
        assert_eq!(f.dlog(f.generator()).unwrap(), 1);
        let g2 = f.mul(f.generator(), f.generator());
        assert_eq!(f.dlog(g2).unwrap(), 2);
        assert!(matches!(f.dlog(Elem::ZERO), Err(Error::DlogZero)));
    }

    #[test]
    fn pow_negative_and_lagrange() {
        let f = make_field(2, 4).unwrap();
        for x in f.elements().skip(1) {
            assert_eq!(f.pow(x, 15).unwrap(), Elem::ONE);
            let inv3 = f.inv(f.pow(x, 3).unwrap()).unwrap();
            assert_eq!(f.pow(x, -3).unwrap(), inv3);
        }
        assert!(f.pow(Elem::ZERO, -1).is_err());
        assert_eq!(f.pow(Elem::ZERO, 0).unwrap(), Elem::ONE);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(make_field(4, 1), Err(Error::NotPrime(4))));
        assert!(matches!(
            make_field_with_bound(2, 10, 512),
            Err(Error::TableBound {
                q: 1024,
                bound: 512
            })
        ));
    }

    #[test]
    fn field_specs() {
        assert_eq!(parse_field_spec("3^2").unwrap(), (3, 2));
        assert_eq!(parse_field_spec("7").unwrap(), (7, 1));
        assert!(parse_field_spec("4^1").is_err());
        assert!(parse_field_spec("2^0").is_err());
        assert!(parse_field_spec("x").is_err());
        assert_eq!(prime_power(1024), Some((2, 10)));
        assert_eq!(prime_power(1031), Some((1031, 1)));
        assert_eq!(prime_power(12), None);
        assert_eq!(prime_power(1), None);
    }

    #[test]
    fn text_form() {
        let f = make_field(3, 2).unwrap();
        let x = f.from_coeffs(&[1, 2]).unwrap();
        assert_eq!(f.format(x), "1,2");
        assert_eq!(f.parse("1,2").unwrap(), x);
        assert!(f.parse("1,3").is_err());
        assert!(f.parse("1").is_err());
    }
}
