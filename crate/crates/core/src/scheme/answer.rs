use rand::Rng;
use serde::{Deserialize, Serialize};

use super::query::Query;
use crate::entropy::{eval_monomial, MonomialSet};
use crate::error::{Error, Result};
use crate::ffield::{Elem, FiniteField};

/// The replicated data: `f` messages of `λ` subpackets each.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Storage {
    messages: usize,
    lambda: usize,
    data: Vec<Elem>,
}

impl Storage {
    pub fn new(messages: usize, lambda: usize, data: Vec<Elem>) -> Result<Self> {
        if data.len() != messages * lambda {
            return Err(Error::Precondition(format!(
                "storage needs {messages}×{lambda} elements, got {}",
                data.len()
            )));
        }
        Ok(Self {
            messages,
            lambda,
            data,
        })
    }

    pub fn random<R: Rng + ?Sized>(
        messages: usize,
        lambda: usize,
        field: &FiniteField,
        rng: &mut R,
    ) -> Self {
        let q = field.order();
        let data = (0..messages * lambda)
            .map(|_| field.elem(rng.random_range(0..q)))
            .collect();
        Self {
            messages,
            lambda,
            data,
        }
    }

    pub fn from_fn(
        messages: usize,
        lambda: usize,
        mut f: impl FnMut(usize, usize) -> Elem,
    ) -> Self {
        let data = (0..messages)
            .flat_map(|i| (0..lambda).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Self {
            messages,
            lambda,
            data,
        }
    }

    pub fn messages(&self) -> usize {
        self.messages
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn get(&self, message: usize, subpacket: usize) -> Elem {
        self.data[message * self.lambda + subpacket]
    }

    /// The vector `X^{(j)}` of all messages at subpacket `j`.
    pub fn subpacket(&self, j: usize) -> Vec<Elem> {
        (0..self.messages).map(|i| self.get(i, j)).collect()
    }

    pub fn has_zero(&self) -> bool {
        self.data.iter().any(|x| x.is_zero())
    }

    pub fn elements(&self) -> &[Elem] {
        &self.data
    }
}

/// `φ_u(X^{(j)})` for every function `u` and subpacket `j`, indexed `[u][j]`.
pub fn evaluate_all(
    storage: &Storage,
    monomials: &MonomialSet,
    field: &FiniteField,
) -> Vec<Vec<Elem>> {
    let columns: Vec<Vec<Elem>> = (0..storage.lambda())
        .map(|j| storage.subpacket(j))
        .collect();
    (0..monomials.len())
        .map(|u| {
            columns
                .iter()
                .map(|x| eval_monomial(monomials.exponents(u), x, field))
                .collect()
        })
        .collect()
}

/// Direct evaluation of `F_v`, the reference the decoder must reproduce.
pub fn direct_evaluation(
    storage: &Storage,
    monomials: &MonomialSet,
    field: &FiniteField,
    v: usize,
) -> Vec<Elem> {
    (0..storage.lambda())
        .map(|j| eval_monomial(monomials.exponents(v), &storage.subpacket(j), field))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Pir,
    Multiplicative,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub database: usize,
    pub mode: Mode,
    pub symbols: Vec<Elem>,
}

fn check_dimensions(storage: &Storage, monomials: &MonomialSet) -> Result<()> {
    if storage.messages() != monomials.variables() {
        return Err(Error::Precondition(format!(
            "storage has {} messages but the functions take {} variables",
            storage.messages(),
            monomials.variables()
        )));
    }
    Ok(())
}

fn check_query(query: &Query, storage: &Storage, monomials: &MonomialSet) -> Result<()> {
    let bad = query.requests().flat_map(|r| &r.terms).any(|t| {
        t.function >= monomials.len() || t.subpacket >= storage.lambda() || t.sign.abs() != 1
    });
    if bad {
        return Err(Error::Precondition(
            "query references a function or subpacket out of range".into(),
        ));
    }
    Ok(())
}

/// Answers every request with `Σ s_i·φ_{v_i}(X^{(j_i)})`, ignoring the
/// redundancy flags.
pub fn answer_pir(
    query: &Query,
    storage: &Storage,
    monomials: &MonomialSet,
    field: &FiniteField,
) -> Result<Answer> {
    check_dimensions(storage, monomials)?;
    check_query(query, storage, monomials)?;
    let evals = evaluate_all(storage, monomials, field);
    let symbols = query
        .requests()
        .map(|r| {
            r.terms.iter().fold(Elem::ZERO, |acc, t| {
                let y = evals[t.function][t.subpacket];
                if t.sign > 0 {
                    field.add(acc, y)
                } else {
                    field.sub(acc, y)
                }
            })
        })
        .collect();
    Ok(Answer {
        database: query.database,
        mode: Mode::Pir,
        symbols,
    })
}

/// Answers every non-redundant request with `Π φ_{v_i}(X^{(j_i)})^{s_i}`.
pub fn answer_mult(
    query: &Query,
    storage: &Storage,
    monomials: &MonomialSet,
    field: &FiniteField,
) -> Result<Answer> {
    check_dimensions(storage, monomials)?;
    check_query(query, storage, monomials)?;
    if storage.has_zero() {
        return Err(Error::ZeroSubpacket);
    }
    let evals = evaluate_all(storage, monomials, field);
    let symbols = query
        .requests()
        .filter(|r| !r.redundant)
        .map(|r| {
            r.terms.iter().try_fold(Elem::ONE, |acc, t| {
                let y = evals[t.function][t.subpacket];
                let y = if t.sign > 0 { y } else { field.inv(y)? };
                Ok(field.mul(acc, y))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Answer {
        database: query.database,
        mode: Mode::Multiplicative,
        symbols,
    })
}

/// Multiplicative iff no stored element is zero and the functions are
/// linearly dependent over the rationals.
pub fn dispatch(storage: &Storage, monomials: &MonomialSet) -> Mode {
    if !storage.has_zero() && monomials.len() > monomials.rank() {
        Mode::Multiplicative
    } else {
        Mode::Pir
    }
}

/// A database's full reply: it sees both query sets and picks one.
pub fn respond(
    pir: &Query,
    plc: &Query,
    storage: &Storage,
    monomials: &MonomialSet,
    field: &FiniteField,
) -> Result<Answer> {
    match dispatch(storage, monomials) {
        Mode::Pir => answer_pir(pir, storage, monomials, field),
        Mode::Multiplicative => answer_mult(plc, storage, monomials, field),
    }
}
