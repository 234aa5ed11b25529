use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::ToPrimitive;

use super::answer::{Answer, Mode};
use super::layout::QueryLayout;
use super::query::{DecodePlan, SymbolRef};
use crate::error::{Error, Result};
use crate::ffield::{Elem, FiniteField};
use crate::intlinalg::mod_inverse_u64;

/// The mode every database answered in, inferred from the response sizes.
pub fn infer_mode(layout: &QueryLayout, answers: &[Answer]) -> Result<Mode> {
    if answers.len() != layout.databases() {
        return Err(Error::Precondition(format!(
            "expected {} answers, got {}",
            layout.databases(),
            answers.len()
        )));
    }
    let full = layout.pir_download_per_database();
    let reduced = layout.reduced_download_per_database();
    let mut mode = None;
    for a in answers {
        let m = match a.symbols.len() {
            len if len == full => Mode::Pir,
            len if len == reduced => Mode::Multiplicative,
            len => {
                return Err(Error::Precondition(format!(
                    "answer of database {} has {len} symbols, expected {full} or {reduced}",
                    a.database
                )))
            }
        };
        if a.mode != m || mode.is_some_and(|prev| prev != m) {
            return Err(Error::Precondition(
                "databases answered in inconsistent modes".into(),
            ));
        }
        mode = Some(m);
    }
    Ok(mode.expect("at least two databases"))
}

fn reduce(x: &BigInt, m: u64) -> u64 {
    x.mod_floor(&BigInt::from(m)).to_u64().unwrap()
}

fn signed(s: i8, x: u64, m: u64) -> u64 {
    if s > 0 || x == 0 {
        x
    } else {
        m - x
    }
}

/// Recovers all `λ` evaluations of the desired function.
///
/// Multiplicative answers are moved to the discrete-log domain, where the
/// suppressed symbols satisfy integer relations modulo `q−1`. A relation
/// whose leading coefficient is not a unit modulo `q−1` has several roots and
/// is reported as a decode failure.
pub fn decode(
    layout: &QueryLayout,
    plan: &DecodePlan,
    answers: &[Answer],
    field: &FiniteField,
) -> Result<Vec<Elem>> {
    let mode = infer_mode(layout, answers)?;
    let mut answers: Vec<&Answer> = answers.iter().collect();
    answers.sort_by_key(|a| a.database);

    match mode {
        Mode::Pir => {
            let symbols: Vec<Vec<Vec<Elem>>> = answers
                .iter()
                .map(|a| split_blocks(layout, &a.symbols, false))
                .collect();
            let at = |s: SymbolRef| symbols[s.database][s.block][s.position];
            Ok(plan
                .recoveries
                .iter()
                .map(|r| {
                    let mut y = at(r.symbol);
                    if let Some((side, kappa)) = r.side_info {
                        let z = at(side);
                        y = if kappa > 0 {
                            field.sub(y, z)
                        } else {
                            field.add(y, z)
                        };
                    }
                    if r.sign > 0 {
                        y
                    } else {
                        field.neg(y)
                    }
                })
                .collect())
        }
        Mode::Multiplicative => {
            let m = field.order() - 1;
            let logs = answers
                .iter()
                .enumerate()
                .map(|(db, a)| {
                    let received = a
                        .symbols
                        .iter()
                        .map(|&y| field.dlog(y))
                        .collect::<Result<Vec<_>>>()
                        .map_err(|_| {
                            Error::Precondition("multiplicative answer contains zero".into())
                        })?;
                    let blocks = split_blocks(layout, &received, true);
                    fill_redundant(layout, &plan.sigma[db], blocks, m)
                })
                .collect::<Result<Vec<_>>>()?;
            let at = |s: SymbolRef| logs[s.database][s.block][s.position];
            Ok(plan
                .recoveries
                .iter()
                .map(|r| {
                    let mut l = at(r.symbol);
                    if let Some((side, kappa)) = r.side_info {
                        l = (l + signed(-kappa, at(side), m)) % m.max(1);
                    }
                    field.exp(signed(r.sign, l, m))
                })
                .collect())
        }
    }
}

/// Splits a flat answer into blocks; with `reduced` the redundant positions
/// are absent from the input and left as placeholders.
fn split_blocks<T: Copy + Default>(layout: &QueryLayout, flat: &[T], reduced: bool) -> Vec<Vec<T>> {
    let mut it = flat.iter();
    layout
        .blocks()
        .iter()
        .map(|bl| {
            (0..bl.groups)
                .flat_map(|_| bl.redundant.iter())
                .map(|&red| {
                    if reduced && red {
                        T::default()
                    } else {
                        *it.next().unwrap()
                    }
                })
                .collect()
        })
        .collect()
}

/// Solves `e·σ_t·l_t ≡ −Σ c·σ·l (mod q−1)` for every suppressed symbol.
fn fill_redundant(
    layout: &QueryLayout,
    sigma: &[Vec<i8>],
    mut logs: Vec<Vec<u64>>,
    m: u64,
) -> Result<Vec<Vec<u64>>> {
    if m == 1 {
        return Ok(logs);
    }
    for (b, bl) in layout.blocks().iter().enumerate() {
        let per = bl.symbols_per_group();
        for g in 0..bl.groups {
            let base = g * per;
            for rel in &bl.relations {
                let mut rhs = 0u64;
                for (pos, c) in &rel.terms {
                    let c = signed(sigma[b][base + pos], reduce(c, m), m);
                    rhs = ((rhs as u128 + c as u128 * logs[b][base + pos] as u128) % m as u128)
                        as u64;
                }
                let rhs = (m - rhs) % m;
                let e = signed(sigma[b][base + rel.target], reduce(&rel.multiplier, m), m);
                let inv = mod_inverse_u64(e, m).ok_or_else(|| {
                    Error::Decode(format!(
                        "relation multiplier {} shares the factor {} with q−1 = {m}",
                        rel.multiplier,
                        e.gcd(&m)
                    ))
                })?;
                logs[b][base + rel.target] = ((rhs as u128 * inv as u128) % m as u128) as u64;
            }
        }
    }
    Ok(logs)
}
