use std::collections::HashMap;
use std::sync::Arc;

use crate::entropy::{
    h_lin_vec, h_lin_vec_reduced_rank, h_mono_set_bruteforce, h_mono_set_decomposition, MonomialSet,
};
use crate::ffield::{make_field, prime_power, FiniteField};
use crate::intlinalg::{
    integer_row_dependency, minors_gcd_enumerated, rank_int, rank_mod, smith_normal_form, IntMatrix,
};
use crate::scheme::{gen_queries, run_transcript, Mode, SchemeConfig};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn matrix(max_dim: usize, bound: i64) -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(move |(s, t)| {
        prop::collection::vec(prop::collection::vec(-bound..=bound, t), s)
    })
}

fn nonzero_rows(max_rows: usize, cols: usize, bound: i64) -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(
        prop::collection::vec(-bound..=bound, cols)
            .prop_filter("nonzero row", |r| r.iter().any(|&x| x != 0)),
        1..=max_rows,
    )
}

fn field_grid() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![
        2u64, 3, 4, 5, 7, 8, 9, 11, 13, 16, 25, 27, 32, 49, 64, 81, 101, 128,
    ])
}

fn field(q: u64) -> FiniteField {
    let (p, k) = prime_power(q).unwrap();
    make_field(p, k).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn snf_is_a_unimodular_diagonalisation(rows in matrix(5, 9)) {
        let a = IntMatrix::from_rows(&rows).unwrap();
        let snf = smith_normal_form(&a);
        prop_assert_eq!(snf.p.mul(&a).mul(&snf.q), snf.d.clone());
        prop_assert!(snf.p.determinant().unwrap().abs().is_one());
        prop_assert!(snf.q.determinant().unwrap().abs().is_one());
        let mut product = BigInt::one();
        for (k, d) in snf.invariant_factors.iter().enumerate() {
            product *= d;
            prop_assert_eq!(&product, &minors_gcd_enumerated(&a, k + 1));
        }
    }

    #[test]
    fn rank_mod_is_full_beyond_g_r(rows in matrix(4, 6), extra in 1u64..50) {
        let a = IntMatrix::from_rows(&rows).unwrap();
        let r = rank_int(&a);
        let g = if r == 0 { BigInt::zero() } else { minors_gcd_enumerated(&a, r) };
        let m = g.clone() + BigInt::from(extra);
        prop_assume!(m > BigInt::one());
        prop_assert_eq!(rank_mod(&a, &m).unwrap(), r);
    }

    #[test]
    fn row_dependency_reproduces_the_row(rows in matrix(4, 4), pick in 0usize..4) {
        let a = IntMatrix::from_rows(&rows).unwrap();
        let i = pick % a.rows();
        if let Some(c) = integer_row_dependency(&a, i).unwrap() {
            let others: Vec<usize> = (0..a.rows()).filter(|&j| j != i).collect();
            for col in 0..a.cols() {
                let sum: BigInt = others.iter().zip(&c).map(|(&j, cj)| cj * &a[(j, col)]).sum();
                prop_assert_eq!(&sum, &a[(i, col)]);
            }
        }
    }

    #[test]
    fn both_linear_entropy_forms_agree(rows in matrix(3, 9), m in 2u64..60) {
        let a = IntMatrix::from_rows(&rows).unwrap();
        let m = BigInt::from(m);
        let full = h_lin_vec(&a, &m).unwrap().value_bits;
        let reduced = h_lin_vec_reduced_rank(&a, &m).unwrap().value_bits;
        prop_assert!((full - reduced).abs() < 1e-9);
    }

    #[test]
    fn dlog_is_a_homomorphism(q in field_grid(), x in 1u64..1000, y in 1u64..1000, e in -20i64..=20) {
        let f = field(q);
        let (x, y) = (f.elem(x % (q - 1) + 1), f.elem(y % (q - 1) + 1));
        let m = q - 1;
        let lx = f.dlog(x).unwrap();
        prop_assert_eq!(f.dlog(f.mul(x, y)).unwrap(), (lx + f.dlog(y).unwrap()) % m);
        let expected = (e.rem_euclid(m as i64) as u64 * lx) % m;
        prop_assert_eq!(f.dlog(f.pow(x, e).unwrap()).unwrap(), expected);
        prop_assert_eq!(f.exp(lx), x);
    }

    #[test]
    fn decomposition_matches_enumeration(q in prop::sample::select(vec![2u64, 3, 4, 5, 7, 8, 9, 11]),
                                         rows in nonzero_rows(3, 2, 4)) {
        let f = field(q);
        let ms = MonomialSet::from_rows(&rows).unwrap();
        let brute = h_mono_set_bruteforce(&ms, &f, 1 << 20).unwrap().value_bits;
        let dec = h_mono_set_decomposition(&ms, q, Some((&f, 1 << 20))).unwrap().value_bits;
        prop_assert!((brute - dec).abs() < 1e-9, "brute {} dec {}", brute, dec);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn decoding_recovers_the_desired_function(
        q in prop::sample::select(vec![3u64, 4, 5, 7, 8, 9, 11, 13]),
        n in 2usize..=3,
        rows in nonzero_rows(3, 2, 3),
        seed in any::<u64>(),
        v_pick in 0usize..3,
    ) {
        let ms = MonomialSet::from_rows(&rows).unwrap();
        let config = SchemeConfig::new(n, ms, Arc::new(field(q))).unwrap();
        let v = v_pick % config.mu();
        let t = run_transcript(&config, v, seed, seed.wrapping_add(1)).unwrap();
        match t.matches_direct_evaluation(&config) {
            Some(matches) => prop_assert!(matches),
            // Only a suppressed symbol with a non-unit multiplier may fail.
            None => {
                prop_assert_eq!(t.mode, Mode::Multiplicative);
                let m = BigInt::from(q - 1);
                let non_unit = config
                    .layout()
                    .row_relations()
                    .iter()
                    .any(|(_, mw, _)| !mw.gcd(&m).is_one());
                prop_assert!(non_unit);
            }
        }
        let expected = if t.mode == Mode::Pir {
            config.layout().pir_download_per_database()
        } else {
            config.layout().reduced_download_per_database()
        };
        prop_assert!(t.downloaded.iter().all(|&d| d == expected));
    }

    #[test]
    fn each_database_sees_every_label_once(
        n in 2usize..=3,
        rows in nonzero_rows(3, 3, 2),
        seed in any::<u64>(),
        v_pick in 0usize..3,
    ) {
        let ms = MonomialSet::from_rows(&rows).unwrap();
        let layout = crate::scheme::QueryLayout::new(n, &ms).unwrap();
        let v = v_pick % ms.len();
        let g = gen_queries(&layout, v, seed).unwrap();
        let labels: usize = layout.blocks().iter().map(|b| b.groups * b.labels.len()).sum();
        for q in &g.plc {
            let mut used: HashMap<usize, ()> = HashMap::new();
            for r in q.requests() {
                for t in &r.terms {
                    prop_assert!(t.subpacket < layout.lambda());
                    used.insert(t.subpacket, ());
                }
            }
            prop_assert_eq!(used.len(), labels);
        }
        let mut covered: Vec<usize> = g.plan.recoveries.iter().map(|r| r.subpacket).collect();
        covered.dedup();
        prop_assert_eq!(covered, (0..layout.lambda()).collect::<Vec<_>>());
    }
}

#[test]
fn field_tables_are_bijective_and_deterministic() {
    for q in [
        2u64, 3, 4, 5, 7, 8, 9, 11, 13, 16, 25, 27, 32, 49, 64, 81, 101, 128,
    ] {
        let f = field(q);
        let mut seen = vec![false; q as usize - 1];
        for x in f.elements().filter(|x| !x.is_zero()) {
            let l = f.dlog(x).unwrap();
            assert!(!seen[l as usize], "q = {q}");
            seen[l as usize] = true;
            assert_eq!(f.exp(l), x);
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(f, field(q));
    }
}

#[test]
fn field_grid_reaches_large_fields() {
    let f = field(1031);
    assert_eq!(f.order(), 1031);
    let f = field(1 << 10);
    assert_eq!(f.degree(), 10);
}
