use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;

use common::random_sparse;
use syzygy::bs::{bs_decompose_rational, pure_diagram, RationalTable};
use syzygy::grading::{
    canonical_multidegree, koszul_dual_spec, EmbeddingSpec, Multidegree, DEFAULT_PRIME,
};
use syzygy::hilbert::WeightPolynomial;
use syzygy::linalg::{
    dense_rank_oracle, sparse_rank, PrimeField, RankOptions, Strategy as RankStrategy,
};
use syzygy::pipeline::compose_failures;
use syzygy::schur::{character, decompose_weights, dual_bipartition, schur_dim, Bipartition};

#[test]
fn field_axioms() {
    let f = PrimeField::new(DEFAULT_PRIME);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10_000 {
        let a = rng.gen_range(0..DEFAULT_PRIME);
        let b = rng.gen_range(0..DEFAULT_PRIME);
        let c = rng.gen_range(0..DEFAULT_PRIME);
        assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
        assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        assert_eq!(f.add(a, f.neg(a)), 0);
        assert_eq!(f.sub(a, b), f.add(a, f.neg(b)));
        if a != 0 {
            assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
        }
    }
    assert_eq!(f.inv(0), None);
}

#[test]
fn sparse_rank_matches_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..200 {
        let m = random_sparse(&mut rng);
        let expect = dense_rank_oracle(&m).unwrap();
        for strategy in [
            RankStrategy::Auto,
            RankStrategy::SparseElim,
            RankStrategy::Dense,
        ] {
            let opts = RankOptions {
                strategy,
                ..RankOptions::default()
            };
            let got = sparse_rank(&m, &format!("random-{i}"), &opts).unwrap();
            assert_eq!(
                got.rank,
                expect,
                "matrix {i} ({}x{}, {} nnz) with {strategy}",
                m.rows,
                m.cols,
                m.nnz()
            );
        }
    }
}

fn bipartition() -> impl Strategy<Value = Bipartition> {
    (0i64..=20, 0i64..=20, 0i64..=20, 0i64..=20).prop_map(|(a, b, c, d)| Bipartition {
        l1: a.max(b),
        l2: a.min(b),
        m1: c.max(d),
        m2: c.min(d),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn schur_round_trip(parts in prop::collection::vec((bipartition(), 1u64..4), 1..6), total in 0i64..=10) {
        // All summands of one K_{p,q} share a total degree; shift the second partition to match.
        let mut expect: BTreeMap<Bipartition, u64> = BTreeMap::new();
        let mut poly = WeightPolynomial::new();
        let target = 40 + total;
        for (bp, m) in parts {
            let extra = target - bp.total();
            let bp = if extra >= 0 {
                Bipartition { m1: bp.m1 + extra, ..bp }
            } else {
                continue;
            };
            *expect.entry(bp).or_insert(0) += m;
            for (w, c) in character(&bp) {
                *poly.entry(w).or_insert(0) += c * m as i64;
            }
        }
        let got = decompose_weights(&poly).unwrap();
        let dim: u64 = got.iter().map(|(b, m)| m * schur_dim(b)).sum();
        prop_assert_eq!(dim, poly.values().sum::<i64>() as u64);
        prop_assert_eq!(got, expect);
    }
}

fn degree_sequence() -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(1i64..4, 1..17).prop_map(|gaps| {
        let mut out = vec![0];
        for g in gaps {
            out.push(out.last().unwrap() + g);
        }
        out
    })
}

fn rational(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn scaled(delta: &[i64], c: &BigRational) -> RationalTable {
    pure_diagram(delta)
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(i, v)| ((i as i64, delta[i]), v * c))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bs_single_term(delta in degree_sequence(), c in 1i64..=1_000_000) {
        let c = rational(c);
        let dec = bs_decompose_rational(&scaled(&delta, &c), delta.len()).unwrap();
        prop_assert_eq!(dec.terms.len(), 1);
        prop_assert_eq!(&dec.terms[0].delta, &delta);
        prop_assert_eq!(&dec.terms[0].coefficient, &c);
    }

    #[test]
    fn bs_reconstructs_chain(start in degree_sequence(), bumps in prop::collection::vec((0usize..17, 1i64..1000, 1i64..50), 1..5)) {
        let mut table = RationalTable::new();
        let mut delta = start.clone();
        let len = delta.len();
        for (pos, num, den) in bumps {
            let c = BigRational::new(BigInt::from(num), BigInt::from(den));
            for (k, v) in scaled(&delta, &c) {
                *table.entry(k).or_insert_with(|| rational(0)) += v;
            }
            // Shift a tail of the sequence up by one: stays strictly increasing and termwise larger.
            let from = pos % len;
            for d in delta.iter_mut().skip(from) {
                *d += 1;
            }
        }
        let dec = bs_decompose_rational(&table, len).unwrap();
        prop_assert_eq!(dec.reconstruct().unwrap(), table);
        for w in dec.terms.windows(2) {
            prop_assert!(w[0].delta.iter().zip(&w[1].delta).all(|(a, b)| a <= b));
        }
        prop_assert!(dec.terms.iter().all(|t| t.coefficient > rational(0)));
    }

    #[test]
    fn canonical_is_idempotent(a in prop::array::uniform4(-5i64..40)) {
        let a = Multidegree(a);
        let (c, _) = canonical_multidegree(a);
        prop_assert_eq!(canonical_multidegree(c).0, c);
        prop_assert!(a.orbit().contains(&c));
        prop_assert!(c.is_canonical());
        for b in a.orbit() {
            prop_assert_eq!(canonical_multidegree(b).0, c);
        }
    }

    #[test]
    fn duality_is_an_involution(d1 in 1i64..6, d2 in 1i64..6, b1 in -2i64..6, b2 in -2i64..6, w in bipartition()) {
        let spec = EmbeddingSpec::standard(d1, d2, b1, b2).unwrap();
        let dm = koszul_dual_spec(&spec);
        let back = koszul_dual_spec(&dm.dual_spec);
        prop_assert_eq!(back.dual_spec, spec);
        prop_assert_eq!(back.alpha, dm.alpha);
        for (p, q) in [(0, 0), (3, 1), (spec.codim(), 2)] {
            let (rp, rq) = dm.index_map(p, q);
            prop_assert_eq!(back.index_map(rp, rq), (p, q));
        }
        if let Ok(w2) = dual_bipartition(&w, &dm) {
            prop_assert_eq!(dual_bipartition(&w2, &back).unwrap(), w);
        }
    }
}

#[test]
fn boundary_squares_to_zero_on_small_specs() {
    for d1 in 1..=2 {
        for d2 in 1..=3 {
            for b1 in 0..=d1 {
                for b2 in 0..=d2 {
                    let spec = EmbeddingSpec::standard(d1, d2, b1, b2).unwrap();
                    let bad = compose_failures(&spec);
                    assert!(
                        bad.is_empty(),
                        "{}: {:?}",
                        spec.label(),
                        &bad[..bad.len().min(3)]
                    );
                }
            }
        }
    }
}

#[test]
fn schur_dim_matches_character_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let (a, b, c, d) = (
            rng.gen_range(0..30),
            rng.gen_range(0..30),
            rng.gen_range(0..30),
            rng.gen_range(0..30),
        );
        let bp = Bipartition::new(a.max(b), a.min(b), c.max(d), c.min(d)).unwrap();
        assert_eq!(character(&bp).len() as u64, schur_dim(&bp));
    }
}
