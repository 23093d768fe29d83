use nilmonoid::diophantine::{build_system, verify_witness, KnapsackInstance};
use nilmonoid::gap_rewrite::{concentrate_extremes, GapSet};
use nilmonoid::group_core::{CommEntry, MainGenerator};
use nilmonoid::oracle::HeisMatrix;
use nilmonoid::subgroup_tools::{smith_normal_form, IntMatrix};
use nilmonoid::{GroupElement, GroupPresentation, Order};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;
use proptest::prelude::*;

fn big(xs: &[i64]) -> Vec<BigInt> {
    xs.iter().map(|&x| BigInt::from(x)).collect()
}

fn comm(i: usize, j: usize, v: &[i64]) -> CommEntry {
    CommEntry { i, j, value: big(v) }
}

/// H3, H3 with central Z/2, a group with torsion in [G,G], and one with a
/// finite-order main generator.
fn groups() -> Vec<GroupPresentation> {
    vec![
        GroupPresentation::heisenberg(),
        GroupPresentation::new(
            vec![MainGenerator::infinite(1); 2],
            vec![Order::finite(2)],
            vec![comm(1, 2, &[1])],
        )
        .unwrap(),
        GroupPresentation::new(
            vec![MainGenerator::infinite(2); 3],
            vec![Order::Infinite, Order::finite(2)],
            vec![comm(1, 2, &[1, 0]), comm(1, 3, &[0, 1])],
        )
        .unwrap(),
        GroupPresentation::new(
            vec![MainGenerator::finite(2, big(&[1])), MainGenerator::infinite(1)],
            vec![Order::finite(4)],
            vec![comm(1, 2, &[2])],
        )
        .unwrap(),
    ]
}

fn element(p: &GroupPresentation, raw: &[i64]) -> GroupElement {
    let r = p.rank();
    p.normalize(big(&raw[..r]), big(&raw[r..r + p.central_rank()]))
}

fn group_and_elements(k: usize) -> impl Strategy<Value = (GroupPresentation, Vec<GroupElement>)> {
    (0..groups().len(), prop::collection::vec(prop::collection::vec(-6i64..=6, 5), k)).prop_map(|(gi, raws)| {
        let p = groups().swap_remove(gi);
        let els = raws.iter().map(|r| element(&p, r)).collect();
        (p, els)
    })
}

proptest! {
    #[test]
    fn group_axioms((p, g) in group_and_elements(3)) {
        let (a, b, c) = (&g[0], &g[1], &g[2]);
        prop_assert_eq!(p.multiply(&p.multiply(a, b), c), p.multiply(a, &p.multiply(b, c)));
        prop_assert_eq!(p.multiply(a, &p.identity()), a.clone());
        prop_assert!(p.multiply(a, &p.inverse(a)).is_identity());
        prop_assert!(p.multiply(&p.inverse(a), a).is_identity());
        prop_assert_eq!(p.normalize(a.e.clone(), a.f.clone()), a.clone());
    }

    #[test]
    fn commutators_are_central((p, g) in group_and_elements(3)) {
        let (a, b, c) = (&g[0], &g[1], &g[2]);
        let k = p.commutator(a, b);
        let expanded = p.eval_word(&[p.inverse(a), p.inverse(b), a.clone(), b.clone()]);
        prop_assert_eq!(&k, &expanded);
        prop_assert!(p.is_central(&k));
        prop_assert_eq!(p.multiply(&k, c), p.multiply(c, &k));
        prop_assert!(p.multiply(&k, &p.commutator(b, a)).is_identity());
    }

    #[test]
    fn powers_add((p, g) in group_and_elements(1), i in -7i64..=7, j in -7i64..=7) {
        let a = &g[0];
        let lhs = p.power_i64(a, i + j);
        let rhs = p.multiply(&p.power_i64(a, i), &p.power_i64(a, j));
        prop_assert_eq!(lhs, rhs);
        let naive = p.eval_word(&vec![a.clone(); i.unsigned_abs() as usize]);
        let expect = if i >= 0 { naive } else { p.inverse(&naive) };
        prop_assert_eq!(p.power_i64(a, i), expect);
    }

    #[test]
    fn element_text_and_json_round_trip((p, g) in group_and_elements(1)) {
        let a = &g[0];
        prop_assert_eq!(&a.to_string().parse::<GroupElement>().unwrap(), a);
        prop_assert_eq!(&GroupElement::from_json(&a.to_json()).unwrap(), a);
        prop_assert_eq!(GroupPresentation::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn matrix_model_is_a_homomorphism(raw in prop::collection::vec(-50i64..=50, 6)) {
        let p = GroupPresentation::heisenberg();
        let (a, b) = (element(&p, &raw[..3]), element(&p, &raw[3..]));
        let m = |g: &GroupElement| HeisMatrix::from_element(g).unwrap();
        prop_assert_eq!(m(&p.multiply(&a, &b)), m(&a).mul(&m(&b)));
        prop_assert_eq!(m(&a).to_element(), a);
    }

    #[test]
    fn reduction_matches_evaluation(
        (p, factors) in group_and_elements(3),
        target in prop::collection::vec(-6i64..=6, 5),
        alpha in prop::collection::vec(0i64..=4, 3),
        plant in any::<bool>(),
    ) {
        let alpha = big(&alpha);
        let scratch = KnapsackInstance::new(&p, p.identity(), factors.clone()).unwrap();
        let target = if plant { scratch.product(&alpha) } else { element(&p, &target) };
        let inst = KnapsackInstance::new(&p, target, factors).unwrap();
        let sys = build_system(&inst).unwrap();
        prop_assert_eq!(sys.satisfies(&alpha), verify_witness(&inst, &alpha));
        if plant {
            prop_assert!(sys.satisfies(&alpha));
        }
    }

    #[test]
    fn extremes_preserve_total(vals in prop::collection::btree_set(-20i64..=20, 1..7), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..40)) {
        let vals: Vec<i64> = vals.into_iter().collect();
        let a = GapSet::from_i64(&vals).unwrap();
        let mut s: Vec<BigInt> = picks.iter().map(|i| a.values()[i.index(a.len())].clone()).collect();
        s.sort();
        let out = concentrate_extremes(&s, &a).unwrap();
        prop_assert_eq!(out.sequence.len(), s.len());
        prop_assert_eq!(out.sequence.iter().sum::<BigInt>(), s.iter().sum::<BigInt>());
        prop_assert!(out.sequence.iter().all(|x| a.contains(x)));
    }

    #[test]
    fn smith_form_factors(rows in prop::collection::vec(prop::collection::vec(-9i64..=9, 4), 1..5)) {
        let refs: Vec<&[i64]> = rows.iter().map(Vec::as_slice).collect();
        let m = IntMatrix::from_i64(&refs);
        let snf = smith_normal_form(&m);
        prop_assert!(snf.verify(&m).is_ok());
        prop_assert_eq!(snf.u.mul(&m).mul(&snf.v), snf.d.clone());
        let d = snf.diagonal();
        for w in d.windows(2) {
            prop_assert!(w[1].is_zero() || w[1].is_multiple_of(&w[0]));
        }
    }
}
