use std::collections::BTreeSet;

use kgprov_core::{EdgeId, Monomial, Polynomial};
use proptest::prelude::*;

fn monomial() -> impl Strategy<Value = Monomial> {
    prop::collection::vec((1u64..7, 1u32..4), 0..4)
        .prop_map(|fs| Monomial::from_factors(fs.into_iter().map(|(e, k)| (EdgeId(e), k))))
}

fn poly() -> impl Strategy<Value = Polynomial> {
    prop::collection::vec((monomial(), 1u64..4), 0..5).prop_map(Polynomial::from_terms)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn addition_laws(a in poly(), b in poly(), c in poly()) {
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.add(&Polynomial::zero()), a.clone());
    }

    #[test]
    fn multiplication_laws(a in poly(), b in poly(), c in poly()) {
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        prop_assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
        prop_assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
        prop_assert_eq!(a.mul(&Polynomial::one()), a.clone());
        prop_assert!(a.mul(&Polynomial::zero()).is_zero());
    }

    #[test]
    fn deletion_check_agrees_with_pruning(a in poly(), e in 1u64..8) {
        let e = EdgeId(e);
        prop_assert_eq!(a.evaluate_under_deletion(e), !a.prune(e).is_zero());
        let pruned = a.prune(e);
        prop_assert!(!pruned.mentions(e));
        for (m, c) in pruned.terms() {
            prop_assert_eq!(a.coefficient(m), c);
        }
        let mut extracted = a.clone();
        match extracted.extract(e) {
            Some(gone) => {
                prop_assert_eq!(extracted.add(&gone), a.clone());
                prop_assert_eq!(&extracted, &pruned);
            }
            None => prop_assert!(!a.mentions(e)),
        }
    }

    #[test]
    fn text_round_trip(a in poly()) {
        let text = a.to_string();
        let back: Polynomial = text.parse().unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn why_drops_exponents_and_coefficients(a in poly()) {
        let want: BTreeSet<BTreeSet<EdgeId>> = a.terms().map(|(m, _)| m.edges().collect()).collect();
        prop_assert_eq!(a.why(), want);
    }
}
