//! Cross-module oracle equivalence: every named symbolic class must count
//! exactly like its concrete constructible set, and the enumeration-side
//! degree statistics must reproduce the Möbius-side closed-point counts.

use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use motivic::falsify::{classify, FalsifyConfig, Verdict};
use motivic::ff::{frobenius_degree, make_field, DEFAULT_ENUM_LIMIT};
use motivic::geom::{
    affine_space, count_points, omega_set, spec_point_set, xk_set, ykm_set,
};
use motivic::kring::{
    class_x_k, class_y_km, closed_point_count, omega_class, random_element, MeasureCandidate,
    RingElement,
};

const LIMIT: u64 = DEFAULT_ENUM_LIMIT;

#[test]
fn named_classes_count_like_their_sets() {
    for q in [2u64, 3] {
        // A^m
        for m in 1..=2usize {
            let set = affine_space(q, m);
            let class = RingElement::l_pow(q, m as u32);
            for n in 1..=3u64 {
                assert_eq!(
                    BigInt::from(count_points(&set, n, LIMIT).unwrap()),
                    class.eval_counting(n),
                    "A^{m}, q={q}, n={n}"
                );
            }
        }
        // Omega^n
        for nn in 1..=2u64 {
            let set = omega_set(q, nn as usize, LIMIT).unwrap();
            let class = omega_class(q, nn);
            for n in 1..=4u64 {
                assert_eq!(
                    BigInt::from(count_points(&set, n, LIMIT).unwrap()),
                    class.eval_counting(n),
                    "Omega^{nn}, q={q}, n={n}"
                );
            }
        }
        // X_k
        for k in 1..=3u64 {
            let set = xk_set(q, k);
            let class = class_x_k(q, k);
            for n in 1..=5u64 {
                assert_eq!(
                    BigInt::from(count_points(&set, n, LIMIT).unwrap()),
                    class.eval_counting(n),
                    "X_{k}, q={q}, n={n}"
                );
            }
        }
        // Y_{k,m}
        for k in 1..=3u64 {
            for m in 2..=5u64 {
                if k % m == 0 {
                    continue;
                }
                let set = ykm_set(q, k, m).unwrap();
                let class = class_y_km(q, k, m).unwrap();
                for n in 1..=5u64 {
                    assert_eq!(
                        BigInt::from(count_points(&set, n, LIMIT).unwrap()),
                        class.eval_counting(n),
                        "Y_{{{k},{m}}}, q={q}, n={n}"
                    );
                }
            }
        }
        // Spec F_{q^d}
        for d in 1..=4u64 {
            let set = spec_point_set(q, d).unwrap();
            let class = RingElement::spec_class(q, d).unwrap();
            for n in 1..=6u64 {
                assert_eq!(
                    BigInt::from(count_points(&set, n, LIMIT).unwrap()),
                    class.eval_counting(n),
                    "Spec F_{{{q}^{d}}}, n={n}"
                );
            }
        }
    }
}

#[test]
fn frobenius_degree_statistics_match_moebius_counts() {
    // In F_{q^N}: (elements of degree d over F_q) / d = c_d(q) for d | N.
    let cases: [(u64, usize, u64); 5] = [
        (2, 4, 2),  // F_16 over F_2
        (2, 6, 2),  // F_64 over F_2
        (3, 3, 3),  // F_27 over F_3
        (2, 4, 4),  // F_16 over F_4
        (2, 6, 4),  // F_64 over F_4
    ];
    for (p, big_n, q) in cases {
        let ctx = make_field(p, big_n).unwrap();
        let e = {
            let (pp, ee) = motivic::ff::prime_power(q).unwrap();
            assert_eq!(pp, p);
            ee as usize
        };
        let top = big_n / e;
        let mut by_degree = std::collections::BTreeMap::new();
        for a in ctx.enumerate(LIMIT).unwrap() {
            let d = frobenius_degree(&ctx, &a, q).unwrap();
            *by_degree.entry(d).or_insert(0u64) += 1;
        }
        for (&d, &count) in &by_degree {
            assert_eq!(top as u64 % d, 0, "degrees divide N/e");
            assert_eq!(count % d, 0);
            assert_eq!(
                BigInt::from(count / d),
                closed_point_count(q, d).unwrap(),
                "p={p} N={big_n} q={q} d={d}"
            );
        }
    }
}

#[test]
fn accepted_candidates_agree_on_generated_elements() {
    // A candidate that classify accepts evaluates every element generated
    // from {L, S_m} exactly like the counting measure it was matched to.
    let mut rng = ChaCha8Rng::seed_from_u64(271828);
    for q in [2u64, 3] {
        for n in 1..=3u64 {
            let cand = MeasureCandidate::counting(q, n, 24);
            match classify(q, &cand, &FalsifyConfig::default()).unwrap() {
                Verdict::Counting { n: got } => assert_eq!(got, n),
                v => panic!("counting measure rejected: {v:?}"),
            }
            for _ in 0..200 {
                let x = random_element(&mut rng, q, 3, 24, 5, 9);
                let via_candidate = cand.eval(&x).unwrap();
                let via_counting =
                    num_rational::BigRational::from_integer(x.eval_counting(n));
                assert_eq!(via_candidate, via_counting, "q={q} n={n}");
            }
        }
    }
}
