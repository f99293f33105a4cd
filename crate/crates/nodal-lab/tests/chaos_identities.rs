use nodal_lab::chaos_poly::*;
use nodal_lab::exact::compositions;
use nodal_lab::mc;
use num_traits::Zero;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn alpha_reduction_all_small_compositions() {
    for d in 1..=5usize {
        for total in 0..=6u32 {
            for s in compositions(total, d) {
                let c = alpha_reduction(&s).unwrap();
                assert!(c.passed, "{s:?}");
            }
        }
    }
}

#[test]
fn c_series_equals_closed_form() {
    for d in 2..=8u32 {
        for p in 0..=8u32 {
            assert!(c_constant_identity(d, p).unwrap().passed);
            let s = c_constant_series(d, p).unwrap().to_f64();
            let c = c_constant(d, p).to_f64();
            assert!((s - c).abs() <= 1e-12 * c.abs().max(1e-300), "d={d} p={p}: {s} vs {c}");
        }
    }
}

#[test]
fn hermite_sums_reduce_to_laguerre() {
    for d in 1..=5u32 {
        for p in 0..=5u32 {
            assert!(hermite_sum_to_laguerre(p, d).unwrap().passed, "p={p} d={d}");
        }
    }
    for n in 0..=10u32 {
        assert!(hermite_laguerre_relation(n).unwrap().passed, "n={n}");
    }
}

#[test]
fn three_forms_of_p2q_agree() {
    for q in 1..=4u32 {
        for d in 2..=4u32 {
            let (poly, cert) = verify_p2q(q, d).unwrap();
            assert!(cert.passed);
            assert!(cert.params["laguerre_factors"] <= 2 * q as i64 + 2);
            let raw = raw_hermite_summands(q, d) as i64;
            assert_eq!(cert.params["hermite_summands"], raw);
            assert!(centered_mean_exact(&poly).is_zero(), "q={q} d={d}");
        }
    }
}

#[test]
fn p2q_is_centred_by_sampling() {
    for &(q, d) in &[(2u32, 2u32), (2, 3), (3, 3), (4, 2)] {
        let poly = build_p2q(q, d).unwrap();
        let est = mc::estimate(200_000, 11 + q as u64, |rng| {
            let z: f64 = rng.sample(StandardNormal);
            let w2: f64 = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal).powi(2)).sum();
            poly.eval(z, w2.sqrt())
        });
        assert!(est.z_score(0.0).abs() < 4.0, "q={q} d={d}: {est:?}");
    }
}

#[test]
fn second_chaos_vanishes_at_level_zero() {
    assert_eq!(level_second_chaos_coeff(0.0, 10, 3), 0.0);
    assert!(level_second_chaos_coeff(1.0, 10, 3) != 0.0);
}

proptest! {
    #[test]
    fn alpha_is_symmetric(mut s in proptest::collection::vec(0u32..4, 1..5)) {
        let a = alpha_coeff(&s).value.to_f64();
        s.reverse();
        prop_assert_eq!(a, alpha_coeff(&s).value.to_f64());
    }

    #[test]
    fn alpha_direct_matches_reduced(s in proptest::collection::vec(0u32..3, 1..4)) {
        let direct = alpha_direct(&s).unwrap();
        prop_assert_eq!(direct, alpha_coeff(&s).value);
    }
}
