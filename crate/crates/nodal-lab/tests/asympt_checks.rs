use nodal_lab::asympt::*;

#[test]
fn expansions_decay_at_predicted_order_for_d2() {
    for kind in Expansion::ALL {
        let c = check_gegenbauer_expansion(kind, &[50, 100, 200, 400], 2, Window::default()).unwrap();
        assert!(c.pass, "{c:?}");
    }
}

#[test]
fn product_integrals_d2() {
    let parts = product_partitions(2);
    assert_eq!(parts.len(), 70);
    for c in check_product_all(&parts, 2, &[50, 100, 200, 400], 1.0).unwrap() {
        assert!(c.pass, "{c:?}");
    }
}

#[test]
fn batched_integrals_match_single() {
    let parts = product_partitions(3);
    let all = product_integrals(&parts, 3, 40, 1.0).unwrap();
    for (k, a) in parts.iter().enumerate().step_by(17) {
        assert_eq!(all[k], product_integral(a, 3, 40, 1.0).unwrap());
    }
}

#[test]
fn uniform_correlation_bound() {
    for d in 2..=4u32 {
        for ell in [50u32, 100, 200] {
            let r = search_c_eps(d, ell, &[4.0], &[0.05]).unwrap();
            assert!(r[0].admissible, "{:?}", r[0]);
        }
    }
    // near the diagonal the correlations approach 1
    let r = search_c_eps(3, 100, &[0.05], &[0.05]).unwrap();
    assert!(!r[0].admissible);
}
