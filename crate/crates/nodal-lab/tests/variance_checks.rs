use nodal_lab::variance::*;

#[test]
fn chaos_variances_are_nonnegative() {
    for d in 2..=4u32 {
        let mut eng = VarianceEngine::new(12, d, QuadConfig::default()).unwrap();
        for q in 2..=6 {
            let c = eng.chaos_variance(q).unwrap();
            assert!(c.value >= -c.quadrature_error, "d={d} q={q}: {c:?}");
        }
    }
}

#[test]
fn halving_panels_changes_below_tolerance() {
    let base = QuadConfig::default();
    let half = QuadConfig {
        panel_width: base.panel_width / 2.0,
        ..base
    };
    for q in 2..=5 {
        let a = chaos_variance(q, 16, 3, base).unwrap().value;
        let b = chaos_variance(q, 16, 3, half).unwrap().value;
        assert!((a / b - 1.0).abs() < 1e-3, "q={q}: {a} vs {b}");
    }
}

#[test]
fn totals_respect_the_coarse_envelope() {
    // totals fall at least as fast as ℓ^{-(d-5)/2}
    for d in 3..=5u32 {
        let t: Vec<f64> = [10u32, 20]
            .iter()
            .map(|&l| {
                total_variance(l, d, TruncationConfig::default(), QuadConfig::default())
                    .unwrap()
                    .total
            })
            .collect();
        let envelope = 2f64.powf(-(d as f64 - 5.0) / 2.0);
        assert!(t[1] / t[0] <= envelope, "d={d}: {t:?}");
    }
}

#[test]
fn truncation_reports_tail() {
    let t = total_variance(10, 3, TruncationConfig::default(), QuadConfig::default()).unwrap();
    assert!(t.tail_fraction < 0.05 && !t.truncated);
    assert_eq!(t.chaos.len() as u32, t.qmax_used - 1);
    let sum: f64 = t.chaos.iter().map(|c| c.value).sum();
    assert!((sum - t.total).abs() < 1e-12 * sum);
    if let Some(x) = t.total_extrapolated {
        assert!(x >= t.total);
    }
}

#[test]
fn input_errors() {
    let (t, c) = (TruncationConfig::default(), QuadConfig::default());
    assert!(chaos_variance(1, 10, 3, c).is_err());
    assert!(scaling_study(3, &[10, 20, 40], t, c).is_err());
    assert!(berry_ratio(0.0, 10, 3, t, c).is_err());
    assert!(total_variance(10, 3, TruncationConfig { qmax: 2, ..t }, c).is_err());
}

#[test]
fn level_second_chaos_is_flat_for_d3() {
    let v: Vec<f64> = [20u32, 40, 80]
        .iter()
        .map(|&l| level_second_chaos_variance(1.0, l, 3))
        .collect();
    let slope = nodal_lab::quad::loglog_slope(&[20.0, 40.0, 80.0], &v);
    assert!(slope.abs() < LEVEL2_EXPONENT_TOL, "{slope}");
}
