use nodal_lab::chaos_poly::build_p2q;
use nodal_lab::diagram::*;
use nodal_lab::exact::{qfrac, Q};
use nodal_lab::mc;
use nodal_lab::meridian::{build_sigma, PairSampler};
use proptest::prelude::*;

fn rational_rhos() -> Vec<MeridianRho<Q>> {
    vec![
        MeridianRho {
            tt: qfrac(1, 3),
            tg: qfrac(-1, 5),
            rad: qfrac(2, 7),
            tan: qfrac(1, 4),
        },
        MeridianRho {
            tt: qfrac(-2, 9),
            tg: qfrac(3, 11),
            rad: qfrac(-1, 6),
            tan: qfrac(-3, 8),
        },
        MeridianRho {
            tt: qfrac(1, 2),
            tg: qfrac(0, 1),
            rad: qfrac(1, 10),
            tan: qfrac(2, 3),
        },
    ]
}

#[test]
fn specialized_equals_general_exactly() {
    for q in 1..=3u32 {
        for d in 2..=3u32 {
            let poly = IntegrandPoly::new(q, d).unwrap();
            for rho in rational_rhos() {
                let (irr, general) = general_diagram_integrand(q, d, &rho).unwrap();
                assert_eq!(irr, poly.irr, "q={q} d={d}");
                assert_eq!(poly.eval_rational_part(&rho), general, "q={q} d={d} rho={rho:?}");
            }
        }
    }
}

#[test]
fn zero_correlation_gives_zero() {
    for q in 2..=5u32 {
        for d in 2..=4u32 {
            let poly = IntegrandPoly::new(q, d).unwrap();
            assert_eq!(poly.eval(&MeridianRho::zero()), 0.0);
        }
    }
}

#[test]
fn enumeration_matches_brute_force() {
    for q in 0..=5u32 {
        for p in 0..=q {
            for pp in 0..=q {
                for s1 in 0..=p {
                    for s1p in 0..=pp {
                        let got: Vec<[u32; 4]> = enumerate_a(q, p, pp, s1, s1p)
                            .iter()
                            .map(|a| [a.k12, a.k1_d3, a.k23, a.k3_d3])
                            .collect();
                        let mut want = Vec::new();
                        let n = 2 * q;
                        for k12 in 0..=n {
                            for k1 in 0..=n {
                                for k23 in 0..=n {
                                    for k3 in 0..=n {
                                        if k12 + k1 == 2 * q - 2 * p
                                            && k12 + k23 == 2 * q - 2 * pp
                                            && k23 + k3 == 2 * s1
                                            && k1 + k3 == 2 * s1p
                                        {
                                            want.push([k12, k1, k23, k3]);
                                        }
                                    }
                                }
                            }
                        }
                        assert_eq!(got, want, "q={q} p={p} p'={pp} s1={s1} s1'={s1p}");
                    }
                }
            }
        }
    }
}

#[test]
fn enumeration_examples() {
    let a = enumerate_a(2, 0, 0, 0, 0);
    assert_eq!(a.len(), 1);
    assert_eq!((a[0].k12, a[0].k1_d3, a[0].k23, a[0].k3_d3), (4, 0, 0, 0));
    let a = enumerate_a(2, 2, 2, 2, 2);
    assert_eq!((a[0].k12, a[0].k1_d3, a[0].k23, a[0].k3_d3), (0, 0, 0, 4));
    let ks: Vec<u32> = enumerate_a(3, 1, 1, 1, 1).iter().map(|a| a.k12).collect();
    assert_eq!(ks, vec![2, 3, 4]);
}

#[test]
fn degree_bookkeeping() {
    // k12 + k1_d3 + k23 + k3_d3 + 2 Σ_{i≥2} s_i = 2q, with Σ_{i≥2} s_i = p - s1
    for q in 1..=5u32 {
        for p in 0..=q {
            for pp in 0..=q {
                for s1 in 0..=p {
                    let rest = p - s1;
                    if rest > pp {
                        continue;
                    }
                    for a in enumerate_a(q, p, pp, s1, pp - rest) {
                        assert_eq!(a.k12 + a.k1_d3 + a.k23 + a.k3_d3 + 2 * rest, 2 * q);
                    }
                }
            }
        }
    }
}

#[test]
fn moment_examples_and_budget() {
    let two = |a, b, r: f64| HermiteMomentSpec {
        degrees: vec![a, b],
        corr: vec![vec![1.0, r], vec![r, 1.0]],
    };
    assert!((hermite_product_moment(&two(2, 2, 0.3)).unwrap() - 2.0 * 0.09).abs() < 1e-14);
    assert_eq!(hermite_product_moment(&two(4, 4, 1.0)).unwrap(), 24.0);
    let odd = HermiteMomentSpec {
        degrees: vec![1, 1, 1],
        corr: vec![vec![1.0, 0.2, 0.1], vec![0.2, 1.0, 0.3], vec![0.1, 0.3, 1.0]],
    };
    assert_eq!(hermite_product_moment(&odd).unwrap(), 0.0);
    assert!(hermite_product_moment(&two(13, 13, 0.5)).is_err());
}

/// MC estimate of `E[p_{2q}(x) p_{2q}(y)]` from meridian pair samples.
fn mc_integrand(q: u32, ell: u32, d: u32, theta: f64, n: usize, seed: u64) -> mc::McEstimate {
    let poly = build_p2q(q, d).unwrap();
    let sampler = PairSampler::new(&build_sigma(theta, ell, d).unwrap()).unwrap();
    let du = d as usize;
    let m = mc::run_moments(n, 1, seed, |rng, out| {
        let mut v = vec![0.0; 2 * du + 2];
        sampler.draw_into(rng, &mut v);
        let gx = v[2..2 + du].iter().map(|x| x * x).sum::<f64>().sqrt();
        let gy = v[2 + du..].iter().map(|x| x * x).sum::<f64>().sqrt();
        out[0] = poly.eval(v[0], gx) * poly.eval(v[1], gy);
    });
    m.estimate(0, seed)
}

#[test]
fn specialized_matches_pair_sampling() {
    let (q, ell, d) = (2u32, 10u32, 3u32);
    for k in 0..4 {
        let theta = 0.05 + 0.3 * k as f64;
        let exact = chaos_covariance_integrand(q, ell, d, theta).unwrap();
        let est = mc_integrand(q, ell, d, theta, 100_000, 5 + k);
        assert!(est.z_score(exact).abs() < 3.0, "θ={theta}: {exact} vs {est:?}");
    }
}

proptest! {
    #[test]
    fn swap_symmetry(
        (q, p, pp, s1, s1p) in (1u32..4)
            .prop_flat_map(|q| (Just(q), 0..=q, 0..=q))
            .prop_flat_map(|(q, p, pp)| (Just(q), Just(p), Just(pp), 0..=p, 0..=pp))
    ) {
        let fwd: Vec<[u32; 4]> = enumerate_a(q, p, pp, s1, s1p).iter().map(|a| [a.k12, a.k1_d3, a.k23, a.k3_d3]).collect();
        let back: Vec<[u32; 4]> = enumerate_a(q, pp, p, s1p, s1).iter().map(|a| [a.k12, a.k23, a.k1_d3, a.k3_d3]).collect();
        prop_assert_eq!(fwd, back);
    }

    #[test]
    fn integrand_matches_oracle_at_float_rho(
        q in 1u32..3, d in 2u32..4,
        tt in -0.9f64..0.9, tg in -0.5f64..0.5, rad in -0.9f64..0.9, tan in -0.9f64..0.9,
    ) {
        let rho = MeridianRho { tt, tg, rad, tan };
        let poly = IntegrandPoly::new(q, d).unwrap();
        let (irr, g) = general_diagram_integrand(q, d, &rho).unwrap();
        let want = g * irr.to_f64();
        let got = poly.eval(&rho);
        prop_assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()));
    }
}
