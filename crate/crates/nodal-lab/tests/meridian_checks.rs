use nodal_lab::meridian::*;
use nodal_lab::specfun::{gegenbauer, grad_variance, sphere_area};
use proptest::prelude::*;

type V = Vec<f64>;

fn dot(a: &V, b: &V) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Point moved a geodesic distance `h` from `p` in the unit tangent direction `u`.
fn walk(p: &V, u: &V, h: f64) -> V {
    p.iter().zip(u).map(|(a, b)| h.cos() * a + h.sin() * b).collect()
}

const STENCIL: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

/// Fourth-order central difference of `f` at 0.
fn diff(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    STENCIL.iter().map(|(k, w)| w * f(k * h)).sum::<f64>() / (12.0 * h)
}

/// `Σ` rebuilt from the kernel `G(<x, y>)` by differencing along geodesics.
fn sigma_by_differences(theta: f64, ell: u32, d: u32) -> Vec<Vec<f64>> {
    let n = d as usize + 1;
    let axis = |k: usize| -> V { (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect() };
    let x = axis(n - 1);
    let y: V = (0..n)
        .map(|i| {
            if i == 0 {
                theta.sin()
            } else if i == n - 1 {
                theta.cos()
            } else {
                0.0
            }
        })
        .collect();
    // frames: meridian direction first, then the remaining axes
    let mut fx = vec![axis(0)];
    let mut fy = vec![(0..n)
        .map(|i| {
            if i == 0 {
                theta.cos()
            } else if i == n - 1 {
                -theta.sin()
            } else {
                0.0
            }
        })
        .collect::<V>()];
    for j in 1..d as usize {
        fx.push(axis(j));
        fy.push(axis(j));
    }
    let g = |a: &V, b: &V| gegenbauer(ell, d, dot(a, b).clamp(-1.0, 1.0)).unwrap().value;
    let h = 1e-3;
    // coordinates: (point, direction or None)
    let mut coords: Vec<(V, Option<V>)> = vec![(x.clone(), None), (y.clone(), None)];
    coords.extend(fx.iter().map(|u| (x.clone(), Some(u.clone()))));
    coords.extend(fy.iter().map(|u| (y.clone(), Some(u.clone()))));
    let m = coords.len();
    let mut out = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            let (pi, ui) = &coords[i];
            let (pj, uj) = &coords[j];
            out[i][j] = match (ui, uj) {
                (None, None) => g(pi, pj),
                (Some(u), None) => diff(|a| g(&walk(pi, u, a), pj), h),
                (None, Some(v)) => diff(|b| g(pi, &walk(pj, v, b)), h),
                (Some(u), Some(v)) => diff(|a| diff(|b| g(&walk(pi, u, a), &walk(pj, v, b)), h), h),
            };
        }
    }
    out
}

#[test]
fn sigma_matches_kernel_derivatives() {
    for &(theta, ell, d) in &[(0.3, 10u32, 3u32), (1.1, 7, 2), (0.6, 5, 4)] {
        let cov = build_sigma(theta, ell, d).unwrap();
        let fd = sigma_by_differences(theta, ell, d);
        let s = grad_variance(ell, d).sqrt();
        for i in 0..fd.len() {
            for j in 0..fd.len() {
                let scale = if i >= 2 { s } else { 1.0 } * if j >= 2 { s } else { 1.0 };
                let err = (cov.sigma[(i, j)] - fd[i][j]).abs() / scale;
                assert!(
                    err < 1e-6,
                    "θ={theta} ℓ={ell} d={d} ({i},{j}): {} vs {}",
                    cov.sigma[(i, j)],
                    fd[i][j]
                );
            }
        }
    }
}

#[test]
fn sampled_covariance_matches_sigma() {
    let cov = build_sigma(0.4, 8, 3).unwrap();
    let samples = sample_pairs(&cov, 60_000, 3).unwrap();
    let target = cov.normalized();
    let n = samples.len() as f64;
    let flat: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            let mut v = vec![s.t_x, s.t_y];
            v.extend(&s.grad_x);
            v.extend(&s.grad_y);
            v
        })
        .collect();
    for i in 0..8 {
        for j in 0..8 {
            let c: f64 = flat.iter().map(|v| v[i] * v[j]).sum::<f64>() / n;
            // standard error of a product moment is at most about √2/√n
            assert!(
                (c - target[(i, j)]).abs() < 5.0 * 2f64.sqrt() / n.sqrt(),
                "({i},{j}): {c} vs {}",
                target[(i, j)]
            );
        }
    }
}

#[test]
fn c_constant_identity() {
    // c E (H^d)² = E[L]² with E[L] = √(E/d) H^{d-1}, where c E carries the 1/d of E/d
    for d in 2..=6u32 {
        for &ell in &[3u32, 20, 100] {
            let e = nodal_lab::specfun::eigenvalue(ell, d);
            let lhs = kacrice_c(d) * e * sphere_area(d).powi(2);
            let mean = grad_variance(ell, d).sqrt() * sphere_area(d - 1);
            assert!((lhs / (mean * mean) - 1.0).abs() < 1e-12, "d={d} ℓ={ell}");
        }
    }
}

#[test]
fn sampling_is_deterministic() {
    let cov = build_sigma(0.9, 6, 2).unwrap();
    assert_eq!(
        sample_pairs(&cov, 5000, 42).unwrap(),
        sample_pairs(&cov, 5000, 42).unwrap()
    );
}

proptest! {
    #[test]
    fn sigma_is_psd(theta in 0.01f64..std::f64::consts::FRAC_PI_2, ell in 1u32..60, d in 2u32..6) {
        let cov = build_sigma(theta, ell, d).unwrap();
        prop_assert!(cov.check_psd().is_ok());
        let r = cov.rho;
        for v in [r.tt, r.tg, r.rad, r.tan] {
            prop_assert!(v.abs() <= 1.0 + 1e-9);
        }
    }
}
