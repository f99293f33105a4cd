//! Random degree-`ℓ` spherical harmonics on S², nodal length by marching squares,
//! and one-point Kac-Rice mean estimators in any dimension.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mc::{self, McEstimate};
use crate::specfun::{grad_variance, hermite, sphere_area};

/// Smallest accepted grid resolution in points per great circle, per unit of `ℓ`.
pub const MIN_POINTS_PER_DEGREE: u32 = 8;

/// Orthonormal associated Legendre functions `P̄_ℓ^m(cos θ)` and `P̄_{ℓ-1}^m(cos θ)` for
/// `m = 0..=ℓ`, normalized so that `Σ_m` of the squared real harmonics is `(2ℓ+1)/(4π)`.
fn legendre_row(ell: u32, theta: f64) -> (Vec<f64>, Vec<f64>) {
    let (s, x) = theta.sin_cos();
    let l = ell as usize;
    let mut top = vec![0.0; l + 1];
    let mut below = vec![0.0; l + 1];
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=l {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        if m == l {
            top[m] = pmm;
            break;
        }
        let mut p_prev = pmm;
        let mut p = (2.0 * m as f64 + 3.0).sqrt() * x * pmm;
        for n in (m + 2)..=l {
            let nf = n as f64;
            let mf = m as f64;
            let a = ((4.0 * nf * nf - 1.0) / (nf * nf - mf * mf)).sqrt();
            let b = (((nf - 1.0) * (nf - 1.0) - mf * mf) / (4.0 * (nf - 1.0) * (nf - 1.0) - 1.0)).sqrt();
            let next = a * (x * p - b * p_prev);
            p_prev = p;
            p = next;
        }
        top[m] = p;
        below[m] = p_prev;
    }
    (top, below)
}

/// A draw of `T = Σ_m a_m Y_m` with real orthonormal harmonics and `Var(a_m) = 4π/(2ℓ+1)`.
#[derive(Debug, Clone, Serialize)]
pub struct SphereField2 {
    pub ell: u32,
    /// `a_0, (a_m^{cos}, a_m^{sin})_{m=1..ℓ}`.
    pub coeffs: Vec<f64>,
    pub resolution: u32,
    /// Colatitudes of the grid rows.
    pub thetas: Vec<f64>,
    pub n_lon: usize,
    /// Row-major `T` values, `thetas.len() × n_lon`.
    pub values: Vec<f64>,
}

/// Value and tangential gradient `(∂_θ T, ∂_φ T / sin θ)` at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointEval {
    pub value: f64,
    pub grad: [f64; 2],
}

impl SphereField2 {
    /// Draws coefficients only.
    pub fn draw_coeffs(ell: u32, rng: &mut impl Rng) -> Vec<f64> {
        let sd = (4.0 * PI / (2 * ell + 1) as f64).sqrt();
        (0..(2 * ell + 1))
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Evaluates the field with coefficients `coeffs` at `(θ, φ)`.
    pub fn eval_coeffs(ell: u32, coeffs: &[f64], theta: f64, phi: f64) -> PointEval {
        let (top, below) = legendre_row(ell, theta);
        let (s, x) = theta.sin_cos();
        let lf = ell as f64;
        let mut v = 0.0;
        let mut dth = 0.0;
        let mut dph = 0.0;
        for m in 0..=ell as usize {
            let mf = m as f64;
            // (1-x²) dP̄_ℓ^m/dx = √((2ℓ+1)(ℓ-m)(ℓ+m)/(2ℓ-1)) P̄_{ℓ-1}^m - ℓ x P̄_ℓ^m
            let lower = if ell == 0 {
                0.0
            } else {
                ((2.0 * lf + 1.0) * (lf - mf) * (lf + mf) / (2.0 * lf - 1.0)).sqrt() * below[m]
            };
            let dp = -(lower - lf * x * top[m]) / s;
            if m == 0 {
                v += coeffs[0] * top[0];
                dth += coeffs[0] * dp;
            } else {
                let r2 = std::f64::consts::SQRT_2;
                let (c, sn) = (coeffs[2 * m - 1], coeffs[2 * m]);
                let (sm, cm) = (mf * phi).sin_cos();
                v += r2 * top[m] * (c * cm + sn * sm);
                dth += r2 * dp * (c * cm + sn * sm);
                dph += r2 * top[m] * mf * (-c * sm + sn * cm) / s;
            }
        }
        PointEval {
            value: v,
            grad: [dth, dph],
        }
    }

    pub fn eval(&self, theta: f64, phi: f64) -> PointEval {
        Self::eval_coeffs(self.ell, &self.coeffs, theta, phi)
    }

    pub fn n_lat(&self) -> usize {
        self.thetas.len()
    }
}

/// Grid rows span `[2/r, π - 2/r]`, leaving out the polar caps.
pub fn grid_thetas(resolution: u32) -> Vec<f64> {
    let n_lat = (resolution / 2) as usize;
    let cap = 2.0 / resolution as f64;
    (0..n_lat)
        .map(|i| cap + (PI - 2.0 * cap) * i as f64 / (n_lat - 1) as f64)
        .collect()
}

/// Synthesizes a field on the grid from given coefficients.
pub fn synthesize(ell: u32, coeffs: Vec<f64>, resolution: u32) -> Result<SphereField2> {
    if resolution < MIN_POINTS_PER_DEGREE * ell.max(1) {
        return Err(Error::Resolution(format!(
            "resolution {resolution} below {} points per great circle for ell={ell}",
            MIN_POINTS_PER_DEGREE * ell.max(1)
        )));
    }
    if coeffs.len() != 2 * ell as usize + 1 {
        return Err(Error::Domain(format!(
            "expected {} coefficients, got {}",
            2 * ell + 1,
            coeffs.len()
        )));
    }
    let thetas = grid_thetas(resolution);
    let n_lon = resolution as usize;
    let l = ell as usize;
    let mut cos_tab = vec![0.0; n_lon * (l + 1)];
    let mut sin_tab = vec![0.0; n_lon * (l + 1)];
    for j in 0..n_lon {
        let phi = 2.0 * PI * j as f64 / n_lon as f64;
        for m in 0..=l {
            let (s, c) = (m as f64 * phi).sin_cos();
            cos_tab[j * (l + 1) + m] = c;
            sin_tab[j * (l + 1) + m] = s;
        }
    }
    let mut values = vec![0.0; thetas.len() * n_lon];
    let r2 = std::f64::consts::SQRT_2;
    let mut a = vec![0.0; l + 1];
    let mut b = vec![0.0; l + 1];
    for (i, &th) in thetas.iter().enumerate() {
        let (top, _) = legendre_row(ell, th);
        a[0] = coeffs[0] * top[0];
        for m in 1..=l {
            a[m] = r2 * top[m] * coeffs[2 * m - 1];
            b[m] = r2 * top[m] * coeffs[2 * m];
        }
        let row = &mut values[i * n_lon..(i + 1) * n_lon];
        for (j, out) in row.iter_mut().enumerate() {
            let ct = &cos_tab[j * (l + 1)..(j + 1) * (l + 1)];
            let st = &sin_tab[j * (l + 1)..(j + 1) * (l + 1)];
            let mut v = a[0];
            for m in 1..=l {
                v += a[m] * ct[m] + b[m] * st[m];
            }
            *out = v;
        }
    }
    Ok(SphereField2 {
        ell,
        coeffs,
        resolution,
        thetas,
        n_lon,
        values,
    })
}

/// Draws and synthesizes a field; deterministic in `seed`.
pub fn simulate_field_s2(ell: u32, resolution: u32, seed: u64) -> Result<SphereField2> {
    let mut rng = mc::task_rng(seed, 0);
    let coeffs = SphereField2::draw_coeffs(ell, &mut rng);
    synthesize(ell, coeffs, resolution)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodalLengthEstimate {
    pub length: f64,
    pub resolution: u32,
    pub method: String,
}

fn unit_vec(theta: f64, phi: f64) -> [f64; 3] {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    [st * cp, st * sp, ct]
}

fn great_circle(a: [f64; 3], b: [f64; 3]) -> f64 {
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let sn = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let cs = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    sn.atan2(cs)
}

/// Length of `{T = 0}` by marching squares on the grid. Crossings are linearly interpolated
/// in `(θ, φ)` and joined by great-circle arcs; saddle cells follow the sign of the corner mean.
pub fn nodal_length_s2(field: &SphereField2) -> NodalLengthEstimate {
    let n_lat = field.n_lat();
    let n_lon = field.n_lon;
    let dphi = 2.0 * PI / n_lon as f64;
    let v = |i: usize, j: usize| field.values[i * n_lon + (j % n_lon)];
    let mut length = 0.0;
    for i in 0..n_lat - 1 {
        let (t0, t1) = (field.thetas[i], field.thetas[i + 1]);
        for j in 0..n_lon {
            let (p0, p1) = (j as f64 * dphi, (j + 1) as f64 * dphi);
            // corners counter-clockwise: (t0,p0), (t0,p1), (t1,p1), (t1,p0)
            let c = [v(i, j), v(i, j + 1), v(i + 1, j + 1), v(i + 1, j)];
            let pos = c.map(|x| x >= 0.0);
            if pos.iter().all(|&p| p) || pos.iter().all(|&p| !p) {
                continue;
            }
            let corners = [(t0, p0), (t0, p1), (t1, p1), (t1, p0)];
            let mut cross: [Option<[f64; 3]>; 4] = [None; 4];
            for e in 0..4 {
                let (a, b) = (e, (e + 1) % 4);
                if pos[a] != pos[b] {
                    let s = c[a] / (c[a] - c[b]);
                    let th = corners[a].0 + s * (corners[b].0 - corners[a].0);
                    let ph = corners[a].1 + s * (corners[b].1 - corners[a].1);
                    cross[e] = Some(unit_vec(th, ph));
                }
            }
            let edges: Vec<usize> = (0..4).filter(|&e| cross[e].is_some()).collect();
            let pairs: Vec<(usize, usize)> = if edges.len() == 2 {
                vec![(edges[0], edges[1])]
            } else {
                let centre_pos = c.iter().sum::<f64>() >= 0.0;
                if centre_pos == pos[0] {
                    // corners 0 and 2 joined through the centre: cut off corners 1 and 3
                    vec![(0, 1), (2, 3)]
                } else {
                    vec![(3, 0), (1, 2)]
                }
            };
            for (a, b) in pairs {
                if let (Some(x), Some(y)) = (cross[a], cross[b]) {
                    length += great_circle(x, y);
                }
            }
        }
    }
    NodalLengthEstimate {
        length,
        resolution: field.resolution,
        method: "marching-squares".into(),
    }
}

/// `∫_{S²} H_4(T) dx` by the grid rule in `θ` and the trapezoid rule in `φ`; the polar caps are omitted.
pub fn h4_integral(field: &SphereField2) -> f64 {
    let n_lon = field.n_lon;
    let th = &field.thetas;
    let dphi = 2.0 * PI / n_lon as f64;
    let mut acc = 0.0;
    for i in 0..th.len() {
        let lo = if i == 0 { th[0] } else { (th[i - 1] + th[i]) / 2.0 };
        let hi = if i + 1 == th.len() {
            th[i]
        } else {
            (th[i] + th[i + 1]) / 2.0
        };
        let band = (lo.cos() - hi.cos()) * dphi;
        let row: f64 = field.values[i * n_lon..(i + 1) * n_lon]
            .iter()
            .map(|&t| hermite(4, t))
            .sum();
        acc += band * row;
    }
    acc
}

/// One draw of the S² simulator summarized for reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrawSummary {
    pub draw: usize,
    pub length: f64,
    pub h4_integral: f64,
}

/// `draws` independent fields, draw `k` seeded on stream `k`.
pub fn simulate_draws(ell: u32, resolution: u32, draws: usize, seed: u64) -> Result<Vec<DrawSummary>> {
    (0..draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = mc::task_rng(seed, k as u64);
            let coeffs = SphereField2::draw_coeffs(ell, &mut rng);
            let f = synthesize(ell, coeffs, resolution)?;
            Ok(DrawSummary {
                draw: k,
                length: nodal_length_s2(&f).length,
                h4_integral: h4_integral(&f),
            })
        })
        .collect()
}

/// `E[L] = √(E/d) H^{d-1}(S^{d-1})`.
pub fn mean_nodal_volume(ell: u32, d: u32) -> f64 {
    grad_variance(ell, d).sqrt() * sphere_area(d - 1)
}

/// `E[(2ε)^{-1} 1_{|T|≤ε}] / φ(0) = (Φ(ε) - Φ(-ε)) / (2ε φ(0))`, the expected relative bias.
pub fn one_point_bias_factor(eps: f64) -> f64 {
    let mass = statrs::function::erf::erf(eps / std::f64::consts::SQRT_2);
    mass / (2.0 * eps) * (2.0 * PI).sqrt()
}

/// `H^d(S^d) · E[(2ε)^{-1} 1_{|T|≤ε} ‖∇T‖]` with `T` and `∇T` independent at a point.
pub fn one_point_mean(d: u32, ell: u32, eps: f64, n: usize, seed: u64) -> Result<McEstimate> {
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 0.1], got {eps}")));
    }
    if d < 2 || ell < 1 {
        return Err(Error::Domain(format!("need d >= 2 and ell >= 1, got d={d} ell={ell}")));
    }
    let sd = grad_variance(ell, d).sqrt();
    let area = sphere_area(d);
    Ok(mc::estimate(n, seed, |rng| {
        let t: f64 = rng.sample(StandardNormal);
        let mut g2 = 0.0;
        for _ in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            g2 += z * z;
        }
        if t.abs() <= eps {
            area * sd * g2.sqrt() / (2.0 * eps)
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gegenbauer;

    fn harmonics(ell: u32, theta: f64, phi: f64) -> Vec<f64> {
        (0..(2 * ell + 1) as usize)
            .map(|k| {
                let mut c = vec![0.0; 2 * ell as usize + 1];
                c[k] = 1.0;
                SphereField2::eval_coeffs(ell, &c, theta, phi).value
            })
            .collect()
    }

    #[test]
    fn addition_theorem() {
        let ell = 9;
        let (a, b) = ((0.7, 1.1), (2.0, 4.0));
        let ya = harmonics(ell, a.0, a.1);
        let yb = harmonics(ell, b.0, b.1);
        let k = 4.0 * PI / (2 * ell + 1) as f64;
        let var: f64 = ya.iter().map(|y| y * y).sum::<f64>() * k;
        assert!((var - 1.0).abs() < 1e-12);
        let cov: f64 = ya.iter().zip(&yb).map(|(x, y)| x * y).sum::<f64>() * k;
        let ua = unit_vec(a.0, a.1);
        let ub = unit_vec(b.0, b.1);
        let g = gegenbauer(ell, 2, ua[0] * ub[0] + ua[1] * ub[1] + ua[2] * ub[2])
            .unwrap()
            .value;
        assert!((cov - g).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = mc::task_rng(4, 0);
        let c = SphereField2::draw_coeffs(6, &mut rng);
        let (th, ph, h) = (1.1, 0.4, 1e-6);
        let p = SphereField2::eval_coeffs(6, &c, th, ph);
        let dth = (SphereField2::eval_coeffs(6, &c, th + h, ph).value
            - SphereField2::eval_coeffs(6, &c, th - h, ph).value)
            / (2.0 * h);
        let dph = (SphereField2::eval_coeffs(6, &c, th, ph + h).value
            - SphereField2::eval_coeffs(6, &c, th, ph - h).value)
            / (2.0 * h);
        assert!((p.grad[0] - dth).abs() < 1e-6);
        assert!((p.grad[1] - dph / th.sin()).abs() < 1e-6);
    }

    #[test]
    fn grid_matches_point_evaluation() {
        let f = simulate_field_s2(5, 40, 3).unwrap();
        let (i, j) = (7, 13);
        let phi = 2.0 * PI * j as f64 / 40.0;
        assert!((f.values[i * 40 + j] - f.eval(f.thetas[i], phi).value).abs() < 1e-12);
    }

    #[test]
    fn constant_field_has_no_nodal_set() {
        let mut f = simulate_field_s2(3, 48, 1).unwrap();
        f.values.iter_mut().for_each(|v| *v = 0.3);
        assert_eq!(nodal_length_s2(&f).length, 0.0);
    }

    #[test]
    fn equator_length() {
        // Y_1^0 ∝ cos θ vanishes on the equator
        let f = synthesize(1, vec![1.0, 0.0, 0.0], 64).unwrap();
        let len = nodal_length_s2(&f).length;
        assert!((len - 2.0 * PI).abs() < 1e-3, "{len}");
    }

    #[test]
    fn under_resolved_grid_rejected() {
        assert!(matches!(simulate_field_s2(10, 40, 1), Err(Error::Resolution(_))));
    }

    #[test]
    fn bias_factor_monotone_in_eps() {
        let f: Vec<f64> = [0.1, 0.03, 0.01].iter().map(|&e| one_point_bias_factor(e)).collect();
        assert!(f[0] < f[1] && f[1] < f[2] && f[2] < 1.0);
        assert!((1.0 - f[0] - 0.1f64.powi(2) / 6.0).abs() < 1e-5);
    }
}
