//! Covariance of `(T(x), T(y), ∇T(x), ∇T(y))` for `x` the north pole and `y` at
//! geodesic distance `θ` on the same meridian, with Gaussian sampling and
//! two-point Kac-Rice evaluation.
//!
//! Gradient coordinates are ordered radial (along the meridian) first.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::diagram::MeridianRho;
use crate::error::{Error, Result};
use crate::mc::{self, McEstimate};
use crate::specfun::{gegenbauer, grad_variance, hilb_scale, lgamma, sphere_area};

/// Relative eigenvalue tolerance for positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct MeridianCov {
    pub theta: f64,
    pub ell: u32,
    pub d: u32,
    pub sigma: DMatrix<f64>,
    pub rho: MeridianRho<f64>,
    /// `G`, `G'`, `G''` at `cos θ`.
    pub g: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianPairSample {
    pub t_x: f64,
    pub t_y: f64,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
}

/// The four normalized correlations at distance `theta`, without assembling `Σ`.
pub fn correlations(theta: f64, ell: u32, d: u32) -> Result<MeridianRho<f64>> {
    let (s, c) = theta.sin_cos();
    let ge = gegenbauer(ell, d, c)?;
    let e = grad_variance(ell, d);
    let rad = ge.d1 * c - ge.d2 * s * s;
    Ok(MeridianRho {
        tt: ge.value,
        tg: s * ge.d1 / e.sqrt(),
        rad: rad / e,
        tan: ge.d1 / e,
    })
}

pub fn build_sigma(theta: f64, ell: u32, d: u32) -> Result<MeridianCov> {
    if !(theta > 0.0 && theta <= PI) {
        return Err(Error::Domain(format!("theta must lie in (0, pi], got {theta}")));
    }
    if ell < 1 {
        return Err(Error::Domain("ell must be >= 1".into()));
    }
    let (s, c) = theta.sin_cos();
    let ge = gegenbauer(ell, d, c)?;
    let e = grad_variance(ell, d);
    let b = s * ge.d1;
    let rad = ge.d1 * c - ge.d2 * s * s;
    let du = d as usize;
    let n = 2 * du + 2;
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut set = |i: usize, j: usize, v: f64| {
        m[(i, j)] = v;
        m[(j, i)] = v;
    };
    set(0, 0, 1.0);
    set(1, 1, 1.0);
    for k in 2..n {
        set(k, k, e);
    }
    set(0, 1, ge.value);
    set(0, 2 + du, -b);
    set(1, 2, b);
    set(2, 2 + du, rad);
    for j in 1..du {
        set(2 + j, 2 + du + j, ge.d1);
    }
    let rho = MeridianRho {
        tt: ge.value,
        tg: b / e.sqrt(),
        rad: rad / e,
        tan: ge.d1 / e,
    };
    let cov = MeridianCov {
        theta,
        ell,
        d,
        sigma: m,
        rho,
        g: [ge.value, ge.d1, ge.d2],
    };
    cov.check_psd()?;
    Ok(cov)
}

impl MeridianCov {
    pub fn check_psd(&self) -> Result<f64> {
        let eig = SymmetricEigen::new(self.sigma.clone());
        let min = eig.eigenvalues.min();
        if min < -PSD_TOL * self.sigma.trace() {
            return Err(Error::Numeric(format!(
                "covariance not PSD at theta={} ell={} d={}: min eigenvalue {min}",
                self.theta, self.ell, self.d
            )));
        }
        Ok(min)
    }

    /// Covariance with gradients divided by `√(E/d)`.
    pub fn normalized(&self) -> DMatrix<f64> {
        let e = grad_variance(self.ell, self.d).sqrt();
        let n = self.sigma.nrows();
        DMatrix::from_fn(n, n, |i, j| {
            let si = if i >= 2 { e } else { 1.0 };
            let sj = if j >= 2 { e } else { 1.0 };
            self.sigma[(i, j)] / (si * sj)
        })
    }
}

/// Symmetric square root with small negative eigenvalues clipped to zero.
pub fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let tol = PSD_TOL * m.trace().abs().max(1.0);
    let mut lam = eig.eigenvalues.clone();
    for l in lam.iter_mut() {
        if *l < -tol {
            return Err(Error::Numeric(format!(
                "eigenvalue {l} below clipping tolerance {}",
                -tol
            )));
        }
        *l = l.max(0.0).sqrt();
    }
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&lam) * v.transpose())
}

/// Reusable sampler for normalized pairs.
#[derive(Debug, Clone)]
pub struct PairSampler {
    d: usize,
    root: DMatrix<f64>,
}

impl PairSampler {
    pub fn new(cov: &MeridianCov) -> Result<PairSampler> {
        Ok(PairSampler {
            d: cov.d as usize,
            root: sym_sqrt(&cov.normalized())?,
        })
    }

    /// Draws the raw `2d+2` vector into `out`.
    pub fn draw_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let n = self.root.nrows();
        let z = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
        let x = &self.root * z;
        out.copy_from_slice(x.as_slice());
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> GaussianPairSample {
        let mut buf = vec![0.0; 2 * self.d + 2];
        self.draw_into(rng, &mut buf);
        GaussianPairSample {
            t_x: buf[0],
            t_y: buf[1],
            grad_x: buf[2..2 + self.d].to_vec(),
            grad_y: buf[2 + self.d..].to_vec(),
        }
    }
}

/// `n` normalized pair samples, deterministic in `(seed, n)`.
pub fn sample_pairs(cov: &MeridianCov, n: usize, seed: u64) -> Result<Vec<GaussianPairSample>> {
    let sampler = PairSampler::new(cov)?;
    let mut out = Vec::with_capacity(n);
    let mut chunk = 0u64;
    while out.len() < n {
        let mut rng = mc::task_rng(seed, chunk);
        for _ in 0..mc::CHUNK.min(n - out.len()) {
            out.push(sampler.draw(&mut rng));
        }
        chunk += 1;
    }
    Ok(out)
}

/// Default lower cutoff `10⁻³/L` for two-point evaluation.
pub fn default_theta_min(ell: u32, d: u32) -> f64 {
    1e-3 / hilb_scale(ell, d)
}

/// `c` with `c E (H^d)² = E[L]²`.
pub fn kacrice_c(d: u32) -> f64 {
    let r = sphere_area(d - 1) / sphere_area(d);
    r * r / d as f64
}

/// `E‖∇T‖` at one point.
pub fn mean_grad_norm(ell: u32, d: u32) -> f64 {
    let e = grad_variance(ell, d);
    (2.0 * e).sqrt() * (lgamma((d as f64 + 1.0) / 2.0) - lgamma(d as f64 / 2.0)).exp()
}

/// Monte Carlo two-point function `K(θ) = φ(0,0) E[‖∇T(x)‖‖∇T(y)‖ | T(x) = T(y) = 0]`.
pub fn two_point_kacrice(theta: f64, ell: u32, d: u32, n: usize, seed: u64, theta_min: f64) -> Result<McEstimate> {
    if theta < theta_min {
        return Err(Error::Domain(format!("theta {theta} below theta_min {theta_min}")));
    }
    let cov = build_sigma(theta, ell, d)?;
    let du = d as usize;
    let s = &cov.sigma;
    let a = s.view((0, 0), (2, 2)).into_owned();
    let b = s.view((2, 0), (2 * du, 2)).into_owned();
    let c = s.view((2, 2), (2 * du, 2 * du)).into_owned();
    let det = 1.0 - cov.g[0] * cov.g[0];
    let a_inv = a
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular field block".into()))?;
    let cond = &c - &b * a_inv * b.transpose();
    let root = sym_sqrt(&cond)?;
    let dens = 1.0 / (2.0 * PI * det.sqrt());
    let est = mc::estimate(n, seed, |rng| {
        let z = DVector::<f64>::from_fn(2 * du, |_, _| rng.sample(StandardNormal));
        let x = &root * z;
        let nx = x.rows(0, du).norm();
        let ny = x.rows(du, du).norm();
        nx * ny
    });
    Ok(McEstimate {
        mean: dens * est.mean,
        std_error: dens * est.std_error,
        ..est
    })
}

/// Deterministic two-point function and its excess over `cE`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPoint {
    pub theta: f64,
    pub k: f64,
    pub k_minus_ce: f64,
}

/// Log-spaced trapezoid grid for `∫_0^∞ f(s) s^{-3/2} ds`.
struct LogGrid {
    s: Vec<f64>,
    w: Vec<f64>,
}

impl LogGrid {
    fn new(h: f64, half_width: f64) -> LogGrid {
        let n = (2.0 * half_width / h).round() as usize;
        let xs: Vec<f64> = (0..n).map(|i| -half_width + i as f64 * h).collect();
        LogGrid {
            s: xs.iter().map(|x| x.exp()).collect(),
            w: xs.iter().map(|x| (-x / 2.0).exp() * h).collect(),
        }
    }
}

/// Grid step in `log s` for the Laplace-transform representation of `‖·‖`.
pub const KR_LOG_STEP: f64 = 0.2;
/// Half-width of the `log s` range.
pub const KR_LOG_RANGE: f64 = 40.0;

fn grid() -> &'static LogGrid {
    static GRID: std::sync::OnceLock<LogGrid> = std::sync::OnceLock::new();
    GRID.get_or_init(|| LogGrid::new(KR_LOG_STEP, KR_LOG_RANGE))
}

/// `x^{(d-1)/2}` for `x > 0`.
fn half_power(x: f64, d: u32) -> f64 {
    if d % 2 == 1 {
        x.powi(((d - 1) / 2) as i32)
    } else {
        x.powi(((d - 2) / 2) as i32) * x.sqrt()
    }
}

/// Evaluates `K(θ)` and `K(θ) - cE` by writing `‖v‖ = (2√π)⁻¹ ∫ (1 - e^{-s‖v‖²}) s^{-3/2} ds`
/// and integrating the Gaussian Laplace transforms over a log-spaced grid.
pub fn two_point_deterministic(theta: f64, ell: u32, d: u32) -> Result<TwoPoint> {
    let cov = build_sigma(theta, ell, d)?;
    let [g, g1, _] = cov.g;
    let e = grad_variance(ell, d);
    let b = theta.sin() * g1;
    let rad = cov.rho.rad * e;
    let det = 1.0 - g * g;
    if det <= 0.0 {
        return Err(Error::Numeric(format!("degenerate field block at theta={theta}")));
    }
    // conditional radial covariance [[a, c], [c, a]]; tangential pairs are unaffected
    let a = (e - b * b / det).max(0.0);
    let c = rad - g * b * b / det;
    let a2c2 = ((a - c) * (a + c)).max(0.0);
    // e - G' = e (1 - G_{ℓ-1; d+2})
    let e_minus_g1 = if ell >= 1 {
        e * (1.0 - gegenbauer(ell - 1, d + 2, theta.cos())?.value)
    } else {
        e
    };
    let tan_det = (e_minus_g1 * (e + g1)).max(0.0);
    let m0 = mean_grad_norm(ell, d);

    let grid = grid();
    let n = grid.s.len();
    let r_marg: Vec<f64> = grid.s.iter().map(|&s| 1.0 + 2.0 * a * s).collect();
    let t_marg: Vec<f64> = grid.s.iter().map(|&s| 1.0 + 2.0 * e * s).collect();
    let tang0: Vec<f64> = t_marg.iter().map(|&t| 1.0 / half_power(t, d)).collect();
    let marg: Vec<f64> = (0..n).map(|i| tang0[i] / r_marg[i].sqrt()).collect();
    // (1+2es)^{-1/2} - (1+2as)^{-1/2} with a - e = -B²/det
    let a_minus_e = -b * b / det;
    let mut d_en = 0.0;
    for i in 0..n {
        let (x, y) = (t_marg[i].sqrt(), r_marg[i].sqrt());
        let diff = 2.0 * a_minus_e * grid.s[i] / (x * y * (x + y));
        d_en += grid.w[i] * diff * tang0[i];
    }
    d_en /= 2.0 * PI.sqrt();
    let half_tan = (d as f64 - 1.0) / 2.0;
    // M(s,t) / (M(s,0) M(0,t)) = (1 - u)^{-1/2} (1 - v)^{-(d-1)/2}, u and v the cross terms
    let log_ratio = |joint: f64, cross: f64, prod: f64| {
        let u = cross / prod;
        if u < 0.5 {
            (-u).ln_1p()
        } else {
            (joint / prod).ln()
        }
    };
    let mut cov_sum = 0.0;
    for i in 0..n {
        let si = grid.s[i];
        let mut row = 0.0;
        for j in 0..=i {
            let tj = grid.s[j];
            let st4 = 4.0 * si * tj;
            let r = 1.0 + 2.0 * a * (si + tj) + st4 * a2c2;
            let t = 1.0 + 2.0 * e * (si + tj) + st4 * tan_det;
            let lr = log_ratio(r, st4 * c * c, r_marg[i] * r_marg[j]);
            let lt = log_ratio(t, st4 * g1 * g1, t_marg[i] * t_marg[j]);
            let excess = (-0.5 * lr - half_tan * lt).exp_m1();
            let term = grid.w[j] * marg[i] * marg[j] * excess;
            row += if j == i { term } else { 2.0 * term };
        }
        cov_sum += grid.w[i] * row;
    }
    let cov_norm = cov_sum / (4.0 * PI);
    let mx = m0 + d_en;
    let dens = 1.0 / (2.0 * PI * det.sqrt());
    // dens - 1/(2π) without cancellation
    let ddens = g * g / (det.sqrt() * (1.0 + det.sqrt())) / (2.0 * PI);
    let k = dens * (cov_norm + mx * mx);
    let k_minus_ce = dens * cov_norm + dens * (mx * mx - m0 * m0) + ddens * m0 * m0;
    Ok(TwoPoint { theta, k, k_minus_ce })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_degree_at_right_angle() {
        let cov = build_sigma(PI / 2.0, 1, 2).unwrap();
        assert!(cov.rho.tt.abs() < 1e-15);
    }

    #[test]
    fn coincident_limit() {
        let cov = build_sigma(1e-7, 15, 3).unwrap();
        assert!((cov.rho.tt - 1.0).abs() < 1e-9);
        assert!(cov.rho.tg.abs() < 1e-4);
        assert!((cov.rho.tan - 1.0).abs() < 1e-9);
        assert!((cov.rho.rad - 1.0).abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        assert!(build_sigma(0.0, 3, 3).is_err());
        assert!(build_sigma(1.0, 0, 3).is_err());
        assert!(two_point_kacrice(1e-9, 10, 3, 10, 1, default_theta_min(10, 3)).is_err());
    }

    #[test]
    fn empty_sample() {
        let cov = build_sigma(0.4, 5, 3).unwrap();
        assert!(sample_pairs(&cov, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn c_matches_mean_gradient() {
        for d in 2..7 {
            let ell = 9;
            let lhs = kacrice_c(d) * crate::specfun::eigenvalue(ell, d);
            let m0 = mean_grad_norm(ell, d);
            assert!((lhs - m0 * m0 / (2.0 * PI)).abs() < 1e-12 * lhs);
        }
    }

    #[test]
    fn deterministic_matches_mc_two_point() {
        let (ell, d, theta) = (10, 3, 0.7);
        let det = two_point_deterministic(theta, ell, d).unwrap();
        let mc = two_point_kacrice(theta, ell, d, 200_000, 5, default_theta_min(ell, d)).unwrap();
        assert!(mc.z_score(det.k) < 4.0, "det {} mc {:?}", det.k, mc);
    }
}
