//! Numerical checks of the scaled-argument Gegenbauer asymptotics, the order of the
//! scaled product integrals, and the uniform correlation bounds away from the diagonal.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::compositions;
use crate::meridian::correlations;
use crate::quad::loglog_slope;
use crate::specfun::{gegenbauer, hilb_prefactor, hilb_scale};

/// Slope tolerance for residual decay fits.
pub const SLOPE_TOL: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Expansion {
    /// `G` against its Bessel-phase main term.
    G0,
    /// `G'` against its main term.
    G1,
    /// `G''` against the rearranged differential equation.
    G2,
}

impl Expansion {
    pub const ALL: [Expansion; 3] = [Expansion::G0, Expansion::G1, Expansion::G2];

    /// Predicted decay exponent of the residual at fixed `θ = ψ/L`.
    pub fn predicted_slope(self, d: u32) -> f64 {
        let d = d as f64;
        match self {
            Expansion::G0 => -(d + 1.0) / 2.0,
            Expansion::G1 => (1.0 - d) / 2.0,
            Expansion::G2 => (3.0 - d) / 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Expansion::G0 => "g0",
            Expansion::G1 => "g1",
            Expansion::G2 => "g2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticCheck {
    pub quantity: String,
    pub d: u32,
    pub ells: Vec<u32>,
    /// Largest absolute residual over the window, per `ℓ`.
    pub max_residual: Vec<f64>,
    pub slope: f64,
    pub predicted_slope: f64,
    pub tol: f64,
    pub pass: bool,
}

fn phase(psi: f64, d: u32) -> f64 {
    psi - (d as f64 / 2.0 - 1.0) * PI / 2.0 + PI / 4.0
}

/// Main term of `G(cos(ψ/L))`.
pub fn g0_main(ell: u32, d: u32, psi: f64) -> Result<f64> {
    let l = hilb_scale(ell, d);
    let xi = hilb_prefactor(ell, d, psi)?.xi;
    let a = d as f64 / 2.0 - 1.0;
    let w = phase(psi, d);
    let amp = (2.0 / (PI * ell as f64 * (psi / l).sin())).sqrt();
    Ok(xi * amp * (w.sin() + (4.0 * a * a - 1.0) / (8.0 * psi) * w.cos()))
}

/// Main term of `G'(cos(ψ/L))`.
pub fn g1_main(ell: u32, d: u32, psi: f64) -> Result<f64> {
    let l = hilb_scale(ell, d);
    let xi = hilb_prefactor(ell, d, psi)?.xi;
    let s = (psi / l).sin();
    let w = phase(psi, d);
    let lf = ell as f64;
    let df = d as f64;
    Ok(lf.sqrt() / s.powf(2.5) * xi * (2.0 / PI).sqrt() * (-w.cos() * s + (df * df - 1.0) / (8.0 * lf) * w.sin()))
}

/// `G''` from the rearranged differential equation with the `cos` factor dropped.
pub fn g2_main(ell: u32, d: u32, psi: f64) -> Result<f64> {
    let l = hilb_scale(ell, d);
    let th = psi / l;
    let ge = gegenbauer(ell, d, th.cos())?;
    let s2 = th.sin().powi(2);
    let lf = ell as f64;
    Ok(d as f64 / s2 * ge.d1 - lf * lf * (1.0 + (d as f64 - 1.0) / lf) / s2 * ge.value)
}

/// `|exact - main|` at `θ = ψ/L`.
pub fn residual(kind: Expansion, ell: u32, d: u32, theta: f64) -> Result<f64> {
    let l = hilb_scale(ell, d);
    let psi = theta * l;
    let ge = gegenbauer(ell, d, theta.cos())?;
    Ok(match kind {
        Expansion::G0 => (ge.value - g0_main(ell, d, psi)?).abs(),
        Expansion::G1 => (ge.d1 - g1_main(ell, d, psi)?).abs(),
        Expansion::G2 => (ge.d2 - g2_main(ell, d, psi)?).abs(),
    })
}

/// Angular window and sampling density for the residual maxima.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub theta_lo: f64,
    pub theta_hi: f64,
    /// Samples per unit of `ψ`.
    pub density: f64,
}

impl Default for Window {
    fn default() -> Self {
        Window {
            theta_lo: 0.3,
            theta_hi: 1.2,
            density: 8.0,
        }
    }
}

/// Largest residual over `θ ∈ [θ_lo, θ_hi]` for each `ℓ`, and the fitted decay.
pub fn check_gegenbauer_expansion(kind: Expansion, ells: &[u32], d: u32, window: Window) -> Result<AsymptoticCheck> {
    if ells.len() < 2 {
        return Err(Error::Domain("need at least two values of ell".into()));
    }
    let mut max_residual = Vec::with_capacity(ells.len());
    for &ell in ells {
        let l = hilb_scale(ell, d);
        let n = ((window.theta_hi - window.theta_lo) * l * window.density).ceil() as usize + 1;
        let vals = (0..n)
            .into_par_iter()
            .map(|i| {
                let th = window.theta_lo + (window.theta_hi - window.theta_lo) * i as f64 / (n - 1) as f64;
                residual(kind, ell, d, th)
            })
            .collect::<Result<Vec<f64>>>()?;
        max_residual.push(vals.into_iter().fold(0.0, f64::max));
    }
    let xs: Vec<f64> = ells.iter().map(|&l| l as f64).collect();
    let slope = loglog_slope(&xs, &max_residual);
    let predicted = kind.predicted_slope(d);
    Ok(AsymptoticCheck {
        quantity: kind.name().into(),
        d,
        ells: ells.to_vec(),
        max_residual,
        slope,
        predicted_slope: predicted,
        tol: SLOPE_TOL,
        pass: (slope - predicted).abs() <= SLOPE_TOL,
    })
}

/// `(1/L) ∫_C^{Lπ/2} sin^{d-1}(ψ/L) Π |factor|^{a_k} dψ` for a partition of 4 into `d+3` parts.
/// Factor order: `d-1` tangential, field, two field-gradient, radial.
pub fn product_integral(a: &[u32], d: u32, ell: u32, c: f64) -> Result<f64> {
    Ok(product_integrals(&[a.to_vec()], d, ell, c)?[0])
}

fn check_partition(a: &[u32], d: u32) -> Result<()> {
    if a.len() != d as usize + 3 || a.iter().sum::<u32>() != 4 {
        return Err(Error::Domain(format!(
            "need {} exponents summing to 4, got {a:?}",
            d + 3
        )));
    }
    Ok(())
}

/// [`product_integral`] for several partitions sharing one trapezoid grid.
pub fn product_integrals(parts: &[Vec<u32>], d: u32, ell: u32, c: f64) -> Result<Vec<f64>> {
    for a in parts {
        check_partition(a, d)?;
    }
    let l = hilb_scale(ell, d);
    let hi = l * PI / 2.0;
    if c >= hi {
        return Err(Error::Domain(format!("C={c} exceeds the range L pi/2={hi}")));
    }
    let du = d as usize;
    // exponents of (|tan|, |G|, |tg|, |rad|)
    let exps: Vec<[i32; 4]> = parts
        .iter()
        .map(|a| {
            let tan: u32 = a[..du - 1].iter().sum();
            [
                tan as i32,
                a[du - 1] as i32,
                (a[du] + a[du + 1]) as i32,
                a[du + 2] as i32,
            ]
        })
        .collect();
    let n = (40.0 * l).ceil() as usize + 1;
    let h = (hi - c) / (n - 1) as f64;
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let th = (c + h * i as f64) / l;
            let r = correlations(th, ell, d)?;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            Ok((
                w * th.sin().powi(d as i32 - 1),
                [r.tan.abs(), r.tt.abs(), r.tg.abs(), r.rad.abs()],
            ))
        })
        .collect::<Result<Vec<(f64, [f64; 4])>>>()?;
    Ok(exps
        .iter()
        .map(|e| {
            let s: f64 = rows
                .iter()
                .map(|(w, f)| w * f[0].powi(e[0]) * f[1].powi(e[1]) * f[2].powi(e[2]) * f[3].powi(e[3]))
                .sum();
            h * s / l
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductCheck {
    pub d: u32,
    pub a: Vec<u32>,
    pub ells: Vec<u32>,
    pub values: Vec<f64>,
    pub exponent: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Fitted exponent of [`product_integral`] in `ℓ`; passes when it is at most `-d + 0.3`.
pub fn check_product_integral(a: &[u32], d: u32, ells: &[u32], c: f64) -> Result<ProductCheck> {
    Ok(check_product_all(&[a.to_vec()], d, ells, c)?.remove(0))
}

/// [`check_product_integral`] for many partitions at once.
pub fn check_product_all(parts: &[Vec<u32>], d: u32, ells: &[u32], c: f64) -> Result<Vec<ProductCheck>> {
    if ells.len() < 2 {
        return Err(Error::Domain("need at least two values of ell".into()));
    }
    let per_ell = ells
        .iter()
        .map(|&l| product_integrals(parts, d, l, c))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = ells.iter().map(|&l| l as f64).collect();
    let bound = -(d as f64) + SLOPE_TOL;
    Ok(parts
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let values: Vec<f64> = per_ell.iter().map(|v| v[k]).collect();
            let exponent = loglog_slope(&xs, &values);
            ProductCheck {
                d,
                a: a.clone(),
                ells: ells.to_vec(),
                values,
                exponent,
                bound,
                pass: exponent <= bound,
            }
        })
        .collect())
}

/// Every partition of 4 into `d+3` ordered parts.
pub fn product_partitions(d: u32) -> Vec<Vec<u32>> {
    compositions(4, d as usize + 3)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub d: u32,
    pub ell: u32,
    pub c: f64,
    pub eps: f64,
    /// Largest of the four normalized correlations on `[C/ℓ, π/2]`.
    pub max_corr: f64,
    pub admissible: bool,
}

/// Largest `|r|` over the four normalized correlations for `θ ∈ [C/ℓ, π/2]`.
pub fn max_correlation_beyond(d: u32, ell: u32, c: f64) -> Result<f64> {
    let lo = c / ell as f64;
    if lo >= PI / 2.0 {
        return Err(Error::Domain(format!("C/ell={lo} is beyond pi/2")));
    }
    let n = (40.0 * hilb_scale(ell, d) * (PI / 2.0 - lo)).ceil() as usize + 1;
    let vals = (0..n)
        .into_par_iter()
        .map(|i| {
            let th = lo + (PI / 2.0 - lo) * i as f64 / (n - 1) as f64;
            let r = correlations(th, ell, d)?;
            Ok(r.tt.abs().max(r.tg.abs()).max(r.tan.abs()).max(r.rad.abs()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Checks `max_corr < 1 - ε` over a grid of `(C, ε)`.
pub fn search_c_eps(d: u32, ell: u32, cs: &[f64], epss: &[f64]) -> Result<Vec<BoundCheck>> {
    let mut out = Vec::new();
    for &c in cs {
        let m = max_correlation_beyond(d, ell, c)?;
        for &eps in epss {
            out.push(BoundCheck {
                d,
                ell,
                c,
                eps,
                max_corr: m,
                admissible: m < 1.0 - eps,
            });
        }
    }
    Ok(out)
}

/// `G''` identity gap: the residual of [`g2_main`] equals `d (1 - cos θ) G' / sin² θ`.
pub fn g2_identity_gap(ell: u32, d: u32, theta: f64) -> Result<f64> {
    let ge = gegenbauer(ell, d, theta.cos())?;
    let psi = theta * hilb_scale(ell, d);
    let predicted = d as f64 * (1.0 - theta.cos()) * ge.d1 / theta.sin().powi(2);
    let actual = g2_main(ell, d, psi)? - ge.d2;
    Ok((actual - predicted).abs() / (1.0 + ge.d2.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d2_main_term_is_legendre_asymptotic() {
        // with d = 2 the prefactor is 1 and the main term is the classical Legendre form
        let (ell, theta) = (300, 0.9);
        let l = hilb_scale(ell, 2);
        let psi = theta * l;
        let classical = (2.0 / (PI * ell as f64 * theta.sin())).sqrt()
            * ((psi + PI / 4.0).sin() - (psi + PI / 4.0).cos() / (8.0 * psi));
        assert!((g0_main(ell, 2, psi).unwrap() - classical).abs() < 1e-14);
        let exact = gegenbauer(ell, 2, theta.cos()).unwrap().value;
        assert!((exact - classical).abs() < 1e-4);
    }

    #[test]
    fn g2_gap_is_the_dropped_cosine() {
        for &(ell, d, th) in &[(40, 3, 0.5), (100, 4, 1.0), (17, 5, 0.2)] {
            assert!(g2_identity_gap(ell, d, th).unwrap() < 1e-9);
        }
    }

    #[test]
    fn partitions_count() {
        assert_eq!(product_partitions(3).len(), 126);
        assert!(product_integral(&[4, 0, 0], 3, 50, 1.0).is_err());
    }
}
