//! Special functions: normalized Gegenbauer polynomials with derivatives,
//! symmetric Jacobi, generalized Laguerre, probabilists' Hermite, Bessel `J`
//! of integer and half-integer order, and the Hilb prefactor.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_traits::{One, Zero};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};
use crate::exact::{gen_binom, qint, PolyQ, Q};

/// Eigenvalue `ℓ(ℓ+d-1)` of the Laplacian on `S^d`.
pub fn eigenvalue(ell: u32, d: u32) -> f64 {
    let l = ell as f64;
    l * (l + d as f64 - 1.0)
}

/// Gradient variance per coordinate, `E/d`.
pub fn grad_variance(ell: u32, d: u32) -> f64 {
    eigenvalue(ell, d) / d as f64
}

/// Surface measure of the unit sphere `S^d ⊂ R^{d+1}`.
pub fn sphere_area(d: u32) -> f64 {
    let h = (d as f64 + 1.0) / 2.0;
    2.0 * (h * PI.ln() - ln_gamma(h)).exp()
}

/// Dimension of the degree-`ℓ` eigenspace on `S^d`.
pub fn eigenspace_dim(ell: u32, d: u32) -> f64 {
    if ell == 0 {
        return 1.0;
    }
    // (2ℓ+d-1)/ℓ · C(ℓ+d-2, ℓ-1), with the binomial as a product over d-1 factors
    let l = ell as f64;
    let mut binom = 1.0;
    for i in 1..d {
        binom *= (l - 1.0 + i as f64) / i as f64;
    }
    (2.0 * l + d as f64 - 1.0) / l * binom
}

/// `ln Γ(x)` for `x > 0`.
pub fn lgamma(x: f64) -> f64 {
    ln_gamma(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GegenbauerEval {
    pub ell: u32,
    pub d: u32,
    pub t: f64,
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

fn check_gegenbauer_args(d: u32, t: f64) -> Result<()> {
    if d < 2 {
        return domain(format!("sphere dimension must be at least 2, got {d}"));
    }
    if !(-1.0..=1.0).contains(&t) {
        return domain(format!("argument {t} outside [-1, 1]"));
    }
    Ok(())
}

/// `G_{ℓ;d}(t)` by the normalized three-term recurrence (so `G(1) = 1`).
fn gegenbauer_value(ell: u32, d: u32, t: f64) -> f64 {
    let lambda = (d as f64 - 1.0) / 2.0;
    let (mut prev, mut cur) = (1.0, t);
    if ell == 0 {
        return prev;
    }
    for n in 1..ell {
        let n = n as f64;
        let next = (2.0 * (n + lambda) * t * cur - n * prev) / (n + 2.0 * lambda);
        prev = cur;
        cur = next;
    }
    cur
}

/// Normalized Gegenbauer polynomial and its first two derivatives in `t`.
///
/// Derivatives come from the Jacobi shift `d/dt P_n^{(a,a)} = (n+2a+1)/2 P_{n-1}^{(a+1,a+1)}`,
/// which for the normalized family reads `G'_{ℓ;d} = (E_{ℓ;d}/d) G_{ℓ-1;d+2}`.
pub fn gegenbauer(ell: u32, d: u32, t: f64) -> Result<GegenbauerEval> {
    check_gegenbauer_args(d, t)?;
    let value = gegenbauer_value(ell, d, t);
    let e1 = grad_variance(ell, d);
    let d1 = if ell >= 1 {
        e1 * gegenbauer_value(ell - 1, d + 2, t)
    } else {
        0.0
    };
    let d2 = if ell >= 2 {
        let e2 = grad_variance(ell - 1, d + 2);
        e1 * e2 * gegenbauer_value(ell - 2, d + 4, t)
    } else {
        0.0
    };
    Ok(GegenbauerEval {
        ell,
        d,
        t,
        value,
        d1,
        d2,
    })
}

/// Symmetric Jacobi polynomial `P_n^{(a,a)}(t)` with `a = d/2 - 1`.
pub fn jacobi_symmetric(n: u32, d: u32, t: f64) -> Result<f64> {
    check_gegenbauer_args(d, t)?;
    let a = d as f64 / 2.0 - 1.0;
    // α_n = C(n + a, n)
    let ln_alpha = ln_gamma(n as f64 + a + 1.0) - ln_gamma(n as f64 + 1.0) - ln_gamma(a + 1.0);
    Ok(ln_alpha.exp() * gegenbauer_value(n, d, t))
}

/// Generalized Laguerre `L_n^{(α)}(t)` by the three-term recurrence.
pub fn laguerre_gen(n: u32, alpha: f64, t: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, 1.0 + alpha - t);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + alpha - t) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Exact `L_n^{(α)}` from the recurrence.
pub fn laguerre_poly(n: u32, alpha: &Q) -> PolyQ {
    let one = PolyQ::constant(Q::one());
    let first = PolyQ::new(vec![alpha + qint(1), qint(-1)]);
    if n == 0 {
        return one;
    }
    let (mut prev, mut cur) = (one, first);
    for k in 1..n {
        let k = qint(k as i64);
        let lin = PolyQ::new(vec![&k * qint(2) + qint(1) + alpha, qint(-1)]);
        let next = (&(&lin * &cur) - &prev.scale(&(&k + alpha))).scale(&(k + qint(1)).recip());
        prev = cur;
        cur = next;
    }
    cur
}

/// Exact `L_n^{(α)}` from the closed sum `Σ (-1)^i C(n+α, n-i) t^i / i!`.
pub fn laguerre_closed_form(n: u32, alpha: &Q) -> PolyQ {
    let top = qint(n as i64) + alpha;
    let mut coeffs = Vec::with_capacity(n as usize + 1);
    let mut ifact = Q::one();
    for i in 0..=n {
        if i > 0 {
            ifact *= qint(i as i64);
        }
        let sign = if i % 2 == 0 { Q::one() } else { -Q::one() };
        coeffs.push(sign * gen_binom(&top, n - i) / &ifact);
    }
    PolyQ::new(coeffs)
}

/// Exact `L_n^{(α)}(t)` at a rational point.
pub fn laguerre_gen_exact(n: u32, alpha: &Q, t: &Q) -> Q {
    laguerre_poly(n, alpha).eval(t)
}

/// Probabilists' Hermite polynomial `H_q(t)`.
pub fn hermite(q: u32, t: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, t);
    if q == 0 {
        return prev;
    }
    for k in 1..q {
        let next = t * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// Exact `H_q` as a polynomial.
pub fn hermite_poly(q: u32) -> PolyQ {
    let mut prev = PolyQ::constant(Q::one());
    if q == 0 {
        return prev;
    }
    let x = PolyQ::x();
    let mut cur = x.clone();
    for k in 1..q {
        let next = &(&x * &cur) - &prev.scale(&qint(k as i64));
        prev = cur;
        cur = next;
    }
    cur
}

pub fn hermite_exact(q: u32, t: &Q) -> Q {
    hermite_poly(q).eval(t)
}

/// `H_q(0)`: zero for odd `q`, `(-1)^n (2n-1)!!` for `q = 2n`.
pub fn hermite_at_zero(q: u32) -> Q {
    if q % 2 == 1 {
        return Q::zero();
    }
    let n = q / 2;
    let v = Q::from_integer(crate::exact::double_factorial_odd(n));
    if n.is_multiple_of(2) {
        v
    } else {
        -v
    }
}

const HANKEL_CROSSOVER: f64 = 25.0;

/// Bessel function of the first kind `J_ν(x)` for `ν ∈ {0, 1/2, 1, 3/2, ...}`.
pub fn bessel_j(nu: f64, x: f64) -> Result<f64> {
    let twice = 2.0 * nu;
    if nu < 0.0 || (twice - twice.round()).abs() > 1e-12 {
        return domain(format!("order {nu} is not a non-negative half-integer"));
    }
    if !(x >= 0.0) {
        return domain(format!("argument {x} must be non-negative"));
    }
    let twice = twice.round() as u32;
    if x == 0.0 {
        return Ok(if twice == 0 { 1.0 } else { 0.0 });
    }
    if twice % 2 == 1 {
        let n = (twice - 1) / 2;
        return Ok(bessel_half_integer(n, x));
    }
    let n = twice / 2;
    Ok(if x <= 3.0 {
        bessel_series(nu, x)
    } else if x < HANKEL_CROSSOVER {
        bessel_miller(n, x)
    } else {
        bessel_hankel(nu, x)
    })
}

fn bessel_series(nu: f64, x: f64) -> f64 {
    let h = x / 2.0;
    let h2 = h * h;
    let mut term = (nu * h.ln() - ln_gamma(nu + 1.0)).exp();
    let mut sum = term;
    for k in 1..200 {
        let k = k as f64;
        term *= -h2 / (k * (k + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Backward recurrence normalized by `J_0 + 2 Σ J_{2k} = 1`.
fn bessel_miller(n: u32, x: f64) -> f64 {
    let start = 2 * (((x + 30.0 + n as f64) / 2.0).ceil() as u32);
    let (mut above, mut cur) = (0.0_f64, 1e-30_f64);
    let mut norm = 0.0;
    let mut wanted = 0.0;
    for k in (1..=start).rev() {
        // cur = J_k (unnormalized), produce J_{k-1}
        if k == n {
            wanted = cur;
        }
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        let below = 2.0 * k as f64 / x * cur - above;
        above = cur;
        cur = below;
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            above *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
    }
    if n == 0 {
        wanted = cur;
    }
    norm += cur;
    wanted / norm
}

fn bessel_hankel(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let omega = x - nu * FRAC_PI_2 - FRAC_PI_4;
    // a_k(ν) / x^k, accumulated until the terms stop decreasing
    let (mut p, mut q) = (1.0, 0.0);
    let mut term = 1.0_f64;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        term *= (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if term.abs() >= last || term == 0.0 {
            break;
        }
        last = term.abs();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    (2.0 / (PI * x)).sqrt() * (p * omega.cos() - q * omega.sin())
}

/// `J_{n+1/2}(x) = √(2x/π) j_n(x)` with `j_n` the spherical Bessel function.
fn bessel_half_integer(n: u32, x: f64) -> f64 {
    let nu = n as f64 + 0.5;
    if x < 4.0 || x < n as f64 + 2.0 {
        return bessel_series(nu, x);
    }
    let (s, c) = x.sin_cos();
    let mut j_prev = s / x;
    if n == 0 {
        return (2.0 * x / PI).sqrt() * j_prev;
    }
    let mut j_cur = s / (x * x) - c / x;
    for k in 1..n {
        let next = (2 * k + 1) as f64 / x * j_cur - j_prev;
        j_prev = j_cur;
        j_cur = next;
    }
    (2.0 * x / PI).sqrt() * j_cur
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HilbPrefactor {
    pub ell: u32,
    pub d: u32,
    pub psi: f64,
    pub xi: f64,
}

/// `L = ℓ + (d-1)/2`.
pub fn hilb_scale(ell: u32, d: u32) -> f64 {
    ell as f64 + (d as f64 - 1.0) / 2.0
}

/// The Hilb prefactor `Ξ_{ℓ;d}(ψ)`, with `sin(ψ/L)` in the sine power.
pub fn hilb_prefactor(ell: u32, d: u32, psi: f64) -> Result<HilbPrefactor> {
    if d < 2 {
        return domain(format!("sphere dimension must be at least 2, got {d}"));
    }
    let big_l = hilb_scale(ell, d);
    if !(psi > 0.0) || psi >= big_l * PI {
        return domain(format!("scaled angle {psi} outside (0, Lπ)"));
    }
    let a = d as f64 / 2.0 - 1.0;
    let l = ell as f64;
    let ln_binom = ln_gamma(l + a + 1.0) - ln_gamma(l + 1.0) - ln_gamma(a + 1.0);
    let ln_xi = a * std::f64::consts::LN_2 - ln_binom + ln_gamma(l + d as f64 / 2.0)
        - a * big_l.ln()
        - ln_gamma(l + 1.0)
        - a * (psi / big_l).sin().ln();
    Ok(HilbPrefactor {
        ell,
        d,
        psi,
        xi: ln_xi.exp(),
    })
}

/// Remainder of the Hilb approximation,
/// `sin^a θ · G(cos θ) - 2^a/C(ℓ+a,ℓ) · Γ(ℓ+d/2)/(L^a ℓ!) · √(θ/sin θ) · J_a(Lθ)`.
pub fn hilb_remainder(ell: u32, d: u32, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < PI) {
        return domain(format!("angle {theta} outside (0, π)"));
    }
    let a = d as f64 / 2.0 - 1.0;
    let big_l = hilb_scale(ell, d);
    let l = ell as f64;
    let ln_binom = ln_gamma(l + a + 1.0) - ln_gamma(l + 1.0) - ln_gamma(a + 1.0);
    let ln_pref =
        a * std::f64::consts::LN_2 - ln_binom + ln_gamma(l + d as f64 / 2.0) - a * big_l.ln() - ln_gamma(l + 1.0);
    let g = gegenbauer(ell, d, theta.cos())?.value;
    let lhs = theta.sin().powf(a) * g;
    let rhs = ln_pref.exp() * (theta / theta.sin()).sqrt() * bessel_j(a, big_l * theta)?;
    Ok(lhs - rhs)
}

/// Binomial coefficient `C(ℓ+a, ℓ)` in exact arithmetic for half-integer `a = d/2 - 1`.
pub fn gegenbauer_normalizer_exact(ell: u32, d: u32) -> Q {
    let a = Q::new((d as i64 - 2).into(), 2.into());
    gen_binom(&(qint(ell as i64) + a), ell)
}

/// Exact symmetric Jacobi polynomial `P_ℓ^{(a,a)}` from the binomial sum
/// `2^{-ℓ} Σ_k C(ℓ+a,k) C(ℓ+a,ℓ-k) (t-1)^{ℓ-k} (t+1)^k`.
pub fn jacobi_symmetric_poly(ell: u32, d: u32) -> PolyQ {
    let a = Q::new((d as i64 - 2).into(), 2.into());
    let top = qint(ell as i64) + a;
    let tm1 = PolyQ::new(vec![qint(-1), qint(1)]);
    let tp1 = PolyQ::new(vec![qint(1), qint(1)]);
    let mut out = PolyQ::zero();
    for k in 0..=ell {
        let c = gen_binom(&top, k) * gen_binom(&top, ell - k);
        let mut term = PolyQ::constant(c);
        for _ in 0..(ell - k) {
            term = &term * &tm1;
        }
        for _ in 0..k {
            term = &term * &tp1;
        }
        out = &out + &term;
    }
    let scale = Q::new(1.into(), num_traits::pow(num_bigint::BigInt::from(2), ell as usize));
    out.scale(&scale)
}

/// Exact `G'_{ℓ;d}(1)` from the binomial-sum form, for checking `E/d`.
pub fn gegenbauer_slope_at_one_exact(ell: u32, d: u32) -> Q {
    let p = jacobi_symmetric_poly(ell, d);
    let mut deriv = Q::zero();
    for (k, c) in p.coeffs().iter().enumerate().skip(1) {
        deriv += c * qint(k as i64);
    }
    deriv / gegenbauer_normalizer_exact(ell, d)
}
