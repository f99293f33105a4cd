//! Exact chaos-expansion coefficients and the bivariate polynomials `p_{2q}(r, t)`.
//!
//! A chaos component of even order `2q` is the sphere integral of
//! `p_{2q}(T, ‖∇̃T‖)`, where `∇̃ = ∇/√(E/d)`. Everything here is exact: rational
//! coefficients with the irrational factors tracked by [`Irr`].

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{
    binom, compositions, double_factorial_odd, factorial, factorial_q, gamma_half, q_to_f64, qfrac, qint, Irr, MPoly,
    PolyQ, Sym, Q,
};
use crate::specfun::{grad_variance, hermite, hermite_at_zero, hermite_poly, laguerre_poly, sphere_area};

/// `α_{2s} / ((2s_1)!…(2s_d)!)` for a composition `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaCoeff {
    pub s: Vec<u32>,
    pub value: Sym,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdpConstant {
    pub d: u32,
    pub p: u32,
    pub value: Sym,
}

impl CdpConstant {
    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaCoeff {
    pub m: u32,
    pub u: f64,
    pub value: f64,
}

/// `p_{2q}(r, t) = irr · Σ c_{ij} r^{2i} t^{2j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BivariateChaosPoly {
    pub q: u32,
    pub d: u32,
    /// Coefficient of `r^{2i} t^{2j}` keyed by `(i, j)`.
    pub terms: BTreeMap<(u32, u32), Q>,
    pub irr: Irr,
}

impl BivariateChaosPoly {
    pub fn eval(&self, r: f64, t: f64) -> f64 {
        let (r2, t2) = (r * r, t * t);
        let mut acc = 0.0;
        for (&(i, j), c) in &self.terms {
            acc += q_to_f64(c) * r2.powi(i as i32) * t2.powi(j as i32);
        }
        acc * self.irr.to_f64()
    }

    /// Coefficient table in floating point, irrational factor included.
    pub fn f64_terms(&self) -> Vec<((u32, u32), f64)> {
        let k = self.irr.to_f64();
        self.terms.iter().map(|(&ij, c)| (ij, q_to_f64(c) * k)).collect()
    }
}

/// Outcome of an exact identity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub identity: String,
    pub params: BTreeMap<String, i64>,
    pub passed: bool,
    /// Number of monomials in the verified common polynomial.
    pub monomials: usize,
    pub detail: String,
}

impl Certificate {
    fn pass(identity: &str, params: &[(&str, i64)], monomials: usize, detail: String) -> Certificate {
        Certificate {
            identity: identity.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            passed: true,
            monomials,
            detail,
        }
    }
}

fn violation(identity: &str, monomial: String) -> Error {
    Error::IdentityViolation {
        identity: identity.to_string(),
        monomial,
    }
}

fn sum_syms<'a>(items: impl IntoIterator<Item = &'a Sym>) -> Result<Sym> {
    let mut acc = Sym::zero();
    for s in items {
        acc = acc
            .checked_add(s)
            .ok_or_else(|| Error::Numeric(format!("mixed irrational parts {} and {}", acc.irr, s.irr)))?;
    }
    Ok(acc)
}

/// `Γ(d/2 + i + 1/2) / Γ(d/2 + i)`.
fn half_gamma_ratio(d: u32, i: u32) -> Sym {
    let two_i = 2 * i as i64;
    let d = d as i64;
    &gamma_half(d + two_i + 1) * &gamma_half(d + two_i).recip()
}

/// `C(d, p)` from the closed Gamma-ratio form.
pub fn c_constant(d: u32, p: u32) -> CdpConstant {
    // -Γ((d+1)/2) Γ(p - 1/2) / (2 √π Γ(d/2 + p))
    let num = &gamma_half(d as i64 + 1) * &gamma_half(2 * p as i64 - 1);
    let den = &gamma_half(d as i64 + 2 * p as i64) * &Sym::sqrt_pi_pow(1);
    let value = (&num * &den.recip()).scale(&qfrac(-1, 2));
    CdpConstant { d, p, value }
}

/// `C(d, p)` from the terminating alternating series `Σ_i (-1)^i C(p,i) Γ(d/2+i+1/2)/Γ(d/2+i)`.
pub fn c_constant_series(d: u32, p: u32) -> Result<Sym> {
    let terms: Vec<Sym> = (0..=p)
        .map(|i| {
            let sign = if i % 2 == 0 { qint(1) } else { qint(-1) };
            half_gamma_ratio(d, i).scale(&(sign * Q::from_integer(binom(p, i))))
        })
        .collect();
    sum_syms(&terms)
}

/// `β_m = H_m(0)/√(2π)`, the nodal coefficient in exact form.
pub fn beta_nodal(m: u32) -> Sym {
    Sym::new(hermite_at_zero(m), Irr { sqrt2: -1, sqrt_pi: -1 })
}

/// `β_m(u) = e^{-u²/2} H_m(u) / √(2π)`.
pub fn beta_coeff(m: u32, u: f64) -> BetaCoeff {
    let value = (-u * u / 2.0).exp() * hermite(m, u) / (2.0 * PI).sqrt();
    BetaCoeff { m, u, value }
}

/// Reduced form `(-1)^p √2 / (2^p s_1!…s_d!) · C(d, p)` of `α_{2s}/Π(2s_j)!`.
pub fn alpha_coeff(s: &[u32]) -> AlphaCoeff {
    let d = s.len() as u32;
    let p: u32 = s.iter().sum();
    let mut k = Q::one() / Q::from_integer(num_traits::pow(num_bigint::BigInt::from(2), p as usize));
    for &si in s {
        k /= factorial_q(si);
    }
    if p % 2 == 1 {
        k = -k;
    }
    let value = (&Sym::sqrt2() * &c_constant(d, p).value).scale(&k);
    AlphaCoeff { s: s.to_vec(), value }
}

/// `α_{2s}/Π(2s_j)!` from the unreduced double sum over `i` and multi-indices `j ≤ s`.
pub fn alpha_direct(s: &[u32]) -> Result<Sym> {
    let d = s.len() as u32;
    let p: u32 = s.iter().sum();
    let prod_2s: Q = s.iter().map(|&x| factorial_q(2 * x)).product();
    let mut terms = Vec::new();
    for i in 0..=p {
        // Σ_{|j|=i, j ≤ s} i!/Πj! · (-1)^{p-i} Π(2s)! / (Π(s-j)! 2^{p-i})
        let mut inner = Q::zero();
        for j in compositions(i, s.len()) {
            if j.iter().zip(s).any(|(a, b)| a > b) {
                continue;
            }
            let mut t = factorial_q(i);
            for (&jk, &sk) in j.iter().zip(s) {
                t /= factorial_q(jk) * factorial_q(sk - jk);
            }
            inner += t;
        }
        let sign = if (p - i).is_multiple_of(2) { qint(1) } else { qint(-1) };
        let pow2 = Q::from_integer(num_traits::pow(num_bigint::BigInt::from(2), (p - i) as usize));
        let pow2i = Q::from_integer(num_traits::pow(num_bigint::BigInt::from(2), i as usize));
        let rat = inner * sign * &prod_2s / pow2 / (factorial_q(i) * pow2i);
        let term = (&Sym::sqrt2() * &half_gamma_ratio(d, i)).scale(&rat);
        terms.push(term);
    }
    let alpha = sum_syms(&terms)?;
    Ok(alpha.scale(&prod_2s.recip()))
}

/// Hermite-basis coefficient of `H_{2q-2p}(r) Π_j H_{2s_j}(t_j)` in `p_{2q}`.
pub fn hermite_basis_coeff(q: u32, s: &[u32]) -> Sym {
    let p: u32 = s.iter().sum();
    let m = 2 * q - 2 * p;
    let b = beta_nodal(m).scale(&factorial_q(m).recip());
    &b * &alpha_coeff(s).value
}

/// Coefficient of `H_{2q-2p}(r) L_p^{(d/2-1)}(t²/2)` in the Hermite-Laguerre form.
fn hermite_laguerre_coeff(q: u32, d: u32, p: u32) -> Sym {
    let m = 2 * q - 2 * p;
    let b = beta_nodal(m).scale(&factorial_q(m).recip());
    &(&b * &Sym::sqrt2()) * &c_constant(d, p).value
}

/// Coefficient of `L_{q-p}^{(-1/2)}(r²/2) L_p^{(d/2-1)}(t²/2)` in `p_{2q}`.
fn laguerre_coeff(q: u32, d: u32, p: u32) -> Sym {
    let n = q - p;
    let sign = if n.is_multiple_of(2) { qint(1) } else { qint(-1) };
    let k = sign * Q::from_integer(num_traits::pow(num_bigint::BigInt::from(2), n as usize)) * factorial_q(n);
    hermite_laguerre_coeff(q, d, p).scale(&k)
}

fn half() -> Q {
    qfrac(1, 2)
}

fn laguerre_alpha(d: u32) -> Q {
    qfrac(d as i64 - 2, 2)
}

/// `H_{2n}(x)` as a polynomial in `x²`.
fn even_hermite_in_square(n: u32) -> PolyQ {
    let h = hermite_poly(2 * n);
    PolyQ::new((0..=n as usize).map(|k| h.coeff(2 * k)).collect())
}

/// Checks that every coefficient shares one irrational factor; returns it with the rationals.
fn common_irr(coeffs: &[Sym]) -> Result<(Irr, Vec<Q>)> {
    let irr = coeffs.iter().find(|c| !c.is_zero()).map(|c| c.irr).unwrap_or(Irr::ONE);
    let mut rats = Vec::with_capacity(coeffs.len());
    for c in coeffs {
        if !c.is_zero() && c.irr != irr {
            return Err(Error::Numeric(format!("mixed irrational parts {} and {}", irr, c.irr)));
        }
        rats.push(c.rat.clone());
    }
    Ok((irr, rats))
}

/// Laguerre form of `p_{2q}` in the variables `(r², t²)`.
fn p2q_laguerre_form(q: u32, d: u32) -> Result<(Irr, MPoly)> {
    let coeffs: Vec<Sym> = (0..=q).map(|p| laguerre_coeff(q, d, p)).collect();
    let (irr, rats) = common_irr(&coeffs)?;
    let mut out = MPoly::zero(2);
    let a_r = -half();
    let a_t = laguerre_alpha(d);
    for (p, c) in rats.iter().enumerate() {
        let p = p as u32;
        let lr = laguerre_poly(q - p, &a_r).compose_monomial(&half(), 1);
        let lt = laguerre_poly(p, &a_t).compose_monomial(&half(), 1);
        let prod = &MPoly::from_univariate(&lr, 2, 0) * &MPoly::from_univariate(&lt, 2, 1);
        out = &out + &prod.scale(c);
    }
    Ok((irr, out))
}

/// Hermite-Laguerre form in `(r², t²)`.
fn p2q_hermite_laguerre_form(q: u32, d: u32) -> Result<(Irr, MPoly)> {
    let coeffs: Vec<Sym> = (0..=q).map(|p| hermite_laguerre_coeff(q, d, p)).collect();
    let (irr, rats) = common_irr(&coeffs)?;
    let mut out = MPoly::zero(2);
    let a_t = laguerre_alpha(d);
    for (p, c) in rats.iter().enumerate() {
        let p = p as u32;
        let hr = even_hermite_in_square(q - p);
        let lt = laguerre_poly(p, &a_t).compose_monomial(&half(), 1);
        let prod = &MPoly::from_univariate(&hr, 2, 0) * &MPoly::from_univariate(&lt, 2, 1);
        out = &out + &prod.scale(c);
    }
    Ok((irr, out))
}

/// Raw Hermite form in `(r², t_1², …, t_d²)`, with `α` from the unreduced double sum.
/// Returns the polynomial and the number of Hermite-product summands.
fn p2q_raw_hermite_form(q: u32, d: u32) -> Result<(Irr, MPoly, usize)> {
    let nv = d as usize + 1;
    let mut coeffs = Vec::new();
    let mut shapes = Vec::new();
    for p in 0..=q {
        let m = 2 * q - 2 * p;
        let b = beta_nodal(m).scale(&factorial_q(m).recip());
        for s in compositions(p, d as usize) {
            coeffs.push(&b * &alpha_direct(&s)?);
            shapes.push((p, s));
        }
    }
    let (irr, rats) = common_irr(&coeffs)?;
    let mut out = MPoly::zero(nv);
    for ((p, s), c) in shapes.iter().zip(&rats) {
        if c.is_zero() {
            continue;
        }
        let mut prod = MPoly::from_univariate(&even_hermite_in_square(q - p), nv, 0);
        for (j, &sj) in s.iter().enumerate() {
            prod = &prod * &MPoly::from_univariate(&even_hermite_in_square(sj), nv, j + 1);
        }
        out = &out + &prod.scale(c);
    }
    Ok((irr, out, shapes.len()))
}

/// Expands an `(r², t²)` polynomial with `t² = t_1² + … + t_d²`.
fn expand_norm(poly: &MPoly, d: u32) -> MPoly {
    let nv = d as usize + 1;
    let mut out = MPoly::zero(nv);
    let max_j = poly.terms().keys().map(|e| e[1]).max().unwrap_or(0);
    let mut norm_powers = vec![MPoly::one(d as usize)];
    let x_pow = |j: u32| PolyQ::new((0..=j).map(|k| if k == j { Q::one() } else { Q::zero() }).collect());
    for j in 1..=max_j {
        norm_powers.push(MPoly::univariate_of_sum(&x_pow(j), d as usize));
    }
    for (e, c) in poly.terms() {
        for (te, tc) in norm_powers[e[1] as usize].terms() {
            let mut full = Vec::with_capacity(nv);
            full.push(e[0]);
            full.extend_from_slice(te);
            out.add_term(full, c * tc);
        }
    }
    out
}

fn monomial_label(e: &[u32], names: &[&str]) -> String {
    e.iter()
        .zip(names.iter().cycle())
        .enumerate()
        .map(|(k, (p, _))| {
            if k == 0 {
                format!("r^{}", 2 * p)
            } else {
                format!("t{}^{}", k, 2 * p)
            }
        })
        .collect::<Vec<_>>()
        .join("·")
}

/// Builds `p_{2q}` and confirms the Laguerre, Hermite-Laguerre and raw Hermite
/// forms agree exactly.
pub fn build_p2q(q: u32, d: u32) -> Result<BivariateChaosPoly> {
    Ok(verify_p2q(q, d)?.0)
}

/// [`build_p2q`] plus a certificate carrying term counts.
pub fn verify_p2q(q: u32, d: u32) -> Result<(BivariateChaosPoly, Certificate)> {
    const NAME: &str = "p2q three-way equality";
    if q < 1 || d < 2 {
        return Err(Error::Domain(format!("need q >= 1 and d >= 2, got q={q} d={d}")));
    }
    let (irr_a, lag) = p2q_laguerre_form(q, d)?;
    let (irr_b, hl) = p2q_hermite_laguerre_form(q, d)?;
    if irr_a != irr_b && !(lag.is_empty() && hl.is_empty()) {
        return Err(violation(NAME, format!("irrational factor {irr_a} vs {irr_b}")));
    }
    if let Some(e) = lag.first_difference(&hl) {
        return Err(violation(
            NAME,
            format!("Laguerre vs Hermite-Laguerre at r^{}·t^{}", 2 * e[0], 2 * e[1]),
        ));
    }
    let (irr_c, raw, raw_terms) = p2q_raw_hermite_form(q, d)?;
    if irr_c != irr_a {
        return Err(violation(NAME, format!("irrational factor {irr_a} vs {irr_c}")));
    }
    let expanded = expand_norm(&lag, d);
    if let Some(e) = expanded.first_difference(&raw) {
        return Err(violation(
            NAME,
            format!("Laguerre vs raw Hermite at {}", monomial_label(&e, &["r", "t"])),
        ));
    }
    let mut terms = BTreeMap::new();
    for (e, c) in lag.terms() {
        terms.insert((e[0], e[1]), c.clone());
    }
    let poly = BivariateChaosPoly {
        q,
        d,
        terms,
        irr: irr_a,
    };
    let cert = Certificate::pass(
        NAME,
        &[
            ("q", q as i64),
            ("d", d as i64),
            ("laguerre_factors", 2 * (q as i64 + 1)),
            ("hermite_summands", raw_terms as i64),
            ("raw_monomials", raw.len() as i64),
        ],
        poly.terms.len(),
        format!("p_{} = {} · ({} terms in r², t²)", 2 * q, irr_a, poly.terms.len()),
    );
    Ok((poly, cert))
}

/// Number of Hermite-product summands `Σ_p C(p+d-1, d-1)` in the raw expansion.
pub fn raw_hermite_summands(q: u32, d: u32) -> usize {
    (0..=q).map(|p| compositions(p, d as usize).len()).sum()
}

/// `Σ_{|s|=p} Π H_{2s_j}(t_j)/s_j! = (-2)^p L_p^{(d/2-1)}(‖t‖²/2)` as polynomials.
pub fn hermite_sum_to_laguerre(p: u32, d: u32) -> Result<Certificate> {
    const NAME: &str = "Hermite sum to Laguerre";
    let nv = d as usize;
    let mut lhs = MPoly::zero(nv);
    for s in compositions(p, nv) {
        let mut prod = MPoly::one(nv);
        let mut w = Q::one();
        for (j, &sj) in s.iter().enumerate() {
            prod = &prod * &MPoly::from_univariate(&even_hermite_in_square(sj), nv, j);
            w /= factorial_q(sj);
        }
        lhs = &lhs + &prod.scale(&w);
    }
    let lag = laguerre_poly(p, &laguerre_alpha(d)).compose_monomial(&half(), 1);
    let scale = Q::from_integer(num_traits::pow(num_bigint::BigInt::from(-2), p as usize));
    let rhs = MPoly::univariate_of_sum(&lag.scale(&scale), nv);
    if let Some(e) = lhs.first_difference(&rhs) {
        let label = e
            .iter()
            .enumerate()
            .map(|(j, k)| format!("t{}^{}", j + 1, 2 * k))
            .collect::<Vec<_>>();
        return Err(violation(NAME, label.join("·")));
    }
    Ok(Certificate::pass(
        NAME,
        &[("p", p as i64), ("d", d as i64)],
        lhs.len(),
        String::new(),
    ))
}

/// `H_{2n}(x) = (-1)^n 2^n n! L_n^{(-1/2)}(x²/2)` as polynomials in `x`.
pub fn hermite_laguerre_relation(n: u32) -> Result<Certificate> {
    const NAME: &str = "Hermite-Laguerre relation";
    let lhs = hermite_poly(2 * n);
    let sign = if n.is_multiple_of(2) { qint(1) } else { qint(-1) };
    let k = sign * Q::from_integer(num_traits::pow(num_bigint::BigInt::from(2), n as usize) * factorial(n));
    let rhs = laguerre_poly(n, &-half()).compose_monomial(&half(), 2).scale(&k);
    if lhs != rhs {
        let diff = &lhs - &rhs;
        let deg = diff.coeffs().iter().position(|c| !c.is_zero()).unwrap_or(0);
        return Err(violation(NAME, format!("x^{deg}")));
    }
    Ok(Certificate::pass(
        NAME,
        &[("n", n as i64)],
        lhs.coeffs().iter().filter(|c| !c.is_zero()).count(),
        lhs.to_string(),
    ))
}

/// Reduced versus unreduced `α` coefficient.
pub fn alpha_reduction(s: &[u32]) -> Result<Certificate> {
    const NAME: &str = "alpha reduction";
    let reduced = alpha_coeff(s).value;
    let direct = alpha_direct(s)?;
    if reduced != direct {
        return Err(violation(NAME, format!("s={s:?}: {reduced} vs {direct}")));
    }
    let p: u32 = s.iter().sum();
    Ok(Certificate::pass(
        NAME,
        &[("d", s.len() as i64), ("p", p as i64)],
        1,
        format!("s={s:?} -> {reduced}"),
    ))
}

/// Series versus closed form of `C(d, p)`.
pub fn c_constant_identity(d: u32, p: u32) -> Result<Certificate> {
    const NAME: &str = "C(d,p) series";
    let closed = c_constant(d, p).value;
    let series = c_constant_series(d, p)?;
    if closed != series {
        return Err(violation(NAME, format!("d={d} p={p}: {closed} vs {series}")));
    }
    Ok(Certificate::pass(
        NAME,
        &[("d", d as i64), ("p", p as i64)],
        1,
        closed.to_string(),
    ))
}

/// `E[p_{2q}(Z, ‖W‖)]` with `Z ~ N(0,1)`, `W ~ N(0, I_d)`, from exact Gaussian moments.
pub fn centered_mean_exact(poly: &BivariateChaosPoly) -> Q {
    let d = poly.d;
    let mut acc = Q::zero();
    for (&(i, j), c) in &poly.terms {
        let ez = Q::from_integer(double_factorial_odd(i));
        // E‖W‖^{2j} = d (d+2) … (d+2j-2)
        let ew: Q = (0..j).map(|k| qint(d as i64 + 2 * k as i64)).product();
        acc += c * ez * ew;
    }
    acc
}

/// Multiplier of `∫ H_2(T) dx` in the second chaos of the level-`u` volume.
pub fn level_second_chaos_coeff(u: f64, ell: u32, d: u32) -> f64 {
    let ratio = PI.sqrt() * sphere_area(d - 1) / sphere_area(d);
    grad_variance(ell, d).sqrt() * ratio * (-u * u / 2.0).exp() * u * u / (2.0 * PI.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_small_cases() {
        // C(3, 0) = Γ(2)/Γ(3/2) = 2/√π
        let c = c_constant(3, 0).value;
        assert_eq!(c, Sym::sqrt_pi_pow(-1).scale(&qint(2)));
        for d in 2..7 {
            let c1 = c_constant(d, 1).value;
            let expect = (&gamma_half(d as i64 + 1) * &gamma_half(d as i64 + 2).recip()).scale(&qfrac(-1, 2));
            assert_eq!(c1, expect);
        }
    }

    #[test]
    fn alpha_zero_composition() {
        for d in 2..6 {
            let a = alpha_coeff(&vec![0; d]).value;
            let expect = &Sym::sqrt2() * &half_gamma_ratio(d as u32, 0);
            assert_eq!(a, expect);
        }
    }

    #[test]
    fn beta_parity() {
        assert!(beta_nodal(3).is_zero());
        assert_eq!(beta_coeff(5, 0.0).value, 0.0);
        let b4 = beta_nodal(4).to_f64();
        assert!((b4 - 3.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn level_coeff_vanishes_at_zero_and_infinity() {
        assert_eq!(level_second_chaos_coeff(0.0, 10, 3), 0.0);
        assert!(level_second_chaos_coeff(40.0, 10, 3) < 1e-300);
    }

    #[test]
    fn alpha_reduction_small() {
        for d in 2..5usize {
            for p in 0..5 {
                for s in compositions(p, d) {
                    alpha_reduction(&s).unwrap();
                }
            }
        }
    }

    #[test]
    fn c_series_matches_closed() {
        for d in 2..8 {
            for p in 0..8 {
                c_constant_identity(d, p).unwrap();
            }
        }
    }

    #[test]
    fn chaos_components_are_centered() {
        for d in 2..5 {
            for q in 1..5 {
                let poly = build_p2q(q, d).unwrap();
                assert!(centered_mean_exact(&poly).is_zero(), "q={q} d={d}");
            }
        }
    }

    #[test]
    fn hermite_identities() {
        for n in 0..8 {
            hermite_laguerre_relation(n).unwrap();
        }
        for d in 2..5 {
            for p in 0..5 {
                hermite_sum_to_laguerre(p, d).unwrap();
            }
        }
    }

    #[test]
    fn p2q_even_and_counts() {
        let (poly, cert) = verify_p2q(2, 2).unwrap();
        assert!(cert.passed);
        assert_eq!(cert.params["hermite_summands"], 6);
        assert!(poly.terms.keys().all(|&(i, j)| i + j <= 2));
    }
}
