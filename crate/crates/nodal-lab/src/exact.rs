//! Exact rational arithmetic used by the identity layer.
//!
//! Quantities such as `Γ(3/2)` or `1/√(2π)` are carried as a rational times
//! integer powers of `√2` and `√π`, so identities can be compared exactly.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn qint(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qfrac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

pub fn factorial_q(n: u32) -> Q {
    Q::from_integer(factorial(n))
}

/// `x (x-1) ... (x-k+1) / k!` for rational `x`.
pub fn gen_binom(x: &Q, k: u32) -> Q {
    let mut acc = Q::one();
    for i in 0..k {
        acc *= x - qint(i as i64);
        acc /= qint(i as i64 + 1);
    }
    acc
}

pub fn binom(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    gen_binom(&qint(n as i64), k).to_integer()
}

/// `(2n-1)!!` with the convention `(-1)!! = 1`.
pub fn double_factorial_odd(n: u32) -> BigInt {
    (0..n).fold(BigInt::one(), |acc, k| acc * BigInt::from(2 * k + 1))
}

/// Irrational part `√2^sqrt2 · √π^sqrt_pi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Irr {
    pub sqrt2: i32,
    pub sqrt_pi: i32,
}

impl Irr {
    pub const ONE: Irr = Irr { sqrt2: 0, sqrt_pi: 0 };

    pub fn to_f64(self) -> f64 {
        std::f64::consts::SQRT_2.powi(self.sqrt2) * std::f64::consts::PI.sqrt().powi(self.sqrt_pi)
    }
}

impl Mul for Irr {
    type Output = Irr;
    fn mul(self, o: Irr) -> Irr {
        Irr {
            sqrt2: self.sqrt2 + o.sqrt2,
            sqrt_pi: self.sqrt_pi + o.sqrt_pi,
        }
    }
}

impl fmt::Display for Irr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "√2^{}·√π^{}", self.sqrt2, self.sqrt_pi)
    }
}

/// A rational multiple of an [`Irr`], kept in normal form (`sqrt2 ∈ {0, 1}`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sym {
    pub rat: Q,
    pub irr: Irr,
}

impl Sym {
    pub fn new(rat: Q, irr: Irr) -> Sym {
        let mut s = Sym { rat, irr };
        s.normalize();
        s
    }

    pub fn rational(rat: Q) -> Sym {
        Sym::new(rat, Irr::ONE)
    }

    pub fn zero() -> Sym {
        Sym::rational(Q::zero())
    }

    pub fn one() -> Sym {
        Sym::rational(Q::one())
    }

    pub fn sqrt2() -> Sym {
        Sym::new(Q::one(), Irr { sqrt2: 1, sqrt_pi: 0 })
    }

    pub fn sqrt_pi_pow(k: i32) -> Sym {
        Sym::new(Q::one(), Irr { sqrt2: 0, sqrt_pi: k })
    }

    fn normalize(&mut self) {
        if self.rat.is_zero() {
            self.irr = Irr::ONE;
            return;
        }
        let e = self.irr.sqrt2;
        let half = e.div_euclid(2);
        let two = qint(2);
        if half > 0 {
            self.rat *= num_traits::pow(two, half as usize);
        } else if half < 0 {
            self.rat /= num_traits::pow(two, (-half) as usize);
        }
        self.irr.sqrt2 = e.rem_euclid(2);
    }

    pub fn is_zero(&self) -> bool {
        self.rat.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        q_to_f64(&self.rat) * self.irr.to_f64()
    }

    pub fn scale(&self, k: &Q) -> Sym {
        Sym::new(&self.rat * k, self.irr)
    }

    /// Exact sum; `None` when the irrational parts differ.
    pub fn checked_add(&self, o: &Sym) -> Option<Sym> {
        if self.is_zero() {
            return Some(o.clone());
        }
        if o.is_zero() {
            return Some(self.clone());
        }
        (self.irr == o.irr).then(|| Sym::new(&self.rat + &o.rat, self.irr))
    }

    pub fn recip(&self) -> Sym {
        Sym::new(
            self.rat.recip(),
            Irr {
                sqrt2: -self.irr.sqrt2,
                sqrt_pi: -self.irr.sqrt_pi,
            },
        )
    }
}

impl Mul for &Sym {
    type Output = Sym;
    fn mul(self, o: &Sym) -> Sym {
        Sym::new(&self.rat * &o.rat, self.irr * o.irr)
    }
}

impl Mul for Sym {
    type Output = Sym;
    fn mul(self, o: Sym) -> Sym {
        &self * &o
    }
}

impl Neg for Sym {
    type Output = Sym;
    fn neg(self) -> Sym {
        Sym {
            rat: -self.rat,
            irr: self.irr,
        }
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}·{}", self.rat, self.irr)
    }
}

/// Γ(x) for `x = twice_x / 2`, `x` not a non-positive integer.
pub fn gamma_half(twice_x: i64) -> Sym {
    assert!(!(twice_x <= 0 && twice_x % 2 == 0), "gamma pole at {}", twice_x / 2);
    if twice_x % 2 == 0 {
        return Sym::rational(factorial_q((twice_x / 2 - 1) as u32));
    }
    if twice_x < 0 {
        // Γ(x) = Γ(x + 1) / x
        let x = qfrac(twice_x, 2);
        return gamma_half(twice_x + 2).scale(&x.recip());
    }
    let m = ((twice_x - 1) / 2) as u32;
    let num = factorial_q(2 * m);
    let den = Q::from_integer(num_traits::pow(BigInt::from(4), m as usize)) * factorial_q(m);
    Sym::new(num / den, Irr { sqrt2: 0, sqrt_pi: 1 })
}

/// Univariate polynomial with exact rational coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PolyQ {
    coeffs: Vec<Q>,
}

impl PolyQ {
    pub fn new(mut coeffs: Vec<Q>) -> PolyQ {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        PolyQ { coeffs }
    }

    pub fn zero() -> PolyQ {
        PolyQ { coeffs: Vec::new() }
    }

    pub fn constant(c: Q) -> PolyQ {
        PolyQ::new(vec![c])
    }

    pub fn x() -> PolyQ {
        PolyQ::new(vec![Q::zero(), Q::one()])
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Q {
        self.coeffs.get(k).cloned().unwrap_or_else(Q::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn scale(&self, k: &Q) -> PolyQ {
        PolyQ::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn eval(&self, x: &Q) -> Q {
        self.coeffs.iter().rev().fold(Q::zero(), |acc, c| acc * x + c)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + q_to_f64(c))
    }

    /// `p(c · x^k)`.
    pub fn compose_monomial(&self, c: &Q, k: usize) -> PolyQ {
        let mut out = vec![Q::zero(); self.coeffs.len().saturating_sub(1) * k + 1];
        let mut cp = Q::one();
        for (i, a) in self.coeffs.iter().enumerate() {
            out[i * k] = a * &cp;
            cp *= c;
        }
        PolyQ::new(out)
    }
}

impl Add for &PolyQ {
    type Output = PolyQ;
    fn add(self, o: &PolyQ) -> PolyQ {
        let n = self.coeffs.len().max(o.coeffs.len());
        PolyQ::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }
}

impl Sub for &PolyQ {
    type Output = PolyQ;
    fn sub(self, o: &PolyQ) -> PolyQ {
        let n = self.coeffs.len().max(o.coeffs.len());
        PolyQ::new((0..n).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }
}

impl Mul for &PolyQ {
    type Output = PolyQ;
    fn mul(self, o: &PolyQ) -> PolyQ {
        if self.is_zero() || o.is_zero() {
            return PolyQ::zero();
        }
        let mut out = vec![Q::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        PolyQ::new(out)
    }
}

impl fmt::Display for PolyQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}·x")?,
                _ => write!(f, "{c}·x^{k}")?,
            }
        }
        Ok(())
    }
}

/// Sparse multivariate polynomial over the rationals, keyed by exponent vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MPoly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Q>,
}

impl MPoly {
    pub fn zero(nvars: usize) -> MPoly {
        MPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(nvars: usize) -> MPoly {
        let mut p = MPoly::zero(nvars);
        p.add_term(vec![0; nvars], Q::one());
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, Q> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: Q) {
        debug_assert_eq!(exps.len(), self.nvars);
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(exps);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// Univariate `p` placed in variable `var`.
    pub fn from_univariate(p: &PolyQ, nvars: usize, var: usize) -> MPoly {
        let mut out = MPoly::zero(nvars);
        for (k, c) in p.coeffs().iter().enumerate() {
            let mut e = vec![0; nvars];
            e[var] = k as u32;
            out.add_term(e, c.clone());
        }
        out
    }

    /// `p(x_0 + x_1 + ... + x_{n-1})`, expanded.
    pub fn univariate_of_sum(p: &PolyQ, nvars: usize) -> MPoly {
        let mut sum = MPoly::zero(nvars);
        for v in 0..nvars {
            let mut e = vec![0; nvars];
            e[v] = 1;
            sum.add_term(e, Q::one());
        }
        let mut out = MPoly::zero(nvars);
        let mut power = MPoly::one(nvars);
        for (k, c) in p.coeffs().iter().enumerate() {
            if k > 0 {
                power = &power * &sum;
            }
            out = &out + &power.scale(c);
        }
        out
    }

    pub fn scale(&self, k: &Q) -> MPoly {
        let mut out = MPoly::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * k);
        }
        out
    }

    /// First exponent vector where `self` and `other` differ.
    pub fn first_difference(&self, other: &MPoly) -> Option<Vec<u32>> {
        let diff = self - other;
        diff.terms.keys().next().cloned()
    }
}

impl Add for &MPoly {
    type Output = MPoly;
    fn add(self, o: &MPoly) -> MPoly {
        let mut out = self.clone();
        for (e, c) in &o.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl Sub for &MPoly {
    type Output = MPoly;
    fn sub(self, o: &MPoly) -> MPoly {
        let mut out = self.clone();
        for (e, c) in &o.terms {
            out.add_term(e.clone(), -c.clone());
        }
        out
    }
}

impl Mul for &MPoly {
    type Output = MPoly;
    fn mul(self, o: &MPoly) -> MPoly {
        let mut out = MPoly::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

/// Field operations shared by the `f64` evaluation path and the exact path.
pub trait Scalar:
    Clone + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn from_q(q: &Q) -> Self;
}

impl Scalar for f64 {
    fn from_q(q: &Q) -> Self {
        q_to_f64(q)
    }
}

impl Scalar for Q {
    fn from_q(q: &Q) -> Self {
        q.clone()
    }
}

/// Integer powers `x^0 .. x^max` of a scalar.
pub fn powers<S: Scalar>(x: &S, max: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(max + 1);
    out.push(S::one());
    for k in 1..=max {
        let next = out[k - 1].clone() * x.clone();
        out.push(next);
    }
    out
}

/// Weak compositions of `total` into `parts` non-negative parts, colexicographic order.
pub fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    fn rec(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for last in 0..=total {
            prefix.push(last);
            rec(total - last, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    if parts == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    // colex: compare from the last coordinate
    for c in out.iter_mut() {
        c.reverse();
    }
    out.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_half_values() {
        // Γ(1/2) = √π, Γ(3/2) = √π/2, Γ(-1/2) = -2√π, Γ(4) = 6
        assert_eq!(gamma_half(1), Sym::sqrt_pi_pow(1));
        assert_eq!(gamma_half(3), Sym::sqrt_pi_pow(1).scale(&qfrac(1, 2)));
        assert_eq!(gamma_half(-1), Sym::sqrt_pi_pow(1).scale(&qint(-2)));
        assert_eq!(gamma_half(8), Sym::rational(qint(6)));
        let g = gamma_half(7).to_f64();
        assert!((g - 3.323_350_970_447_842_6).abs() < 1e-14);
    }

    #[test]
    fn sym_normal_form() {
        let two = Sym::sqrt2() * Sym::sqrt2();
        assert_eq!(two, Sym::rational(qint(2)));
        let half = Sym::sqrt2().recip() * Sym::sqrt2().recip();
        assert_eq!(half, Sym::rational(qfrac(1, 2)));
        assert!(Sym::sqrt2().checked_add(&Sym::one()).is_none());
    }

    #[test]
    fn poly_arithmetic() {
        let x = PolyQ::x();
        let p = &(&x * &x) - &PolyQ::constant(qint(1));
        assert_eq!(p.eval(&qint(3)), qint(8));
        let q = p.compose_monomial(&qfrac(1, 2), 2);
        // (x²/2)² - 1
        assert_eq!(q.coeff(4), qfrac(1, 4));
        assert_eq!(q.coeff(0), qint(-1));
    }

    #[test]
    fn sum_expansion_is_multinomial() {
        let sq = PolyQ::new(vec![Q::zero(), Q::zero(), Q::one()]);
        let m = MPoly::univariate_of_sum(&sq, 3);
        assert_eq!(m.len(), 6);
        assert_eq!(m.terms()[&vec![1, 1, 0]], qint(2));
    }

    #[test]
    fn compositions_count_and_order() {
        let c = compositions(3, 3);
        assert_eq!(c.len(), 10);
        assert_eq!(c[0], vec![3, 0, 0]);
        assert_eq!(c.last().unwrap(), &vec![0, 0, 3]);
        assert!(c.iter().all(|v| v.iter().sum::<u32>() == 3));
    }
}
