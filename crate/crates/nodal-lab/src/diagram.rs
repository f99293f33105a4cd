//! Diagram formula for joint Hermite moments, in general form and in the sparse
//! meridian form used for the chaos covariances.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::chaos_poly::{alpha_direct, beta_nodal, c_constant};
use crate::error::{Error, Result};
use crate::exact::{binom, compositions, factorial_q, powers, q_to_f64, Irr, Scalar, Sym, Q};

/// Largest total Hermite degree accepted by [`hermite_product_moment`].
pub const MOMENT_DEGREE_BUDGET: u32 = 24;

/// One feasible edge assignment of the four-edge meridian diagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagramAssignment {
    pub k12: u32,
    pub k1_d3: u32,
    pub k23: u32,
    pub k3_d3: u32,
    pub s1: u32,
    pub s1_prime: u32,
    /// `1/(k12! k1_d3! k23! k3_d3!)`.
    pub weight: Q,
}

/// Degrees and correlation matrix for `E[Π H_{q_i}(Z_i)]`.
#[derive(Debug, Clone)]
pub struct HermiteMomentSpec<S> {
    pub degrees: Vec<u32>,
    pub corr: Vec<Vec<S>>,
}

/// The four normalized correlations between the field and gradient at two meridian points.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MeridianRho<S> {
    pub tt: S,
    pub tg: S,
    pub rad: S,
    pub tan: S,
}

impl<S: Scalar> MeridianRho<S> {
    pub fn zero() -> Self {
        MeridianRho {
            tt: S::zero(),
            tg: S::zero(),
            rad: S::zero(),
            tan: S::zero(),
        }
    }

    /// Correlation matrix of `(T(x), T(y), ∇̃T(x), ∇̃T(y))`, radial gradient components first.
    pub fn correlation_matrix(&self, d: u32) -> Vec<Vec<S>> {
        let d = d as usize;
        let n = 2 * d + 2;
        let mut m = vec![vec![S::zero(); n]; n];
        let mut set = |i: usize, j: usize, v: S| {
            m[i][j] = v.clone();
            m[j][i] = v;
        };
        set(0, 1, self.tt.clone());
        set(0, 2 + d, -self.tg.clone());
        set(1, 2, self.tg.clone());
        set(2, 2 + d, self.rad.clone());
        for j in 1..d {
            set(2 + j, 2 + d + j, self.tan.clone());
        }
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = S::one();
        }
        m
    }
}

/// Solutions of the four edge equations, one per feasible `k12`.
pub fn enumerate_a(q: u32, p: u32, p_prime: u32, s1: u32, s1_prime: u32) -> Vec<DiagramAssignment> {
    let mut out = Vec::new();
    if p > q || p_prime > q {
        return out;
    }
    let (ax, ay) = (2 * q - 2 * p, 2 * q - 2 * p_prime);
    for k12 in 0..=ax.min(ay) {
        let k1_d3 = ax - k12;
        let k23 = ay - k12;
        if k23 > 2 * s1 {
            continue;
        }
        let k3_d3 = 2 * s1 - k23;
        if k1_d3 + k3_d3 != 2 * s1_prime {
            continue;
        }
        let weight = (factorial_q(k12) * factorial_q(k1_d3) * factorial_q(k23) * factorial_q(k3_d3)).recip();
        out.push(DiagramAssignment {
            k12,
            k1_d3,
            k23,
            k3_d3,
            s1,
            s1_prime,
            weight,
        });
    }
    out
}

/// `E[Π_i H_{q_i}(Z_i)]` for a centered Gaussian vector with unit variances.
pub fn hermite_product_moment<S: Scalar>(spec: &HermiteMomentSpec<S>) -> Result<S> {
    let n = spec.degrees.len();
    if spec.corr.len() != n || spec.corr.iter().any(|r| r.len() != n) {
        return Err(Error::Domain(format!("correlation matrix must be {n}x{n}")));
    }
    let total: u32 = spec.degrees.iter().sum();
    if total > MOMENT_DEGREE_BUDGET {
        return Err(Error::Resource(format!(
            "total degree {total} exceeds budget {MOMENT_DEGREE_BUDGET}"
        )));
    }
    if total % 2 == 1 {
        return Ok(S::zero());
    }
    let inv_fact: Vec<S> = (0..=total).map(|k| S::from_q(&factorial_q(k).recip())).collect();
    let mut rem = spec.degrees.clone();
    let mut acc = S::zero();
    moment_rec(0, 1, &mut rem, &spec.corr, S::one(), &inv_fact, &mut acc);
    let norm = spec.degrees.iter().fold(Q::one(), |a, &k| a * factorial_q(k));
    Ok(acc * S::from_q(&norm))
}

fn moment_rec<S: Scalar>(i: usize, j: usize, rem: &mut [u32], corr: &[Vec<S>], cur: S, inv_fact: &[S], acc: &mut S) {
    let n = rem.len();
    if i + 1 >= n {
        if i >= n || rem[i] == 0 {
            *acc = acc.clone() + cur;
        }
        return;
    }
    if j == n {
        if rem[i] == 0 {
            moment_rec(i + 1, i + 2, rem, corr, cur, inv_fact, acc);
        }
        return;
    }
    // vertices j.. must absorb what is left at i
    let capacity: u32 = (j..n).filter(|&k| !corr[i][k].is_zero()).map(|k| rem[k]).sum();
    if capacity < rem[i] {
        return;
    }
    if corr[i][j].is_zero() || rem[j] == 0 || rem[i] == 0 {
        moment_rec(i, j + 1, rem, corr, cur, inv_fact, acc);
        return;
    }
    let kmax = rem[i].min(rem[j]);
    let mut rho_k = S::one();
    for k in 0..=kmax {
        if k > 0 {
            rho_k = rho_k * corr[i][j].clone();
        }
        rem[i] -= k;
        rem[j] -= k;
        let next = cur.clone() * rho_k.clone() * inv_fact[k as usize].clone();
        moment_rec(i, j + 1, rem, corr, next, inv_fact, acc);
        rem[i] += k;
        rem[j] += k;
    }
}

/// `Σ_{|s|=m} Π_j C(2s_j, s_j)` over compositions into `parts` parts.
fn tangential_weight(m: u32, parts: usize) -> Q {
    compositions(m, parts)
        .iter()
        .map(|s| s.iter().fold(Q::one(), |a, &k| a * Q::from_integer(binom(2 * k, k))))
        .fold(Q::zero(), |a, b| a + b)
}

/// `β_{2q-2p}/(2q-2p)! · (-1)^p √2 / 2^p · C(d, p)`.
fn side_coeff(q: u32, d: u32, p: u32) -> Sym {
    let m = 2 * q - 2 * p;
    let b = beta_nodal(m).scale(&factorial_q(m).recip());
    let mut k = Q::one() / Q::from_integer(num_traits::pow(num_bigint::BigInt::from(2), p as usize));
    if p % 2 == 1 {
        k = -k;
    }
    (&(&b * &Sym::sqrt2()) * &c_constant(d, p).value).scale(&k)
}

/// Exponents `(r_TT, r_TG, r_rad, m)` of a monomial `r_TT^a r_TG^b r_rad^c r_tan^{2m}`.
pub type IntegrandKey = [u32; 4];

/// `E[p_{2q}(T(x), ‖∇̃T(x)‖) p_{2q}(T(y), ‖∇̃T(y)‖)]` as a polynomial in the four correlations.
#[derive(Debug, Clone)]
pub struct IntegrandPoly {
    pub q: u32,
    pub d: u32,
    pub irr: Irr,
    pub terms: BTreeMap<IntegrandKey, Q>,
    coeffs_f64: Vec<(IntegrandKey, f64)>,
    max_exp: usize,
}

impl IntegrandPoly {
    /// Builds the sparse diagram sum over `p, p'`, the shared tangential part and `A_{q,p,p'}`.
    pub fn new(q: u32, d: u32) -> Result<IntegrandPoly> {
        if q < 1 || d < 2 {
            return Err(Error::Domain(format!("need q >= 1 and d >= 2, got q={q} d={d}")));
        }
        let side: Vec<Sym> = (0..=q).map(|p| side_coeff(q, d, p)).collect();
        let mut irr = None;
        let mut terms: BTreeMap<IntegrandKey, Q> = BTreeMap::new();
        let tang: Vec<Q> = (0..=q).map(|m| tangential_weight(m, d as usize - 1)).collect();
        for p in 0..=q {
            for pp in 0..=q {
                let pair = &side[p as usize] * &side[pp as usize];
                if pair.is_zero() {
                    continue;
                }
                match irr {
                    None => irr = Some(pair.irr),
                    Some(i) if i != pair.irr => {
                        return Err(Error::Numeric(format!("mixed irrational parts {} and {}", i, pair.irr)))
                    }
                    _ => {}
                }
                let outer = pair.rat * factorial_q(2 * q - 2 * p) * factorial_q(2 * q - 2 * pp);
                for m in 0..=p.min(pp) {
                    let (s1, s1p) = (p - m, pp - m);
                    let base = &outer * &tang[m as usize] * factorial_q(2 * s1) * factorial_q(2 * s1p)
                        / (factorial_q(s1) * factorial_q(s1p));
                    for a in enumerate_a(q, p, pp, s1, s1p) {
                        let mut c = &base * &a.weight;
                        if a.k1_d3 % 2 == 1 {
                            c = -c;
                        }
                        let key = [a.k12, a.k1_d3 + a.k23, a.k3_d3, m];
                        *terms.entry(key).or_insert_with(Q::zero) += c;
                    }
                }
            }
        }
        terms.retain(|_, c| !c.is_zero());
        let irr = irr.unwrap_or(Irr::ONE);
        let k = irr.to_f64();
        let coeffs_f64 = terms.iter().map(|(key, c)| (*key, q_to_f64(c) * k)).collect();
        let max_exp = terms
            .keys()
            .flat_map(|k| [k[0], k[1], k[2], 2 * k[3]])
            .max()
            .unwrap_or(0) as usize;
        Ok(IntegrandPoly {
            q,
            d,
            irr,
            terms,
            coeffs_f64,
            max_exp,
        })
    }

    pub fn eval(&self, rho: &MeridianRho<f64>) -> f64 {
        let tt = powers(&rho.tt, self.max_exp);
        let tg = powers(&rho.tg, self.max_exp);
        let rad = powers(&rho.rad, self.max_exp);
        let tan = powers(&rho.tan, self.max_exp);
        self.coeffs_f64
            .iter()
            .map(|(k, c)| c * tt[k[0] as usize] * tg[k[1] as usize] * rad[k[2] as usize] * tan[2 * k[3] as usize])
            .sum()
    }

    /// Value without the irrational factor `irr`, in any scalar type.
    pub fn eval_rational_part<S: Scalar>(&self, rho: &MeridianRho<S>) -> S {
        let tt = powers(&rho.tt, self.max_exp);
        let tg = powers(&rho.tg, self.max_exp);
        let rad = powers(&rho.rad, self.max_exp);
        let tan = powers(&rho.tan, self.max_exp);
        let mut acc = S::zero();
        for (k, c) in &self.terms {
            let t = S::from_q(c)
                * tt[k[0] as usize].clone()
                * tg[k[1] as usize].clone()
                * rad[k[2] as usize].clone()
                * tan[2 * k[3] as usize].clone();
            acc = acc + t;
        }
        acc
    }
}

/// Oracle: expands both copies of `p_{2q}` in the raw Hermite basis (unreduced `α`) and
/// applies [`hermite_product_moment`] to every pair of terms on the full correlation matrix.
/// Returns the irrational factor and the rational-part value.
pub fn general_diagram_integrand<S: Scalar>(q: u32, d: u32, rho: &MeridianRho<S>) -> Result<(Irr, S)> {
    let mut raw: Vec<(Vec<u32>, Sym)> = Vec::new();
    for p in 0..=q {
        let m = 2 * q - 2 * p;
        let b = beta_nodal(m).scale(&factorial_q(m).recip());
        for s in compositions(p, d as usize) {
            let c = &b * &alpha_direct(&s)?;
            if !c.is_zero() {
                raw.push((s.iter().map(|&x| 2 * x).collect(), c));
            }
        }
    }
    let corr = rho.correlation_matrix(d);
    let mut irr = None;
    let mut acc = S::zero();
    for (sx, cx) in &raw {
        let px: u32 = sx.iter().sum::<u32>() / 2;
        for (sy, cy) in &raw {
            let py: u32 = sy.iter().sum::<u32>() / 2;
            let w = cx * cy;
            match irr {
                None => irr = Some(w.irr),
                Some(i) if i != w.irr => {
                    return Err(Error::Numeric(format!("mixed irrational parts {} and {}", i, w.irr)))
                }
                _ => {}
            }
            let mut degrees = vec![2 * q - 2 * px, 2 * q - 2 * py];
            degrees.extend_from_slice(sx);
            degrees.extend_from_slice(sy);
            let spec = HermiteMomentSpec {
                degrees,
                corr: corr.clone(),
            };
            acc = acc + S::from_q(&w.rat) * hermite_product_moment(&spec)?;
        }
    }
    Ok((irr.unwrap_or(Irr::ONE), acc))
}

/// Specialized integrand at meridian distance `theta`.
pub fn chaos_covariance_integrand(q: u32, ell: u32, d: u32, theta: f64) -> Result<f64> {
    let poly = IntegrandPoly::new(q, d)?;
    let cov = crate::meridian::build_sigma(theta, ell, d)?;
    Ok(poly.eval(&cov.rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::qfrac;

    fn spec2(a: u32, b: u32, rho: f64) -> HermiteMomentSpec<f64> {
        HermiteMomentSpec {
            degrees: vec![a, b],
            corr: vec![vec![1.0, rho], vec![rho, 1.0]],
        }
    }

    #[test]
    fn classic_moments() {
        let r = 0.37;
        assert!((hermite_product_moment(&spec2(2, 2, r)).unwrap() - 2.0 * r * r).abs() < 1e-15);
        assert_eq!(hermite_product_moment(&spec2(4, 4, 1.0)).unwrap(), 24.0);
        assert_eq!(hermite_product_moment(&spec2(3, 1, 0.5)).unwrap(), 0.0);
        let odd = HermiteMomentSpec {
            degrees: vec![1, 1, 1],
            corr: vec![vec![1.0, 0.2, 0.3], vec![0.2, 1.0, 0.4], vec![0.3, 0.4, 1.0]],
        };
        assert_eq!(hermite_product_moment(&odd).unwrap(), 0.0);
    }

    #[test]
    fn three_way_moment() {
        // E[H1(Z1) H1(Z2) H2(Z3)] = 2 ρ13 ρ23
        let c = vec![vec![1.0, 0.1, 0.3], vec![0.1, 1.0, 0.5], vec![0.3, 0.5, 1.0]];
        let v = hermite_product_moment(&HermiteMomentSpec {
            degrees: vec![1, 1, 2],
            corr: c,
        })
        .unwrap();
        assert!((v - 2.0 * 0.3 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn budget_enforced() {
        let s = spec2(13, 13, 0.5);
        assert!(matches!(hermite_product_moment(&s), Err(Error::Resource(_))));
    }

    #[test]
    fn enumerate_examples() {
        let a = enumerate_a(2, 0, 0, 0, 0);
        assert_eq!(a.len(), 1);
        assert_eq!((a[0].k12, a[0].k1_d3, a[0].k23, a[0].k3_d3), (4, 0, 0, 0));
        let a = enumerate_a(2, 2, 2, 2, 2);
        assert_eq!((a[0].k12, a[0].k1_d3, a[0].k23, a[0].k3_d3), (0, 0, 0, 4));
        let a = enumerate_a(3, 1, 1, 1, 1);
        let k12: Vec<u32> = a.iter().map(|x| x.k12).collect();
        assert_eq!(k12, vec![2, 3, 4]);
        for x in &a {
            assert_eq!((x.k1_d3, x.k23, x.k3_d3), (4 - x.k12, 4 - x.k12, x.k12 - 2));
        }
    }

    #[test]
    fn zero_correlation_kills_integrand() {
        let poly = IntegrandPoly::new(3, 3).unwrap();
        assert_eq!(poly.eval(&MeridianRho::zero()), 0.0);
    }

    #[test]
    fn specialized_equals_general_small() {
        let rho = MeridianRho {
            tt: qfrac(1, 3),
            tg: qfrac(-2, 7),
            rad: qfrac(3, 5),
            tan: qfrac(1, 4),
        };
        let poly = IntegrandPoly::new(2, 2).unwrap();
        let (irr, general) = general_diagram_integrand(2, 2, &rho).unwrap();
        assert_eq!(irr, poly.irr);
        assert_eq!(general, poly.eval_rational_part(&rho));
    }
}
