//! Variances of the chaotic components by one-dimensional quadrature of the
//! meridian diagram integrand, totals over `q`, scaling fits, the level-set
//! comparison, and the two-point Kac-Rice variance.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::chaos_poly::level_second_chaos_coeff;
use crate::diagram::{IntegrandPoly, MeridianRho};
use crate::error::{Error, Result};
use crate::meridian::{correlations, two_point_deterministic};
use crate::quad::{bisect_edges, loglog_slope, panel_nodes, uniform_edges};
use crate::specfun::{eigenspace_dim, grad_variance, hilb_scale, sphere_area};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadConfig {
    /// Split point `C/L` between the inner and outer intervals.
    pub c_split: f64,
    pub inner_nodes: usize,
    pub panel_nodes: usize,
    /// Outer panel width in units of `π/L`.
    pub panel_width: f64,
    pub rel_tol: f64,
    pub max_refine: u32,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            c_split: 1.0,
            inner_nodes: 64,
            panel_nodes: 24,
            panel_width: 1.0,
            rel_tol: 1e-3,
            max_refine: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChaosVariance {
    pub q: u32,
    pub ell: u32,
    pub d: u32,
    pub value: f64,
    pub quadrature_error: f64,
    /// Contribution of `[0, C/L]`.
    pub inner: f64,
    /// Contribution of `[C/L, π/2]`.
    pub outer: f64,
}

/// `(E/d) · 2 H^d H^{d-1}`.
pub fn variance_prefactor(ell: u32, d: u32) -> f64 {
    grad_variance(ell, d) * 2.0 * sphere_area(d) * sphere_area(d - 1)
}

struct NodeSet {
    weights: Vec<f64>,
    rho: Vec<MeridianRho<f64>>,
    n_inner: usize,
}

/// Quadrature engine for one `(ℓ, d)` that caches node correlations per refinement level.
pub struct VarianceEngine {
    pub ell: u32,
    pub d: u32,
    pub cfg: QuadConfig,
    levels: Vec<NodeSet>,
    polys: BTreeMap<u32, IntegrandPoly>,
}

impl VarianceEngine {
    pub fn new(ell: u32, d: u32, cfg: QuadConfig) -> Result<VarianceEngine> {
        if ell < 1 || d < 2 {
            return Err(Error::Domain(format!("need ell >= 1 and d >= 2, got ell={ell} d={d}")));
        }
        Ok(VarianceEngine {
            ell,
            d,
            cfg,
            levels: Vec::new(),
            polys: BTreeMap::new(),
        })
    }

    fn base_edges(&self) -> (Vec<f64>, Vec<f64>) {
        let l = hilb_scale(self.ell, self.d);
        let split = (self.cfg.c_split / l).min(PI / 2.0);
        let inner = vec![0.0, split];
        let width = self.cfg.panel_width * PI / l;
        let count = ((PI / 2.0 - split) / width).ceil() as usize;
        let outer = if count == 0 {
            vec![]
        } else {
            uniform_edges(split, PI / 2.0, count)
        };
        (inner, outer)
    }

    fn level(&mut self, k: usize) -> Result<&NodeSet> {
        while self.levels.len() <= k {
            let lev = self.levels.len();
            let (mut inner, mut outer) = self.base_edges();
            for _ in 0..lev {
                inner = bisect_edges(&inner);
                outer = bisect_edges(&outer);
            }
            let mut nodes = panel_nodes(&inner, self.cfg.inner_nodes);
            let n_inner = nodes.len();
            nodes.extend(panel_nodes(&outer, self.cfg.panel_nodes));
            let (ell, d) = (self.ell, self.d);
            let rho: Vec<MeridianRho<f64>> = nodes
                .par_iter()
                .map(|&(th, _)| correlations(th, ell, d))
                .collect::<Result<_>>()?;
            let weights = nodes.iter().map(|&(th, w)| w * th.sin().powi(d as i32 - 1)).collect();
            self.levels.push(NodeSet { weights, rho, n_inner });
        }
        Ok(&self.levels[k])
    }

    fn poly(&mut self, q: u32) -> Result<&IntegrandPoly> {
        if !self.polys.contains_key(&q) {
            let p = IntegrandPoly::new(q, self.d)?;
            self.polys.insert(q, p);
        }
        Ok(&self.polys[&q])
    }

    fn integrate(&mut self, q: u32, level: usize) -> Result<(f64, f64)> {
        self.poly(q)?;
        self.level(level)?;
        let poly = &self.polys[&q];
        let set = &self.levels[level];
        let vals: Vec<f64> = set
            .rho
            .par_iter()
            .zip(&set.weights)
            .map(|(r, w)| w * poly.eval(r))
            .collect();
        let inner: f64 = vals[..set.n_inner].iter().sum();
        let outer: f64 = vals[set.n_inner..].iter().sum();
        Ok((inner, outer))
    }

    /// Refines until two successive levels agree to `rel_tol`.
    pub fn chaos_variance(&mut self, q: u32) -> Result<ChaosVariance> {
        if q < 2 {
            return Err(Error::Domain(format!("chaos order must be >= 2, got q={q}")));
        }
        let k = variance_prefactor(self.ell, self.d);
        let (mut pi, mut po) = self.integrate(q, 0)?;
        for level in 1..=self.cfg.max_refine as usize {
            let (ni, no) = self.integrate(q, level)?;
            let (prev, cur) = (pi + po, ni + no);
            let err = (cur - prev).abs();
            if err <= self.cfg.rel_tol * cur.abs() {
                return Ok(ChaosVariance {
                    q,
                    ell: self.ell,
                    d: self.d,
                    value: k * cur,
                    quadrature_error: k * err,
                    inner: k * ni,
                    outer: k * no,
                });
            }
            pi = ni;
            po = no;
        }
        Err(Error::Accuracy(format!(
            "quadrature for q={q} ell={} d={} did not reach rel_tol {} after {} refinements",
            self.ell, self.d, self.cfg.rel_tol, self.cfg.max_refine
        )))
    }
}

/// Variance of the `2q`-th chaos at degree `ell`.
pub fn chaos_variance(q: u32, ell: u32, d: u32, cfg: QuadConfig) -> Result<ChaosVariance> {
    VarianceEngine::new(ell, d, cfg)?.chaos_variance(q)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TotalVariance {
    pub ell: u32,
    pub d: u32,
    pub chaos: Vec<ChaosVariance>,
    /// `Σ_{q=2}^{qmax_used}`.
    pub total: f64,
    pub qmax_used: u32,
    /// Last term over the total.
    pub tail_fraction: f64,
    /// Tail bound not met when the `q` budget ran out.
    pub truncated: bool,
    /// `A q^{-γ}` fitted on the last four terms and summed beyond `qmax_used`, when `γ > 1`.
    pub tail_estimate: Option<f64>,
    pub total_extrapolated: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationConfig {
    pub qmax: u32,
    pub tail_tol: f64,
    /// Hard ceiling for adaptive growth of `qmax`.
    pub q_budget: u32,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig {
            qmax: 6,
            tail_tol: 0.05,
            q_budget: 14,
        }
    }
}

/// Sum of `A q^{-γ}` over `q > last`.
fn power_tail(a: f64, gamma: f64, last: u32) -> f64 {
    let explicit = 2000u32;
    let mut s = 0.0;
    for q in (last + 1)..=(last + explicit) {
        s += a * (q as f64).powf(-gamma);
    }
    // Euler-Maclaurin remainder beyond the explicit range
    let m = (last + explicit) as f64;
    s + a * m.powf(1.0 - gamma) / (gamma - 1.0) - 0.5 * a * m.powf(-gamma)
}

/// Fitted `(A, γ)` for the trailing chaos variances.
pub fn fit_power_tail(chaos: &[ChaosVariance]) -> Option<(f64, f64)> {
    if chaos.len() < 4 {
        return None;
    }
    let last = &chaos[chaos.len() - 4..];
    if last.iter().any(|c| c.value <= 0.0) {
        return None;
    }
    let xs: Vec<f64> = last.iter().map(|c| c.q as f64).collect();
    let ys: Vec<f64> = last.iter().map(|c| c.value).collect();
    let slope = loglog_slope(&xs, &ys);
    let lx: f64 = xs.iter().map(|x| x.ln()).sum::<f64>() / 4.0;
    let ly: f64 = ys.iter().map(|y| y.ln()).sum::<f64>() / 4.0;
    Some(((ly - slope * lx).exp(), -slope))
}

/// Sums chaos variances from `q = 2`, growing `qmax` until the last term is below
/// `tail_tol` of the total or the budget is reached.
pub fn total_variance(ell: u32, d: u32, trunc: TruncationConfig, cfg: QuadConfig) -> Result<TotalVariance> {
    if trunc.qmax < 3 {
        return Err(Error::Domain(format!("qmax must be >= 3, got {}", trunc.qmax)));
    }
    let mut eng = VarianceEngine::new(ell, d, cfg)?;
    let mut chaos = Vec::new();
    for q in 2..=trunc.qmax {
        chaos.push(eng.chaos_variance(q)?);
    }
    let tail = |c: &[ChaosVariance]| {
        let total: f64 = c.iter().map(|x| x.value).sum();
        (total, c.last().map(|x| x.value / total).unwrap_or(1.0))
    };
    let (mut total, mut frac) = tail(&chaos);
    while frac >= trunc.tail_tol && (chaos.len() as u32 + 1) < trunc.q_budget {
        let q = chaos.len() as u32 + 2;
        chaos.push(eng.chaos_variance(q)?);
        (total, frac) = tail(&chaos);
    }
    let qmax_used = chaos.len() as u32 + 1;
    let tail_estimate = fit_power_tail(&chaos)
        .filter(|&(_, g)| g > 1.0)
        .map(|(a, g)| power_tail(a, g, qmax_used));
    Ok(TotalVariance {
        ell,
        d,
        total,
        qmax_used,
        tail_fraction: frac,
        truncated: frac >= trunc.tail_tol,
        tail_estimate,
        total_extrapolated: tail_estimate.map(|t| total + t),
        chaos,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub d: u32,
    pub ells: Vec<u32>,
    pub totals: Vec<f64>,
    pub slope: f64,
    pub target_slope: f64,
    pub slope_tol: f64,
    /// Largest `qmax` used over the grid.
    pub qmax: u32,
    /// Largest tail fraction over the grid.
    pub tail_fraction: f64,
    pub pass: bool,
    pub entries: Vec<TotalVariance>,
}

pub const SLOPE_TOL: f64 = 0.25;

/// Log-log slope of the total variance in `ℓ`. Passes for `d ≥ 3` when the slope is within
/// [`SLOPE_TOL`] of `-(d-2)` and every tail fraction is below the bound.
pub fn scaling_study(d: u32, ells: &[u32], trunc: TruncationConfig, cfg: QuadConfig) -> Result<ScalingReport> {
    if ells.len() < 4 {
        return Err(Error::Domain(format!(
            "scaling needs at least 4 values of ell, got {}",
            ells.len()
        )));
    }
    let entries = ells
        .iter()
        .map(|&l| total_variance(l, d, trunc, cfg))
        .collect::<Result<Vec<_>>>()?;
    let totals: Vec<f64> = entries.iter().map(|e| e.total).collect();
    let xs: Vec<f64> = ells.iter().map(|&l| l as f64).collect();
    let slope = loglog_slope(&xs, &totals);
    let target = -(d as f64 - 2.0);
    let tail_fraction = entries.iter().map(|e| e.tail_fraction).fold(0.0, f64::max);
    let pass = d >= 3 && (slope - target).abs() <= SLOPE_TOL && tail_fraction < trunc.tail_tol;
    Ok(ScalingReport {
        d,
        ells: ells.to_vec(),
        totals,
        slope,
        target_slope: target,
        slope_tol: SLOPE_TOL,
        qmax: entries.iter().map(|e| e.qmax_used).max().unwrap_or(trunc.qmax),
        tail_fraction,
        pass,
        entries,
    })
}

/// `Var(L(u)[2]) = coeff² · 2 (H^d)² / η`.
pub fn level_second_chaos_variance(u: f64, ell: u32, d: u32) -> f64 {
    let c = level_second_chaos_coeff(u, ell, d);
    let h = sphere_area(d);
    c * c * 2.0 * h * h / eigenspace_dim(ell, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerryPoint {
    pub ell: u32,
    pub var_nodal: f64,
    pub var_level2: f64,
    pub ratio: f64,
}

/// Nodal variance over the second-chaos variance of the level-`u` volume.
pub fn berry_ratio(u: f64, ell: u32, d: u32, trunc: TruncationConfig, cfg: QuadConfig) -> Result<BerryPoint> {
    if u == 0.0 {
        return Err(Error::Domain("berry ratio needs u != 0".into()));
    }
    let var_nodal = total_variance(ell, d, trunc, cfg)?.total;
    let var_level2 = level_second_chaos_variance(u, ell, d);
    Ok(BerryPoint {
        ell,
        var_nodal,
        var_level2,
        ratio: var_nodal / var_level2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerryReport {
    pub u: f64,
    pub d: u32,
    pub points: Vec<BerryPoint>,
    /// `ratio(2ℓ)/ratio(ℓ)` for consecutive doublings.
    pub doubling_factors: Vec<f64>,
    pub ratio_slope: f64,
    pub level2_slope: f64,
    pub pass: bool,
}

/// Halving tolerance on the doubling factor.
pub const BERRY_TOL: f64 = 0.25;
/// Tolerance on the exponent of `Var(L(u)[2])`.
pub const LEVEL2_EXPONENT_TOL: f64 = 0.2;

pub fn berry_study(u: f64, d: u32, ells: &[u32], trunc: TruncationConfig, cfg: QuadConfig) -> Result<BerryReport> {
    if ells.len() < 2 {
        return Err(Error::Domain("berry study needs at least 2 values of ell".into()));
    }
    let points = ells
        .iter()
        .map(|&l| berry_ratio(u, l, d, trunc, cfg))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = ells.iter().map(|&l| l as f64).collect();
    let ratios: Vec<f64> = points.iter().map(|p| p.ratio).collect();
    let lv: Vec<f64> = points.iter().map(|p| p.var_level2).collect();
    let doubling_factors: Vec<f64> = points
        .windows(2)
        .map(|w| (w[1].ratio / w[0].ratio).powf(2f64.ln() / (w[1].ell as f64 / w[0].ell as f64).ln()))
        .collect();
    let ratio_slope = loglog_slope(&xs, &ratios);
    let level2_slope = loglog_slope(&xs, &lv);
    let target_level2 = 3.0 - d as f64;
    let pass = doubling_factors.iter().all(|f| (f / 0.5 - 1.0).abs() <= BERRY_TOL)
        && (level2_slope - target_level2).abs() <= LEVEL2_EXPONENT_TOL;
    Ok(BerryReport {
        u,
        d,
        points,
        doubling_factors,
        ratio_slope,
        level2_slope,
        pass,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KrQuadConfig {
    /// Lower cutoff in units of `1/L`.
    pub theta_min: f64,
    /// Geometric panels between the cutoff and `1/L`.
    pub geometric_panels: usize,
    /// Uniform panel width beyond `1/L`, in units of `π/L`.
    pub panel_width: f64,
    pub nodes: usize,
}

impl Default for KrQuadConfig {
    fn default() -> Self {
        KrQuadConfig {
            theta_min: 1e-3,
            geometric_panels: 8,
            panel_width: 0.5,
            nodes: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KacRiceVariance {
    pub ell: u32,
    pub d: u32,
    pub value: f64,
    /// Change when every panel is bisected.
    pub quadrature_error: f64,
}

fn kr_edges(ell: u32, d: u32, cfg: &KrQuadConfig) -> Vec<f64> {
    let l = hilb_scale(ell, d);
    let lo = cfg.theta_min / l;
    let hi = (1.0 / l).min(PI / 2.0);
    let g = cfg.geometric_panels.max(1);
    let mut edges: Vec<f64> = (0..=g).map(|i| lo * (hi / lo).powf(i as f64 / g as f64)).collect();
    let width = cfg.panel_width * PI / l;
    let count = ((PI / 2.0 - hi) / width).ceil() as usize;
    if count > 0 {
        edges.extend(uniform_edges(hi, PI / 2.0, count).into_iter().skip(1));
    }
    edges
}

fn kr_integral(ell: u32, d: u32, edges: &[f64], nodes: usize) -> Result<f64> {
    let pts = panel_nodes(edges, nodes);
    let vals = pts
        .par_iter()
        .map(|&(th, w)| Ok(w * th.sin().powi(d as i32 - 1) * two_point_deterministic(th, ell, d)?.k_minus_ce))
        .collect::<Result<Vec<f64>>>()?;
    Ok(2.0 * sphere_area(d) * sphere_area(d - 1) * vals.iter().sum::<f64>())
}

/// `∫∫ (K - cE) dx dy` by deterministic quadrature of the two-point function.
pub fn kacrice_variance(ell: u32, d: u32, cfg: KrQuadConfig) -> Result<KacRiceVariance> {
    let edges = kr_edges(ell, d, &cfg);
    let coarse = kr_integral(ell, d, &edges, cfg.nodes)?;
    let fine = kr_integral(ell, d, &bisect_edges(&edges), cfg.nodes)?;
    Ok(KacRiceVariance {
        ell,
        d,
        value: fine,
        quadrature_error: (fine - coarse).abs(),
    })
}
