//! One function per subcommand: resolve settings, run the library, collect CSV rows and
//! a JSON result.

use std::collections::BTreeMap;

use anyhow::{bail, Result};
use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};

use nodal_lab::asympt::{self, Expansion, Window};
use nodal_lab::chaos_poly::{self, Certificate};
use nodal_lab::exact::compositions;
use nodal_lab::fieldsim;
use nodal_lab::specfun::eigenvalue;
use nodal_lab::variance::{self, KrQuadConfig, QuadConfig, TruncationConfig};

use crate::config::Resolver;

/// Result of one subcommand before it is written out.
pub struct Output {
    pub pass: bool,
    pub results: Value,
    pub csv: Vec<u8>,
}

fn csv_bytes<R: Serialize>(rows: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

fn check_d(d: u32) -> Result<u32> {
    if !(2..=8).contains(&d) {
        bail!("d must lie in 2..=8, got {d}");
    }
    Ok(d)
}

/// Truncation and quadrature settings shared by the variance commands.
#[derive(Debug, Clone, Default, Args)]
pub struct QuadArgs {
    /// Initial chaos truncation order
    #[arg(long)]
    pub qmax: Option<u32>,
    /// Largest admissible last-term share of the total
    #[arg(long)]
    pub tail_tol: Option<f64>,
    /// Hard ceiling for adaptive truncation
    #[arg(long)]
    pub q_budget: Option<u32>,
    /// Relative tolerance between refinement levels
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Inner/outer split point in units of 1/L
    #[arg(long)]
    pub c_split: Option<f64>,
}

impl QuadArgs {
    fn resolve(&self, r: &mut Resolver) -> Result<(TruncationConfig, QuadConfig)> {
        let (t0, q0) = (TruncationConfig::default(), QuadConfig::default());
        let t = TruncationConfig {
            qmax: r.value("qmax", self.qmax, t0.qmax)?,
            tail_tol: r.value("tail-tol", self.tail_tol, t0.tail_tol)?,
            q_budget: r.value("q-budget", self.q_budget, t0.q_budget)?,
        };
        let q = QuadConfig {
            rel_tol: r.value("rel-tol", self.rel_tol, q0.rel_tol)?,
            c_split: r.value("c-split", self.c_split, q0.c_split)?,
            ..q0
        };
        if t.qmax < 3 || t.q_budget < t.qmax {
            bail!(
                "need 3 <= qmax <= q-budget, got qmax={} q-budget={}",
                t.qmax,
                t.q_budget
            );
        }
        Ok((t, q))
    }
}

#[derive(Serialize)]
struct IdentityRow {
    identity: String,
    params: String,
    passed: bool,
    monomials: usize,
}

pub fn verify_identities(r: &mut Resolver, qmax: Option<u32>, dmax: Option<u32>) -> Result<Output> {
    let qmax = r.value("qmax", qmax, 4u32)?;
    let dmax = r.value("dmax", dmax, 4u32)?;
    if qmax < 1 || dmax < 2 {
        bail!("need qmax >= 1 and dmax >= 2");
    }
    let mut certs: Vec<Certificate> = Vec::new();
    for parts in 1..=dmax as usize {
        for total in 0..=qmax + 2 {
            for s in compositions(total, parts) {
                certs.push(chaos_poly::alpha_reduction(&s)?);
            }
        }
    }
    for d in 1..=dmax {
        for p in 0..=qmax {
            certs.push(chaos_poly::hermite_sum_to_laguerre(p, d)?);
        }
    }
    for n in 0..=2 * qmax {
        certs.push(chaos_poly::hermite_laguerre_relation(n)?);
    }
    for d in 2..=dmax.max(2) {
        for p in 0..=qmax {
            certs.push(chaos_poly::c_constant_identity(d, p)?);
        }
    }
    for q in 1..=qmax {
        for d in 2..=dmax {
            certs.push(chaos_poly::verify_p2q(q, d)?.1);
        }
    }
    let rows: Vec<IdentityRow> = certs
        .iter()
        .map(|c| IdentityRow {
            identity: c.identity.clone(),
            params: c
                .params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";"),
            passed: c.passed,
            monomials: c.monomials,
        })
        .collect();
    let failed = certs.iter().filter(|c| !c.passed).count();
    let mut by_identity: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &certs {
        *by_identity.entry(&c.identity).or_default() += 1;
    }
    Ok(Output {
        pass: failed == 0,
        results: json!({ "certificates": certs.len(), "failed": failed, "by_identity": by_identity }),
        csv: csv_bytes(&rows)?,
    })
}

#[derive(Serialize)]
struct VarianceRow {
    d: u32,
    ell: u32,
    q: u32,
    variance: f64,
    quad_error: f64,
}

pub fn variance(r: &mut Resolver, d: Option<u32>, ells: Option<String>, quad: &QuadArgs) -> Result<Output> {
    let d = check_d(r.value("d", d, 3)?)?;
    let ells: Vec<u32> = r.list("ells", ells, "20,40,80,160")?;
    let (t, q) = quad.resolve(r)?;
    let totals = ells
        .iter()
        .map(|&l| variance::total_variance(l, d, t, q))
        .collect::<nodal_lab::Result<Vec<_>>>()?;
    let rows: Vec<VarianceRow> = totals
        .iter()
        .flat_map(|tv| {
            tv.chaos.iter().map(move |c| VarianceRow {
                d,
                ell: tv.ell,
                q: c.q,
                variance: c.value,
                quad_error: c.quadrature_error,
            })
        })
        .collect();
    Ok(Output {
        pass: totals.iter().all(|tv| !tv.truncated),
        results: json!({ "totals": totals }),
        csv: csv_bytes(&rows)?,
    })
}

#[derive(Serialize)]
struct ScalingRow {
    d: u32,
    ell: u32,
    total: f64,
    qmax_used: u32,
    tail_fraction: f64,
    total_extrapolated: Option<f64>,
}

pub fn scaling(r: &mut Resolver, d: Option<u32>, ells: Option<String>, quad: &QuadArgs) -> Result<Output> {
    let d = check_d(r.value("d", d, 3)?)?;
    let ells: Vec<u32> = r.list("ells", ells, "20,40,80,160")?;
    let (t, q) = quad.resolve(r)?;
    let rep = variance::scaling_study(d, &ells, t, q)?;
    let rows: Vec<ScalingRow> = rep
        .entries
        .iter()
        .map(|e| ScalingRow {
            d,
            ell: e.ell,
            total: e.total,
            qmax_used: e.qmax_used,
            tail_fraction: e.tail_fraction,
            total_extrapolated: e.total_extrapolated,
        })
        .collect();
    Ok(Output {
        pass: rep.pass,
        results: json!({
            "slope": rep.slope,
            "target_slope": rep.target_slope,
            "slope_tol": rep.slope_tol,
            "qmax": rep.qmax,
            "tail_fraction": rep.tail_fraction,
            "totals": rep.totals,
        }),
        csv: csv_bytes(&rows)?,
    })
}

#[derive(Serialize)]
struct BerryRow {
    ell: u32,
    var_nodal: f64,
    var_level2: f64,
    ratio: f64,
}

pub fn berry(
    r: &mut Resolver,
    d: Option<u32>,
    u: Option<f64>,
    ells: Option<String>,
    quad: &QuadArgs,
) -> Result<Output> {
    let d = check_d(r.value("d", d, 3)?)?;
    let u = r.value("u", u, 1.0)?;
    let ells: Vec<u32> = r.list("ells", ells, "20,40,80")?;
    let (t, q) = quad.resolve(r)?;
    let rep = variance::berry_study(u, d, &ells, t, q)?;
    let rows: Vec<BerryRow> = rep
        .points
        .iter()
        .map(|p| BerryRow {
            ell: p.ell,
            var_nodal: p.var_nodal,
            var_level2: p.var_level2,
            ratio: p.ratio,
        })
        .collect();
    Ok(Output {
        pass: rep.pass,
        results: json!({
            "doubling_factors": rep.doubling_factors,
            "ratio_slope": rep.ratio_slope,
            "level2_slope": rep.level2_slope,
            "note": "denominator is the second chaos of the level-u volume only",
        }),
        csv: csv_bytes(&rows)?,
    })
}

pub fn simulate(
    r: &mut Resolver,
    d: Option<u32>,
    ell: Option<u32>,
    draws: Option<usize>,
    seed: Option<u64>,
    resolution: Option<u32>,
) -> Result<Output> {
    let d = r.value("d", d, 2u32)?;
    if d != 2 {
        bail!("the field simulator covers d = 2 only; use mean-check for d >= 3");
    }
    let ell = r.value("ell", ell, 20u32)?;
    let draws = r.value("draws", draws, 500usize)?;
    let seed = r.value("seed", seed, 7u64)?;
    let res = r.value("resolution", resolution, 16 * ell)?;
    if draws < 2 {
        bail!("need at least 2 draws");
    }
    let out = fieldsim::simulate_draws(ell, res, draws, seed)?;
    let n = out.len() as f64;
    let mean = out.iter().map(|x| x.length).sum::<f64>() / n;
    let var = out.iter().map(|x| (x.length - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let target = fieldsim::mean_nodal_volume(ell, 2);
    let se = (var / n).sqrt();
    let log_law = eigenvalue(ell, 2).sqrt().ln() / 32.0;
    Ok(Output {
        pass: (mean - target).abs() <= 3.0 * se,
        results: json!({
            "mean": mean,
            "std_error": se,
            "target_mean": target,
            "variance": var,
            "log_law": log_law,
            "variance_over_log_law": var / log_law,
        }),
        csv: csv_bytes(&out)?,
    })
}

#[derive(Serialize)]
struct MeanRow {
    d: u32,
    ell: u32,
    eps: f64,
    estimate: f64,
    std_error: f64,
    target: f64,
    z: f64,
}

pub fn mean_check(
    r: &mut Resolver,
    d: Option<u32>,
    ell: Option<u32>,
    eps: Option<f64>,
    samples: Option<usize>,
    seed: Option<u64>,
) -> Result<Output> {
    let d = check_d(r.value("d", d, 3)?)?;
    let ell = r.value("ell", ell, 10u32)?;
    let eps = r.value("eps", eps, 0.01)?;
    let n = r.value("samples", samples, 1_000_000usize)?;
    let seed = r.value("seed", seed, 7u64)?;
    if n < 100_000 {
        bail!("need at least 100000 samples, got {n}");
    }
    let est = fieldsim::one_point_mean(d, ell, eps, n, seed)?;
    let target = fieldsim::mean_nodal_volume(ell, d);
    let z = (est.mean - target) / est.std_error;
    let row = MeanRow {
        d,
        ell,
        eps,
        estimate: est.mean,
        std_error: est.std_error,
        target,
        z,
    };
    Ok(Output {
        pass: z.abs() < 3.0,
        results: json!({ "estimate": est, "target": target, "z": z, "bias_factor": fieldsim::one_point_bias_factor(eps) }),
        csv: csv_bytes(&[row])?,
    })
}

#[derive(Debug, Clone, Default, Args)]
pub struct AsymptArgs {
    /// gegenbauer, products or bounds
    #[arg(long)]
    pub check: Option<String>,
    #[arg(long)]
    pub d: Option<u32>,
    /// Comma-separated degrees
    #[arg(long)]
    pub ells: Option<String>,
    /// Lower integration limit in ψ for products
    #[arg(long)]
    pub c: Option<f64>,
    /// Comma-separated C values for bounds
    #[arg(long)]
    pub cs: Option<String>,
    /// Comma-separated ε values for bounds
    #[arg(long)]
    pub epss: Option<String>,
}

#[derive(Serialize)]
struct ResidualRow {
    quantity: String,
    d: u32,
    ell: u32,
    max_residual: f64,
}

#[derive(Serialize)]
struct ProductRow {
    partition: String,
    d: u32,
    exponent: f64,
    bound: f64,
    pass: bool,
}

pub fn asympt(r: &mut Resolver, a: &AsymptArgs) -> Result<Output> {
    let check = r.value("check", a.check.clone(), "gegenbauer".to_string())?;
    let d = check_d(r.value("d", a.d, 3)?)?;
    let ells: Vec<u32> = r.list("ells", a.ells.clone(), "50,100,200,400")?;
    match check.as_str() {
        "gegenbauer" => {
            let checks = Expansion::ALL
                .iter()
                .map(|&k| asympt::check_gegenbauer_expansion(k, &ells, d, Window::default()))
                .collect::<nodal_lab::Result<Vec<_>>>()?;
            let rows: Vec<ResidualRow> = checks
                .iter()
                .flat_map(|c| {
                    c.ells.iter().zip(&c.max_residual).map(move |(&ell, &m)| ResidualRow {
                        quantity: c.quantity.clone(),
                        d,
                        ell,
                        max_residual: m,
                    })
                })
                .collect();
            Ok(Output {
                pass: checks.iter().all(|c| c.pass),
                results: json!({ "checks": checks }),
                csv: csv_bytes(&rows)?,
            })
        }
        "products" => {
            let c = r.value("c", a.c, 1.0)?;
            let checks = asympt::check_product_all(&asympt::product_partitions(d), d, &ells, c)?;
            let rows: Vec<ProductRow> = checks
                .iter()
                .map(|k| ProductRow {
                    partition: k.a.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "),
                    d,
                    exponent: k.exponent,
                    bound: k.bound,
                    pass: k.pass,
                })
                .collect();
            let worst = checks.iter().map(|k| k.exponent).fold(f64::MIN, f64::max);
            Ok(Output {
                pass: checks.iter().all(|k| k.pass),
                results: json!({ "partitions": checks.len(), "worst_exponent": worst, "checks": checks }),
                csv: csv_bytes(&rows)?,
            })
        }
        "bounds" => {
            let cs: Vec<f64> = r.list("cs", a.cs.clone(), "1,2,4,8")?;
            let epss: Vec<f64> = r.list("epss", a.epss.clone(), "0.05,0.1,0.2")?;
            let mut rows = Vec::new();
            for &ell in &ells {
                rows.extend(asympt::search_c_eps(d, ell, &cs, &epss)?);
            }
            let admissible: Vec<(f64, f64)> = {
                let mut v = Vec::new();
                for &c in &cs {
                    for &e in &epss {
                        if rows.iter().filter(|b| b.c == c && b.eps == e).all(|b| b.admissible) {
                            v.push((c, e));
                        }
                    }
                }
                v
            };
            Ok(Output {
                pass: !admissible.is_empty(),
                results: json!({ "admissible": admissible }),
                csv: csv_bytes(&rows)?,
            })
        }
        other => bail!("unknown check `{other}`; expected gegenbauer, products or bounds"),
    }
}

#[derive(Serialize)]
struct CrossRow {
    ell: u32,
    chaos_total: f64,
    chaos_extrapolated: Option<f64>,
    kacrice: f64,
    kacrice_quad_error: f64,
    rel_diff: f64,
}

pub fn kacrice_crosscheck(
    r: &mut Resolver,
    d: Option<u32>,
    ells: Option<String>,
    tol: Option<f64>,
    quad: &QuadArgs,
) -> Result<Output> {
    let d = check_d(r.value("d", d, 3)?)?;
    let ells: Vec<u32> = r.list("ells", ells, "10,20")?;
    let tol = r.value("tol", tol, 0.1)?;
    let (t, q) = quad.resolve(r)?;
    let mut rows = Vec::new();
    for &ell in &ells {
        let tv = variance::total_variance(ell, d, t, q)?;
        let kr = variance::kacrice_variance(ell, d, KrQuadConfig::default())?;
        let reference = tv.total_extrapolated.unwrap_or(tv.total);
        rows.push(CrossRow {
            ell,
            chaos_total: tv.total,
            chaos_extrapolated: tv.total_extrapolated,
            kacrice: kr.value,
            kacrice_quad_error: kr.quadrature_error,
            rel_diff: (reference - kr.value).abs() / reference,
        });
    }
    Ok(Output {
        pass: rows.iter().all(|x| x.rel_diff < tol),
        results: json!({
            "reference": "chaos sum with fitted power-law tail when available",
            "max_rel_diff": rows.iter().map(|x| x.rel_diff).fold(0.0, f64::max),
        }),
        csv: csv_bytes(&rows)?,
    })
}
