//! Composite Gauss-Legendre rules on panel partitions.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use gauss_quad::GaussLegendre;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`, cached per `n`.
pub fn gl_rule(n: usize) -> Vec<(f64, f64)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Vec<(f64, f64)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            GaussLegendre::new(n)
                .expect("Gauss-Legendre degree must be at least 2")
                .as_node_weight_pairs()
                .to_vec()
        })
        .clone()
}

/// `(x, w)` pairs of the `n`-point rule on every panel `[edges[i], edges[i+1]]`.
pub fn panel_nodes(edges: &[f64], n: usize) -> Vec<(f64, f64)> {
    let rule = gl_rule(n);
    let mut out = Vec::with_capacity(edges.len().saturating_sub(1) * n);
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
        for &(x, wt) in &rule {
            out.push((mid + half * x, half * wt));
        }
    }
    out
}

/// Splits every panel in two.
pub fn bisect_edges(edges: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * edges.len());
    for w in edges.windows(2) {
        out.push(w[0]);
        out.push((w[0] + w[1]) / 2.0);
    }
    if let Some(&last) = edges.last() {
        out.push(last);
    }
    out
}

/// `count + 1` equally spaced edges from `a` to `b`.
pub fn uniform_edges(a: f64, b: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|i| a + (b - a) * i as f64 / count as f64).collect()
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Log-log slope of `ys` against `xs`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
    ls_slope(&lx, &ly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_rule_integrates_sine() {
        let nodes = panel_nodes(&uniform_edges(0.0, std::f64::consts::PI, 7), 10);
        let v: f64 = nodes.iter().map(|(x, w)| w * x.sin()).sum();
        assert!((v - 2.0).abs() < 1e-13);
        let finer = panel_nodes(&bisect_edges(&uniform_edges(0.0, 1.0, 3)), 4);
        assert_eq!(finer.len(), 24);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [10.0, 20.0, 40.0, 80.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        assert!((loglog_slope(&xs, &ys) + 1.5).abs() < 1e-12);
    }
}
