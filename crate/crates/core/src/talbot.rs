//! Fixed-Talbot numerical inversion of Laplace transforms.

use std::collections::HashMap;
use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_NODES: usize = 32;
pub const MIN_NODES: usize = 16;
pub const NEGATIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySeries {
    pub t: Vec<f64>,
    /// Reported values: raw values within `NEGATIVE_TOL` below zero are
    /// clamped to zero.
    pub w: Vec<f64>,
    pub raw: Vec<f64>,
    pub nodes: usize,
    pub grid_n: Option<usize>,
}

impl DensitySeries {
    /// Trapezoid integral of the reported density over the sample points.
    pub fn trapezoid_mass(&self) -> f64 {
        self.t
            .windows(2)
            .zip(self.w.windows(2))
            .map(|(t, w)| 0.5 * (t[1] - t[0]) * (w[0] + w[1]))
            .sum()
    }
}

/// Contour nodes for one time point: `(s_k, weight_k)` such that
/// `f(t) ≈ Σ Re(weight_k · e^{t s_k} · F(s_k))`.
pub fn nodes(t: f64, m: usize) -> Vec<(C64, C64)> {
    let r = 2.0 * m as f64 / (5.0 * t);
    let mut out = Vec::with_capacity(m);
    out.push((C64::new(r, 0.0), C64::new(0.5 * r / m as f64, 0.0)));
    for k in 1..m {
        let theta = k as f64 * PI / m as f64;
        let cot = theta.cos() / theta.sin();
        let s = C64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        out.push((s, C64::new(1.0, sigma) * (r / m as f64)));
    }
    out
}

fn key(s: C64) -> (u64, u64) {
    (s.re.to_bits(), s.im.to_bits())
}

/// Inverts `transform` at every time point. Transform values are computed
/// once per distinct node and may be evaluated concurrently.
pub fn invert<F>(transform: F, tpoints: &[f64], m: usize) -> Result<DensitySeries>
where
    F: Fn(C64) -> Result<C64> + Sync,
{
    if m < MIN_NODES {
        return Err(Error::InvalidParams(format!("Talbot needs at least {MIN_NODES} nodes, got {m}")));
    }
    if let Some(bad) = tpoints.iter().find(|t| !(**t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidParams(format!("time point {bad} must be positive")));
    }
    let per_t: Vec<Vec<(C64, C64)>> = tpoints.iter().map(|&t| nodes(t, m)).collect();
    let mut distinct: Vec<C64> = Vec::new();
    let mut seen = HashMap::new();
    for &(s, _) in per_t.iter().flatten() {
        if seen.insert(key(s), ()).is_none() {
            distinct.push(s);
        }
    }
    let values: Vec<(C64, C64)> = distinct
        .par_iter()
        .map(|&s| {
            transform(s)
                .map(|v| (s, v))
                .map_err(|e| Error::Inversion {
                    s: s.to_string(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    let cache: HashMap<(u64, u64), C64> = values.into_iter().map(|(s, v)| (key(s), v)).collect();

    let mut raw = Vec::with_capacity(tpoints.len());
    for (&t, nodes) in tpoints.iter().zip(&per_t) {
        let value: f64 = nodes
            .iter()
            .map(|&(s, weight)| (weight * (s * t).exp() * cache[&key(s)]).re)
            .sum();
        raw.push(value);
    }
    let mut w = Vec::with_capacity(raw.len());
    for (&t, &v) in tpoints.iter().zip(&raw) {
        if v < -NEGATIVE_TOL {
            warn!("inverted density is {v:e} at t = {t}");
            w.push(v);
        } else {
            w.push(v.max(0.0));
        }
    }
    Ok(DensitySeries {
        t: tpoints.to_vec(),
        w,
        raw,
        nodes: m,
        grid_n: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_lst(mu: f64) -> impl Fn(C64) -> Result<C64> + Sync {
        move |s| Ok(mu / (s + mu))
    }

    #[test]
    fn exponential_densities() {
        let d = invert(exp_lst(1.0), &[1.0], DEFAULT_NODES).unwrap();
        assert!((d.w[0] - (-1.0f64).exp()).abs() < 1e-8);
        let d = invert(exp_lst(2.0), &[0.5], DEFAULT_NODES).unwrap();
        assert!((d.w[0] - 2.0 * (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn hyperexponential_mixture() {
        let (c, ma, mb) = (0.3, 0.5, 4.0);
        let lst = move |s: C64| Ok(c * ma / (s + ma) + (1.0 - c) * mb / (s + mb));
        let ts: Vec<f64> = (1..=40).map(|i| i as f64 * 0.25).collect();
        let d = invert(lst, &ts, DEFAULT_NODES).unwrap();
        for (&t, &w) in ts.iter().zip(&d.w) {
            let exact = c * ma * (-ma * t).exp() + (1.0 - c) * mb * (-mb * t).exp();
            assert!((w - exact).abs() < 1e-7, "t={t}");
        }
    }

    #[test]
    fn doubling_nodes_is_stable() {
        let ts = [0.2, 1.0, 3.0, 7.0];
        let lo = invert(exp_lst(1.5), &ts, 16).unwrap();
        let hi = invert(exp_lst(1.5), &ts, 32).unwrap();
        for (a, b) in lo.w.iter().zip(&hi.w) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn erlang_mass_matches_distribution() {
        let lst = |s: C64| Ok((2.0 / (s + 2.0)).powu(2));
        let ts: Vec<f64> = (1..=800).map(|i| i as f64 * 0.025).collect();
        let d = invert(lst, &ts, DEFAULT_NODES).unwrap();
        let cdf = |t: f64| 1.0 - (-2.0 * t).exp() * (1.0 + 2.0 * t);
        let mass = d.trapezoid_mass();
        // trapezoid error is about h²/12 · f'(0) ≈ 2e-4
        assert!((mass - (cdf(20.0) - cdf(0.025))).abs() < 5e-4, "{mass}");
    }

    #[test]
    fn failures_carry_the_node() {
        let failing = |s: C64| -> Result<C64> {
            if s.im > 0.0 {
                Err(Error::Unsupported("boom".into()))
            } else {
                Ok(C64::new(1.0, 0.0))
            }
        };
        let err = invert(failing, &[1.0], 16).unwrap_err();
        assert!(matches!(err, Error::Inversion { .. }));
        assert!(invert(exp_lst(1.0), &[0.0], 32).is_err());
        assert!(invert(exp_lst(1.0), &[1.0], 8).is_err());
    }

    #[test]
    fn repeated_times_share_nodes() {
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let lst = |s: C64| {
            calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Ok(1.0 / (s + 1.0))
        };
        invert(lst, &[1.0, 1.0, 2.0], 16).unwrap();
        assert_eq!(calls.load(std::sync::atomic::Ordering::SeqCst), 32);
    }
}
