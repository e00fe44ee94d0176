//! Unconditional response-time transform and moments from the conditional
//! solutions and the queue-length generating function.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::contour::{interp2, SampleVector};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rt_solver::{ConditionalSolution, MomentVectors};

pub const M0_WARN: f64 = 0.05;
pub const IMAG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LstValue {
    pub s: C64,
    pub w: C64,
}

impl LstValue {
    pub fn imag_residue(&self) -> f64 {
        if self.s.im == 0.0 {
            self.w.im.abs()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentsResult {
    pub m0_check: f64,
    /// `M_1 ..= M_K`
    pub m: Vec<f64>,
}

/// `E^< + F^> + a1·E^= + a2·F^=` on the inner grid.
pub fn combined(cs: &ConditionalSolution, params: &ModelParams) -> SampleVector {
    let (a1, a2) = (params.a1, params.a2());
    let values = (0..cs.e.len())
        .map(|i| cs.e_lt.values[i] + cs.f_gt.values[i] + a1 * cs.e_eq.values[i] + a2 * cs.f_eq.values[i])
        .collect();
    SampleVector {
        n: cs.e.n,
        radius: cs.e.radius,
        values,
    }
}

fn check_contours(inner: &SampleVector, g: &SampleVector) -> Result<()> {
    if inner.n != g.n {
        return Err(Error::RadiusMismatch(format!(
            "inner grid has {} points per circle, outer has {}",
            inner.n, g.n
        )));
    }
    if (inner.radius * g.radius - 1.0).abs() > 1e-12 {
        return Err(Error::RadiusMismatch(format!(
            "radii {} and {} are not reciprocal",
            inner.radius, g.radius
        )));
    }
    Ok(())
}

/// Trapezoid rule for the double contour integral on matched grids: the
/// outer grid point conjugate to `(m1, m2)` is `(−m1, −m2) mod n`.
fn matched_sum(inner: &SampleVector, g: &SampleVector) -> C64 {
    let n = inner.n;
    let mut total = C64::new(0.0, 0.0);
    for m1 in 0..n {
        let c1 = (n - m1) % n;
        for m2 in 0..n {
            let c2 = (n - m2) % n;
            total += inner.get(m1, m2) * g.get(c1, c2);
        }
    }
    total / (n * n) as f64
}

pub fn wstar(cs: &ConditionalSolution, g: &SampleVector, params: &ModelParams) -> Result<LstValue> {
    let inner = combined(cs, params);
    check_contours(&inner, g)?;
    let value = LstValue {
        s: cs.s,
        w: matched_sum(&inner, g),
    };
    let residue = value.imag_residue();
    if residue > IMAG_TOL * value.w.norm().max(1.0) {
        warn!("W*({}) has imaginary part {residue:e} at real s", cs.s);
    }
    Ok(value)
}

/// Generic quadrature of the same integral with both factors interpolated
/// bilinearly at `nq × nq` angle pairs.
pub fn wstar_interpolated(
    cs: &ConditionalSolution,
    g: &SampleVector,
    params: &ModelParams,
    nq: usize,
) -> Result<C64> {
    let inner = combined(cs, params);
    check_contours(&inner, g)?;
    let step = 2.0 * PI / nq as f64;
    let mut total = C64::new(0.0, 0.0);
    for q1 in 0..nq {
        let t1 = q1 as f64 * step;
        for q2 in 0..nq {
            let t2 = q2 as f64 * step;
            total += interp2(&inner, t1, t2) * interp2(g, -t1, -t2);
        }
    }
    Ok(total / (nq * nq) as f64)
}

/// `M_k = (−1)^k ×` the deconditioned `k`-th derivative, for `k = 1..=order`.
pub fn moments(
    mv: &MomentVectors,
    g: &SampleVector,
    params: &ModelParams,
    order: usize,
) -> Result<MomentsResult> {
    if order > mv.max_order() {
        return Err(Error::InvalidParams(format!(
            "asked for {order} moments but only {} derivative orders were solved",
            mv.max_order()
        )));
    }
    let mut values = Vec::with_capacity(order + 1);
    for (k, cs) in mv.orders.iter().take(order + 1).enumerate() {
        let w = wstar(cs, g, params)?.w;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        values.push(sign * w.re);
    }
    let m0_check = values[0];
    if (m0_check - 1.0).abs() > M0_WARN {
        warn!("normalization check W*(0) = {m0_check} deviates from 1 by more than {M0_WARN}");
    }
    Ok(MomentsResult {
        m0_check,
        m: values[1..].to_vec(),
    })
}
