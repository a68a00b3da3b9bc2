//! Tail exponent of a degree histogram.
//!
//! The estimator is the discrete maximum-likelihood fit of the Yule-type
//! family
//!
//! ```text
//! p(k) ∝ Γ(k) / Γ(k + α),   k >= k_min,
//! ```
//!
//! whose tail decays as `k^-α`. The normalizer telescopes to
//! `Γ(k_min) / ((α - 1) Γ(k_min + α - 1))`, so the score is a sum of
//! digammas and the root is found by bisection. The limiting law
//! `24 / (k (k+1) (k+2))` is the member `α = 3`, which a pure zeta law
//! `k^-α` is not: at `k_min = 6` a zeta fit to it lands near 2.8.
//!
//! A least-squares slope of the log complementary CDF is reported next to
//! the MLE as a cross-check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::DegreeHistogram;
use crate::stats::{digamma, ols_slope, trigamma};

pub const DEFAULT_K_MIN: u64 = 6;

/// Distinct degrees needed in the tail before a fit is attempted.
pub const MIN_DISTINCT_DEGREES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    DiscreteMle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub k_min: u64,
    pub exponent: f64,
    pub std_error: f64,
    pub method: FitMethod,
    /// `1 - slope` of `ln P(K >= k)` against `ln k` over the tail.
    pub ccdf_exponent: f64,
    /// Total weight in the tail.
    pub tail_size: f64,
}

pub fn fit_exponent(histogram: &DegreeHistogram, k_min: u64) -> Result<ExponentFit> {
    let points: Vec<(u64, f64)> = histogram
        .iter()
        .map(|(k, n)| (u64::from(k), n as f64))
        .collect();
    fit_exponent_weighted(&points, k_min)
}

/// Fits `(degree, weight)` pairs; weights need not be integers.
pub fn fit_exponent_weighted(points: &[(u64, f64)], k_min: u64) -> Result<ExponentFit> {
    if k_min < 1 {
        return Err(Error::Domain("k_min must be at least 1".into()));
    }
    let mut tail: Vec<(u64, f64)> = points
        .iter()
        .copied()
        .filter(|&(k, w)| k >= k_min && w > 0.0)
        .collect();
    tail.sort_by_key(|&(k, _)| k);
    tail.dedup_by(|next, kept| {
        if next.0 == kept.0 {
            kept.1 += next.1;
            true
        } else {
            false
        }
    });
    if tail.len() < MIN_DISTINCT_DEGREES {
        return Err(Error::Domain(format!(
            "need at least {MIN_DISTINCT_DEGREES} distinct degrees >= {k_min}, found {}",
            tail.len()
        )));
    }

    let total: f64 = tail.iter().map(|p| p.1).sum();
    let m = k_min as f64;
    let score = |alpha: f64| {
        let data: f64 = tail
            .iter()
            .map(|&(k, w)| w * digamma(k as f64 + alpha))
            .sum();
        total * (1.0 / (alpha - 1.0) + digamma(m + alpha - 1.0)) - data
    };

    // The score tends to +inf as alpha -> 1 and is decreasing.
    let mut lo = 1.0 + 1e-9;
    let mut hi = 2.0;
    while score(hi) > 0.0 {
        hi = 1.0 + 2.0 * (hi - 1.0);
        if hi > 1e6 {
            return Err(Error::Domain("likelihood has no finite maximum".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let alpha = 0.5 * (lo + hi);

    let curvature: f64 = total
        * (trigamma(m + alpha - 1.0) - 1.0 / ((alpha - 1.0) * (alpha - 1.0)))
        - tail
            .iter()
            .map(|&(k, w)| w * trigamma(k as f64 + alpha))
            .sum::<f64>();
    let std_error = if curvature < 0.0 {
        (-1.0 / curvature).sqrt()
    } else {
        f64::NAN
    };

    Ok(ExponentFit {
        k_min,
        exponent: alpha,
        std_error,
        method: FitMethod::DiscreteMle,
        ccdf_exponent: 1.0 - ccdf_slope(&tail, total),
        tail_size: total,
    })
}

fn ccdf_slope(tail: &[(u64, f64)], total: f64) -> f64 {
    let mut remaining = total;
    let mut points = Vec::with_capacity(tail.len());
    for &(k, w) in tail {
        points.push(((k as f64).ln(), (remaining / total).ln()));
        remaining -= w;
    }
    ols_slope(&points)
}
