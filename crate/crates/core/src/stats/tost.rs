use serde::{Deserialize, Serialize};

use super::special::{t_cdf, t_sf};
use super::StatsError;

/// Outcome of a paired two one-sided tests (TOST) equivalence check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TostResult {
    pub n: usize,
    pub df: f64,
    pub mean_diff: f64,
    pub sd_diff: f64,
    /// `(mean + bound) / se`, tested against the upper tail.
    pub t_lower: f64,
    /// `(mean - bound) / se`, tested against the lower tail.
    pub t_upper: f64,
    pub p_lower: f64,
    pub p_upper: f64,
    /// `max(p_lower, p_upper)`.
    pub p: f64,
    pub bound: f64,
    pub alpha: f64,
    pub equivalent: bool,
}

pub(crate) fn check_bound_alpha(bound: f64, alpha: f64) -> Result<(), StatsError> {
    if !(bound.is_finite() && bound > 0.0) {
        return Err(StatsError::Parameter {
            name: "bound",
            value: bound,
        });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::Parameter {
            name: "alpha",
            value: alpha,
        });
    }
    Ok(())
}

/// Tests whether paired differences are equivalent to zero within
/// `[-bound, +bound]`.
///
/// Both one-sided tests use Student's t with `n - 1` degrees of freedom;
/// equivalence holds when both reject at `alpha`.
pub fn tost_paired(diffs: &[f64], bound: f64, alpha: f64) -> Result<TostResult, StatsError> {
    check_bound_alpha(bound, alpha)?;
    let n = diffs.len();
    if n < 2 {
        return Err(StatsError::InsufficientData { n });
    }
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let ss: f64 = diffs.iter().map(|d| (d - mean).powi(2)).sum();
    let sd = (ss / (nf - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(StatsError::DegenerateVariance { n, mean });
    }
    let se = sd / nf.sqrt();
    let df = nf - 1.0;
    let t_lower = (mean + bound) / se;
    let t_upper = (mean - bound) / se;
    let p_lower = t_sf(t_lower, df);
    let p_upper = t_cdf(t_upper, df);
    let p = p_lower.max(p_upper);
    Ok(TostResult {
        n,
        df,
        mean_diff: mean,
        sd_diff: sd,
        t_lower,
        t_upper,
        p_lower,
        p_upper,
        p,
        bound,
        alpha,
        equivalent: p < alpha,
    })
}
