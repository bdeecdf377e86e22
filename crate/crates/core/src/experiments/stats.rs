//! Descriptive aggregates, Spearman rank correlation and the Mann-Whitney
//! U test.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample {0} is empty")]
    Empty(&'static str),
    #[error("samples have different lengths ({0} vs {1})")]
    Length(usize, usize),
    #[error("sample contains a non-finite value")]
    NonFinite,
}

/// Largest per-sample size for which p is computed by full enumeration.
pub const EXACT_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U statistic of the first sample.
    pub u_a: f64,
    pub u_b: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub method: PValueMethod,
}

/// Average ranks (1-based) of `values`.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn check(sample: &[f64], name: &'static str) -> Result<(), StatsError> {
    if sample.is_empty() {
        return Err(StatsError::Empty(name));
    }
    if sample.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Two-sided Mann-Whitney U test with average ranks for ties.
///
/// Exact permutation p-value when both samples have at most
/// [`EXACT_MAX_N`] values; otherwise the tie-corrected normal
/// approximation with a continuity correction of 0.5.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney, StatsError> {
    let method = if a.len().max(b.len()) <= EXACT_MAX_N { PValueMethod::Exact } else { PValueMethod::Normal };
    mann_whitney_u_with(a, b, method)
}

/// [`mann_whitney_u`] with the p-value method forced.
pub fn mann_whitney_u_with(a: &[f64], b: &[f64], method: PValueMethod) -> Result<MannWhitney, StatsError> {
    check(a, "a")?;
    check(b, "b")?;
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let r = ranks(&pooled);
    let rank_sum_a: f64 = r[..na].iter().sum();
    let u_a = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let u_b = (na * nb) as f64 - u_a;

    let p = match method {
        PValueMethod::Exact => exact_p(&r, na, u_a),
        PValueMethod::Normal => normal_p(&pooled, na, nb, u_a),
    };
    Ok(MannWhitney { u_a, u_b, p, method })
}

/// Fraction of all ways to label `na` of the pooled ranks as sample a whose
/// U is at least as far from its mean as the observed one.
fn exact_p(ranks: &[f64], na: usize, u_obs: f64) -> f64 {
    let n = ranks.len();
    let nb = n - na;
    let mean = (na * nb) as f64 / 2.0;
    let offset = (na * (na + 1)) as f64 / 2.0;
    let observed = (u_obs - mean).abs() - 1e-9;
    let (mut extreme, mut total) = (0u64, 0u64);
    // Walk all na-subsets of 0..n in lexicographic order.
    let mut idx: Vec<usize> = (0..na).collect();
    loop {
        let u = idx.iter().map(|&i| ranks[i]).sum::<f64>() - offset;
        total += 1;
        if (u - mean).abs() >= observed {
            extreme += 1;
        }
        let Some(pos) = (0..na).rev().find(|&i| idx[i] != i + n - na) else {
            break;
        };
        idx[pos] += 1;
        for k in pos + 1..na {
            idx[k] = idx[k - 1] + 1;
        }
    }
    extreme as f64 / total as f64
}

fn normal_p(pooled: &[f64], na: usize, nb: usize, u_a: f64) -> f64 {
    let n = (na + nb) as f64;
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let variance = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        return 1.0;
    }
    let mean = (na * nb) as f64 / 2.0;
    let z = ((u_a - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    libm::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Spearman rank correlation (Pearson correlation of average ranks).
/// Returns 0 when either series is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::Length(x.len(), y.len()));
    }
    check(x, "x")?;
    check(y, "y")?;
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (vx * vy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1); 0 for a single run.
    pub std: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
    /// Set when the aggregate rests on one run, so `std` is conventional.
    pub single_run: bool,
}

/// Mean, sample std and linearly interpolated quantiles. The values are
/// sorted first, so the result does not depend on their order.
pub fn aggregate(values: &[f64]) -> Result<Aggregate, StatsError> {
    check(values, "values")?;
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let std = if n > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    Ok(Aggregate {
        n,
        mean,
        std,
        p5: quantile(&v, 0.05),
        p50: quantile(&v, 0.50),
        p95: quantile(&v, 0.95),
        single_run: n == 1,
    })
}

/// Quantile of sorted data, interpolating between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
