//! Statistics kernel: clamped log-odds, simple linear regression with
//! Student t inference, BIC-approximated Bayes factors and agreement rates.
//!
//! Bayes factors here come from the BIC approximation
//! `BF_ab ≈ exp((BIC_b - BIC_a) / 2)`, not from sampled posteriors. Signs
//! and Jeffreys bands are meaningful; magnitudes will not match a full
//! Bayesian regression with informative priors.

pub mod special;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("log-odds undefined: both counts are zero")]
    UndefinedLogOdds,
    #[error("regression needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("x and y lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("degenerate predictor: all x values are equal")]
    DegeneratePredictor,
    #[error("non-finite value in regression input")]
    NonFinite,
    #[error("models were fit on different sample sizes ({0} vs {1})")]
    MismatchedN(usize, usize),
    #[error("no shared ids to compare")]
    EmptyIntersection,
    #[error("invalid clamp bounds {0}..{1}")]
    InvalidClamp(f64, f64),
}

/// Proportion bounds applied before taking log-odds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clamp {
    pub low: f64,
    pub high: f64,
}

impl Default for Clamp {
    fn default() -> Self {
        Clamp {
            low: 0.001,
            high: 0.999,
        }
    }
}

impl Clamp {
    pub fn new(low: f64, high: f64) -> Result<Self, StatsError> {
        if !(low > 0.0 && low < high && high < 1.0) {
            return Err(StatsError::InvalidClamp(low, high));
        }
        Ok(Clamp { low, high })
    }

    /// Largest attainable |log-odds|, ln(high / (1 - high)) for the default.
    pub fn cap(&self) -> f64 {
        (self.high / (1.0 - self.high)).ln()
    }
}

/// ln(p / (1 - p)) with p = a / (a + b) clamped to the default bounds.
pub fn log_odds(count_a: u64, count_b: u64) -> Result<f64, StatsError> {
    log_odds_clamped(count_a, count_b, Clamp::default())
}

pub fn log_odds_clamped(count_a: u64, count_b: u64, clamp: Clamp) -> Result<f64, StatsError> {
    let total = count_a + count_b;
    if total == 0 {
        return Err(StatsError::UndefinedLogOdds);
    }
    let p = (count_a as f64 / total as f64).clamp(clamp.low, clamp.high);
    Ok((p / (1.0 - p)).ln())
}

/// Rounds to 3 decimals, the precision biases are reported at.
pub fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub std_error: f64,
    pub t_slope: f64,
    /// Two-sided, Student t with n - 2 degrees of freedom.
    pub p_value: f64,
    pub r2: f64,
    pub n: usize,
    pub residual_sum_squares: f64,
}

/// Least-squares fit of `ys` on `xs` with an intercept.
pub fn ols_fit(xs: &[f64], ys: &[f64]) -> Result<RegressionResult, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(StatsError::TooFewPoints(n));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let nf = n as f64;
    let x_mean = xs.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - x_mean;
        let dy = y - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::DegeneratePredictor);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let r2 = if syy == 0.0 {
        log::warn!("constant response in regression; reporting r2 = 0");
        0.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    let df = nf - 2.0;
    let std_error = (sse / df / sxx).sqrt();
    let (t_slope, p_value) = if std_error > 0.0 {
        let t = slope / std_error;
        (t, special::student_t_two_sided(t, df))
    } else if slope == 0.0 {
        (0.0, 1.0)
    } else {
        // exact fit
        (slope.signum() * f64::INFINITY, 0.0)
    };
    Ok(RegressionResult {
        slope,
        intercept,
        std_error,
        t_slope,
        p_value,
        r2,
        n,
        residual_sum_squares: sse,
    })
}

/// Parameters in each compared model: intercept, slope, noise variance.
pub const BIC_PARAMETERS: f64 = 3.0;

pub fn bic(rss: f64, n: usize) -> f64 {
    let nf = n as f64;
    nf * (rss / nf).ln() + BIC_PARAMETERS * nf.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    A,
    B,
    Neither,
}

/// Jeffreys' evidence bands on |log10 BF|.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    None,
    Substantial,
    Strong,
    VeryStrong,
    Decisive,
}

impl Evidence {
    pub fn from_log10(log10_bf: f64) -> Self {
        let m = log10_bf.abs();
        if m < 0.5 {
            Evidence::None
        } else if m < 1.0 {
            Evidence::Substantial
        } else if m < 1.5 {
            Evidence::Strong
        } else if m < 2.0 {
            Evidence::VeryStrong
        } else {
            Evidence::Decisive
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Evidence::None => "none",
            Evidence::Substantial => "substantial",
            Evidence::Strong => "strong",
            Evidence::VeryStrong => "very strong",
            Evidence::Decisive => "decisive",
        }
    }
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesComparison {
    /// Positive values favour model A.
    pub log10_bf: f64,
    pub winner: Winner,
    pub jeffreys_label: Evidence,
}

/// Compares two regressions of the same response on different predictors.
pub fn bf_bic(model_a: &RegressionResult, model_b: &RegressionResult) -> Result<BayesComparison, StatsError> {
    if model_a.n != model_b.n {
        return Err(StatsError::MismatchedN(model_a.n, model_b.n));
    }
    let bic_a = bic(model_a.residual_sum_squares, model_a.n);
    let bic_b = bic(model_b.residual_sum_squares, model_b.n);
    let log10_bf = if bic_a == bic_b {
        0.0
    } else {
        (bic_b - bic_a) / (2.0 * std::f64::consts::LN_10)
    };
    let winner = if log10_bf > 0.0 {
        Winner::A
    } else if log10_bf < 0.0 {
        Winner::B
    } else {
        Winner::Neither
    };
    Ok(BayesComparison {
        log10_bf,
        winner,
        jeffreys_label: Evidence::from_log10(log10_bf),
    })
}

/// Fraction of shared ids whose frames are identical.
pub fn agreement_rate<K: Ord, V: PartialEq>(a: &BTreeMap<K, V>, b: &BTreeMap<K, V>) -> Result<f64, StatsError> {
    let (shared, equal) = a
        .iter()
        .filter_map(|(k, va)| b.get(k).map(|vb| va == vb))
        .fold((0usize, 0usize), |(s, e), eq| (s + 1, e + eq as usize));
    if shared == 0 {
        return Err(StatsError::EmptyIntersection);
    }
    Ok(equal as f64 / shared as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_odds_examples() {
        assert_eq!(log_odds(5, 5).unwrap(), 0.0);
        assert_eq!(round3(log_odds(0, 40).unwrap()), -6.907);
        assert!((log_odds(3, 1).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert_eq!(log_odds(0, 0), Err(StatsError::UndefinedLogOdds));
        assert!((Clamp::default().cap() - 999f64.ln()).abs() < 1e-12);
        assert!(Clamp::new(0.5, 0.4).is_err());
    }

    #[test]
    fn exact_fit() {
        let r = ols_fit(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-15);
        assert!(r.intercept.abs() < 1e-15);
        assert_eq!(r.r2, 1.0);
        assert_eq!(r.p_value, 0.0);
        assert!(r.t_slope.is_infinite());
    }

    #[test]
    fn zero_covariance_gives_zero_slope() {
        // x symmetric about its mean, y symmetric in x: sum (x - xbar)(y - ybar) = 0
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let ys = [4.0, 1.0, 0.0, 1.0, 4.0];
        let r = ols_fit(&xs, &ys).unwrap();
        assert!(r.slope.abs() < 1e-15);
        assert!(r.r2.abs() < 1e-15);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regression_errors() {
        assert_eq!(ols_fit(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::TooFewPoints(2)));
        assert_eq!(
            ols_fit(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::DegeneratePredictor)
        );
        assert_eq!(
            ols_fit(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(StatsError::LengthMismatch(3, 2))
        );
        let flat = ols_fit(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(flat.r2, 0.0);
        assert_eq!(flat.p_value, 1.0);
    }

    fn with_rss(rss: f64, n: usize) -> RegressionResult {
        RegressionResult {
            slope: 1.0,
            intercept: 0.0,
            std_error: 1.0,
            t_slope: 1.0,
            p_value: 0.5,
            r2: 0.5,
            n,
            residual_sum_squares: rss,
        }
    }

    #[test]
    fn bic_bayes_factor_examples() {
        let same = bf_bic(&with_rss(2.0, 50), &with_rss(2.0, 50)).unwrap();
        assert_eq!(same.log10_bf, 0.0);
        assert_eq!(same.jeffreys_label, Evidence::None);
        assert_eq!(same.winner, Winner::Neither);

        let e2 = std::f64::consts::E.powi(2);
        let c = bf_bic(&with_rss(1.0, 100), &with_rss(e2, 100)).unwrap();
        let want = 100.0 * 2.0 / (2.0 * std::f64::consts::LN_10);
        assert!((c.log10_bf - want).abs() < 1e-9, "{}", c.log10_bf);
        assert!((c.log10_bf - 43.43).abs() < 0.01);
        assert_eq!(c.jeffreys_label, Evidence::Decisive);
        assert_eq!(c.winner, Winner::A);

        assert_eq!(
            bf_bic(&with_rss(1.0, 10), &with_rss(1.0, 11)),
            Err(StatsError::MismatchedN(10, 11))
        );
    }

    #[test]
    fn jeffreys_bands() {
        assert_eq!(Evidence::from_log10(1.2), Evidence::Strong);
        assert_eq!(Evidence::from_log10(-1.2), Evidence::Strong);
        assert_eq!(Evidence::from_log10(0.49), Evidence::None);
        assert_eq!(Evidence::from_log10(0.5), Evidence::Substantial);
        assert_eq!(Evidence::from_log10(1.5), Evidence::VeryStrong);
        assert_eq!(Evidence::from_log10(2.0), Evidence::Decisive);
        assert_eq!(Evidence::from_log10(17.49), Evidence::Decisive);
    }

    #[test]
    fn agreement_examples() {
        let a: BTreeMap<u64, String> = (0..10).map(|i| (i, "NP".to_string())).collect();
        let mut b = a.clone();
        assert_eq!(agreement_rate(&a, &b).unwrap(), 1.0);
        for i in 0..3 {
            b.insert(i, "PP_to".into());
        }
        assert!((agreement_rate(&a, &b).unwrap() - 0.7).abs() < 1e-15);
        let c: BTreeMap<u64, String> = (0..10).map(|i| (i, "SBAR".to_string())).collect();
        assert_eq!(agreement_rate(&a, &c).unwrap(), 0.0);
        let d: BTreeMap<u64, String> = (20..30).map(|i| (i, "NP".to_string())).collect();
        assert_eq!(agreement_rate(&a, &d), Err(StatsError::EmptyIntersection));
    }
}
