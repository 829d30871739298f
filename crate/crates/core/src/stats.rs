//! Paired t-test on volume series and the Student-t distribution behind it.
//!
//! The t CDF is evaluated through the regularized incomplete beta function
//! (continued fraction, modified Lentz), the quantile by bisection on the CDF.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Continued-fraction iteration cap for the incomplete beta function.
pub const BETA_MAX_ITERATIONS: usize = 300;
/// Relative convergence tolerance of the continued fraction.
pub const BETA_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooFewSamples(usize),
    #[error("degrees of freedom must be at least 1")]
    ZeroDegreesOfFreedom,
    #[error("probability {0} outside (0, 1)")]
    ProbabilityOutOfRange(f64),
}

/// `ln Γ(z)` for `z > 0` (Lanczos, g = 7, nine terms).
pub fn ln_gamma(z: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if z < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// Regularized incomplete beta `I_x(a, b)`, taking both `x` and `1 − x` so
/// callers can supply the complement without cancellation.
fn inc_beta_split(x: f64, y: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * y.ln() - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b));
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(y, b, a) / b
    }
}

/// Regularized incomplete beta `I_x(a, b)` for `0 ≤ x ≤ 1`.
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    inc_beta_split(x, 1.0 - x, a, b)
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_MAX_ITERATIONS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < BETA_TOLERANCE {
            break;
        }
    }
    h
}

/// Student-t cumulative distribution function.
pub fn t_cdf(t: f64, df: usize) -> Result<f64, StatsError> {
    if df == 0 {
        return Err(StatsError::ZeroDegreesOfFreedom);
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 1.0 } else { 0.0 });
    }
    let v = df as f64;
    let denom = v + t * t;
    // P(T > |t|) = ½·I_{v/(v+t²)}(v/2, ½)
    let tail = 0.5 * inc_beta_split(v / denom, t * t / denom, v / 2.0, 0.5);
    Ok(if t > 0.0 { 1.0 - tail } else { tail })
}

/// Inverse of [`t_cdf`] by bracketed bisection.
pub fn t_quantile(p: f64, df: usize) -> Result<f64, StatsError> {
    if df == 0 {
        return Err(StatsError::ZeroDegreesOfFreedom);
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::ProbabilityOutOfRange(p));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    // Solve for the upper-half quantile and mirror.
    let q = if p > 0.5 { p } else { 1.0 - p };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while t_cdf(hi, df)? < q {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if t_cdf(mid, df)? < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(if p > 0.5 { t } else { -t })
}

/// Arithmetic mean and sample standard deviation (divisor `n − 1`).
pub fn summary(values: &[f64]) -> Result<(f64, f64), StatsError> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    Ok((mean, (ss / (n - 1) as f64).sqrt()))
}

/// Paired comparison of two measurement series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTestReport {
    pub n: usize,
    /// Mean of `a − b`.
    pub mean: f64,
    /// Sample standard deviation of the differences.
    pub std: f64,
    pub sem: f64,
    pub ci95: [f64; 2],
    pub t: f64,
    pub df: usize,
    /// Two-tailed p-value.
    pub p: f64,
}

impl PairedTestReport {
    /// Report from summary statistics of the difference series.
    ///
    /// Zero spread yields `t = 0`, `p = 1` and a degenerate interval at the mean.
    pub fn from_summary(mean: f64, std: f64, n: usize) -> Result<Self, StatsError> {
        if n < 2 {
            return Err(StatsError::TooFewSamples(n));
        }
        let df = n - 1;
        let sem = std / (n as f64).sqrt();
        let (t, p) = if sem > 0.0 {
            let t = mean / sem;
            let p = (2.0 * (1.0 - t_cdf(t.abs(), df)?)).clamp(0.0, 1.0);
            (t, p)
        } else {
            (0.0, 1.0)
        };
        let half = t_quantile(0.975, df)? * sem;
        Ok(Self {
            n,
            mean,
            std,
            sem,
            ci95: [mean - half, mean + half],
            t,
            df,
            p,
        })
    }
}

/// Paired t-test on `a − b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTestReport, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, std) = summary(&diffs)?;
    // Differences identical to machine precision.
    let scale = diffs.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let std = if std <= 4.0 * f64::EPSILON * scale { 0.0 } else { std };
    PairedTestReport::from_summary(mean, std, diffs.len())
}

/// Two-tailed p-value as printed in tables: truncated to three decimals,
/// no leading zero (`0.0943 → ".094"`).
pub fn format_p(p: f64) -> String {
    let truncated = (p * 1000.0).floor() / 1000.0;
    if truncated >= 1.0 {
        return "1.000".to_string();
    }
    let s = format!("{truncated:.3}");
    s.trim_start_matches('0').to_string()
}

pub const TABLE_HEADER: [&str; 8] = ["Methods", "μ", "std.", "SEM", "95% CI of μ diff.", "t", "df", "Signi. (2-tailed)"];

/// Fixed-column text table, one row per labeled report.
pub fn format_table(rows: &[(String, &PairedTestReport)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:>9} {:>9} {:>9} {:>22} {:>7} {:>4} {:>17}",
        TABLE_HEADER[0], TABLE_HEADER[1], TABLE_HEADER[2], TABLE_HEADER[3],
        TABLE_HEADER[4], TABLE_HEADER[5], TABLE_HEADER[6], TABLE_HEADER[7]
    );
    for (label, r) in rows {
        let ci = format!("({:.1}, {:.1})", r.ci95[0], r.ci95[1]);
        let _ = writeln!(
            out,
            "{:<24} {:>9.1} {:>9.1} {:>9.1} {:>22} {:>7.1} {:>4} {:>17}",
            label, r.mean, r.std, r.sem, ci, r.t, r.df, format_p(r.p)
        );
    }
    out
}
