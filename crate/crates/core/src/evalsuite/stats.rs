//! Summary statistics and Welch's unequal-variance t-test.
//!
//! The Student-t tail is evaluated through the regularized incomplete beta
//! function, computed with a Lentz continued fraction and a Lanczos
//! log-gamma. No statistics crate is involved.

use crate::error::{Error, Result};

/// Mean, unbiased standard deviation and size of a sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    /// Uses the `n - 1` denominator.
    pub std: f64,
    pub n: usize,
}

impl SummaryStats {
    pub fn new(mean: f64, std: f64, n: usize) -> Result<Self> {
        if !mean.is_finite() || !std.is_finite() || std < 0.0 {
            return Err(Error::Domain(format!(
                "summary statistics need a finite mean and std >= 0, got ({mean}, {std})"
            )));
        }
        if n == 0 {
            return Err(Error::Domain("summary statistics need n >= 1".into()));
        }
        Ok(Self { mean, std, n })
    }

    /// Summarizes raw values. A single value has standard deviation 0.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("cannot summarize an empty sample".into()));
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Self::new(mean, std, n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    /// Two-tailed, in `(0, 1]`.
    pub p_value: f64,
}

/// Two-tailed Welch t-test with Welch–Satterthwaite degrees of freedom.
///
/// When both standard deviations are zero the test is degenerate: equal
/// means give `t = 0, p = 1` by convention, unequal means are a domain error.
pub fn welch_ttest(a: SummaryStats, b: SummaryStats) -> Result<TTestResult> {
    if a.n < 2 || b.n < 2 {
        return Err(Error::Domain(format!(
            "t-test needs n >= 2 in both groups, got {} and {}",
            a.n, b.n
        )));
    }
    let va = a.std * a.std / a.n as f64;
    let vb = b.std * b.std / b.n as f64;
    let se2 = va + vb;
    if se2 == 0.0 {
        if a.mean == b.mean {
            return Ok(TTestResult {
                t_statistic: 0.0,
                degrees_of_freedom: (a.n + b.n - 2) as f64,
                p_value: 1.0,
            });
        }
        return Err(Error::Domain(
            "both groups have zero variance but different means".into(),
        ));
    }
    let t = (a.mean - b.mean) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.n - 1) as f64 + vb * vb / (b.n - 1) as f64);
    let p = student_t_two_tailed(t, df)?.max(f64::MIN_POSITIVE);
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p.min(1.0),
    })
}

/// `P(|T| >= |t|)` for a Student-t variable with `df` degrees of freedom.
pub fn student_t_two_tailed(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) || t.is_nan() {
        return Err(Error::Domain(format!("invalid t-distribution query t={t}, df={df}")));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    reg_incomplete_beta(df / (df + t * t), 0.5 * df, 0.5)
}

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection keeps the series in its accurate range
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn reg_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "incomplete beta outside its domain: x={x}, a={a}, b={b}"
        )));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // the fraction converges quickly only on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_fraction(x, a, b)? / a)
    } else {
        Ok(1.0 - front * beta_fraction(1.0 - x, b, a)? / b)
    }
}

fn beta_fraction(x: f64, a: f64, b: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 10_000;
    let guard = |v: f64| if v.abs() < TINY { TINY } else { v };

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let even = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + even * d);
        c = guard(1.0 + even / c);
        h *= d * c;
        let odd = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + odd * d);
        c = guard(1.0 + odd / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::Numeric(format!(
        "incomplete beta continued fraction did not converge for x={x}, a={a}, b={b}"
    )))
}
