//! Student's t tail probabilities and the one-sided paired t-test.

use alloc::format;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TTestResult {
    pub t_value: f64,
    pub degrees_of_freedom: usize,
    pub p_value_one_sided: f64,
    pub mean_difference: f64,
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = f64::from(m);
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
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = libm::lgamma(a + b) - libm::lgamma(a) - libm::lgamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    let front = libm::exp(ln_front);
    // the continued fraction converges quickly only below the mean
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Upper-tail probability `P(T > t)` for Student's t with `df` degrees of
/// freedom.
pub fn student_t_sf(t: f64, df: usize) -> Result<f64> {
    if df < 1 {
        return Err(Error::Precondition("t distribution needs df >= 1".into()));
    }
    if t.is_nan() {
        return Err(Error::Precondition("t statistic is NaN".into()));
    }
    let v = df as f64;
    // P(|T| > |t|) = I_{v / (v + t^2)}(v/2, 1/2)
    let x = v / (v + t * t);
    let two_sided = regularized_incomplete_beta(v / 2.0, 0.5, x);
    Ok(if t >= 0.0 { 0.5 * two_sided } else { 1.0 - 0.5 * two_sided })
}

/// Tests H1: mean(a - b) > 0 over paired observations.
pub fn paired_t_test_one_sided(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Precondition(format!("paired t-test needs at least 2 pairs, got {n}")));
    }
    let nf = n as f64;
    let mean = a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / nf;
    let ss = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let dev = (x - y) - mean;
            dev * dev
        })
        .sum::<f64>();
    let sd = libm::sqrt(ss / (nf - 1.0));
    let df = n - 1;
    // differences that are equal up to rounding count as zero spread
    let tol = 1e-12 * a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    if sd <= tol {
        if mean.abs() <= tol {
            return Ok(TTestResult {
                t_value: 0.0,
                degrees_of_freedom: df,
                p_value_one_sided: 0.5,
                mean_difference: 0.0,
            });
        }
        return Err(Error::DegenerateVariance(format!(
            "all {n} paired differences equal {mean}; t is unbounded"
        )));
    }
    let t = mean / (sd / libm::sqrt(nf));
    Ok(TTestResult {
        t_value: t,
        degrees_of_freedom: df,
        p_value_one_sided: student_t_sf(t, df)?,
        mean_difference: mean,
    })
}
