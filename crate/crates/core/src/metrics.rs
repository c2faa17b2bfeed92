//! Validation statistics: credibility-band coverage of observations, sparse
//! survey capture, and Pearson correlation with an exact t-based p-value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DailySeries, SurveySeries};
use crate::engine::ChannelBand;
use crate::error::{Error, Result};

/// Fraction of days on which the observation lies inside [lo, hi]
/// (inclusive at both endpoints). Series and band must cover the same dates.
pub fn coverage_fraction(obs: &DailySeries, band: &ChannelBand) -> Result<f64> {
    if obs.start != band.start || obs.len() != band.len() {
        return Err(Error::Misaligned(format!(
            "observation ({} x{}) and band ({} x{}) cover different dates",
            obs.start,
            obs.len(),
            band.start,
            band.len()
        )));
    }
    if obs.is_empty() {
        return Err(Error::Metric("coverage of an empty series".into()));
    }
    let inside = obs
        .values
        .iter()
        .enumerate()
        .filter(|&(k, &v)| band.lo[k] <= v && v <= band.hi[k])
        .count();
    Ok(inside as f64 / obs.len() as f64)
}

/// How many survey points fall inside the band on their date: returns
/// (inside, total). Every survey date must lie within the band's range.
pub fn survey_capture(survey: &SurveySeries, band: &ChannelBand) -> Result<(usize, usize)> {
    let mut inside = 0;
    for &(date, value) in &survey.transformed {
        let k = band.index_of(date).ok_or_else(|| {
            Error::Metric(format!(
                "survey date {date} outside the simulated window {}..{}",
                band.start,
                band.end().map(|d| d.to_string()).unwrap_or_default()
            ))
        })?;
        if band.lo[k] <= value && value <= band.hi[k] {
            inside += 1;
        }
    }
    Ok((inside, survey.transformed.len()))
}

fn check_pearson_input(x: &DailySeries, y: &DailySeries) -> Result<usize> {
    if !x.aligned_with(y) {
        return Err(Error::Misaligned(format!(
            "correlation inputs cover different dates: {} x{} vs {} x{}",
            x.start,
            x.len(),
            y.start,
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Metric(format!(
            "correlation needs at least 3 points, got {n}"
        )));
    }
    for (name, s) in [("x", x), ("y", y)] {
        if s.values.iter().all(|&v| v == s.values[0]) {
            return Err(Error::Metric(format!(
                "correlation undefined: series {name} ({}) is constant",
                s.label
            )));
        }
    }
    Ok(n)
}

fn pearson_r(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Sample Pearson correlation with the two-sided p-value from the exact
/// t-transform (t = r sqrt((n-2)/(1-r^2)), n-2 degrees of freedom).
pub fn pearson(x: &DailySeries, y: &DailySeries) -> Result<(f64, f64)> {
    let n = check_pearson_input(x, y)?;
    let r = pearson_r(&x.values, &y.values);
    Ok((r, pearson_p_value(r, n)))
}

/// Two-sided p-value for a sample correlation r at sample size n.
pub fn pearson_p_value(r: f64, n: usize) -> f64 {
    let nu = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t2 = r * r * nu / (1.0 - r * r);
    // P(|T| > t) for T ~ t_nu equals I_{nu/(nu+t^2)}(nu/2, 1/2).
    reg_inc_beta(nu / 2.0, 0.5, nu / (nu + t2))
}

/// Permutation cross-check: p estimated by shuffling y `n_perm` times with
/// the add-one rule. Slower and approximate; kept for auditing the exact
/// t-based value.
pub fn pearson_permutation(
    x: &DailySeries,
    y: &DailySeries,
    n_perm: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let _ = check_pearson_input(x, y)?;
    if n_perm == 0 {
        return Err(Error::Metric("n_perm must be >= 1".into()));
    }
    let r = pearson_r(&x.values, &y.values);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut shuffled = y.values.clone();
    let mut extreme = 0usize;
    for _ in 0..n_perm {
        // Fisher-Yates on the copy.
        for i in (1..shuffled.len()).rev() {
            let j = rng.random_range(0..=i);
            shuffled.swap(i, j);
        }
        if pearson_r(&x.values, &shuffled).abs() >= r.abs() {
            extreme += 1;
        }
    }
    Ok((r, (extreme + 1) as f64 / (n_perm + 1) as f64))
}

/// ln Gamma(x) by the Lanczos approximation (g = 7, 9 coefficients).
fn ln_gamma(x: f64) -> f64 {
    // Published coefficients, kept at full printed precision.
    #[allow(clippy::excessive_precision)]
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
        let pi = std::f64::consts::PI;
        pi.ln() - (pi * x).sin().abs().ln() - ln_gamma(1.0 - x)
    } else {
        let z = x - 1.0;
        let mut sum = COEF[0];
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            sum += c / (z + i as f64);
        }
        let t = z + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + sum.ln()
    }
}

/// Continued-fraction core of the incomplete beta (modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 3e-16;
    const FPMIN: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
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

/// Regularized incomplete beta I_x(a, b).
pub(crate) fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * betacf(a, b, x) / a
    } else {
        1.0 - front * betacf(b, a, 1.0 - x) / b
    }
}

/// The numbers the validation run reports. `pearson_*` refer to the raw
/// mean-behaviour channel against the reproduction number; the
/// `_normalized` pair uses the normalized behaviour channel instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub coverage: f64,
    pub survey_k: usize,
    pub survey_n: usize,
    pub pearson_r: f64,
    pub pearson_p: f64,
    pub pearson_r_normalized: f64,
    pub pearson_p_normalized: f64,
    pub window: String,
    pub config_hash: String,
}
