//! Distribution and memory diagnostics: empirical CCDFs, power-law and
//! stretched-exponential tail fits, and the autocorrelation function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{linear_fit, mean, sample_variance, LinearFit};

/// Log-log CCDF fits with `R²` below this are flagged as poor power laws.
pub const LINEARITY_R2: f64 = 0.98;
/// Fewest samples a tail fit accepts.
pub const MIN_TAIL: usize = 50;

/// Empirical CCDF on the sorted unique sample values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcdfCurve {
    /// `(x, P(X >= x))`; x is in units of `sigma` when normalized.
    pub points: Vec<(f64, f64)>,
    /// Divisor applied to x (1 when not normalized).
    pub sigma: f64,
    pub n: usize,
}

impl CcdfCurve {
    /// `P(X > x)` from the step function.
    pub fn exceedance(&self, x: f64) -> f64 {
        let k = self.points.partition_point(|p| p.0 <= x);
        self.points.get(k).map_or(0.0, |p| p.1)
    }
}

fn sorted_finite(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn ccdf_sorted(sorted: &[f64], sigma: f64) -> Vec<(f64, f64)> {
    let n = sorted.len() as f64;
    let mut points = Vec::new();
    for (k, &x) in sorted.iter().enumerate() {
        if k == 0 || sorted[k - 1] != x {
            points.push((x / sigma, (sorted.len() - k) as f64 / n));
        }
    }
    points
}

pub fn ccdf(values: &[f64], normalize: bool) -> Result<CcdfCurve> {
    let sorted = sorted_finite(values);
    if sorted.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            have: sorted.len(),
        });
    }
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::Degenerate("all values identical".into()));
    }
    let sigma = if normalize {
        sample_variance(&sorted).sqrt()
    } else {
        1.0
    };
    Ok(CcdfCurve {
        points: ccdf_sorted(&sorted, sigma),
        sigma,
        n: sorted.len(),
    })
}

/// Least-squares slope of `ln P` against `ln x` for points with
/// `x_lo <= x <= x_hi`.
pub fn loglog_slope(curve: &CcdfCurve, x_lo: f64, x_hi: f64) -> Result<LinearFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve
        .points
        .iter()
        .filter(|p| p.0 >= x_lo && p.0 <= x_hi && p.0 > 0.0 && p.1 > 0.0)
        .map(|p| (p.0.ln(), p.1.ln()))
        .unzip();
    linear_fit(&xs, &ys)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    PowerLaw,
    StretchedExp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub kind: TailKind,
    /// γ for power laws, β for stretched exponentials.
    pub exponent: f64,
    /// Fit threshold in units of the sample σ.
    pub x_min: f64,
    pub n_tail: usize,
    /// Slope of the log-log CCDF over the tail.
    pub loglog_slope: f64,
    pub loglog_r2: f64,
    /// Log-log linearity below [`LINEARITY_R2`].
    pub poor_fit: bool,
}

/// Where a tail starts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailThreshold {
    /// Nearest-rank percentile of the sample, in `(0, 100)`.
    Percentile(f64),
    /// Multiple of the sample standard deviation.
    Sigma(f64),
}

impl Default for TailThreshold {
    fn default() -> Self {
        Self::Percentile(90.0)
    }
}

fn threshold_value(sorted: &[f64], sigma: f64, t: TailThreshold) -> Result<f64> {
    match t {
        TailThreshold::Percentile(p) if p > 0.0 && p < 100.0 => {
            let idx = ((p / 100.0 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
            Ok(sorted[idx])
        }
        TailThreshold::Sigma(k) if k.is_finite() => Ok(k * sigma),
        _ => Err(Error::InvalidInput(format!("bad tail threshold {t:?}"))),
    }
}

/// Hill maximum-likelihood estimate `γ = n / Σ ln(x_i / u)` over positive
/// samples above the threshold `u`.
pub fn fit_powerlaw_tail(values: &[f64], threshold: TailThreshold) -> Result<TailFit> {
    let sorted: Vec<f64> = sorted_finite(values).into_iter().filter(|&x| x > 0.0).collect();
    if sorted.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: MIN_TAIL,
            have: sorted.len(),
        });
    }
    let sigma = sample_variance(&sorted).sqrt();
    let u = threshold_value(&sorted, sigma, threshold)?;
    let tail = &sorted[sorted.partition_point(|&x| x <= u)..];
    if tail.len() < MIN_TAIL || !(u > 0.0) {
        return Err(Error::TooFewSamples {
            needed: MIN_TAIL,
            have: tail.len(),
        });
    }
    let log_sum: f64 = tail.iter().map(|x| (x / u).ln()).sum();
    let gamma = tail.len() as f64 / log_sum;
    let curve = ccdf_sorted(tail, 1.0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = curve.iter().map(|p| (p.0.ln(), p.1.ln())).unzip();
    let fit = linear_fit(&xs, &ys)?;
    Ok(TailFit {
        kind: TailKind::PowerLaw,
        exponent: gamma,
        x_min: if sigma > 0.0 { u / sigma } else { f64::NAN },
        n_tail: tail.len(),
        loglog_slope: fit.slope,
        loglog_r2: fit.r2,
        poor_fit: fit.r2 < LINEARITY_R2,
    })
}

/// β from least squares of `ln(-ln P)` against `ln x` on CCDF points with
/// `0 < P < 1` and `x > 0`.
pub fn fit_stretched_exp_curve(points: &[(f64, f64)]) -> Result<LinearFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.0 > 0.0 && p.1 > 0.0 && p.1 < 1.0)
        .map(|p| (p.0.ln(), (-p.1.ln()).ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::Degenerate("no usable CCDF points".into()));
    }
    if ys.iter().all(|&y| y == ys[0]) {
        return Err(Error::Degenerate("CCDF is constant over the tail".into()));
    }
    linear_fit(&xs, &ys)
}

/// Stretched-exponential tail `P(X > x) ~ exp(-(x / x0)^β)` fitted on the
/// full-sample CCDF above the threshold.
pub fn fit_stretched_exp(values: &[f64], threshold: TailThreshold) -> Result<TailFit> {
    let sorted: Vec<f64> = sorted_finite(values).into_iter().filter(|&x| x > 0.0).collect();
    if sorted.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: MIN_TAIL,
            have: sorted.len(),
        });
    }
    let sigma = sample_variance(&sorted).sqrt();
    let u = threshold_value(&sorted, sigma, threshold)?;
    let start = sorted.partition_point(|&x| x <= u);
    let n_tail = sorted.len() - start;
    if n_tail < MIN_TAIL {
        return Err(Error::TooFewSamples {
            needed: MIN_TAIL,
            have: n_tail,
        });
    }
    let scale = if sigma > 0.0 { sigma } else { 1.0 };
    let curve = ccdf_sorted(&sorted, scale);
    let tail: Vec<(f64, f64)> = curve.into_iter().filter(|p| p.0 * scale > u).collect();
    let fit = fit_stretched_exp_curve(&tail)?;
    let ll = {
        let (xs, ys): (Vec<f64>, Vec<f64>) = tail.iter().map(|p| (p.0.ln(), p.1.ln())).unzip();
        linear_fit(&xs, &ys)?
    };
    Ok(TailFit {
        kind: TailKind::StretchedExp,
        exponent: fit.slope,
        x_min: u / scale,
        n_tail,
        loglog_slope: ll.slope,
        loglog_r2: ll.r2,
        poor_fit: fit.r2 < LINEARITY_R2,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcfCurve {
    /// `1..=max_lag`; lag 0 is identically 1.
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
}

/// `A(Δi) = (1/T) Σ_{i=1}^{T-Δi} (x_i - x̄)(x_{i+Δi} - x̄) / σ²` with the
/// biased variance `σ² = (1/T) Σ (x_i - x̄)²`.
pub fn acf(x: &[f64], max_lag: usize) -> Result<AcfCurve> {
    let t = x.len();
    if max_lag == 0 || 4 * max_lag >= t {
        return Err(Error::InvalidInput(format!(
            "max_lag {max_lag} must be in 1..T/4 for T = {t}"
        )));
    }
    let m = mean(x);
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let var = c.iter().map(|v| v * v).sum::<f64>() / t as f64;
    if !(var > 0.0) {
        return Err(Error::ZeroVariance("acf input".into()));
    }
    let values = (1..=max_lag)
        .map(|lag| c.iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / t as f64 / var)
        .collect();
    Ok(AcfCurve {
        lags: (1..=max_lag).collect(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use crate::synthlab;

    #[test]
    fn ccdf_counting() {
        let c = ccdf(&[1.0, 2.0, 3.0, 4.0], false).unwrap();
        assert_eq!(c.exceedance(2.5), 0.5);
        assert_eq!(c.exceedance(0.0), 1.0);
        assert_eq!(c.exceedance(4.0), 0.0);
        assert_eq!(c.points.first().unwrap().1, 1.0);
        assert_eq!(c.points.last().unwrap().1, 0.25);
        assert!(c.points.windows(2).all(|w| w[1].1 <= w[0].1));
        assert!(ccdf(&[2.0, 2.0, 2.0], true).is_err());
        assert!(ccdf(&[2.0], true).is_err());
    }

    #[test]
    fn ccdf_normalizes() {
        let c = ccdf(&[1.0, 3.0], true).unwrap();
        assert!((c.sigma - 2f64.sqrt()).abs() < 1e-15);
        assert!((c.points[1].0 - 3.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pareto_ccdf_slope() {
        let x = synthlab::pareto(100_000, 1.5, 1).unwrap().values;
        let c = ccdf(&x, false).unwrap();
        let lo = 10f64.powf(1.0 / 1.5);
        let fit = loglog_slope(&c, lo, 10.0 * lo).unwrap();
        assert!((fit.slope + 1.5).abs() < 0.1, "slope {}", fit.slope);
    }

    #[test]
    fn hill_on_pareto() {
        let x = synthlab::pareto(100_000, 2.0, 2).unwrap().values;
        let fit = fit_powerlaw_tail(&x, TailThreshold::default()).unwrap();
        assert!((fit.exponent - 2.0).abs() < 0.1, "gamma {}", fit.exponent);
        assert!(!fit.poor_fit);
        assert_eq!(fit.n_tail, 10_000);
    }

    #[test]
    fn hill_is_scale_invariant() {
        let x = synthlab::pareto(5_000, 1.2, 3).unwrap().values;
        let scaled: Vec<f64> = x.iter().map(|v| 37.5 * v).collect();
        for t in [TailThreshold::Percentile(80.0), TailThreshold::Percentile(50.0)] {
            let a = fit_powerlaw_tail(&x, t).unwrap();
            let b = fit_powerlaw_tail(&scaled, t).unwrap();
            assert!((a.exponent - b.exponent).abs() < 1e-9 * a.exponent);
        }
    }

    #[test]
    fn geometric_ladder() {
        // Values 2^k with 2^(10-k) copies: P(X >= 2^k) halves per rung.
        let mut v = Vec::new();
        for k in 0..=10 {
            v.extend(std::iter::repeat_n(2f64.powi(k), 1 << (10 - k)));
        }
        let c = ccdf(&v, false).unwrap();
        let slope = loglog_slope(&c, 1.0, 1024.0).unwrap();
        // P(X >= 2^k) = (2^(11-k) - 1) / (2^11 - 1): slope -1 up to the truncation.
        let fit = loglog_slope(&c, 1.0, 64.0).unwrap();
        assert!((fit.slope + 1.0).abs() < 0.01, "{}", fit.slope);
        assert!(slope.slope < -0.9);
        // Hill on the ladder: closed form n / Σ ln(x/u) with u = 1.
        let tail: Vec<f64> = v.iter().copied().filter(|&x| x > 1.0).collect();
        let expect = tail.len() as f64 / tail.iter().map(|x| x.ln()).sum::<f64>();
        let hill = fit_powerlaw_tail(&v, TailThreshold::Sigma(1.0 / sample_variance(&v).sqrt())).unwrap();
        assert!((hill.exponent - expect).abs() < 1e-12);
    }

    #[test]
    fn gaussian_tail_flagged() {
        let x: Vec<f64> = CounterRng::new(4)
            .normals(100_000)
            .into_iter()
            .map(f64::abs)
            .collect();
        let fit = fit_powerlaw_tail(&x, TailThreshold::default()).unwrap();
        assert!(fit.poor_fit, "r2 {}", fit.loglog_r2);
    }

    #[test]
    fn too_few_tail_samples() {
        let x: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert!(matches!(
            fit_powerlaw_tail(&x, TailThreshold::Percentile(90.0)),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn stretched_exact_grid() {
        for beta in [0.35, 1.0] {
            let pts: Vec<(f64, f64)> = (1..200)
                .map(|k| {
                    let x = 0.05 * k as f64;
                    (x, (-x.powf(beta)).exp())
                })
                .collect();
            let fit = fit_stretched_exp_curve(&pts).unwrap();
            assert!((fit.slope - beta).abs() < 1e-10);
        }
        assert!(fit_stretched_exp_curve(&[(1.0, 0.5), (2.0, 0.5)]).is_err());
    }

    #[test]
    fn stretched_on_weibull() {
        let mut r = CounterRng::new(6);
        let x: Vec<f64> = (0..100_000)
            .map(|_| (-r.next_f64().ln()).powf(1.0 / 0.4))
            .collect();
        let fit = fit_stretched_exp(&x, TailThreshold::default()).unwrap();
        assert!((fit.exponent - 0.4).abs() < 0.05, "beta {}", fit.exponent);
    }

    #[test]
    fn acf_ar1() {
        let mut r = CounterRng::new(7);
        let mut x = vec![0.0; 100_000];
        for i in 1..x.len() {
            x[i] = 0.5 * x[i - 1] + r.next_normal();
        }
        let a = acf(&x, 10).unwrap();
        assert!((a.values[0] - 0.5).abs() < 0.02);
        assert!((a.values[1] - 0.25).abs() < 0.02);
        assert!(a.values.iter().all(|v| v.abs() <= 1.0 + 1e-9));
    }

    #[test]
    fn acf_white_noise_band() {
        let x = CounterRng::new(8).normals(100_000);
        let a = acf(&x, 1_000).unwrap();
        let band = 3.0 / (x.len() as f64).sqrt();
        let inside = a.values.iter().filter(|v| v.abs() < band).count();
        assert!(inside as f64 >= 0.99 * a.values.len() as f64);
    }

    #[test]
    fn acf_errors() {
        assert!(acf(&[1.0; 100], 5).is_err());
        assert!(acf(&[1.0, 2.0, 3.0, 4.0], 1).is_err());
    }

    #[test]
    fn persistent_abs_acf_decays_slower_than_shuffled() {
        let x: Vec<f64> = synthlab::fgn(1 << 14, 0.8, 9)
            .unwrap()
            .values
            .into_iter()
            .map(f64::abs)
            .collect();
        let mut shuffled = x.clone();
        CounterRng::new(10).shuffle(&mut shuffled);
        let a = acf(&x, 100).unwrap();
        let b = acf(&shuffled, 100).unwrap();
        let total = |c: &AcfCurve| c.values.iter().sum::<f64>();
        assert!(
            total(&a) > 0.3 && total(&b).abs() < 0.2,
            "{} {}",
            total(&a),
            total(&b)
        );
        assert!(a.values[..5].iter().zip(&b.values).all(|(p, q)| p > q));
    }
}
