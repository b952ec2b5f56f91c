//! Seeded synthetic generators. Every output is a pure function of its
//! parameters and seed; panel columns draw from independent substreams.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mstnet::{Edge, Tree};
use crate::rng::{mix64, CounterRng};
use crate::series::{Observable, Panel, Series};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    GaussianIid,
    Fgn { hurst: f64 },
    OneFactor { loading: f64, sigma: f64 },
    Pareto { gamma: f64 },
    Cascade { depth: u32 },
    PaTree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub seed: u64,
    pub t_pts: usize,
    /// Number of columns (nodes for `pa_tree`).
    pub n_series: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Generated {
    Panel(Panel),
    Tree(Tree),
}

/// Seed for column `i` of a multi-column draw from a single-series generator.
pub fn column_seed(seed: u64, i: usize) -> u64 {
    mix64(seed ^ mix64(i as u64))
}

fn labels(n: usize) -> Vec<String> {
    let w = n.saturating_sub(1).to_string().len();
    (0..n).map(|i| format!("c{i:0w$}")).collect()
}

fn synthetic_panel(columns: Vec<Vec<f64>>) -> Panel {
    Panel::new(labels(columns.len()), columns, 1, 0, Observable::Other)
        .expect("generated columns are aligned")
}

impl GeneratorSpec {
    pub fn generate(&self) -> Result<Generated> {
        let (t, n, seed) = (self.t_pts, self.n_series, self.seed);
        if n == 0 {
            return Err(Error::InvalidInput("n_series must be positive".into()));
        }
        let per_column = |f: &(dyn Fn(u64) -> Result<Vec<f64>> + Sync)| -> Result<Generated> {
            let cols = (0..n)
                .into_par_iter()
                .map(|i| f(column_seed(seed, i)))
                .collect::<Result<Vec<_>>>()?;
            Ok(Generated::Panel(synthetic_panel(cols)))
        };
        match self.kind {
            GeneratorKind::GaussianIid => Ok(Generated::Panel(gaussian_iid(t, n, seed))),
            GeneratorKind::OneFactor { loading, sigma } => {
                check_loading(loading, sigma)?;
                Ok(Generated::Panel(one_factor(t, n, loading, sigma, seed)))
            }
            GeneratorKind::Fgn { hurst } => per_column(&|s| fgn(t, hurst, s).map(|x| x.values)),
            GeneratorKind::Pareto { gamma } => per_column(&|s| pareto(t, gamma, s).map(|x| x.values)),
            GeneratorKind::Cascade { depth } => per_column(&|s| cascade(t, depth, s).map(|x| x.values)),
            GeneratorKind::PaTree => pa_tree(n, seed).map(Generated::Tree),
        }
    }
}

/// `T x I` panel of independent standard normals.
pub fn gaussian_iid(t: usize, n: usize, seed: u64) -> Panel {
    let cols = (0..n)
        .into_par_iter()
        .map(|i| CounterRng::with_stream(seed, i as u64).normals(t))
        .collect();
    synthetic_panel(cols)
}

fn check_loading(b: f64, sigma: f64) -> Result<()> {
    if !(0.0..1.0).contains(&b) || !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "one-factor needs loading in [0, 1) and sigma > 0, got b = {b}, sigma = {sigma}"
        )));
    }
    Ok(())
}

/// Columns `b Z + σ ε_i` with a shared standard-normal factor `Z`.
///
/// # Panics
/// If `b` is outside `[0, 1)` or `σ` is not positive.
pub fn one_factor(t: usize, n: usize, b: f64, sigma: f64, seed: u64) -> Panel {
    check_loading(b, sigma).unwrap();
    let z = CounterRng::with_stream(seed, 0).normals(t);
    let cols = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut eps = CounterRng::with_stream(seed, i as u64 + 1);
            z.iter().map(|zv| b * zv + sigma * eps.next_normal()).collect()
        })
        .collect();
    synthetic_panel(cols)
}

fn fgn_autocov(k: f64, h: f64) -> f64 {
    let e = 2.0 * h;
    0.5 * ((k + 1.0).abs().powf(e) - 2.0 * k.abs().powf(e) + (k - 1.0).abs().powf(e))
}

/// Unit-variance fractional Gaussian noise by circulant embedding: the
/// autocovariance is embedded in a circulant of size `2T`, whose FFT gives
/// the exact discrete spectrum (`~ f^{1-2H}` at low frequency). Complex
/// Gaussian amplitudes with that spectrum and random phases are
/// transformed back.
pub fn fgn(t: usize, h: f64, seed: u64) -> Result<Series> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidInput(format!("Hurst exponent {h} not in (0, 1)")));
    }
    if t < 2 || !t.is_power_of_two() {
        return Err(Error::InvalidInput(format!("length {t} is not a power of two")));
    }
    let m = 2 * t;
    let mut c: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let k = if j <= t { j } else { m - j };
            Complex::new(fgn_autocov(k as f64, h), 0.0)
        })
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(m);
    fft.process(&mut c);
    let lambda: Vec<f64> = c.iter().map(|v| v.re.max(0.0)).collect();

    let mut rng = CounterRng::new(seed);
    let mf = m as f64;
    let mut w = vec![Complex::new(0.0, 0.0); m];
    w[0] = Complex::new((lambda[0] / mf).sqrt() * rng.next_normal(), 0.0);
    w[t] = Complex::new((lambda[t] / mf).sqrt() * rng.next_normal(), 0.0);
    for k in 1..t {
        let a = (lambda[k] / (2.0 * mf)).sqrt();
        let re = a * rng.next_normal();
        let im = a * rng.next_normal();
        w[k] = Complex::new(re, im);
        w[m - k] = Complex::new(re, -im);
    }
    fft.process(&mut w);
    Ok(Series::from_values(w[..t].iter().map(|v| v.re).collect()))
}

/// Inverse-CDF Pareto samples `u^{-1/γ}` with `P(X > x) = x^{-γ}`, `x >= 1`.
pub fn pareto(t: usize, gamma: f64, seed: u64) -> Result<Series> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!(
            "tail exponent {gamma} must be positive"
        )));
    }
    let mut rng = CounterRng::new(seed);
    Ok(Series::from_values(
        (0..t).map(|_| rng.next_f64().powf(-1.0 / gamma)).collect(),
    ))
}

/// Mass split at every cascade level.
pub const CASCADE_WEIGHT: f64 = 0.3;

/// Binomial multiplicative cascade: unit mass is halved `depth` times, each
/// split sending `p` to a randomly chosen half and `1 - p` to the other.
/// Returns the first `T` of the `2^depth` cell masses scaled to unit mean.
pub fn cascade(t: usize, depth: u32, seed: u64) -> Result<Series> {
    if depth == 0 || depth > 30 || t == 0 || t > 1usize << depth {
        return Err(Error::InvalidInput(format!(
            "cascade needs 1 <= depth <= 30 and 0 < T <= 2^depth, got depth {depth}, T {t}"
        )));
    }
    let mut rng = CounterRng::new(seed);
    let mut mass = vec![1.0f64];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(2 * mass.len());
        for &v in &mass {
            let (a, b) = if rng.next_u64() >> 63 == 0 {
                (CASCADE_WEIGHT, 1.0 - CASCADE_WEIGHT)
            } else {
                (1.0 - CASCADE_WEIGHT, CASCADE_WEIGHT)
            };
            next.push(v * a);
            next.push(v * b);
        }
        mass = next;
    }
    let scale = mass.len() as f64;
    mass.truncate(t);
    Ok(Series::from_values(mass.into_iter().map(|v| v * scale).collect()))
}

/// Preferential-attachment tree: node `k` joins one existing node chosen
/// with probability proportional to its degree. Edges carry unit distance.
pub fn pa_tree(n: usize, seed: u64) -> Result<Tree> {
    if n < 2 {
        return Err(Error::InvalidInput("a tree needs at least two nodes".into()));
    }
    let mut rng = CounterRng::new(seed);
    // Every edge contributes both endpoints, so a uniform pick is degree-weighted.
    let mut ends = vec![0usize, 1];
    let mut edges = vec![Edge {
        src: 0,
        dst: 1,
        distance: 1.0,
    }];
    for k in 2..n {
        let target = ends[rng.below(ends.len() as u64) as usize];
        edges.push(Edge {
            src: target,
            dst: k,
            distance: 1.0,
        });
        ends.push(target);
        ends.push(k);
    }
    Ok(Tree {
        labels: labels(n),
        edges,
        sizes: vec![1.0; n],
        communities: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diststats::acf;
    use crate::linalg::{mean, sample_variance};
    use crate::mstnet::degrees;

    #[test]
    fn gaussian_iid_moments_and_determinism() {
        let t = 5_000;
        let p = gaussian_iid(t, 20, 1);
        for c in p.columns() {
            assert!(mean(c).abs() < 4.0 / (t as f64).sqrt());
            assert!((sample_variance(c) - 1.0).abs() < 0.1);
        }
        assert_eq!(p, gaussian_iid(t, 20, 1));
        assert_ne!(p, gaussian_iid(t, 20, 2));
        // Column streams do not depend on panel width.
        assert_eq!(gaussian_iid(t, 3, 1).columns()[2], p.columns()[2]);
    }

    #[test]
    fn one_factor_zero_loading_is_scaled_noise() {
        let p = one_factor(100, 3, 0.0, 2.0, 4);
        for (i, c) in p.columns().iter().enumerate() {
            let e = CounterRng::with_stream(4, i as u64 + 1).normals(100);
            assert!(c.iter().zip(&e).all(|(a, b)| *a == 2.0 * b));
        }
    }

    #[test]
    fn one_factor_rejects_loading() {
        assert!(std::panic::catch_unwind(|| one_factor(10, 2, 1.0, 1.0, 0)).is_err());
        let spec = GeneratorSpec {
            kind: GeneratorKind::OneFactor {
                loading: -0.1,
                sigma: 1.0,
            },
            seed: 0,
            t_pts: 10,
            n_series: 2,
        };
        assert!(spec.generate().is_err());
    }

    #[test]
    fn fgn_white_noise_limit() {
        let x = fgn(1 << 16, 0.5, 3).unwrap().values;
        let a = acf(&x, 5).unwrap();
        assert!(a.values[0].abs() < 3.0 / (x.len() as f64).sqrt());
        assert!((sample_variance(&x) - 1.0).abs() < 0.05);
    }

    #[test]
    fn fgn_lag_one_correlation() {
        // Lag-one autocorrelation of fGn is 2^{2H-1} - 1.
        let x = fgn(1 << 16, 0.7, 5).unwrap().values;
        let a = acf(&x, 5).unwrap();
        let expect = 2f64.powf(0.4) - 1.0;
        assert!((a.values[0] - expect).abs() < 0.02, "{}", a.values[0]);
        assert!((sample_variance(&x) - 1.0).abs() < 0.05);
    }

    #[test]
    fn fgn_preconditions() {
        assert!(fgn(1000, 0.5, 0).is_err());
        assert!(fgn(1024, 1.0, 0).is_err());
        assert!(fgn(1024, 0.0, 0).is_err());
        assert_eq!(fgn(256, 0.3, 9).unwrap(), fgn(256, 0.3, 9).unwrap());
    }

    #[test]
    fn pareto_support_and_median() {
        let x = pareto(100_000, 1.5, 6).unwrap().values;
        assert!(x.iter().all(|&v| v >= 1.0));
        let above = x.iter().filter(|&&v| v > 2f64.powf(1.0 / 1.5)).count();
        assert!((above as f64 / x.len() as f64 - 0.5).abs() < 0.01);
        assert!(pareto(10, 0.0, 1).is_err());
    }

    #[test]
    fn cascade_conserves_mass() {
        let x = cascade(1 << 10, 10, 7).unwrap().values;
        assert!((mean(&x) - 1.0).abs() < 1e-12);
        let distinct: std::collections::BTreeSet<i64> =
            x.iter().map(|v| (v.ln() * 1e6).round() as i64).collect();
        assert_eq!(distinct.len(), 11);
        assert_eq!(cascade(100, 10, 7).unwrap().values, x[..100].to_vec());
        assert!(cascade(2048, 10, 7).is_err());
    }

    #[test]
    fn pa_tree_hubs() {
        let t = pa_tree(500, 8).unwrap();
        assert!(t.is_spanning_tree());
        let d = degrees(&t);
        let mut sorted = d.degrees.clone();
        sorted.sort_unstable();
        let median = sorted[sorted.len() / 2];
        assert!(*sorted.last().unwrap() > 3 * median);
        assert_eq!(d.total(), 2 * 499);
    }

    #[test]
    fn spec_round_trip() {
        let spec = GeneratorSpec {
            kind: GeneratorKind::Fgn { hurst: 0.7 },
            seed: 42,
            t_pts: 256,
            n_series: 3,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"fgn\""));
        assert_eq!(serde_json::from_str::<GeneratorSpec>(&json).unwrap(), spec);
        match spec.generate().unwrap() {
            Generated::Panel(p) => {
                assert_eq!(p.width(), 3);
                assert_eq!(p.columns()[1], fgn(256, 0.7, column_seed(42, 1)).unwrap().values);
            }
            Generated::Tree(_) => panic!("expected a panel"),
        }
    }
}
