//! Spectral analysis of correlation matrices against the Marchenko-Pastur
//! benchmark, and removal of the market mode by regression on the top
//! eigen-portfolio.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corrmat::{pearson_matrix, CorrKind, CorrMatrix};
use crate::error::{Error, Result};
use crate::linalg::{dot, jacobi_eigen, mean, SymMatrix};
use crate::series::Panel;

/// Eigenpairs sorted by descending eigenvalue.
///
/// Each eigenvector has a nonnegative component sum; when the sum vanishes the
/// first nonzero component is positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub kind: CorrKind,
    pub t_pts: usize,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `max_k |(M v - λ v)_k|` for eigenpair `i`.
    pub fn residual(&self, m: &SymMatrix, i: usize) -> f64 {
        let v = &self.eigenvectors[i];
        m.mul_vec(v)
            .iter()
            .zip(v)
            .map(|(mv, x)| (mv - self.eigenvalues[i] * x).abs())
            .fold(0.0, f64::max)
    }

    /// `max_{i,j} |v_i·v_j - δ_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = dot(&self.eigenvectors[i], &self.eigenvectors[j]);
                worst = worst.max((d - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }
}

fn orient(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let flip = if sum.abs() > 1e-12 * scale {
        sum < 0.0
    } else {
        v.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0)
    };
    if flip {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Full symmetric eigendecomposition of a raw matrix.
pub fn eigen_sym_matrix(m: &SymMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    m.check_symmetric(1e-10)?;
    let raw = jacobi_eigen(m);
    let mut order: Vec<usize> = (0..m.dim()).collect();
    order.sort_by(|&a, &b| raw.values[b].total_cmp(&raw.values[a]));
    let values = order.iter().map(|&k| raw.values[k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut v = raw.vectors[k].clone();
            orient(&mut v);
            v
        })
        .collect();
    Ok((values, vectors))
}

pub fn eigen_sym(m: &CorrMatrix) -> Result<SpectralDecomposition> {
    let (eigenvalues, eigenvectors) = eigen_sym_matrix(&m.values)?;
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        labels: m.labels.clone(),
        kind: m.kind,
        t_pts: m.t_pts,
    })
}

/// Marchenko-Pastur law for `I` series of length `T`, `Q = T / I`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpLaw {
    pub q_ratio: f64,
    pub sigma2: f64,
    pub lower: f64,
    pub upper: f64,
}

impl MpLaw {
    pub fn from_ratio(q_ratio: f64, sigma2: f64) -> Result<Self> {
        if !(q_ratio > 1.0) {
            return Err(Error::InvalidInput(format!("Q = {q_ratio} must exceed 1")));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidInput("sigma² must be positive".into()));
        }
        let r = (1.0 / q_ratio).sqrt();
        Ok(Self {
            q_ratio,
            sigma2,
            lower: sigma2 * (1.0 + 1.0 / q_ratio - 2.0 * r),
            upper: sigma2 * (1.0 + 1.0 / q_ratio + 2.0 * r),
        })
    }

    pub fn density(&self, lambda: f64) -> f64 {
        if lambda <= self.lower || lambda >= self.upper || lambda <= 0.0 {
            return 0.0;
        }
        self.q_ratio / (2.0 * std::f64::consts::PI * self.sigma2)
            * ((self.upper - lambda) * (lambda - self.lower)).sqrt()
            / lambda
    }
}

pub fn mp_law(t_pts: usize, n_series: usize, sigma2: f64) -> Result<MpLaw> {
    if n_series == 0 {
        return Err(Error::InvalidInput("no series".into()));
    }
    MpLaw::from_ratio(t_pts as f64 / n_series as f64, sigma2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutlierCount {
    pub n_above: usize,
    pub n_below: usize,
    /// `λ_1 / λ+`.
    pub lambda1_ratio: f64,
}

pub fn count_outliers(spec: &SpectralDecomposition, law: &MpLaw) -> OutlierCount {
    OutlierCount {
        n_above: spec.eigenvalues.iter().filter(|&&l| l > law.upper).count(),
        n_below: spec.eigenvalues.iter().filter(|&&l| l < law.lower).count(),
        lambda1_ratio: spec.eigenvalues.first().map_or(f64::NAN, |l| l / law.upper),
    }
}

/// JSON spectrum report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub mp_bounds: (f64, f64),
    pub n_above: usize,
    pub n_below: usize,
    pub lambda1_ratio: f64,
    pub t_pts: usize,
    pub n_series: usize,
    /// `"standard"` for Pearson matrices, `"heuristic"` for detrended ones,
    /// whose entries are not sample correlations of a Wishart ensemble.
    pub mp_comparison: String,
}

impl SpectrumReport {
    pub fn new(spec: &SpectralDecomposition, law: &MpLaw) -> Self {
        let c = count_outliers(spec, law);
        Self {
            eigenvalues: spec.eigenvalues.clone(),
            mp_bounds: (law.lower, law.upper),
            n_above: c.n_above,
            n_below: c.n_below,
            lambda1_ratio: c.lambda1_ratio,
            t_pts: spec.t_pts,
            n_series: spec.dim(),
            mp_comparison: match spec.kind {
                CorrKind::Pearson => "standard",
                CorrKind::Detrended { .. } => "heuristic",
            }
            .into(),
        }
    }
}

/// `label,component` CSV for one eigenvector.
pub fn write_eigenvector_csv<W: Write>(labels: &[String], v: &[f64], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["label", "component"])?;
    for (l, x) in labels.iter().zip(v) {
        w.write_record([l.clone(), x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Panel with the market factor regressed out of every column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilteredPanel {
    pub residuals: Panel,
    /// `(a, b)` per column: `c(k) = a + b Z_1(k) + ε(k)`.
    pub regression: Vec<(f64, f64)>,
    /// `Z_1(k) = Σ_m v_1m c^(m)(k)`.
    pub z1: Vec<f64>,
}

fn centered_cov(a: &[f64], b: &[f64], ma: f64, mb: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0)
}

/// Regresses each column on the top eigen-portfolio `Z_1 = Σ v1_m c^(m)`.
pub fn filter_market_mode(panel: &Panel, v1: &[f64]) -> Result<FilteredPanel> {
    if v1.len() != panel.width() {
        return Err(Error::InvalidInput(format!(
            "eigenvector has {} components for {} columns",
            v1.len(),
            panel.width()
        )));
    }
    let t = panel.len();
    let mut z1 = vec![0.0; t];
    for (col, &w) in panel.columns().iter().zip(v1) {
        z1.iter_mut().zip(col).for_each(|(z, c)| *z += w * c);
    }
    let mz = mean(&z1);
    let var_z = centered_cov(&z1, &z1, mz, mz);
    if !(var_z > 0.0) {
        return Err(Error::ZeroVariance("Z_1".into()));
    }
    let mut regression = Vec::with_capacity(panel.width());
    let mut residuals = Vec::with_capacity(panel.width());
    for col in panel.columns() {
        let mut a = 0.0;
        let mut b = 0.0;
        let mut eps = col.clone();
        // A second pass refits the first pass's residuals to remove rounding.
        for _ in 0..2 {
            let me = mean(&eps);
            let db = centered_cov(&eps, &z1, me, mz) / var_z;
            let da = me - db * mz;
            eps.iter_mut().zip(&z1).for_each(|(e, z)| *e -= da + db * z);
            a += da;
            b += db;
        }
        regression.push((a, b));
        residuals.push(eps);
    }
    Ok(FilteredPanel {
        residuals: Panel::new(
            panel.labels().to_vec(),
            residuals,
            panel.dt(),
            panel.t0(),
            panel.observable(),
        )?,
        regression,
        z1,
    })
}

impl FilteredPanel {
    /// Sample covariance of every residual column with `Z_1`.
    pub fn factor_covariances(&self) -> Vec<f64> {
        let mz = mean(&self.z1);
        self.residuals
            .columns()
            .iter()
            .map(|e| centered_cov(e, &self.z1, mean(e), mz))
            .collect()
    }

    /// Eigen-analysis of the Pearson matrix of the residuals (`C'`).
    pub fn spectrum(&self) -> Result<SpectralDecomposition> {
        eigen_sym(&pearson_matrix(&self.residuals)?)
    }
}
