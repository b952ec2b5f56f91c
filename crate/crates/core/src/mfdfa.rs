//! Multifractal detrended fluctuation analysis and its cross-correlation
//! generalization.
//!
//! For a scale `s` a series of length `T` is cut into `M_s = floor(T / s)`
//! segments from the left and the same number from the right, `2 M_s` in
//! total. Inside each segment the series is integrated, an order-`m`
//! least-squares polynomial is subtracted from the profile and the residual
//! variance `f²_ZZ(s, ν)` (or covariance `f²_XY(s, ν)` for a pair) is taken.
//! The q-th order fluctuation functions are
//!
//! ```text
//! F_ZZ(q, s) = 1/(2 M_s) Σ_ν [f²_ZZ(s, ν)]^{q/2}
//! F_XY(q, s) = 1/(2 M_s) Σ_ν sign(f²_XY(s, ν)) |f²_XY(s, ν)|^{q/2}
//! ```
//!
//! Grids keep this literal value and also the normalized fluctuation
//! `sign(F) |F|^{1/q}`, which scales as `s^{h(q)}` and is what the Hurst
//! fits use. At `q = 0` the normalized value is the logarithmic average
//! `exp(Σ ln|f²| / (4 M_s))` and the literal value is the mean sign.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, linear_fit};

/// Segments whose detrended variance is this small relative to the raw
/// profile energy are treated as constant.
const DEGENERATE_REL: f64 = 1e-24;
/// Largest fraction of excluded segments for a cell to stay valid.
const MAX_EXCLUDED_FRACTION: f64 = 0.10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetrendConfig {
    /// Polynomial order of the per-segment trend.
    pub order: usize,
    pub q_grid: Vec<f64>,
    pub s_grid: Vec<usize>,
    /// A cell needs at least this many usable segments.
    pub min_valid_segments: usize,
}

impl DetrendConfig {
    /// Order 2, `q = -4..=4` in steps of 0.5 without 0, about 20 log-spaced
    /// scales in `[10, T/5]`.
    pub fn default_for(t_pts: usize) -> Self {
        Self {
            order: 2,
            q_grid: default_q_grid(),
            s_grid: log_scales(10, (t_pts / 5).max(10), 20),
            min_valid_segments: 2,
        }
    }

    pub fn with_q(mut self, q_grid: Vec<f64>) -> Self {
        self.q_grid = q_grid;
        self
    }

    pub fn with_scales(mut self, s_grid: Vec<usize>) -> Self {
        self.s_grid = s_grid;
        self
    }

    pub fn validate(&self, t_pts: usize) -> Result<()> {
        if self.q_grid.is_empty() || self.s_grid.is_empty() {
            return Err(Error::InvalidInput("empty q or s grid".into()));
        }
        if self.q_grid.iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidInput("q values must be finite".into()));
        }
        for &s in &self.s_grid {
            if s < self.order + 2 {
                return Err(Error::InvalidInput(format!(
                    "scale {s} too short for order-{} detrending",
                    self.order
                )));
            }
            if 4 * s > t_pts {
                return Err(Error::InvalidInput(format!(
                    "scale {s} needs at least {} points, series has {t_pts}",
                    4 * s
                )));
            }
        }
        Ok(())
    }
}

pub fn default_q_grid() -> Vec<f64> {
    (-8..=8).filter(|&k| k != 0).map(|k| k as f64 * 0.5).collect()
}

/// Up to `n` distinct integer scales spaced logarithmically in `[lo, hi]`.
pub fn log_scales(lo: usize, hi: usize, n: usize) -> Vec<usize> {
    if n <= 1 || hi <= lo {
        return vec![lo];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp().round() as usize)
        .collect();
    out.dedup();
    out
}

/// Scaling range for Hurst fits: skips the smallest scales, where
/// detrending bias is strongest, and the largest, where few segments remain.
pub fn default_scaling_range(t_pts: usize) -> (usize, usize) {
    (20, (t_pts / 10).max(20))
}

/// Orthonormal polynomial basis of degree `<= order` on `s` equally spaced
/// points of `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct PolyBasis {
    s: usize,
    vectors: Vec<Vec<f64>>,
}

impl PolyBasis {
    pub fn new(s: usize, order: usize) -> Self {
        let u: Vec<f64> = (0..s)
            .map(|i| {
                if s == 1 {
                    0.0
                } else {
                    2.0 * i as f64 / (s - 1) as f64 - 1.0
                }
            })
            .collect();
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
        for k in 0..=order {
            let mut v: Vec<f64> = u.iter().map(|x| x.powi(k as i32)).collect();
            // Two passes of modified Gram-Schmidt.
            for _ in 0..2 {
                for b in &vectors {
                    let c = dot(&v, b);
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let norm = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            vectors.push(v);
        }
        Self { s, vectors }
    }

    pub fn len(&self) -> usize {
        self.s
    }

    pub fn is_empty(&self) -> bool {
        self.s == 0
    }

    /// Replaces `y` by its residual after projecting out the basis.
    pub fn detrend_in_place(&self, y: &mut [f64]) {
        for b in &self.vectors {
            let c = dot(y, b);
            y.iter_mut().zip(b).for_each(|(x, v)| *x -= c * v);
        }
    }
}

/// Segment start offsets: left-anchored family then right-anchored family.
pub fn segment_starts(t_pts: usize, s: usize) -> Vec<usize> {
    let m = t_pts / s;
    (0..m)
        .map(|v| v * s)
        .chain((0..m).map(|v| t_pts - (v + 1) * s))
        .collect()
}

/// Detrended profile residuals of one series at one scale.
#[derive(Clone, Debug)]
pub struct SegmentResiduals {
    pub s: usize,
    /// `2 M_s` concatenated residual blocks of length `s`.
    pub residuals: Vec<f64>,
    /// Residual variance `f²_ZZ(s, ν)` per segment.
    pub f2: Vec<f64>,
    /// Segments whose profile is a polynomial of degree `<= order`.
    pub degenerate: Vec<bool>,
}

impl SegmentResiduals {
    pub fn new(x: &[f64], basis: &PolyBasis) -> Self {
        let s = basis.len();
        let starts = segment_starts(x.len(), s);
        let mut residuals = Vec::with_capacity(starts.len() * s);
        let mut f2 = Vec::with_capacity(starts.len());
        let mut degenerate = Vec::with_capacity(starts.len());
        let mut profile = vec![0.0; s];
        for &start in &starts {
            let mut acc = 0.0;
            for (p, &v) in profile.iter_mut().zip(&x[start..start + s]) {
                acc += v;
                *p = acc;
            }
            let energy = dot(&profile, &profile) / s as f64;
            basis.detrend_in_place(&mut profile);
            let var = dot(&profile, &profile) / s as f64;
            degenerate.push(var == 0.0 || var <= DEGENERATE_REL * energy);
            f2.push(var);
            residuals.extend_from_slice(&profile);
        }
        Self {
            s,
            residuals,
            f2,
            degenerate,
        }
    }

    pub fn segments(&self) -> usize {
        self.f2.len()
    }

    pub fn block(&self, nu: usize) -> &[f64] {
        &self.residuals[nu * self.s..(nu + 1) * self.s]
    }

    /// Detrended covariance `f²_XY(s, ν)` against another series' residuals.
    pub fn cross_f2(&self, other: &SegmentResiduals) -> Vec<f64> {
        debug_assert_eq!(self.s, other.s);
        (0..self.segments())
            .map(|nu| dot(self.block(nu), other.block(nu)) / self.s as f64)
            .collect()
    }
}

/// One `(q, s)` cell of a fluctuation grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Literal q-order mean.
    pub f: f64,
    /// `sign(F) |F|^{1/q}` (log-average at `q = 0`).
    pub f_norm: f64,
    pub used: usize,
    pub excluded: usize,
    pub valid: bool,
}

/// Aggregates per-segment variances (or covariances) into one cell.
/// `degenerate[ν]` marks segments that must be skipped for `q <= 0`.
pub fn aggregate(f2: &[f64], degenerate: &[bool], q: f64, min_valid_segments: usize) -> Cell {
    let total = f2.len();
    let skip_degenerate = q <= 0.0;
    let mut sum = 0.0;
    let mut log_sum = 0.0;
    let mut sign_sum = 0.0;
    let mut used = 0usize;
    for (&v, &deg) in f2.iter().zip(degenerate) {
        if skip_degenerate && (deg || v == 0.0) {
            continue;
        }
        used += 1;
        let sign = if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        };
        if q == 0.0 {
            log_sum += v.abs().ln();
            sign_sum += sign;
        } else {
            sum += sign * v.abs().powf(q / 2.0);
        }
    }
    let excluded = total - used;
    let valid =
        used >= min_valid_segments.max(1) && (excluded as f64) <= MAX_EXCLUDED_FRACTION * total as f64;
    if used == 0 {
        return Cell {
            f: f64::NAN,
            f_norm: f64::NAN,
            used,
            excluded,
            valid: false,
        };
    }
    let n = used as f64;
    let (f, f_norm) = if q == 0.0 {
        let mean_sign = sign_sum / n;
        let sign = if mean_sign < 0.0 { -1.0 } else { 1.0 };
        (mean_sign, sign * (log_sum / (2.0 * n)).exp())
    } else {
        let f = sum / n;
        (f, f.signum() * f.abs().powf(1.0 / q))
    };
    Cell {
        f,
        f_norm,
        used,
        excluded,
        valid,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    AutoXx,
    AutoYy,
    CrossXy,
}

/// `F(q, s)` over a `(q, s)` lattice; `cells[qi][si]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationGrid {
    pub kind: GridKind,
    pub q: Vec<f64>,
    pub s: Vec<usize>,
    pub cells: Vec<Vec<Cell>>,
    /// `2 M_s` per scale.
    pub segments: Vec<usize>,
}

impl FluctuationGrid {
    fn q_index(&self, q: f64) -> Option<usize> {
        self.q.iter().position(|&x| x == q)
    }

    pub fn cell(&self, q: f64, s: usize) -> Option<&Cell> {
        let qi = self.q_index(q)?;
        let si = self.s.iter().position(|&x| x == s)?;
        Some(&self.cells[qi][si])
    }

    /// `segments_used` per scale, i.e. `s -> 2 M_s`.
    pub fn segments_by_scale(&self) -> BTreeMap<usize, usize> {
        self.s
            .iter()
            .copied()
            .zip(self.segments.iter().copied())
            .collect()
    }

    /// CSV with header `q,s,F,F_norm,segments_used,valid`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["q", "s", "F", "F_norm", "segments_used", "valid"])?;
        for (qi, q) in self.q.iter().enumerate() {
            for (si, s) in self.s.iter().enumerate() {
                let c = &self.cells[qi][si];
                w.write_record([
                    q.to_string(),
                    s.to_string(),
                    c.f.to_string(),
                    c.f_norm.to_string(),
                    c.used.to_string(),
                    c.valid.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R, kind: GridKind) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows: Vec<(f64, usize, Cell)> = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let bad = || Error::Parse {
                line,
                reason: "malformed grid row".into(),
            };
            let f = |i: usize| row.get(i).ok_or_else(bad);
            rows.push((
                f(0)?.parse().map_err(|_| bad())?,
                f(1)?.parse().map_err(|_| bad())?,
                Cell {
                    f: f(2)?.parse().map_err(|_| bad())?,
                    f_norm: f(3)?.parse().map_err(|_| bad())?,
                    used: f(4)?.parse().map_err(|_| bad())?,
                    excluded: 0,
                    valid: f(5)?.parse().map_err(|_| bad())?,
                },
            ));
        }
        let mut q: Vec<f64> = Vec::new();
        let mut s: Vec<usize> = Vec::new();
        for (qv, sv, _) in &rows {
            if !q.contains(qv) {
                q.push(*qv);
            }
            if !s.contains(sv) {
                s.push(*sv);
            }
        }
        let mut cells = vec![vec![None; s.len()]; q.len()];
        for (qv, sv, c) in rows {
            let qi = q.iter().position(|&x| x == qv).unwrap();
            let si = s.iter().position(|&x| x == sv).unwrap();
            cells[qi][si] = Some(c);
        }
        let cells = cells
            .into_iter()
            .map(|row| row.into_iter().collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::InvalidInput("grid CSV is not a full lattice".into()))?;
        let segments = (0..s.len())
            .map(|si| cells.iter().map(|r| r[si].used).max().unwrap_or(0))
            .collect();
        Ok(Self {
            kind,
            q,
            s,
            cells,
            segments,
        })
    }
}

/// Residuals of one series for every scale of `cfg`.
pub fn residuals_for(x: &[f64], cfg: &DetrendConfig) -> Vec<SegmentResiduals> {
    cfg.s_grid
        .par_iter()
        .map(|&s| SegmentResiduals::new(x, &PolyBasis::new(s, cfg.order)))
        .collect()
}

fn auto_grid(kind: GridKind, res: &[SegmentResiduals], cfg: &DetrendConfig) -> FluctuationGrid {
    let cells = cfg
        .q_grid
        .iter()
        .map(|&q| {
            res.iter()
                .map(|r| aggregate(&r.f2, &r.degenerate, q, cfg.min_valid_segments))
                .collect()
        })
        .collect();
    FluctuationGrid {
        kind,
        q: cfg.q_grid.clone(),
        s: cfg.s_grid.clone(),
        cells,
        segments: res.iter().map(SegmentResiduals::segments).collect(),
    }
}

fn cross_grid(rx: &[SegmentResiduals], ry: &[SegmentResiduals], cfg: &DetrendConfig) -> FluctuationGrid {
    let per_scale: Vec<(Vec<f64>, Vec<bool>)> = rx
        .iter()
        .zip(ry)
        .map(|(a, b)| {
            let deg = a
                .degenerate
                .iter()
                .zip(&b.degenerate)
                .map(|(p, q)| *p || *q)
                .collect();
            (a.cross_f2(b), deg)
        })
        .collect();
    let cells = cfg
        .q_grid
        .iter()
        .map(|&q| {
            per_scale
                .iter()
                .map(|(f2, deg)| aggregate(f2, deg, q, cfg.min_valid_segments))
                .collect()
        })
        .collect();
    FluctuationGrid {
        kind: GridKind::CrossXy,
        q: cfg.q_grid.clone(),
        s: cfg.s_grid.clone(),
        cells,
        segments: rx.iter().map(SegmentResiduals::segments).collect(),
    }
}

/// Single-series fluctuation grid.
pub fn fluctuation_auto(x: &[f64], cfg: &DetrendConfig) -> Result<FluctuationGrid> {
    cfg.validate(x.len())?;
    Ok(auto_grid(GridKind::AutoXx, &residuals_for(x, cfg), cfg))
}

/// `(F_XX, F_YY, F_XY)` grids for a pair of equal-length series.
pub fn fluctuation_pair(
    x: &[f64],
    y: &[f64],
    cfg: &DetrendConfig,
) -> Result<(FluctuationGrid, FluctuationGrid, FluctuationGrid)> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput("series lengths differ".into()));
    }
    cfg.validate(x.len())?;
    let rx = residuals_for(x, cfg);
    let ry = residuals_for(y, cfg);
    Ok((
        auto_grid(GridKind::AutoXx, &rx, cfg),
        auto_grid(GridKind::AutoYy, &ry, cfg),
        cross_grid(&rx, &ry, cfg),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate {
    pub h: f64,
    pub stderr: f64,
    pub r2: f64,
    pub n_scales: usize,
}

/// Slope of `ln |F_norm(q, s)|` against `ln s` over scales in `[lo, hi]`.
pub fn hurst(grid: &FluctuationGrid, q: f64, range: (usize, usize)) -> Result<HurstEstimate> {
    let qi = grid
        .q_index(q)
        .ok_or_else(|| Error::InvalidInput(format!("q = {q} not in grid")))?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (si, &s) in grid.s.iter().enumerate() {
        let c = &grid.cells[qi][si];
        if s < range.0 || s > range.1 || !c.valid || !(c.f_norm.abs() > 0.0) || !c.f_norm.is_finite() {
            continue;
        }
        xs.push((s as f64).ln());
        ys.push(c.f_norm.abs().ln());
    }
    if xs.len() < 5 {
        return Err(Error::TooFewSamples {
            needed: 5,
            have: xs.len(),
        });
    }
    let fit = linear_fit(&xs, &ys)?;
    Ok(HurstEstimate {
        h: fit.slope,
        stderr: fit.slope_stderr,
        r2: fit.r2,
        n_scales: xs.len(),
    })
}

/// Generalized Hurst exponents `h(q)` in ascending `q` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurstResult {
    pub q: Vec<f64>,
    pub h: Vec<f64>,
    pub stderr: Vec<f64>,
    pub r2: Vec<f64>,
    pub scaling_range: (usize, usize),
}

impl HurstResult {
    pub fn get(&self, q: f64) -> Option<f64> {
        self.q.iter().position(|&x| x == q).map(|i| self.h[i])
    }

    /// Whether `h(q)` is nonincreasing within `tol_sigmas` combined stderr.
    pub fn is_nonincreasing(&self, tol_sigmas: f64) -> bool {
        (1..self.h.len()).all(|i| {
            let slack = tol_sigmas * (self.stderr[i].powi(2) + self.stderr[i - 1].powi(2)).sqrt();
            self.h[i] <= self.h[i - 1] + slack
        })
    }
}

/// `h(q)` for every q of the grid; q values with fewer than five valid
/// scales in range are skipped.
pub fn generalized_hurst(grid: &FluctuationGrid, range: (usize, usize)) -> Result<HurstResult> {
    let mut rows: Vec<(f64, HurstEstimate)> = grid
        .q
        .iter()
        .filter_map(|&q| hurst(grid, q, range).ok().map(|e| (q, e)))
        .collect();
    if rows.is_empty() {
        return Err(Error::TooFewSamples { needed: 5, have: 0 });
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(HurstResult {
        q: rows.iter().map(|r| r.0).collect(),
        h: rows.iter().map(|r| r.1.h).collect(),
        stderr: rows.iter().map(|r| r.1.stderr).collect(),
        r2: rows.iter().map(|r| r.1.r2).collect(),
        scaling_range: range,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularitySpectrum {
    /// `(α, f(α))` in ascending source-q order.
    pub points: Vec<(f64, f64)>,
    pub source_q: Vec<f64>,
    /// True when α is not monotone in q, i.e. the spectrum folds back.
    pub folded: bool,
}

impl SingularitySpectrum {
    /// `α_max - α_min`.
    pub fn width(&self) -> f64 {
        let (lo, hi) = self
            .points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.0), hi.max(p.0))
            });
        hi - lo
    }

    /// The part generated by `q >= 0` (large fluctuations).
    pub fn left_branch(&self) -> Self {
        self.branch(|q| q >= 0.0)
    }

    /// The part generated by `q <= 0` (small fluctuations).
    pub fn right_branch(&self) -> Self {
        self.branch(|q| q <= 0.0)
    }

    fn branch(&self, keep: impl Fn(f64) -> bool) -> Self {
        let (points, source_q): (Vec<_>, Vec<_>) = self
            .points
            .iter()
            .zip(&self.source_q)
            .filter(|(_, &q)| keep(q))
            .map(|(p, &q)| (*p, q))
            .unzip();
        Self {
            points,
            source_q,
            folded: self.folded,
        }
    }
}

/// `α = h + q h'(q)`, `f = q (α - h) + 1` with `h'` from central differences
/// (one-sided at the ends).
pub fn singularity_spectrum(h: &HurstResult) -> Result<SingularitySpectrum> {
    let n = h.q.len();
    if n < 5 {
        return Err(Error::TooFewSamples { needed: 5, have: n });
    }
    let deriv = |i: usize| -> f64 {
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        (h.h[b] - h.h[a]) / (h.q[b] - h.q[a])
    };
    let points: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let q = h.q[i];
            let alpha = h.h[i] + q * deriv(i);
            (alpha, q * (alpha - h.h[i]) + 1.0)
        })
        .collect();
    let folded = points.windows(2).any(|w| w[1].0 > w[0].0);
    if folded {
        log::warn!("singularity spectrum folds: alpha is not monotone in q");
    }
    Ok(SingularitySpectrum {
        points,
        source_q: h.q.clone(),
        folded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use proptest::prelude::*;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        CounterRng::new(seed).normals(n)
    }

    fn small_cfg(t: usize) -> DetrendConfig {
        DetrendConfig::default_for(t)
            .with_q(vec![-4.0, -2.0, -0.5, 0.0, 0.5, 2.0, 4.0])
            .with_scales(vec![8, 16, 32, 64])
    }

    #[test]
    fn default_grids() {
        let q = default_q_grid();
        assert_eq!(q.len(), 16);
        assert_eq!(q[0], -4.0);
        assert_eq!(q[15], 4.0);
        assert!(!q.contains(&0.0));
        let cfg = DetrendConfig::default_for(1 << 16);
        assert_eq!(cfg.s_grid.first(), Some(&10));
        assert_eq!(cfg.s_grid.last(), Some(&((1 << 16) / 5)));
        assert!(cfg.s_grid.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(cfg.s_grid.len(), 20);
    }

    #[test]
    fn config_validation() {
        let cfg = DetrendConfig::default_for(100).with_scales(vec![3]);
        assert!(cfg.validate(100).is_err());
        let cfg = DetrendConfig::default_for(100).with_scales(vec![30]);
        assert!(cfg.validate(100).is_err());
        assert!(cfg.validate(120).is_ok());
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = PolyBasis::new(500, 3);
        for i in 0..4 {
            for j in 0..4 {
                let d = dot(&b.vectors[i], &b.vectors[j]);
                assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn segments_cover_both_ends() {
        assert_eq!(segment_starts(10, 3), vec![0, 3, 6, 7, 4, 1]);
        assert_eq!(segment_starts(9, 3), vec![0, 3, 6, 6, 3, 0]);
    }

    #[test]
    fn identical_and_opposite_pairs() {
        let x = noise(1024, 1);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let cfg = small_cfg(1024);
        let (xx, _, xy) = fluctuation_pair(&x, &x, &cfg).unwrap();
        assert_eq!(xx.cells, xy.cells);
        let (xx, _, xy) = fluctuation_pair(&x, &neg, &cfg).unwrap();
        for (qi, &q) in cfg.q_grid.iter().enumerate() {
            for si in 0..cfg.s_grid.len() {
                let (a, b) = (xx.cells[qi][si], xy.cells[qi][si]);
                if q == 0.0 {
                    assert_eq!(b.f, -1.0);
                } else {
                    assert_eq!(b.f, -a.f);
                }
                assert!(b.f_norm < 0.0);
            }
        }
    }

    #[test]
    fn polynomial_profile_is_removed() {
        // Linear increments integrate to a quadratic inside every segment.
        let x: Vec<f64> = (0..512).map(|i| 0.3 + 0.001 * i as f64).collect();
        let cfg = small_cfg(512);
        for r in residuals_for(&x, &cfg) {
            assert!(r.f2.iter().all(|&v| v < 1e-20));
            assert!(r.degenerate.iter().all(|&d| d));
        }
        let g = fluctuation_auto(&x, &cfg).unwrap();
        let neg = g.q.iter().position(|&q| q == -2.0).unwrap();
        assert!(g.cells[neg].iter().all(|c| !c.valid));
        let pos = g.q.iter().position(|&q| q == 2.0).unwrap();
        assert!(g.cells[pos].iter().all(|c| c.valid));
    }

    #[test]
    fn constant_stretch_excluded_for_negative_q() {
        let mut x = noise(1024, 5);
        x[..64].iter_mut().for_each(|v| *v = 0.0);
        let cfg = small_cfg(1024);
        let g = fluctuation_auto(&x, &cfg).unwrap();
        let qi = g.q.iter().position(|&q| q == -2.0).unwrap();
        let si = g.s.iter().position(|&s| s == 8).unwrap();
        // 8 flat segments from each family out of 256: under the 10 % limit.
        assert_eq!(g.cells[qi][si].excluded, 16);
        assert!(g.cells[qi][si].valid);
        let qi = g.q.iter().position(|&q| q == 2.0).unwrap();
        assert_eq!(g.cells[qi][si].excluded, 0);
    }

    #[test]
    fn exact_power_law_grid() {
        let s: Vec<usize> = vec![10, 20, 40, 80, 160, 320];
        let q = vec![-4.0, -2.0, 0.5, 2.0, 4.0];
        let cells = q
            .iter()
            .map(|&qv: &f64| {
                s.iter()
                    .map(|&sv| {
                        let h = 1.0 - qv / 10.0;
                        let f_norm = (sv as f64).powf(h);
                        Cell {
                            f: f_norm.powf(qv),
                            f_norm,
                            used: 10,
                            excluded: 0,
                            valid: true,
                        }
                    })
                    .collect()
            })
            .collect();
        let grid = FluctuationGrid {
            kind: GridKind::AutoXx,
            q: q.clone(),
            s: s.clone(),
            cells,
            segments: vec![10; s.len()],
        };
        let res = generalized_hurst(&grid, (10, 320)).unwrap();
        for (qv, h) in res.q.iter().zip(&res.h) {
            assert!((h - (1.0 - qv / 10.0)).abs() < 1e-9);
        }
        assert!(hurst(&grid, 2.0, (10, 80)).is_err());
    }

    #[test]
    fn spectrum_closed_forms() {
        let q: Vec<f64> = default_q_grid();
        let flat = HurstResult {
            q: q.clone(),
            h: vec![0.6; q.len()],
            stderr: vec![0.0; q.len()],
            r2: vec![1.0; q.len()],
            scaling_range: (10, 100),
        };
        let sp = singularity_spectrum(&flat).unwrap();
        for &(a, f) in &sp.points {
            assert!((a - 0.6).abs() < 1e-9 && (f - 1.0).abs() < 1e-9);
        }
        assert!(sp.width() < 1e-9);

        let lin = HurstResult {
            h: q.iter().map(|q| 0.7 - 0.02 * q).collect(),
            ..flat.clone()
        };
        let sp = singularity_spectrum(&lin).unwrap();
        for (&(a, f), &qv) in sp.points.iter().zip(&sp.source_q) {
            assert!((a - (0.7 - 0.04 * qv)).abs() < 1e-12);
            assert!((f - (1.0 - 0.02 * qv * qv)).abs() < 1e-12);
            assert!(f <= 1.0 + 1e-6);
        }
        assert!(!sp.folded);

        let left = sp.left_branch();
        let alpha_at_smallest_q = left.points[0].0;
        assert!(left.source_q.iter().all(|&q| q >= 0.0));
        assert!(left.points.iter().all(|p| p.0 <= alpha_at_smallest_q));

        let short = HurstResult {
            q: q[..4].to_vec(),
            h: vec![0.5; 4],
            stderr: vec![0.0; 4],
            r2: vec![1.0; 4],
            scaling_range: (10, 100),
        };
        assert!(singularity_spectrum(&short).is_err());
    }

    #[test]
    fn cauchy_schwarz_at_q2() {
        let x = noise(2048, 11);
        let y: Vec<f64> = noise(2048, 12).iter().zip(&x).map(|(a, b)| a + 0.5 * b).collect();
        let cfg = DetrendConfig::default_for(2048).with_q(vec![2.0]);
        let (xx, yy, xy) = fluctuation_pair(&x, &y, &cfg).unwrap();
        for si in 0..cfg.s_grid.len() {
            let (a, b, c) = (xx.cells[0][si].f, yy.cells[0][si].f, xy.cells[0][si].f);
            assert!(c * c <= a * b * (1.0 + 1e-12));
        }
    }

    #[test]
    fn grid_csv_round_trip() {
        let x = noise(512, 2);
        let g = fluctuation_auto(&x, &small_cfg(512)).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"q,s,F,F_norm,segments_used,valid\n"));
        let back = FluctuationGrid::read_csv(&buf[..], GridKind::AutoXx).unwrap();
        assert_eq!(back.q, g.q);
        assert_eq!(back.s, g.s);
        for (a, b) in back.cells.iter().flatten().zip(g.cells.iter().flatten()) {
            assert!(a.f == b.f || (a.f.is_nan() && b.f.is_nan()));
            assert_eq!(a.valid, b.valid);
        }
    }

    #[test]
    fn reversal_nearly_preserves_auto_fluctuation() {
        // The reversed profile is the original one shifted by a single
        // sample, so agreement is close but not exact.
        let cfg = DetrendConfig::default_for(2000)
            .with_q(vec![2.0, 4.0])
            .with_scales(vec![31, 70, 200]);
        for seed in 0..5 {
            let x = noise(2000, seed);
            let rx: Vec<f64> = x.iter().rev().copied().collect();
            let a = fluctuation_auto(&x, &cfg).unwrap();
            let b = fluctuation_auto(&rx, &cfg).unwrap();
            for (ca, cb) in a.cells.iter().flatten().zip(b.cells.iter().flatten()) {
                assert!((ca.f_norm / cb.f_norm - 1.0).abs() < 0.05);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn reversal_swaps_segment_families(t in 20usize..2000, s in 3usize..40) {
            prop_assume!(4 * s <= t);
            let mut fwd = segment_starts(t, s);
            let mut rev: Vec<usize> = fwd.iter().map(|&v| t - v - s).collect();
            fwd.sort_unstable();
            rev.sort_unstable();
            prop_assert_eq!(fwd, rev);
        }

        #[test]
        fn scaling_x_scales_normalized_f(seed in 0u64..1000, c in prop_oneof![-20.0f64..-0.05, 0.05f64..20.0]) {
            let x = noise(1024, seed);
            let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
            let cfg = DetrendConfig::default_for(1024)
                .with_q(vec![-4.0, -2.0, 0.0, 2.0, 4.0])
                .with_scales(vec![8, 12, 16, 24, 32, 48, 64]);
            let a = fluctuation_auto(&x, &cfg).unwrap();
            let b = fluctuation_auto(&cx, &cfg).unwrap();
            for (ca, cb) in a.cells.iter().flatten().zip(b.cells.iter().flatten()) {
                prop_assert!((cb.f_norm - c.abs() * ca.f_norm).abs() <= 1e-9 * cb.f_norm.abs());
            }
            let ha = generalized_hurst(&a, (8, 64)).unwrap();
            let hb = generalized_hurst(&b, (8, 64)).unwrap();
            prop_assert!(ha.h.iter().zip(&hb.h).all(|(p, q)| (p - q).abs() < 1e-9));
        }
    }
}
