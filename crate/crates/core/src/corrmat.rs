//! Pearson and q-dependent detrended correlation matrices over a panel.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, SymMatrix};
use crate::mfdfa::{aggregate, Cell, DetrendConfig, PolyBasis, SegmentResiduals};
use crate::series::{Observable, Panel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrKind {
    Pearson,
    Detrended { q: f64, s: usize },
}

/// Symmetric correlation matrix with labels and provenance.
///
/// `values` holds raw estimates. Detrended entries with `q != 2` are not
/// bounded by 1; [`CorrMatrix::clamped`] gives the copy used for distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrMatrix {
    pub labels: Vec<String>,
    pub values: SymMatrix,
    pub kind: CorrKind,
    pub observable: Observable,
    pub dt: i64,
    /// Length of the underlying series.
    pub t_pts: usize,
    /// Upper-triangle cells `(i, j)` that could not be evaluated. They hold 0.
    pub flagged: Vec<(usize, usize)>,
}

/// Metadata sidecar written next to a matrix CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub kind: String,
    pub q: Option<f64>,
    pub s: Option<usize>,
    pub dt: i64,
    pub observable: Observable,
    pub t_pts: usize,
    #[serde(default)]
    pub flagged: Vec<(usize, usize)>,
}

impl CorrMatrix {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn is_flagged(&self) -> bool {
        !self.flagged.is_empty()
    }

    /// Errors on flagged matrices unless `allow_flagged`.
    pub fn ensure_usable(&self, allow_flagged: bool) -> Result<()> {
        if self.is_flagged() && !allow_flagged {
            return Err(Error::Flagged);
        }
        Ok(())
    }

    /// Entries clamped to `[-1, 1]`.
    pub fn clamped(&self) -> SymMatrix {
        self.values.map(|v| v.clamp(-1.0, 1.0))
    }

    pub fn meta(&self) -> MatrixMeta {
        let (kind, q, s) = match self.kind {
            CorrKind::Pearson => ("pearson", None, None),
            CorrKind::Detrended { q, s } => ("detrended", Some(q), Some(s)),
        };
        MatrixMeta {
            kind: kind.into(),
            q,
            s,
            dt: self.dt,
            observable: self.observable,
            t_pts: self.t_pts,
            flagged: self.flagged.clone(),
        }
    }

    /// CSV with a header row and a leading column of labels.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec![String::new()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend(self.values.row(i).iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, meta: &MatrixMeta) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let labels: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = row.position().map_or(i + 2, |p| p.line() as usize);
            if row.get(0) != labels.get(i).map(String::as_str) {
                return Err(Error::Parse {
                    line,
                    reason: "row label does not match header".into(),
                });
            }
            rows.push(
                row.iter()
                    .skip(1)
                    .map(|v| {
                        v.parse::<f64>().map_err(|_| Error::Parse {
                            line,
                            reason: format!("`{v}` is not a number"),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        let values = SymMatrix::from_rows(&rows)?;
        if values.dim() != labels.len() {
            return Err(Error::InvalidInput("matrix is not square".into()));
        }
        let kind = match (meta.kind.as_str(), meta.q, meta.s) {
            ("pearson", _, _) => CorrKind::Pearson,
            ("detrended", Some(q), Some(s)) => CorrKind::Detrended { q, s },
            _ => return Err(Error::InvalidInput(format!("bad matrix kind `{}`", meta.kind))),
        };
        Ok(Self {
            labels,
            values,
            kind,
            observable: meta.observable,
            dt: meta.dt,
            t_pts: meta.t_pts,
            flagged: meta.flagged.clone(),
        })
    }
}

/// Sample Pearson correlation matrix; the diagonal is exactly 1.
pub fn pearson_matrix(panel: &Panel) -> Result<CorrMatrix> {
    let z = panel.standardized()?;
    let cols = z.columns();
    let n = cols.len();
    let denom = panel.len() as f64 - 1.0;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if j > i {
                        dot(&cols[i], &cols[j]) / denom
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let mut values = SymMatrix::identity(n);
    for i in 0..n {
        for j in (i + 1)..n {
            values.set_sym(i, j, rows[i][j]);
        }
    }
    Ok(CorrMatrix {
        labels: panel.labels().to_vec(),
        values,
        kind: CorrKind::Pearson,
        observable: panel.observable(),
        dt: panel.dt(),
        t_pts: panel.len(),
        flagged: Vec::new(),
    })
}

fn check_scale(t_pts: usize, s: usize, cfg: &DetrendConfig) -> Result<()> {
    DetrendConfig {
        s_grid: vec![s],
        q_grid: vec![2.0],
        ..cfg.clone()
    }
    .validate(t_pts)
}

/// `ρ = F_XY / sqrt(F_XX F_YY)` from the literal q-order means.
fn rho_from_cells(xx: &Cell, yy: &Cell, xy: &Cell) -> Option<f64> {
    let denom = (xx.f * yy.f).sqrt();
    if !(xx.valid && yy.valid && xy.valid) || !(denom > 0.0) || !denom.is_finite() {
        return None;
    }
    let r = xy.f / denom;
    r.is_finite().then_some(r)
}

/// q-dependent detrended correlation coefficient of two series at scale `s`.
/// Only `cfg.order` and `cfg.min_valid_segments` are used from `cfg`.
pub fn rho_q(x: &[f64], y: &[f64], q: f64, s: usize, cfg: &DetrendConfig) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput("series lengths differ".into()));
    }
    check_scale(x.len(), s, cfg)?;
    let basis = PolyBasis::new(s, cfg.order);
    let rx = SegmentResiduals::new(x, &basis);
    let ry = SegmentResiduals::new(y, &basis);
    let deg: Vec<bool> = rx
        .degenerate
        .iter()
        .zip(&ry.degenerate)
        .map(|(a, b)| *a || *b)
        .collect();
    let xx = aggregate(&rx.f2, &rx.degenerate, q, cfg.min_valid_segments);
    let yy = aggregate(&ry.f2, &ry.degenerate, q, cfg.min_valid_segments);
    let xy = aggregate(&rx.cross_f2(&ry), &deg, q, cfg.min_valid_segments);
    rho_from_cells(&xx, &yy, &xy).ok_or(Error::UndefinedCell { q, s })
}

/// Detrended correlation matrix `C^ρ(q, s)`. Cells that cannot be evaluated
/// are set to 0 and listed in `flagged`.
pub fn detrended_matrix(panel: &Panel, q: f64, s: usize, cfg: &DetrendConfig) -> Result<CorrMatrix> {
    if panel.width() < 2 {
        return Err(Error::InvalidInput("need at least two columns".into()));
    }
    check_scale(panel.len(), s, cfg)?;
    let basis = PolyBasis::new(s, cfg.order);
    let res: Vec<SegmentResiduals> = panel
        .columns()
        .par_iter()
        .map(|c| SegmentResiduals::new(c, &basis))
        .collect();
    let auto: Vec<Cell> = res
        .iter()
        .map(|r| aggregate(&r.f2, &r.degenerate, q, cfg.min_valid_segments))
        .collect();
    let n = res.len();
    let rows: Vec<Vec<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| {
                    let deg: Vec<bool> = res[i]
                        .degenerate
                        .iter()
                        .zip(&res[j].degenerate)
                        .map(|(a, b)| *a || *b)
                        .collect();
                    let xy = aggregate(&res[i].cross_f2(&res[j]), &deg, q, cfg.min_valid_segments);
                    rho_from_cells(&auto[i], &auto[j], &xy)
                })
                .collect()
        })
        .collect();
    let mut values = SymMatrix::identity(n);
    let mut flagged = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            let j = i + 1 + k;
            match v {
                Some(r) => values.set_sym(i, j, *r),
                None => flagged.push((i, j)),
            }
        }
    }
    if !flagged.is_empty() {
        log::warn!(
            "detrended matrix q={q} s={s}: {} undefined cells flagged",
            flagged.len()
        );
    }
    Ok(CorrMatrix {
        labels: panel.labels().to_vec(),
        values,
        kind: CorrKind::Detrended { q, s },
        observable: panel.observable(),
        dt: panel.dt(),
        t_pts: panel.len(),
        flagged,
    })
}

/// Histogram of the upper-triangle entries with a moment-fitted normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffdiagHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// `(μ, σ)` from the sample moments (σ with denominator n).
    pub fitted_normal: (f64, f64),
    pub n: usize,
}

pub fn offdiag_histogram(m: &CorrMatrix, bins: usize) -> Result<OffdiagHistogram> {
    if m.dim() < 3 {
        return Err(Error::InvalidInput("histogram needs I >= 3".into()));
    }
    let bins = bins.max(1);
    let vals = m.values.upper_triangle();
    let n = vals.len();
    let mu = vals.iter().sum::<f64>() / n as f64;
    let sigma = (vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n as f64).sqrt();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(OffdiagHistogram {
            bin_edges: vec![lo, hi],
            counts: vec![n],
            fitted_normal: (mu, 0.0),
            n,
        });
    }
    let width = (hi - lo) / bins as f64;
    let bin_edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for v in vals {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(OffdiagHistogram {
        bin_edges,
        counts,
        fitted_normal: (mu, sigma),
        n,
    })
}
