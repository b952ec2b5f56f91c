//! Binned time series built from tick tables.
//!
//! Bins are half-open `[start, start + dt)`; a tick exactly on a boundary
//! belongs to the later bin. A window of `D` seconds yields `floor(D / dt)`
//! bins and inactive bins are filled (zero counts, carried-forward prices).
//!
//! Capitalization is modeled as `supply * last trade price`, carried forward
//! across bins without trades and carried back before the first trade, so log
//! increments are exactly zero in inactive bins.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::TickTable;
use crate::linalg::{mean, sample_variance};

pub const HOUR: i64 = 3_600;
pub const DAY: i64 = 86_400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    CapIncrement,
    TxCount,
    Capitalization,
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub values: Vec<f64>,
    /// Sampling interval in seconds.
    pub dt: i64,
    /// Epoch seconds of the first bin.
    pub t0: i64,
    pub observable: Observable,
}

impl Series {
    pub fn new(values: Vec<f64>, dt: i64, t0: i64, observable: Observable) -> Self {
        Self {
            values,
            dt,
            t0,
            observable,
        }
    }

    /// Unit-spaced series with no time anchor, e.g. synthetic data.
    pub fn from_values(values: Vec<f64>) -> Self {
        Self::new(values, 1, 0, Observable::Other)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn bin_count(table: &TickTable, dt: i64) -> Result<usize> {
    if dt <= 0 {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    Ok((table.window().duration_secs() / dt) as usize)
}

/// Capitalization `K = supply * last price at or before the bin end`.
pub fn build_capitalization(table: &TickTable, id: &str, supply: u64, dt: i64) -> Result<Series> {
    let records = table.records_for(id);
    let first = records.first().ok_or(Error::EmptyTable)?;
    let n_bins = bin_count(table, dt)?;
    let start = table.window().start;

    let mut values = Vec::with_capacity(n_bins);
    let mut price = first.price;
    let mut next = 0;
    for b in 0..n_bins {
        let bin_end = start + (b as i64 + 1) * dt;
        while next < records.len() && records[next].timestamp < bin_end {
            price = records[next].price;
            next += 1;
        }
        values.push(supply as f64 * price);
    }
    Ok(Series::new(values, dt, start, Observable::Capitalization))
}

/// `c(t) = ln K(t + dt) - ln K(t)`; the result is one point shorter.
pub fn log_increments(k: &Series) -> Result<Series> {
    if let Some((bin, &value)) = k.values.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositive { bin, value });
    }
    let values = k.values.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
    Ok(Series::new(values, k.dt, k.t0, Observable::CapIncrement))
}

/// Number of transactions per bin.
pub fn tx_counts(table: &TickTable, id: &str, dt: i64) -> Result<Series> {
    let n_bins = bin_count(table, dt)?;
    let start = table.window().start;
    let mut values = vec![0.0; n_bins];
    for r in table.records_for(id) {
        let b = ((r.timestamp - start) / dt) as usize;
        if b < n_bins {
            values[b] += 1.0;
        }
    }
    Ok(Series::new(values, dt, start, Observable::TxCount))
}

/// Average of an hourly series per UTC hour of day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyPattern {
    pub means: [f64; 24],
    /// Trailing bins dropped to complete whole days.
    pub truncated_bins: usize,
}

pub fn daily_pattern(n: &Series) -> Result<DailyPattern> {
    if n.dt != HOUR {
        return Err(Error::InvalidInput("daily pattern needs dt = 3600 s".into()));
    }
    if n.len() < 24 {
        return Err(Error::TooFewSamples {
            needed: 24,
            have: n.len(),
        });
    }
    let used = n.len() - n.len() % 24;
    let truncated_bins = n.len() - used;
    if truncated_bins > 0 {
        log::warn!("daily pattern: dropping {truncated_bins} trailing bins of a partial day");
    }
    let mut sums = [0.0; 24];
    let mut counts = [0usize; 24];
    for (k, &v) in n.values[..used].iter().enumerate() {
        let hour = (n.t0 + k as i64 * HOUR).div_euclid(HOUR).rem_euclid(24) as usize;
        sums[hour] += v;
        counts[hour] += 1;
    }
    let mut means = [0.0; 24];
    for h in 0..24 {
        means[h] = sums[h] / counts[h] as f64;
    }
    Ok(DailyPattern {
        means,
        truncated_bins,
    })
}

/// Zero mean, unit sample standard deviation (denominator `T - 1`).
pub fn standardize(s: &Series) -> Result<Series> {
    let values = standardize_values(&s.values).ok_or_else(|| Error::ZeroVariance("series".into()))?;
    Ok(Series::new(values, s.dt, s.t0, s.observable))
}

pub(crate) fn standardize_values(xs: &[f64]) -> Option<Vec<f64>> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    let sd = sample_variance(xs).sqrt();
    if !(sd > 0.0) {
        return None;
    }
    Some(xs.iter().map(|x| (x - m) / sd).collect())
}

/// Time-aligned columns of one observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    labels: Vec<String>,
    columns: Vec<Vec<f64>>,
    dt: i64,
    t0: i64,
    observable: Observable,
}

impl Panel {
    pub fn new(
        labels: Vec<String>,
        columns: Vec<Vec<f64>>,
        dt: i64,
        t0: i64,
        observable: Observable,
    ) -> Result<Self> {
        if labels.len() != columns.len() {
            return Err(Error::InvalidInput("one label per column required".into()));
        }
        if let Some(first) = columns.first() {
            if columns.iter().any(|c| c.len() != first.len()) {
                return Err(Error::InvalidInput("panel columns differ in length".into()));
            }
        }
        let mut sorted: Vec<&String> = labels.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("duplicate panel labels".into()));
        }
        Ok(Self {
            labels,
            columns,
            dt,
            t0,
            observable,
        })
    }

    /// Assembles a panel from aligned series; labels and series pair up in order.
    pub fn from_series(labels: Vec<String>, series: Vec<Series>) -> Result<Self> {
        let first = series
            .first()
            .ok_or_else(|| Error::InvalidInput("empty panel".into()))?;
        let (dt, t0, observable) = (first.dt, first.t0, first.observable);
        if series
            .iter()
            .any(|s| s.dt != dt || s.t0 != t0 || s.observable != observable)
        {
            return Err(Error::InvalidInput("series are not aligned".into()));
        }
        Self::new(
            labels,
            series.into_iter().map(|s| s.values).collect(),
            dt,
            t0,
            observable,
        )
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn series(&self, i: usize) -> Series {
        Series::new(self.columns[i].clone(), self.dt, self.t0, self.observable)
    }

    pub fn dt(&self) -> i64 {
        self.dt
    }

    pub fn t0(&self) -> i64 {
        self.t0
    }

    pub fn observable(&self) -> Observable {
        self.observable
    }

    /// Number of columns `I`.
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// First `n` time points of every column.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            columns: self
                .columns
                .iter()
                .map(|c| c[..n.min(c.len())].to_vec())
                .collect(),
            ..self.clone()
        }
    }

    /// Columns reordered so that `perm[new] = old`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            labels: perm.iter().map(|&i| self.labels[i].clone()).collect(),
            columns: perm.iter().map(|&i| self.columns[i].clone()).collect(),
            ..self.clone()
        }
    }

    pub fn select(&self, labels: &[&str]) -> Result<Self> {
        let perm = labels
            .iter()
            .map(|l| {
                self.labels
                    .iter()
                    .position(|x| x == l)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown column `{l}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.permuted(&perm))
    }

    pub fn standardized(&self) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .zip(&self.labels)
            .map(|(c, l)| standardize_values(c).ok_or_else(|| Error::ZeroVariance(l.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            columns,
            ..self.clone()
        })
    }

    /// CSV with a leading `t` column of epoch seconds.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![(self.t0 + k as i64 * self.dt).to_string()];
            row.extend(self.columns.iter().map(|c| c[k].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by [`Panel::write_csv`]. `dt` is inferred
    /// from the first two timestamps (1 s for single-row files).
    pub fn read_csv<R: Read>(reader: R, observable: Observable) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("t") {
            return Err(Error::Parse {
                line: 1,
                reason: "panel header must start with `t`".into(),
            });
        }
        let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut columns = vec![Vec::new(); labels.len()];
        let mut times = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let bad = |what: &str| Error::Parse {
                line,
                reason: format!("cannot parse {what}"),
            };
            times.push(row[0].parse::<i64>().map_err(|_| bad("timestamp"))?);
            for (c, field) in columns.iter_mut().zip(row.iter().skip(1)) {
                c.push(field.parse::<f64>().map_err(|_| bad("value"))?);
            }
        }
        let t0 = times.first().copied().unwrap_or(0);
        let dt = if times.len() >= 2 { times[1] - times[0] } else { 1 };
        Self::new(labels, columns, dt, t0, observable)
    }
}

/// Transaction-count panel for the given collections.
pub fn tx_count_panel(table: &TickTable, ids: &[&str], dt: i64) -> Result<Panel> {
    let series = ids
        .par_iter()
        .map(|id| tx_counts(table, id, dt))
        .collect::<Result<Vec<_>>>()?;
    Panel::from_series(ids.iter().map(|s| s.to_string()).collect(), series)
}

/// Capitalization log-increment panel. Supplies only rescale `K`, so they do
/// not affect the increments; a missing supply defaults to 1.
pub fn cap_increment_panel(
    table: &TickTable,
    ids: &[&str],
    supplies: &std::collections::BTreeMap<String, u64>,
    dt: i64,
) -> Result<Panel> {
    let series = ids
        .par_iter()
        .map(|id| {
            let supply = supplies.get(*id).copied().unwrap_or(1).max(1);
            let k = build_capitalization(table, id, supply, dt)?;
            log_increments(&k)
        })
        .collect::<Result<Vec<_>>>()?;
    Panel::from_series(ids.iter().map(|s| s.to_string()).collect(), series)
}
