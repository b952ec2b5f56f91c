//! Tick file parsing and collection-level bookkeeping.
//!
//! Tick files are UTF-8 CSV with the header `collection_id,timestamp,price_usd`,
//! one transaction per line, Unix-second timestamps (UTC) and `.` as the
//! decimal separator. Supply files are `collection_id,supply` lines with an
//! optional header.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{Observable, Panel};

pub const TICK_HEADER: [&str; 3] = ["collection_id", "timestamp", "price_usd"];

/// Half-open analysis window `[start, start + days * 86400)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: i64,
    pub days: u32,
}

impl Window {
    pub fn new(start: i64, days: u32) -> Self {
        Self { start, days }
    }

    pub fn duration_secs(&self) -> i64 {
        self.days as i64 * 86_400
    }

    pub fn end(&self) -> i64 {
        self.start + self.duration_secs()
    }

    pub fn contains(&self, ts: i64) -> bool {
        ts >= self.start && ts < self.end()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub collection_id: String,
    pub timestamp: i64,
    pub price: f64,
}

/// Transactions sorted by `(collection_id, timestamp)`; ties keep file order.
#[derive(Clone, Debug, PartialEq)]
pub struct TickTable {
    records: Vec<TickRecord>,
    window: Window,
}

/// Outcome of [`parse_ticks`]: the table plus the number of out-of-window
/// records that were dropped.
#[derive(Clone, Debug)]
pub struct ParsedTicks {
    pub table: TickTable,
    pub dropped: usize,
}

impl TickTable {
    /// Builds a table from records, dropping anything outside the window.
    pub fn new(mut records: Vec<TickRecord>, window: Window) -> Self {
        records.retain(|r| window.contains(r.timestamp));
        records.sort_by(|a, b| {
            a.collection_id
                .cmp(&b.collection_id)
                .then(a.timestamp.cmp(&b.timestamp))
        });
        Self { records, window }
    }

    pub fn records(&self) -> &[TickRecord] {
        &self.records
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Collection ids in canonical (sorted) order.
    pub fn collections(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.records {
            if out.last() != Some(&r.collection_id.as_str()) {
                out.push(&r.collection_id);
            }
        }
        out
    }

    /// The contiguous run of records for one collection.
    pub fn records_for(&self, id: &str) -> &[TickRecord] {
        let lo = self.records.partition_point(|r| r.collection_id.as_str() < id);
        let hi = self.records.partition_point(|r| r.collection_id.as_str() <= id);
        &self.records[lo..hi]
    }

    pub fn n_total(&self, id: &str) -> usize {
        self.records_for(id).len()
    }

    /// Canonical tick-file serialization.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TICK_HEADER)?;
        for r in &self.records {
            w.write_record([
                r.collection_id.clone(),
                r.timestamp.to_string(),
                r.price.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn line_of(rec: &csv::StringRecord, fallback: usize) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(fallback)
}

/// Parses a tick file, keeping records inside `window`.
pub fn parse_ticks<R: Read>(input: R, window: Window) -> Result<ParsedTicks> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let mut records = Vec::new();
    let mut dropped = 0usize;
    let mut seen_header = false;
    for (idx, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line() as usize).unwrap_or(idx + 1),
            reason: e.to_string(),
        })?;
        let line = line_of(&row, idx + 1);
        if !seen_header {
            seen_header = true;
            if row.iter().eq(TICK_HEADER.iter().copied()) {
                continue;
            }
            return Err(Error::Parse {
                line,
                reason: format!("expected header `{}`", TICK_HEADER.join(",")),
            });
        }
        if row.len() == 1 && row[0].is_empty() {
            continue;
        }
        if row.len() != 3 {
            return Err(Error::Parse {
                line,
                reason: format!("expected 3 fields, found {}", row.len()),
            });
        }
        let collection_id = row[0].to_string();
        if collection_id.is_empty() {
            return Err(Error::Parse {
                line,
                reason: "empty collection_id".into(),
            });
        }
        let timestamp: i64 = row[1].parse().map_err(|_| Error::Parse {
            line,
            reason: format!("timestamp `{}` is not an integer", &row[1]),
        })?;
        let price: f64 = row[2].parse().map_err(|_| Error::Parse {
            line,
            reason: format!("price `{}` is not a decimal", &row[2]),
        })?;
        if !price.is_finite() || price < 0.0 {
            return Err(Error::Parse {
                line,
                reason: format!("price {price} must be finite and nonnegative"),
            });
        }
        if !window.contains(timestamp) {
            dropped += 1;
            continue;
        }
        records.push(TickRecord {
            collection_id,
            timestamp,
            price,
        });
    }
    if !seen_header {
        return Err(Error::Parse {
            line: 1,
            reason: "missing header".into(),
        });
    }
    if dropped > 0 {
        log::warn!("{dropped} tick records outside the analysis window were dropped");
    }
    if records.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(ParsedTicks {
        table: TickTable::new(records, window),
        dropped,
    })
}

/// Parses `collection_id,supply` lines; a leading header is skipped.
pub fn parse_supplies<R: Read>(input: R) -> Result<BTreeMap<String, u64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = BTreeMap::new();
    for (idx, row) in rdr.records().enumerate() {
        let row = row?;
        let line = line_of(&row, idx + 1);
        if idx == 0 && row.get(1) == Some("supply") {
            continue;
        }
        if row.len() != 2 {
            return Err(Error::Parse {
                line,
                reason: "expected `collection_id,supply`".into(),
            });
        }
        let supply = row[1].parse().map_err(|_| Error::Parse {
            line,
            reason: format!("supply `{}` is not a nonnegative integer", &row[1]),
        })?;
        out.insert(row[0].to_string(), supply);
    }
    Ok(out)
}

/// Collections averaging at least `min_avg_tx_per_day` transactions per
/// calendar day over the window (boundary inclusive).
pub fn liquidity_filter(table: &TickTable, min_avg_tx_per_day: f64) -> BTreeSet<String> {
    let days = table.window().days as f64;
    table
        .collections()
        .into_iter()
        .filter(|id| table.n_total(id) as f64 / days >= min_avg_tx_per_day)
        .map(str::to_string)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollectionMeta {
    pub collection_id: String,
    /// Supply times the last in-window trade price; `None` when supply is unknown.
    pub capitalization_last_day: Option<f64>,
    pub n_total: usize,
    pub supply: Option<u64>,
    pub zero_fraction_1h: f64,
}

/// Per-collection summary rows. Returns the rows and the ids whose supply
/// was missing.
pub fn collection_metadata(
    table: &TickTable,
    supplies: &BTreeMap<String, u64>,
    panel_1h: &Panel,
) -> Result<(Vec<CollectionMeta>, Vec<String>)> {
    if panel_1h.dt() != 3600 || panel_1h.observable() != Observable::TxCount {
        return Err(Error::InvalidInput(
            "metadata needs an hourly transaction-count panel".into(),
        ));
    }
    let mut metas = Vec::new();
    let mut missing = Vec::new();
    for id in table.collections() {
        let records = table.records_for(id);
        let counts = panel_1h
            .column(id)
            .ok_or_else(|| Error::InvalidInput(format!("collection `{id}` missing from panel")))?;
        let zeros = counts.iter().filter(|&&n| n == 0.0).count();
        let supply = supplies.get(id).copied();
        if supply.is_none() {
            log::warn!("no supply recorded for `{id}`");
            missing.push(id.to_string());
        }
        let last_price = records.last().map(|r| r.price).unwrap_or(0.0);
        metas.push(CollectionMeta {
            collection_id: id.to_string(),
            capitalization_last_day: supply.map(|s| s as f64 * last_price),
            n_total: records.len(),
            supply,
            zero_fraction_1h: zeros as f64 / counts.len() as f64,
        });
    }
    Ok((metas, missing))
}
