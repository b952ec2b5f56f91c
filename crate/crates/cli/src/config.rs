//! Run configuration and the small textual grammars shared with the
//! subcommands (q ranges, scale lists, durations, timestamps).

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use chrono::{DateTime, NaiveDate, NaiveDateTime};
use detrendcorr_core::corrmat::CorrKind;
use detrendcorr_core::mfdfa::{log_scales, DetrendConfig};
use detrendcorr_core::synthlab::GeneratorSpec;
use detrendcorr_core::{CommunityGraph, Observable};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    /// Tick files: a single CSV or a directory of them.
    Ticks {
        ticks: PathBuf,
        #[serde(default)]
        supplies: Option<PathBuf>,
        /// ISO 8601 date or date-time, UTC.
        start: String,
        days: u32,
        #[serde(default = "default_min_tx")]
        min_tx_per_day: f64,
    },
    /// A panel CSV as written by `detrendcorr panel`.
    Panel {
        path: PathBuf,
    },
    Synthetic {
        generator: GeneratorSpec,
    },
}

fn default_min_tx() -> f64 {
    2.0
}

/// A correlation matrix to build. Detrended entries without `q` or `s`
/// expand over the configured q list and scale list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixSpec {
    Pearson,
    Detrended {
        #[serde(default)]
        q: Option<f64>,
        #[serde(default)]
        s: Option<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSpec,
    #[serde(default = "default_dt")]
    pub dt: i64,
    #[serde(default = "default_observable")]
    pub observable: Observable,
    pub q: Vec<f64>,
    pub scales: Vec<usize>,
    #[serde(default = "default_order")]
    pub order: usize,
    /// Scale range for Hurst fits; defaults to the full scale list.
    #[serde(default)]
    pub hurst_range: Option<(usize, usize)>,
    #[serde(default = "default_matrices")]
    pub matrices: Vec<MatrixSpec>,
    pub output_dir: PathBuf,
    /// Seeds the MST layout.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tail_percentile")]
    pub tail_percentile: f64,
    #[serde(default = "default_acf_lag")]
    pub acf_max_lag: usize,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default = "yes")]
    pub filter_market_mode: bool,
    #[serde(default = "yes")]
    pub communities: bool,
    /// Run Louvain on the spanning tree (default) or on the complete network.
    #[serde(default)]
    pub community_graph: CommunityGraph,
    #[serde(default = "yes")]
    pub render: bool,
    /// Proceed with detrended matrices that contain undefined cells.
    #[serde(default)]
    pub allow_flagged: bool,
}

fn default_dt() -> i64 {
    3600
}
fn default_observable() -> Observable {
    Observable::CapIncrement
}
fn default_order() -> usize {
    2
}
fn default_matrices() -> Vec<MatrixSpec> {
    vec![MatrixSpec::Pearson, MatrixSpec::Detrended { q: None, s: None }]
}
fn default_tail_percentile() -> f64 {
    90.0
}
fn default_acf_lag() -> usize {
    100
}
fn default_bins() -> usize {
    50
}
fn yes() -> bool {
    true
}

impl RunConfig {
    /// Reads a JSON config; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.input {
            InputSpec::Ticks { ticks, supplies, .. } => {
                fix(ticks);
                if let Some(s) = supplies {
                    fix(s);
                }
            }
            InputSpec::Panel { path } => fix(path),
            InputSpec::Synthetic { .. } => {}
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.dt > 0, "dt must be positive");
        ensure!(!self.q.is_empty(), "q list is empty");
        ensure!(self.q.iter().all(|q| q.is_finite()), "q values must be finite");
        ensure!(!self.scales.is_empty(), "scale list is empty");
        ensure!(
            self.scales.windows(2).all(|w| w[0] < w[1]),
            "scales must be strictly increasing"
        );
        ensure!(
            self.tail_percentile > 0.0 && self.tail_percentile < 100.0,
            "tail_percentile must lie in (0, 100)"
        );
        ensure!(self.histogram_bins > 0, "histogram_bins must be positive");
        if let Some((lo, hi)) = self.hurst_range {
            ensure!(lo <= hi, "hurst_range is reversed");
        }
        if let InputSpec::Ticks { days, .. } = &self.input {
            ensure!(*days > 0, "window must span at least one day");
            ensure!(
                matches!(self.observable, Observable::CapIncrement | Observable::TxCount),
                "tick input supports the cap_increment and tx_count observables"
            );
        }
        for m in &self.matrices {
            if let MatrixSpec::Detrended { q: Some(q), .. } = m {
                ensure!(q.is_finite(), "matrix q must be finite");
            }
        }
        Ok(())
    }

    pub fn detrend_config(&self) -> DetrendConfig {
        DetrendConfig {
            order: self.order,
            q_grid: self.q.clone(),
            s_grid: self.scales.clone(),
            min_valid_segments: 2,
        }
    }

    pub fn hurst_range(&self) -> (usize, usize) {
        self.hurst_range
            .unwrap_or((self.scales[0], *self.scales.last().unwrap()))
    }

    /// Every matrix the run will build, in order, without duplicates.
    pub fn matrix_kinds(&self) -> Vec<CorrKind> {
        let mut out: Vec<CorrKind> = Vec::new();
        let mut push = |k: CorrKind| {
            if !out.contains(&k) {
                out.push(k);
            }
        };
        for m in &self.matrices {
            match *m {
                MatrixSpec::Pearson => push(CorrKind::Pearson),
                MatrixSpec::Detrended { q, s } => {
                    let qs = q.map_or_else(|| self.q.clone(), |v| vec![v]);
                    let ss = s.map_or_else(|| self.scales.clone(), |v| vec![v]);
                    for &q in &qs {
                        for &s in &ss {
                            push(CorrKind::Detrended { q, s });
                        }
                    }
                }
            }
        }
        out
    }

    /// The config as hashed into the manifest: the output location does not
    /// change what a run computes.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        serde_json::to_string(&c).expect("config serializes")
    }
}

/// Seconds in a duration such as `90s`, `30m`, `1h`, `14d`.
pub fn parse_duration(text: &str) -> Result<i64> {
    let t = text.trim();
    let (num, unit) = t.split_at(t.find(|c: char| c.is_ascii_alphabetic()).unwrap_or(t.len()));
    let n: i64 = num.parse().map_err(|_| anyhow!("bad duration `{text}`"))?;
    let mult = match unit {
        "" | "s" => 1,
        "m" => 60,
        "h" => 3600,
        "d" => 86_400,
        _ => bail!("unknown duration unit in `{text}`"),
    };
    ensure!(n > 0, "duration `{text}` must be positive");
    Ok(n * mult)
}

/// A scale given as a point count (`14`) or a duration (`14d`) at sampling
/// interval `dt`.
pub fn parse_scale(text: &str, dt: i64) -> Result<usize> {
    let t = text.trim();
    if let Ok(n) = t.parse::<usize>() {
        return Ok(n);
    }
    let secs = parse_duration(t)?;
    ensure!(
        secs % dt == 0,
        "scale `{text}` is not a whole number of {dt}-second bins"
    );
    Ok((secs / dt) as usize)
}

/// `lo:hi:logN` for N log-spaced scales, otherwise a comma list of scales.
pub fn parse_scales(text: &str, dt: i64) -> Result<Vec<usize>> {
    let parts: Vec<&str> = text.split(':').collect();
    let mut out = if parts.len() == 3 {
        let lo = parse_scale(parts[0], dt)?;
        let hi = parse_scale(parts[1], dt)?;
        let n: usize = parts[2]
            .strip_prefix("log")
            .ok_or_else(|| anyhow!("expected `logN` in `{text}`"))?
            .parse()
            .map_err(|_| anyhow!("bad count in `{text}`"))?;
        ensure!(lo < hi && n >= 2, "bad scale range `{text}`");
        log_scales(lo, hi, n)
    } else {
        text.split(',')
            .map(|s| parse_scale(s, dt))
            .collect::<Result<Vec<_>>>()?
    };
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// `lo:hi:step` (inclusive, q = 0 kept only if listed explicitly) or a
/// comma list.
pub fn parse_q_list(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| anyhow!("bad q range `{text}`"))
            })
            .collect::<Result<_>>()?;
        let (lo, hi, step) = (v[0], v[1], v[2]);
        ensure!(step > 0.0 && lo <= hi, "bad q range `{text}`");
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        return Ok((0..=n)
            .map(|k| lo + k as f64 * step)
            .filter(|q| q.abs() > 1e-12)
            .collect());
    }
    text.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| anyhow!("bad q value `{p}`")))
        .collect()
}

/// Epoch seconds from `2022-01-01`, `2022-01-01T00:00:00` or RFC 3339.
pub fn parse_start(text: &str) -> Result<i64> {
    if let Ok(t) = DateTime::parse_from_rfc3339(text) {
        return Ok(t.timestamp());
    }
    if let Ok(t) = NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S") {
        return Ok(t.and_utc().timestamp());
    }
    if let Ok(d) = NaiveDate::parse_from_str(text, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp());
    }
    bail!("cannot read `{text}` as an ISO 8601 date")
}

/// Observable from the short CLI spelling.
pub fn parse_observable(text: &str) -> Result<Observable> {
    Ok(match text {
        "c" | "cap_increment" => Observable::CapIncrement,
        "n" | "tx_count" => Observable::TxCount,
        "k" | "capitalization" => Observable::Capitalization,
        "other" => Observable::Other,
        _ => bail!("unknown observable `{text}`"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn durations_and_scales() {
        assert_eq!(parse_duration("14d").unwrap(), 14 * 86_400);
        assert_eq!(parse_duration("1h").unwrap(), 3600);
        assert!(parse_duration("3w").is_err());
        assert_eq!(parse_scale("14d", 86_400).unwrap(), 14);
        assert_eq!(parse_scale("6h", 3600).unwrap(), 6);
        assert!(parse_scale("90m", 3600).is_err());
        assert_eq!(parse_scales("8,16,4", 1).unwrap(), vec![4, 8, 16]);
        let s = parse_scales("10:1200:log20", 3600).unwrap();
        assert_eq!((s[0], *s.last().unwrap()), (10, 1200));
        assert!(s.len() <= 20 && s.len() >= 15);
    }

    #[test]
    fn q_lists() {
        let q = parse_q_list("-4:4:0.5").unwrap();
        assert_eq!(q.len(), 16);
        assert!(!q.contains(&0.0));
        assert_eq!(parse_q_list("1, 2,4").unwrap(), vec![1.0, 2.0, 4.0]);
        assert_eq!(parse_q_list("0").unwrap(), vec![0.0]);
        assert!(parse_q_list("4:-4:1").is_err());
    }

    #[test]
    fn start_formats() {
        assert_eq!(parse_start("1970-01-02").unwrap(), 86_400);
        assert_eq!(parse_start("1970-01-01T01:00:00").unwrap(), 3600);
        assert_eq!(parse_start("1970-01-01T02:00:00+01:00").unwrap(), 3600);
        assert!(parse_start("yesterday").is_err());
    }

    fn sample() -> RunConfig {
        serde_json::from_str(
            r#"{
                "input": {"source": "synthetic", "generator": {"kind": "gaussian_iid", "seed": 1, "t_pts": 500, "n_series": 4}},
                "q": [1, 2],
                "scales": [10, 20, 40],
                "matrices": [{"kind": "pearson"}, {"kind": "detrended"}, {"kind": "detrended", "q": 2, "s": 20}],
                "output_dir": "out"
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn matrix_expansion_dedups() {
        let kinds = sample().matrix_kinds();
        assert_eq!(kinds.len(), 7);
        assert_eq!(kinds[0], CorrKind::Pearson);
        assert_eq!(kinds[1], CorrKind::Detrended { q: 1.0, s: 10 });
    }

    #[test]
    fn defaults_and_validation() {
        let c = sample();
        assert_eq!(c.dt, 3600);
        assert_eq!(c.order, 2);
        assert_eq!(c.hurst_range(), (10, 40));
        assert!(c.validate().is_ok());
        let mut bad = c.clone();
        bad.scales = vec![20, 10];
        assert!(bad.validate().is_err());
        let unknown = r#"{"input": {"source": "panel", "path": "p.csv"}, "q": [2], "scales": [8], "output_dir": "o", "colour": 1}"#;
        assert!(serde_json::from_str::<RunConfig>(unknown).is_err());
    }

    #[test]
    fn canonical_json_ignores_output_dir() {
        let a = sample();
        let mut b = a.clone();
        b.output_dir = PathBuf::from("elsewhere");
        assert_eq!(a.canonical_json(), b.canonical_json());
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(back, a);
    }
}
