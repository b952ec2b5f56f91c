//! The full analysis run: ingest, panel, distributions, fluctuation
//! functions, correlation matrices, spectra, trees and figures.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context, Result};
use detrendcorr_core::corrmat::{detrended_matrix, offdiag_histogram, pearson_matrix, CorrKind, CorrMatrix};
use detrendcorr_core::diststats::{
    acf, ccdf, fit_powerlaw_tail, fit_stretched_exp, AcfCurve, TailFit, TailThreshold,
};
use detrendcorr_core::ingest::{
    collection_metadata, liquidity_filter, parse_supplies, parse_ticks, CollectionMeta, TickTable, Window,
};
use detrendcorr_core::mfdfa::{
    fluctuation_auto, generalized_hurst, singularity_spectrum, DetrendConfig, HurstResult,
    SingularitySpectrum,
};
use detrendcorr_core::mstnet::{
    degree_tail_fit, degrees, detect_communities, distance_matrix, mst, DegreeDistribution,
};
use detrendcorr_core::rmt::{eigen_sym, filter_market_mode, mp_law, write_eigenvector_csv, SpectrumReport};
use detrendcorr_core::series::{cap_increment_panel, daily_pattern, tx_count_panel, Series, HOUR};
use detrendcorr_core::synthlab::Generated;
use detrendcorr_core::{Error as CoreError, Observable, Panel};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{parse_start, InputSpec, RunConfig};
use crate::manifest::{file_stem, sha256_hex, ArtifactKind, ArtifactWriter, InputHash, Manifest};
use crate::render::{render_figures, LabeledCcdf};

/// A run that stopped in `stage`.
#[derive(Debug)]
pub struct PipelineError {
    pub stage: String,
    pub error: anyhow::Error,
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {:#}", self.stage, self.error)
    }
}

impl std::error::Error for PipelineError {}

/// Most CCDF points kept per series in the stored curves.
pub const CCDF_POINTS: usize = 400;

/// Runs every stage and writes `manifest.json`, or leaves a `.partial`
/// marker next to whatever was written before the failure.
pub fn run_pipeline(cfg: &RunConfig) -> std::result::Result<Manifest, PipelineError> {
    let manifest = Manifest::new(sha256_hex(cfg.canonical_json().as_bytes()));
    let mut w = ArtifactWriter::new(&cfg.output_dir, manifest).map_err(|error| PipelineError {
        stage: "setup".into(),
        error,
    })?;
    match stages(cfg, &mut w) {
        Ok(()) => {
            w.finish().map_err(|error| PipelineError {
                stage: "manifest".into(),
                error,
            })?;
            Ok(w.manifest)
        }
        Err(error) => {
            if let Err(e) = w.abandon(&format!("{error:#}")) {
                log::error!("could not write the partial-run marker: {e:#}");
            }
            Err(PipelineError {
                stage: w.stage().to_string(),
                error,
            })
        }
    }
}

fn stages(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<()> {
    w.begin_stage("ingest");
    let loaded = ingest_stage(cfg, w)?;
    w.begin_stage("panel");
    let (panel, sizes) = panel_stage(cfg, w, loaded)?;
    w.begin_stage("diststats");
    dist_stage(cfg, w, &panel)?;
    w.begin_stage("mfdfa");
    mfdfa_stage(cfg, w, &panel)?;
    w.begin_stage("corrmat");
    let matrices = corr_stage(cfg, w, &panel)?;
    w.begin_stage("rmt");
    rmt_stage(cfg, w, &panel, &matrices)?;
    w.begin_stage("mstnet");
    mst_stage(cfg, w, &matrices, &sizes)?;
    if cfg.render {
        w.begin_stage("render");
        let figures = render_figures(&w.manifest.clone(), w.root(), cfg.seed)?;
        for (rel, svg) in figures {
            w.write(&rel, ArtifactKind::Figure, None, svg.as_bytes())?;
        }
    }
    Ok(())
}

enum Loaded {
    Ticks {
        table: TickTable,
        supplies: BTreeMap<String, u64>,
        metas: Vec<CollectionMeta>,
        liquid: Vec<String>,
    },
    Panel(Panel),
}

/// Tick files at `path`: the file itself, or every `*.csv` in a directory
/// in name order.
pub fn tick_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        ensure!(!files.is_empty(), "no tick files in {}", path.display());
        Ok(files)
    } else if path.is_file() {
        Ok(vec![path.to_path_buf()])
    } else {
        bail!("tick input {} does not exist", path.display())
    }
}

/// Parses and merges tick files. Returns the table and the raw bytes of
/// each file for hashing.
/// A file's display path and raw bytes.
pub type RawFile = (String, Vec<u8>);

pub fn load_ticks(files: &[PathBuf], window: Window) -> Result<(TickTable, Vec<RawFile>)> {
    let mut records = Vec::new();
    let mut raw = Vec::new();
    for f in files {
        let bytes = fs::read(f).with_context(|| format!("reading {}", f.display()))?;
        match parse_ticks(&bytes[..], window) {
            Ok(p) => records.extend(p.table.records().iter().cloned()),
            Err(CoreError::EmptyTable) => log::warn!("{} has no ticks inside the window", f.display()),
            Err(e) => return Err(anyhow!(e).context(format!("parsing {}", f.display()))),
        }
        let name = f
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        raw.push((name, bytes));
    }
    let table = TickTable::new(records, window);
    if table.is_empty() {
        return Err(anyhow!(CoreError::EmptyTable));
    }
    Ok((table, raw))
}

#[derive(Serialize)]
struct CollectionsReport<'a> {
    collections: &'a [CollectionMeta],
    missing_supply: &'a [String],
    liquid: &'a [String],
    min_tx_per_day: f64,
}

fn ingest_stage(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<Loaded> {
    match &cfg.input {
        InputSpec::Ticks {
            ticks,
            supplies,
            start,
            days,
            min_tx_per_day,
        } => {
            let window = Window::new(parse_start(start)?, *days);
            let files = tick_files(ticks)?;
            let (table, raw) = load_ticks(&files, window)?;
            for (name, bytes) in &raw {
                w.manifest.inputs.push(InputHash {
                    path: name.clone(),
                    sha256: sha256_hex(bytes),
                });
            }
            let supplies = match supplies {
                Some(p) => {
                    let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
                    w.manifest.inputs.push(InputHash {
                        path: p
                            .file_name()
                            .map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
                        sha256: sha256_hex(&bytes),
                    });
                    parse_supplies(&bytes[..])?
                }
                None => BTreeMap::new(),
            };
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            w.write("ingest/ticks.csv", ArtifactKind::Ticks, None, &buf)?;

            let ids = table.collections();
            let hourly = tx_count_panel(&table, &ids, HOUR)?;
            let (metas, missing) = collection_metadata(&table, &supplies, &hourly)?;
            let liquid: Vec<String> = liquidity_filter(&table, *min_tx_per_day).into_iter().collect();
            w.write_json(
                "ingest/collections.json",
                ArtifactKind::Collections,
                None,
                &CollectionsReport {
                    collections: &metas,
                    missing_supply: &missing,
                    liquid: &liquid,
                    min_tx_per_day: *min_tx_per_day,
                },
            )?;
            if !liquid.is_empty() {
                let ids: Vec<&str> = liquid.iter().map(String::as_str).collect();
                let hourly = hourly.select(&ids)?;
                let total: Vec<f64> = (0..hourly.len())
                    .map(|k| hourly.columns().iter().map(|c| c[k]).sum())
                    .collect();
                let series = Series::new(total, HOUR, hourly.t0(), Observable::TxCount);
                match daily_pattern(&series) {
                    Ok(p) => {
                        w.write_json("panel/daily_pattern.json", ArtifactKind::DailyPattern, None, &p)?
                    }
                    Err(e) => log::warn!("no daily pattern: {e}"),
                }
            }
            Ok(Loaded::Ticks {
                table,
                supplies,
                metas,
                liquid,
            })
        }
        InputSpec::Panel { path } => {
            let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            w.manifest.inputs.push(InputHash {
                path: path
                    .file_name()
                    .map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
                sha256: sha256_hex(&bytes),
            });
            Ok(Loaded::Panel(Panel::read_csv(&bytes[..], cfg.observable)?))
        }
        InputSpec::Synthetic { generator } => match generator.generate()? {
            Generated::Panel(p) => Ok(Loaded::Panel(p)),
            Generated::Tree(_) => bail!("the pa_tree generator yields a tree, not a panel"),
        },
    }
}

fn panel_stage(cfg: &RunConfig, w: &mut ArtifactWriter, loaded: Loaded) -> Result<(Panel, Vec<f64>)> {
    let (panel, sizes) = match loaded {
        Loaded::Panel(p) => {
            let n = p.width();
            (p, vec![1.0; n])
        }
        Loaded::Ticks {
            table,
            supplies,
            metas,
            liquid,
        } => {
            let ids: Vec<&str> = liquid.iter().map(String::as_str).collect();
            let panel = match cfg.observable {
                Observable::CapIncrement => cap_increment_panel(&table, &ids, &supplies, cfg.dt)?,
                Observable::TxCount => tx_count_panel(&table, &ids, cfg.dt)?,
                o => bail!("observable {o:?} cannot be built from ticks"),
            };
            let by_id: BTreeMap<&str, &CollectionMeta> =
                metas.iter().map(|m| (m.collection_id.as_str(), m)).collect();
            let sizes = ids
                .iter()
                .map(|id| {
                    let m = by_id[id];
                    match cfg.observable {
                        Observable::TxCount => m.n_total as f64,
                        _ => m.capitalization_last_day.unwrap_or(1.0),
                    }
                })
                .collect();
            (panel, sizes)
        }
    };
    ensure!(
        panel.width() >= 2,
        "correlation analysis needs at least two series, have {}",
        panel.width()
    );
    let mut buf = Vec::new();
    panel.write_csv(&mut buf)?;
    w.write("panel/panel.csv", ArtifactKind::Panel, None, &buf)?;
    Ok((panel, sizes))
}

/// Keeps at most `max` points, evenly spaced in `ln P`, plus both ends.
pub fn thin_ccdf(points: &[(f64, f64)], max: usize) -> Vec<(f64, f64)> {
    if points.len() <= max || max < 2 {
        return points.to_vec();
    }
    let first = points[0].1.ln();
    let last = points[points.len() - 1].1.ln();
    let step = (first - last) / (max - 1) as f64;
    let mut out = vec![points[0]];
    let mut next = first - step;
    for p in &points[1..points.len() - 1] {
        if p.1.ln() <= next {
            out.push(*p);
            while next >= p.1.ln() {
                next -= step;
            }
        }
    }
    out.push(points[points.len() - 1]);
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct TailReport {
    pub label: String,
    pub power_law: Option<TailFit>,
    pub stretched_exp: Option<TailFit>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LabeledAcf {
    pub label: String,
    #[serde(flatten)]
    pub acf: AcfCurve,
}

/// Distribution diagnostics of one series: absolute values for increments,
/// raw values for counts.
pub fn column_distribution(
    label: &str,
    values: &[f64],
    observable: Observable,
    percentile: f64,
    acf_max_lag: usize,
) -> (Option<LabeledCcdf>, TailReport, Option<LabeledAcf>) {
    let v: Vec<f64> = if observable == Observable::TxCount {
        values.to_vec()
    } else {
        values.iter().map(|x| x.abs()).collect()
    };
    let mut notes = Vec::new();
    let curve = match ccdf(&v, true) {
        Ok(c) => Some(LabeledCcdf {
            label: label.into(),
            sigma: c.sigma,
            n: c.n,
            points: thin_ccdf(&c.points, CCDF_POINTS),
        }),
        Err(e) => {
            notes.push(format!("ccdf: {e}"));
            None
        }
    };
    let threshold = TailThreshold::Percentile(percentile);
    let power_law = fit_powerlaw_tail(&v, threshold)
        .map_err(|e| notes.push(format!("power law: {e}")))
        .ok();
    let stretched_exp = fit_stretched_exp(&v, threshold)
        .map_err(|e| notes.push(format!("stretched exponential: {e}")))
        .ok();
    let lag = acf_max_lag.min(v.len().saturating_sub(1) / 4);
    let acf_curve = if lag == 0 {
        None
    } else {
        acf(&v, lag)
            .map_err(|e| notes.push(format!("acf: {e}")))
            .ok()
            .map(|a| LabeledAcf {
                label: label.into(),
                acf: a,
            })
    };
    (
        curve,
        TailReport {
            label: label.into(),
            power_law,
            stretched_exp,
            notes,
        },
        acf_curve,
    )
}

fn dist_stage(cfg: &RunConfig, w: &mut ArtifactWriter, panel: &Panel) -> Result<()> {
    let rows: Vec<_> = panel
        .labels()
        .par_iter()
        .zip(panel.columns().par_iter())
        .map(|(label, col)| {
            column_distribution(
                label,
                col,
                panel.observable(),
                cfg.tail_percentile,
                cfg.acf_max_lag,
            )
        })
        .collect();
    let mut curves = Vec::new();
    let mut fits = Vec::new();
    let mut acfs = Vec::new();
    for (c, f, a) in rows {
        curves.extend(c);
        fits.push(f);
        acfs.extend(a);
    }
    w.write_json("dist/ccdf.json", ArtifactKind::Ccdf, None, &curves)?;
    w.write_json("dist/tail_fits.json", ArtifactKind::TailFits, None, &fits)?;
    w.write_json("dist/acf.json", ArtifactKind::Acf, None, &acfs)?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub label: String,
    pub hurst: Option<HurstResult>,
    pub spectrum: Option<SingularitySpectrum>,
    pub spectrum_width: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Generalized Hurst exponents and singularity spectrum of one grid.
pub fn scaling_report(
    label: &str,
    grid: &detrendcorr_core::FluctuationGrid,
    range: (usize, usize),
) -> ScalingReport {
    let mut notes = Vec::new();
    let hurst = generalized_hurst(grid, range)
        .map_err(|e| notes.push(format!("hurst: {e}")))
        .ok();
    let spectrum = hurst.as_ref().and_then(|h| {
        singularity_spectrum(h)
            .map_err(|e| notes.push(format!("spectrum: {e}")))
            .ok()
    });
    ScalingReport {
        label: label.into(),
        spectrum_width: spectrum.as_ref().map(|s| s.width()),
        hurst,
        spectrum,
        notes,
    }
}

fn mfdfa_stage(cfg: &RunConfig, w: &mut ArtifactWriter, panel: &Panel) -> Result<()> {
    let dcfg = cfg.detrend_config();
    dcfg.validate(panel.len())?;
    let range = cfg.hurst_range();
    let results = panel
        .labels()
        .par_iter()
        .zip(panel.columns().par_iter())
        .map(|(label, col)| {
            let grid = fluctuation_auto(col, &dcfg).with_context(|| format!("series `{label}`"))?;
            let report = scaling_report(label, &grid, range);
            Ok((grid, report))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::new();
    for (i, (grid, report)) in results.into_iter().enumerate() {
        let mut buf = Vec::new();
        grid.write_csv(&mut buf)?;
        let label = &panel.labels()[i];
        w.write(
            &format!("mfdfa/{i:03}_{}.csv", file_stem(label)),
            ArtifactKind::FluctuationGrid,
            Some(label),
            &buf,
        )?;
        reports.push(report);
    }
    w.write_json("mfdfa/scaling.json", ArtifactKind::Hurst, None, &reports)?;
    Ok(())
}

/// File-name stem for a matrix: `pearson` or `rho_q4_s14` (`m` marks a
/// negative q, `p` a decimal point).
pub fn matrix_group(kind: &CorrKind) -> String {
    match *kind {
        CorrKind::Pearson => "pearson".into(),
        CorrKind::Detrended { q, s } => {
            let q = format!("{q}").replace('-', "m").replace('.', "p");
            format!("rho_q{q}_s{s}")
        }
    }
}

pub fn build_matrix(panel: &Panel, kind: &CorrKind, dcfg: &DetrendConfig) -> Result<CorrMatrix> {
    Ok(match *kind {
        CorrKind::Pearson => pearson_matrix(panel)?,
        CorrKind::Detrended { q, s } => detrended_matrix(panel, q, s, dcfg)?,
    })
}

fn corr_stage(cfg: &RunConfig, w: &mut ArtifactWriter, panel: &Panel) -> Result<Vec<(String, CorrMatrix)>> {
    let dcfg = cfg.detrend_config();
    let mut out = Vec::new();
    for kind in cfg.matrix_kinds() {
        let group = matrix_group(&kind);
        let m = build_matrix(panel, &kind, &dcfg).with_context(|| format!("matrix `{group}`"))?;
        if m.is_flagged() {
            log::warn!("matrix `{group}` has {} undefined cells", m.flagged.len());
        }
        let mut buf = Vec::new();
        m.write_csv(&mut buf)?;
        w.write(
            &format!("corr/{group}.csv"),
            ArtifactKind::Matrix,
            Some(&group),
            &buf,
        )?;
        w.write_json(
            &format!("corr/{group}.meta.json"),
            ArtifactKind::MatrixMeta,
            Some(&group),
            &m.meta(),
        )?;
        let hist = offdiag_histogram(&m, cfg.histogram_bins)?;
        w.write_json(
            &format!("corr/{group}.hist.json"),
            ArtifactKind::Histogram,
            Some(&group),
            &hist,
        )?;
        out.push((group, m));
    }
    Ok(out)
}

#[derive(Serialize)]
struct FilteredReport<'a> {
    report: &'a SpectrumReport,
    regression: &'a [(f64, f64)],
    max_abs_factor_covariance: f64,
}

fn rmt_stage(
    cfg: &RunConfig,
    w: &mut ArtifactWriter,
    panel: &Panel,
    matrices: &[(String, CorrMatrix)],
) -> Result<()> {
    let dcfg = cfg.detrend_config();
    for (group, m) in matrices {
        m.ensure_usable(cfg.allow_flagged)
            .with_context(|| format!("matrix `{group}`"))?;
        let spec = eigen_sym(m)?;
        let report = SpectrumReport::new(&spec, &mp_law(m.t_pts, m.dim(), 1.0)?);
        w.write_json(
            &format!("rmt/{group}.spectrum.json"),
            ArtifactKind::Spectrum,
            Some(group),
            &report,
        )?;
        for k in 0..2.min(spec.dim()) {
            let mut buf = Vec::new();
            write_eigenvector_csv(&spec.labels, &spec.eigenvectors[k], &mut buf)?;
            w.write(
                &format!("rmt/{group}.v{}.csv", k + 1),
                ArtifactKind::Eigenvector,
                Some(group),
                &buf,
            )?;
        }
        if !cfg.filter_market_mode {
            continue;
        }
        let filtered = filter_market_mode(panel, &spec.eigenvectors[0])
            .with_context(|| format!("filtering matrix `{group}`"))?;
        let m2 = build_matrix(&filtered.residuals, &m.kind, &dcfg)?;
        m2.ensure_usable(cfg.allow_flagged)
            .with_context(|| format!("filtered matrix `{group}`"))?;
        let spec2 = eigen_sym(&m2)?;
        let report2 = SpectrumReport::new(&spec2, &mp_law(m2.t_pts, m2.dim(), 1.0)?);
        let cov = filtered
            .factor_covariances()
            .iter()
            .fold(0.0f64, |a, c| a.max(c.abs()));
        let fgroup = format!("{group}.filtered");
        w.write_json(
            &format!("rmt/{fgroup}.json"),
            ArtifactKind::Spectrum,
            Some(&fgroup),
            &FilteredReport {
                report: &report2,
                regression: &filtered.regression,
                max_abs_factor_covariance: cov,
            },
        )?;
        if *group == "pearson" {
            let mut buf = Vec::new();
            filtered.residuals.write_csv(&mut buf)?;
            w.write(
                "rmt/pearson.residuals.csv",
                ArtifactKind::FilteredPanel,
                Some(group),
                &buf,
            )?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct DegreeReport<'a> {
    distribution: &'a DegreeDistribution,
    degree_sum: usize,
    tail_fit: Option<TailFit>,
    modularity: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

fn mst_stage(
    cfg: &RunConfig,
    w: &mut ArtifactWriter,
    matrices: &[(String, CorrMatrix)],
    sizes: &[f64],
) -> Result<()> {
    for (group, m) in matrices {
        let d = distance_matrix(m);
        let mut tree = mst(&d)?.with_sizes(sizes.to_vec());
        let mut modularity = None;
        if cfg.communities {
            let c = detect_communities(&tree, &d, cfg.community_graph)?;
            modularity = Some(c.modularity);
            tree.communities = Some(c.assignment);
        }
        let mut edges = Vec::new();
        tree.write_edges_csv(&mut edges)?;
        let mut nodes = Vec::new();
        tree.write_nodes_csv(&mut nodes)?;
        w.write(
            &format!("mst/{group}.edges.csv"),
            ArtifactKind::TreeEdges,
            Some(group),
            &edges,
        )?;
        w.write(
            &format!("mst/{group}.nodes.csv"),
            ArtifactKind::TreeNodes,
            Some(group),
            &nodes,
        )?;
        let dd = degrees(&tree);
        let mut notes = Vec::new();
        let tail_fit = degree_tail_fit(&dd)
            .map_err(|e| notes.push(format!("tail fit: {e}")))
            .ok();
        w.write_json(
            &format!("mst/{group}.degrees.json"),
            ArtifactKind::Degrees,
            Some(group),
            &DegreeReport {
                degree_sum: dd.total(),
                distribution: &dd,
                tail_fit,
                modularity,
                notes,
            },
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thinning_keeps_ends_and_order() {
        let pts: Vec<(f64, f64)> = (0..10_000)
            .map(|k| (k as f64, 1.0 - k as f64 / 10_000.0))
            .collect();
        let t = thin_ccdf(&pts, 100);
        assert!(t.len() <= 101);
        assert_eq!(t[0], pts[0]);
        assert_eq!(*t.last().unwrap(), *pts.last().unwrap());
        assert!(t.windows(2).all(|w| w[0].0 < w[1].0));
        assert_eq!(thin_ccdf(&pts[..50], 100).len(), 50);
    }

    #[test]
    fn group_names() {
        assert_eq!(matrix_group(&CorrKind::Pearson), "pearson");
        assert_eq!(
            matrix_group(&CorrKind::Detrended { q: -1.5, s: 14 }),
            "rho_qm1p5_s14"
        );
        assert_eq!(matrix_group(&CorrKind::Detrended { q: 4.0, s: 30 }), "rho_q4_s30");
    }
}
