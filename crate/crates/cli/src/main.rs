use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use detrendcorr_cli::config::{
    parse_duration, parse_observable, parse_q_list, parse_scale, parse_scales, parse_start,
};
use detrendcorr_cli::manifest::{file_stem, Manifest, MANIFEST_FILE};
use detrendcorr_cli::pipeline::{build_matrix, column_distribution, load_ticks, scaling_report, tick_files};
use detrendcorr_cli::render::{ccdf_figure, eigen_figure, fluctuation_figure, render_figures, tree_figure};
use detrendcorr_cli::{init_threads, run_pipeline, RunConfig};
use detrendcorr_core::corrmat::{rho_q, CorrKind, CorrMatrix, MatrixMeta};
use detrendcorr_core::ingest::{collection_metadata, liquidity_filter, parse_supplies, Window};
use detrendcorr_core::mfdfa::{default_scaling_range, fluctuation_auto, fluctuation_pair, DetrendConfig};
use detrendcorr_core::mstnet::{degree_tail_fit, degrees, detect_communities, distance_matrix, mst};
use detrendcorr_core::rmt::{eigen_sym, filter_market_mode, mp_law, write_eigenvector_csv, SpectrumReport};
use detrendcorr_core::series::{cap_increment_panel, tx_count_panel, HOUR};
use detrendcorr_core::synthlab::{Generated, GeneratorKind, GeneratorSpec};
use detrendcorr_core::{CommunityGraph, Observable, Panel};

#[derive(Parser)]
#[command(
    name = "detrendcorr",
    version,
    about = "Detrended cross-correlation, spectral and network analysis of market time series"
)]
struct Cli {
    /// Worker threads (default: one per core).
    #[arg(long, global = true, env = "DETRENDCORR_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse tick files and write the canonical table and per-collection summary.
    Ingest(IngestArgs),
    /// Resample ticks into a panel of increments or counts.
    Panel(PanelArgs),
    /// CCDFs, tail fits and autocorrelation of each panel column.
    Dist(DistArgs),
    /// Fluctuation functions, Hurst exponents and singularity spectra.
    Mfdfa(MfdfaArgs),
    /// Pearson or detrended correlation matrix of a panel.
    Corr(CorrArgs),
    /// Eigenvalues, Marchenko–Pastur comparison and market-mode filtering.
    Rmt(RmtArgs),
    /// Minimal spanning tree, degree distribution and communities.
    Mst(MstArgs),
    /// Synthetic panels and trees.
    Synth(SynthArgs),
    /// Full pipeline from a JSON config.
    Run(RunArgs),
    /// Redraw the figures listed in a run manifest.
    Render(RenderArgs),
}

#[derive(Args)]
struct WindowArgs {
    /// Tick CSV file or directory of tick CSV files.
    #[arg(long)]
    ticks: PathBuf,
    /// Window start, ISO 8601 (UTC).
    #[arg(long)]
    start: String,
    #[arg(long)]
    days: u32,
    /// `collection_id,supply` file.
    #[arg(long)]
    supplies: Option<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    min_tx_per_day: f64,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct PanelArgs {
    #[command(flatten)]
    window: WindowArgs,
    /// `c` for capitalization increments, `n` for transaction counts.
    #[arg(long, default_value = "c")]
    observable: String,
    /// Sampling interval, e.g. `1h` or `24h`.
    #[arg(long, default_value = "1h")]
    dt: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PanelInput {
    /// Panel CSV (`t` column plus one column per series).
    #[arg(long)]
    panel: PathBuf,
    /// What the panel holds: `c`, `n`, `k` or `other`.
    #[arg(long, default_value = "c")]
    observable: String,
}

impl PanelInput {
    fn load(&self) -> Result<Panel> {
        let f = File::open(&self.panel).with_context(|| format!("opening {}", self.panel.display()))?;
        Ok(Panel::read_csv(f, parse_observable(&self.observable)?)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FitKind {
    Powerlaw,
    Stretched,
    Both,
}

#[derive(Args)]
struct DistArgs {
    #[command(flatten)]
    input: PanelInput,
    #[arg(long, value_enum, default_value = "both")]
    fit: FitKind,
    /// Tail threshold as a percentile of the sample.
    #[arg(long, default_value_t = 90.0)]
    xmin_pct: f64,
    #[arg(long, default_value_t = 100)]
    acf_lags: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct MfdfaArgs {
    #[command(flatten)]
    input: PanelInput,
    /// Two column labels, `A,B`, for the cross-correlation grid.
    #[arg(long, conflicts_with = "column")]
    pair: Option<String>,
    /// A single column; all columns when neither this nor --pair is given.
    #[arg(long)]
    column: Option<String>,
    /// `lo:hi:step` or a comma list.
    #[arg(long, default_value = "-4:4:0.5", allow_hyphen_values = true)]
    q: String,
    /// `lo:hi:logN` or a comma list; counts or durations such as `14d`.
    #[arg(long)]
    scales: Option<String>,
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Scaling range for Hurst fits, `lo:hi`.
    #[arg(long)]
    range: Option<String>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixKind {
    Pearson,
    Detrended,
}

#[derive(Args)]
struct CorrArgs {
    #[command(flatten)]
    input: PanelInput,
    #[arg(long, value_enum, default_value = "pearson")]
    kind: MatrixKind,
    #[arg(long, allow_hyphen_values = true)]
    q: Option<f64>,
    /// Scale as a point count or a duration such as `14d`.
    #[arg(long)]
    s: Option<String>,
    #[arg(long, default_value_t = 2)]
    order: usize,
    /// Matrix CSV; metadata goes to the `.meta.json` sidecar.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MatrixInput {
    /// Matrix CSV with its `.meta.json` sidecar alongside.
    #[arg(long)]
    matrix: PathBuf,
}

impl MatrixInput {
    fn load(&self) -> Result<CorrMatrix> {
        let meta_path = sidecar(&self.matrix);
        let meta: MatrixMeta = serde_json::from_reader(
            File::open(&meta_path).with_context(|| format!("opening {}", meta_path.display()))?,
        )?;
        let f = File::open(&self.matrix).with_context(|| format!("opening {}", self.matrix.display()))?;
        Ok(CorrMatrix::read_csv(f, &meta)?)
    }
}

#[derive(Args)]
struct RmtArgs {
    #[command(flatten)]
    matrix: MatrixInput,
    /// Panel the matrix was built from; required by --filter-top.
    #[arg(long)]
    panel: Option<PathBuf>,
    #[arg(long, default_value = "c")]
    observable: String,
    /// Regress out the largest-eigenvalue mode and report the residual spectrum.
    #[arg(long, requires = "panel")]
    filter_top: bool,
    /// Accept matrices with undefined cells.
    #[arg(long)]
    allow_flagged: bool,
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct MstArgs {
    #[command(flatten)]
    matrix: MatrixInput,
    /// Detect communities with the Louvain method.
    #[arg(long)]
    communities: bool,
    /// Graph for community detection: the tree itself, or all pairs weighted `2 - d`.
    #[arg(long, value_enum, default_value = "tree", requires = "communities")]
    community_graph: GraphKind,
    /// Also draw the tree.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// `label,size` CSV for node sizes.
    #[arg(long)]
    sizes: Option<PathBuf>,
    /// Layout seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKind {
    Tree,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum SynthKind {
    GaussianIid,
    Fgn,
    OneFactor,
    Pareto,
    Cascade,
    PaTree,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    #[arg(long = "T", default_value_t = 1024)]
    t: usize,
    #[arg(long = "I", default_value_t = 1)]
    i: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Factor loading for one_factor.
    #[arg(long, default_value_t = 0.6)]
    loading: f64,
    /// Idiosyncratic scale for one_factor (default keeps unit variance).
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 0.7)]
    hurst: f64,
    #[arg(long, default_value_t = 1.5)]
    gamma: f64,
    /// Cascade depth (default: smallest with 2^depth >= T).
    #[arg(long)]
    depth: Option<u32>,
    /// Panel CSV, or the edge CSV for pa_tree (nodes go to `<stem>.nodes.csv`).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Where `figures/` is written (default: next to the manifest).
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn sidecar(matrix: &Path) -> PathBuf {
    matrix.with_extension("meta.json")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn window_table(a: &WindowArgs) -> Result<(detrendcorr_core::TickTable, BTreeMap<String, u64>)> {
    let window = Window::new(parse_start(&a.start)?, a.days);
    let (table, _) = load_ticks(&tick_files(&a.ticks)?, window)?;
    let supplies = match &a.supplies {
        Some(p) => parse_supplies(File::open(p).with_context(|| format!("opening {}", p.display()))?)?,
        None => BTreeMap::new(),
    };
    Ok((table, supplies))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let (table, supplies) = window_table(&a.window)?;
    fs::create_dir_all(&a.out)?;
    table.write_csv(create(&a.out.join("ticks.csv"))?)?;
    let ids = table.collections();
    let hourly = tx_count_panel(&table, &ids, HOUR)?;
    let (metas, missing) = collection_metadata(&table, &supplies, &hourly)?;
    let liquid: Vec<String> = liquidity_filter(&table, a.window.min_tx_per_day)
        .into_iter()
        .collect();
    write_json(
        &a.out.join("collections.json"),
        &serde_json::json!({
            "collections": metas,
            "missing_supply": missing,
            "liquid": liquid,
            "min_tx_per_day": a.window.min_tx_per_day,
        }),
    )?;
    println!(
        "{} records, {} collections, {} liquid",
        table.len(),
        ids.len(),
        liquid.len()
    );
    Ok(())
}

fn panel(a: PanelArgs) -> Result<()> {
    let (table, supplies) = window_table(&a.window)?;
    let dt = parse_duration(&a.dt)?;
    let liquid: Vec<String> = liquidity_filter(&table, a.window.min_tx_per_day)
        .into_iter()
        .collect();
    ensure!(!liquid.is_empty(), "no collection meets the liquidity threshold");
    let ids: Vec<&str> = liquid.iter().map(String::as_str).collect();
    let p = match parse_observable(&a.observable)? {
        Observable::CapIncrement => cap_increment_panel(&table, &ids, &supplies, dt)?,
        Observable::TxCount => tx_count_panel(&table, &ids, dt)?,
        o => bail!("observable {o:?} cannot be built from ticks"),
    };
    p.write_csv(create(&a.out)?)?;
    println!("{} series x {} points", p.width(), p.len());
    Ok(())
}

fn dist(a: DistArgs) -> Result<()> {
    let p = a.input.load()?;
    let mut curves = Vec::new();
    let mut fits = Vec::new();
    let mut acfs = Vec::new();
    for (label, col) in p.labels().iter().zip(p.columns()) {
        let (c, mut f, acf) = column_distribution(label, col, p.observable(), a.xmin_pct, a.acf_lags);
        match a.fit {
            FitKind::Powerlaw => f.stretched_exp = None,
            FitKind::Stretched => f.power_law = None,
            FitKind::Both => {}
        }
        curves.extend(c);
        fits.push(f);
        acfs.extend(acf);
    }
    write_json(&a.out_dir.join("tail_fits.json"), &fits)?;
    write_json(&a.out_dir.join("ccdf.json"), &curves)?;
    write_json(&a.out_dir.join("acf.json"), &acfs)?;
    write_text(
        &a.out_dir.join("ccdf.svg"),
        &ccdf_figure(&curves, "Complementary cumulative distributions"),
    )?;
    Ok(())
}

fn parse_range(text: &str) -> Result<(usize, usize)> {
    let (lo, hi) = text
        .split_once(':')
        .ok_or_else(|| anyhow!("expected `lo:hi`, got `{text}`"))?;
    Ok((lo.trim().parse()?, hi.trim().parse()?))
}

fn mfdfa(a: MfdfaArgs) -> Result<()> {
    let p = a.input.load()?;
    let t = p.len();
    let mut cfg = DetrendConfig::default_for(t).with_q(parse_q_list(&a.q)?);
    if let Some(s) = &a.scales {
        cfg = cfg.with_scales(parse_scales(s, p.dt())?);
    }
    cfg.order = a.order;
    cfg.validate(t)?;
    let range = match &a.range {
        Some(r) => parse_range(r)?,
        None => default_scaling_range(t),
    };
    fs::create_dir_all(&a.out_dir)?;
    let column = |label: &str| -> Result<&[f64]> {
        p.column(label)
            .ok_or_else(|| anyhow!("no column `{label}` in the panel"))
    };
    if let Some(pair) = &a.pair {
        let (la, lb) = pair
            .split_once(',')
            .ok_or_else(|| anyhow!("--pair expects `A,B`"))?;
        let (x, y) = (column(la.trim())?, column(lb.trim())?);
        let (xx, yy, xy) = fluctuation_pair(x, y, &cfg)?;
        for (name, g) in [("xx", &xx), ("yy", &yy), ("xy", &xy)] {
            g.write_csv(create(&a.out_dir.join(format!("grid_{name}.csv")))?)?;
        }
        let mut w = csv::Writer::from_writer(create(&a.out_dir.join("rho.csv"))?);
        w.write_record(["q", "s", "rho"])?;
        for &q in &cfg.q_grid {
            for &s in &cfg.s_grid {
                let rho = rho_q(x, y, q, s, &cfg).map_or(f64::NAN, |r| r);
                w.write_record([q.to_string(), s.to_string(), rho.to_string()])?;
            }
        }
        w.flush()?;
        write_text(
            &a.out_dir.join("fluctuation_xy.svg"),
            &fluctuation_figure(&xy, &format!("Cross fluctuation functions: {la} x {lb}")),
        )?;
        return Ok(());
    }
    let labels: Vec<String> = match &a.column {
        Some(c) => vec![c.clone()],
        None => p.labels().to_vec(),
    };
    let mut reports = Vec::new();
    for label in &labels {
        let g = fluctuation_auto(column(label)?, &cfg)?;
        let stem = file_stem(label);
        g.write_csv(create(&a.out_dir.join(format!("{stem}.csv")))?)?;
        write_text(
            &a.out_dir.join(format!("{stem}.svg")),
            &fluctuation_figure(&g, &format!("Fluctuation functions: {label}")),
        )?;
        let r = scaling_report(label, &g, range);
        if let Some(h) = r.hurst.as_ref().and_then(|h| h.get(2.0)) {
            println!("{label}: h(2) = {h:.4}");
        }
        reports.push(r);
    }
    write_json(&a.out_dir.join("scaling.json"), &reports)
}

fn corr(a: CorrArgs) -> Result<()> {
    let p = a.input.load()?;
    let kind = match a.kind {
        MatrixKind::Pearson => CorrKind::Pearson,
        MatrixKind::Detrended => CorrKind::Detrended {
            q: a.q
                .ok_or_else(|| anyhow!("--q is required for detrended matrices"))?,
            s: parse_scale(
                a.s.as_deref()
                    .ok_or_else(|| anyhow!("--s is required for detrended matrices"))?,
                p.dt(),
            )?,
        },
    };
    let mut cfg = DetrendConfig::default_for(p.len());
    cfg.order = a.order;
    let m = build_matrix(&p, &kind, &cfg)?;
    m.write_csv(create(&a.out)?)?;
    write_json(&sidecar(&a.out), &m.meta())?;
    if m.is_flagged() {
        log::warn!("{} cells could not be evaluated and hold 0", m.flagged.len());
    }
    println!("{} x {} matrix written to {}", m.dim(), m.dim(), a.out.display());
    Ok(())
}

fn rmt(a: RmtArgs) -> Result<()> {
    let m = a.matrix.load()?;
    m.ensure_usable(a.allow_flagged)?;
    let spec = eigen_sym(&m)?;
    let report = SpectrumReport::new(&spec, &mp_law(m.t_pts, m.dim(), 1.0)?);
    fs::create_dir_all(&a.out_dir)?;
    write_json(&a.out_dir.join("spectrum.json"), &report)?;
    write_text(
        &a.out_dir.join("eigenvalues.svg"),
        &eigen_figure(&report, 40, "Eigenvalues"),
    )?;
    for k in 0..2.min(spec.dim()) {
        write_eigenvector_csv(
            &spec.labels,
            &spec.eigenvectors[k],
            create(&a.out_dir.join(format!("v{}.csv", k + 1)))?,
        )?;
    }
    println!(
        "lambda_1 = {:.4}, {} above and {} below [{:.4}, {:.4}]",
        report.eigenvalues[0], report.n_above, report.n_below, report.mp_bounds.0, report.mp_bounds.1
    );
    if a.filter_top {
        let path = a.panel.as_ref().expect("clap enforces --panel");
        let p = Panel::read_csv(File::open(path)?, parse_observable(&a.observable)?)?;
        ensure!(
            p.labels() == m.labels.as_slice(),
            "panel columns do not match the matrix labels"
        );
        let f = filter_market_mode(&p, &spec.eigenvectors[0])?;
        let mut cfg = DetrendConfig::default_for(p.len());
        cfg.order = a.order;
        let m2 = build_matrix(&f.residuals, &m.kind, &cfg)?;
        let spec2 = eigen_sym(&m2)?;
        let report2 = SpectrumReport::new(&spec2, &mp_law(m2.t_pts, m2.dim(), 1.0)?);
        write_json(&a.out_dir.join("filtered.spectrum.json"), &report2)?;
        write_text(
            &a.out_dir.join("filtered.eigenvalues.svg"),
            &eigen_figure(&report2, 40, "Eigenvalues after removing the market mode"),
        )?;
        f.residuals.write_csv(create(&a.out_dir.join("residuals.csv"))?)?;
        println!(
            "after filtering: lambda_1 = {:.4}, {} above",
            report2.eigenvalues[0], report2.n_above
        );
    }
    Ok(())
}

fn read_sizes(path: &Path, labels: &[String]) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut map = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        if let (Some(l), Some(v)) = (rec.get(0), rec.get(1)) {
            if let Ok(v) = v.trim().parse::<f64>() {
                map.insert(l.to_string(), v);
            }
        }
    }
    Ok(labels
        .iter()
        .map(|l| map.get(l).copied().unwrap_or(1.0))
        .collect())
}

fn mst_cmd(a: MstArgs) -> Result<()> {
    let m = a.matrix.load()?;
    let sizes = match &a.sizes {
        Some(p) => read_sizes(p, &m.labels)?,
        None => vec![1.0; m.dim()],
    };
    let d = distance_matrix(&m);
    let mut tree = mst(&d)?.with_sizes(sizes);
    let mut modularity = None;
    if a.communities {
        let graph = match a.community_graph {
            GraphKind::Tree => CommunityGraph::Tree,
            GraphKind::Full => CommunityGraph::Full,
        };
        let c = detect_communities(&tree, &d, graph)?;
        println!("{} communities, modularity {:.4}", c.count(), c.modularity);
        modularity = Some(c.modularity);
        tree.communities = Some(c.assignment);
    }
    fs::create_dir_all(&a.out_dir)?;
    tree.write_edges_csv(create(&a.out_dir.join("edges.csv"))?)?;
    tree.write_nodes_csv(create(&a.out_dir.join("nodes.csv"))?)?;
    let dd = degrees(&tree);
    write_json(
        &a.out_dir.join("degrees.json"),
        &serde_json::json!({
            "distribution": dd,
            "degree_sum": dd.total(),
            "tail_fit": degree_tail_fit(&dd).ok(),
            "modularity": modularity,
        }),
    )?;
    if let Some(svg) = &a.svg {
        write_text(svg, &tree_figure(&tree, a.seed, "Minimal spanning tree"))?;
    }
    println!("tree length {:.4}", tree.total_weight());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let kind = match a.kind {
        SynthKind::GaussianIid => GeneratorKind::GaussianIid,
        SynthKind::Fgn => GeneratorKind::Fgn { hurst: a.hurst },
        SynthKind::OneFactor => GeneratorKind::OneFactor {
            loading: a.loading,
            sigma: a
                .sigma
                .unwrap_or_else(|| (1.0 - a.loading * a.loading).max(0.0).sqrt()),
        },
        SynthKind::Pareto => GeneratorKind::Pareto { gamma: a.gamma },
        SynthKind::Cascade => GeneratorKind::Cascade {
            depth: a
                .depth
                .unwrap_or_else(|| a.t.max(2).next_power_of_two().trailing_zeros()),
        },
        SynthKind::PaTree => GeneratorKind::PaTree,
    };
    let spec = GeneratorSpec {
        kind,
        seed: a.seed,
        t_pts: a.t,
        n_series: a.i,
    };
    match spec.generate()? {
        Generated::Panel(p) => p.write_csv(create(&a.out)?)?,
        Generated::Tree(t) => {
            t.write_edges_csv(create(&a.out)?)?;
            let nodes = a.out.with_extension("nodes.csv");
            t.write_nodes_csv(create(&nodes)?)?;
        }
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(dir) = a.out_dir {
        cfg.output_dir = dir;
    }
    let manifest = run_pipeline(&cfg)?;
    println!(
        "{} artifacts, manifest at {}",
        manifest.artifacts.len(),
        cfg.output_dir.join(MANIFEST_FILE).display()
    );
    Ok(())
}

fn render(a: RenderArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let root = a.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let out = a.out_dir.unwrap_or_else(|| root.clone());
    let figures = render_figures(&manifest, &root, a.seed)?;
    for (rel, svg) in &figures {
        write_text(&out.join(rel), svg)?;
    }
    println!("{} figures written", figures.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = init_threads(cli.jobs) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Panel(a) => panel(a),
        Command::Dist(a) => dist(a),
        Command::Mfdfa(a) => mfdfa(a),
        Command::Corr(a) => corr(a),
        Command::Rmt(a) => rmt(a),
        Command::Mst(a) => mst_cmd(a),
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
        Command::Render(a) => render(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
