use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use detrendcorr_cli::manifest::{ArtifactKind, Manifest, MANIFEST_FILE, PARTIAL_MARKER};
use detrendcorr_cli::render::{eigen_figure, fluctuation_figure, tree_figure};
use detrendcorr_cli::svg::{Axis, Figure};
use detrendcorr_cli::{run_pipeline, RunConfig};
use detrendcorr_core::corrmat::pearson_matrix;
use detrendcorr_core::mfdfa::fluctuation_auto;
use detrendcorr_core::mstnet::{distance_matrix, mst};
use detrendcorr_core::rmt::{eigen_sym, mp_law, SpectrumReport};
use detrendcorr_core::synthlab::{fgn, gaussian_iid};
use detrendcorr_core::{CounterRng, DetrendConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_detrendcorr"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synthetic_config(dir: &Path, generator: serde_json::Value) -> RunConfig {
    let cfg = serde_json::json!({
        "input": {"source": "synthetic", "generator": generator},
        "observable": "other",
        "q": [-2.0, 2.0],
        "scales": [10, 16, 25, 40, 63, 100],
        "output_dir": dir.join("out"),
    });
    serde_json::from_value(cfg).unwrap()
}

#[test]
fn one_factor_pipeline_shows_market_mode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_config(
        dir.path(),
        serde_json::json!({"kind": "one_factor", "loading": 0.6, "sigma": 0.8, "seed": 1, "t_pts": 2000, "n_series": 20}),
    );
    let m = run_pipeline(&cfg).unwrap();
    let a = m.find(ArtifactKind::Spectrum, "pearson").unwrap();
    let report: SpectrumReport =
        serde_json::from_str(&fs::read_to_string(cfg.output_dir.join(&a.path)).unwrap()).unwrap();
    assert!(report.n_above >= 1);
    assert!(report.eigenvalues[0] > report.mp_bounds.1);
    // Every stage ran and every recorded file hashes to its manifest entry.
    for stage in [
        "ingest",
        "panel",
        "diststats",
        "mfdfa",
        "corrmat",
        "rmt",
        "mstnet",
        "render",
    ] {
        assert!(m.stages.iter().any(|s| s == stage), "missing stage {stage}");
    }
    for a in &m.artifacts {
        let bytes = fs::read(cfg.output_dir.join(&a.path)).unwrap();
        assert_eq!(
            detrendcorr_cli::manifest::sha256_hex(&bytes),
            a.sha256,
            "{}",
            a.path
        );
    }
    assert!(!cfg.output_dir.join(PARTIAL_MARKER).exists());
}

#[test]
fn empty_tick_directory_fails_in_ingest() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("ticks")).unwrap();
    let cfg = serde_json::json!({
        "input": {"source": "ticks", "ticks": "ticks", "start": "2021-01-01", "days": 10},
        "q": [2.0],
        "scales": [10, 20],
        "output_dir": "out",
    });
    fs::write(dir.path().join("config.json"), cfg.to_string()).unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(dir.path().join("config.json"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ingest"), "{err}");
    let marker: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out").join(PARTIAL_MARKER)).unwrap())
            .unwrap();
    assert_eq!(marker["failed_stage"], "ingest");
    assert!(!dir.path().join("out").join(MANIFEST_FILE).exists());
}

/// Hourly trades for `n` collections over `days` days from 2021-01-01.
fn write_ticks(path: &Path, n: usize, days: i64) {
    let start = 1_609_459_200i64;
    let mut rng = CounterRng::new(5);
    let mut text = String::from("collection_id,timestamp,price_usd\n");
    let market = rng.normals((days * 24) as usize);
    for c in 0..n {
        let mut price = 100.0 + 10.0 * c as f64;
        for h in 0..days * 24 {
            price *= (0.01 * market[h as usize] + 0.01 * rng.next_normal()).exp();
            let ts = start + h * 3600 + rng.below(3600) as i64;
            text.push_str(&format!("col{c},{ts},{price:.4}\n"));
        }
    }
    // A thin collection below the liquidity threshold.
    text.push_str(&format!("thin,{},5.0\n", start + 100));
    fs::write(path, text).unwrap();
}

#[test]
fn tick_pipeline_and_render() {
    let dir = tempfile::tempdir().unwrap();
    write_ticks(&dir.path().join("ticks.csv"), 6, 30);
    fs::write(
        dir.path().join("supplies.csv"),
        "collection_id,supply\ncol0,1000\ncol1,500\n",
    )
    .unwrap();
    let cfg = serde_json::json!({
        "input": {"source": "ticks", "ticks": "ticks.csv", "supplies": "supplies.csv", "start": "2021-01-01", "days": 30},
        "q": [-2.0, 2.0, 4.0],
        "scales": "ignored",
        "output_dir": "out",
    });
    // Scales must be a list.
    fs::write(dir.path().join("bad.json"), cfg.to_string()).unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(dir.path().join("bad.json"))
        .output()
        .unwrap();
    assert!(!out.status.success());

    let mut cfg = cfg;
    cfg["scales"] = serde_json::json!([10, 16, 25, 40, 63, 100, 150]);
    fs::write(dir.path().join("config.json"), cfg.to_string()).unwrap();
    run_ok(
        bin()
            .args(["run", "--config"])
            .arg(dir.path().join("config.json")),
    );
    let root = dir.path().join("out");
    let m = Manifest::load(&root.join(MANIFEST_FILE)).unwrap();
    let panel = fs::read_to_string(root.join("panel/panel.csv")).unwrap();
    assert_eq!(panel.lines().next().unwrap(), "t,col0,col1,col2,col3,col4,col5");
    assert_eq!(panel.lines().count(), 1 + 30 * 24 - 1);
    assert!(m.of_kind(ArtifactKind::Figure).count() >= 4);
    assert!(root.join("figures/pearson.mst.svg").exists());

    // Re-rendering into another directory reproduces the run's figures.
    let other = dir.path().join("redraw");
    run_ok(
        bin()
            .args(["render", "--manifest"])
            .arg(root.join(MANIFEST_FILE))
            .arg("--out-dir")
            .arg(&other),
    );
    for a in m.of_kind(ArtifactKind::Figure) {
        assert_eq!(
            fs::read(root.join(&a.path)).unwrap(),
            fs::read(other.join(&a.path)).unwrap(),
            "{}",
            a.path
        );
    }
}

#[test]
fn subcommands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_ticks(&d.join("ticks.csv"), 5, 20);
    let out = run_ok(
        bin()
            .args(["ingest", "--ticks"])
            .arg(d.join("ticks.csv"))
            .args(["--start", "2021-01-01", "--days", "20", "--out"])
            .arg(d.join("ingest")),
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("5 liquid"));
    assert!(d.join("ingest/collections.json").exists());

    run_ok(
        bin()
            .args(["panel", "--ticks"])
            .arg(d.join("ticks.csv"))
            .args([
                "--start",
                "2021-01-01",
                "--days",
                "20",
                "--observable",
                "n",
                "--dt",
                "24h",
                "--out",
            ])
            .arg(d.join("counts.csv")),
    );
    let counts = fs::read_to_string(d.join("counts.csv")).unwrap();
    assert_eq!(counts.lines().count(), 21);

    run_ok(
        bin()
            .args([
                "synth",
                "--kind",
                "one_factor",
                "--T",
                "1500",
                "--I",
                "12",
                "--seed",
                "4",
                "--out",
            ])
            .arg(d.join("p.csv")),
    );
    let panel_path = d.join("p.csv");
    let panel = ["--panel", panel_path.to_str().unwrap(), "--observable", "other"];
    run_ok(
        bin()
            .arg("corr")
            .args(panel)
            .arg("--out")
            .arg(d.join("m/pearson.csv")),
    );
    run_ok(
        bin()
            .arg("corr")
            .args(panel)
            .args(["--kind", "detrended", "--q", "-2", "--s", "30", "--out"])
            .arg(d.join("m/rho.csv")),
    );
    assert!(d.join("m/rho.meta.json").exists());
    let out = run_ok(
        bin()
            .args(["rmt", "--matrix"])
            .arg(d.join("m/pearson.csv"))
            .args(["--filter-top", "--observable", "other", "--panel"])
            .arg(d.join("p.csv"))
            .arg("--out-dir")
            .arg(d.join("r")),
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("after filtering"));
    for f in [
        "spectrum.json",
        "v1.csv",
        "v2.csv",
        "filtered.spectrum.json",
        "residuals.csv",
        "eigenvalues.svg",
    ] {
        assert!(d.join("r").join(f).exists(), "{f}");
    }
    run_ok(
        bin()
            .args(["mst", "--communities", "--matrix"])
            .arg(d.join("m/rho.csv"))
            .arg("--svg")
            .arg(d.join("tree.svg"))
            .arg("--out-dir")
            .arg(d.join("t")),
    );
    let out = run_ok(
        bin()
            .args(["mst", "--communities", "--community-graph", "full", "--matrix"])
            .arg(d.join("m/pearson.csv"))
            .arg("--out-dir")
            .arg(d.join("tf")),
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("communities"));
    let edges = fs::read_to_string(d.join("t/edges.csv")).unwrap();
    assert_eq!(edges.lines().count(), 1 + 11);
    run_ok(
        bin()
            .arg("mfdfa")
            .args(panel)
            .args([
                "--pair",
                "c00,c01",
                "--q=-2,2",
                "--scales",
                "10:300:log8",
                "--out-dir",
            ])
            .arg(d.join("f")),
    );
    let rho = fs::read_to_string(d.join("f/rho.csv")).unwrap();
    assert_eq!(rho.lines().count(), 1 + 2 * 8);
    run_ok(
        bin()
            .arg("dist")
            .args(panel)
            .args(["--fit", "powerlaw", "--out-dir"])
            .arg(d.join("d")),
    );
    assert!(d.join("d/tail_fits.json").exists());

    // Missing inputs and bad arguments exit nonzero.
    assert!(!bin()
        .args(["corr", "--panel", "nope.csv", "--out", "x.csv"])
        .output()
        .unwrap()
        .status
        .success());
    assert!(!bin()
        .arg("corr")
        .args(panel)
        .args(["--kind", "detrended", "--out"])
        .arg(d.join("x.csv"))
        .output()
        .unwrap()
        .status
        .success());
}

fn attr_values<'a>(svg: &'a str, marker: &str, attr: &str) -> Vec<&'a str> {
    svg.match_indices(marker)
        .filter_map(|(i, _)| {
            let rest = &svg[i..];
            let end = rest.find('>')?;
            let tag = &rest[..end];
            let key = format!("{attr}=\"");
            let j = tag.find(&key)? + key.len();
            Some(&tag[j..j + tag[j..].find('"')?])
        })
        .collect()
}

#[test]
fn mp_curve_spans_spectrum_edges() {
    let p = gaussian_iid(800, 40, 2);
    let spec = eigen_sym(&pearson_matrix(&p).unwrap()).unwrap();
    let law = mp_law(800, 40, 1.0).unwrap();
    let report = SpectrumReport::new(&spec, &law);
    let svg = eigen_figure(&report, 30, "t");
    let points = attr_values(&svg, "class=\"mp\"", "points");
    assert_eq!(points.len(), 1);
    let xs: Vec<f64> = points[0]
        .split_whitespace()
        .map(|p| p.split(',').next().unwrap().parse().unwrap())
        .collect();
    let lmax = report.eigenvalues.iter().cloned().fold(law.upper, f64::max);
    let fig = Figure::new(
        "t",
        Axis::linear(0.0, lmax * 1.05),
        Axis::linear(0.0, 1.0),
        "",
        "",
    );
    assert!((xs[0] - fig.px(law.lower, 0.0).0).abs() < 0.011);
    assert!((xs.last().unwrap() - fig.px(law.upper, 0.0).0).abs() < 0.011);
    assert!(svg.contains("class=\"eigen-hist\""));
}

#[test]
fn tree_figure_has_one_circle_per_node() {
    let p = gaussian_iid(300, 17, 3);
    let tree = mst(&distance_matrix(&pearson_matrix(&p).unwrap())).unwrap();
    let svg = tree_figure(&tree, 0, "tree");
    assert_eq!(svg.matches("<circle").count(), 17);
    assert_eq!(svg.matches("<line class=\"edge\"").count(), 16);
    assert_eq!(svg, tree_figure(&tree, 0, "tree"));
}

#[test]
fn fluctuation_plot_uses_decade_ticks() {
    let x = fgn(4096, 0.6, 1).unwrap();
    let cfg = DetrendConfig::default_for(4096).with_q(vec![-2.0, 2.0]);
    let svg = fluctuation_figure(&fluctuation_auto(&x.values, &cfg).unwrap(), "F");
    for class in ["xtick-label", "ytick-label"] {
        let vals: Vec<f64> = attr_values(&svg, &format!("class=\"{class}\""), "data-value")
            .iter()
            .map(|v| v.parse().unwrap())
            .collect();
        assert!(vals.len() >= 2, "{class}: {vals:?}");
        for v in vals {
            let e = v.log10();
            assert!(
                (e - e.round()).abs() < 1e-9,
                "{class} tick {v} is not a power of ten"
            );
        }
    }
    assert!(svg.contains("<tspan"));
}
