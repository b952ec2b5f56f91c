//! SVG figures for fluctuation functions, CCDFs, spectra and trees, and
//! rendering of everything a manifest lists.

use std::fmt::Write;
use std::fs::File;
use std::path::Path;

use anyhow::{Context, Result};
use detrendcorr_core::corrmat::OffdiagHistogram;
use detrendcorr_core::mfdfa::{FluctuationGrid, GridKind};
use detrendcorr_core::mstnet::Tree;
use detrendcorr_core::rmt::{MpLaw, SpectrumReport};
use detrendcorr_core::CounterRng;
use serde::Deserialize;

use crate::manifest::{ArtifactKind, Manifest};
use crate::svg::{color, escape, num, Axis, Figure};

/// Log-log `|F_norm|` against `s`, one curve per q, valid cells only.
pub fn fluctuation_figure(grid: &FluctuationGrid, title: &str) -> String {
    let mut curves = Vec::new();
    for (qi, &q) in grid.q.iter().enumerate() {
        let pts: Vec<(f64, f64)> = grid.cells[qi]
            .iter()
            .zip(&grid.s)
            .filter(|(c, _)| c.valid)
            .map(|(c, &s)| (s as f64, c.f_norm.abs()))
            .collect();
        curves.push((q, pts));
    }
    let x = Axis::fit(grid.s.iter().map(|&s| s as f64), true);
    let y = Axis::fit(curves.iter().flat_map(|c| c.1.iter().map(|p| p.1)), true);
    let mut fig = Figure::new(title, x, y, "s", "F(q, s)");
    for (k, (q, pts)) in curves.iter().enumerate() {
        fig.polyline(pts, "fluctuation", color(k));
        fig.markers(pts, "fluctuation-point", color(k));
        if k < 20 {
            fig.legend(&format!("q = {q}"), color(k));
        }
    }
    fig.finish()
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, Deserialize)]
pub struct LabeledCcdf {
    pub label: String,
    pub sigma: f64,
    pub n: usize,
    pub points: Vec<(f64, f64)>,
}

/// Log-log CCDFs, x in units of each series' σ.
pub fn ccdf_figure(curves: &[LabeledCcdf], title: &str) -> String {
    let x = Axis::fit(curves.iter().flat_map(|c| c.points.iter().map(|p| p.0)), true);
    let y = Axis::fit(curves.iter().flat_map(|c| c.points.iter().map(|p| p.1)), true);
    let mut fig = Figure::new(title, x, y, "x / σ", "P(X ≥ x)");
    for (k, c) in curves.iter().enumerate() {
        fig.polyline(&c.points, "ccdf", color(k));
        if k < 20 {
            fig.legend(&c.label, color(k));
        }
    }
    fig.finish()
}

/// Spectrum artifacts: a bare report, or a filtered one wrapped with its
/// regression coefficients.
#[derive(Deserialize)]
#[serde(untagged)]
enum SpectrumFile {
    Plain(SpectrumReport),
    Filtered { report: SpectrumReport },
}

/// Eigenvalue density histogram with the Marchenko–Pastur density drawn
/// over `[λ-, λ+]`.
pub fn eigen_figure(report: &SpectrumReport, bins: usize, title: &str) -> String {
    let (lo, hi) = report.mp_bounds;
    let lmax = report.eigenvalues.iter().cloned().fold(hi, f64::max);
    let x = Axis::linear(0.0, lmax * 1.05);
    let width = (lmax * 1.05) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| k as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &l in &report.eigenvalues {
        let k = ((l.max(0.0) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = report.eigenvalues.len().max(1) as f64;
    let density: Vec<f64> = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    let law = MpLaw {
        q_ratio: report.t_pts as f64 / report.n_series as f64,
        sigma2: 1.0,
        lower: lo,
        upper: hi,
    };
    let curve: Vec<(f64, f64)> = (0..=200)
        .map(|k| {
            let l = if k == 200 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / 200.0
            };
            (l, law.density(l))
        })
        .collect();
    let ymax = density
        .iter()
        .chain(curve.iter().map(|p| &p.1))
        .cloned()
        .fold(0.0, f64::max);
    let mut fig = Figure::new(title, x, Axis::linear(0.0, ymax * 1.1), "λ", "density");
    fig.bars(&edges, &density, "eigen-hist", color(0));
    fig.polyline(&curve, "mp", color(1));
    fig.legend("eigenvalues", color(0));
    fig.legend("Marchenko–Pastur", color(1));
    fig.finish()
}

/// Off-diagonal entry histogram with the fitted normal density.
pub fn offdiag_figure(h: &OffdiagHistogram, title: &str) -> String {
    let (lo, hi) = (h.bin_edges[0], *h.bin_edges.last().unwrap());
    let n = h.n.max(1) as f64;
    let density: Vec<f64> = h
        .counts
        .iter()
        .zip(h.bin_edges.windows(2))
        .map(|(&c, e)| c as f64 / (n * (e[1] - e[0])))
        .collect();
    let (mu, sigma) = h.fitted_normal;
    let normal: Vec<(f64, f64)> = (0..=200)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / 200.0;
            let z = (x - mu) / sigma;
            (
                x,
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt()),
            )
        })
        .filter(|p| p.1.is_finite())
        .collect();
    let ymax = density
        .iter()
        .chain(normal.iter().map(|p| &p.1))
        .cloned()
        .fold(0.0, f64::max);
    let mut fig = Figure::new(
        title,
        Axis::linear(lo, hi),
        Axis::linear(0.0, ymax * 1.1),
        "ρ",
        "density",
    );
    fig.bars(&h.bin_edges, &density, "offdiag-hist", color(0));
    fig.polyline(&normal, "normal", color(1));
    fig.finish()
}

/// Fruchterman–Reingold layout in the unit square from seeded positions.
pub fn force_layout(n: usize, edges: &[(usize, usize)], seed: u64) -> Vec<(f64, f64)> {
    let mut rng = CounterRng::new(seed);
    let mut pos: Vec<(f64, f64)> = (0..n).map(|_| (rng.next_f64(), rng.next_f64())).collect();
    if n < 2 {
        return vec![(0.5, 0.5); n];
    }
    let k = (1.0 / n as f64).sqrt();
    let iters = 400;
    for it in 0..iters {
        let temp = 0.1 * (1.0 - it as f64 / iters as f64) + 1e-4;
        let mut disp = vec![(0.0f64, 0.0f64); n];
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy) = (pos[i].0 - pos[j].0, pos[i].1 - pos[j].1);
                let d = (dx * dx + dy * dy).sqrt().max(1e-6);
                let f = k * k / d;
                disp[i].0 += dx / d * f;
                disp[i].1 += dy / d * f;
                disp[j].0 -= dx / d * f;
                disp[j].1 -= dy / d * f;
            }
        }
        for &(a, b) in edges {
            let (dx, dy) = (pos[a].0 - pos[b].0, pos[a].1 - pos[b].1);
            let d = (dx * dx + dy * dy).sqrt().max(1e-6);
            let f = d * d / k;
            disp[a].0 -= dx / d * f;
            disp[a].1 -= dy / d * f;
            disp[b].0 += dx / d * f;
            disp[b].1 += dy / d * f;
        }
        for (p, d) in pos.iter_mut().zip(&disp) {
            let len = (d.0 * d.0 + d.1 * d.1).sqrt();
            if len > 0.0 {
                let step = len.min(temp);
                p.0 += d.0 / len * step;
                p.1 += d.1 / len * step;
            }
        }
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in &pos {
        x0 = x0.min(p.0);
        x1 = x1.max(p.0);
        y0 = y0.min(p.1);
        y1 = y1.max(p.1);
    }
    let (sx, sy) = ((x1 - x0).max(1e-12), (y1 - y0).max(1e-12));
    pos.iter().map(|p| ((p.0 - x0) / sx, (p.1 - y0) / sy)).collect()
}

/// Tree drawing: one circle per node (radius ∝ √size, colour by
/// community) and one line per edge (width ∝ correlation).
pub fn tree_figure(tree: &Tree, seed: u64, title: &str) -> String {
    let n = tree.node_count();
    let pairs: Vec<(usize, usize)> = tree.edges.iter().map(|e| (e.src, e.dst)).collect();
    let pos = force_layout(n, &pairs, seed);
    let (size, pad) = (800.0, 50.0);
    let at = |i: usize| {
        (
            pad + pos[i].0 * (size - 2.0 * pad),
            pad + 20.0 + pos[i].1 * (size - 2.0 * pad),
        )
    };
    let smax = tree
        .sizes
        .iter()
        .cloned()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{h}\" viewBox=\"0 0 {size} {h}\" font-family=\"sans-serif\" font-size=\"9\">",
        h = size + 20.0
    );
    let _ = writeln!(
        s,
        "<rect width=\"{size}\" height=\"{}\" fill=\"white\"/>",
        size + 20.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
        size / 2.0,
        escape(title)
    );
    for e in &tree.edges {
        let (a, b) = (at(e.src), at(e.dst));
        let rho = (1.0 - e.distance * e.distance / 2.0).clamp(0.0, 1.0);
        let _ = writeln!(
            s,
            "<line class=\"edge\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#555\" stroke-width=\"{}\"/>",
            num(a.0),
            num(a.1),
            num(b.0),
            num(b.1),
            num(0.5 + 3.5 * rho)
        );
    }
    for i in 0..n {
        let (x, y) = at(i);
        let size_i = tree.sizes.get(i).copied().unwrap_or(0.0);
        let r = if smax > 0.0 && size_i.is_finite() && size_i > 0.0 {
            3.0 + 12.0 * (size_i / smax).sqrt()
        } else {
            4.0
        };
        let fill = tree.communities.as_ref().map_or(color(0), |c| color(c[i]));
        let label = escape(&tree.labels[i]);
        let _ = writeln!(
            s,
            "<circle class=\"node\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{fill}\" stroke=\"black\" stroke-width=\"0.5\"><title>{label}</title></circle>",
            num(x),
            num(y),
            num(r)
        );
        let _ = writeln!(
            s,
            "<text class=\"node-label\" x=\"{}\" y=\"{}\">{label}</text>",
            num(x + r + 1.0),
            num(y + 3.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn open(root: &Path, rel: &str) -> Option<File> {
    match File::open(root.join(rel)) {
        Ok(f) => Some(f),
        Err(e) => {
            log::warn!("skipping figure for `{rel}`: {e}");
            None
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(root: &Path, rel: &str) -> Option<T> {
    let f = open(root, rel)?;
    match serde_json::from_reader(std::io::BufReader::new(f)) {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("skipping figure for `{rel}`: {e}");
            None
        }
    }
}

/// Every figure the manifest's artifacts support, as `(relative path, svg)`
/// under `figures/`. Missing or unreadable artifacts are skipped with a
/// warning.
pub fn render_figures(manifest: &Manifest, root: &Path, seed: u64) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for a in manifest.of_kind(ArtifactKind::FluctuationGrid) {
        let Some(f) = open(root, &a.path) else { continue };
        match FluctuationGrid::read_csv(f, GridKind::AutoXx) {
            Ok(g) => {
                let label = a.group.clone().unwrap_or_default();
                let stem = Path::new(&a.path)
                    .file_stem()
                    .unwrap()
                    .to_string_lossy()
                    .to_string();
                out.push((
                    format!("figures/fluctuation_{stem}.svg"),
                    fluctuation_figure(&g, &format!("Fluctuation functions: {label}")),
                ));
            }
            Err(e) => log::warn!("skipping figure for `{}`: {e}", a.path),
        }
    }
    for a in manifest.of_kind(ArtifactKind::Ccdf) {
        if let Some(curves) = read_json::<Vec<LabeledCcdf>>(root, &a.path) {
            out.push((
                "figures/ccdf.svg".into(),
                ccdf_figure(&curves, "Complementary cumulative distributions"),
            ));
        }
    }
    for a in manifest.of_kind(ArtifactKind::Spectrum) {
        let group = a.group.clone().unwrap_or_default();
        if let Some(file) = read_json::<SpectrumFile>(root, &a.path) {
            let report = match file {
                SpectrumFile::Plain(r) | SpectrumFile::Filtered { report: r } => r,
            };
            out.push((
                format!("figures/{group}.eigenvalues.svg"),
                eigen_figure(&report, 40, &format!("Eigenvalues: {group}")),
            ));
        }
    }
    for a in manifest.of_kind(ArtifactKind::Histogram) {
        let group = a.group.clone().unwrap_or_default();
        if let Some(h) = read_json::<OffdiagHistogram>(root, &a.path) {
            out.push((
                format!("figures/{group}.offdiag.svg"),
                offdiag_figure(&h, &format!("Off-diagonal entries: {group}")),
            ));
        }
    }
    for a in manifest.of_kind(ArtifactKind::TreeEdges) {
        let group = a.group.clone().unwrap_or_default();
        let Some(nodes) = manifest.find(ArtifactKind::TreeNodes, &group) else {
            log::warn!("skipping tree `{group}`: node table missing from manifest");
            continue;
        };
        let (Some(ef), Some(nf)) = (open(root, &a.path), open(root, &nodes.path)) else {
            continue;
        };
        let tree = Tree::read_csv(ef, nf).with_context(|| format!("reading tree `{group}`"));
        match tree {
            Ok(t) => out.push((
                format!("figures/{group}.mst.svg"),
                tree_figure(&t, seed, &format!("Minimal spanning tree: {group}")),
            )),
            Err(e) => log::warn!("skipping tree `{group}`: {e:#}"),
        }
    }
    Ok(out)
}
