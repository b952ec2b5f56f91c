//! Minimal SVG plotting: linear and logarithmic axes, polylines, bars.

use std::fmt::Write;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

pub fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub log: bool,
}

impl Axis {
    pub fn linear(lo: f64, hi: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Self { lo, hi, log: false }
    }

    /// Log axis widened to whole decades around the positive range.
    pub fn log(lo: f64, hi: f64) -> Self {
        let lo = if lo > 0.0 { lo } else { 1e-12 };
        let hi = hi.max(lo);
        let a = lo.log10().floor();
        let mut b = hi.log10().ceil();
        if b <= a {
            b = a + 1.0;
        }
        Self {
            lo: 10f64.powf(a),
            hi: 10f64.powf(b),
            log: true,
        }
    }

    /// Axis covering the finite (and, for log axes, positive) values.
    pub fn fit<I: IntoIterator<Item = f64>>(values: I, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            if v.is_finite() && (!log || v > 0.0) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (1.0, 10.0);
        }
        if log {
            Self::log(lo, hi)
        } else {
            Self::linear(lo, hi)
        }
    }

    pub fn frac(&self, v: f64) -> f64 {
        if self.log {
            (v.log10() - self.lo.log10()) / (self.hi.log10() - self.lo.log10())
        } else {
            (v - self.lo) / (self.hi - self.lo)
        }
    }

    pub fn accepts(&self, v: f64) -> bool {
        v.is_finite() && (!self.log || v > 0.0)
    }

    /// `(value, label markup)`; log axes tick every decade.
    pub fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.log10().round() as i32, self.hi.log10().round() as i32);
            let stride = ((b - a) / 8).max(1);
            (a..=b)
                .filter(|k| (k - a) % stride == 0)
                .map(|k| {
                    (
                        10f64.powi(k),
                        format!("10<tspan dy=\"-5\" font-size=\"8\">{k}</tspan>"),
                    )
                })
                .collect()
        } else {
            let step = nice_step((self.hi - self.lo) / 5.0);
            let start = (self.lo / step).ceil() as i64;
            let end = (self.hi / step + 1e-9).floor() as i64;
            (start..=end)
                .map(|k| {
                    let v = k as f64 * step;
                    (v, trim_number(v, step))
                })
                .collect()
        }
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let m = raw / mag;
    let nice = if m <= 1.0 {
        1.0
    } else if m <= 2.0 {
        2.0
    } else if m <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn trim_number(v: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    let v = if v.abs() < step * 1e-9 { 0.0 } else { v };
    format!("{v:.digits$}")
}

pub fn num(v: f64) -> String {
    format!("{v:.2}")
}

/// A single plot with axes. Data are added in axis units.
pub struct Figure {
    pub width: f64,
    pub height: f64,
    margin: (f64, f64, f64, f64),
    pub x: Axis,
    pub y: Axis,
    title: String,
    labels: (String, String),
    body: String,
    legend: Vec<(String, &'static str)>,
}

impl Figure {
    pub fn new(title: &str, x: Axis, y: Axis, xlabel: &str, ylabel: &str) -> Self {
        Self {
            width: 640.0,
            height: 440.0,
            margin: (70.0, 130.0, 40.0, 55.0),
            x,
            y,
            title: title.into(),
            labels: (xlabel.into(), ylabel.into()),
            body: String::new(),
            legend: Vec::new(),
        }
    }

    pub fn px(&self, x: f64, y: f64) -> (f64, f64) {
        let (l, r, t, b) = self.margin;
        (
            l + self.x.frac(x) * (self.width - l - r),
            self.height - b - self.y.frac(y) * (self.height - t - b),
        )
    }

    fn points_attr(&self, pts: &[(f64, f64)]) -> String {
        pts.iter()
            .filter(|(x, y)| self.x.accepts(*x) && self.y.accepts(*y))
            .map(|&(x, y)| {
                let (a, b) = self.px(x, y);
                format!("{},{}", num(a), num(b))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], class: &str, stroke: &str) {
        let attr = self.points_attr(pts);
        if attr.is_empty() {
            return;
        }
        let _ = writeln!(
            self.body,
            "<polyline class=\"{class}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\" points=\"{attr}\"/>"
        );
    }

    pub fn markers(&mut self, pts: &[(f64, f64)], class: &str, fill: &str) {
        for &(x, y) in pts {
            if !(self.x.accepts(x) && self.y.accepts(y)) {
                continue;
            }
            let (a, b) = self.px(x, y);
            let _ = writeln!(
                self.body,
                "<rect class=\"{class}\" x=\"{}\" y=\"{}\" width=\"4\" height=\"4\" fill=\"{fill}\"/>",
                num(a - 2.0),
                num(b - 2.0)
            );
        }
    }

    /// Bars over `[edges[k], edges[k+1])` with the given heights.
    pub fn bars(&mut self, edges: &[f64], heights: &[f64], class: &str, fill: &str) {
        for (k, &h) in heights.iter().enumerate() {
            let (x0, y0) = self.px(edges[k], h);
            let (x1, base) = self.px(
                edges[k + 1],
                if self.y.log {
                    self.y.lo
                } else {
                    0f64.max(self.y.lo)
                },
            );
            let _ = writeln!(
                self.body,
                "<rect class=\"{class}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\" fill-opacity=\"0.6\"/>",
                num(x0),
                num(y0.min(base)),
                num((x1 - x0).max(0.0)),
                num((base - y0).abs())
            );
        }
    }

    pub fn legend(&mut self, label: &str, stroke: &'static str) {
        self.legend.push((label.into(), stroke));
    }

    pub fn finish(self) -> String {
        let (l, r, t, b) = self.margin;
        let (w, h) = (self.width, self.height);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"11\">"
        );
        let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"13\">{}</text>",
            num((l + w - r) / 2.0),
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            "<rect class=\"frame\" x=\"{l}\" y=\"{t}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
            w - l - r,
            h - t - b
        );
        for (v, label) in self.x.ticks() {
            let px = l + self.x.frac(v) * (w - l - r);
            let _ = writeln!(
                s,
                "<line class=\"xtick\" x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>",
                num(px),
                num(h - b),
                num(h - b + 5.0)
            );
            let _ = writeln!(
                s,
                "<text class=\"xtick-label\" data-value=\"{v:e}\" x=\"{}\" y=\"{}\" text-anchor=\"middle\">{label}</text>",
                num(px),
                num(h - b + 18.0)
            );
        }
        for (v, label) in self.y.ticks() {
            let py = h - b - self.y.frac(v) * (h - t - b);
            let _ = writeln!(
                s,
                "<line class=\"ytick\" x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>",
                num(l - 5.0),
                num(py),
                num(l)
            );
            let _ = writeln!(
                s,
                "<text class=\"ytick-label\" data-value=\"{v:e}\" x=\"{}\" y=\"{}\" text-anchor=\"end\">{label}</text>",
                num(l - 8.0),
                num(py + 4.0)
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            num((l + w - r) / 2.0),
            num(h - 12.0),
            escape(&self.labels.0)
        );
        let _ = writeln!(
            s,
            "<text transform=\"translate(16,{}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
            num((t + h - b) / 2.0),
            escape(&self.labels.1)
        );
        let _ = writeln!(
            s,
            "<clipPath id=\"plot-area\"><rect x=\"{l}\" y=\"{t}\" width=\"{}\" height=\"{}\"/></clipPath>",
            w - l - r,
            h - t - b
        );
        let _ = writeln!(s, "<g clip-path=\"url(#plot-area)\">\n{}</g>", self.body);
        for (k, (label, stroke)) in self.legend.iter().enumerate() {
            let y = t + 10.0 + 16.0 * k as f64;
            let x = w - r + 10.0;
            let _ = writeln!(
                s,
                "<line class=\"legend\" x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{stroke}\" stroke-width=\"2\"/><text x=\"{}\" y=\"{}\">{}</text>",
                num(x),
                num(x + 18.0),
                num(x + 24.0),
                num(y + 4.0),
                escape(label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_axis_decades() {
        let a = Axis::log(3.0, 450.0);
        assert_eq!((a.lo, a.hi), (1.0, 1000.0));
        let ticks: Vec<f64> = a.ticks().into_iter().map(|t| t.0).collect();
        assert_eq!(ticks, vec![1.0, 10.0, 100.0, 1000.0]);
        assert!((a.frac(10.0) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn linear_ticks_are_round() {
        let a = Axis::linear(0.0, 2.3);
        let labels: Vec<String> = a.ticks().into_iter().map(|t| t.1).collect();
        assert_eq!(labels, vec!["0.0", "0.5", "1.0", "1.5", "2.0"]);
        let flat = Axis::linear(1.0, 1.0);
        assert!(flat.hi > flat.lo);
    }

    #[test]
    fn figure_drops_unplottable_points() {
        let mut f = Figure::new("t", Axis::log(1.0, 100.0), Axis::log(1.0, 100.0), "x", "y");
        f.polyline(&[(0.0, 1.0), (10.0, 10.0), (f64::NAN, 2.0)], "curve", color(0));
        let svg = f.finish();
        assert!(svg.contains("points=\"") && svg.matches(',').count() >= 1);
        let pts = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(pts.split(' ').count(), 1);
    }
}
