//! Hand-written SVG charts. Output depends only on the input data: fixed
//! canvas sizes, fixed fonts, numbers printed with fixed precision.

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::effects::{marginal_means, HalfNormalPoint};
use crate::error::{Error, Result};
use crate::model::{ResponseTable, Term};
use crate::trpd::{control_noise_interaction, response_distributions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlotKind {
    MainEffects,
    Interaction2,
    Interaction3Combined,
    HalfNormal,
    HistogramGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    /// Horizontal (line plots) or vertical (histograms) reference line.
    pub reference: Option<f64>,
    pub path: PathBuf,
}

/// One panel of a line chart: x categories and one or more series over them.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_labels: Vec<String>,
    pub series: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlotData {
    Lines(Vec<Panel>),
    HalfNormal {
        points: Vec<HalfNormalPoint>,
        /// Number of largest effects to label.
        label_top: usize,
    },
    Histograms {
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        /// `cells[r][c]` holds raw values.
        cells: Vec<Vec<Vec<f64>>>,
        bins: usize,
    },
}

/// One single-series panel per factor.
pub fn main_effects_data(table: &ResponseTable, factors: &[usize]) -> Result<PlotData> {
    let panels = factors
        .iter()
        .map(|&j| {
            let m = marginal_means(table, &Term::main(j))?;
            let f = &table.factors()[j];
            Ok(Panel {
                title: f.name().to_string(),
                x_labels: m.cells.iter().map(|c| f.label(c.levels[0]).to_string()).collect(),
                series: vec![("mean".into(), m.cells.iter().map(|c| c.mean).collect())],
            })
        })
        .collect::<Result<_>>()?;
    Ok(PlotData::Lines(panels))
}

/// Means of `trace` levels (one line each) across `x` levels.
pub fn interaction2_data(table: &ResponseTable, x: usize, trace: usize) -> Result<PlotData> {
    if x == trace {
        return Err(Error::ArityMismatch("interaction needs two distinct factors".into()));
    }
    let m = marginal_means(table, &Term::new([x, trace])?)?;
    let (fx, ft) = (&table.factors()[x], &table.factors()[trace]);
    // term levels are stored in ascending factor-index order
    let (ix, it) = if x < trace { (0, 1) } else { (1, 0) };
    let mut series: Vec<(String, Vec<f64>)> =
        (0..ft.n_levels()).map(|l| (ft.label(l).to_string(), vec![f64::NAN; fx.n_levels()])).collect();
    for c in &m.cells {
        series[c.levels[it]].1[c.levels[ix]] = c.mean;
    }
    series.retain(|(_, v)| v.iter().all(|y| y.is_finite()));
    let used: Vec<usize> = (0..fx.n_levels()).filter(|&l| m.cells.iter().any(|c| c.levels[ix] == l)).collect();
    for (_, v) in &mut series {
        *v = used.iter().map(|&l| v[l]).collect();
    }
    Ok(PlotData::Lines(vec![Panel {
        title: format!("{}:{}", fx.name(), ft.name()),
        x_labels: used.iter().map(|&l| fx.label(l).to_string()).collect(),
        series,
    }]))
}

/// Combined control levels as lines across the levels of one noise factor.
pub fn interaction3_combined_data(table: &ResponseTable, control: &[usize], noise: usize) -> Result<PlotData> {
    let g = control_noise_interaction(table, control, noise)?;
    let names: Vec<&str> = control.iter().map(|&j| table.factors()[j].name()).collect();
    Ok(PlotData::Lines(vec![Panel {
        title: format!("{} by {}", names.join("/"), g.noise_factor),
        x_labels: g.noise_labels.clone(),
        series: g.control_labels.into_iter().zip(g.means).collect(),
    }]))
}

/// Raw responses for each combination of two control factors.
pub fn histogram_data(table: &ResponseTable, row: usize, col: usize, bins: usize) -> Result<PlotData> {
    let dist = response_distributions(table, &[row, col])?;
    let (fr, fc) = (&table.factors()[row], &table.factors()[col]);
    let used = |j: usize| -> Vec<usize> {
        let mut v: Vec<usize> = (0..table.len()).map(|i| table.levels(i)[j]).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let (rows, cols) = (used(row), used(col));
    let mut cells = vec![vec![Vec::new(); cols.len()]; rows.len()];
    for (label, values) in dist {
        let (lr, lc) = label.split_once('/').expect("two control factors");
        let r = rows.iter().position(|&l| fr.label(l) == lr).expect("row level");
        let c = cols.iter().position(|&l| fc.label(l) == lc).expect("column level");
        cells[r][c] = values;
    }
    Ok(PlotData::Histograms {
        row_labels: rows.iter().map(|&l| format!("{}={}", fr.name(), fr.label(l))).collect(),
        col_labels: cols.iter().map(|&l| format!("{}={}", fc.name(), fc.label(l))).collect(),
        cells,
        bins,
    })
}

fn check_arity(data: &PlotData, kind: PlotKind) -> Result<()> {
    let bad = |m: &str| Err(Error::ArityMismatch(format!("{kind:?}: {m}")));
    match (kind, data) {
        (PlotKind::MainEffects, PlotData::Lines(p)) => {
            if p.is_empty() || p.iter().any(|p| p.series.len() != 1) {
                return bad("needs at least one panel, each with exactly one series");
            }
        }
        (PlotKind::Interaction2, PlotData::Lines(p)) => {
            if p.is_empty() || p.iter().any(|p| p.series.len() < 2) {
                return bad("needs panels with at least two traces");
            }
        }
        (PlotKind::Interaction3Combined, PlotData::Lines(p)) => {
            if p.len() != 1 || p[0].series.len() < 2 {
                return bad("needs exactly one panel of combined-control traces");
            }
        }
        (PlotKind::HalfNormal, PlotData::HalfNormal { points, .. }) => {
            if points.len() < 2 {
                return bad("needs at least two effects");
            }
        }
        (PlotKind::HistogramGrid, PlotData::Histograms { row_labels, col_labels, cells, bins }) => {
            if *bins == 0
                || cells.len() != row_labels.len()
                || cells.iter().any(|r| r.len() != col_labels.len())
                || cells.is_empty()
            {
                return bad("cells must form a rows x columns grid");
            }
        }
        _ => return bad("data shape does not match plot kind"),
    }
    if let PlotData::Lines(panels) = data {
        for p in panels {
            if p.series.iter().any(|(_, v)| v.len() != p.x_labels.len()) {
                return bad("series length differs from the number of x levels");
            }
        }
    }
    Ok(())
}

const PALETTE: [&str; 10] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];
const DASHES: [&str; 4] = ["", "6,3", "2,2", "8,3,2,3"];
const FONT: &str = "font-family=\"DejaVu Sans, Arial, sans-serif\"";

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Padded data range with ~5 round ticks.
fn axis(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = if hi - lo < 1e-12 { (lo - 1.0, hi + 1.0) } else { (lo, hi) };
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let (a, b) = ((lo / step).floor() * step, (hi / step).ceil() * step);
    let n = ((b - a) / step).round() as usize;
    let ticks = (0..=n).map(|k| a + step * k as f64).collect();
    (a, b, ticks)
}

struct Frame {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl Frame {
    fn sx(&self, t: f64) -> f64 {
        self.x + t * self.w
    }

    fn sy(&self, v: f64, lo: f64, hi: f64) -> f64 {
        self.y + self.h - (v - lo) / (hi - lo) * self.h
    }
}

fn header(out: &mut String, w: f64, h: f64) {
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">",
        num(w),
        num(h),
        num(w),
        num(h)
    )
    .unwrap();
    writeln!(out, "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>", num(w), num(h)).unwrap();
}

fn y_axis(out: &mut String, f: &Frame, lo: f64, hi: f64, ticks: &[f64]) {
    writeln!(
        out,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        num(f.x),
        num(f.y),
        num(f.w),
        num(f.h)
    )
    .unwrap();
    for &t in ticks {
        let y = f.sy(t, lo, hi);
        writeln!(
            out,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/><text x=\"{}\" y=\"{}\" {FONT} font-size=\"10\" text-anchor=\"end\">{}</text>",
            num(f.x - 4.0),
            num(y),
            num(f.x),
            num(y),
            num(f.x - 6.0),
            num(y + 3.5),
            tick_label(t)
        )
        .unwrap();
    }
}

fn render_lines(out: &mut String, panels: &[Panel], reference: Option<f64>, title: &str) {
    let (pw, ph) = (260.0, 200.0);
    let per_row = panels.len().min(3);
    let n_rows = panels.len().div_ceil(per_row);
    let legend_w = if panels.iter().any(|p| p.series.len() > 1) { 110.0 } else { 0.0 };
    let (w, h) = (per_row as f64 * pw + legend_w + 20.0, n_rows as f64 * ph + 40.0);
    header(out, w, h);
    writeln!(
        out,
        "<text x=\"{}\" y=\"20\" {FONT} font-size=\"14\" text-anchor=\"middle\">{}</text>",
        num(w / 2.0),
        esc(title)
    )
    .unwrap();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in panels {
        for (_, v) in &p.series {
            for &y in v {
                lo = lo.min(y);
                hi = hi.max(y);
            }
        }
    }
    if let Some(r) = reference {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let (lo, hi, ticks) = axis(lo, hi);
    for (k, p) in panels.iter().enumerate() {
        let (col, row) = ((k % per_row) as f64, (k / per_row) as f64);
        let f = Frame { x: 20.0 + col * pw + 45.0, y: 40.0 + row * ph + 20.0, w: pw - 60.0, h: ph - 60.0 };
        writeln!(out, "<g>").unwrap();
        writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"12\" text-anchor=\"middle\">{}</text>",
            num(f.x + f.w / 2.0),
            num(f.y - 6.0),
            esc(&p.title)
        )
        .unwrap();
        y_axis(out, &f, lo, hi, &ticks);
        let nx = p.x_labels.len();
        let xt = |i: usize| f.sx((i as f64 + 0.5) / nx as f64);
        for (i, l) in p.x_labels.iter().enumerate() {
            writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"10\" text-anchor=\"middle\">{}</text>",
                num(xt(i)),
                num(f.y + f.h + 14.0),
                esc(l)
            )
            .unwrap();
        }
        if let Some(r) = reference {
            let y = f.sy(r, lo, hi);
            writeln!(
                out,
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#0000cc\" stroke-width=\"1\"/>",
                num(f.x),
                num(y),
                num(f.x + f.w),
                num(y)
            )
            .unwrap();
        }
        for (s, (_, v)) in p.series.iter().enumerate() {
            let pts: Vec<String> =
                v.iter().enumerate().map(|(i, &y)| format!("{},{}", num(xt(i)), num(f.sy(y, lo, hi)))).collect();
            let dash = DASHES[(s / PALETTE.len()) % DASHES.len()];
            let dash_attr = if dash.is_empty() { String::new() } else { format!(" stroke-dasharray=\"{dash}\"") };
            writeln!(
                out,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{dash_attr}/>",
                pts.join(" "),
                PALETTE[s % PALETTE.len()]
            )
            .unwrap();
            for pt in &pts {
                let (x, y) = pt.split_once(',').unwrap();
                writeln!(out, "<circle cx=\"{x}\" cy=\"{y}\" r=\"2.5\" fill=\"{}\"/>", PALETTE[s % PALETTE.len()])
                    .unwrap();
            }
        }
        writeln!(out, "</g>").unwrap();
    }
    if legend_w > 0.0 {
        let series = &panels[0].series;
        let x0 = w - legend_w - 10.0;
        for (s, (name, _)) in series.iter().enumerate() {
            let y = 60.0 + 16.0 * s as f64;
            writeln!(
                out,
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"2\"/><text x=\"{}\" y=\"{}\" {FONT} font-size=\"10\">{}</text>",
                num(x0),
                num(y),
                num(x0 + 18.0),
                num(y),
                PALETTE[s % PALETTE.len()],
                num(x0 + 22.0),
                num(y + 3.5),
                esc(name)
            )
            .unwrap();
        }
    }
}

fn render_half_normal(out: &mut String, points: &[HalfNormalPoint], label_top: usize) {
    let (w, h) = (520.0, 420.0);
    header(out, w, h);
    writeln!(
        out,
        "<text x=\"{}\" y=\"20\" {FONT} font-size=\"14\" text-anchor=\"middle\">Half-normal plot of effects</text>",
        num(w / 2.0)
    )
    .unwrap();
    let f = Frame { x: 60.0, y: 40.0, w: w - 90.0, h: h - 90.0 };
    let ymax = points.iter().map(|p| p.abs_effect).fold(0.0, f64::max);
    let (lo, hi, ticks) = axis(0.0, ymax);
    let qmax = points.iter().map(|p| p.quantile).fold(0.0, f64::max);
    let (_, qhi, qticks) = axis(0.0, qmax);
    y_axis(out, &f, lo, hi, &ticks);
    for &t in &qticks {
        let x = f.sx(t / qhi);
        writeln!(
            out,
            "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"10\" text-anchor=\"middle\">{}</text>",
            num(x),
            num(f.y + f.h + 14.0),
            tick_label(t)
        )
        .unwrap();
    }
    writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"11\" text-anchor=\"middle\">half-normal quantile</text>",
        num(f.x + f.w / 2.0),
        num(h - 12.0)
    )
    .unwrap();
    writeln!(
        out,
        "<text x=\"14\" y=\"{}\" {FONT} font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">|effect|</text>",
        num(f.y + f.h / 2.0),
        num(f.y + f.h / 2.0)
    )
    .unwrap();
    let m = points.len();
    for (i, p) in points.iter().enumerate() {
        let (x, y) = (f.sx(p.quantile / qhi), f.sy(p.abs_effect, lo, hi));
        writeln!(out, "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"black\"/>", num(x), num(y)).unwrap();
        if i + label_top >= m {
            writeln!(
                out,
                "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"10\" text-anchor=\"end\">{}</text>",
                num(x - 5.0),
                num(y + 3.5),
                esc(&p.label)
            )
            .unwrap();
        }
    }
}

fn render_histograms(
    out: &mut String,
    row_labels: &[String],
    col_labels: &[String],
    cells: &[Vec<Vec<f64>>],
    bins: usize,
    reference: Option<f64>,
) {
    let (pw, ph) = (200.0, 150.0);
    let (w, h) = (col_labels.len() as f64 * pw + 110.0, row_labels.len() as f64 * ph + 50.0);
    header(out, w, h);
    let all = cells.iter().flatten().flatten();
    let mut lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let mut hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    if let Some(r) = reference {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let counts: Vec<Vec<Vec<usize>>> = cells
        .iter()
        .map(|row| {
            row.iter()
                .map(|vals| {
                    let mut c = vec![0; bins];
                    for &v in vals {
                        c[(((v - lo) / width) as usize).min(bins - 1)] += 1;
                    }
                    c
                })
                .collect()
        })
        .collect();
    let cmax = counts.iter().flatten().flatten().copied().max().unwrap_or(1).max(1) as f64;
    for (c, l) in col_labels.iter().enumerate() {
        writeln!(
            out,
            "<text x=\"{}\" y=\"22\" {FONT} font-size=\"12\" text-anchor=\"middle\">{}</text>",
            num(100.0 + c as f64 * pw + pw / 2.0),
            esc(l)
        )
        .unwrap();
    }
    for (r, l) in row_labels.iter().enumerate() {
        writeln!(
            out,
            "<text x=\"8\" y=\"{}\" {FONT} font-size=\"12\">{}</text>",
            num(40.0 + r as f64 * ph + ph / 2.0),
            esc(l)
        )
        .unwrap();
        for c in 0..col_labels.len() {
            let f =
                Frame { x: 100.0 + c as f64 * pw + 10.0, y: 35.0 + r as f64 * ph + 5.0, w: pw - 20.0, h: ph - 30.0 };
            writeln!(out, "<g>").unwrap();
            writeln!(
                out,
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
                num(f.x),
                num(f.y),
                num(f.w),
                num(f.h)
            )
            .unwrap();
            for (b, &k) in counts[r][c].iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let bh = k as f64 / cmax * f.h;
                writeln!(
                    out,
                    "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#9ecae1\" stroke=\"#3182bd\"/>",
                    num(f.sx(b as f64 / bins as f64)),
                    num(f.y + f.h - bh),
                    num(f.w / bins as f64),
                    num(bh)
                )
                .unwrap();
            }
            if let Some(v) = reference {
                let x = f.sx((v - lo) / (hi - lo));
                writeln!(
                    out,
                    "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#0000cc\"/>",
                    num(x),
                    num(f.y),
                    num(x),
                    num(f.y + f.h)
                )
                .unwrap();
            }
            for t in [lo, hi] {
                writeln!(
                    out,
                    "<text x=\"{}\" y=\"{}\" {FONT} font-size=\"9\" text-anchor=\"middle\">{}</text>",
                    num(f.sx((t - lo) / (hi - lo))),
                    num(f.y + f.h + 11.0),
                    tick_label(t)
                )
                .unwrap();
            }
            writeln!(out, "</g>").unwrap();
        }
    }
}

/// Render `data` as an SVG document.
pub fn render_svg(data: &PlotData, kind: PlotKind, reference: Option<f64>) -> Result<String> {
    check_arity(data, kind)?;
    let mut out = String::new();
    match data {
        PlotData::Lines(panels) => {
            let title = match kind {
                PlotKind::MainEffects => "Main effects",
                PlotKind::Interaction2 => "Two-factor interaction",
                _ => "Combined control factor by noise factor",
            };
            render_lines(&mut out, panels, reference, title);
        }
        PlotData::HalfNormal { points, label_top } => render_half_normal(&mut out, points, *label_top),
        PlotData::Histograms { row_labels, col_labels, cells, bins } => {
            render_histograms(&mut out, row_labels, col_labels, cells, *bins, reference)
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_plot(data: &PlotData, spec: &PlotSpec) -> Result<()> {
    let svg = render_svg(data, spec.kind, spec.reference)?;
    std::fs::write(&spec.path, svg)?;
    Ok(())
}
