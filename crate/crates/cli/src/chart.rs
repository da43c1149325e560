//! Static SVG line charts for sweep results: one series per heuristic,
//! x = sentences per target (log2), y = the metric.

use std::collections::BTreeMap;
use std::io::Write;

use cicl_core::Result;

const COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub struct Series {
    pub label: String,
    /// (x, mean y) points, x ascending.
    pub points: Vec<(f64, f64)>,
}

pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log2_x: bool,
    pub series: Vec<Series>,
}

impl Chart {
    pub fn write_svg<W: Write>(&self, out: &mut W) -> Result<()> {
        let width = 640.0;
        let height = 420.0;
        let margin_l = 64.0;
        let margin_r = 150.0;
        let margin_t = 40.0;
        let margin_b = 52.0;
        let plot_w = width - margin_l - margin_r;
        let plot_h = height - margin_t - margin_b;

        let xs: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|(x, _)| if self.log2_x { x.log2() } else { *x }))
            .collect();
        let ys: Vec<f64> = self
            .series
            .iter()
            .flat_map(|s| s.points.iter().map(|(_, y)| *y))
            .collect();
        if xs.is_empty() {
            return Ok(());
        }
        let (x_min, x_max) = bounds(&xs);
        let (y_min, y_max) = bounds(&ys);
        let pad = ((y_max - y_min) * 0.08).max(1e-6);
        let (y_min, y_max) = (y_min - pad, y_max + pad);
        let sx = |x: f64| {
            let x = if self.log2_x { x.log2() } else { x };
            margin_l + (x - x_min) / (x_max - x_min).max(1e-12) * plot_w
        };
        let sy = |y: f64| margin_t + (1.0 - (y - y_min) / (y_max - y_min).max(1e-12)) * plot_h;

        writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
        )?;
        writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#)?;
        writeln!(
            out,
            r#"<text x="{}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#,
            margin_l + plot_w / 2.0,
            escape(&self.title)
        )?;
        // Axes.
        writeln!(
            out,
            r#"<line x1="{margin_l}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
            margin_t + plot_h,
            margin_l + plot_w,
            margin_t + plot_h
        )?;
        writeln!(
            out,
            r#"<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" y2="{}" stroke="black"/>"#,
            margin_t + plot_h
        )?;
        // Y ticks.
        for i in 0..=4 {
            let y = y_min + (y_max - y_min) * i as f64 / 4.0;
            let py = sy(y);
            writeln!(
                out,
                r#"<line x1="{}" y1="{py}" x2="{margin_l}" y2="{py}" stroke="black"/>"#,
                margin_l - 4.0
            )?;
            writeln!(
                out,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{y:.3}</text>"#,
                margin_l - 7.0,
                py + 4.0
            )?;
        }
        // X ticks at the observed points of the first series.
        if let Some(first) = self.series.first() {
            for (x, _) in &first.points {
                let px = sx(*x);
                let py = margin_t + plot_h;
                writeln!(
                    out,
                    r#"<line x1="{px}" y1="{py}" x2="{px}" y2="{}" stroke="black"/>"#,
                    py + 4.0
                )?;
                let label = if self.log2_x {
                    format!("{}", *x as u64)
                } else {
                    format!("{x}")
                };
                writeln!(
                    out,
                    r#"<text x="{px}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{label}</text>"#,
                    py + 17.0
                )?;
            }
        }
        writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            margin_l + plot_w / 2.0,
            height - 12.0,
            escape(&self.x_label)
        )?;
        writeln!(
            out,
            r#"<text x="16" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            margin_t + plot_h / 2.0,
            margin_t + plot_h / 2.0,
            escape(&self.y_label)
        )?;

        for (i, series) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let path: Vec<String> = series
                .points
                .iter()
                .enumerate()
                .map(|(j, (x, y))| {
                    format!("{}{:.2},{:.2}", if j == 0 { "M" } else { "L" }, sx(*x), sy(*y))
                })
                .collect();
            writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#,
                path.join(" ")
            )?;
            for (x, y) in &series.points {
                writeln!(
                    out,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="2.6" fill="{color}"/>"#,
                    sx(*x),
                    sy(*y)
                )?;
            }
            let ly = margin_t + 16.0 * i as f64;
            let lx = margin_l + plot_w + 10.0;
            writeln!(
                out,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
                lx + 18.0
            )?;
            writeln!(
                out,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11">{}</text>"#,
                lx + 22.0,
                ly + 4.0,
                escape(&series.label)
            )?;
        }
        writeln!(out, "</svg>")?;
        Ok(())
    }
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        (min - 0.5, max + 0.5)
    } else {
        (min, max)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Group rows into chart series: key = series label, points averaged over
/// duplicate x values (e.g. seeds).
pub fn mean_series(rows: &[(String, f64, f64)]) -> Vec<Series> {
    let mut grouped: BTreeMap<String, BTreeMap<u64, (f64, usize)>> = BTreeMap::new();
    for (label, x, y) in rows {
        let entry = grouped
            .entry(label.clone())
            .or_default()
            .entry(x.to_bits())
            .or_insert((0.0, 0));
        entry.0 += y;
        entry.1 += 1;
    }
    grouped
        .into_iter()
        .map(|(label, points)| {
            let mut pts: Vec<(f64, f64)> = points
                .into_iter()
                .map(|(xb, (sum, n))| (f64::from_bits(xb), sum / n as f64))
                .collect();
            pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            Series { label, points: pts }
        })
        .collect()
}
