//! Plot data: named x/y series written as CSV, with a bare-bones SVG view.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::optimizer::{evaluate_model, QuadraticModel};
use crate::profile::csv_number;

/// Points per fitted curve.
pub const CURVE_POINTS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Series { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[i])
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| csv_number(*v)).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// `n` evenly spaced samples of each model over `[lo, hi]`; one column per model.
pub fn curve(name: &str, models: &[(&str, &QuadraticModel)], lo: f64, hi: f64, n: usize) -> Series {
    let mut columns = vec!["h"];
    columns.extend(models.iter().map(|(label, _)| *label));
    let mut s = Series::new(name, &columns);
    let last = n.saturating_sub(1).max(1) as f64;
    for i in 0..n {
        let h = lo + (hi - lo) * i as f64 / last;
        let mut row = vec![h];
        row.extend(models.iter().map(|(_, m)| evaluate_model(m, h)));
        s.rows.push(row);
    }
    s
}

/// Abscissa of the smallest value in column `col`.
pub fn argmin(series: &Series, col: usize) -> Option<f64> {
    series.rows.iter().min_by(|x, y| x[col].total_cmp(&y[col])).map(|r| r[0])
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Renders lines (every non-`h` column of `lines`) and point markers.
pub fn render_svg(title: &str, lines: &[&Series], markers: &[&Series]) -> String {
    let all = lines.iter().chain(markers);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in all {
        for row in &s.rows {
            xs.push(row[0]);
            ys.extend(row[1..].iter().copied().filter(|v| v.is_finite()));
        }
    }
    let span = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo { (lo, hi) } else { (lo - 1.0, lo + 1.0) }
    };
    let (x0, x1) = span(&xs);
    let (y0, y1) = span(&ys);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#, WIDTH / 2.0);
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for (x, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}" font-size="11">h={x:.4}</text>"#,
            px(x),
            HEIGHT - MARGIN + 16.0
        );
    }
    for y in [y0, y1] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="11">{y:.3}</text>"#,
            MARGIN - 4.0,
            py(y) + 4.0
        );
    }
    let mut color = 0;
    for s in lines {
        for col in 1..s.columns.len() {
            let pts: Vec<String> = s
                .rows
                .iter()
                .filter(|r| r[col].is_finite())
                .map(|r| format!("{:.2},{:.2}", px(r[0]), py(r[col])))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline points="{}" stroke="{}" fill="none" stroke-width="1.5"><title>{}</title></polyline>"#,
                pts.join(" "),
                COLORS[color % COLORS.len()],
                s.columns[col]
            );
            color += 1;
        }
    }
    for s in markers {
        for r in &s.rows {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}"/>"#,
                px(r[0]),
                py(r[1]),
                COLORS[color % COLORS.len()]
            );
        }
        color += 1;
    }
    svg.push_str("</svg>\n");
    svg
}
