//! CSV tables and self-contained SVG plots.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::ExpResult;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            Cell::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            Cell::Text(_) => None,
        }
    }
}

/// Shortest round-trip decimal, switching to scientific notation at
/// magnitudes of 1e6 and above or below 1e-6.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-6..1e6).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Num(v) => f.write_str(&format_number(*v)),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => f.write_str(s),
            Cell::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric values of a column; text cells become NaN.
    pub fn column(&self, name: &str) -> Vec<f64> {
        let Some(i) = self.column_index(name) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r[i].as_f64().unwrap_or(f64::NAN)).collect()
    }

    pub fn to_csv_string(&self) -> ExpResult<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn write_csv(&self, path: &Path) -> ExpResult<()> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}

/// Files written by a run, in order.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Artifacts {
    pub files: Vec<PathBuf>,
}

impl Artifacts {
    pub fn csv(&mut self, dir: &Path, name: &str, table: &Table) -> ExpResult<()> {
        let path = dir.join(name);
        table.write_csv(&path)?;
        self.files.push(path);
        Ok(())
    }

    pub fn svg(&mut self, dir: &Path, name: &str, svg: &str) -> ExpResult<()> {
        let path = dir.join(name);
        std::fs::write(&path, svg)?;
        self.files.push(path);
        Ok(())
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub struct Series<'a> {
    pub label: &'a str,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dashed: bool,
}

/// Line chart. Non-finite points, and non-positive ones on a log axis, are
/// skipped and split the line.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let usable = |y: f64| y.is_finite() && (!log_y || y > 0.0);
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in series {
        for (&x, &y) in s.x.iter().zip(&s.y) {
            if x.is_finite() && usable(y) {
                xs.push(x);
                ys.push(ty(y));
            }
        }
    }
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| MARGIN_T + ph - (y - y0) / (y1 - y0) * ph;

    let mut out = header_svg(title);
    axes(&mut out, x_label, y_label);
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let ylab = if log_y { format!("1e{yv:.1}") } else { short(yv) };
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            px(xv),
            HEIGHT - MARGIN_B + 16.0,
            short(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN_L - 6.0,
            py(yv) + 4.0,
            ylab
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        let mut path = String::new();
        let mut pen_down = false;
        for (&x, &y) in s.x.iter().zip(&s.y) {
            if x.is_finite() && usable(y) {
                let _ = write!(path, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, px(x), py(ty(y)));
                pen_down = true;
            } else {
                pen_down = false;
            }
        }
        if !path.is_empty() {
            let _ = writeln!(
                out,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
                path.trim_end()
            );
        }
        let ly = MARGIN_T + 14.0 + 18.0 * i as f64;
        let lx = WIDTH - MARGIN_R + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"{dash}/>"#,
            lx + 22.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Heatmap of a `rows x cols` grid given row-major; NaN cells are left blank.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, rows: usize, cols: usize, values: &[f64]) -> String {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let (lo, hi) = bounds(&finite);
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let cw = pw / cols.max(1) as f64;
    let ch = ph / rows.max(1) as f64;
    let mut out = header_svg(title);
    for r in 0..rows {
        for c in 0..cols {
            let v = values[r * cols + c];
            if !v.is_finite() {
                continue;
            }
            let t = (v - lo) / (hi - lo);
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                MARGIN_L + c as f64 * cw,
                MARGIN_T + r as f64 * ch,
                cw + 0.05,
                ch + 0.05,
                ramp(t)
            );
        }
    }
    axes(&mut out, x_label, y_label);
    let lx = WIDTH - MARGIN_R + 20.0;
    for i in 0..=10 {
        let t = 1.0 - i as f64 / 10.0;
        let _ = writeln!(
            out,
            r#"<rect x="{lx:.1}" y="{:.1}" width="16" height="{:.1}" fill="{}"/>"#,
            MARGIN_T + i as f64 * ph / 11.0,
            ph / 11.0 + 0.5,
            ramp(t)
        );
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#, lx + 22.0, MARGIN_T + 10.0, short(hi));
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="11">{}</text>"#, lx + 22.0, MARGIN_T + ph, short(lo));
    out.push_str("</svg>\n");
    out
}

fn header_svg(title: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" font-size="14" text-anchor="middle">{}</text>"#,
        (WIDTH - MARGIN_R + MARGIN_L) / 2.0,
        escape(title)
    );
    out
}

fn axes(out: &mut String, x_label: &str, y_label: &str) {
    let (x0, y0) = (MARGIN_L, HEIGHT - MARGIN_B);
    let _ = writeln!(
        out,
        r#"<path d="M{x0},{MARGIN_T} L{x0},{y0} L{:.1},{y0}" fill="none" stroke="black"/>"#,
        WIDTH - MARGIN_R
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        (WIDTH - MARGIN_R + MARGIN_L) / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn short(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// White to dark blue.
fn ramp(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(255.0, 8.0), lerp(255.0, 48.0), lerp(255.0, 107.0))
}
