//! Deterministic SVG line charts from result CSVs: fixed canvas, fixed font,
//! coordinates printed with two decimals so reruns are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::experiments::{Output, RunError};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Named numeric columns of a CSV file.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, RunError> {
        let name = path.display().to_string();
        let mut r = csv::Reader::from_path(path).map_err(|e| RunError::Other(format!("{name}: {e}")))?;
        let columns = r.headers().map_err(|e| RunError::Other(format!("{name}: {e}")))?.iter().map(String::from).collect();
        let rows: Vec<Vec<String>> = r
            .records()
            .map(|rec| rec.map(|x| x.iter().map(String::from).collect()))
            .collect::<Result<_, _>>()
            .map_err(|e| RunError::Other(format!("{name}: {e}")))?;
        if rows.is_empty() {
            return Err(RunError::Other(format!("{name}: no data rows")));
        }
        Ok(Self { columns, rows })
    }

    fn index(&self, col: &str) -> Result<usize, RunError> {
        self.columns.iter().position(|c| c == col).ok_or_else(|| RunError::Other(format!("missing column {col:?}")))
    }

    /// Values of numeric column `col`; empty cells are skipped.
    pub fn numbers(&self, col: &str) -> Result<Vec<Option<f64>>, RunError> {
        let i = self.index(col)?;
        self.rows
            .iter()
            .map(|r| {
                let cell = r[i].trim();
                if cell.is_empty() {
                    return Ok(None);
                }
                cell.parse::<f64>().map(Some).map_err(|_| RunError::Other(format!("column {col:?}: bad number {cell:?}")))
            })
            .collect()
    }
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

/// Groups (x, y) pairs by the value of `key`, in ascending key order.
fn group(t: &Table, key: &str, x: &str, y: &str, label: impl Fn(f64) -> String, dashed: bool) -> Result<Vec<Series>, RunError> {
    let (k, xs, ys) = (t.numbers(key)?, t.numbers(x)?, t.numbers(y)?);
    let mut by: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for ((k, x), y) in k.into_iter().zip(xs).zip(ys) {
        if let (Some(k), Some(x), Some(y)) = (k, x, y) {
            if x.is_finite() && y.is_finite() {
                by.entry(ordered_bits(k)).or_default().push((x, y));
            }
        }
    }
    Ok(by
        .into_iter()
        .map(|(k, mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { label: label(from_ordered_bits(k)), points: pts, dashed }
        })
        .collect())
}

/// f64 → u64 preserving order.
fn ordered_bits(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn from_ordered_bits(b: u64) -> f64 {
    f64::from_bits(if b >> 63 == 1 { b & !(1 << 63) } else { !b })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A line chart with linear axes.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> Result<String, RunError> {
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if pts.is_empty() {
        return Err(RunError::Other(format!("{title}: nothing to plot")));
    }
    let span = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = span(&mut pts.iter().map(|p| p.0));
    let (y0, y1) = span(&mut pts.iter().map(|p| p.1));
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="monospace" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="20" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{m:.2} {t:.2}V{b:.2}H{r:.2}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(xv),
            HEIGHT - MARGIN + 16.0,
            tick(xv)
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN - 4.0, py(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 12.0, escape(xlabel));
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let d: Vec<String> = ser
            .points
            .iter()
            .enumerate()
            .map(|(j, &(x, y))| format!("{}{:.2} {:.2}", if j == 0 { "M" } else { "L" }, px(x), py(y)))
            .collect();
        let dash = if ser.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}"{dash}/>"#, d.join(""));
        for &(x, y) in &ser.points {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, px(x), py(y));
        }
        let ly = MARGIN + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 150.0,
            ly,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// Ĝ/J and its prediction against n, one pair of curves per β.
pub fn ratio_plot(t: &Table, title: &str) -> Result<String, RunError> {
    let mut series = group(t, "beta", "n", "ratio", |b| format!("ratio, beta={b}"), false)?;
    series.extend(group(t, "beta", "n", "prediction", |b| format!("prediction, beta={b}"), true)?);
    line_chart(title, "n", "G/J", &series)
}

/// Effective inverse correlation length against β, one curve per n.
pub fn nu_hat_plot(t: &Table) -> Result<String, RunError> {
    let series = group(t, "n", "beta", "nu_hat", |n| format!("n={n}"), false)?;
    line_chart("effective inverse correlation length", "beta", "nu_hat", &series)
}

/// Renders every plot whose source CSV is present in `dir`.
pub fn plot_dir(dir: &Path) -> Result<Vec<Output>, RunError> {
    let mut out = Vec::new();
    for (csv_name, title) in [("theorem14.csv", "G/J against chi_tilde_n"), ("theorem17.csv", "G/J against beta chi^2/q")] {
        let p = dir.join(csv_name);
        if p.exists() {
            let svg = ratio_plot(&Table::read(&p)?, title)?;
            // Both ratio tables in one directory keep distinct names.
            let name = if out.is_empty() { "ratio.svg".to_string() } else { "ratio_theorem17.svg".to_string() };
            out.push(Output { name, bytes: svg.into_bytes() });
        }
    }
    let p = dir.join("icl.csv");
    if p.exists() {
        out.push(Output { name: "nu_hat.svg".into(), bytes: nu_hat_plot(&Table::read(&p)?)?.into_bytes() });
    }
    if out.is_empty() {
        return Err(RunError::Other(format!("{}: no theorem14.csv, theorem17.csv or icl.csv", dir.display())));
    }
    Ok(out)
}
