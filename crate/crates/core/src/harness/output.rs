use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Report, Table};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Svg,
}

impl OutputFormat {
    pub const ALL: [OutputFormat; 3] = [OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg];
}

/// Writes `report.json`, one CSV per table and one SVG per plotted table.
/// Returns the written paths in a fixed order.
pub fn emit_report(report: &Report, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
    let mut written = Vec::new();
    let mut write = |name: String, body: &[u8]| -> Result<()> {
        let path = dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
        f.write_all(body)?;
        written.push(path);
        Ok(())
    };
    if formats.contains(&OutputFormat::Json) {
        let mut sealed = report.clone();
        if sealed.content_hash.is_empty() {
            sealed.content_hash = sealed.compute_hash()?;
        }
        write("report.json".into(), serde_json::to_string_pretty(&sealed)?.as_bytes())?;
    }
    for table in &report.tables {
        if formats.contains(&OutputFormat::Csv) {
            write(format!("{}.csv", table.name), table_csv(table).as_bytes())?;
        }
        if formats.contains(&OutputFormat::Svg) && table.plot.is_some() {
            write(format!("{}.svg", table.name), render_svg(table)?.as_bytes())?;
        }
    }
    Ok(written)
}

fn table_csv(table: &Table) -> String {
    let mut s = table.columns.join(",");
    s.push('\n');
    for r in 0..table.rows.len() {
        let cells: Vec<String> = (0..table.columns.len()).map(|c| table.cell(r, c)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const PALETTE: [&str; 8] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"];

/// Line plot of the table's plot spec: one polyline per series.
pub fn render_svg(table: &Table) -> Result<String> {
    let Some(spec) = &table.plot else {
        return Err(Error::InvalidArgument(format!("table {} has no plot", table.name)));
    };
    let col = |name: &str| table.column_index(name).ok_or_else(|| Error::InvalidArgument(format!("no column {name} in {}", table.name)));
    let (xi, yi) = (col(&spec.x)?, col(&spec.y)?);
    let series_cols: Vec<usize> = spec.series.iter().map(|s| col(s)).collect::<Result<_>>()?;
    let mut lines: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (r, row) in table.rows.iter().enumerate() {
        if !row[xi].is_finite() || !row[yi].is_finite() {
            continue;
        }
        let label: Vec<String> = series_cols.iter().map(|&c| format!("{}={}", table.columns[c], table.cell(r, c))).collect();
        lines.entry(label.join(" ")).or_default().push((row[xi], row[yi]));
    }

    let (w, h, margin) = (640.0, 420.0, 60.0);
    let points = lines.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for (x, y) in points {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() {
        (x0, x1, y1) = (0.0, 1.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| margin + (x - x0) / (x1 - x0) * (w - 2.0 * margin);
    let sy = |y: f64| h - margin - (y - y0) / (y1 - y0) * (h - 2.0 * margin);

    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#, w / 2.0, escape(&table.name)).unwrap();
    writeln!(
        s,
        r#"<g stroke="black" stroke-width="1"><line x1="{m}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{m}" y1="{b}" x2="{m}" y2="{m}"/></g>"#,
        m = margin,
        b = h - margin,
        r = w - margin
    )
    .unwrap();
    for k in 0..=4 {
        let fx = x0 + (x1 - x0) * k as f64 / 4.0;
        let fy = y0 + (y1 - y0) * k as f64 / 4.0;
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#, sx(fx), h - margin + 16.0, trim(fx)).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#, margin - 6.0, sy(fy) + 4.0, trim(fy)).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#, w / 2.0, h - 16.0, escape(&spec.x)).unwrap();
    writeln!(s, r#"<text x="16" y="{}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {})">{}</text>"#, h / 2.0, h / 2.0, escape(&spec.y)).unwrap();
    for (i, (label, mut pts)) in lines.into_iter().enumerate() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let colour = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        writeln!(s, r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#, path.join(" ")).unwrap();
        if !label.is_empty() && i < 24 {
            writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="9" fill="{colour}">{}</text>"#,
                w - margin + 4.0,
                margin + 11.0 * i as f64,
                escape(&label)
            )
            .unwrap();
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn trim(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
