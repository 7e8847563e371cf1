use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::CliResult;

#[cfg(test)]
const HEADER: [&str; 10] = ["scenario", "p", "dim", "depth", "kind", "value", "seed", "restarts", "wall_ms", "witness"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario: String,
    /// Exponent as accepted on input (`inf` for infinity), empty when not applicable.
    pub p: String,
    pub dim: usize,
    pub depth: usize,
    pub kind: String,
    pub value: f64,
    pub seed: u64,
    pub restarts: usize,
    pub wall_ms: u128,
    pub witness: String,
}

pub fn write_rows<W: Write>(w: W, rows: &[ResultRow], header: bool) -> CliResult<()> {
    let mut out = csv::WriterBuilder::new().has_headers(header).from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// Line plot of `value` against `log₂ dim`, one series per `(p, kind)`.
pub fn svg_plot(title: &str, rows: &[ResultRow]) -> String {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in rows {
        let name = format!("{} p={}", r.kind, r.p);
        let point = ((r.dim as f64).log2(), r.value);
        match series.iter_mut().find(|(n, _)| *n == name) {
            Some((_, pts)) => pts.push(point),
            None => series.push((name, vec![point])),
        }
    }
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let xs = rows.iter().map(|r| (r.dim as f64).log2());
    let (x0, x1) = xs.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let y1 = rows.iter().map(|r| r.value).fold(0.0, f64::max).max(1e-12) * 1.1;
    let xspan = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| pad + (x - x0) / xspan * (w - 2.0 * pad);
    let py = |y: f64| h - pad - y / y1 * (h - 2.0 * pad);
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" fill="none" stroke="black"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">log2 dim</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{:.3}</text>"#, pad - 4.0, pad + 4.0, y1);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">0</text>"#, pad - 4.0, h - pad);
    for (i, (name, pts)) in series.iter().enumerate() {
        let c = colors[i % colors.len()];
        let d: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#, d.join(" "));
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{c}"/>"#, px(x), py(y));
        }
        let _ = writeln!(s, r#"<text x="{}" y="{}" fill="{c}">{name}</text>"#, w - pad - 120.0, pad + 16.0 * i as f64);
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_svg(path: &Path, title: &str, rows: &[ResultRow]) -> CliResult<()> {
    std::fs::write(path, svg_plot(title, rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(dim: usize, value: f64) -> ResultRow {
        ResultRow {
            scenario: "duality".into(),
            p: "1".into(),
            dim,
            depth: 4,
            kind: "dc".into(),
            value,
            seed: 0,
            restarts: 2,
            wall_ms: 5,
            witness: String::new(),
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_rows(&mut buf, &[row(2, 1.5)], true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "duality,1,2,4,dc,1.5,0,2,5,");
    }

    #[test]
    fn svg_has_one_marker_per_row() {
        let svg = svg_plot("growth", &[row(2, 1.0), row(4, 1.5), row(8, 2.0)]);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<polyline").count(), 1);
    }
}
