//! `ber.csv` and a static log-scale BER plot.

use crate::ber::BerResult;
use crate::error::{HarnessError, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const CSV_HEADER: &str = "scheme,pbar,K,S,ber,ci_halfwidth,seed";

fn opt(v: Option<usize>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn csv_string(results: &[BerResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.scheme,
            r.pbar,
            opt(r.pa),
            opt(r.s_mem),
            r.ber,
            r.ci_halfwidth,
            r.seed
        );
    }
    out
}

fn series_label(r: &BerResult) -> String {
    let mut label = r.scheme.to_string();
    if let Some(k) = r.pa {
        let _ = write!(label, " PA K={k}");
    }
    if let Some(s) = r.s_mem {
        let _ = write!(label, " DFF S={s}");
    }
    label
}

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// BER against average power, both axes logarithmic.
pub fn svg_string(results: &[BerResult]) -> String {
    let (w, h) = (640.0, 440.0);
    let (left, right, top, bottom) = (70.0, 170.0, 20.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);

    let floor = results
        .iter()
        .filter(|r| r.ber > 0.0)
        .map(|r| r.ber)
        .fold(1.0f64, f64::min);
    let ber_of = |r: &BerResult| if r.ber > 0.0 { r.ber } else { floor / 10.0 };
    let y_lo = results
        .iter()
        .map(|r| ber_of(r).log10().floor())
        .fold(0.0f64, f64::min)
        .min(-1.0);
    let y_hi = results
        .iter()
        .map(|r| ber_of(r).log10().ceil())
        .fold(y_lo + 1.0, f64::max);
    let x_vals: Vec<f64> = results.iter().map(|r| r.pbar.log10()).collect();
    let mut x_lo = x_vals.iter().copied().fold(f64::INFINITY, f64::min);
    let mut x_hi = x_vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if x_hi - x_lo < 1e-9 {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    let pad = 0.05 * (x_hi - x_lo);
    let (x_lo, x_hi) = (x_lo - pad, x_hi + pad);
    let px = |v: f64| left + (v.log10() - x_lo) / (x_hi - x_lo) * pw;
    let py = |v: f64| top + (y_hi - v.log10()) / (y_hi - y_lo) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for e in (y_lo as i32)..=(y_hi as i32) {
        let y = py(10f64.powi(e));
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
    }
    for e in (x_lo.ceil() as i32)..=(x_hi.floor() as i32) {
        for mult in 1..10 {
            let v = mult as f64 * 10f64.powi(e);
            if v.log10() < x_lo || v.log10() > x_hi {
                continue;
            }
            let x = px(v);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#999"/>"##,
                top + ph,
                top + ph - if mult == 1 { 8.0 } else { 4.0 }
            );
            if mult == 1 {
                let _ = writeln!(
                    s,
                    r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{v}</text>"#,
                    top + ph + 16.0
                );
            }
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">average power per symbol (molecules)</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">BER</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );

    let mut series: BTreeMap<String, Vec<&BerResult>> = BTreeMap::new();
    for r in results {
        series.entry(series_label(r)).or_default().push(r);
    }
    for (k, (label, mut rs)) in series.into_iter().enumerate() {
        rs.sort_by(|a, b| a.pbar.total_cmp(&b.pbar));
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = rs
            .iter()
            .map(|r| format!("{:.2},{:.2}", px(r.pbar), py(ber_of(r))))
            .collect();
        if points.len() > 1 {
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                points.join(" ")
            );
        }
        for r in &rs {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(r.pbar),
                py(ber_of(r))
            );
        }
        let ly = top + 14.0 + 18.0 * k as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{ly:.2}">{label}</text>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            lx + 24.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `ber.csv` and `ber.svg` into `dir` and returns their paths.
pub fn emit_report(results: &[BerResult], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    if results.is_empty() {
        return Err(HarnessError::EmptyReport);
    }
    fs::create_dir_all(dir)?;
    let csv = dir.join("ber.csv");
    let svg = dir.join("ber.svg");
    fs::write(&csv, csv_string(results))?;
    fs::write(&svg, svg_string(results))?;
    Ok((csv, svg))
}
