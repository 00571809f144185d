//! Report and plot-file emission: text tables, CSV, portable graymap and SVG.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::stats::{AreaResistanceFit, Heatmap, Metric, VariationReport};

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
}

/// Fixed-width text table, one row per area group.
pub fn variation_text(report: &VariationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8} {:>5} {:>5} {:>5} {:>11} {:>9} {:>9} {:>8} {:>9} {:>8}",
        "group", "n", "open", "chips", "mean_R_ohm", "wafer_cv%", "spread%", "chip_cv%", "inter_cv%", "outliers"
    );
    for g in &report.groups {
        let _ = writeln!(
            s,
            "{:<8} {:>5} {:>5} {:>5} {:>11.1} {:>9.2} {:>9.2} {:>8} {:>9} {:>8}",
            g.group,
            g.n,
            g.n_open,
            g.n_chips,
            g.mean_r_ohm,
            g.wafer_cv,
            g.wafer_spread,
            opt(g.chip_cv, 2),
            opt(g.inter_chip_cv, 2),
            g.outliers.len()
        );
    }
    for label in &report.skipped_groups {
        let _ = writeln!(s, "{label:<8} skipped: fewer than 2 conducting records");
    }
    let _ = writeln!(s, "yield {:.4}  outlier policy {:?}", report.yield_fraction, report.policy);
    for g in report.groups.iter().filter(|g| !g.outliers.is_empty()) {
        for o in &g.outliers {
            let _ = writeln!(
                s,
                "outlier group {} chip {} at ({:.3}, {:.3}) mm: {:.1} ohm",
                g.group, o.chip_id, o.x_mm, o.y_mm, o.r_ohm
            );
        }
    }
    s
}

pub fn write_variation_csv<W: Write>(report: &VariationReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "group",
        "n",
        "n_open",
        "n_chips",
        "mean_r_ohm",
        "wafer_cv_pct",
        "wafer_spread_pct",
        "chip_cv_pct",
        "inter_chip_cv_pct",
        "n_outliers",
    ])?;
    for g in &report.groups {
        w.write_record([
            g.group.clone(),
            g.n.to_string(),
            g.n_open.to_string(),
            g.n_chips.to_string(),
            g.mean_r_ohm.to_string(),
            g.wafer_cv.to_string(),
            g.wafer_spread.to_string(),
            g.chip_cv.map_or_else(String::new, |v| v.to_string()),
            g.inter_chip_cv.map_or_else(String::new, |v| v.to_string()),
            g.outliers.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn fit_text(fit: &AreaResistanceFit) -> String {
    format!(
        "log-log fit ln R = {:.4} {:+.4} ln A  (n {}, rejected {})\n|r| log-log {:.4}  r linear {:.4}\n",
        fit.intercept,
        fit.slope,
        fit.n,
        fit.rejected,
        fit.pearson_r(),
        fit.r_raw
    )
}

/// Cell means as a CSV grid. Rows run from low to high y; empty cells are blank.
pub fn write_heatmap_csv<W: Write>(hm: &Heatmap, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let mut header = vec!["y_mm\\x_mm".to_string()];
    header.extend((0..hm.nx).map(|ix| format!("{:.3}", (ix as f64 + 0.5) * hm.width_mm / hm.nx as f64)));
    w.write_record(&header)?;
    for iy in 0..hm.ny {
        let mut row = vec![format!("{:.3}", (iy as f64 + 0.5) * hm.height_mm / hm.ny as f64)];
        row.extend((0..hm.nx).map(|ix| hm.cell(ix, iy).map_or_else(String::new, |v| v.to_string())));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn gray(hm: &Heatmap, v: f64) -> u8 {
    match hm.range() {
        Some((lo, hi)) if hi > lo => (1.0 + 254.0 * (v - lo) / (hi - lo)).round() as u8,
        _ => 128,
    }
}

/// Plain (ASCII) graymap, one pixel per cell, high y at the top. Empty cells are black;
/// values map to 1..=255.
pub fn heatmap_pgm(hm: &Heatmap) -> String {
    let mut s = format!("P2\n{} {}\n255\n", hm.nx, hm.ny);
    for iy in (0..hm.ny).rev() {
        let row: Vec<String> = (0..hm.nx)
            .map(|ix| hm.cell(ix, iy).map_or(0, |v| gray(hm, v)).to_string())
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn heatmap_svg(hm: &Heatmap, metric: Metric) -> String {
    const CELL: usize = 40;
    let (w, h) = (hm.nx * CELL, hm.ny * CELL);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        w,
        h + 40,
        w,
        h + 40
    );
    for iy in 0..hm.ny {
        let py = (hm.ny - 1 - iy) * CELL;
        for ix in 0..hm.nx {
            let px = ix * CELL;
            match hm.cell(ix, iy) {
                Some(v) => {
                    let g = gray(hm, v);
                    let _ = writeln!(
                        s,
                        r#"<rect x="{px}" y="{py}" width="{CELL}" height="{CELL}" fill="rgb({g},{g},{g})"><title>{v:.4}</title></rect>"#
                    );
                }
                None => {
                    let _ = writeln!(
                        s,
                        r##"<rect x="{px}" y="{py}" width="{CELL}" height="{CELL}" fill="none" stroke="#c00" stroke-dasharray="4 4"/>"##
                    );
                }
            }
        }
    }
    let (lo, hi) = hm.range().unwrap_or((f64::NAN, f64::NAN));
    let _ = writeln!(
        s,
        r#"<text x="4" y="{}" font-family="monospace" font-size="12">{} {:.4}..{:.4}  grad ({:.4}, {:.4})/mm</text>"#,
        h + 16,
        metric.column(),
        lo,
        hi,
        hm.plane.gradient[0],
        hm.plane.gradient[1]
    );
    s.push_str("</svg>\n");
    s
}
