//! Canned reproductions. Each runs a pipeline with the calibrated defaults
//! and compares the results against acceptance bands.

use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use crate::dataset::{DatasetMetadata, JunctionDataset, JunctionRecord};
use crate::error::{Error, Result};
use crate::geometry::{overlay, shadow_shift, DolanMask, EvaporationStep, Regime, StackGeometry};
use crate::ler::{ler_sigma, sample_edge, LerModel};
use crate::rng::{substream, Domain};
use crate::stats::{area_resistance_fit, heatmap, std_dev, variation_report, Metric, OutlierPolicy, DEFAULT_GRID};
use crate::wafer::{simulate_wafer, WaferConfig, WaferNoise};
use crate::writer::{lw_3sigma, placement_max, realized_linewidth, realized_mean, LwNoiseModel, ScanDirection, WriterConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentId {
    Fig2b,
    Fig2c,
    Fig3a,
    Fig3d,
    Fig4,
    SupplTable1,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::Fig2b,
        ExperimentId::Fig2c,
        ExperimentId::Fig3a,
        ExperimentId::Fig3d,
        ExperimentId::Fig4,
        ExperimentId::SupplTable1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Fig2b => "fig2b",
            ExperimentId::Fig2c => "fig2c",
            ExperimentId::Fig3a => "fig3a",
            ExperimentId::Fig3d => "fig3d",
            ExperimentId::Fig4 => "fig4",
            ExperimentId::SupplTable1 => "suppl-table1",
        }
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|id| id.as_str() == s).ok_or_else(|| {
            let valid: Vec<&str> = Self::ALL.iter().map(|id| id.as_str()).collect();
            Error::Config(format!("unknown experiment '{s}'; valid ids: {}", valid.join(", ")))
        })
    }
}

impl std::fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One compared quantity. Booleans are encoded as 1/0 with band [1, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub quantity: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

impl Check {
    pub fn band(quantity: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            quantity: quantity.into(),
            value,
            lo,
            hi,
            pass: value >= lo && value <= hi,
        }
    }

    pub fn around(quantity: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self::band(quantity, value, target - tol, target + tol)
    }

    pub fn holds(quantity: impl Into<String>, ok: bool) -> Self {
        Self::band(quantity, f64::from(u8::from(ok)), 1.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub id: ExperimentId,
    pub checks: Vec<Check>,
    /// Free-form supporting numbers, printed after the checks.
    pub notes: Vec<String>,
}

impl Comparison {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.id);
        let width = self.checks.iter().map(|c| c.quantity.len()).max().unwrap_or(8).max(8);
        let _ = writeln!(s, "{:<width$}  {:>12}  {:>12}  {:>12}  result", "quantity", "value", "lo", "hi");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<width$}  {:>12.4}  {:>12.4}  {:>12.4}  {}",
                c.quantity,
                c.value,
                c.lo,
                c.hi,
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "  {n}");
        }
        let _ = writeln!(s, "overall {}", if self.all_pass() { "PASS" } else { "FAIL" });
        s
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["experiment", "quantity", "value", "lo", "hi", "result"])?;
        for c in &self.checks {
            w.write_record([
                self.id.as_str(),
                &c.quantity,
                &c.value.to_string(),
                &c.lo.to_string(),
                &c.hi.to_string(),
                if c.pass { "PASS" } else { "FAIL" },
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn run(id: ExperimentId, seed: u64) -> Result<Comparison> {
    let (checks, notes) = match id {
        ExperimentId::Fig2b => field_size_study(seed)?,
        ExperimentId::Fig2c => scan_direction_study(seed)?,
        ExperimentId::Fig3a => ler_angle_study(seed)?,
        ExperimentId::Fig3d => regime_study(seed)?,
        ExperimentId::Fig4 => wafer_study(seed)?,
        ExperimentId::SupplTable1 => linewidth_table()?,
    };
    Ok(Comparison { id, checks, notes })
}

type Outcome = Result<(Vec<Check>, Vec<String>)>;

fn writer(field_size: f64, scan_direction: ScanDirection) -> WriterConfig {
    WriterConfig {
        field_size,
        scan_direction,
        ..WriterConfig::default()
    }
}

fn sampled_3sigma(nominal: f64, cfg: &WriterConfig, model: &LwNoiseModel, seed: u64, stream: u64, n: usize) -> Result<f64> {
    let mut rng = substream(seed, Domain::Sampling, stream);
    let v: Vec<f64> = (0..n)
        .map(|_| realized_linewidth(nominal, cfg, model, &mut rng))
        .collect::<Result<_>>()?;
    Ok(3.0 * std_dev(&v)?)
}

fn field_size_study(seed: u64) -> Outcome {
    let m = LwNoiseModel::default();
    let mut checks = vec![
        Check::around("3sigma_lw_nm field 500um", lw_3sigma(&m, 500.0)?, 17.4, 0.0),
        Check::around("3sigma_lw_nm field 100um", lw_3sigma(&m, 100.0)?, 7.1, 0.0),
        Check::around("3sigma_lw_nm field 50um", lw_3sigma(&m, 50.0)?, 7.1, 0.0),
        Check::around("placement_max_nm field 500um", placement_max(&m, 500.0)?, 41.0, 0.0),
        Check::around("placement_max_nm field 200um", placement_max(&m, 200.0)?, 33.0, 0.0),
    ];
    for (i, (fs, target)) in [(500.0, 17.4), (100.0, 7.1)].into_iter().enumerate() {
        let s = sampled_3sigma(100.0, &writer(fs, ScanDirection::Along), &m, seed, i as u64, 20_000)?;
        checks.push(Check::around(format!("sampled 3sigma_lw_nm field {fs}um"), s, target, 0.05 * target));
    }
    let notes = vec![format!("interpolated 3sigma at 200um: {:.2} nm", lw_3sigma(&m, 200.0)?)];
    Ok((checks, notes))
}

fn scan_direction_study(seed: u64) -> Outcome {
    let m = LwNoiseModel::default();
    let along = writer(100.0, ScanDirection::Along);
    let across = writer(100.0, ScanDirection::Across);
    let mean = |n, c: &WriterConfig| realized_mean(n, c, &m);
    let along_gap = mean(103.0, &along)? - mean(100.0, &along)?;
    let across_gap = mean(105.0, &across)? - mean(103.0, &across)?;
    let across_gap_3 = mean(103.0, &across)? - mean(100.0, &across)?;

    let sample_mean = |n, c: &WriterConfig, stream| -> Result<f64> {
        let mut rng = substream(seed, Domain::Sampling, stream);
        let v: Vec<f64> = (0..5000)
            .map(|_| realized_linewidth(n, c, &m, &mut rng))
            .collect::<Result<_>>()?;
        crate::stats::mean(&v)
    };
    let sampled_across = sample_mean(103.0, &across, 11)? - sample_mean(100.0, &across, 10)?;
    let sampled_along = sample_mean(103.0, &along, 13)? - sample_mean(100.0, &along, 12)?;

    let checks = vec![
        Check::around("along mean(103) - mean(100) nm", along_gap, 0.0, 0.5),
        Check::band("across mean(105) - mean(103) nm", across_gap, along.step_size, f64::INFINITY),
        Check::around("across mean(103) - mean(100) nm", across_gap_3, 3.0, 1.0),
        Check::around("sampled along difference 103-100 nm", sampled_along, 0.0, 0.5),
        Check::around("sampled across difference 103-100 nm", sampled_across, across_gap_3, 0.5),
    ];
    Ok((checks, vec![]))
}

fn linewidth_table() -> Outcome {
    const NOMINAL: [f64; 6] = [100.0, 103.0, 105.0, 150.0, 300.0, 500.0];
    const ALONG: [f64; 6] = [99.0, 99.0, 104.0, 150.0, 302.0, 502.0];
    const ACROSS: [f64; 6] = [96.0, 99.0, 101.0, 144.0, 300.0, 500.0];
    let m = LwNoiseModel::default();
    let mut checks = Vec::new();
    for (dir, measured) in [(ScanDirection::Along, ALONG), (ScanDirection::Across, ACROSS)] {
        let cfg = writer(100.0, dir);
        for (n, target) in NOMINAL.into_iter().zip(measured) {
            let name = format!("{} {n} nm mean", format!("{dir:?}").to_lowercase());
            checks.push(Check::around(name, realized_mean(n, &cfg, &m)?, target, 2.0));
        }
    }
    Ok((checks, vec![]))
}

fn ler_angle_study(seed: u64) -> Outcome {
    const ANGLES: [f64; 8] = [0.0, 15.0, 30.0, 40.0, 45.0, 50.0, 55.0, 62.0];
    let model = LerModel::default();
    let mut measured = Vec::new();
    for (i, &a) in ANGLES.iter().enumerate() {
        // 64 edges of 2 µm, like a batch of SEM frames.
        let mut rng = substream(seed, Domain::Sampling, 100 + i as u64);
        let sigmas: Vec<f64> = (0..64)
            .map(|_| sample_edge(2000.0, &model, a, &mut rng).and_then(|p| ler_sigma(&p)))
            .collect::<Result<_>>()?;
        measured.push(crate::stats::mean(&sigmas)?);
    }
    let at = |a: f64| measured[ANGLES.iter().position(|&x| x == a).expect("tabulated angle")];
    let rises_past_45 = measured
        .iter()
        .zip(&ANGLES)
        .skip_while(|(_, &a)| a < 45.0)
        .map(|(s, _)| *s)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1] > w[0]);
    let checks = vec![
        Check::around("LER nm at 0 deg", at(0.0), 2.0, 0.3),
        Check::band("LER growth 0 to 30 deg nm", at(30.0) - at(0.0), -0.3, 0.6),
        Check::holds("LER(62) > LER(45)", at(62.0) > at(45.0)),
        Check::holds("LER increasing above 45 deg", rises_past_45),
    ];
    let notes = ANGLES
        .iter()
        .zip(&measured)
        .map(|(a, s)| format!("angle {a:>4} deg: LER {s:.2} nm"))
        .collect();
    Ok((checks, notes))
}

fn overlay_check(angle: f64) -> Result<(f64, Regime)> {
    let stack = StackGeometry::default();
    let mask = DolanMask::new(150.0, 260.0, 600.0, 170.0)?;
    let ov = overlay(&stack, &mask, &EvaporationStep::new(angle, 30.0)?, &EvaporationStep::new(0.0, 50.0)?)?;
    Ok((shadow_shift(&stack, angle)?, ov.regime))
}

fn group_cvs(records: Vec<JunctionRecord>) -> Result<Vec<(String, f64)>> {
    let ds = JunctionDataset::new(records, DatasetMetadata::measured());
    let rep = variation_report(&ds, OutlierPolicy::Keep)?;
    Ok(rep.groups.into_iter().map(|g| (g.group, g.wafer_cv)).collect())
}

/// Wafer CV per group label.
pub type GroupCvs = Vec<(String, f64)>;

/// Full overlay at 40° against partial overlay at 35°, per group.
pub fn regime_cvs(seed: u64, noise: Option<WaferNoise>) -> Result<(GroupCvs, GroupCvs, usize)> {
    let mut full_cfg = WaferConfig::regime_study(40.0);
    let mut partial_cfg = WaferConfig::regime_study(35.0);
    if let Some(n) = noise {
        full_cfg.noise = n;
        partial_cfg.noise = n;
    }
    let full = simulate_wafer(&full_cfg, seed)?;
    let partial = simulate_wafer(&partial_cfg, seed)?;
    let mismatched = full.iter().filter(|r| r.regime != Some(Regime::Full)).count()
        + partial.iter().filter(|r| r.regime != Some(Regime::Partial)).count();
    Ok((group_cvs(full)?, group_cvs(partial)?, mismatched))
}

fn regime_study(seed: u64) -> Outcome {
    let (s40, r40) = overlay_check(40.0)?;
    let (s35, r35) = overlay_check(35.0)?;
    let mut checks = vec![
        Check::around("shift nm at 40 deg", s40, 419.6, 0.1),
        Check::around("shift nm at 35 deg", s35, 350.1, 0.1),
        Check::holds("40 deg, 260 nm window: full overlay", r40 == Regime::Full),
        Check::holds("35 deg, 260 nm window: partial overlay", r35 == Regime::Partial),
    ];

    let gradient_only = WaferNoise {
        angle_gradient: true,
        ..WaferNoise::none()
    };
    let (full, partial, _) = regime_cvs(seed, Some(gradient_only))?;
    let max_full = full.iter().map(|g| g.1).fold(0.0, f64::max);
    let min_partial = partial.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    checks.push(Check::band("angle-gradient only: full CV %", max_full, 0.0, 1e-9));
    checks.push(Check::band("angle-gradient only: partial CV %", min_partial, 1e-6, f64::INFINITY));

    let (full, partial, mismatched) = regime_cvs(seed, None)?;
    let ratio = crate::stats::mean(&full.iter().zip(&partial).map(|(f, p)| p.1 / f.1).collect::<Vec<_>>())?;
    checks.push(Check::band("calibrated partial/full CV ratio", ratio, 1.5, f64::INFINITY));
    let mut notes = vec![format!("{mismatched} junctions left their nominal overlay regime")];
    for (f, p) in full.iter().zip(&partial) {
        notes.push(format!("group {}: full CV {:.2}%  partial CV {:.2}%", f.0, f.1, p.1));
    }
    Ok((checks, notes))
}

fn lw_top_sigma(records: &[JunctionRecord], group: &str) -> Result<f64> {
    let v: Vec<f64> = records.iter().filter(|r| r.group == group).filter_map(|r| r.lw_top_nm).collect();
    std_dev(&v)
}

/// Groups used for the area-resistance fit.
pub const FIT_GROUPS: [&str; 3] = ["0.008", "0.025", "0.120"];

fn wafer_study(seed: u64) -> Outcome {
    let cfg = WaferConfig::paper();
    let records = simulate_wafer(&cfg, seed)?;
    let zero = simulate_wafer(&WaferConfig::paper_zero_angle(), seed)?;
    let substrate = cfg.layout.substrate_size;
    let ds = JunctionDataset::new(records, DatasetMetadata::measured());
    let rep = variation_report(&ds, OutlierPolicy::ThreeSigma)?;

    let mut checks = vec![
        Check::band("junctions", ds.len() as f64, 2500.0, f64::INFINITY),
        Check::around("chips", cfg.layout.chips.len() as f64, 6.0, 0.0),
        Check::around("area groups", rep.groups.len() as f64, 5.0, 0.0),
    ];
    let mut by_area: Vec<_> = rep.groups.iter().collect();
    by_area.sort_by(|a, b| {
        let (x, y) = (a.group.parse::<f64>().unwrap_or(0.0), b.group.parse::<f64>().unwrap_or(0.0));
        y.total_cmp(&x)
    });
    for g in &by_area {
        checks.push(Check::band(format!("group {} wafer CV %", g.group), g.wafer_cv, 4.4, 9.8));
    }
    checks.push(Check::holds(
        "wafer CV increases as area decreases",
        by_area.windows(2).all(|w| w[1].wafer_cv > w[0].wafer_cv),
    ));
    for g in &by_area {
        checks.push(Check::band(format!("group {} chip CV %", g.group), g.chip_cv.unwrap_or(f64::NAN), 2.3, 4.8));
    }
    for g in &by_area {
        checks.push(Check::band(
            format!("group {} inter-chip CV %", g.group),
            g.inter_chip_cv.unwrap_or(f64::NAN),
            2.1,
            7.3,
        ));
    }
    let s45 = lw_top_sigma(&ds.records, "0.025")?;
    let s0 = lw_top_sigma(&zero, "0.025")?;
    checks.push(Check::around("top LW sigma nm, 150x170, 45 deg", s45, 4.0, 0.5));
    checks.push(Check::around("top LW sigma nm, 150x170, 0 deg", s0, 3.3, 0.5));
    checks.push(Check::holds("top LW sigma smaller at 0 deg", s0 < s45));

    let pairs = ds
        .records
        .iter()
        .filter(|r| FIT_GROUPS.contains(&r.group.as_str()) && r.is_conducting())
        .map(|r| (r.area_um2, r.r_ohm));
    let fit = area_resistance_fit(pairs)?;
    checks.push(Check::around("log-log slope", fit.slope, -1.0, 0.05));
    checks.push(Check::band("|r| area vs resistance", fit.r_raw.abs(), 0.7, 0.9));

    let grad = |recs: &[JunctionRecord], metric| -> Result<f64> {
        let sel = recs.iter().filter(|r| r.group == "0.025");
        Ok(heatmap(sel, metric, substrate, DEFAULT_GRID)?.plane.gradient_magnitude())
    };
    let g45 = grad(&ds.records, Metric::LwBot)?;
    let g0 = grad(&zero, Metric::LwBot)?;
    checks.push(Check::holds("bottom LW gradient weaker at 0 deg", g0 < g45));
    let r_grad = heatmap(ds.records.iter(), Metric::Resistance, substrate, DEFAULT_GRID)?.plane;

    let notes = vec![
        format!("log-log |r| {:.4}; linear r {:.4}", fit.pearson_r(), fit.r_raw),
        format!("bottom LW gradient nm/mm: 45 deg {g45:.4}, 0 deg {g0:.4}"),
        format!(
            "resistance gradient ohm/mm ({:.3}, {:.3})",
            r_grad.gradient[0], r_grad.gradient[1]
        ),
        format!("yield {:.4}", rep.yield_fraction),
    ];
    Ok((checks, notes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_parse_and_list_valid_on_error() {
        for id in ExperimentId::ALL {
            assert_eq!(id.as_str().parse::<ExperimentId>().unwrap(), id);
        }
        let err = "fig9".parse::<ExperimentId>().unwrap_err().to_string();
        assert!(err.contains("suppl-table1") && err.contains("fig2b"));
    }

    #[test]
    fn cheap_experiments_pass() {
        for id in [ExperimentId::Fig2b, ExperimentId::Fig2c, ExperimentId::SupplTable1] {
            let c = run(id, 0).unwrap();
            assert!(c.all_pass(), "{}", c.to_text());
        }
    }

    #[test]
    fn comparison_csv_rows() {
        let c = run(ExperimentId::SupplTable1, 0).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 13);
    }
}
