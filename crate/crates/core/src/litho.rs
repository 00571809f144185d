//! Analytic double-Gaussian proximity dose over rectangle layouts and the
//! resulting linewidth bias under a threshold development model.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, require_positive, Error, Result};

/// Point-spread function f(r) = [e^{−r²/α²}/(πα²) + η·e^{−r²/β²}/(πβ²)] / (1+η).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsfParams {
    /// Forward-scattering range, µm.
    pub alpha_fwd: f64,
    /// Backscattering range, µm.
    pub beta_back: f64,
    /// Backscattered to forward deposited-energy ratio.
    pub eta: f64,
}

impl PsfParams {
    pub fn new(alpha_fwd: f64, beta_back: f64, eta: f64) -> Result<Self> {
        let p = Self { alpha_fwd, beta_back, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("alpha_fwd", self.alpha_fwd)?;
        require_positive("beta_back", self.beta_back)?;
        if self.beta_back <= self.alpha_fwd {
            return domain(format!(
                "beta_back ({}) must exceed alpha_fwd ({})",
                self.beta_back, self.alpha_fwd
            ));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return domain(format!("eta must be >= 0, got {}", self.eta));
        }
        Ok(())
    }

    /// Radial PSF value per µm².
    pub fn density(&self, r: f64) -> f64 {
        let (a2, b2) = (self.alpha_fwd.powi(2), self.beta_back.powi(2));
        let pi = std::f64::consts::PI;
        ((-r * r / a2).exp() / (pi * a2) + self.eta * (-r * r / b2).exp() / (pi * b2)) / (1.0 + self.eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutRect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    /// Assigned dose over base dose.
    pub relative_dose: f64,
}

impl LayoutRect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64, relative_dose: f64) -> Result<Self> {
        let r = Self { x0, y0, x1, y1, relative_dose };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x1 > self.x0 && self.y1 > self.y0) {
            return domain(format!(
                "rectangle needs x1 > x0 and y1 > y0, got ({}, {})–({}, {})",
                self.x0, self.y0, self.x1, self.y1
            ));
        }
        require_positive("relative_dose", self.relative_dose)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }

    fn contains(&self, (x, y): (f64, f64)) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }
}

/// Fraction of a normalized Gaussian of range `r` centred at `p` that falls
/// inside `rect`. Each factor lies in [0, 1].
pub fn gaussian_rect_fraction(rect: &LayoutRect, r: f64, (x, y): (f64, f64)) -> f64 {
    let fx = 0.5 * (libm::erf((rect.x1 - x) / r) - libm::erf((rect.x0 - x) / r));
    let fy = 0.5 * (libm::erf((rect.y1 - y) / r) - libm::erf((rect.y0 - y) / r));
    fx * fy
}

fn forward_term(rects: &[LayoutRect], psf: &PsfParams, p: (f64, f64)) -> f64 {
    rects
        .iter()
        .map(|r| r.relative_dose * gaussian_rect_fraction(r, psf.alpha_fwd, p))
        .sum::<f64>()
        / (1.0 + psf.eta)
}

fn backscatter_term(rects: &[LayoutRect], psf: &PsfParams, p: (f64, f64)) -> f64 {
    psf.eta
        * rects
            .iter()
            .map(|r| r.relative_dose * gaussian_rect_fraction(r, psf.beta_back, p))
            .sum::<f64>()
        / (1.0 + psf.eta)
}

/// Relative deposited dose at `point` (µm).
pub fn dose_at_point(rects: &[LayoutRect], psf: &PsfParams, point: (f64, f64)) -> f64 {
    forward_term(rects, psf, point) + backscatter_term(rects, psf, point)
}

/// A junction feature plus the surrounding wiring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    /// The narrow electrode whose width is biased.
    pub feature: LayoutRect,
    /// All other exposed shapes.
    pub others: Vec<LayoutRect>,
}

impl Layout {
    pub fn validate(&self) -> Result<()> {
        self.feature.validate()?;
        self.others.iter().try_for_each(LayoutRect::validate)
    }

    pub fn rects(&self) -> Vec<LayoutRect> {
        std::iter::once(self.feature).chain(self.others.iter().copied()).collect()
    }

    pub fn isolated(&self) -> Self {
        Self {
            feature: self.feature,
            others: vec![],
        }
    }

    /// Same layout with the feature resized to `width` µm about its centre.
    pub fn with_feature_width(&self, width: f64) -> Result<Self> {
        require_positive("feature width", width)?;
        let (cx, _) = self.feature.center();
        let mut feature = self.feature;
        feature.x0 = cx - width / 2.0;
        feature.x1 = cx + width / 2.0;
        Ok(Self {
            feature,
            others: self.others.clone(),
        })
    }

    pub fn dose(&self, psf: &PsfParams, point: (f64, f64)) -> f64 {
        dose_at_point(&self.rects(), psf, point)
    }

    /// Reference layout: a 150 nm × 2 µm finger with a 5×5 µm wiring pad
    /// at each end.
    pub fn reference() -> Self {
        Self {
            feature: LayoutRect { x0: -0.075, y0: -1.0, x1: 0.075, y1: 1.0, relative_dose: 1.0 },
            others: vec![
                LayoutRect { x0: -2.5, y0: 1.0, x1: 2.5, y1: 6.0, relative_dose: 1.0 },
                LayoutRect { x0: -2.5, y0: -6.0, x1: 2.5, y1: -1.0, relative_dose: 1.0 },
            ],
        }
    }

    pub fn read_json<R: Read>(reader: R) -> Result<Self> {
        let layout: Self = serde_json::from_reader(reader)?;
        layout.validate()?;
        Ok(layout)
    }

    /// CSV with columns `role,x0,y0,x1,y1,relative_dose`; exactly one row
    /// has role `feature`, the rest `other`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            role: String,
            x0: f64,
            y0: f64,
            x1: f64,
            y1: f64,
            relative_dose: f64,
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let mut feature = None;
        let mut others = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            let rect = LayoutRect::new(row.x0, row.y0, row.x1, row.y1, row.relative_dose)
                .map_err(|e| Error::Parse { line, msg: e.to_string() })?;
            match row.role.as_str() {
                "feature" if feature.is_none() => feature = Some(rect),
                "feature" => return Err(Error::Parse { line, msg: "second feature row".into() }),
                "other" => others.push(rect),
                r => return Err(Error::Parse { line, msg: format!("unknown role '{r}'") }),
            }
        }
        let feature = feature.ok_or_else(|| Error::Config("layout has no feature row".into()))?;
        Ok(Self { feature, others })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["role", "x0", "y0", "x1", "y1", "relative_dose"])?;
        for (role, r) in std::iter::once(("feature", &self.feature)).chain(self.others.iter().map(|r| ("other", r))) {
            w.write_record([
                role.to_string(),
                r.x0.to_string(),
                r.y0.to_string(),
                r.x1.to_string(),
                r.y1.to_string(),
                r.relative_dose.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResistPreset {
    pub name: String,
    pub psf: PsfParams,
    /// µC/cm².
    pub base_dose: f64,
    /// Resist develops where relative dose ≥ this value.
    pub threshold_fraction: f64,
}

/// Forward range shared by both presets, µm.
pub const PRESET_ALPHA_FWD: f64 = 0.05;
/// Backscatter range for 50 keV on silicon, µm (rounded Monte Carlo fit).
pub const PRESET_BETA_BACK: f64 = 7.3;

pub const PMMA_TARGET_INCREASE: f64 = 30.0;
pub const CSAR_TARGET_INCREASE: f64 = 10.0;

impl ResistPreset {
    /// η and threshold come from [`calibrate_preset`] on [`Layout::reference`].
    pub fn mma_pmma_a4() -> Self {
        Self {
            name: "mma-pmma-a4".into(),
            psf: PsfParams { alpha_fwd: PRESET_ALPHA_FWD, beta_back: PRESET_BETA_BACK, eta: 1.08149 },
            base_dose: 180.0,
            threshold_fraction: 0.241132,
        }
    }

    pub fn mma_csar62() -> Self {
        Self {
            name: "mma-csar62".into(),
            psf: PsfParams { alpha_fwd: PRESET_ALPHA_FWD, beta_back: PRESET_BETA_BACK, eta: 0.359924 },
            base_dose: 180.0,
            threshold_fraction: 0.368131,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "mma-pmma-a4" => Ok(Self::mma_pmma_a4()),
            "mma-csar62" => Ok(Self::mma_csar62()),
            other => Err(Error::Config(format!(
                "unknown resist preset '{other}' (expected mma-pmma-a4 or mma-csar62)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.psf.validate()?;
        require_positive("base_dose", self.base_dose)?;
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction < 1.0) {
            return domain(format!("threshold_fraction must be in (0, 1), got {}", self.threshold_fraction));
        }
        Ok(())
    }
}

/// Axis-aligned sampling region, µm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl From<LayoutRect> for Region {
    fn from(r: LayoutRect) -> Self {
        Self { x0: r.x0, y0: r.y0, x1: r.x1, y1: r.y1 }
    }
}

const REGION_SAMPLES: (usize, usize) = (16, 64);

fn region_points(region: Region) -> Vec<(f64, f64)> {
    let (nx, ny) = REGION_SAMPLES;
    let (dx, dy) = ((region.x1 - region.x0) / nx as f64, (region.y1 - region.y0) / ny as f64);
    (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (region.x0 + (i as f64 + 0.5) * dx, region.y0 + (j as f64 + 0.5) * dy)))
        .collect()
}

/// Mean backscattered dose from the other shapes over `region`, as a percent
/// of the feature's own mean dose there.
pub fn backscatter_increase(layout: &Layout, psf: &PsfParams, region: Region) -> Result<f64> {
    if !(region.x1 > region.x0 && region.y1 > region.y0) {
        return Err(Error::InsufficientData("feature region is empty".into()));
    }
    let pts = region_points(region);
    if layout
        .others
        .iter()
        .any(|r| pts.iter().any(|&p| r.contains(p)))
    {
        return domain("feature region overlaps another shape");
    }
    let own = [layout.feature];
    let (mut extra, mut base) = (0.0, 0.0);
    for &p in &pts {
        extra += backscatter_term(&layout.others, psf, p);
        base += dose_at_point(&own, psf, p);
    }
    if base <= 0.0 {
        return domain("feature receives no dose in the region");
    }
    Ok(extra / base * 100.0)
}

fn edge_search(f: impl Fn(f64) -> f64, inside: f64, outside: f64) -> f64 {
    let (mut lo, mut hi) = (inside, outside);
    // 1e-6 µm = 0.001 nm, well under the 0.1 nm requirement.
    while (hi - lo).abs() > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const EDGE_SEARCH_REACH: f64 = 5.0;

/// Developed width (µm) of the feature along the cut through its centre
/// perpendicular to its length.
pub fn developed_width(layout: &Layout, psf: &PsfParams, threshold: f64) -> Result<f64> {
    let rects = layout.rects();
    let (cx, cy) = layout.feature.center();
    let excess = |x: f64| dose_at_point(&rects, psf, (x, cy)) - threshold;
    if excess(cx) < 0.0 {
        return Err(Error::NotDeveloped(format!(
            "peak dose {:.4} below threshold {threshold}",
            excess(cx) + threshold
        )));
    }
    let half = layout.feature.width() / 2.0 + EDGE_SEARCH_REACH;
    if excess(cx + half) >= 0.0 || excess(cx - half) >= 0.0 {
        return domain("developed region merges with neighbouring shapes along the cut");
    }
    let right = edge_search(excess, cx, cx + half);
    let left = edge_search(excess, cx, cx - half);
    Ok(right - left)
}

/// Developed minus nominal width of the feature, nm.
pub fn linewidth_bias(nominal_width_nm: f64, layout: &Layout, preset: &ResistPreset) -> Result<f64> {
    let layout = layout.with_feature_width(nominal_width_nm * 1e-3)?;
    let width = developed_width(&layout, &preset.psf, preset.threshold_fraction)?;
    Ok(width * 1e3 - nominal_width_nm)
}

/// Threshold that sizes the isolated feature exactly: its dose at the
/// nominal edge on the centre cut.
pub fn dose_to_size_threshold(layout: &Layout, psf: &PsfParams) -> f64 {
    let (_, cy) = layout.feature.center();
    dose_at_point(&[layout.feature], psf, (layout.feature.x1, cy))
}

/// η for which `backscatter_increase` on `layout` hits `target_percent`.
pub fn calibrate_eta(layout: &Layout, alpha_fwd: f64, beta_back: f64, target_percent: f64) -> Result<f64> {
    require_positive("target_percent", target_percent)?;
    let region = Region::from(layout.feature);
    let at = |eta: f64| -> Result<f64> { backscatter_increase(layout, &PsfParams::new(alpha_fwd, beta_back, eta)?, region) };
    let (mut lo, mut hi) = (0.0, 1.0);
    while at(hi)? < target_percent {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::Fit(format!("no η reaches {target_percent}% on this layout")));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if at(mid)? < target_percent {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Preset whose η gives `target_percent` backscatter increase on `layout`
/// and whose threshold sizes the isolated feature exactly.
pub fn calibrate_preset(name: &str, layout: &Layout, alpha_fwd: f64, beta_back: f64, target_percent: f64) -> Result<ResistPreset> {
    let eta = calibrate_eta(layout, alpha_fwd, beta_back, target_percent)?;
    let psf = PsfParams::new(alpha_fwd, beta_back, eta)?;
    Ok(ResistPreset {
        name: name.into(),
        psf,
        base_dose: 180.0,
        threshold_fraction: dose_to_size_threshold(layout, &psf),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseMap {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major, `y` as row index.
    pub dose: Vec<f64>,
}

/// Dose on an `nx × ny` grid spanning `region` (inclusive corners).
pub fn dose_map(rects: &[LayoutRect], psf: &PsfParams, region: Region, nx: usize, ny: usize) -> Result<DoseMap> {
    if nx < 2 || ny < 2 {
        return domain("dose map needs at least 2×2 points");
    }
    let axis = |a: f64, b: f64, n: usize| -> Vec<f64> { (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect() };
    let xs = axis(region.x0, region.x1, nx);
    let ys = axis(region.y0, region.y1, ny);
    let dose = ys
        .par_iter()
        .flat_map_iter(|&y| xs.iter().map(move |&x| dose_at_point(rects, psf, (x, y))))
        .collect();
    Ok(DoseMap { xs, ys, dose })
}

impl DoseMap {
    /// Grid CSV: header row of x values, then one row per y.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(std::iter::once("y_um\\x_um".to_string()).chain(self.xs.iter().map(f64::to_string)))?;
        for (j, y) in self.ys.iter().enumerate() {
            let row = &self.dose[j * self.xs.len()..(j + 1) * self.xs.len()];
            w.write_record(std::iter::once(y.to_string()).chain(row.iter().map(f64::to_string)))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pmma() -> ResistPreset {
        ResistPreset::mma_pmma_a4()
    }

    #[test]
    fn presets_match_calibration() {
        let layout = Layout::reference();
        for (preset, target) in [
            (ResistPreset::mma_pmma_a4(), PMMA_TARGET_INCREASE),
            (ResistPreset::mma_csar62(), CSAR_TARGET_INCREASE),
        ] {
            let cal = calibrate_preset(&preset.name, &layout, PRESET_ALPHA_FWD, PRESET_BETA_BACK, target).unwrap();
            assert!((cal.psf.eta / preset.psf.eta - 1.0).abs() < 1e-5, "{} η {}", preset.name, cal.psf.eta);
            assert!((cal.threshold_fraction - preset.threshold_fraction).abs() < 1e-6);
            preset.validate().unwrap();
        }
        assert!(ResistPreset::by_name("MMA-PMMA-A4").is_ok());
        assert!(ResistPreset::by_name("pmma").is_err());
    }

    #[test]
    fn psf_invariants_rejected() {
        assert!(PsfParams::new(0.05, 0.04, 1.0).is_err());
        assert!(PsfParams::new(0.0, 10.0, 1.0).is_err());
        assert!(PsfParams::new(0.05, 10.0, -0.1).is_err());
        assert!(LayoutRect::new(1.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(LayoutRect::new(0.0, 0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn huge_rectangle_gives_unit_dose() {
        let big = [LayoutRect::new(-1e4, -1e4, 1e4, 1e4, 1.0).unwrap()];
        assert_close!(dose_at_point(&big, &pmma().psf, (3.0, -2.0)), 1.0, 1e-12);
        let far = dose_at_point(&[LayoutRect::new(0.0, 0.0, 1.0, 1.0, 1.0).unwrap()], &pmma().psf, (500.0, 0.0));
        assert!(far < 1e-15);
    }

    #[test]
    fn isolated_feature_has_zero_bias_at_dose_to_size() {
        let layout = Layout::reference().isolated();
        let mut preset = pmma();
        preset.threshold_fraction = dose_to_size_threshold(&layout, &preset.psf);
        let bias = linewidth_bias(150.0, &layout, &preset).unwrap();
        assert!(bias.abs() < 0.01, "bias {bias}");
    }

    #[test]
    fn pads_removed_means_no_increase() {
        let layout = Layout::reference().isolated();
        let inc = backscatter_increase(&layout, &pmma().psf, layout.feature.into()).unwrap();
        assert_eq!(inc, 0.0);
    }

    #[test]
    fn undeveloped_feature_errors() {
        let mut preset = pmma();
        preset.threshold_fraction = 0.99;
        assert!(matches!(
            linewidth_bias(20.0, &Layout::reference(), &preset),
            Err(Error::NotDeveloped(_))
        ));
    }

    #[test]
    fn layout_csv_round_trip() {
        let layout = Layout::reference();
        let mut buf = Vec::new();
        layout.write_csv(&mut buf).unwrap();
        assert_eq!(Layout::read_csv(buf.as_slice()).unwrap(), layout);
        let bad = "role,x0,y0,x1,y1,relative_dose\nfeature,1,0,0,1,1\n";
        assert!(matches!(Layout::read_csv(bad.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn dose_map_shape() {
        let m = dose_map(&Layout::reference().rects(), &pmma().psf, Region { x0: -1.0, y0: -1.0, x1: 1.0, y1: 1.0 }, 5, 3)
            .unwrap();
        assert_eq!(m.dose.len(), 15);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
