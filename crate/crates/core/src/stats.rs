//! Variation hierarchy, heat maps with plane-fit gradients, log-log fits and
//! the 3σ outlier policy.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{JunctionDataset, JunctionRecord};
use crate::error::{domain, Error, Result};

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("mean of empty slice".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation (n − 1 denominator).
pub fn std_dev(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!("need >= 2 values, got {}", values.len())));
    }
    // Shifted by the first value so identical inputs give exactly zero.
    let x0 = values[0];
    let m = values.iter().map(|v| v - x0).sum::<f64>() / values.len() as f64;
    let ss: f64 = values.iter().map(|v| (v - x0 - m) * (v - x0 - m)).sum();
    Ok((ss / (values.len() - 1) as f64).sqrt())
}

/// Coefficient of variation, sample σ / mean × 100.
pub fn cv_percent(values: &[f64]) -> Result<f64> {
    let sd = std_dev(values)?;
    let m = mean(values)?;
    if m == 0.0 {
        return domain("coefficient of variation undefined for zero mean");
    }
    Ok(sd / m.abs() * 100.0)
}

/// (max − min) / mean × 100.
pub fn spread_percent(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!("need >= 2 values, got {}", values.len())));
    }
    let m = mean(values)?;
    if m == 0.0 {
        return domain("spread undefined for zero mean");
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    Ok((hi - lo) / m.abs() * 100.0)
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InsufficientData("pearson r needs >= 3 paired values".into()));
    }
    let (mx, my) = (mean(x)?, mean(y)?);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return domain("pearson r undefined for a constant variable");
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigmaFilter {
    /// Indices of retained values, ascending.
    pub kept: Vec<usize>,
    /// Indices of removed values, ascending.
    pub removed: Vec<usize>,
}

pub const SIGMA_FILTER_MIN_N: usize = 8;
const SIGMA_FILTER_MAX_ITER: usize = 3;

/// Iteratively drops values more than 3σ from the mean of the retained set.
/// Samples smaller than [`SIGMA_FILTER_MIN_N`] are returned untouched.
pub fn three_sigma_filter(values: &[f64]) -> SigmaFilter {
    let mut kept: Vec<usize> = (0..values.len()).collect();
    let mut removed = Vec::new();
    if values.len() < SIGMA_FILTER_MIN_N {
        return SigmaFilter { kept, removed };
    }
    for _ in 0..SIGMA_FILTER_MAX_ITER {
        let current: Vec<f64> = kept.iter().map(|&i| values[i]).collect();
        let (Ok(m), Ok(sd)) = (mean(&current), std_dev(&current)) else {
            break;
        };
        if sd == 0.0 {
            break;
        }
        let (stay, drop): (Vec<usize>, Vec<usize>) =
            kept.iter().partition(|&&i| (values[i] - m).abs() <= 3.0 * sd);
        if drop.is_empty() {
            break;
        }
        kept = stay;
        removed.extend(drop);
    }
    removed.sort_unstable();
    SigmaFilter { kept, removed }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlierPolicy {
    #[default]
    ThreeSigma,
    Keep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outlier {
    pub chip_id: u32,
    pub x_mm: f64,
    pub y_mm: f64,
    pub r_ohm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupVariation {
    pub group: String,
    /// Conducting records used after outlier removal.
    pub n: usize,
    /// Records excluded as open (no overlap or non-finite resistance).
    pub n_open: usize,
    pub n_chips: usize,
    pub mean_r_ohm: f64,
    pub wafer_cv: f64,
    pub wafer_spread: f64,
    /// Mean over chips of the within-chip CV; `None` when no chip has 2 records.
    pub chip_cv: Option<f64>,
    /// CV of the chip means; `None` with fewer than 2 chips.
    pub inter_chip_cv: Option<f64>,
    pub outliers: Vec<Outlier>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub groups: Vec<GroupVariation>,
    /// Groups with fewer than 2 usable records.
    pub skipped_groups: Vec<String>,
    /// Fraction of all records that conduct.
    pub yield_fraction: f64,
    pub policy: OutlierPolicy,
}

impl VariationReport {
    pub fn group(&self, label: &str) -> Option<&GroupVariation> {
        self.groups.iter().find(|g| g.group == label)
    }
}

pub fn variation_report(ds: &JunctionDataset, policy: OutlierPolicy) -> Result<VariationReport> {
    if ds.is_empty() {
        return Err(Error::InsufficientData("dataset has no records".into()));
    }
    let conducting = ds.records.iter().filter(|r| r.is_conducting()).count();
    let mut groups = Vec::new();
    let mut skipped_groups = Vec::new();
    for (label, records) in ds.by_group() {
        let live: Vec<&JunctionRecord> = records.iter().copied().filter(|r| r.is_conducting()).collect();
        let n_open = records.len() - live.len();
        if live.len() < 2 {
            skipped_groups.push(label);
            continue;
        }
        let r: Vec<f64> = live.iter().map(|x| x.r_ohm).collect();
        let filter = match policy {
            OutlierPolicy::ThreeSigma => three_sigma_filter(&r),
            OutlierPolicy::Keep => SigmaFilter { kept: (0..r.len()).collect(), removed: vec![] },
        };
        let outliers = filter
            .removed
            .iter()
            .map(|&i| Outlier {
                chip_id: live[i].chip_id,
                x_mm: live[i].x_mm,
                y_mm: live[i].y_mm,
                r_ohm: live[i].r_ohm,
            })
            .collect();
        let used: Vec<&JunctionRecord> = filter.kept.iter().map(|&i| live[i]).collect();
        let values: Vec<f64> = used.iter().map(|x| x.r_ohm).collect();

        let mut per_chip: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for rec in &used {
            per_chip.entry(rec.chip_id).or_default().push(rec.r_ohm);
        }
        let chip_cvs: Vec<f64> = per_chip.values().filter_map(|v| cv_percent(v).ok()).collect();
        let chip_means: Vec<f64> = per_chip.values().map(|v| mean(v)).collect::<Result<_>>()?;

        groups.push(GroupVariation {
            group: label,
            n: values.len(),
            n_open,
            n_chips: per_chip.len(),
            mean_r_ohm: mean(&values)?,
            wafer_cv: cv_percent(&values)?,
            wafer_spread: spread_percent(&values)?,
            chip_cv: mean(&chip_cvs).ok(),
            inter_chip_cv: cv_percent(&chip_means).ok(),
            outliers,
        });
    }
    Ok(VariationReport {
        groups,
        skipped_groups,
        yield_fraction: conducting as f64 / ds.len() as f64,
        policy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneFit {
    pub intercept: f64,
    /// (∂v/∂x, ∂v/∂y) per mm.
    pub gradient: [f64; 2],
    pub n: usize,
}

impl PlaneFit {
    pub fn gradient_magnitude(&self) -> f64 {
        self.gradient[0].hypot(self.gradient[1])
    }
}

/// Least-squares fit of v = a + b·x + c·y.
pub fn plane_fit(points: &[(f64, f64, f64)]) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData("plane fit needs >= 3 points".into()));
    }
    let n = points.len() as f64;
    let (mx, my, mv) = points
        .iter()
        .fold((0.0, 0.0, 0.0), |(a, b, c), p| (a + p.0 / n, b + p.1 / n, c + p.2 / n));
    let (mut sxx, mut sxy, mut syy, mut sxv, mut syv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, v) in points {
        let (dx, dy, dv) = (x - mx, y - my, v - mv);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxv += dx * dv;
        syv += dy * dv;
    }
    let det = sxx * syy - sxy * sxy;
    if det.is_nan() || det <= 1e-12 * sxx * syy || sxx == 0.0 || syy == 0.0 {
        return domain("positions are collinear; gradient undefined");
    }
    let b = (sxv * syy - syv * sxy) / det;
    let c = (syv * sxx - sxv * sxy) / det;
    Ok(PlaneFit {
        intercept: mv - b * mx - c * my,
        gradient: [b, c],
        n: points.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Resistance,
    LwTop,
    LwBot,
    Area,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Resistance, Metric::LwTop, Metric::LwBot, Metric::Area];

    pub fn column(self) -> &'static str {
        match self {
            Metric::Resistance => "r_ohm",
            Metric::LwTop => "lw_top_nm",
            Metric::LwBot => "lw_bot_nm",
            Metric::Area => "area_um2",
        }
    }

    /// Value for a record, `None` when absent or when the junction is open.
    pub fn value(self, r: &JunctionRecord) -> Option<f64> {
        match self {
            Metric::Resistance => r.is_conducting().then_some(r.r_ohm),
            Metric::LwTop => r.lw_top_nm,
            Metric::LwBot => r.lw_bot_nm,
            Metric::Area => r.is_conducting().then_some(r.area_um2),
        }
        .filter(|v| v.is_finite())
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.column() == s || format!("{m:?}").eq_ignore_ascii_case(&s.replace('_', "")))
            .ok_or_else(|| format!("unknown metric '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub nx: usize,
    pub ny: usize,
    pub width_mm: f64,
    pub height_mm: f64,
    /// Cell means, row-major with `y` as the row index; empty cells are `None`.
    pub cells: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    pub plane: PlaneFit,
}

impl Heatmap {
    pub fn cell(&self, ix: usize, iy: usize) -> Option<f64> {
        self.cells[iy * self.nx + ix]
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        let vals = self.cells.iter().flatten();
        let lo = vals.clone().copied().reduce(f64::min)?;
        let hi = vals.copied().reduce(f64::max)?;
        Some((lo, hi))
    }
}

pub const DEFAULT_GRID: (usize, usize) = (10, 10);

/// Bins `(x, y, value)` points into an `nx × ny` grid over the substrate and
/// fits a plane to the raw points.
pub fn heatmap_points(points: &[(f64, f64, f64)], substrate_mm: (f64, f64), grid: (usize, usize)) -> Result<Heatmap> {
    let (nx, ny) = grid;
    if nx == 0 || ny == 0 {
        return domain("heat-map grid must be at least 1×1");
    }
    let (w, h) = substrate_mm;
    if !(w > 0.0 && h > 0.0) {
        return domain("substrate size must be positive");
    }
    let plane = plane_fit(points)?;
    let mut sums = vec![0.0; nx * ny];
    let mut counts = vec![0usize; nx * ny];
    for &(x, y, v) in points {
        if !(0.0..=w).contains(&x) || !(0.0..=h).contains(&y) {
            continue;
        }
        let ix = ((x / w * nx as f64) as usize).min(nx - 1);
        let iy = ((y / h * ny as f64) as usize).min(ny - 1);
        sums[iy * nx + ix] += v;
        counts[iy * nx + ix] += 1;
    }
    let cells = sums
        .iter()
        .zip(&counts)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    Ok(Heatmap {
        nx,
        ny,
        width_mm: w,
        height_mm: h,
        cells,
        counts,
        plane,
    })
}

pub fn heatmap<'a>(
    records: impl IntoIterator<Item = &'a JunctionRecord>,
    metric: Metric,
    substrate_mm: (f64, f64),
    grid: (usize, usize),
) -> Result<Heatmap> {
    let points: Vec<(f64, f64, f64)> = records
        .into_iter()
        .filter_map(|r| metric.value(r).map(|v| (r.x_mm, r.y_mm, v)))
        .collect();
    heatmap_points(&points, substrate_mm, grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaResistanceFit {
    /// Slope of ln Rₙ against ln A.
    pub slope: f64,
    pub intercept: f64,
    /// Pearson r of (ln A, ln Rₙ).
    pub r_log: f64,
    /// Pearson r of (A, Rₙ) on linear axes.
    pub r_raw: f64,
    pub n: usize,
    /// Pairs dropped for nonpositive or non-finite values.
    pub rejected: usize,
}

impl AreaResistanceFit {
    /// Correlation magnitude on the log-log pairs.
    pub fn pearson_r(&self) -> f64 {
        self.r_log.abs()
    }
}

/// Ordinary least squares of ln R on ln A over `(area, resistance)` pairs.
pub fn area_resistance_fit(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<AreaResistanceFit> {
    let mut rejected = 0;
    let mut good = Vec::new();
    for (a, r) in pairs {
        if a.is_finite() && r.is_finite() && a > 0.0 && r > 0.0 {
            good.push((a, r));
        } else {
            rejected += 1;
        }
    }
    if good.len() < 3 {
        return Err(Error::InsufficientData(format!("log-log fit needs >= 3 pairs, got {}", good.len())));
    }
    let la: Vec<f64> = good.iter().map(|p| p.0.ln()).collect();
    let lr: Vec<f64> = good.iter().map(|p| p.1.ln()).collect();
    let (ma, mr) = (mean(&la)?, mean(&lr)?);
    let (mut saa, mut sar) = (0.0, 0.0);
    for (a, r) in la.iter().zip(&lr) {
        saa += (a - ma) * (a - ma);
        sar += (a - ma) * (r - mr);
    }
    if saa == 0.0 {
        return domain("all areas identical; slope undefined");
    }
    let slope = sar / saa;
    let raw_a: Vec<f64> = good.iter().map(|p| p.0).collect();
    let raw_r: Vec<f64> = good.iter().map(|p| p.1).collect();
    Ok(AreaResistanceFit {
        slope,
        intercept: mr - slope * ma,
        r_log: pearson_r(&la, &lr)?,
        r_raw: pearson_r(&raw_a, &raw_r)?,
        n: good.len(),
        rejected,
    })
}

/// Log-log fit over the records of `ds` that carry a finite resistance.
/// Open junctions count as rejected.
pub fn dataset_area_resistance_fit(ds: &JunctionDataset) -> Result<AreaResistanceFit> {
    area_resistance_fit(ds.records.iter().map(|r| {
        if r.is_conducting() {
            (r.area_um2, r.r_ohm)
        } else {
            (f64::NAN, f64::NAN)
        }
    }))
}
