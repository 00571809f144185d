//! E-beam writer linewidth model: write-field noise, step-size
//! quantisation and scan-direction bias.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, require_positive, Error, Result};

pub const STUDIED_FIELD_SIZES: [f64; 4] = [50.0, 100.0, 200.0, 500.0];
pub const STUDIED_STEP_SIZES: [f64; 3] = [2.0, 3.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanDirection {
    /// Beam scans along the electrode.
    Along,
    /// Beam scans across the electrode.
    Across,
}

impl std::str::FromStr for ScanDirection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "along" => Ok(Self::Along),
            "across" => Ok(Self::Across),
            _ => Err(format!("unknown scan direction '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WriterConfig {
    /// Write-field size, µm.
    pub field_size: f64,
    /// Beam step size, nm.
    pub step_size: f64,
    pub scan_direction: ScanDirection,
}

impl Default for WriterConfig {
    fn default() -> Self {
        Self {
            field_size: 100.0,
            step_size: 2.0,
            scan_direction: ScanDirection::Along,
        }
    }
}

impl WriterConfig {
    pub fn validate(&self) -> Result<()> {
        require_positive("field_size", self.field_size)?;
        require_positive("step_size", self.step_size)
    }

    /// Field or step size outside the measured sets.
    pub fn is_extrapolated(&self) -> bool {
        !STUDIED_FIELD_SIZES.contains(&self.field_size) || !STUDIED_STEP_SIZES.contains(&self.step_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    /// Fixed grid pitch, nm.
    Fixed(f64),
    /// The configured beam step size.
    StepSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    Nearest,
    Floor,
}

/// Per-direction calibration: the linewidth is biased by a piecewise-linear
/// function of the nominal width, then snapped to the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionCalibration {
    /// (nominal nm, bias nm), ascending in nominal; flat outside the range.
    pub bias: Vec<(f64, f64)>,
    pub granularity: Granularity,
    pub rounding: Rounding,
}

impl DirectionCalibration {
    pub fn constant(bias: f64, granularity: Granularity, rounding: Rounding) -> Self {
        Self {
            bias: vec![(0.0, bias)],
            granularity,
            rounding,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.bias.is_empty() {
            return Err(Error::Config(format!("{name}: bias table is empty")));
        }
        if let Granularity::Fixed(g) = self.granularity {
            require_positive("granularity", g)?;
        }
        for w in self.bias.windows(2) {
            let ((n0, b0), (n1, b1)) = (w[0], w[1]);
            if n1 <= n0 {
                return Err(Error::Config(format!("{name}: bias table nominals must ascend")));
            }
            if n1 + b1 < n0 + b0 {
                return Err(Error::Config(format!(
                    "{name}: biased width decreases between {n0} and {n1} nm"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LwNoiseModel {
    /// (field size µm, 3σ nm), ascending.
    pub sigma3_by_field_size: Vec<(f64, f64)>,
    /// (field size µm, maximum placement deviation nm), ascending.
    pub placement_max_by_field_size: Vec<(f64, f64)>,
    pub along: DirectionCalibration,
    pub across: DirectionCalibration,
}

impl Default for LwNoiseModel {
    /// Calibrated against the 100/103/105/150/300/500 nm resist-mask
    /// measurements taken at 100 µm field and 2 nm step.
    fn default() -> Self {
        Self {
            sigma3_by_field_size: vec![(50.0, 7.1), (100.0, 7.1), (500.0, 17.4)],
            placement_max_by_field_size: vec![(200.0, 33.0), (500.0, 41.0)],
            along: DirectionCalibration::constant(0.0, Granularity::Fixed(5.0), Rounding::Floor),
            across: DirectionCalibration {
                bias: vec![(105.0, -4.0), (150.0, -6.0), (300.0, 0.0)],
                granularity: Granularity::StepSize,
                rounding: Rounding::Nearest,
            },
        }
    }
}

impl LwNoiseModel {
    /// Zero 3σ at every field size; the mean model is unchanged.
    pub fn noiseless(&self) -> Self {
        Self {
            sigma3_by_field_size: vec![(1.0, 0.0)],
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, table) in [
            ("sigma3_by_field_size", &self.sigma3_by_field_size),
            ("placement_max_by_field_size", &self.placement_max_by_field_size),
        ] {
            if table.is_empty() {
                return Err(Error::Config(format!("{name} is empty")));
            }
            for &(k, v) in table.iter() {
                if !(k > 0.0 && v >= 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("{name}: invalid entry ({k}, {v})")));
                }
            }
            if table.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(Error::Config(format!("{name}: keys must ascend")));
            }
        }
        if self.sigma3_by_field_size.windows(2).any(|w| w[1].1 < w[0].1) {
            return Err(Error::Config("sigma3_by_field_size must be non-decreasing".into()));
        }
        self.along.validate("along")?;
        self.across.validate("across")
    }

    pub fn calibration(&self, direction: ScanDirection) -> &DirectionCalibration {
        match direction {
            ScanDirection::Along => &self.along,
            ScanDirection::Across => &self.across,
        }
    }
}

/// Interpolation linear in ln(key), flat outside the table.
fn log_interp(table: &[(f64, f64)], key: f64) -> f64 {
    let (first, last) = (table[0], table[table.len() - 1]);
    if key <= first.0 {
        return first.1;
    }
    if key >= last.0 {
        return last.1;
    }
    let i = table.partition_point(|&(k, _)| k <= key);
    let ((k0, v0), (k1, v1)) = (table[i - 1], table[i]);
    v0 + (v1 - v0) * (key / k0).ln() / (k1 / k0).ln()
}

fn linear_interp(table: &[(f64, f64)], key: f64) -> f64 {
    let (first, last) = (table[0], table[table.len() - 1]);
    if key <= first.0 {
        return first.1;
    }
    if key >= last.0 {
        return last.1;
    }
    let i = table.partition_point(|&(k, _)| k <= key);
    let ((k0, v0), (k1, v1)) = (table[i - 1], table[i]);
    v0 + (v1 - v0) * (key - k0) / (k1 - k0)
}

/// 3σ linewidth variation for a write-field size, nm.
pub fn lw_3sigma(model: &LwNoiseModel, field_size: f64) -> Result<f64> {
    require_positive("field_size", field_size)?;
    Ok(log_interp(&model.sigma3_by_field_size, field_size))
}

/// Maximum placement deviation for a write-field size, nm.
pub fn placement_max(model: &LwNoiseModel, field_size: f64) -> Result<f64> {
    require_positive("field_size", field_size)?;
    Ok(log_interp(&model.placement_max_by_field_size, field_size))
}

pub fn quantize(width: f64, granularity: f64, rounding: Rounding) -> f64 {
    let cells = width / granularity;
    // Guard against 104.99999 landing one cell short under floor.
    let cells = match rounding {
        Rounding::Nearest => cells.round(),
        Rounding::Floor => (cells + 1e-9).floor(),
    };
    cells * granularity
}

/// Expected realized linewidth, nm.
pub fn realized_mean(nominal: f64, config: &WriterConfig, model: &LwNoiseModel) -> Result<f64> {
    require_positive("nominal", nominal)?;
    let cal = model.calibration(config.scan_direction);
    let granularity = match cal.granularity {
        Granularity::Fixed(g) => g,
        Granularity::StepSize => config.step_size,
    };
    require_positive("granularity", granularity)?;
    let biased = nominal + linear_interp(&cal.bias, nominal);
    Ok(quantize(biased, granularity, cal.rounding))
}

/// One stochastic realization of a nominal linewidth, nm.
pub fn realized_linewidth<R: Rng + ?Sized>(
    nominal: f64,
    config: &WriterConfig,
    model: &LwNoiseModel,
    rng: &mut R,
) -> Result<f64> {
    let mean = realized_mean(nominal, config, model)?;
    let sigma = lw_3sigma(model, config.field_size)? / 3.0;
    if sigma == 0.0 {
        return Ok(mean);
    }
    let normal = Normal::new(mean, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(normal.sample(rng))
}

/// Smallest beam step the pattern generator can address at a given dose,
/// nm, rounded to 0.1 nm. Clock in MHz, dose in µC/cm², current in pA.
pub fn calc_min_step(clock_mhz: f64, dose_uc_cm2: f64, current_pa: f64) -> Result<f64> {
    for (name, v) in [("clock", clock_mhz), ("dose", dose_uc_cm2), ("current", current_pa)] {
        if !(v.is_finite() && v > 0.0) {
            return domain(format!("{name} must be > 0, got {v}"));
        }
    }
    // µC/cm² → C/m² is ×1e-2.
    let area_m2 = current_pa * 1e-12 / (dose_uc_cm2 * 1e-2 * clock_mhz * 1e6);
    Ok((area_m2.sqrt() * 1e9 * 10.0).round() / 10.0)
}
