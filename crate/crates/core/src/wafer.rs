//! Stochastic wafer model: writer noise, chip-level CD offsets, LER, source
//! geometry and an optional oxidation field, composed over a chip layout.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::dataset::{DatasetMetadata, JunctionDataset, JunctionRecord};
use crate::electrical::ElectricalParams;
use crate::error::{require_positive, Error, Result};
use crate::geometry::{foreshortened, overlay_at, Regime, StackGeometry, TiltAxisConvention};
use crate::ler::{edge_averaged_sigma, LerModel};
use crate::rng::{substream, Domain};
use crate::writer::{realized_linewidth, realized_mean, LwNoiseModel, WriterConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceModel {
    /// Source to substrate distance, mm.
    pub source_distance: f64,
    /// Offset of the source axis from the substrate centre along the tilt
    /// azimuth, mm.
    pub lateral_offset: f64,
    /// Direction of the tilt on the substrate, degrees from +x.
    pub tilt_azimuth: f64,
}

impl Default for SourceModel {
    fn default() -> Self {
        Self {
            source_distance: 600.0,
            lateral_offset: 0.0,
            tilt_azimuth: 0.0,
        }
    }
}

impl SourceModel {
    pub fn validate(&self) -> Result<()> {
        require_positive("source_distance", self.source_distance)
    }
}

/// Evaporation angle seen at `offset` (mm from the substrate centre) for a
/// point source at finite distance.
pub fn local_evap_angle(source: &SourceModel, nominal_angle: f64, offset: (f64, f64)) -> f64 {
    let (s, c) = source.tilt_azimuth.to_radians().sin_cos();
    let along = offset.0 * c + offset.1 * s + source.lateral_offset;
    nominal_angle + (along / source.source_distance).atan().to_degrees()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipSpec {
    pub id: u32,
    /// Lower-left corner, mm.
    pub origin: (f64, f64),
    /// mm.
    pub size: (f64, f64),
}

/// Junctions of one nominal size, repeated on every chip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteGroup {
    pub label: String,
    /// Tilt-axis window, nm.
    pub w: f64,
    /// Transverse length, nm.
    pub l: f64,
    pub sites_per_chip: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaferLayout {
    /// mm.
    pub substrate_size: (f64, f64),
    pub chips: Vec<ChipSpec>,
    pub groups: Vec<SiteGroup>,
    /// Dolan bridge width, nm.
    pub bridge_width: f64,
    /// Extent of the window that does not carry `w`, nm.
    pub far_window: f64,
    #[serde(default)]
    pub convention: TiltAxisConvention,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    pub chip_index: usize,
    pub group_index: usize,
    pub x_mm: f64,
    pub y_mm: f64,
}

impl WaferLayout {
    /// 22×22 mm² substrate with six 5×10 mm² chips and the five area
    /// groups 0.008–0.120 µm², 90 sites per group per chip.
    pub fn paper() -> Self {
        let mut chips = Vec::new();
        for (row, y) in [0.8, 11.2].into_iter().enumerate() {
            for (col, x) in [1.5, 8.5, 15.5].into_iter().enumerate() {
                chips.push(ChipSpec {
                    id: (row * 3 + col + 1) as u32,
                    origin: (x, y),
                    size: (5.0, 10.0),
                });
            }
        }
        let group = |label: &str, w, l| SiteGroup { label: label.into(), w, l, sites_per_chip: 90 };
        Self {
            substrate_size: (22.0, 22.0),
            chips,
            groups: vec![
                group("0.008", 90.0, 90.0),
                group("0.010", 100.0, 100.0),
                group("0.012", 100.0, 120.0),
                group("0.025", 150.0, 170.0),
                group("0.120", 176.0, 680.0),
            ],
            bridge_width: 150.0,
            far_window: 600.0,
            convention: TiltAxisConvention::TopWindowAlongTilt,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.substrate_size.0 / 2.0, self.substrate_size.1 / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("substrate width", self.substrate_size.0)?;
        require_positive("substrate height", self.substrate_size.1)?;
        require_positive("bridge_width", self.bridge_width)?;
        require_positive("far_window", self.far_window)?;
        for c in &self.chips {
            require_positive("chip width", c.size.0)?;
            require_positive("chip height", c.size.1)?;
            let (x1, y1) = (c.origin.0 + c.size.0, c.origin.1 + c.size.1);
            if c.origin.0 < 0.0 || c.origin.1 < 0.0 || x1 > self.substrate_size.0 || y1 > self.substrate_size.1 {
                return Err(Error::Config(format!("chip {} extends outside the substrate", c.id)));
            }
        }
        for g in &self.groups {
            require_positive("group w", g.w)?;
            require_positive("group l", g.l)?;
        }
        if self.site_count() == 0 {
            return Err(Error::Config("layout has no sites".into()));
        }
        Ok(())
    }

    pub fn site_count(&self) -> usize {
        self.chips.len() * self.groups.iter().map(|g| g.sites_per_chip).sum::<usize>()
    }

    /// Every group is spread over the whole chip on a near-square grid,
    /// offset per group so that positions never coincide.
    pub fn sites(&self) -> Vec<Site> {
        let ng = self.groups.len() as f64;
        let mut out = Vec::with_capacity(self.site_count());
        for (ci, chip) in self.chips.iter().enumerate() {
            let (w, h) = chip.size;
            for (gi, g) in self.groups.iter().enumerate() {
                let n = g.sites_per_chip;
                if n == 0 {
                    continue;
                }
                let cols = ((n as f64 * w / h).sqrt().round() as usize).clamp(1, n);
                let rows = n.div_ceil(cols);
                let shift = (gi as f64 + 1.0) / (ng + 1.0);
                for k in 0..n {
                    let (r, c) = (k / cols, k % cols);
                    out.push(Site {
                        chip_index: ci,
                        group_index: gi,
                        x_mm: chip.origin.0 + (c as f64 + shift) * w / cols as f64,
                        y_mm: chip.origin.1 + (r as f64 + 0.5) * h / rows as f64,
                    });
                }
            }
        }
        out
    }
}

/// Smooth multiplicative RA field: plane across the substrate times chip
/// and site Gaussian factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OxidationField {
    pub enabled: bool,
    /// Relative RA change per mm from the centre, (x, y).
    pub gradient: (f64, f64),
    /// Relative σ of the per-chip factor.
    pub chip_sigma: f64,
    /// Relative σ of the per-site factor.
    pub site_sigma: f64,
}

impl Default for OxidationField {
    fn default() -> Self {
        Self {
            enabled: false,
            gradient: (0.0, 0.0),
            chip_sigma: 0.0,
            site_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaferNoise {
    /// Sample writer linewidth noise (otherwise use the writer mean).
    pub writer: bool,
    /// σ of a per-chip linewidth offset shared by all features, nm.
    pub chip_cd_sigma: f64,
    /// Angle-dependent roughness added to the tilt-axis width.
    pub ler: bool,
    /// Finite source distance makes the angle vary across the substrate.
    pub angle_gradient: bool,
    pub oxidation: OxidationField,
}

impl WaferNoise {
    pub fn none() -> Self {
        Self {
            writer: false,
            chip_cd_sigma: 0.0,
            ler: false,
            angle_gradient: false,
            oxidation: OxidationField::default(),
        }
    }
}

impl Default for WaferNoise {
    fn default() -> Self {
        Self {
            writer: true,
            chip_cd_sigma: 0.0,
            ler: true,
            angle_gradient: true,
            oxidation: OxidationField::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaferConfig {
    pub layout: WaferLayout,
    pub writer: WriterConfig,
    pub lw_model: LwNoiseModel,
    pub stack: StackGeometry,
    pub source: SourceModel,
    pub ler: LerModel,
    pub electrical: ElectricalParams,
    /// First (tilted) and second evaporation angles, degrees.
    pub angles: (f64, f64),
    pub noise: WaferNoise,
}

impl Default for WaferConfig {
    fn default() -> Self {
        Self {
            layout: WaferLayout::paper(),
            writer: WriterConfig::default(),
            lw_model: LwNoiseModel::default(),
            stack: StackGeometry::default(),
            source: SourceModel::default(),
            ler: LerModel::default(),
            electrical: ElectricalParams::default(),
            angles: (45.0, 0.0),
            noise: WaferNoise::default(),
        }
    }
}

impl WaferConfig {
    /// Calibrated to the 22×22 mm² wafer statistics: 100 µm field, 2 nm
    /// step, 45°/0° evaporation, source at 250 mm, oxidation field on.
    pub fn paper() -> Self {
        Self {
            source: SourceModel {
                source_distance: 250.0,
                ..SourceModel::default()
            },
            noise: WaferNoise {
                writer: true,
                chip_cd_sigma: 2.7,
                ler: true,
                angle_gradient: true,
                oxidation: OxidationField {
                    enabled: true,
                    gradient: (0.003, 0.0),
                    chip_sigma: 0.035,
                    site_sigma: 0.0175,
                },
            },
            ..Self::default()
        }
    }

    /// The paper wafer with both evaporations at 0°.
    pub fn paper_zero_angle() -> Self {
        Self {
            angles: (0.0, 0.0),
            ..Self::paper()
        }
    }

    /// Single 230 nm tilt-axis window with four lengths, for comparing full
    /// and partial overlay at `angle`.
    pub fn regime_study(angle: f64) -> Self {
        let mut cfg = Self::paper();
        cfg.angles = (angle, 0.0);
        cfg.layout.groups = [100.0, 170.0, 300.0, 680.0]
            .into_iter()
            .map(|l| SiteGroup {
                label: format!("230x{l}"),
                w: 230.0,
                l,
                sites_per_chip: 420,
            })
            .collect();
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        self.writer.validate()?;
        self.lw_model.validate()?;
        self.stack.validate()?;
        self.source.validate()?;
        self.ler.validate()?;
        self.electrical.validate()?;
        for a in [self.angles.0, self.angles.1] {
            if !(a.is_finite() && a.abs() < 80.0) {
                return Err(Error::Config(format!("evaporation angle {a} outside (-80, 80) degrees")));
            }
        }
        let n = &self.noise;
        for (name, v) in [
            ("chip_cd_sigma", n.chip_cd_sigma),
            ("oxidation.chip_sigma", n.oxidation.chip_sigma),
            ("oxidation.site_sigma", n.oxidation.site_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Extra tilt-axis width noise from roughness at `angle`, beyond the 0°
/// roughness already contained in the writer noise, averaged over an edge
/// of `length` nm.
pub fn ler_width_sigma(ler: &LerModel, angle: f64, length: f64) -> f64 {
    let base = ler.sigma_at(0.0);
    let excess = (ler.sigma_at(angle).powi(2) - base * base).max(0.0).sqrt();
    edge_averaged_sigma(excess, ler.correlation_length, length)
}

/// `n` values with the quantiles of N(0, σ) at (i + ½)/n, in seeded random
/// order.
fn stratified_offsets<R: Rng>(n: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
    if n == 0 || sigma == 0.0 {
        return vec![0.0; n];
    }
    let unit = StdNormal::new(0.0, 1.0).expect("standard normal");
    let mut v: Vec<f64> = (0..n)
        .map(|i| sigma * unit.inverse_cdf((i as f64 + 0.5) / n as f64))
        .collect();
    v.shuffle(rng);
    v
}

/// Removes from `v` its components along `basis` (plus the constant) and
/// restores the original spread, so that a handful of chip-level draws
/// cannot line up with chip position or with each other. Leaves `v` as is
/// when too few chips remain to do so.
fn balanced(v: Vec<f64>, basis: &[Vec<f64>]) -> Vec<f64> {
    let n = v.len();
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let target = norm(&v);
    if target == 0.0 || n <= basis.len() + 1 {
        return v;
    }
    let mut ortho: Vec<Vec<f64>> = vec![vec![1.0 / (n as f64).sqrt(); n]];
    for b in basis {
        let mut u = b.clone();
        for q in &ortho {
            let d: f64 = u.iter().zip(q).map(|(a, b)| a * b).sum();
            u.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
        let m = norm(&u);
        if m > 1e-9 * norm(b).max(1.0) {
            ortho.push(u.into_iter().map(|a| a / m).collect());
        }
    }
    let mut r = v.clone();
    for q in &ortho {
        let d: f64 = r.iter().zip(q).map(|(a, b)| a * b).sum();
        r.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
    }
    let m = norm(&r);
    if m <= 1e-9 * target {
        return v;
    }
    r.into_iter().map(|a| a * target / m).collect()
}

fn gaussian<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).map_or(0.0, |d| d.sample(rng))
}

struct ChipState {
    cd_offset: f64,
    ox_factor: f64,
}

fn simulate_site(cfg: &WaferConfig, chips: &[ChipState], site: &Site, seed: u64, index: u64) -> Result<JunctionRecord> {
    let mut rng = substream(seed, Domain::Site, index);
    let layout = &cfg.layout;
    let chip = &chips[site.chip_index];
    let group = &layout.groups[site.group_index];
    let noise = &cfg.noise;
    let (cx, cy) = layout.center();
    let offset = (site.x_mm - cx, site.y_mm - cy);

    // The second film is referenced to zero shift; only the tilted step
    // sees the position-dependent angle.
    let (a1, a2) = if noise.angle_gradient {
        (local_evap_angle(&cfg.source, cfg.angles.0, offset), cfg.angles.1)
    } else {
        cfg.angles
    };

    // Exposed openings grow with the chip CD offset; the unexposed bridge shrinks.
    let mut realize = |nominal: f64, cd_sign: f64| -> Result<f64> {
        let base = if noise.writer {
            realized_linewidth(nominal, &cfg.writer, &cfg.lw_model, &mut rng)?
        } else {
            realized_mean(nominal, &cfg.writer, &cfg.lw_model)?
        };
        Ok((base + cd_sign * chip.cd_offset).max(1.0))
    };
    let mut w = realize(group.w, 1.0)?;
    let l = realize(group.l, 1.0)?;
    let bridge = realize(layout.bridge_width, -1.0)?;
    let far = realize(layout.far_window, 1.0)?;
    if noise.ler {
        w = (w + gaussian(&mut rng, ler_width_sigma(&cfg.ler, a1, l))).max(1.0);
    }

    let mask = layout.convention.mask(w, l, bridge, far);
    let ov = overlay_at(&cfg.stack, &mask, a1, a2);
    let (lw_top, lw_bot) = match layout.convention {
        TiltAxisConvention::TopWindowAlongTilt => (w, foreshortened(far, &cfg.stack, a1)),
        TiltAxisConvention::BottomWindowAlongTilt => (far, foreshortened(w, &cfg.stack, a1)),
    };

    let ox = if noise.oxidation.enabled {
        let (gx, gy) = noise.oxidation.gradient;
        let plane = 1.0 + gx * offset.0 + gy * offset.1;
        plane * chip.ox_factor * (1.0 + gaussian(&mut rng, noise.oxidation.site_sigma))
    } else {
        1.0
    };
    let (area, r) = if ov.regime == Regime::None {
        (0.0, f64::INFINITY)
    } else {
        (ov.area, cfg.electrical.ra_product / ov.area * ox)
    };

    Ok(JunctionRecord {
        chip_id: layout.chips[site.chip_index].id,
        x_mm: site.x_mm,
        y_mm: site.y_mm,
        group: group.label.clone(),
        nom_w_nm: Some(group.w),
        nom_l_nm: Some(group.l),
        lw_top_nm: Some(lw_top),
        lw_bot_nm: Some(lw_bot),
        regime: Some(ov.regime),
        area_um2: area,
        r_ohm: r,
    })
}

/// Simulates every site of the layout. Results depend only on `cfg` and
/// `seed`, not on the thread count.
pub fn simulate_wafer(cfg: &WaferConfig, seed: u64) -> Result<Vec<JunctionRecord>> {
    cfg.validate()?;
    let n_chips = cfg.layout.chips.len();
    let centres: Vec<Vec<f64>> = [0, 1]
        .map(|k| {
            cfg.layout
                .chips
                .iter()
                .map(|c| if k == 0 { c.origin.0 + c.size.0 / 2.0 } else { c.origin.1 + c.size.1 / 2.0 })
                .collect()
        })
        .into();
    let cd = stratified_offsets(n_chips, cfg.noise.chip_cd_sigma, &mut substream(seed, Domain::Chip, 0));
    let cd = balanced(cd, &centres);
    let ox_sigma = if cfg.noise.oxidation.enabled { cfg.noise.oxidation.chip_sigma } else { 0.0 };
    let ox = stratified_offsets(n_chips, ox_sigma, &mut substream(seed, Domain::Chip, 1));
    let ox = balanced(ox, &[centres[0].clone(), centres[1].clone(), cd.clone()]);
    let chips: Vec<ChipState> = cd
        .into_iter()
        .zip(ox)
        .map(|(cd_offset, o)| ChipState { cd_offset, ox_factor: 1.0 + o })
        .collect();
    let sites = cfg.layout.sites();
    sites
        .par_iter()
        .enumerate()
        .map(|(i, s)| simulate_site(cfg, &chips, s, seed, i as u64))
        .collect()
}

pub fn simulate_dataset(cfg: &WaferConfig, seed: u64, config_hash: &str) -> Result<JunctionDataset> {
    Ok(JunctionDataset::new(
        simulate_wafer(cfg, seed)?,
        DatasetMetadata::simulated(seed, config_hash),
    ))
}
