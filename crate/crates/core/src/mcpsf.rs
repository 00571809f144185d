//! Monte Carlo electron trajectories in a resist-on-substrate stack and a
//! double-Gaussian fit of the radial energy profile.
//!
//! Elastic scattering is screened Rutherford with the Joy single-scattering
//! cross-section; energy loss is continuous (Bethe with the Joy–Luo low
//! energy correction). Positions are in nm with z pointing into the stack.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{AVOGADRO, ELECTRON_REST_KEV};
use crate::error::{domain, require_positive, Error, Result};
use crate::litho::PsfParams;
use crate::rng::{substream, Domain};

pub const CUTOFF_KEV: f64 = 0.5;
pub const MIN_FIT_ELECTRONS: u64 = 10_000;
pub const RADIAL_BINS: usize = 200;
pub const R_MIN_UM: f64 = 1e-3;
pub const R_MAX_UM: f64 = 50.0;
const MAX_SCORING_SEGMENT_NM: f64 = 10.0;
const BLOCK: u64 = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialLayer {
    pub name: String,
    pub atomic_number: f64,
    /// g/mol.
    pub atomic_weight: f64,
    /// g/cm³.
    pub density: f64,
    /// nm; `None` for the semi-infinite substrate.
    pub thickness: Option<f64>,
    /// Energy deposited here is scored radially.
    pub resist: bool,
}

impl MaterialLayer {
    pub fn pmma_like(name: &str, thickness: f64) -> Self {
        Self {
            name: name.into(),
            atomic_number: 3.6,
            atomic_weight: 6.67,
            density: 1.19,
            thickness: Some(thickness),
            resist: true,
        }
    }

    pub fn silicon() -> Self {
        Self {
            name: "Si".into(),
            atomic_number: 14.0,
            atomic_weight: 28.09,
            density: 2.33,
            thickness: None,
            resist: false,
        }
    }

    pub fn germanium() -> Self {
        Self {
            name: "Ge".into(),
            atomic_number: 32.0,
            atomic_weight: 72.63,
            density: 5.32,
            thickness: None,
            resist: false,
        }
    }

    fn validate(&self) -> Result<()> {
        require_positive("atomic_number", self.atomic_number)?;
        require_positive("atomic_weight", self.atomic_weight)?;
        require_positive("density", self.density)?;
        if let Some(t) = self.thickness {
            require_positive("thickness", t)?;
        }
        Ok(())
    }

    /// Joy–Luo mean ionisation potential, keV.
    fn ionisation_kev(&self) -> f64 {
        (9.76 * self.atomic_number + 58.5 * self.atomic_number.powf(-0.19)) * 1e-3
    }

    /// Elastic mean free path, nm.
    fn mean_free_path(&self, e: f64) -> f64 {
        let z = self.atomic_number;
        let a = screening(z, e);
        let rel = (e + ELECTRON_REST_KEV) / (e + 2.0 * ELECTRON_REST_KEV);
        let sigma_cm2 = 5.21e-21 * (z * z / (e * e)) * (4.0 * std::f64::consts::PI / (a * (1.0 + a))) * rel * rel;
        self.atomic_weight / (AVOGADRO * self.density * sigma_cm2) * 1e7
    }

    /// Stopping power, keV/nm (positive).
    fn stopping_power(&self, e: f64) -> f64 {
        let j = self.ionisation_kev();
        let per_cm = 78_500.0 * self.density * self.atomic_number / (self.atomic_weight * e)
            * (1.166 * (e + 0.85 * j) / j).ln();
        per_cm * 1e-7
    }

    /// Kanaya–Okayama range, nm.
    fn ko_range(&self, e: f64) -> f64 {
        0.0276 * self.atomic_weight * e.powf(1.67) / (self.atomic_number.powf(0.889) * self.density) * 1e3
    }
}

fn screening(z: f64, e: f64) -> f64 {
    3.4e-3 * z.powf(0.67) / e
}

/// 100 nm top resist on 500 nm copolymer on silicon.
pub fn default_stack() -> Vec<MaterialLayer> {
    vec![
        MaterialLayer::pmma_like("top resist", 100.0),
        MaterialLayer::pmma_like("copolymer", 500.0),
        MaterialLayer::silicon(),
    ]
}

pub fn validate_stack(stack: &[MaterialLayer]) -> Result<()> {
    let Some((last, upper)) = stack.split_last() else {
        return domain("material stack is empty");
    };
    stack.iter().try_for_each(MaterialLayer::validate)?;
    if last.thickness.is_some() {
        return domain("bottom layer must be the semi-infinite substrate");
    }
    if upper.iter().any(|l| l.thickness.is_none()) {
        return domain("only the bottom layer may be semi-infinite");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    /// keV.
    pub energy: f64,
    pub electron_count: u64,
    pub rng_seed: u64,
    /// Stop electrons deeper in the substrate than their remaining range.
    #[serde(default = "yes")]
    pub range_kill: bool,
}

fn yes() -> bool {
    true
}

impl BeamConfig {
    pub fn new(energy: f64, electron_count: u64, rng_seed: u64) -> Self {
        Self { energy, electron_count, rng_seed, range_kill: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.energy.is_finite() && self.energy > 1.0) {
            return domain(format!("beam energy must exceed 1 keV, got {}", self.energy));
        }
        if self.electron_count == 0 {
            return domain("electron_count must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialEnergyHistogram {
    /// `RADIAL_BINS + 1` log-spaced edges, µm. The innermost bin also
    /// collects r below the first edge.
    pub bin_edges: Vec<f64>,
    /// Energy per bin, keV per electron.
    pub energy: Vec<f64>,
    /// Scoring events per bin.
    pub hits: Vec<u64>,
    pub electrons: u64,
    pub beam_energy: f64,
    /// Energy per layer, keV per electron (all radii).
    pub layer_energy: Vec<f64>,
    /// Energy carried out of the top surface, keV per electron.
    pub escaped_energy: f64,
    /// Resist energy beyond the outermost edge, keV per electron.
    pub overflow_energy: f64,
}

impl RadialEnergyHistogram {
    fn inner_radius(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.bin_edges[i]
        }
    }

    /// Energy density per bin, keV/µm² per electron.
    pub fn density(&self) -> Vec<f64> {
        (0..self.energy.len())
            .map(|i| {
                let (r0, r1) = (self.inner_radius(i), self.bin_edges[i + 1]);
                self.energy[i] / (std::f64::consts::PI * (r1 * r1 - r0 * r0))
            })
            .collect()
    }

    pub fn resist_energy(&self) -> f64 {
        self.energy.iter().sum::<f64>() + self.overflow_energy
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["r_lo_um", "r_hi_um", "energy_kev", "density_kev_um2", "hits"])?;
        for (i, d) in self.density().iter().enumerate() {
            w.write_record([
                self.bin_edges[i].to_string(),
                self.bin_edges[i + 1].to_string(),
                self.energy[i].to_string(),
                d.to_string(),
                self.hits[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn log_bin_edges() -> Vec<f64> {
    let ratio = (R_MAX_UM / R_MIN_UM).ln();
    (0..=RADIAL_BINS)
        .map(|i| R_MIN_UM * (ratio * i as f64 / RADIAL_BINS as f64).exp())
        .collect()
}

fn bin_index(r_um: f64) -> Option<usize> {
    if r_um < R_MIN_UM {
        return Some(0);
    }
    if r_um >= R_MAX_UM {
        return None;
    }
    let i = ((r_um / R_MIN_UM).ln() / (R_MAX_UM / R_MIN_UM).ln() * RADIAL_BINS as f64) as usize;
    Some(i.min(RADIAL_BINS - 1))
}

#[derive(Clone)]
struct Tally {
    bins: Vec<f64>,
    hits: Vec<u64>,
    layer: Vec<f64>,
    escaped: f64,
    overflow: f64,
}

impl Tally {
    fn new(layers: usize) -> Self {
        Self {
            bins: vec![0.0; RADIAL_BINS],
            hits: vec![0; RADIAL_BINS],
            layer: vec![0.0; layers],
            escaped: 0.0,
            overflow: 0.0,
        }
    }

    fn merge(&mut self, other: &Tally) {
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            *a += b;
        }
        for (a, b) in self.layer.iter_mut().zip(&other.layer) {
            *a += b;
        }
        self.escaped += other.escaped;
        self.overflow += other.overflow;
    }

    fn score_point(&mut self, resist: bool, layer: usize, x: f64, y: f64, de: f64) {
        self.layer[layer] += de;
        if resist {
            match bin_index(x.hypot(y) * 1e-3) {
                Some(i) => {
                    self.bins[i] += de;
                    self.hits[i] += 1;
                }
                None => self.overflow += de,
            }
        }
    }
}

struct Geometry<'a> {
    layers: &'a [MaterialLayer],
    /// Top z of each layer, nm.
    tops: Vec<f64>,
    substrate_top: f64,
}

impl<'a> Geometry<'a> {
    fn new(layers: &'a [MaterialLayer]) -> Self {
        let mut tops = Vec::with_capacity(layers.len());
        let mut z = 0.0;
        for l in layers {
            tops.push(z);
            z += l.thickness.unwrap_or(0.0);
        }
        let substrate_top = tops[layers.len() - 1];
        Self { layers, tops, substrate_top }
    }

    fn layer_at(&self, z: f64) -> usize {
        self.tops.partition_point(|&t| t <= z).saturating_sub(1)
    }

    fn bottom(&self, i: usize) -> f64 {
        self.layers[i].thickness.map_or(f64::INFINITY, |t| self.tops[i] + t)
    }
}

fn rotate(dir: [f64; 3], cos_t: f64, phi: f64) -> [f64; 3] {
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    let (sin_p, cos_p) = phi.sin_cos();
    let [u, v, w] = dir;
    if w.abs() > 0.999_999 {
        return [sin_t * cos_p, sin_t * sin_p, w.signum() * cos_t];
    }
    let s = (1.0 - w * w).sqrt();
    let out = [
        u * cos_t + sin_t * (u * w * cos_p - v * sin_p) / s,
        v * cos_t + sin_t * (v * w * cos_p + u * sin_p) / s,
        w * cos_t - sin_t * cos_p * s,
    ];
    let n = (out[0] * out[0] + out[1] * out[1] + out[2] * out[2]).sqrt();
    [out[0] / n, out[1] / n, out[2] / n]
}

fn track<R: Rng>(geo: &Geometry, beam: &BeamConfig, rng: &mut R, tally: &mut Tally) {
    let mut pos = [0.0f64, 0.0, 0.0];
    let mut dir = [0.0f64, 0.0, 1.0];
    let mut e = beam.energy;
    let nsub = geo.layers.len() - 1;
    let substrate = &geo.layers[nsub];
    loop {
        let li = geo.layer_at(pos[2]);
        let layer = &geo.layers[li];
        if beam.range_kill && li == nsub && pos[2] - geo.substrate_top > substrate.ko_range(e) {
            tally.layer[nsub] += e;
            return;
        }
        let r: f64 = rng.random();
        let free = -layer.mean_free_path(e) * (1.0 - r).ln();
        let to_boundary = if dir[2] > 0.0 {
            (geo.bottom(li) - pos[2]) / dir[2]
        } else if dir[2] < 0.0 {
            (geo.tops[li] - pos[2]) / dir[2]
        } else {
            f64::INFINITY
        };
        let crosses = to_boundary < free;
        let len = if crosses { to_boundary } else { free };
        let de = (layer.stopping_power(e) * len).min(e);

        let pieces = if layer.resist { (len / MAX_SCORING_SEGMENT_NM).ceil().max(1.0) as usize } else { 1 };
        for k in 0..pieces {
            let t = len * (k as f64 + 0.5) / pieces as f64;
            tally.score_point(layer.resist, li, pos[0] + dir[0] * t, pos[1] + dir[1] * t, de / pieces as f64);
        }
        e -= de;
        // Nudge across the interface so the next lookup sees the new layer.
        let advance = if crosses { len + 1e-9 } else { len };
        for k in 0..3 {
            pos[k] += dir[k] * advance;
        }
        if pos[2] < 0.0 {
            tally.escaped += e;
            return;
        }
        if e < CUTOFF_KEV {
            let li = geo.layer_at(pos[2]);
            tally.score_point(geo.layers[li].resist, li, pos[0], pos[1], e);
            return;
        }
        if !crosses {
            let a = screening(layer.atomic_number, e);
            let r: f64 = rng.random();
            let cos_t = 1.0 - 2.0 * a * r / (1.0 + a - r);
            let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            dir = rotate(dir, cos_t.clamp(-1.0, 1.0), phi);
        }
    }
}

/// Pencil beam at the origin, normal incidence.
pub fn simulate_psf(stack: &[MaterialLayer], beam: &BeamConfig) -> Result<RadialEnergyHistogram> {
    validate_stack(stack)?;
    beam.validate()?;
    let geo = Geometry::new(stack);
    let blocks = beam.electron_count.div_ceil(BLOCK);
    let partials: Vec<Tally> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut t = Tally::new(stack.len());
            for i in b * BLOCK..((b + 1) * BLOCK).min(beam.electron_count) {
                let mut rng = substream(beam.rng_seed, Domain::Electron, i);
                track(&geo, beam, &mut rng, &mut t);
            }
            t
        })
        .collect();
    let mut total = Tally::new(stack.len());
    for p in &partials {
        total.merge(p);
    }
    let n = beam.electron_count as f64;
    Ok(RadialEnergyHistogram {
        bin_edges: log_bin_edges(),
        energy: total.bins.iter().map(|v| v / n).collect(),
        hits: total.hits,
        electrons: beam.electron_count,
        beam_energy: beam.energy,
        layer_energy: total.layer.iter().map(|v| v / n).collect(),
        escaped_energy: total.escaped / n,
        overflow_energy: total.overflow / n,
    })
}

/// Energy in the annulus `[r0, r1]` µm under the double Gaussian with
/// total `k`.
pub fn annulus_energy(psf: &PsfParams, k: f64, r0: f64, r1: f64) -> f64 {
    let g = |s: f64| (-(r0 * r0) / (s * s)).exp() - (-(r1 * r1) / (s * s)).exp();
    k / (1.0 + psf.eta) * (g(psf.alpha_fwd) + psf.eta * g(psf.beta_back))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsfFit {
    pub psf: PsfParams,
    /// Fitted total resist energy, keV per electron.
    pub scale: f64,
    /// Weighted sum of squared log residuals.
    pub cost: f64,
    pub bins_used: usize,
}

struct FitData {
    r0: Vec<f64>,
    r1: Vec<f64>,
    log_e: Vec<f64>,
    w: Vec<f64>,
}

fn unpack(p: &[f64; 4]) -> (PsfParams, f64) {
    let alpha = p[0].exp();
    let psf = PsfParams {
        alpha_fwd: alpha,
        beta_back: alpha * (1.0 + p[1].exp()),
        eta: p[2].exp(),
    };
    (psf, p[3].exp())
}

fn residuals(data: &FitData, p: &[f64; 4]) -> Vec<f64> {
    let (psf, k) = unpack(p);
    (0..data.r0.len())
        .map(|i| {
            let m = annulus_energy(&psf, k, data.r0[i], data.r1[i]).max(1e-300);
            data.w[i] * (m.ln() - data.log_e[i])
        })
        .collect()
}

fn cost(res: &[f64]) -> f64 {
    res.iter().map(|r| r * r).sum()
}

fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for c in 0..4 {
        let p = (c..4).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..4 {
            let f = a[r][c] / a[c][c];
            let pivot = a[c];
            for (x, p) in a[r][c..].iter_mut().zip(&pivot[c..]) {
                *x -= f * p;
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let s: f64 = (r + 1..4).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn levenberg_marquardt(data: &FitData, start: [f64; 4]) -> ([f64; 4], f64) {
    let mut p = start;
    let mut res = residuals(data, &p);
    let mut c = cost(&res);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let h = 1e-6;
        let jac: Vec<Vec<f64>> = (0..4)
            .map(|k| {
                let mut q = p;
                q[k] += h;
                residuals(data, &q).iter().zip(&res).map(|(a, b)| (a - b) / h).collect()
            })
            .collect();
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for i in 0..4 {
            for j in 0..4 {
                jtj[i][j] = jac[i].iter().zip(&jac[j]).map(|(a, b)| a * b).sum();
            }
            jtr[i] = -jac[i].iter().zip(&res).map(|(a, b)| a * b).sum::<f64>();
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut damped = jtj;
            for i in 0..4 {
                damped[i][i] += lambda * jtj[i][i].max(1e-12);
            }
            let Some(step) = solve4(damped, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut q = p;
            for i in 0..4 {
                q[i] += step[i].clamp(-2.0, 2.0);
            }
            let r2 = residuals(data, &q);
            let c2 = cost(&r2);
            if c2.is_finite() && c2 < c {
                let rel = (c - c2) / c.max(1e-300);
                p = q;
                res = r2;
                c = c2;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p, c)
}

/// Weighted least squares of ln(bin energy) against the binned double
/// Gaussian, weights √hits, multi-start Levenberg–Marquardt.
pub fn fit_double_gaussian(hist: &RadialEnergyHistogram) -> Result<PsfFit> {
    if hist.electrons < MIN_FIT_ELECTRONS {
        return domain(format!(
            "fitting needs >= {MIN_FIT_ELECTRONS} electrons, histogram has {}",
            hist.electrons
        ));
    }
    let mut data = FitData { r0: vec![], r1: vec![], log_e: vec![], w: vec![] };
    for i in 0..hist.energy.len() {
        if hist.energy[i] > 0.0 && hist.hits[i] > 0 {
            data.r0.push(hist.inner_radius(i));
            data.r1.push(hist.bin_edges[i + 1]);
            data.log_e.push(hist.energy[i].ln());
            data.w.push((hist.hits[i] as f64).sqrt());
        }
    }
    let total: f64 = hist.energy.iter().sum();
    let peak = hist.energy.iter().copied().fold(0.0, f64::max);
    if data.r0.len() < 8 || peak >= 0.999 * total {
        return Err(Error::Fit(format!(
            "degenerate histogram: {} populated bins",
            data.r0.len()
        )));
    }
    let mut best: Option<([f64; 4], f64)> = None;
    for alpha in [0.005, 0.02, 0.08] {
        for beta in [2.0, 8.0, 20.0] {
            for eta in [0.3, 1.0, 3.0] {
                let start = [
                    f64::ln(alpha),
                    f64::ln(beta / alpha - 1.0),
                    f64::ln(eta),
                    total.ln(),
                ];
                let (p, c) = levenberg_marquardt(&data, start);
                if c.is_finite() && best.is_none_or(|b| c < b.1) {
                    best = Some((p, c));
                }
            }
        }
    }
    let (p, c) = best.ok_or_else(|| Error::Fit("no start converged".into()))?;
    let (psf, scale) = unpack(&p);
    psf.validate().map_err(|e| Error::Fit(e.to_string()))?;
    Ok(PsfFit {
        psf,
        scale,
        cost: c,
        bins_used: data.r0.len(),
    })
}

/// Exact binned histogram of a known PSF, for testing the fit.
pub fn synthetic_histogram(psf: &PsfParams, total: f64, electrons: u64) -> RadialEnergyHistogram {
    let edges = log_bin_edges();
    let energy: Vec<f64> = (0..RADIAL_BINS)
        .map(|i| annulus_energy(psf, total, if i == 0 { 0.0 } else { edges[i] }, edges[i + 1]))
        .collect();
    RadialEnergyHistogram {
        hits: vec![1000; RADIAL_BINS],
        energy,
        bin_edges: edges,
        electrons,
        beam_energy: total,
        layer_energy: vec![total],
        escaped_energy: 0.0,
        overflow_energy: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn physics_magnitudes() {
        let si = MaterialLayer::silicon();
        // ~57 nm elastic mean free path and ~1 keV/µm stopping at 50 keV.
        let mfp = si.mean_free_path(50.0);
        assert!((40.0..80.0).contains(&mfp), "mfp {mfp}");
        let s = si.stopping_power(50.0) * 1e3;
        assert!((0.8..1.4).contains(&s), "S {s} keV/µm");
        let r = si.ko_range(50.0) * 1e-3;
        assert!((18.0..26.0).contains(&r), "range {r} µm");
    }

    #[test]
    fn bins_cover_range() {
        let e = log_bin_edges();
        assert_eq!(e.len(), RADIAL_BINS + 1);
        assert_close!(e[0], R_MIN_UM, 1e-15);
        assert_close!(e[RADIAL_BINS], R_MAX_UM, 1e-9);
        assert_eq!(bin_index(1e-5), Some(0));
        assert_eq!(bin_index(60.0), None);
        assert_eq!(bin_index(49.99), Some(RADIAL_BINS - 1));
    }

    #[test]
    fn rotation_preserves_unit_length() {
        let d = rotate([0.6, 0.0, 0.8], 0.3, 1.1);
        let n: f64 = d.iter().map(|x| x * x).sum();
        assert_close!(n, 1.0, 1e-12);
        let cos = 0.6 * d[0] + 0.8 * d[2];
        assert_close!(cos, 0.3, 1e-9);
    }

    #[test]
    fn invalid_inputs() {
        assert!(simulate_psf(&[], &BeamConfig::new(50.0, 10, 0)).is_err());
        assert!(simulate_psf(&default_stack(), &BeamConfig::new(50.0, 0, 0)).is_err());
        assert!(simulate_psf(&default_stack(), &BeamConfig::new(0.5, 10, 0)).is_err());
        let mut bad = default_stack();
        bad.pop();
        assert!(simulate_psf(&bad, &BeamConfig::new(50.0, 10, 0)).is_err());
    }

    #[test]
    fn energy_is_conserved() {
        let h = simulate_psf(&default_stack(), &BeamConfig::new(20.0, 400, 3)).unwrap();
        let accounted: f64 = h.layer_energy.iter().sum::<f64>() + h.escaped_energy;
        assert!(accounted <= h.beam_energy * (1.0 + 1e-6));
        assert!((accounted / h.beam_energy - 1.0).abs() < 1e-6);
        assert_close!(h.resist_energy(), h.layer_energy[0] + h.layer_energy[1], 1e-9);
    }

    #[test]
    fn synthetic_round_trip() {
        let truth = PsfParams { alpha_fwd: 0.05, beta_back: 9.0, eta: 0.7 };
        let fit = fit_double_gaussian(&synthetic_histogram(&truth, 3.0, 100_000)).unwrap();
        for (got, want) in [
            (fit.psf.alpha_fwd, truth.alpha_fwd),
            (fit.psf.beta_back, truth.beta_back),
            (fit.psf.eta, truth.eta),
        ] {
            assert!((got / want - 1.0).abs() < 0.02, "{got} vs {want}");
        }
    }

    #[test]
    fn degenerate_histogram_rejected() {
        let mut h = synthetic_histogram(&PsfParams { alpha_fwd: 0.05, beta_back: 9.0, eta: 0.7 }, 1.0, 100_000);
        h.energy.iter_mut().for_each(|e| *e = 0.0);
        h.energy[10] = 1.0;
        assert!(matches!(fit_double_gaussian(&h), Err(Error::Fit(_))));
        h.electrons = 100;
        assert!(matches!(fit_double_gaussian(&h), Err(Error::Domain(_))));
    }
}
