//! Junction electrical chain: area → Rₙ → I_c → E_J → f₀₁.
//!
//! Energies are expressed as frequencies (E/h, GHz). The transmon estimate
//! f₀₁ ≈ √(8·E_C·E_J) − E_C is evaluated with h, not ħ, as the conversion
//! between energy and frequency.

use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::constants::{ELEMENTARY_CHARGE, PLANCK};
use crate::error::{domain, require_positive, Result};
use crate::rng::{substream, Domain};

/// Below this E_J/E_C ratio the transmon expansion is unreliable.
pub const TRANSMON_MIN_RATIO: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectricalParams {
    /// Superconducting gap Δ, µeV.
    pub gap_delta: f64,
    /// Resistance-area product, Ω·µm².
    pub ra_product: f64,
    /// Shunt capacitance, fF.
    pub capacitance: f64,
}

impl Default for ElectricalParams {
    /// Δ_Al = 180 µeV, RA = 730 Ω·µm² and C = 80 fF, which puts a
    /// 250×260 nm² junction at f₀₁ ≈ 4.4 GHz.
    fn default() -> Self {
        Self {
            gap_delta: 180.0,
            ra_product: 730.0,
            capacitance: 80.0,
        }
    }
}

impl ElectricalParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("gap_delta", self.gap_delta)?;
        require_positive("ra_product", self.ra_product)?;
        require_positive("capacitance", self.capacitance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionElectrical {
    /// Normal resistance, Ω.
    pub rn: f64,
    /// Critical current, nA.
    pub ic: f64,
    /// Josephson energy over h, GHz.
    pub ej_over_h: f64,
}

impl JunctionElectrical {
    pub fn from_area(area: f64, params: &ElectricalParams) -> Result<Self> {
        let rn = rn_from_area(area, params)?;
        let ic = ic_from_rn(rn, params)?;
        Ok(Self {
            rn,
            ic,
            ej_over_h: ej_from_ic(ic)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquidPair {
    pub area_small: f64,
    pub area_large: f64,
    pub asymmetry: f64,
}

impl SquidPair {
    pub fn new(area_small: f64, area_large: f64) -> Result<Self> {
        Ok(Self {
            area_small,
            area_large,
            asymmetry: squid_asymmetry(area_small, area_large)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationMode {
    Analytic,
    MonteCarlo { samples: usize, seed: u64 },
}

pub fn rn_from_area(area: f64, params: &ElectricalParams) -> Result<f64> {
    if !(area.is_finite() && area > 0.0) {
        return domain(format!("junction area must be > 0 µm², got {area}"));
    }
    Ok(params.ra_product / area)
}

/// Zero-temperature Ambegaokar–Baratoff critical current πΔ/(2eRₙ), in nA.
pub fn ic_from_rn(rn: f64, params: &ElectricalParams) -> Result<f64> {
    require_positive("rn", rn)?;
    // Δ/e in volts is numerically Δ in eV.
    let gap_volts = params.gap_delta * 1e-6;
    Ok(std::f64::consts::PI * gap_volts / (2.0 * rn) * 1e9)
}

/// E_J/h = ħI_c/(2e·h) = I_c/(4πe), in GHz for I_c in nA.
pub fn ej_from_ic(ic: f64) -> Result<f64> {
    require_positive("ic", ic)?;
    Ok(ic * 1e-9 / (4.0 * std::f64::consts::PI * ELEMENTARY_CHARGE) * 1e-9)
}

/// E_C/h = e²/(2Ch), in GHz for C in fF.
pub fn ec_from_capacitance(capacitance: f64) -> Result<f64> {
    require_positive("capacitance", capacitance)?;
    Ok(ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * capacitance * 1e-15 * PLANCK) * 1e-9)
}

/// Inverse of [`ec_from_capacitance`]: fF for E_C/h in GHz.
pub fn capacitance_from_ec(ec_over_h: f64) -> Result<f64> {
    require_positive("ec_over_h", ec_over_h)?;
    Ok(ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * ec_over_h * 1e9 * PLANCK) * 1e15)
}

pub fn is_transmon_regime(ej_over_h: f64, ec_over_h: f64) -> bool {
    ej_over_h / ec_over_h >= TRANSMON_MIN_RATIO
}

pub fn transmon_f01(ej_over_h: f64, ec_over_h: f64) -> Result<f64> {
    require_positive("ej_over_h", ej_over_h)?;
    require_positive("ec_over_h", ec_over_h)?;
    Ok((8.0 * ec_over_h * ej_over_h).sqrt() - ec_over_h)
}

/// k in δf/f = k·½·δE_J/E_J.
pub fn f01_sensitivity(ej_over_h: f64, ec_over_h: f64) -> Result<f64> {
    require_positive("ej_over_h", ej_over_h)?;
    require_positive("ec_over_h", ec_over_h)?;
    let plasma = (8.0 * ec_over_h * ej_over_h).sqrt();
    if plasma <= ec_over_h {
        return domain("E_J too small for a positive transition frequency");
    }
    Ok(plasma / (plasma - ec_over_h))
}

pub fn squid_asymmetry(area_small: f64, area_large: f64) -> Result<f64> {
    require_positive("area_small", area_small)?;
    require_positive("area_large", area_large)?;
    if area_small > area_large {
        return domain(format!(
            "small junction ({area_small}) larger than large junction ({area_large})"
        ));
    }
    Ok(area_small / area_large)
}

pub fn f01_from_area(area: f64, params: &ElectricalParams) -> Result<f64> {
    let j = JunctionElectrical::from_area(area, params)?;
    transmon_f01(j.ej_over_h, ec_from_capacitance(params.capacitance)?)
}

/// Predicted f₀₁ coefficient of variation (%) for a junction of
/// `nominal_area` µm² whose area scatters with `area_cv` percent.
pub fn propagate_variation(
    area_cv: f64,
    nominal_area: f64,
    params: &ElectricalParams,
    mode: PropagationMode,
) -> Result<f64> {
    if !(area_cv.is_finite() && area_cv >= 0.0) {
        return domain(format!("area CV must be >= 0, got {area_cv}"));
    }
    params.validate()?;
    let nominal = JunctionElectrical::from_area(nominal_area, params)?;
    let ec = ec_from_capacitance(params.capacitance)?;
    if area_cv == 0.0 {
        return Ok(0.0);
    }
    match mode {
        PropagationMode::Analytic => Ok(f01_sensitivity(nominal.ej_over_h, ec)? * 0.5 * area_cv),
        PropagationMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return domain("Monte Carlo propagation needs at least 2 samples");
            }
            let cv = area_cv / 100.0;
            let sigma = (1.0 + cv * cv).ln().sqrt();
            let mu = nominal_area.ln() - 0.5 * sigma * sigma;
            let dist = LogNormal::new(mu, sigma).map_err(|e| crate::Error::Domain(e.to_string()))?;
            let mut rng = substream(seed, Domain::Sampling, 0);
            let f01: Vec<f64> = (0..samples)
                .map(|_| f01_from_area(dist.sample(&mut rng), params))
                .collect::<Result<_>>()?;
            crate::stats::cv_percent(&f01)
        }
    }
}

/// RA = median(Rₙ·A) over `(area µm², rn Ω)` pairs with positive finite values.
pub fn calibrate_ra(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<f64> {
    let mut products: Vec<f64> = pairs
        .into_iter()
        .filter(|(a, r)| a.is_finite() && r.is_finite() && *a > 0.0 && *r > 0.0)
        .map(|(a, r)| a * r)
        .collect();
    if products.is_empty() {
        return Err(crate::Error::InsufficientData("no usable (area, Rn) pairs".into()));
    }
    products.sort_by(f64::total_cmp);
    let n = products.len();
    Ok(if n % 2 == 1 {
        products[n / 2]
    } else {
        0.5 * (products[n / 2 - 1] + products[n / 2])
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ElectricalParams {
        ElectricalParams::default()
    }

    #[test]
    fn rn_scales_inversely_with_area() {
        let p = params();
        let r1 = rn_from_area(0.02, &p).unwrap();
        let r2 = rn_from_area(0.04, &p).unwrap();
        assert_close!(r1 / r2, 2.0, 1e-12);
        assert_close!(rn_from_area(p.ra_product, &p).unwrap(), 1.0, 1e-12);
        assert!(rn_from_area(0.0, &p).is_err());
        assert!(rn_from_area(-1.0, &p).is_err());
    }

    #[test]
    fn ambegaokar_baratoff_example() {
        let p = ElectricalParams { gap_delta: 180.0, ..params() };
        // π · 180e-6 V / (2 · 6000 Ω) = 47.12 nA
        assert_close!(ic_from_rn(6000.0, &p).unwrap(), 47.1239, 1e-3);
        assert_close!(ic_from_rn(12000.0, &p).unwrap() * 2.0, ic_from_rn(6000.0, &p).unwrap(), 1e-12);
    }

    #[test]
    fn ic_rn_product_is_constant() {
        let p = params();
        let reference = std::f64::consts::PI * p.gap_delta * 1e-6 / 2.0 * 1e9;
        for area in [0.008, 0.0255, 0.12, 0.63] {
            let j = JunctionElectrical::from_area(area, &p).unwrap();
            assert!((j.ic * j.rn / reference - 1.0).abs() < 1e-9);
            // I_c per unit area is fixed by RA.
            assert!((j.ic / area / (reference / p.ra_product) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn charging_energy() {
        assert_close!(ec_from_capacitance(80.0).unwrap(), 0.2421, 2e-4);
        assert_close!(ec_from_capacitance(160.0).unwrap() * 2.0, ec_from_capacitance(80.0).unwrap(), 1e-15);
        for c in [1.0, 55.5, 80.0, 1234.0] {
            let back = capacitance_from_ec(ec_from_capacitance(c).unwrap()).unwrap();
            assert!((back / c - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn transmon_example() {
        // √(8 · 0.242 · 12.5) − 0.242 = 4.6768
        assert_close!(transmon_f01(12.5, 0.242).unwrap(), 4.6768, 1e-3);
        assert!(transmon_f01(0.0, 0.242).is_err());
        assert!(transmon_f01(12.5, -1.0).is_err());
        assert!(is_transmon_regime(12.5, 0.242));
        assert!(!is_transmon_regime(3.0, 0.242));
    }

    #[test]
    fn f01_sensitivity_matches_finite_difference() {
        let (ej, ec) = (12.5, 0.242);
        let f = transmon_f01(ej, ec).unwrap();
        let f_up = transmon_f01(ej * 1.01, ec).unwrap();
        let fd = (f_up - f) / f / 0.01;
        let analytic = 0.5 * f01_sensitivity(ej, ec).unwrap();
        assert!((fd / analytic - 1.0).abs() < 0.01, "fd {fd} vs {analytic}");
    }

    #[test]
    fn f01_monotone_in_ej_and_ec_derivative_sign_fixed() {
        let h = 1e-6;
        let mut sign = None;
        for i in 0..20 {
            let ec = 0.1 + 0.05 * f64::from(i);
            for j in 0..20 {
                let ej = ec * (20.0 + 10.0 * f64::from(j));
                assert!(transmon_f01(ej + h, ec).unwrap() > transmon_f01(ej, ec).unwrap());
                let d_ec = transmon_f01(ej, ec + h).unwrap() - transmon_f01(ej, ec).unwrap();
                let s = d_ec > 0.0;
                assert_eq!(*sign.get_or_insert(s), s);
            }
        }
    }

    #[test]
    fn asymmetry() {
        assert_close!(squid_asymmetry(0.055, 0.63).unwrap(), 0.0873, 1e-4);
        assert_eq!(squid_asymmetry(0.2, 0.2).unwrap(), 1.0);
        assert_close!(
            squid_asymmetry(0.055 * 3.0, 0.63 * 3.0).unwrap(),
            squid_asymmetry(0.055, 0.63).unwrap(),
            1e-15
        );
        assert!(squid_asymmetry(0.63, 0.055).is_err());
        assert!(SquidPair::new(0.1, 0.2).unwrap().asymmetry == 0.5);
    }

    #[test]
    fn propagation_modes_agree() {
        let p = params();
        assert_eq!(propagate_variation(0.0, 0.065, &p, PropagationMode::Analytic).unwrap(), 0.0);
        let analytic = propagate_variation(3.0, 0.065, &p, PropagationMode::Analytic).unwrap();
        let mc = propagate_variation(
            3.0,
            0.065,
            &p,
            PropagationMode::MonteCarlo { samples: 100_000, seed: 0 },
        )
        .unwrap();
        assert!((mc / analytic - 1.0).abs() < 0.05, "mc {mc} analytic {analytic}");
    }

    #[test]
    fn monte_carlo_propagation_converges() {
        let p = params();
        let run = |n| {
            propagate_variation(3.0, 0.065, &p, PropagationMode::MonteCarlo { samples: n, seed: 0 }).unwrap()
        };
        let (small, large) = (run(10_000), run(100_000));
        assert!((small / large - 1.0).abs() < 0.02, "{small} vs {large}");
    }

    #[test]
    fn ra_calibration_is_median_product() {
        let ra = calibrate_ra([(0.01, 100.0), (0.02, 60.0), (0.04, 20.0), (0.0, 5.0)]).unwrap();
        assert_close!(ra, 1.0, 1e-12);
        assert!(calibrate_ra([(0.0, 1.0)]).is_err());
    }
}
