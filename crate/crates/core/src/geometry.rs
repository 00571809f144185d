//! Dolan-bridge double-angle shadow-evaporation geometry.
//!
//! All lengths are in nanometres, angles in degrees, areas in µm².
//!
//! The mask is laid out along the tilt axis as three intervals:
//!
//! ```text
//!   bottom window        bridge          top window
//! [-bottom_window, 0)  [0, bridge_width)  [bridge_width, bridge_width + top_window)
//! ```
//!
//! The first (angled) evaporation images the bottom window displaced by the
//! shadow shift; the second evaporation images the top window. The junction
//! is the intersection of the two images along the tilt axis times the
//! transverse `junction_length`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, require_positive, Result};

/// Junction dimensions outside this band (nm) were never fabricated in the
/// studied process; results there are extrapolations.
pub const STUDIED_LENGTH_RANGE_NM: (f64, f64) = (80.0, 680.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackGeometry {
    /// Bridge suspension height h: the copolymer layer under the top resist.
    pub copolymer_thickness: f64,
    pub top_resist_thickness: f64,
    pub undercut: f64,
}

impl StackGeometry {
    pub fn new(copolymer_thickness: f64, top_resist_thickness: f64, undercut: f64) -> Result<Self> {
        let stack = Self {
            copolymer_thickness,
            top_resist_thickness,
            undercut,
        };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("copolymer_thickness", self.copolymer_thickness)?;
        require_positive("top_resist_thickness", self.top_resist_thickness)?;
        if !(self.undercut.is_finite() && self.undercut >= 0.0) {
            return domain(format!("undercut must be >= 0, got {}", self.undercut));
        }
        Ok(())
    }
}

impl Default for StackGeometry {
    /// 500 nm copolymer, 100 nm top resist, 200 nm undercut.
    fn default() -> Self {
        Self {
            copolymer_thickness: 500.0,
            top_resist_thickness: 100.0,
            undercut: 200.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DolanMask {
    pub bridge_width: f64,
    /// Bottom-window extent along the tilt axis.
    pub bottom_window: f64,
    /// Top-window extent along the tilt axis, on the far side of the bridge.
    pub top_window: f64,
    /// Junction extent perpendicular to the tilt axis.
    pub junction_length: f64,
}

impl DolanMask {
    pub fn new(bridge_width: f64, bottom_window: f64, top_window: f64, junction_length: f64) -> Result<Self> {
        let mask = Self {
            bridge_width,
            bottom_window,
            top_window,
            junction_length,
        };
        mask.validate()?;
        Ok(mask)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("bridge_width", self.bridge_width)?;
        require_positive("bottom_window", self.bottom_window)?;
        require_positive("top_window", self.top_window)?;
        require_positive("junction_length", self.junction_length)
    }

    /// True when the transverse length lies outside the studied 80–680 nm band.
    pub fn outside_studied_range(&self) -> bool {
        let (lo, hi) = STUDIED_LENGTH_RANGE_NM;
        self.junction_length < lo || self.junction_length > hi
    }
}

/// Which nominal junction dimension is laid out along the tilt axis.
///
/// Sites are specified as `(w, l)`: `w` along the tilt axis, `l` transverse.
/// The convention decides which window carries `w`; the other window gets
/// the configured far-window extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltAxisConvention {
    /// `w` is the top window; the shifted bottom-film image must contain it.
    #[default]
    TopWindowAlongTilt,
    /// `w` is the bottom window; the top window must contain its image.
    BottomWindowAlongTilt,
}

impl TiltAxisConvention {
    pub fn mask(self, w: f64, l: f64, bridge_width: f64, far_window: f64) -> DolanMask {
        match self {
            Self::TopWindowAlongTilt => DolanMask {
                bridge_width,
                bottom_window: far_window,
                top_window: w,
                junction_length: l,
            },
            Self::BottomWindowAlongTilt => DolanMask {
                bridge_width,
                bottom_window: w,
                top_window: far_window,
                junction_length: l,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaporationStep {
    /// Tilt about the junction-length axis, degrees.
    pub angle: f64,
    pub film_thickness: f64,
}

impl EvaporationStep {
    pub fn new(angle: f64, film_thickness: f64) -> Result<Self> {
        let step = Self { angle, film_thickness };
        step.validate()?;
        Ok(step)
    }

    pub fn validate(&self) -> Result<()> {
        check_angle(self.angle)?;
        require_positive("film_thickness", self.film_thickness)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Full,
    Partial,
    None,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Full => "full",
            Regime::Partial => "partial",
            Regime::None => "none",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Regime::Full),
            "partial" => Ok(Regime::Partial),
            "none" => Ok(Regime::None),
            other => Err(format!("unknown regime '{other}'")),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayResult {
    /// Relative shadow shift of the first image with respect to the second, nm.
    pub shift: f64,
    pub overlap_width: f64,
    /// Junction area, µm².
    pub area: f64,
    pub regime: Regime,
    /// First-order ∂area/∂α₁, µm² per degree.
    pub area_angle_sensitivity: f64,
    /// Parasitic overlaps (second film through the bottom window, first film
    /// through the top window), µm². Excluded from `area`.
    pub parasitic_areas: [f64; 2],
    /// The shift runs past the undercut plus bottom window: the bottom film
    /// is clipped by the resist wall.
    pub clipped: bool,
    pub outside_studied_range: bool,
}

fn check_angle(angle: f64) -> Result<()> {
    if angle.is_finite() && (0.0..90.0).contains(&angle) {
        Ok(())
    } else {
        domain(format!("evaporation angle must be in [0, 90) degrees, got {angle}"))
    }
}

/// Shadow shift s = h·tan(α) of the film image deposited through the bridge.
pub fn shadow_shift(stack: &StackGeometry, angle: f64) -> Result<f64> {
    check_angle(angle)?;
    Ok(signed_shift(stack, angle))
}

/// Signed variant used for local angles that may dip below zero on a wafer.
pub(crate) fn signed_shift(stack: &StackGeometry, angle: f64) -> f64 {
    stack.copolymer_thickness * angle.to_radians().tan()
}

/// Width of the film image through a window of `width`, foreshortened by the
/// top-resist wall at tilted incidence.
pub fn effective_opening(width: f64, stack: &StackGeometry, angle: f64) -> Result<f64> {
    require_positive("width", width)?;
    check_angle(angle)?;
    Ok(foreshortened(width, stack, angle))
}

pub(crate) fn foreshortened(width: f64, stack: &StackGeometry, angle: f64) -> f64 {
    (width - stack.top_resist_thickness * angle.to_radians().tan().abs()).max(0.0)
}

/// Junction area in µm² from two lengths in nm.
pub fn junction_area(overlap_width: f64, junction_length: f64) -> Result<f64> {
    if !(overlap_width >= 0.0 && junction_length >= 0.0) {
        return domain(format!(
            "lengths must be >= 0, got {overlap_width} and {junction_length}"
        ));
    }
    Ok(overlap_width * junction_length * 1e-6)
}

pub fn overlay(
    stack: &StackGeometry,
    mask: &DolanMask,
    evap1: &EvaporationStep,
    evap2: &EvaporationStep,
) -> Result<OverlayResult> {
    stack.validate()?;
    mask.validate()?;
    evap1.validate()?;
    evap2.validate()?;
    Ok(overlay_at(stack, mask, evap1.angle, evap2.angle))
}

/// Interval-intersection overlay for signed angles in (-90°, 90°).
pub(crate) fn overlay_at(stack: &StackGeometry, mask: &DolanMask, angle1: f64, angle2: f64) -> OverlayResult {
    let s1 = signed_shift(stack, angle1);
    let s2 = signed_shift(stack, angle2);
    let shift = s1 - s2;

    let (b_lo, b_hi) = (shift - mask.bottom_window, shift);
    let (t_lo, t_hi) = (mask.bridge_width, mask.bridge_width + mask.top_window);
    let overlap_width = if b_lo >= t_lo && b_hi <= t_hi {
        mask.bottom_window
    } else if t_lo >= b_lo && t_hi <= b_hi {
        mask.top_window
    } else {
        (b_hi.min(t_hi) - b_lo.max(t_lo)).max(0.0)
    };

    // d(overlap)/d(shift): the upper end moves with the shift while the bottom
    // image ends first; the lower end moves while the bottom image starts last.
    let d_overlap = if overlap_width > 0.0 {
        f64::from(u8::from(b_hi < t_hi)) - f64::from(u8::from(b_lo > t_lo))
    } else {
        0.0
    };
    let regime = if overlap_width <= 0.0 {
        Regime::None
    } else if d_overlap == 0.0 {
        Regime::Full
    } else {
        Regime::Partial
    };

    let sec2 = 1.0 / angle1.to_radians().cos().powi(2);
    let ds_dangle = stack.copolymer_thickness * sec2 * std::f64::consts::PI / 180.0;
    let area_angle_sensitivity = mask.junction_length * d_overlap * ds_dangle * 1e-6;

    let parasitic_bottom = (mask.bottom_window - shift.abs()).max(0.0);
    let parasitic_top = (mask.top_window - shift.abs()).max(0.0);

    OverlayResult {
        shift,
        overlap_width,
        area: overlap_width * mask.junction_length * 1e-6,
        regime,
        area_angle_sensitivity,
        parasitic_areas: [
            parasitic_bottom * mask.junction_length * 1e-6,
            parasitic_top * mask.junction_length * 1e-6,
        ],
        clipped: shift > stack.undercut + mask.bottom_window,
        outside_studied_range: mask.outside_studied_range(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stack() -> StackGeometry {
        StackGeometry::default()
    }

    fn mask(bottom: f64) -> DolanMask {
        DolanMask::new(150.0, bottom, 600.0, 170.0).unwrap()
    }

    fn step(angle: f64) -> EvaporationStep {
        EvaporationStep::new(angle, 25.0).unwrap()
    }

    #[test]
    fn shift_examples() {
        assert_eq!(shadow_shift(&stack(), 0.0).unwrap(), 0.0);
        assert_close!(shadow_shift(&stack(), 40.0).unwrap(), 419.55, 0.05);
        assert_close!(shadow_shift(&stack(), 35.0).unwrap(), 350.10, 0.05);
    }

    #[test]
    fn shift_rejects_out_of_range_angles() {
        assert!(shadow_shift(&stack(), 90.0).is_err());
        assert!(shadow_shift(&stack(), -0.5).is_err());
        assert!(shadow_shift(&stack(), f64::NAN).is_err());
    }

    #[test]
    fn opening_examples() {
        assert_eq!(effective_opening(170.0, &stack(), 0.0).unwrap(), 170.0);
        assert_close!(effective_opening(170.0, &stack(), 40.0).unwrap(), 86.09, 0.05);
        assert_eq!(effective_opening(50.0, &stack(), 45.0).unwrap(), 0.0);
        assert!(effective_opening(0.0, &stack(), 10.0).is_err());
    }

    #[test]
    fn full_overlay_at_forty_degrees() {
        let r = overlay(&stack(), &mask(170.0), &step(40.0), &step(0.0)).unwrap();
        assert_close!(r.shift, 419.55, 0.05);
        assert_close!(r.overlap_width, 170.0, 1e-9);
        assert_eq!(r.regime, Regime::Full);
        assert_eq!(r.area_angle_sensitivity, 0.0);
    }

    #[test]
    fn partial_overlay_at_thirty_five_degrees() {
        let r = overlay(&stack(), &mask(260.0), &step(35.0), &step(0.0)).unwrap();
        assert_close!(r.overlap_width, 200.10, 0.05);
        assert_eq!(r.regime, Regime::Partial);
        assert!(r.area_angle_sensitivity > 0.0);
    }

    #[test]
    fn no_overlap_when_shift_shorter_than_bridge() {
        let r = overlay(&stack(), &mask(170.0), &step(15.0), &step(0.0)).unwrap();
        assert!(r.shift < 150.0);
        assert_eq!(r.overlap_width, 0.0);
        assert_eq!(r.regime, Regime::None);
        assert_eq!(r.area, 0.0);
    }

    #[test]
    fn top_window_contained_in_bottom_image_is_full() {
        let m = DolanMask::new(150.0, 600.0, 170.0, 150.0).unwrap();
        let r = overlay(&stack(), &m, &step(45.0), &step(0.0)).unwrap();
        assert_eq!(r.regime, Regime::Full);
        assert_close!(r.overlap_width, 170.0, 1e-9);
    }

    #[test]
    fn area_examples() {
        assert_close!(junction_area(150.0, 170.0).unwrap(), 0.0255, 1e-12);
        assert_eq!(junction_area(0.0, 123.0).unwrap(), 0.0);
        assert_close!(junction_area(680.0, 170.0).unwrap(), 0.1156, 1e-12);
        assert!(junction_area(-1.0, 5.0).is_err());
    }

    #[test]
    fn clipping_flag() {
        let tight = StackGeometry::new(500.0, 100.0, 10.0).unwrap();
        let r = overlay(&tight, &mask(170.0), &step(50.0), &step(0.0)).unwrap();
        assert!(r.clipped);
        let r = overlay(&stack(), &mask(600.0), &step(40.0), &step(0.0)).unwrap();
        assert!(!r.clipped);
    }

    #[test]
    fn parasitic_footprints_reported_not_counted() {
        let r = overlay(&stack(), &mask(600.0), &step(40.0), &step(0.0)).unwrap();
        // 600 - 419.55 nm of each window is doubly exposed.
        assert_close!(r.parasitic_areas[0], (600.0 - r.shift) * 170.0 * 1e-6, 1e-12);
        assert_close!(r.parasitic_areas[1], (600.0 - r.shift) * 170.0 * 1e-6, 1e-12);
        assert_close!(r.area, r.overlap_width * 170.0 * 1e-6, 1e-15);
    }

    #[test]
    fn studied_range_flag() {
        let m = DolanMask::new(150.0, 170.0, 600.0, 50.0).unwrap();
        assert!(m.outside_studied_range());
        assert!(!mask(170.0).outside_studied_range());
    }

    #[test]
    fn convention_places_w_on_requested_window() {
        let a = TiltAxisConvention::TopWindowAlongTilt.mask(150.0, 170.0, 150.0, 600.0);
        assert_eq!((a.top_window, a.bottom_window), (150.0, 600.0));
        let b = TiltAxisConvention::BottomWindowAlongTilt.mask(150.0, 170.0, 150.0, 600.0);
        assert_eq!((b.top_window, b.bottom_window), (600.0, 150.0));
    }
}
