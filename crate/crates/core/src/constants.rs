//! CODATA 2018 exact SI constants. Everything downstream reads from here.

/// Elementary charge [C].
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant [J s].
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant [J s].
pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
/// Magnetic flux quantum h/2e [Wb].
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * ELEMENTARY_CHARGE);
/// Avogadro constant [1/mol].
pub const AVOGADRO: f64 = 6.022_140_76e23;
/// Electron rest energy [keV].
pub const ELECTRON_REST_KEV: f64 = 510.998_950;
