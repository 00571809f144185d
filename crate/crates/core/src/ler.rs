//! Line-edge roughness: synthesis as a stationary Gaussian process with
//! exponential autocorrelation, and measurement about a fitted line.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

pub const LER_MIN_POINTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LerModel {
    /// (evaporation angle deg, edge σ nm), ascending; linear in between,
    /// flat outside.
    pub sigma_vs_angle: Vec<(f64, f64)>,
    /// Exponential correlation length ξ, nm.
    pub correlation_length: f64,
    /// Distance between profile samples, nm.
    pub sample_spacing: f64,
}

impl Default for LerModel {
    /// Digitized, approximate: flat near 2 nm up to 30°, rising steeply past 45°.
    fn default() -> Self {
        Self {
            sigma_vs_angle: vec![
                (0.0, 2.0),
                (15.0, 2.0),
                (30.0, 2.1),
                (40.0, 3.0),
                (45.0, 4.0),
                (50.0, 6.0),
                (55.0, 9.0),
                (62.0, 14.0),
                (70.0, 20.0),
            ],
            correlation_length: 30.0,
            sample_spacing: 1.0,
        }
    }
}

impl LerModel {
    pub fn validate(&self) -> Result<()> {
        require_positive("correlation_length", self.correlation_length)?;
        require_positive("sample_spacing", self.sample_spacing)?;
        if self.sigma_vs_angle.is_empty() {
            return Err(Error::Config("sigma_vs_angle is empty".into()));
        }
        for w in self.sigma_vs_angle.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Config("sigma_vs_angle angles must ascend".into()));
            }
            if w[0].0 >= 45.0 && w[1].1 < w[0].1 {
                return Err(Error::Config("sigma_vs_angle must not decrease above 45°".into()));
            }
        }
        if self.sigma_vs_angle.iter().any(|&(_, s)| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::Config("sigma_vs_angle values must be >= 0".into()));
        }
        Ok(())
    }

    /// Edge σ at an evaporation angle (sign ignored), nm.
    pub fn sigma_at(&self, angle: f64) -> f64 {
        let a = angle.abs();
        let t = &self.sigma_vs_angle;
        if a <= t[0].0 {
            return t[0].1;
        }
        if a >= t[t.len() - 1].0 {
            return t[t.len() - 1].1;
        }
        let i = t.partition_point(|&(k, _)| k <= a);
        let ((a0, s0), (a1, s1)) = (t[i - 1], t[i]);
        s0 + (s1 - s0) * (a - a0) / (a1 - a0)
    }

    /// Zero roughness at every angle.
    pub fn smooth(&self) -> Self {
        Self {
            sigma_vs_angle: vec![(0.0, 0.0)],
            ..self.clone()
        }
    }
}

/// Edge offsets (nm) sampled every `sample_spacing` along `length` nm.
pub fn sample_edge<R: Rng + ?Sized>(length: f64, ler: &LerModel, angle: f64, rng: &mut R) -> Result<Vec<f64>> {
    require_positive("length", length)?;
    let n = (length / ler.sample_spacing).ceil() as usize + 1;
    let sigma = ler.sigma_at(angle);
    if sigma == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let rho = (-ler.sample_spacing / ler.correlation_length).exp();
    let innovation = sigma * (1.0 - rho * rho).sqrt();
    let z0: f64 = StandardNormal.sample(rng);
    let mut x = sigma * z0;
    let mut out = Vec::with_capacity(n);
    out.push(x);
    for _ in 1..n {
        let z: f64 = StandardNormal.sample(rng);
        x = rho * x + innovation * z;
        out.push(x);
    }
    Ok(out)
}

/// Standard deviation of the profile about its least-squares straight line.
pub fn ler_sigma(profile: &[f64]) -> Result<f64> {
    let n = profile.len();
    if n < LER_MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "LER needs >= {LER_MIN_POINTS} points, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = (nf - 1.0) / 2.0;
    let my = profile.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (i, y) in profile.iter().enumerate() {
        let dx = i as f64 - mx;
        sxx += dx * dx;
        sxy += dx * (y - my);
    }
    let slope = sxy / sxx;
    let ss: f64 = profile
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let r = y - my - slope * (i as f64 - mx);
            r * r
        })
        .sum();
    Ok((ss / nf).sqrt())
}

/// σ of a width averaged over an edge of `length` nm with correlation
/// length `xi`: σ·√(ξ/L), never above σ.
pub fn edge_averaged_sigma(sigma: f64, xi: f64, length: f64) -> f64 {
    if length <= 0.0 {
        return sigma;
    }
    sigma * (xi / length).sqrt().min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn smooth_model_gives_flat_edge() {
        let p = sample_edge(500.0, &LerModel::default().smooth(), 45.0, &mut rng(1)).unwrap();
        assert!(p.iter().all(|&x| x == 0.0));
        assert!(sample_edge(0.0, &LerModel::default(), 0.0, &mut rng(1)).is_err());
    }

    #[test]
    fn marginal_sigma_at_thirty_degrees() {
        let m = LerModel::default();
        let p = sample_edge(10_000.0 * m.correlation_length, &m, 30.0, &mut rng(2)).unwrap();
        let s = crate::stats::std_dev(&p).unwrap();
        assert!((s / 2.1 - 1.0).abs() < 0.10, "σ {s}");
        assert!((s / 2.0 - 1.0).abs() < 0.10);
    }

    #[test]
    fn roughness_grows_past_forty_five() {
        let m = LerModel::default();
        let at = |a| ler_sigma(&sample_edge(100_000.0, &m, a, &mut rng(3)).unwrap()).unwrap();
        assert!(at(62.0) > at(45.0));
        assert!(m.sigma_at(-45.0) == m.sigma_at(45.0));
    }

    #[test]
    fn ler_of_straight_and_tilted_edges_is_zero() {
        assert_eq!(ler_sigma(&[3.0; 20]).unwrap(), 0.0);
        let tilted: Vec<f64> = (0..50).map(|i| 0.3 * f64::from(i) - 7.0).collect();
        assert!(ler_sigma(&tilted).unwrap() < 1e-12);
        assert!(ler_sigma(&[1.0; 7]).is_err());
    }

    #[test]
    fn measured_ler_recovers_generator_sigma() {
        let m = LerModel {
            sigma_vs_angle: vec![(0.0, 3.0)],
            ..Default::default()
        };
        let p = sample_edge(200_000.0, &m, 0.0, &mut rng(4)).unwrap();
        let s = ler_sigma(&p).unwrap();
        assert!((s / 3.0 - 1.0).abs() < 0.10, "σ {s}");
    }

    #[test]
    fn correlation_decays_exponentially() {
        let m = LerModel {
            sigma_vs_angle: vec![(0.0, 1.0)],
            ..Default::default()
        };
        let p = sample_edge(400_000.0, &m, 0.0, &mut rng(5)).unwrap();
        let lag = m.correlation_length as usize;
        let n = p.len() - lag;
        let c: f64 = (0..n).map(|i| p[i] * p[i + lag]).sum::<f64>() / n as f64;
        assert!((c - (-1f64).exp()).abs() < 0.05, "autocorrelation {c}");
    }

    #[test]
    fn edge_averaging() {
        assert_eq!(edge_averaged_sigma(4.0, 30.0, 120.0), 2.0);
        assert_eq!(edge_averaged_sigma(4.0, 30.0, 10.0), 4.0);
    }

    #[test]
    fn default_table_valid() {
        LerModel::default().validate().unwrap();
        let bad = LerModel {
            sigma_vs_angle: vec![(45.0, 5.0), (60.0, 4.0)],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
