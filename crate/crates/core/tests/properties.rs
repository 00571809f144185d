use proptest::prelude::*;

use jjvar::dataset::{DatasetMetadata, JunctionDataset, JunctionRecord, ReadOptions};
use jjvar::electrical::{self, ElectricalParams};
use jjvar::geometry::{overlay, DolanMask, EvaporationStep, Regime, StackGeometry};
use jjvar::ler::ler_sigma;
use jjvar::litho::{self, Layout, LayoutRect, PsfParams, ResistPreset};
use jjvar::stats;
use jjvar::writer::{realized_mean, LwNoiseModel, ScanDirection, WriterConfig};

fn psf_strategy() -> impl Strategy<Value = PsfParams> {
    (0.01..0.2f64, 2.0..15.0f64, 0.0..3.0f64).prop_map(|(a, b, e)| PsfParams { alpha_fwd: a, beta_back: b, eta: e })
}

fn area_at(mask: &DolanMask, angle: f64) -> (f64, Regime) {
    let stack = StackGeometry::default();
    let e1 = EvaporationStep::new(angle, 30.0).unwrap();
    let e2 = EvaporationStep::new(0.0, 50.0).unwrap();
    let ov = overlay(&stack, mask, &e1, &e2).unwrap();
    (ov.area, ov.regime)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn overlap_bounded_by_windows(
        bridge in 60.0..300.0f64,
        bottom in 80.0..700.0f64,
        top in 80.0..700.0f64,
        length in 80.0..700.0f64,
        angle in 0.0..60.0f64,
    ) {
        let mask = DolanMask::new(bridge, bottom, top, length).unwrap();
        let (area, _) = area_at(&mask, angle);
        prop_assert!(area >= 0.0);
        prop_assert!(area <= bottom.min(top) * length * 1e-6 + 1e-15);
    }

    #[test]
    fn regime_matches_angle_sensitivity(
        bridge in 60.0..300.0f64,
        bottom in 80.0..700.0f64,
        top in 80.0..700.0f64,
        length in 80.0..700.0f64,
        angle in 1.0..60.0f64,
    ) {
        let mask = DolanMask::new(bridge, bottom, top, length).unwrap();
        let d = 0.01;
        let (a0, regime) = area_at(&mask, angle);
        let (lo, r_lo) = area_at(&mask, angle - d);
        let (hi, r_hi) = area_at(&mask, angle + d);
        // Skip configurations sitting on a regime boundary.
        prop_assume!(r_lo == regime && r_hi == regime);
        let fd = (hi - lo) / (2.0 * d);
        match regime {
            Regime::Full => prop_assert!(fd.abs() <= 1e-9, "full regime slope {fd}"),
            Regime::Partial => {
                let h = StackGeometry::default().copolymer_thickness;
                let sec2 = 1.0 / angle.to_radians().cos().powi(2);
                let expected = length * h * sec2 * std::f64::consts::PI / 180.0 * 1e-6;
                prop_assert!((fd.abs() / expected - 1.0).abs() < 0.01, "{fd} vs {expected}");
            }
            Regime::None => prop_assert_eq!(a0, 0.0),
        }
    }

    #[test]
    fn splitting_a_rect_leaves_dose_unchanged(
        psf in psf_strategy(),
        x0 in -3.0..0.0f64, w in 0.05..4.0f64, h in 0.05..4.0f64,
        frac in 0.05..0.95f64,
        px in -8.0..8.0f64, py in -8.0..8.0f64,
    ) {
        let whole = LayoutRect::new(x0, -h / 2.0, x0 + w, h / 2.0, 1.0).unwrap();
        let xs = x0 + frac * w;
        let left = LayoutRect { x1: xs, ..whole };
        let right = LayoutRect { x0: xs, ..whole };
        let a = litho::dose_at_point(&[whole], &psf, (px, py));
        let b = litho::dose_at_point(&[left, right], &psf, (px, py));
        prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn dose_falls_with_distance(psf in psf_strategy(), d0 in 0.0..10.0f64, step in 0.01..5.0f64) {
        let rect = LayoutRect::new(-0.5, -0.5, 0.5, 0.5, 1.0).unwrap();
        let near = litho::dose_at_point(&[rect], &psf, (0.5 + d0, 0.0));
        let far = litho::dose_at_point(&[rect], &psf, (0.5 + d0 + step, 0.0));
        prop_assert!(far <= near);
        prop_assert!((0.0..=1.0).contains(&near));
    }

    #[test]
    fn cv_is_scale_invariant(values in prop::collection::vec(1.0..100.0f64, 3..50), k in 1e-3..1e3f64) {
        let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
        let (a, b) = (stats::cv_percent(&values).unwrap(), stats::cv_percent(&scaled).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn plane_fit_recovers_plane(
        a in -100.0..100.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64,
        pts in prop::collection::vec((0.0..22.0f64, 0.0..22.0f64), 6..60),
    ) {
        let data: Vec<(f64, f64, f64)> = pts.iter().map(|&(x, y)| (x, y, a + b * x + c * y)).collect();
        prop_assume!(stats::plane_fit(&data).is_ok());
        let fit = stats::plane_fit(&data).unwrap();
        prop_assert!((fit.gradient[0] - b).abs() <= 1e-9 && (fit.gradient[1] - c).abs() <= 1e-9);
    }

    #[test]
    fn pearson_in_unit_interval(pairs in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 3..40)) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(r) = stats::pearson_r(&x, &y) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
            prop_assert_eq!(r, stats::pearson_r(&y, &x).unwrap());
        }
    }

    #[test]
    fn writer_mean_monotone(n in 60.0..700.0f64, dn in 0.0..20.0f64, across in any::<bool>(), step in 1.0..6.0f64) {
        let cfg = WriterConfig {
            step_size: step,
            scan_direction: if across { ScanDirection::Across } else { ScanDirection::Along },
            ..WriterConfig::default()
        };
        let m = LwNoiseModel::default();
        prop_assert!(realized_mean(n + dn, &cfg, &m).unwrap() >= realized_mean(n, &cfg, &m).unwrap());
    }

    #[test]
    fn ler_ignores_straight_trend(
        profile in prop::collection::vec(-5.0..5.0f64, 8..200),
        a in -50.0..50.0f64, b in -1.0..1.0f64,
    ) {
        let tilted: Vec<f64> = profile.iter().enumerate().map(|(i, y)| y + a + b * i as f64).collect();
        let (s0, s1) = (ler_sigma(&profile).unwrap(), ler_sigma(&tilted).unwrap());
        prop_assert!((s0 - s1).abs() <= 1e-9 * s0.max(1.0));
    }

    #[test]
    fn icrn_constant_and_f01_rises_with_area(a in 0.005..1.0f64, k in 1.01..3.0f64) {
        let p = ElectricalParams::default();
        let rn = electrical::rn_from_area(a, &p).unwrap();
        let rn2 = electrical::rn_from_area(a * k, &p).unwrap();
        let ic = electrical::ic_from_rn(rn, &p).unwrap();
        let ic2 = electrical::ic_from_rn(rn2, &p).unwrap();
        prop_assert!((ic * rn / (ic2 * rn2) - 1.0).abs() <= 1e-12);
        let f = electrical::f01_from_area(a, &p).unwrap();
        let f2 = electrical::f01_from_area(a * k, &p).unwrap();
        prop_assert!(f2 > f);
    }

    #[test]
    fn dataset_csv_round_trip(
        rows in prop::collection::vec(
            (1u32..7, 0.0..22.0f64, 0.0..22.0f64, 0usize..3, 50.0..700.0f64, 0.001..0.5f64, any::<bool>()),
            1..40,
        )
    ) {
        let groups = ["0.008", "0.025", "a"];
        let records: Vec<JunctionRecord> = rows
            .iter()
            .map(|&(chip, x, y, g, lw, area, open)| JunctionRecord {
                chip_id: chip,
                x_mm: x,
                y_mm: y,
                group: groups[g].into(),
                nom_w_nm: Some(lw.round()),
                nom_l_nm: None,
                lw_top_nm: Some(lw),
                lw_bot_nm: Some(lw * 0.9),
                regime: Some(if open { Regime::None } else { Regime::Partial }),
                area_um2: if open { 0.0 } else { area },
                r_ohm: if open { f64::INFINITY } else { 730.0 / area },
            })
            .collect();
        let ds = JunctionDataset::new(records, DatasetMetadata::measured());
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = JunctionDataset::read_csv(buf.as_slice(), &ReadOptions::default()).unwrap();
        prop_assert!(back.skipped.is_empty());
        prop_assert_eq!(back.dataset.records, ds.records);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// With the threshold re-derived to size the isolated feature, more
    /// backscatter always widens the printed line.
    #[test]
    fn bias_grows_with_backscatter(eta in 0.05..2.0f64, deta in 0.05..1.0f64) {
        let layout = Layout::reference();
        let preset = |eta: f64| {
            let psf = PsfParams::new(0.05, 7.3, eta).unwrap();
            ResistPreset {
                name: "p".into(),
                psf,
                base_dose: 180.0,
                threshold_fraction: litho::dose_to_size_threshold(&layout, &psf),
            }
        };
        let b0 = litho::linewidth_bias(150.0, &layout, &preset(eta)).unwrap();
        let b1 = litho::linewidth_bias(150.0, &layout, &preset(eta + deta)).unwrap();
        prop_assert!(b1 > b0, "{b0} then {b1}");
    }
}
