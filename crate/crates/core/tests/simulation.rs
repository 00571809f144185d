use jjvar::dataset::{DatasetMetadata, JunctionDataset};
use jjvar::mcpsf::{default_stack, simulate_psf, BeamConfig};
use jjvar::stats::{self, Metric, OutlierPolicy, DEFAULT_GRID};
use jjvar::wafer::{simulate_wafer, WaferConfig};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn wafer_independent_of_thread_count() {
    let cfg = WaferConfig::paper();
    let one = in_pool(1, || simulate_wafer(&cfg, 11).unwrap());
    let many = in_pool(6, || simulate_wafer(&cfg, 11).unwrap());
    assert_eq!(one, many);
    assert_ne!(one, simulate_wafer(&cfg, 12).unwrap());
}

#[test]
fn psf_histogram_independent_of_thread_count() {
    let beam = BeamConfig::new(20.0, 2000, 4);
    let one = in_pool(1, || simulate_psf(&default_stack(), &beam).unwrap());
    let many = in_pool(5, || simulate_psf(&default_stack(), &beam).unwrap());
    assert_eq!(one, many);
}

#[test]
fn variation_hierarchy_holds_across_seeds() {
    for seed in 0..4 {
        let ds = JunctionDataset::new(simulate_wafer(&WaferConfig::paper(), seed).unwrap(), DatasetMetadata::measured());
        let rep = stats::variation_report(&ds, OutlierPolicy::ThreeSigma).unwrap();
        for g in &rep.groups {
            let chip = g.chip_cv.unwrap();
            assert!(chip <= 1.1 * g.wafer_cv, "seed {seed} group {}: chip {chip} wafer {}", g.group, g.wafer_cv);
        }
    }
}

#[test]
fn evaporation_angle_drives_bottom_linewidth_gradient() {
    let grad = |cfg: &WaferConfig| {
        let recs = simulate_wafer(cfg, 0).unwrap();
        let sel = recs.iter().filter(|r| r.group == "0.025");
        stats::heatmap(sel, Metric::LwBot, cfg.layout.substrate_size, DEFAULT_GRID)
            .unwrap()
            .plane
            .gradient_magnitude()
    };
    assert!(grad(&WaferConfig::paper()) > 3.0 * grad(&WaferConfig::paper_zero_angle()));
}

#[test]
fn area_spread_dominates_correlation() {
    let ds = JunctionDataset::new(simulate_wafer(&WaferConfig::paper(), 0).unwrap(), DatasetMetadata::measured());
    let pairs = |groups: &[&str]| {
        ds.records
            .iter()
            .filter(|r| groups.contains(&r.group.as_str()) && r.is_conducting())
            .map(|r| (r.area_um2, r.r_ohm))
            .collect::<Vec<_>>()
    };
    let multi = stats::area_resistance_fit(pairs(&["0.008", "0.025", "0.120"])).unwrap();
    let single = stats::area_resistance_fit(pairs(&["0.025"])).unwrap();
    assert!(single.pearson_r() < multi.pearson_r());
}
