use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use jjvar::config::RunConfig;
use jjvar::dataset::{JunctionDataset, ReadOptions};
use jjvar::experiments::{self, ExperimentId};
use jjvar::litho::{self, Layout, Region, ResistPreset};
use jjvar::mcpsf::{self, BeamConfig, MaterialLayer, MIN_FIT_ELECTRONS};
use jjvar::report;
use jjvar::stats::{self, Metric, OutlierPolicy};

#[derive(Parser)]
#[command(name = "jjvar", version, about = "Josephson-junction fabrication variability toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON). Omitted sections use the calibrated defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random stream; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Abort on the first malformed input row.
    #[arg(long, global = true)]
    strict: bool,
    /// Heat-map grid as NxM cells.
    #[arg(long, global = true, default_value = "10x10", value_parser = parse_grid)]
    grid: (usize, usize),
    /// Resist preset for dose and bias calculations.
    #[arg(long, global = true, value_enum, default_value_t = Preset::MmaPmmaA4)]
    preset: Preset,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    MmaPmmaA4,
    MmaCsar62,
}

impl Preset {
    fn resist(self) -> ResistPreset {
        match self {
            Preset::MmaPmmaA4 => ResistPreset::mma_pmma_a4(),
            Preset::MmaCsar62 => ResistPreset::mma_csar62(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Substrate {
    Si,
    Ge,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a wafer and write the dataset, reports and heat maps.
    Simulate,
    /// Analyze a junction CSV.
    Analyze {
        input: PathBuf,
        /// Keep 3σ outliers in the statistics.
        #[arg(long)]
        keep_outliers: bool,
    },
    /// Rerun a canned experiment and compare it with the reference bands.
    Repro { id: String },
    /// Monte Carlo point-spread function and double-Gaussian fit.
    Psf {
        #[arg(long, default_value_t = 100_000)]
        electrons: u64,
        /// Beam energy, keV.
        #[arg(long, default_value_t = 50.0)]
        energy: f64,
        #[arg(long, value_enum, default_value_t = Substrate::Si)]
        substrate: Substrate,
    },
    /// Proximity dose, backscatter increase and linewidth bias for a layout.
    Litho {
        /// Layout as JSON or CSV; the reference layout when omitted.
        #[arg(long)]
        layout: Option<PathBuf>,
    },
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("grid '{s}' is not NxM"))?;
    let n: usize = a.trim().parse().map_err(|_| format!("bad grid width '{a}'"))?;
    let m: usize = b.trim().parse().map_err(|_| format!("bad grid height '{b}'"))?;
    if n == 0 || m == 0 {
        return Err("grid dimensions must be >= 1".into());
    }
    Ok((n, m))
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("JF_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("JF_THREADS='{v}' is not a count"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring thread pool")?;
    }
    Ok(())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

fn write_metadata(out: &Path, command: &str, seed: Option<u64>, config_hash: Option<&str>, extra: serde_json::Value) -> Result<()> {
    let meta = json!({
        "tool": "jjvar",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": seed,
        "config_hash": config_hash,
        "parameters": extra,
    });
    write(&out.join("metadata.json"), serde_json::to_string_pretty(&meta)? + "\n")
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::from_path(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Variation report, log-log fit and per-group heat maps for every metric.
fn write_reports(ds: &JunctionDataset, out: &Path, common: &Common, policy: OutlierPolicy, substrate: (f64, f64)) -> Result<()> {
    let rep = stats::variation_report(ds, policy)?;
    let mut text = report::variation_text(&rep);
    report::write_variation_csv(&rep, create(&out.join("variation.csv"))?)?;
    match stats::dataset_area_resistance_fit(ds) {
        Ok(fit) => {
            text.push('\n');
            text.push_str(&report::fit_text(&fit));
            write(&out.join("fit.json"), serde_json::to_string_pretty(&fit)? + "\n")?;
        }
        Err(e) => text.push_str(&format!("\nlog-log fit unavailable: {e}\n")),
    }
    write(&out.join("variation.txt"), &text)?;
    print!("{text}");

    let maps = out.join("heatmaps");
    fs::create_dir_all(&maps)?;
    let mut gradients = Vec::new();
    for (group, records) in ds.by_group() {
        for metric in Metric::ALL {
            let hm = match stats::heatmap(records.iter().copied(), metric, substrate, common.grid) {
                Ok(hm) => hm,
                Err(e) => {
                    eprintln!("heat map {group} {}: {e}", metric.column());
                    continue;
                }
            };
            let file = |ext: &str| maps.join(format!("{group}_{}.{ext}", metric.column()));
            report::write_heatmap_csv(&hm, create(&file("csv"))?)?;
            write(&file("pgm"), report::heatmap_pgm(&hm))?;
            write(&file("svg"), report::heatmap_svg(&hm, metric))?;
            gradients.push(json!({
                "group": group,
                "metric": metric.column(),
                "gradient_per_mm": hm.plane.gradient,
                "magnitude": hm.plane.gradient_magnitude(),
            }));
        }
    }
    write(&out.join("gradients.json"), serde_json::to_string_pretty(&gradients)? + "\n")?;
    write(&out.join("variation.json"), serde_json::to_string_pretty(&rep)? + "\n")
}

fn cmd_simulate(common: &Common) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let hash = cfg.config_hash()?;
    let ds = jjvar::wafer::simulate_dataset(&cfg.wafer, cfg.seed, &hash)?;
    let out = &common.out;
    fs::create_dir_all(out)?;
    ds.write_csv_file(&out.join("junctions.csv"))?;
    write(&out.join("config.json"), cfg.to_json()? + "\n")?;
    write_metadata(out, "simulate", Some(cfg.seed), Some(&hash), json!({ "grid": common.grid }))?;
    write_reports(&ds, out, common, OutlierPolicy::ThreeSigma, cfg.wafer.layout.substrate_size)?;
    eprintln!("wrote {} junctions to {}", ds.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(common: &Common, input: &Path, keep_outliers: bool) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    let substrate = cfg.wafer.layout.substrate_size;
    let opts = ReadOptions {
        strict: common.strict,
        allow_extra_columns: true,
        substrate_mm: Some(substrate),
    };
    let outcome = JunctionDataset::read_csv_file(input, &opts).with_context(|| format!("reading {}", input.display()))?;
    for row in &outcome.skipped {
        eprintln!("{}: skipped line {}: {}", input.display(), row.line, row.msg);
    }
    let out = &common.out;
    fs::create_dir_all(out)?;
    let policy = if keep_outliers { OutlierPolicy::Keep } else { OutlierPolicy::ThreeSigma };
    let bytes = fs::read(input)?;
    write_metadata(
        out,
        "analyze",
        None,
        None,
        json!({
            "input": input.display().to_string(),
            "input_sha256": jjvar::config::sha256_hex(&bytes),
            "skipped_rows": outcome.skipped,
            "grid": common.grid,
            "outlier_policy": policy,
        }),
    )?;
    write_reports(&outcome.dataset, out, common, policy, substrate)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_repro(common: &Common, id: &str) -> Result<ExitCode> {
    let id: ExperimentId = id.parse()?;
    let seed = common.seed.unwrap_or(0);
    let cmp = experiments::run(id, seed)?;
    let out = &common.out;
    fs::create_dir_all(out)?;
    let text = cmp.to_text();
    write(&out.join(format!("{id}.txt")), &text)?;
    cmp.write_csv(create(&out.join(format!("{id}.csv")))?)?;
    write_metadata(out, "repro", Some(seed), None, json!({ "experiment": id.as_str() }))?;
    print!("{text}");
    Ok(if cmp.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_psf(common: &Common, electrons: u64, energy: f64, substrate: Substrate) -> Result<ExitCode> {
    if electrons < MIN_FIT_ELECTRONS {
        bail!("--electrons must be >= {MIN_FIT_ELECTRONS} for a stable fit, got {electrons}");
    }
    let seed = common.seed.unwrap_or(0);
    let mut stack = mcpsf::default_stack();
    if let Substrate::Ge = substrate {
        *stack.last_mut().expect("stack has a substrate") = MaterialLayer::germanium();
    }
    let beam = BeamConfig::new(energy, electrons, seed);
    let hist = mcpsf::simulate_psf(&stack, &beam)?;
    let out = &common.out;
    fs::create_dir_all(out)?;
    hist.write_csv(create(&out.join("psf_histogram.csv"))?)?;
    write_metadata(out, "psf", Some(seed), None, json!({ "beam": beam, "stack": stack }))?;
    let fit = mcpsf::fit_double_gaussian(&hist).context("double-Gaussian fit failed; histogram written")?;
    let doc = json!({
        "psf": fit.psf,
        "scale_kev": fit.scale,
        "cost": fit.cost,
        "bins_used": fit.bins_used,
        "resist_energy_kev": hist.resist_energy(),
        "escaped_energy_kev": hist.escaped_energy,
        "layer_energy_kev": hist.layer_energy,
    });
    write(&out.join("psf.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    println!(
        "alpha {:.4} um  beta {:.3} um  eta {:.4}",
        fit.psf.alpha_fwd, fit.psf.beta_back, fit.psf.eta
    );
    Ok(ExitCode::SUCCESS)
}

fn read_layout(path: &Path) -> Result<Layout> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let layout = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Layout::read_csv(file)?,
        _ => Layout::read_json(file)?,
    };
    Ok(layout)
}

fn cmd_litho(common: &Common, layout_path: Option<&Path>) -> Result<ExitCode> {
    let preset = common.preset.resist();
    let layout = match layout_path {
        Some(p) => read_layout(p)?,
        None => Layout::reference(),
    };
    let feature = Region::from(layout.feature);
    let increase = litho::backscatter_increase(&layout, &preset.psf, feature)?;
    let nominal_nm = layout.feature.width() * 1e3;
    let bias = litho::linewidth_bias(nominal_nm, &layout, &preset)?;
    let (cx, cy) = layout.feature.center();
    let window = Region { x0: cx - 1.0, y0: cy - 1.0, x1: cx + 1.0, y1: cy + 1.0 };
    let (nx, ny) = common.grid;
    let map = litho::dose_map(&layout.rects(), &preset.psf, window, nx.max(2), ny.max(2))?;

    let out = &common.out;
    fs::create_dir_all(out)?;
    map.write_csv(create(&out.join("dose_map.csv"))?)?;
    layout.write_csv(create(&out.join("layout.csv"))?)?;
    let doc = json!({
        "preset": preset,
        "backscatter_increase_percent": increase,
        "nominal_width_nm": nominal_nm,
        "linewidth_bias_nm": bias,
    });
    write(&out.join("litho.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    write_metadata(out, "litho", None, None, json!({ "preset": preset.name, "grid": common.grid }))?;
    println!(
        "{}: backscatter increase {increase:.2}%  linewidth bias {bias:+.2} nm",
        preset.name
    );
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    configure_threads()?;
    let c = &cli.common;
    match &cli.command {
        Command::Simulate => cmd_simulate(c),
        Command::Analyze { input, keep_outliers } => cmd_analyze(c, input, *keep_outliers),
        Command::Repro { id } => cmd_repro(c, id),
        Command::Psf { electrons, energy, substrate } => cmd_psf(c, *electrons, *energy, *substrate),
        Command::Litho { layout } => cmd_litho(c, layout.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
