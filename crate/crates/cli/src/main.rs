//! `rps`: prioritised single-pixel-camera acquisition from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use rps_core::detection::DetectionScore;
use rps_core::imaging::{Image, RoIWindow};
use rps_core::io::{read_pgm, read_raw_f64, write_pgm16, write_pgm8, write_raw_f64};
use rps_core::metrics::MetricReport;
use rps_core::pipeline::{
    background_ssim, detect_only, ingest_scene, region_scores, run_baseline, run_pipeline, BandSpec, BaselineMethod,
    Interleave, RunConfig, SampleType,
};
use rps_core::rps::Ensemble;
use rps_core::verification::{
    check_expected_bound, check_refinement_bound, write_summary_csv, BoundInstance, BOUND_SLACK,
};
use rps_core::Error;

#[derive(Parser)]
#[command(
    name = "rps",
    version,
    about = "Region-prioritised compressive acquisition on a simulated single-pixel camera"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Low-resolution scan, detection and prioritised refinement.
    Run(ConfigArgs),
    /// Whole-scene reconstruction from the same budget.
    Baseline {
        #[arg(long, value_parser = kebab::<BaselineMethod>)]
        method: BaselineMethod,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Checks the refinement bound on small random instances.
    VerifyBound(BoundArgs),
    /// Low-resolution scan and detection only.
    Detect(ConfigArgs),
    /// Converts a graymap, raw float image or band cube into a normalized square scene.
    Ingest(IngestArgs),
    /// NMSE and SSIM of an estimate against a reference.
    Metrics(MetricsArgs),
}

/// A config file plus one override flag per config key.
#[derive(Args, Default)]
struct ConfigArgs {
    /// JSON config; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    scene_side: Option<usize>,
    #[arg(long, value_parser = kebab::<Ensemble>)]
    ensemble: Option<Ensemble>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    lowres_count: Option<usize>,
    #[arg(long)]
    lowres_macro: Option<usize>,
    #[arg(long)]
    ri_fraction: Option<f64>,
    #[arg(long)]
    normalized_ri: Option<bool>,
    #[arg(long)]
    max_regions: Option<usize>,
    #[arg(long)]
    merge_radius: Option<usize>,
    #[arg(long, value_parser = kebab::<DetectionScore>)]
    detection_score: Option<DetectionScore>,
    #[arg(long)]
    min_side: Option<usize>,
    #[arg(long)]
    max_side: Option<usize>,
    #[arg(long)]
    min_relative_score: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    baseline_iters: Option<usize>,
    #[arg(long)]
    continuation_rounds: Option<usize>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    lowres_kappa: Option<f64>,
    #[arg(long)]
    wavelet_levels: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Output directory; defaults to `$RPS_OUTPUT_ROOT/<subcommand>`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

macro_rules! apply {
    ($cfg:ident, $args:ident, $($f:ident),*) => {
        $(if let Some(v) = $args.$f.clone() { $cfg.$f = v; })*
    };
}

impl ConfigArgs {
    fn resolve(&self) -> rps_core::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_json_file(p)?,
            None => RunConfig::default(),
        };
        apply!(
            cfg,
            self,
            scene_side,
            ensemble,
            budget,
            lowres_count,
            lowres_macro,
            normalized_ri,
            max_regions,
            merge_radius,
            detection_score,
            min_side,
            max_side,
            min_relative_score,
            max_iters,
            baseline_iters,
            continuation_rounds,
            beta1,
            beta2,
            tol,
            lowres_kappa,
            wavelet_levels,
            seed,
            noise_sigma
        );
        if self.input.is_some() {
            cfg.input = self.input.clone();
        }
        if self.ri_fraction.is_some() {
            cfg.ri_fraction = self.ri_fraction;
        }
        if self.output_dir.is_some() {
            cfg.output_dir = self.output_dir.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct BoundArgs {
    /// Random instances per weight.
    #[arg(long, default_value_t = 100)]
    instances: usize,
    /// Unknowns per instance.
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 6)]
    coarse_rows: usize,
    #[arg(long, default_value_t = 6)]
    refine_rows: usize,
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.01, 0.1, 1.0])]
    alpha: Vec<f64>,
    /// Monte-Carlo draws of the refinement rows per weight; 0 skips the expectation check.
    #[arg(long, default_value_t = 200)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    input: PathBuf,
    /// `.pgm` (16-bit) or `.f64`.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 256)]
    side: usize,
    /// Treat the input as a headerless cube with this JSON band layout.
    #[arg(long)]
    bands: Option<PathBuf>,
    #[arg(long, conflicts_with = "bands", requires_all = ["width", "band_count", "sample", "interleave"])]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    band_count: Option<usize>,
    #[arg(long, value_parser = kebab::<SampleType>)]
    sample: Option<SampleType>,
    #[arg(long, value_parser = kebab::<Interleave>)]
    interleave: Option<Interleave>,
    #[arg(long, default_value_t = 0)]
    header_bytes: usize,
}

#[derive(Args)]
struct MetricsArgs {
    estimate: PathBuf,
    reference: PathBuf,
    /// Region as `row,col,side`; repeat for several.
    #[arg(long = "window", value_parser = parse_window)]
    windows: Vec<RoIWindow>,
    /// Also write the report here.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn kebab<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_owned())).map_err(|e| e.to_string())
}

fn parse_window(s: &str) -> Result<RoIWindow, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [r, c, side] = parts[..] else {
        return Err(format!("expected row,col,side, got {s:?}"));
    };
    RoIWindow::with_macro(r, c, side, 1, 0).map_err(|e| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::BudgetInfeasible(_) => 3,
        Error::Numerical(_) | Error::NonFinite(_) => 4,
        _ => 1,
    }
}

fn print_json<T: Serialize>(v: &T) -> rps_core::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn read_image(path: &Path) -> rps_core::Result<Image> {
    if path.extension().is_some_and(|e| e == "f64") {
        read_raw_f64(path)
    } else {
        read_pgm(path)
    }
}

fn write_image(path: &Path, img: &Image) -> rps_core::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("f64") => write_raw_f64(path, img),
        Some("pgm") => write_pgm16(path, img),
        Some("pgm8") => write_pgm8(path, img),
        _ => Err(Error::Config(format!(
            "{}: output must end in .pgm, .pgm8 or .f64",
            path.display()
        ))),
    }
}

fn run(cli: Cli) -> rps_core::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let out = cfg.resolve_output_dir("run");
            let report = run_pipeline(&cfg, &out)?;
            let s = &report.summary;
            assert!(s.spent <= s.budget, "ledger overran the budget");
            eprintln!("wrote {}", out.display());
            print_json(s)
        }
        Command::Baseline { method, config } => {
            let cfg = config.resolve()?;
            let out = cfg.resolve_output_dir("baseline");
            let report = run_baseline(&cfg, method, &out)?;
            eprintln!("wrote {}", out.display());
            print_json(&report.summary)
        }
        Command::Detect(args) => {
            let cfg = args.resolve()?;
            let out = cfg.resolve_output_dir("detect");
            let (lowres, windows) = detect_only(&cfg)?;
            std::fs::create_dir_all(out.join("images"))?;
            std::fs::create_dir_all(out.join("logs"))?;
            write_pgm16(&out.join("images/lowres.pgm"), &lowres)?;
            std::fs::write(
                out.join("logs/detections.json"),
                serde_json::to_string_pretty(&windows)? + "\n",
            )?;
            eprintln!("wrote {}", out.display());
            print_json(&windows)
        }
        Command::Ingest(args) => {
            let spec = match (&args.bands, args.height) {
                (Some(p), _) => {
                    let text = std::fs::read_to_string(p)?;
                    Some(
                        serde_json::from_str::<BandSpec>(&text)
                            .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
                    )
                }
                (None, Some(height)) => Some(BandSpec {
                    height,
                    width: args.width.expect("clap requires width"),
                    bands: args.band_count.expect("clap requires band-count"),
                    sample: args.sample.expect("clap requires sample"),
                    interleave: args.interleave.expect("clap requires interleave"),
                    header_bytes: args.header_bytes,
                }),
                (None, None) => None,
            };
            if !args.side.is_power_of_two() {
                return Err(Error::Config(format!("side must be a power of two, got {}", args.side)));
            }
            let img = ingest_scene(&args.input, spec.as_ref(), args.side)?;
            write_image(&args.output, &img)
        }
        Command::Metrics(args) => {
            let (est, truth) = (read_image(&args.estimate)?, read_image(&args.reference)?);
            let windows: Vec<RoIWindow> = args
                .windows
                .iter()
                .enumerate()
                .map(|(i, w)| RoIWindow {
                    label: i as u32 + 1,
                    ..*w
                })
                .collect();
            let report = serde_json::json!({
                "scene": MetricReport::compute(&est, &truth)?,
                "regions": region_scores(&est, &truth, &windows)?,
                "background_ssim": if windows.is_empty() { None } else { background_ssim(&est, &truth, &windows).ok() },
            });
            if let Some(p) = &args.output {
                std::fs::write(p, serde_json::to_string_pretty(&report)? + "\n")?;
            }
            print_json(&report)
        }
        Command::VerifyBound(args) => verify_bound(&args),
    }
}

#[derive(Serialize)]
struct BoundRow {
    alpha: f64,
    instance: usize,
    lhs: f64,
    rhs: f64,
    holds: bool,
}

fn verify_bound(args: &BoundArgs) -> rps_core::Result<()> {
    if args.instances == 0 || args.n == 0 || args.alpha.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::Config(
            "instances and n must be positive and alpha non-negative".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (k, &alpha) in args.alpha.iter().enumerate() {
        let base_seed = args.seed.wrapping_add(1_000_003 * k as u64);
        for i in 0..args.instances {
            let inst = BoundInstance::random(args.n, args.coarse_rows, args.refine_rows, alpha, base_seed + i as u64);
            let c = check_refinement_bound(&inst)?;
            rows.push(BoundRow {
                alpha,
                instance: i,
                lhs: c.lhs(),
                rhs: c.rhs,
                holds: c.holds,
            });
        }
        if args.draws > 0 {
            let base = BoundInstance::random(args.n, args.coarse_rows, args.refine_rows, alpha, base_seed);
            summaries.push(check_expected_bound(
                &base,
                args.refine_rows,
                args.draws,
                base_seed ^ 0x5eed,
            )?);
        }
    }
    let held = rows.iter().filter(|r| r.holds).count();
    let out = args
        .output_dir
        .clone()
        .unwrap_or_else(|| RunConfig::default().resolve_output_dir("verify-bound"));
    std::fs::create_dir_all(out.join("metrics"))?;
    let text = std::iter::once("alpha,instance,lhs,rhs,holds".to_owned())
        .chain(
            rows.iter()
                .map(|r| format!("{},{},{:e},{:e},{}", r.alpha, r.instance, r.lhs, r.rhs, r.holds)),
        )
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(out.join("metrics/bound-instances.csv"), text + "\n")?;
    write_summary_csv(&out.join("metrics/bound-expectation.csv"), &summaries)?;
    println!("bound holds on {held}/{} instances (slack {BOUND_SLACK:e})", rows.len());
    for s in &summaries {
        println!(
            "alpha {}: E[lhs] {:.4e} <= E[rhs] {:.4e} + 2se ({:.2e}): {}",
            s.alpha,
            s.mean_lhs,
            s.mean_rhs,
            s.std_error,
            if s.passes { "pass" } else { "FAIL" }
        );
    }
    if held < rows.len() || summaries.iter().any(|s| !s.passes) {
        return Err(Error::Numerical("the refinement bound was violated".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
