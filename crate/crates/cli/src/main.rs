use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use criteval::birdview::{birdview_data, render_svg, WeightKind};
use criteval::criticality::CriticalityConfig;
use criteval::metrics::{curve_csv, evaluate, ApStyle};
use criteval::model::{load_detections, load_ground_truth, DetectionSet, DEFAULT_MAX_RANGE};
use criteval::sweep::{compare_rankings, default_grid, evaluate_sweep, rank, ConfigGrid, Metric, SweepOptions, SweepTable};
use criteval::synthgen::{corrupt, gen_dataset, ErrorModel, ScenarioSpec, SplitMix64};

const THREADS_ENV: &str = "CRIT_EVAL_THREADS";

#[derive(Parser)]
#[command(name = "criteval", version, about = "Criticality-weighted evaluation of 3D object detectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// AP and AP_crit at one criticality configuration.
    Evaluate(EvaluateArgs),
    /// AP and AP_crit over a grid of configurations for several detectors.
    Sweep(SweepArgs),
    /// Detector rankings from a sweep table.
    Rank(RankArgs),
    /// Synthetic ground truth and simulated detections.
    Generate(GenerateArgs),
    /// Annotated bird's-eye view of one frame.
    Birdview(BirdviewArgs),
}

#[derive(Args)]
struct Caps {
    #[arg(long, default_value_t = 20.0)]
    dmax: f64,
    #[arg(long, default_value_t = 20.0)]
    rmax: f64,
    #[arg(long, default_value_t = 8.0)]
    tmax: f64,
}

impl Caps {
    fn config(&self) -> Result<CriticalityConfig> {
        Ok(CriticalityConfig::new(self.dmax, self.rmax, self.tmax)?)
    }
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Object classes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "car")]
    class: Vec<String>,
    /// Matching distance limits in meters, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4")]
    dist_limits: Vec<f64>,
    #[command(flatten)]
    caps: Caps,
    #[arg(long, default_value = "anchored")]
    ap_style: ApStyle,
    #[arg(long, default_value_t = DEFAULT_MAX_RANGE)]
    max_range: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    gt: PathBuf,
    /// Detector results as NAME=PATH; repeat for each detector.
    #[arg(long = "pred", value_parser = parse_named_path, required = true)]
    preds: Vec<(String, PathBuf)>,
    #[arg(long, default_value = "car")]
    class: String,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4")]
    dist_limits: Vec<f64>,
    /// `default` or a JSON file with `d_values`, `r_values`, `t_values`.
    #[arg(long, default_value = "default")]
    grid: String,
    #[arg(long, default_value = "anchored")]
    ap_style: ApStyle,
    #[arg(long, default_value_t = DEFAULT_MAX_RANGE)]
    max_range: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RankArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long, default_value = "ap_crit")]
    metric: Metric,
    /// Only cells of this class.
    #[arg(long)]
    class: Option<String>,
    /// Only cells with this distance limit.
    #[arg(long)]
    dist_limit: Option<f64>,
    /// Only this configuration, as D,R,T.
    #[arg(long, value_parser = parse_config)]
    config: Option<CriticalityConfig>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Scenario JSON, optionally with a `detectors` map of error models.
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the scenario seed; detector seeds are derived from it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BirdviewArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long)]
    frame: String,
    #[arg(long, default_value = "kappa")]
    weight: WeightKind,
    #[command(flatten)]
    caps: Caps,
    /// Only objects of this class.
    #[arg(long)]
    class: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MAX_RANGE)]
    max_range: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Deserialize)]
struct GenerateSpec {
    #[serde(flatten)]
    scenario: ScenarioSpec,
    #[serde(default)]
    detectors: BTreeMap<String, ErrorModel>,
}

fn parse_named_path(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got '{s}'")),
    }
}

fn parse_config(s: &str) -> Result<CriticalityConfig, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [d, r, t] => CriticalityConfig::new(d, r, t).map_err(|e| e.to_string()),
        _ => Err(format!("expected D,R,T, got '{s}'")),
    }
}

fn workers() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => bail!("{THREADS_ENV} must be a positive integer, got '{v}'"),
        },
        Err(_) => Ok(None),
    }
}

fn check_limits(limits: &[f64], max_range: f64) -> Result<()> {
    if limits.is_empty() || limits.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
        bail!("distance limits must be positive and finite, got {limits:?}");
    }
    if !(max_range.is_finite() && max_range > 0.0) {
        bail!("--max-range must be positive, got {max_range}");
    }
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("cannot create {}", path.display()))
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    check_limits(&args.dist_limits, args.max_range)?;
    let config = args.caps.config()?;
    let dataset = load_ground_truth(&args.gt)?;
    let detections = load_detections(&args.pred)?;
    let report = evaluate(
        &dataset,
        &detections,
        &args.class,
        &args.dist_limits,
        &config,
        args.ap_style,
        args.max_range,
    )?;
    if !report.ingest.unknown_frames.is_empty() {
        eprintln!(
            "warning: ignoring detections for {} frame(s) without ground truth: {}",
            report.ingest.unknown_frames.len(),
            report.ingest.unknown_frames.join(", ")
        );
    }
    create_dir(&args.out)?;
    write(&args.out.join("report.json"), &report.to_json())?;
    for e in &report.entries {
        let name = format!("curve_{}_l{}.csv", e.class_name, e.distance_limit);
        write(&args.out.join(name), &curve_csv(&e.curve))?;
    }
    println!("config {config}, {:?} AP", args.ap_style);
    print!("{}", report.summary_table());
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    check_limits(&args.dist_limits, args.max_range)?;
    let grid = if args.grid == "default" {
        default_grid()
    } else {
        let text = fs::read_to_string(&args.grid).with_context(|| format!("cannot read grid {}", args.grid))?;
        ConfigGrid::from_json(&text).with_context(|| format!("invalid grid {}", args.grid))?
    };
    let dataset = load_ground_truth(&args.gt)?;
    let mut detectors: BTreeMap<String, DetectionSet> = BTreeMap::new();
    for (name, path) in &args.preds {
        if detectors.insert(name.clone(), load_detections(path)?).is_some() {
            bail!("detector '{name}' given twice");
        }
    }
    let opts = SweepOptions {
        class_name: args.class,
        distance_limits: args.dist_limits,
        max_range: args.max_range,
        ap_style: args.ap_style,
        workers: workers()?,
    };
    let table = evaluate_sweep(&dataset, &detectors, &grid, &opts)?;
    let rankings = compare_rankings(&table)?;
    create_dir(&args.out)?;
    write(&args.out.join("sweep.csv"), &table.to_csv()?)?;
    write(
        &args.out.join("rankings.json"),
        &serde_json::to_string_pretty(&rankings).context("cannot serialize rankings")?,
    )?;
    println!(
        "{} detectors x {} limits x {} configurations = {} rows",
        detectors.len(),
        opts.distance_limits.len(),
        grid.len(),
        table.rows.len()
    );
    for s in &rankings.summary {
        println!(
            "{} l={}: AP_crit ranking differs from AP in {} of {} configurations",
            s.class_name, s.distance_limit, s.changed, s.configs
        );
    }
    Ok(())
}

fn run_rank(args: RankArgs) -> Result<()> {
    let table = SweepTable::load(&args.table)?;
    let mut shown = 0;
    for (class, l, config) in table.cells() {
        if args.class.as_ref().is_some_and(|c| *c != class)
            || args.dist_limit.is_some_and(|d| d != l)
            || args.config.is_some_and(|c| c != config)
        {
            continue;
        }
        let order = rank(&table, args.metric, &class, l, &config);
        println!("{class}\tl={l}\t{config}\t{}", order.join(" > "));
        shown += 1;
    }
    if shown == 0 {
        bail!("no cells of {} match the filters", args.table.display());
    }
    Ok(())
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec).with_context(|| format!("cannot read {}", args.spec.display()))?;
    let mut spec: GenerateSpec =
        serde_json::from_str(&text).with_context(|| format!("invalid scenario {}", args.spec.display()))?;
    if let Some(seed) = args.seed {
        spec.scenario.seed = seed;
    }
    let dataset = gen_dataset(&spec.scenario)?;
    create_dir(&args.out)?;
    write(&args.out.join("gt.json"), &dataset.to_json())?;
    let mut seeds = SplitMix64::new(spec.scenario.seed);
    for (name, model) in &spec.detectors {
        let dets = corrupt(&dataset, model, seeds.next_u64()).with_context(|| format!("detector '{name}'"))?;
        write(&args.out.join(format!("pred_{name}.json")), &dets.to_json())?;
    }
    println!(
        "{} frames, {} objects, {} detector(s) written to {}",
        dataset.frames.len(),
        dataset.object_count(),
        spec.detectors.len(),
        args.out.display()
    );
    Ok(())
}

fn run_birdview(args: BirdviewArgs) -> Result<()> {
    let config = args.caps.config()?;
    let dataset = load_ground_truth(&args.gt)?;
    let detections = match &args.pred {
        Some(p) => load_detections(p)?,
        None => DetectionSet::default(),
    };
    let Some(frame) = dataset.frame(&args.frame) else {
        bail!("frame '{}' not found in {}", args.frame, args.gt.display());
    };
    let data = birdview_data(
        frame,
        detections.for_frame(&frame.frame_id),
        &config,
        args.weight,
        args.class.as_deref(),
        args.max_range,
    );
    create_dir(&args.out)?;
    let stem = format!("{}_{}", frame.frame_id, args.weight.as_str());
    write(&args.out.join(format!("{stem}.svg")), &render_svg(&data))?;
    write(&args.out.join(format!("{stem}.json")), &data.to_json())?;
    println!("{} boxes written to {}", data.boxes.len(), args.out.join(format!("{stem}.svg")).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate(a) => run_evaluate(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Rank(a) => run_rank(a),
        Command::Generate(a) => run_generate(a),
        Command::Birdview(a) => run_birdview(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
