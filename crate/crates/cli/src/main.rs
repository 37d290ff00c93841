//! `evnet`: run small DAG networks conventionally or as event networks over
//! synthetic or recorded video, and report operation counts, agreement
//! metrics, and per-layer cost profiles as CSV/JSON.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use evnet_core::engine::{
    build_agreement_report, run_conventional, run_event, ConventionalRun, EventRun,
};
use evnet_core::event::{consistency_check, convert_to_event_excluding, EventGraph, EventNodeKind};
use evnet_core::graph::NetworkGraph;
use evnet_core::io;
use evnet_core::policy::{PolicyConfig, PolicyKind};
use evnet_core::report;
use evnet_core::scene::{scene_generate, SceneSpec};
use evnet_core::tensor::DenseTensor;

#[derive(Parser)]
#[command(name = "evnet", version, about = "Dual-mode (dense / event) network runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run conventional and/or event mode over a video and write traces,
    /// agreement metrics, and a JSON summary.
    Run(RunArgs),
    /// Re-run event mode over a list of thresholds or chunk sizes and write
    /// one summary row per point.
    Sweep(SweepArgs),
    /// Build the per-layer-depth cost profile from a pair of trace files.
    LayerReport(LayerReportArgs),
    /// Generate a synthetic scene and write it as a video file.
    GenScene(GenSceneArgs),
    /// Convert a network to event form and dump the inserted state layers.
    Convert(ConvertArgs),
    /// Initialize on the first frame, run the video, and check internal
    /// consistency after every frame.
    ConsistencyCheck(ConsistencyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Conv,
    Event,
    Both,
}

#[derive(Args)]
struct PolicyArgs {
    /// Transmission policy kind: exact_h0, threshold, chunked_spatial, or
    /// chunked_channel.
    #[arg(long, default_value = "threshold")]
    policy: String,
    /// Base threshold h.
    #[arg(long, default_value_t = 0.0)]
    h: f32,
    /// Spatial chunk extents (rows cols) for chunked_spatial.
    #[arg(long, num_args = 2, value_names = ["ROWS", "COLS"])]
    chunk: Option<Vec<usize>>,
    /// JSON file mapping layer id to per-channel threshold scales gamma
    /// (h_i = h / gamma_c).
    #[arg(long)]
    gamma_file: Option<PathBuf>,
    /// JSON policy document {"policy", "h", "chunk", "gamma_file"};
    /// overrides the individual flags.
    #[arg(long)]
    policy_json: Option<PathBuf>,
}

impl PolicyArgs {
    fn resolve(&self) -> Result<(PolicyConfig, HashMap<String, Vec<f32>>)> {
        let (kind_name, h, chunk, gamma_path) = if let Some(path) = &self.policy_json {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading policy file {}", path.display()))?;
            let doc: serde_json::Value = serde_json::from_str(&text)?;
            let kind = doc
                .get("policy")
                .and_then(|v| v.as_str())
                .ok_or_else(|| anyhow!("policy file must set \"policy\""))?
                .to_string();
            let h = doc.get("h").and_then(|v| v.as_f64()).unwrap_or(0.0) as f32;
            let chunk = doc.get("chunk").and_then(|v| v.as_array()).map(|arr| {
                arr.iter().filter_map(|v| v.as_u64().map(|u| u as usize)).collect::<Vec<_>>()
            });
            let gamma = doc
                .get("gamma_file")
                .and_then(|v| v.as_str())
                .map(|s| path.parent().unwrap_or(Path::new(".")).join(s));
            (kind, h, chunk, gamma)
        } else {
            (self.policy.clone(), self.h, self.chunk.clone(), self.gamma_file.clone())
        };

        let kind = PolicyKind::parse(&kind_name)
            .ok_or_else(|| anyhow!("unknown policy kind '{kind_name}'"))?;
        let mut cfg = match kind {
            PolicyKind::ExactH0 => PolicyConfig::exact(),
            PolicyKind::Threshold => PolicyConfig::threshold(h),
            PolicyKind::ChunkedSpatial => {
                let chunk = chunk
                    .as_ref()
                    .filter(|c| c.len() == 2)
                    .ok_or_else(|| anyhow!("chunked_spatial requires --chunk ROWS COLS"))?;
                PolicyConfig::chunked_spatial(h, (chunk[0], chunk[1]))
            }
            PolicyKind::ChunkedChannel => PolicyConfig::chunked_channel(h),
        };
        if kind == PolicyKind::Threshold && h == 0.0 {
            cfg = PolicyConfig::exact();
        }
        cfg.validate()?;

        let mut gamma_map = HashMap::new();
        if let Some(path) = gamma_path {
            let text = fs::read_to_string(&path)
                .with_context(|| format!("reading gamma file {}", path.display()))?;
            gamma_map = serde_json::from_str(&text)?;
        }
        Ok((cfg, gamma_map))
    }

    fn describe(&self, cfg: &PolicyConfig) -> serde_json::Value {
        json!({
            "kind": cfg.kind.name(),
            "h": f32_json(cfg.h),
            "chunk": [cfg.chunk.0, cfg.chunk.1],
            "effective_chunk_threshold": f32_json(cfg.effective_chunk_threshold()),
        })
    }
}

#[derive(Args, Clone)]
struct ConvertOpts {
    /// Layer ids excluded from conversion; they run conventionally inside
    /// the event network (comma-separated or repeated).
    #[arg(long, value_delimiter = ',')]
    exclude: Vec<String>,
}

#[derive(Args)]
struct VideoSource {
    /// Recorded video file (EVTV).
    #[arg(long, conflicts_with = "scene")]
    video: Option<PathBuf>,
    /// Scene specification (JSON) to synthesize.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Override the frame count (truncates a video, resizes a scene).
    #[arg(long)]
    frames: Option<usize>,
    /// Seed for scene synthesis.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl VideoSource {
    fn load(&self) -> Result<(Vec<DenseTensor>, bool)> {
        let mut frames = match (&self.video, &self.scene) {
            (Some(path), None) => io::read_video_file(path)
                .with_context(|| format!("reading video {}", path.display()))?,
            (None, Some(path)) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading scene spec {}", path.display()))?;
                let mut spec: SceneSpec =
                    serde_json::from_str(&text).context("scene spec is not valid JSON")?;
                if let Some(n) = self.frames {
                    spec.frames = n;
                }
                scene_generate(&spec, self.seed)?
            }
            _ => bail!("exactly one of --video or --scene is required"),
        };
        let synthesized = self.scene.is_some();
        if let Some(n) = self.frames {
            if n == 0 || n > frames.len() {
                bail!("--frames {n} out of range for {} available frames", frames.len());
            }
            frames.truncate(n);
        }
        if frames.is_empty() {
            bail!("video has no frames");
        }
        Ok((frames, synthesized))
    }
}

#[derive(Args)]
struct RunArgs {
    /// Graph document (JSON).
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    source: VideoSource,
    #[arg(long, value_enum, default_value_t = Mode::Both)]
    mode: Mode,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    convert_opts: ConvertOpts,
    /// Reset every gate's memory d after each frame (forgetful mode).
    #[arg(long)]
    ablate_memory: bool,
    /// Output directory; file names are fixed.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    source: VideoSource,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Comma-separated thresholds, e.g. "0,0.01,0.05,0.1".
    #[arg(long, conflicts_with = "chunk_list")]
    h_list: Option<String>,
    /// Comma-separated square chunk sides, e.g. "1,2,4,8"; thresholds use
    /// the default side-length scaling of the base --h.
    #[arg(long)]
    chunk_list: Option<String>,
    #[command(flatten)]
    convert_opts: ConvertOpts,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct LayerReportArgs {
    /// Conventional-mode trace CSV.
    #[arg(long)]
    conv_trace: PathBuf,
    /// Event-mode trace CSV.
    #[arg(long)]
    event_trace: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenSceneArgs {
    /// Scene specification (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output video file (EVTV).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    frames: Option<usize>,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    convert_opts: ConvertOpts,
    /// Write the event-graph dump here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConsistencyArgs {
    #[arg(long)]
    graph: PathBuf,
    #[command(flatten)]
    source: VideoSource,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    convert_opts: ConvertOpts,
    /// Violation tolerance.
    #[arg(long, default_value_t = 1e-4)]
    tol: f32,
    #[arg(long)]
    ablate_memory: bool,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::LayerReport(args) => cmd_layer_report(args),
        Command::GenScene(args) => cmd_gen_scene(args),
        Command::Convert(args) => cmd_convert(args),
        Command::ConsistencyCheck(args) => cmd_consistency_check(args),
    }
}

/// JSON number via the shortest f32 representation, so 0.05f32 prints as
/// 0.05 rather than its long f64 expansion.
fn f32_json(v: f32) -> serde_json::Value {
    serde_json::Value::from(v.to_string().parse::<f64>().unwrap_or(v as f64))
}

fn load_graph(path: &Path) -> Result<NetworkGraph> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading graph {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(NetworkGraph::parse_document(&text, base)?)
}

/// Staged output writer: everything lands in `<name>.tmp` first and is
/// renamed only after every file was written, so a failing run never leaves
/// partial outputs behind.
struct OutDir {
    dir: PathBuf,
    staged: Vec<(PathBuf, Vec<u8>)>,
}

impl OutDir {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), staged: Vec::new() })
    }

    fn stage(&mut self, name: &str, bytes: Vec<u8>) {
        self.staged.push((self.dir.join(name), bytes));
    }

    fn commit(self) -> Result<Vec<PathBuf>> {
        let mut tmp_paths = Vec::new();
        for (path, bytes) in &self.staged {
            let tmp = path.with_extension(format!(
                "{}.tmp",
                path.extension().and_then(|e| e.to_str()).unwrap_or("out")
            ));
            fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
            tmp_paths.push(tmp);
        }
        let mut finals = Vec::new();
        for ((path, _), tmp) in self.staged.iter().zip(&tmp_paths) {
            fs::rename(tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
            finals.push(path.clone());
        }
        Ok(finals)
    }
}

fn convert(
    graph: &NetworkGraph,
    cfg: &PolicyConfig,
    gamma: &HashMap<String, Vec<f32>>,
    opts: &ConvertOpts,
) -> Result<EventGraph> {
    let excluded: std::collections::HashSet<String> = opts.exclude.iter().cloned().collect();
    Ok(convert_to_event_excluding(graph, cfg, gamma, &excluded)?)
}

fn run_event_mode(eg: &EventGraph, video: &[DenseTensor], ablate: bool) -> Result<EventRun> {
    let state = evnet_core::event::initialize(eg, &video[0])?;
    Ok(run_event(eg, state, video, ablate)?)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let graph = load_graph(&args.graph)?;
    let (video, synthesized) = args.source.load()?;
    let (cfg, gamma) = args.policy.resolve()?;
    let mut out = OutDir::new(&args.out_dir)?;

    let conv: Option<ConventionalRun> = if args.mode != Mode::Event {
        let run = run_conventional(&graph, &video)?;
        let names: Vec<String> = graph.nodes().iter().map(|n| n.spec.id.clone()).collect();
        out.stage("trace_conv.csv", report::trace_csv(&names, &run.traces)?.into_bytes());
        Some(run)
    } else {
        None
    };

    let mut event: Option<(EventGraph, EventRun)> = None;
    if args.mode != Mode::Conv {
        let eg = convert(&graph, &cfg, &gamma, &args.convert_opts)?;
        let run = run_event_mode(&eg, &video, args.ablate_memory)?;
        out.stage("trace_event.csv", report::trace_csv(&eg.node_names(), &run.traces)?.into_bytes());
        event = Some((eg, run));
    }

    let conv_macs = conv.as_ref().map(|r| r.traces.iter().map(|t| t.total_macs()).sum::<u64>());
    let agreement_report = match (&event, &conv) {
        (Some((eg, run)), Some(conv_run)) => {
            let report = build_agreement_report(eg, run, conv_run)?;
            out.stage("agreement.csv", report::agreement_csv(&report.per_frame).into_bytes());
            Some(report)
        }
        _ => None,
    };

    if synthesized {
        let mut bytes = Vec::new();
        io::write_video(&mut bytes, &video)?;
        out.stage("video.evtv", bytes);
    }

    let mode_name = match args.mode {
        Mode::Conv => "conv",
        Mode::Event => "event",
        Mode::Both => "both",
    };
    let summary = report::summary_json(
        mode_name,
        video.len(),
        args.source.seed,
        Some(args.policy.describe(&cfg)),
        conv_macs,
        agreement_report.as_ref(),
    );
    out.stage(
        "summary.json",
        format!("{}\n", serde_json::to_string_pretty(&summary)?).into_bytes(),
    );

    for path in out.commit()? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| anyhow!("bad {what} entry '{s}'")))
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let graph = load_graph(&args.graph)?;
    let (video, _) = args.source.load()?;
    let (base_cfg, gamma) = args.policy.resolve()?;

    let points: Vec<(String, PolicyConfig)> = match (&args.h_list, &args.chunk_list) {
        (Some(list), None) => parse_list::<f32>(list, "threshold")?
            .into_iter()
            .map(|h| {
                let cfg = if h == 0.0 { PolicyConfig::exact() } else { PolicyConfig::threshold(h) };
                (format!("h={h}"), cfg)
            })
            .collect(),
        (None, Some(list)) => parse_list::<usize>(list, "chunk side")?
            .into_iter()
            .map(|side| {
                let cfg = if side <= 1 {
                    PolicyConfig::threshold(base_cfg.h)
                } else {
                    PolicyConfig::chunked_spatial(base_cfg.h, (side, side))
                };
                (format!("chunk={side}x{side}"), cfg)
            })
            .collect(),
        _ => bail!("exactly one of --h-list or --chunk-list is required"),
    };
    if points.len() < 2 {
        bail!("a sweep needs at least 2 points, got {}", points.len());
    }

    let conv = run_conventional(&graph, &video)?;

    // one executor per sweep point, merged in input order
    let rows: Vec<Result<report::SweepRow>> = points
        .par_iter()
        .map(|(label, cfg)| {
            let eg = convert(&graph, cfg, &gamma, &args.convert_opts)?;
            let run = run_event_mode(&eg, &video, false)?;
            let rep = build_agreement_report(&eg, &run, &conv)?;
            let n = rep.per_frame.len().max(1) as f64;
            Ok(report::SweepRow {
                label: label.clone(),
                savings_ratio: rep.savings_ratio,
                savings_ratio_with_init: rep.savings_ratio_with_init,
                event_macs: rep.overhead.event_macs,
                conventional_macs: rep.overhead.conventional_macs,
                mean_rel_l2: rep.per_frame.iter().map(|m| m.rel_l2).sum::<f64>() / n,
                max_linf: rep.per_frame.iter().map(|m| m.linf).fold(0.0f64, f64::max),
                mean_psnr: rep.per_frame.iter().map(|m| m.psnr).sum::<f64>() / n,
                arith_ratio: rep.overhead.arith_ratio,
                mem_ratio: rep.overhead.mem_ratio,
            })
        })
        .collect();
    let rows: Vec<report::SweepRow> = rows.into_iter().collect::<Result<_>>()?;

    let mut out = OutDir::new(&args.out_dir)?;
    out.stage("sweep.csv", report::sweep_csv(&rows).into_bytes());
    for path in out.commit()? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_layer_report(args: LayerReportArgs) -> Result<()> {
    let conv = report::parse_trace_csv(
        &fs::read_to_string(&args.conv_trace)
            .with_context(|| format!("reading {}", args.conv_trace.display()))?,
    )?;
    let event = report::parse_trace_csv(
        &fs::read_to_string(&args.event_trace)
            .with_context(|| format!("reading {}", args.event_trace.display()))?,
    )?;
    let rep = report::layer_report(&conv, &event)?;
    let mut out = OutDir::new(&args.out_dir)?;
    out.stage("layer_report.csv", report::layer_report_csv(&rep).into_bytes());
    out.stage("timeseries.csv", report::timeseries_csv(&rep).into_bytes());
    for path in out.commit()? {
        println!("wrote {}", path.display());
    }
    println!(
        "depth-third mean event/conventional MAC ratios: shallow {:.4}, middle {:.4}, deep {:.4}",
        rep.group_mean_ratio(0),
        rep.group_mean_ratio(1),
        rep.group_mean_ratio(2)
    );
    Ok(())
}

fn cmd_gen_scene(args: GenSceneArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec)
        .with_context(|| format!("reading scene spec {}", args.spec.display()))?;
    let mut spec: SceneSpec = serde_json::from_str(&text)?;
    if let Some(n) = args.frames {
        spec.frames = n;
    }
    let frames = scene_generate(&spec, args.seed)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    io::write_video_file(&args.out, &frames)?;
    println!("wrote {} ({} frames)", args.out.display(), frames.len());
    Ok(())
}

fn cmd_convert(args: ConvertArgs) -> Result<()> {
    let graph = load_graph(&args.graph)?;
    let (cfg, gamma) = args.policy.resolve()?;
    let eg = convert(&graph, &cfg, &gamma, &args.convert_opts)?;

    let nodes: Vec<serde_json::Value> = eg
        .nodes()
        .iter()
        .map(|n| {
            let kind = match &n.kind {
                EventNodeKind::Compute { base, .. } => {
                    eg.base().node(*base).spec.kind.name().to_string()
                }
                other => other.kind_name().to_string(),
            };
            let mut doc = json!({
                "name": n.name,
                "kind": kind,
                "inputs": n.inputs.iter().map(|&i| eg.node(i).name.clone()).collect::<Vec<_>>(),
                "shape": n.shape,
            });
            if let EventNodeKind::Compute { excluded: true, .. } = &n.kind {
                doc["excluded"] = json!(true);
            }
            doc
        })
        .collect();
    let placements: Vec<serde_json::Value> = eg
        .placements()
        .iter()
        .map(|p| json!({"from": p.from, "to": p.to, "inserted": p.inserted}))
        .collect();
    let doc = json!({
        "policy": args.policy.describe(&cfg),
        "nodes": nodes,
        "placements": placements,
    });
    let text = format!("{}\n", serde_json::to_string_pretty(&doc)?);
    match &args.out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_consistency_check(args: ConsistencyArgs) -> Result<()> {
    let graph = load_graph(&args.graph)?;
    let (video, _) = args.source.load()?;
    let (cfg, gamma) = args.policy.resolve()?;
    let eg = convert(&graph, &cfg, &gamma, &args.convert_opts)?;

    let state = evnet_core::event::initialize(&eg, &video[0])?;
    let mut violations = 0usize;
    for (node, v) in consistency_check(&eg, &state, args.tol)? {
        println!("after init: {node} violates by {v}");
        violations += 1;
    }

    let mut ex =
        evnet_core::engine::EventExecutor::new(&eg, state)?.with_ablation(args.ablate_memory);
    for (i, frame) in video.iter().enumerate() {
        ex.step(frame).with_context(|| format!("frame {i}"))?;
        for (node, v) in consistency_check(&eg, ex.state(), args.tol)? {
            println!("after frame {i}: {node} violates by {v}");
            violations += 1;
        }
    }
    if violations > 0 {
        bail!("{violations} consistency violations at tol {}", args.tol);
    }
    println!("consistent after {} frames (tol {})", video.len(), args.tol);
    Ok(())
}
