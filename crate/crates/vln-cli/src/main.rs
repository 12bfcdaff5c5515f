//! `vln` — command-line front end for the evaluation harness.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use vln::analysis::{diagnose, measure_access_latency, replay_episode, taxonomy_report};
use vln::models::ScriptedModel;
use vln::registry::Registry;
use vln::runner::{read_log, run, RunConfig, TrajectoryRecord};
use vln::tasks::{describe_benchmark, load_split, stratified_sample, Granularity, SamplingPlan};
use vln::world::{annotate_world, default_asset_root, load_world, AnnotateOptions};

#[derive(Parser)]
#[command(name = "vln", version, about = "Simulator-free VLN evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an evaluation: one trajectory record per episode plus a summary.
    Run {
        /// Path to the run configuration file (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Stratified-sample a benchmark from a split pool.
    Sample {
        /// Path to the sampling plan file (JSON).
        #[arg(long)]
        plan: PathBuf,
    },
    /// Recompute metrics from a trajectory log.
    Score {
        /// Path to a trajectories.jsonl file.
        #[arg(long)]
        log: PathBuf,
        #[command(flatten)]
        roots: RootOverrides,
    },
    /// Annotate a scan with marker captions and viewpoint summaries.
    Annotate {
        /// Scan id under the asset root.
        #[arg(long)]
        scan: String,
        /// Asset root (defaults to $VLN_ASSET_ROOT).
        #[arg(long)]
        asset_root: Option<PathBuf>,
        /// Re-annotate nodes that already carry annotations.
        #[arg(long)]
        overwrite: bool,
        /// Answer every caption/summary request from this fixed text file
        /// (one response per line) instead of a remote model.
        #[arg(long)]
        scripted: Option<PathBuf>,
        /// Remote model name for the chat backend.
        #[arg(long, default_value = "default")]
        model: String,
    },
    /// Render one episode's static replay report.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        episode: String,
        /// Output HTML path (defaults next to the log).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        roots: RootOverrides,
    },
    /// Post-hoc analysis: taxonomy plus per-episode reports.
    Analyze {
        #[arg(long)]
        log: PathBuf,
        /// Output directory (defaults to `reports/` next to the log).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        roots: RootOverrides,
    },
    /// Generate a synthetic asset+split tree.
    Synth {
        /// Path to a synth spec file (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Output directory; receives assets/ and data/ subtrees.
        #[arg(long)]
        out: PathBuf,
        /// Split name to write.
        #[arg(long, default_value = "dev")]
        split: String,
        /// Skip writing placeholder image files.
        #[arg(long)]
        no_images: bool,
    },
    /// Measure observation-access latency on a scan.
    Bench {
        #[arg(long)]
        scan: String,
        #[arg(long)]
        asset_root: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Optional root overrides for log-reading commands; by default they come
/// from the `config.json` written next to the log at run time.
#[derive(Args)]
struct RootOverrides {
    #[arg(long)]
    asset_root: Option<PathBuf>,
    #[arg(long)]
    data_root: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    split: Option<String>,
}

/// Sampling plan file: where the pool comes from and how to sample it.
#[derive(serde::Deserialize)]
struct PlanFile {
    task: String,
    split: String,
    data_root: PathBuf,
    asset_root: PathBuf,
    seed: u64,
    plan: SamplingPlan,
    /// Output split file; its parent directories are created.
    out: PathBuf,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Sample { plan } => cmd_sample(&plan),
        Command::Score { log, roots } => cmd_score(&log, &roots),
        Command::Annotate {
            scan,
            asset_root,
            overwrite,
            scripted,
            model,
        } => cmd_annotate(&scan, asset_root, overwrite, scripted, &model),
        Command::Replay {
            log,
            episode,
            out,
            roots,
        } => cmd_replay(&log, &episode, out, &roots),
        Command::Analyze { log, out, roots } => cmd_analyze(&log, out, &roots),
        Command::Synth {
            spec,
            out,
            split,
            no_images,
        } => cmd_synth(&spec, &out, &split, no_images),
        Command::Bench {
            scan,
            asset_root,
            samples,
            seed,
        } => cmd_bench(&scan, asset_root, samples, seed),
    }
}

fn cmd_run(config_path: &Path) -> Result<()> {
    let cfg = RunConfig::load(config_path)?;
    let registry = Registry::with_builtins();
    let outcome = run(&registry, &cfg)?;
    if outcome.resumed > 0 {
        println!(
            "resumed: {} episodes already logged were skipped",
            outcome.resumed
        );
    }
    println!("{}", outcome.summary.render_table());
    println!("log:     {}", outcome.log_path.display());
    println!("summary: {}", outcome.summary_path.display());
    Ok(())
}

fn cmd_sample(plan_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(plan_path)
        .with_context(|| format!("reading {}", plan_path.display()))?;
    let plan_file: PlanFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", plan_path.display()))?;
    let granularity: Granularity = plan_file.task.parse().map_err(|e: String| anyhow!(e))?;
    let pool = load_split(
        granularity,
        &plan_file.split,
        &plan_file.data_root,
        &plan_file.asset_root,
    )?;
    for rejected in &pool.rejected {
        eprintln!("rejected {}: {}", rejected.episode_id, rejected.reason);
    }
    let sampled = stratified_sample(&pool.episodes, &plan_file.plan, plan_file.seed)?;
    let summary = describe_benchmark(&sampled, &plan_file.plan.length_bins);
    if let Some(parent) = plan_file.out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(
        &plan_file.out,
        serde_json::to_string_pretty(&sampled)? + "\n",
    )?;
    println!(
        "sampled {} episodes -> {}",
        sampled.len(),
        plan_file.out.display()
    );
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

/// Loads the run config stored next to a log, with CLI overrides.
fn log_context(log: &Path, roots: &RootOverrides) -> Result<RunConfig> {
    let config_path = log
        .parent()
        .map(|d| d.join("config.json"))
        .filter(|p| p.is_file());
    let mut cfg = match config_path {
        Some(path) => RunConfig::load(&path)?,
        None => {
            let (Some(asset_root), Some(data_root), Some(task), Some(split)) = (
                roots.asset_root.clone(),
                roots.data_root.clone(),
                roots.task.clone(),
                roots.split.clone(),
            ) else {
                bail!(
                    "no config.json next to {}; pass --asset-root, --data-root, --task, --split",
                    log.display()
                );
            };
            RunConfig {
                run_id: "adhoc".into(),
                task,
                split,
                agent: "navgpt".into(),
                model: "echo".into(),
                observation_format: Default::default(),
                text_only: true,
                max_steps: 20,
                retries: 3,
                seed: 0,
                concurrency: 1,
                output_dir: std::env::temp_dir(),
                asset_root,
                data_root,
                model_settings: Default::default(),
                generation: Default::default(),
                diagnostics: None,
                template_dir: None,
            }
        }
    };
    if let Some(root) = &roots.asset_root {
        cfg.asset_root = root.clone();
    }
    if let Some(root) = &roots.data_root {
        cfg.data_root = root.clone();
    }
    if let Some(task) = &roots.task {
        cfg.task = task.clone();
    }
    if let Some(split) = &roots.split {
        cfg.split = split.clone();
    }
    Ok(cfg)
}

type RunData = (
    Vec<TrajectoryRecord>,
    BTreeMap<String, vln::tasks::EpisodeSpec>,
    BTreeMap<String, vln::world::WorldGraph>,
);

fn load_run_data(log: &Path, roots: &RootOverrides) -> Result<RunData> {
    let cfg = log_context(log, roots)?;
    let records = read_log(log);
    if records.is_empty() {
        bail!("no parseable records in {}", log.display());
    }
    let granularity: Granularity = cfg.task.parse().map_err(|e: String| anyhow!(e))?;
    let split = load_split(granularity, &cfg.split, &cfg.data_root, &cfg.asset_root)?;
    let episodes: BTreeMap<String, _> = split
        .episodes
        .into_iter()
        .map(|e| (e.episode_id.clone(), e))
        .collect();
    let mut worlds = BTreeMap::new();
    for record in &records {
        if !worlds.contains_key(&record.scan_id) {
            let world = load_world(&cfg.asset_root, &record.scan_id)?;
            worlds.insert(record.scan_id.clone(), world);
        }
    }
    Ok((records, episodes, worlds))
}

fn cmd_score(log: &Path, roots: &RootOverrides) -> Result<()> {
    let (records, episodes, worlds) = load_run_data(log, roots)?;
    let mut reports = Vec::new();
    for record in &records {
        let episode = episodes
            .get(&record.episode_id)
            .ok_or_else(|| anyhow!("episode {} not in split", record.episode_id))?;
        let world = &worlds[&record.scan_id];
        reports.push(vln::metrics::score_episode(
            world,
            episode,
            &record.executed,
        )?);
    }
    let summary = vln::metrics::aggregate(&reports);
    println!("{}", summary.render_table());
    Ok(())
}

fn cmd_annotate(
    scan: &str,
    asset_root: Option<PathBuf>,
    overwrite: bool,
    scripted: Option<PathBuf>,
    model: &str,
) -> Result<()> {
    let root = asset_root
        .or_else(default_asset_root)
        .ok_or_else(|| anyhow!("no --asset-root and $VLN_ASSET_ROOT unset"))?;
    let world = load_world(&root, scan)?;
    let options = AnnotateOptions { overwrite };
    let run = match scripted {
        Some(path) => {
            let lines: Vec<String> = std::fs::read_to_string(&path)?
                .lines()
                .map(str::to_string)
                .collect();
            let backend = ScriptedModel::new("scripted-annotator", lines).cycling();
            annotate_world(&world, &backend, &backend, &options)?
        }
        None => {
            let settings = vln::models::ModelSettings {
                model: model.to_string(),
                ..Default::default()
            };
            let backend = vln::models::ChatModel::new("chat", settings, &root);
            annotate_world(&world, &backend, &backend, &options)?
        }
    };
    run.graph.save(&root)?;
    println!(
        "annotated {} nodes ({} skipped) -> {}",
        run.annotated,
        run.skipped.len(),
        root.join(scan).join("annotations.json").display()
    );
    for skipped in &run.skipped {
        eprintln!("skipped {}: {}", skipped.viewpoint, skipped.reason);
    }
    Ok(())
}

fn cmd_replay(
    log: &Path,
    episode_id: &str,
    out: Option<PathBuf>,
    roots: &RootOverrides,
) -> Result<()> {
    let (records, episodes, worlds) = load_run_data(log, roots)?;
    let record = records
        .iter()
        .find(|r| r.episode_id == episode_id)
        .ok_or_else(|| anyhow!("episode {episode_id} not in log"))?;
    let episode = episodes
        .get(episode_id)
        .ok_or_else(|| anyhow!("episode {episode_id} not in split"))?;
    let world = &worlds[&record.scan_id];
    let html = replay_episode(record, episode, world);
    let out = out.unwrap_or_else(|| {
        log.parent()
            .unwrap_or(Path::new("."))
            .join("reports")
            .join(format!("{episode_id}.html"))
    });
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&out, html)?;
    println!("report -> {}", out.display());
    Ok(())
}

fn cmd_analyze(log: &Path, out: Option<PathBuf>, roots: &RootOverrides) -> Result<()> {
    let (records, episodes, worlds) = load_run_data(log, roots)?;
    let out = out.unwrap_or_else(|| log.parent().unwrap_or(Path::new(".")).join("reports"));
    std::fs::create_dir_all(&out)?;
    let mut diagnoses = Vec::new();
    for record in &records {
        let episode = episodes
            .get(&record.episode_id)
            .ok_or_else(|| anyhow!("episode {} not in split", record.episode_id))?;
        let world = &worlds[&record.scan_id];
        diagnoses.push(diagnose(record, episode, world));
        let html = replay_episode(record, episode, world);
        std::fs::write(out.join(format!("{}.html", record.episode_id)), html)?;
    }
    let report = taxonomy_report(&diagnoses);
    std::fs::write(
        out.join("taxonomy.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    std::fs::write(
        out.join("diagnoses.json"),
        serde_json::to_string_pretty(&diagnoses)? + "\n",
    )?;
    println!("{}", report.render_text());
    println!("reports -> {}", out.display());
    Ok(())
}

fn cmd_synth(spec_path: &Path, out: &Path, split: &str, no_images: bool) -> Result<()> {
    let text = std::fs::read_to_string(spec_path)
        .with_context(|| format!("reading {}", spec_path.display()))?;
    let spec: vln::fixtures::SynthSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", spec_path.display()))?;
    let world = vln::fixtures::gen_world(&spec)?;
    let episodes = vln::fixtures::gen_split(&world, &spec)?;
    let assets = out.join("assets");
    let data = out.join("data");
    vln::fixtures::materialize(&world, &episodes, split, &assets, &data, !no_images)?;
    println!(
        "scan {} ({} nodes, {} edges), {} episodes -> {}",
        world.scan_id(),
        world.node_count(),
        world.edge_count(),
        episodes.len(),
        out.display()
    );
    Ok(())
}

fn cmd_bench(scan: &str, asset_root: Option<PathBuf>, samples: usize, seed: u64) -> Result<()> {
    let root = asset_root
        .or_else(default_asset_root)
        .ok_or_else(|| anyhow!("no --asset-root and $VLN_ASSET_ROOT unset"))?;
    let world = load_world(&root, scan)?;
    let stats = measure_access_latency(&world, Some(&root), samples, seed)?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(())
}
