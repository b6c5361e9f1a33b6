use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use somrl::harness::config::{ExperimentConfig, DEFAULT_CONFIG};
use somrl::harness::curriculum::{run_curriculum, Strategy};
use somrl::harness::output;
use somrl::harness::scaling::scaling_study;
use somrl::harness::stats::mean;

#[derive(Parser)]
#[command(name = "somrl", version, about = "Knowledge reuse across navigation tasks with a growing self-organizing map")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn the task curriculum and compare exploration strategies.
    Curriculum(CurriculumArgs),
    /// Store synthetic tasks in maps with different growth thresholds.
    Scaling(CommonArgs),
    /// Label the nodes of a saved map with the tasks they match best.
    Replay(ReplayArgs),
    /// Print the built-in configuration.
    DefaultConfig,
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file; the built-in configuration when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Base seed, overriding the configuration.
    #[arg(short, long)]
    seed: Option<u64>,
    /// Output directory, overriding SOMRL_OUT_DIR and the configuration.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    SomGuided,
    EpsilonGreedy,
    Both,
}

impl StrategyArg {
    fn strategies(self) -> Vec<Strategy> {
        match self {
            StrategyArg::SomGuided => vec![Strategy::SomGuided],
            StrategyArg::EpsilonGreedy => vec![Strategy::EpsilonGreedy],
            StrategyArg::Both => Strategy::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct CurriculumArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value = "both")]
    strategy: StrategyArg,
    /// Number of runs, overriding the configuration.
    #[arg(long)]
    runs: Option<usize>,
    /// Episodes per task, overriding the configuration.
    #[arg(long)]
    episodes: Option<usize>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Directory written by `somrl curriculum`.
    #[arg(short, long, default_value = "results")]
    dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    run: usize,
    #[arg(long, value_enum, default_value = "som-guided")]
    strategy: StrategyArg,
}

fn load_config(common: &CommonArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_toml(DEFAULT_CONFIG)?,
    };
    if let Some(seed) = common.seed {
        cfg.curriculum.seed = seed;
        cfg.scaling.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir());
    Ok((cfg, out))
}

fn curriculum(args: CurriculumArgs) -> Result<()> {
    let (mut cfg, out) = load_config(&args.common)?;
    if let Some(runs) = args.runs {
        cfg.curriculum.runs = runs;
    }
    if let Some(episodes) = args.episodes {
        cfg.curriculum.episodes_per_task = episodes;
    }
    cfg.validate()?;
    let tasks = cfg.curriculum_tasks(cfg.curriculum.seed)?;
    for (k, t) in tasks.iter().enumerate() {
        eprintln!(
            "task {} {:?}: goal ({:.2}, {:.2}) r={}",
            k + 1,
            t.name,
            t.goal_center.x,
            t.goal_center.y,
            t.goal_radius
        );
    }
    let mut runs = Vec::new();
    for run in 0..cfg.curriculum.runs {
        let seed = cfg.curriculum.seed + run as u64;
        for strategy in args.strategy.strategies() {
            let clock = Instant::now();
            let m = run_curriculum(&cfg, &tasks, strategy, run, seed)?;
            let finals: Vec<String> = m
                .tasks
                .iter()
                .map(|t| format!("{:.1}", mean(&t.returns[t.returns.len().saturating_sub(100)..])))
                .collect();
            eprintln!(
                "run {run} {strategy}: final returns [{}], nodes {:?}, {:.1}s",
                finals.join(", "),
                m.node_counts,
                clock.elapsed().as_secs_f64()
            );
            if let Some(f) = &m.failure {
                eprintln!("run {run} {strategy}: aborted, {f}");
            }
            runs.push(m);
        }
    }
    output::write_curriculum_outputs(&runs, Some(&cfg.gsom), &out, cfg.output.smoothing_window)?;
    output::write_plot_scripts(&out)?;
    write_config_echo(&cfg, &out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn scaling(args: CommonArgs) -> Result<()> {
    let (cfg, out) = load_config(&args)?;
    let clock = Instant::now();
    let records = scaling_study(&cfg.scaling, &cfg.gsom)?;
    for r in &records {
        println!(
            "G_T={} tasks={} nodes={} nodes/task={:.3}",
            r.g_t,
            r.task_count,
            r.node_count,
            r.nodes_per_task()
        );
    }
    output::write_scaling_outputs(&records, &out)?;
    output::write_plot_scripts(&out)?;
    eprintln!("wrote {} in {:.1}s", out.display(), clock.elapsed().as_secs_f64());
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<()> {
    let strategy = match args.strategy {
        StrategyArg::SomGuided => Strategy::SomGuided,
        StrategyArg::EpsilonGreedy => Strategy::EpsilonGreedy,
        StrategyArg::Both => anyhow::bail!("replay needs a single strategy"),
    };
    let (map, tasks) = output::load_run(&args.dir, args.run, strategy)
        .with_context(|| format!("loading run {} ({strategy}) from {}", args.run, args.dir.display()))?;
    let nodes = output::summarize_nodes(&map, &tasks)?;
    println!("map {}x{}, {} stored tasks", map.rows(), map.cols(), tasks.len());
    for row in 0..map.rows() {
        let cells: Vec<String> = nodes[row * map.cols()..(row + 1) * map.cols()]
            .iter()
            .map(|n| format!("T{}:{:.2}", n.best_task, n.similarity))
            .collect();
        println!("{}", cells.join(" "));
    }
    for (k, w) in tasks.iter().enumerate() {
        let (node, c) = map.best_match(w.as_slice())?;
        println!("task {}: best node {node}, similarity {c:.4}", k + 1);
    }
    let path = args.dir.join("som_nodes.csv");
    output::write_node_summary(&nodes, &path)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn write_config_echo(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let path = out.join("config.toml");
    std::fs::write(&path, cfg.to_toml()?).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Curriculum(args) => curriculum(args),
        Command::Scaling(args) => scaling(args),
        Command::Replay(args) => replay(args),
        Command::DefaultConfig => {
            print!("{DEFAULT_CONFIG}");
            Ok(())
        }
    }
}
