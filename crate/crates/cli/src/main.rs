use std::io::{self, BufRead, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use tamer_core::experiment::{run_experiment, summarize_dir, ExperimentConfig, Summary};
use tamer_core::features::FeatureMap;
use tamer_core::irl::{projection_irl, DemoSource, Demonstration, IrlConfig};
use tamer_core::mdp::{bfs_distance, parse_layout, Action, GridWorld};
use tamer_core::session::{Phase, Session, SessionConfig, Transcript};
use tamer_core::trainer::scripted_demo;

#[derive(Parser)]
#[command(name = "tamer", version, about = "Train a grid-world agent from human reward")]
struct Cli {
    /// Overrides every seed in the loaded configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a layout and report its size and start-to-goal distance.
    ValidateLayout {
        /// Layout file; the built-in maze when omitted.
        path: Option<PathBuf>,
    },
    /// Record or inspect a demonstration.
    Demo {
        #[command(subcommand)]
        action: DemoCommand,
    },
    /// Recover a reward from a demonstration and write the weights as JSON.
    Irl {
        #[arg(long)]
        demo: PathBuf,
        #[arg(long)]
        layout: Option<PathBuf>,
        #[arg(long, default_value = "irl_weights.json")]
        out: PathBuf,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Run one session against the simulated trainer.
    TrainSim {
        /// Session configuration (TOML); defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        layout: Option<PathBuf>,
        /// Seed from this demonstration instead of the scripted one.
        #[arg(long, conflicts_with = "skip_demo")]
        demo: Option<PathBuf>,
        #[arg(long)]
        skip_demo: bool,
        /// Write the session transcript here.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
    /// Run or summarize a method-by-discount sweep.
    Experiment {
        #[command(subcommand)]
        action: ExperimentCommand,
    },
    /// Serve the session API and, optionally, a static UI.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long)]
        ui: Option<PathBuf>,
    },
    /// Print the value heat maps stored in a transcript.
    Heatmap {
        #[arg(long)]
        session: PathBuf,
        /// Only snapshots with this tag.
        #[arg(long)]
        tag: Option<String>,
    },
}

#[derive(Subcommand)]
enum DemoCommand {
    /// Read moves from stdin (up/down/left/right or u/d/l/r) until the goal.
    Record {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        layout: Option<PathBuf>,
    },
    /// Check a demonstration and print it step by step.
    Replay {
        path: PathBuf,
        #[arg(long)]
        layout: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExperimentCommand {
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    Summarize { dir: PathBuf },
}

fn load_grid(path: Option<&Path>) -> Result<GridWorld> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(parse_layout(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => Ok(GridWorld::canonical()),
    }
}

fn load_demo(path: &Path, grid: &GridWorld) -> Result<Demonstration> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let demo = Demonstration::from_json(&text, grid, DemoSource::File)?;
    demo.validate(grid)?;
    Ok(demo)
}

fn validate_layout(path: Option<&Path>) -> Result<()> {
    let grid = load_grid(path)?;
    let d = bfs_distance(&grid, grid.start_state(), grid.goal_state())?.context("goal is unreachable")?;
    println!("{} states, BFS={d}", grid.num_states());
    Ok(())
}

fn record_demo(out: &Path, layout: Option<&Path>, input: impl BufRead, mut echo: impl Write) -> Result<()> {
    let grid = load_grid(layout)?;
    let mut state = grid.start_state();
    let mut steps = Vec::new();
    writeln!(echo, "at {}", grid.cell_of(state).label())?;
    for line in input.lines() {
        for word in line?.split_whitespace() {
            let action: Action = match word.parse() {
                Ok(a) => a,
                Err(e) => {
                    writeln!(echo, "{e}")?;
                    continue;
                }
            };
            let next = grid.successor(state, action);
            if next == state {
                writeln!(echo, "blocked")?;
                continue;
            }
            steps.push((state, action));
            state = next;
            writeln!(echo, "at {}", grid.cell_of(state).label())?;
            if grid.is_goal(state) {
                let demo = Demonstration::new(steps, DemoSource::LiveKeyboard);
                demo.save(out, &grid)?;
                writeln!(echo, "goal reached in {} steps, wrote {}", demo.len(), out.display())?;
                return Ok(());
            }
        }
    }
    bail!("input ended before the goal was reached")
}

fn replay_demo(path: &Path, layout: Option<&Path>) -> Result<()> {
    let grid = load_grid(layout)?;
    let demo = load_demo(path, &grid)?;
    for (i, &(s, a)) in demo.steps.iter().enumerate() {
        let next = grid.successor(s, a);
        println!("{:>3} {} {:?} -> {}", i + 1, grid.cell_of(s).label(), a, grid.cell_of(next).label());
    }
    let shortest = bfs_distance(&grid, grid.start_state(), grid.goal_state())?.unwrap_or(0);
    let verdict = if demo.len() == shortest { "shortest path" } else { "longer than the shortest path" };
    println!("{} steps, {verdict} ({shortest})", demo.len());
    Ok(())
}

fn irl(demo: &Path, layout: Option<&Path>, out: &Path, gamma: Option<f64>, epsilon: Option<f64>) -> Result<()> {
    let grid = load_grid(layout)?;
    let demo = load_demo(demo, &grid)?;
    let map = FeatureMap::canonical(&grid);
    let mut config = IrlConfig::default();
    if let Some(g) = gamma {
        config.gamma = g;
    }
    if let Some(e) = epsilon {
        config.epsilon = e;
    }
    let result = projection_irl(&demo, &grid, &map, &config)?;
    for (i, t) in result.margin_history.iter().enumerate() {
        println!("iteration {:>2}  margin {t:.6}", i + 1);
    }
    println!(
        "{} after {} iterations",
        if result.converged { "converged" } else { "stopped" },
        result.iterations
    );
    let json = serde_json::json!({
        "weights": result.weights,
        "margin_history": result.margin_history,
        "iterations": result.iterations,
        "converged": result.converged,
        "policy": result.policy,
    });
    std::fs::write(out, serde_json::to_string_pretty(&json)?)?;
    println!("wrote {}", out.display());
    Ok(())
}

struct TrainArgs<'a> {
    config: Option<&'a Path>,
    layout: Option<&'a Path>,
    demo: Option<&'a Path>,
    skip_demo: bool,
    transcript: Option<&'a Path>,
    seed: Option<u64>,
}

fn train_sim(args: TrainArgs) -> Result<()> {
    let grid = load_grid(args.layout)?;
    let mut config = match args.config {
        Some(p) => SessionConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => SessionConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
        config.trainer.seed = seed;
    }
    config.skip_demo |= args.skip_demo;
    let mut session = if config.skip_demo {
        Session::new(grid.clone(), config)?
    } else {
        let demo = match args.demo {
            Some(p) => load_demo(p, &grid)?,
            None => scripted_demo(&grid, 0)?,
        };
        Session::with_demonstration(grid.clone(), config, &demo)?
    };
    if let Some(irl) = session.irl() {
        println!("seeded from a {}-step demonstration ({} IRL iterations)", session.demonstration().len(), irl.iterations);
    }
    while session.phase() == Phase::Training {
        session.run_step()?;
    }
    for (i, e) in session.episodes().iter().enumerate().filter(|(_, e)| e.steps > 0) {
        println!("episode {:>3}: {:>4} steps, +{} -{}", i + 1, e.steps, e.positive, e.negative);
    }
    let t = session.feedback_totals();
    println!(
        "{} after {} steps: {} positive, {} negative",
        if session.converged() { "converged" } else { "stopped" },
        t.steps,
        t.positive,
        t.negative
    );
    if let Some(p) = args.transcript {
        std::fs::write(p, session.transcript()?.to_json()?)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn experiment_run(config: &Path, output: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(out) = output {
        cfg.output_dir = out;
    }
    if let Some(seed) = seed {
        cfg.seed_base = seed;
    }
    let records = run_experiment(&cfg)?;
    let summary = Summary::from_records(&records)?;
    print!("{}", summary.render());
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn show_heatmaps(path: &Path, tag: Option<&str>) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let t = Transcript::from_json(&text)?;
    let maps: Vec<_> = t.heatmaps.iter().filter(|h| tag.is_none_or(|tag| h.tag == tag)).collect();
    if maps.is_empty() {
        bail!("no heat maps{} in {}", tag.map(|t| format!(" tagged {t}")).unwrap_or_default(), path.display());
    }
    for (i, h) in maps.iter().enumerate() {
        if i > 0 {
            println!();
        }
        print!("{}", h.render());
    }
    Ok(())
}

fn serve(host: IpAddr, port: u16, ui: Option<PathBuf>) -> Result<()> {
    let addr = SocketAddr::new(host, port);
    let runtime = tokio::runtime::Runtime::new()?;
    println!("listening on http://{addr}");
    runtime.block_on(tamer_server::serve(tamer_server::ServeOptions { addr, ui_dir: ui }))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ValidateLayout { path } => validate_layout(path.as_deref()),
        Command::Demo { action: DemoCommand::Record { out, layout } } => {
            record_demo(&out, layout.as_deref(), io::stdin().lock(), io::stdout())
        }
        Command::Demo { action: DemoCommand::Replay { path, layout } } => replay_demo(&path, layout.as_deref()),
        Command::Irl { demo, layout, out, gamma, epsilon } => irl(&demo, layout.as_deref(), &out, gamma, epsilon),
        Command::TrainSim { config, layout, demo, skip_demo, transcript } => train_sim(TrainArgs {
            config: config.as_deref(),
            layout: layout.as_deref(),
            demo: demo.as_deref(),
            skip_demo,
            transcript: transcript.as_deref(),
            seed: cli.seed,
        }),
        Command::Experiment { action: ExperimentCommand::Run { config, output } } => {
            experiment_run(&config, output, cli.seed)
        }
        Command::Experiment { action: ExperimentCommand::Summarize { dir } } => {
            print!("{}", summarize_dir(&dir)?.render());
            Ok(())
        }
        Command::Serve { port, host, ui } => serve(host, port, ui),
        Command::Heatmap { session, tag } => show_heatmaps(&session, tag.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
