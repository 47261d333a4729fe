//! `hipt` command line.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use hipt_core::env::{bundled_layout, group_episodes, read_jsonl, replay, write_jsonl, Layout};
use hipt_core::eval::{
    emit_report, evaluate_vs_population, record_episodes, split_by_episode, train_bc, write_report, EvalSuite,
    ReportFormat,
};
use hipt_core::hipt::{save_hipt_checkpoint, train_hipt};
use hipt_core::policy::NoisyPolicy;
use hipt_core::population::{
    classify_play_styles, crossplay_matrix, load_population, save_population, train_population, write_crossplay_csv,
    write_heatmap_pgm, PartnerPopulation, Tier,
};
use hipt_core::rl_core::MetricsLog;
use hipt_core::scripted::ScriptedCook;

use crate::agents::AgentRef;
use crate::config::RunConfig;
use crate::rundir::{verify_enclosing_run, RunDir};
use crate::server::{serve, ServerState};

#[derive(Debug, Parser)]
#[command(name = "hipt", version, about = "Train, evaluate and play with hierarchical cooperative agents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub layout: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Parent directory for run outputs.
    #[arg(long, global = true)]
    pub runs_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a diverse self-play partner population.
    TrainPopulation {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        size: Option<usize>,
        /// Environment steps per member.
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        jsd_coef: Option<f64>,
    },
    /// Train a hierarchical agent against a saved population.
    TrainHipt {
        #[command(flatten)]
        common: Common,
        /// Training population directory.
        #[arg(long)]
        population: PathBuf,
        /// Held-out population scored after training.
        #[arg(long)]
        eval_population: Option<PathBuf>,
        #[arg(long)]
        num_priors: Option<usize>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Score an agent against a held-out population at every skill tier.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Agent reference, e.g. hipt:runs/x/hipt or member:pop#0:full.
        #[arg(long)]
        agent: String,
        #[arg(long)]
        population: PathBuf,
        /// Population the agent trained with; its seeds must not reappear.
        #[arg(long)]
        training_population: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value = "agent")]
        method: String,
    },
    /// Crossplay matrix and play-style classes of a population.
    Crossplay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        population: PathBuf,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value = "full")]
        tier: String,
    },
    /// Behavior cloning from trajectory logs.
    BcTrain {
        #[command(flatten)]
        common: Common,
        /// Training trajectories (JSONL).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Held-out trajectories; without it a fraction of `data` is held out.
        #[arg(long)]
        heldout: Option<PathBuf>,
        #[arg(long, default_value_t = 0.25)]
        heldout_fraction: f64,
        /// Generate a dataset of this many scripted-cook episodes instead of reading one.
        #[arg(long)]
        scripted_episodes: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Host live human-agent sessions over websockets.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, env = "HIPT_PORT")]
        port: Option<u16>,
        #[arg(long, env = "HIPT_DATA_DIR")]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Agent references to compare; repeat the flag.
        #[arg(long = "agent")]
        agents: Vec<String>,
        #[arg(long)]
        tick_ms: Option<u64>,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Re-simulate a trajectory log and check every state digest.
    Replay {
        path: PathBuf,
        #[arg(long)]
        layout: Option<String>,
        #[arg(long, default_value_t = 400)]
        horizon: u32,
    },
}

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub run_dir: Option<PathBuf>,
    pub summary: String,
}

pub fn resolve_config(common: &Common) -> anyhow::Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path, common.layout.as_deref())?,
        None => RunConfig::for_layout(common.layout.as_deref().unwrap_or("cramped_room")),
    };
    if let Some(layout) = &common.layout {
        if *layout != config.layout {
            config.set_layout(layout);
        }
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
        config.population.seed = seed;
        config.hipt.seed = seed;
        config.bc.seed = seed;
        config.eval.seed = seed;
    }
    if let Some(dir) = &common.runs_dir {
        config.runs_dir = dir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn layout_of(config: &RunConfig) -> anyhow::Result<Layout> {
    bundled_layout(&config.layout).with_context(|| format!("unknown layout {}", config.layout))
}

fn open_population(dir: &Path) -> anyhow::Result<PartnerPopulation> {
    verify_enclosing_run(dir)?;
    load_population(dir).with_context(|| format!("loading population {}", dir.display()))
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::TrainPopulation { common, size, steps, jsd_coef } => {
            let mut config = resolve_config(&common)?;
            if let Some(v) = size {
                config.population.size = v;
            }
            if let Some(v) = steps {
                config.population.env_steps_per_member = v;
            }
            if let Some(v) = jsd_coef {
                config.population.jsd_coef = v;
            }
            let layout = layout_of(&config)?;
            let dir = RunDir::create(&config, "train-population")?;
            let mut metrics = MetricsLog::append_to(&dir.join("metrics.jsonl"))?;
            let run = train_population(&layout, &config.population, Some(&mut metrics))?;
            save_population(&run.population, &dir.join("population"))?;
            std::fs::write(dir.join("histories.json"), serde_json::to_string_pretty(&run.histories)?)?;
            let mut summary = String::new();
            for (i, m) in run.population.members.iter().enumerate() {
                summary.push_str(&format!(
                    "member {i}: J_SP full {:.1}, mid {:.1} (in band: {})\n",
                    m.j_sp_full, m.j_sp_mid, m.mid_in_band
                ));
            }
            drop(metrics);
            dir.finish()?;
            Ok(Outcome { run_dir: Some(dir.path), summary })
        }
        Command::TrainHipt { common, population, eval_population, num_priors, steps } => {
            let mut config = resolve_config(&common)?;
            if let Some(v) = num_priors {
                config.hipt.num_priors = v;
            }
            if let Some(v) = steps {
                config.hipt.total_env_steps = v;
                config.hipt.influence.anneal_steps = v;
            }
            let layout = layout_of(&config)?;
            let train_pop = open_population(&population)?;
            if train_pop.layout != layout.name {
                bail!("population was trained on {}, not {}", train_pop.layout, layout.name);
            }
            let heldout = eval_population.as_deref().map(open_population).transpose()?;
            let dir = RunDir::create(&config, "train-hipt")?;
            let mut metrics = MetricsLog::append_to(&dir.join("metrics.jsonl"))?;
            let run = train_hipt(&train_pop, &layout, &config.hipt, None, Some(&mut metrics))?;
            save_hipt_checkpoint(&dir.path, "hipt", &run.agent, &run.sidecar(&config.hipt.influence))?;
            std::fs::write(dir.join("progress.json"), serde_json::to_string_pretty(&run.history)?)?;
            let mut summary = format!("trained {} updates, {} env steps\n", run.updates, run.env_steps);
            if let Some(pop) = heldout {
                let mut suite = EvalSuite::new(pop, &train_pop.seeds(), config.eval.horizon)?;
                suite.episodes = config.eval.episodes;
                suite.seed = config.eval.seed;
                let out = evaluate_vs_population(&mut run.agent.policy(), "HiPT", &layout, &suite)?;
                write_report(&out.rows, &dir.join("report.csv"), ReportFormat::Csv)?;
                summary.push_str(&emit_report(&out.rows, ReportFormat::Text)?);
            }
            drop(metrics);
            dir.finish()?;
            Ok(Outcome { run_dir: Some(dir.path), summary })
        }
        Command::Eval { common, agent, population, training_population, episodes, method } => {
            let mut config = resolve_config(&common)?;
            if let Some(v) = episodes {
                config.eval.episodes = v;
            }
            let layout = layout_of(&config)?;
            let agent_ref: AgentRef = agent.parse().map_err(anyhow::Error::msg)?;
            let mut policy = agent_ref.load()?;
            let heldout = open_population(&population)?;
            let training_seeds = match &training_population {
                Some(p) => open_population(p)?.seeds(),
                None => Vec::new(),
            };
            let mut suite = EvalSuite::new(heldout, &training_seeds, config.eval.horizon)?;
            suite.episodes = config.eval.episodes;
            suite.seed = config.eval.seed;
            let dir = RunDir::create(&config, "eval")?;
            let out = evaluate_vs_population(policy.as_mut(), &method, &layout, &suite)?;
            write_report(&out.rows, &dir.join("report.csv"), ReportFormat::Csv)?;
            write_report(&out.rows, &dir.join("report.txt"), ReportFormat::Text)?;
            std::fs::write(dir.join("cells.json"), serde_json::to_string_pretty(&out.cells)?)?;
            let summary = emit_report(&out.rows, ReportFormat::Text)?;
            dir.finish()?;
            Ok(Outcome { run_dir: Some(dir.path), summary })
        }
        Command::Crossplay { common, population, episodes, tier } => {
            let mut config = resolve_config(&common)?;
            if let Some(v) = episodes {
                config.crossplay.episodes = v;
            }
            let layout = layout_of(&config)?;
            let tier =
                Tier::ALL.into_iter().find(|t| t.name() == tier).with_context(|| format!("unknown tier {tier}"))?;
            let pop = open_population(&population)?;
            let agents: Vec<_> = (0..pop.len()).map(|i| (format!("m{i}"), pop.policy(i, tier))).collect();
            let cp = &config.crossplay;
            let matrix =
                crossplay_matrix(&agents, &layout, config.eval.horizon, cp.episodes, cp.seat_balancing, config.seed)?;
            let styles = classify_play_styles(&matrix, cp.tolerance)?;
            let dir = RunDir::create(&config, "crossplay")?;
            write_crossplay_csv(&matrix, &dir.join("crossplay.csv"))?;
            write_heatmap_pgm(&matrix, &dir.join("crossplay.pgm"), cp.heatmap_cell_px)?;
            std::fs::write(dir.join("styles.json"), serde_json::to_string_pretty(&styles.classes)?)?;
            let mut summary = String::new();
            for (label, row) in matrix.labels.iter().zip(&matrix.mean) {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:>7.1}")).collect();
                summary.push_str(&format!("{label:>4} {}\n", cells.join("")));
            }
            summary.push_str(&format!("play styles: {:?}\n", styles.classes));
            dir.finish()?;
            Ok(Outcome { run_dir: Some(dir.path), summary })
        }
        Command::BcTrain { common, data, heldout, heldout_fraction, scripted_episodes, epochs } => {
            let mut config = resolve_config(&common)?;
            if let Some(v) = epochs {
                config.bc.epochs = v;
            }
            let layout = layout_of(&config)?;
            let dir = RunDir::create(&config, "bc-train")?;
            let records = match (&data, scripted_episodes) {
                (Some(path), _) => read_records(path)?,
                (None, Some(n)) => {
                    let mut partner = NoisyPolicy { inner: ScriptedCook, epsilon: 0.2 };
                    let r =
                        record_episodes(&mut ScriptedCook, &mut partner, &layout, config.bc.horizon, n, config.seed)?;
                    config.bc.seats = vec![0];
                    write_jsonl(File::create(dir.join("dataset.jsonl"))?, &r)?;
                    r
                }
                (None, None) => bail!("bc-train needs --data or --scripted-episodes"),
            };
            let (train, held) = match &heldout {
                Some(path) => (records, read_records(path)?),
                None => split_by_episode(&records, heldout_fraction, config.seed),
            };
            let model = train_bc(&train, &held, &layout, &config.bc)?;
            model.save(&dir.path, "bc")?;
            let mut summary = format!(
                "held-out accuracy {:.4} over {} episodes; final train loss {:.4}\n",
                model.heldout_accuracy,
                model.heldout_episodes.len(),
                model.train_loss.last().copied().unwrap_or(f64::NAN)
            );
            for w in &model.warnings {
                summary.push_str(&format!("warning: {w}\n"));
            }
            dir.finish()?;
            Ok(Outcome { run_dir: Some(dir.path), summary })
        }
        Command::Serve { common, port, data_dir, static_dir, agents, tick_ms, rounds } => {
            let mut config = resolve_config(&common)?;
            let s = &mut config.serve;
            if let Some(v) = port {
                s.port = v;
            }
            if let Some(v) = data_dir {
                s.data_dir = v;
            }
            if static_dir.is_some() {
                s.static_dir = static_dir;
            }
            if !agents.is_empty() {
                s.agents = agents;
            }
            if let Some(v) = tick_ms {
                s.tick_ms = v;
            }
            if let Some(v) = rounds {
                s.rounds = v;
            }
            let layout = layout_of(&config)?;
            std::fs::create_dir_all(&config.serve.data_dir)?;
            std::fs::write(config.serve.data_dir.join("config.toml"), config.to_toml())?;
            let port = config.serve.port;
            let state = ServerState::new(config.serve, layout)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
                serve(state, listener).await
            })?;
            Ok(Outcome::default())
        }
        Command::Replay { path, layout, horizon } => {
            let records = read_records(&path)?;
            if records.is_empty() {
                bail!("{} holds no records", path.display());
            }
            let mut summary = String::new();
            for (id, episode) in group_episodes(&records) {
                let name = layout.clone().unwrap_or_else(|| episode[0].layout.clone());
                let layout = bundled_layout(&name).with_context(|| format!("unknown layout {name}"))?;
                let r = replay(&episode, &layout, horizon).with_context(|| format!("episode {id}"))?;
                summary.push_str(&format!("{id}: {} steps, score {}, digests match\n", r.steps, r.score));
            }
            Ok(Outcome { run_dir: None, summary })
        }
    }
}

fn read_records(path: &Path) -> anyhow::Result<Vec<hipt_core::env::TrajectoryRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_jsonl(BufReader::new(file)).with_context(|| format!("reading {}", path.display()))
}

/// Parse `args`, run, print, and return the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(out) => {
            print!("{}", out.summary);
            if let Some(dir) = out.run_dir {
                println!("outputs in {}", dir.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
