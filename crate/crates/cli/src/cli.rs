use std::ffi::OsString;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ffevss_core::{generate_instance, save_instance, Difficulty, Env, NodeRole};
use ffevss_rl::{train_agent, Agent, Flavor, TrainConfig};
use serde_json::json;

use crate::results::{load_instances, mean, write_rows, Method, ResultRow, Summary};

#[derive(Debug, Parser)]
#[command(
    name = "ffevss",
    version,
    about = "Nightly EV rebalancing: simulate, train and compare shuttle routing policies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded random instances as JSON files.
    Generate(GenerateArgs),
    /// Train an actor-critic agent.
    Train(TrainArgs),
    /// Evaluate one method on a set of instances.
    Eval(EvalArgs),
    /// Evaluate two methods on the same instances and report win %.
    Compare(CompareArgs),
    /// Exact minimum makespan on tiny instances.
    Oracle(OracleArgs),
    /// Export reward curves and route polylines for plotting.
    PlotData(PlotArgs),
}

fn parse_difficulty(s: &str) -> Result<Difficulty, String> {
    match s.to_ascii_lowercase().as_str() {
        "easy" => Ok(Difficulty::Easy),
        "medium" => Ok(Difficulty::Medium),
        "hard" => Ok(Difficulty::Hard),
        _ => Err(format!("expected easy, medium or hard, got {s:?}")),
    }
}

fn parse_flavor(s: &str) -> Result<Flavor, String> {
    match s.to_ascii_lowercase().as_str() {
        "rl" => Ok(Flavor::Rl),
        "gen-rl" => Ok(Flavor::GenRl),
        "net-rl" => Ok(Flavor::NetRl),
        _ => Err(format!("expected rl, gen-rl or net-rl, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 23)]
    pub n: usize,
    #[arg(long, value_parser = parse_difficulty, default_value = "easy")]
    pub difficulty: Difficulty,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub shuttles: usize,
    #[arg(long, default_value_t = 3)]
    pub drivers: usize,
    #[arg(long, default_value = "instances")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON training config; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Network size; repeat for net-rl.
    #[arg(long)]
    pub n: Vec<usize>,
    /// Difficulty; repeat for gen-rl.
    #[arg(long, value_parser = parse_difficulty)]
    pub difficulty: Vec<Difficulty>,
    #[arg(long)]
    pub shuttles: Option<usize>,
    #[arg(long)]
    pub drivers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_flavor)]
    pub flavor: Option<Flavor>,
    /// Learning rate for both actor and critic.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub grad_clip: Option<f64>,
    #[arg(long)]
    pub no_distance: bool,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Continue from a checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Instance JSON file or directory.
    #[arg(long)]
    pub instances: PathBuf,
    /// Checkpoint of a trained agent.
    #[arg(long, conflicts_with_all = ["greedy", "random", "oracle"])]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub greedy: bool,
    #[arg(long)]
    pub random: bool,
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 0)]
    pub random_seed: u64,
    /// ResultRow CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// greedy, random[:SEED], oracle, or a checkpoint path.
    #[arg(long)]
    pub a: String,
    #[arg(long)]
    pub b: String,
    #[arg(long)]
    pub instances: PathBuf,
    /// ResultRow CSV of both methods.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// One-row summary CSV with the win_pct field.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// TrainStats CSV files; each becomes one labelled series.
    #[arg(long)]
    pub stats: Vec<PathBuf>,
    #[arg(long)]
    pub rewards_out: Option<PathBuf>,
    /// Instance whose routes are exported.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long, default_value = "greedy")]
    pub method: String,
    #[arg(long)]
    pub routes_out: Option<PathBuf>,
}

/// Parses `args` and runs the command. Usage errors return 2, failures 1.
pub fn run<I, T>(args: I) -> i32
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
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
        Command::Oracle(a) => oracle(a),
        Command::PlotData(a) => plot_data(a),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    std::fs::create_dir_all(&a.out)?;
    for k in 0..a.count as u64 {
        let seed = a.seed + k;
        let inst = generate_instance(seed, a.n, a.difficulty, a.shuttles, a.drivers)?;
        save_instance(&inst, a.out.join(format!("instance_{seed:010}.json")))?;
    }
    println!("wrote {} instances to {}", a.count, a.out.display());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let (mut agent, mut config) = match &a.resume {
        Some(path) => {
            let (agent, config) = Agent::load(path)?;
            (Some(agent), config)
        }
        None => (None, TrainConfig::default()),
    };
    if let Some(path) = &a.config {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        config = serde_json::from_str(&text).context("parsing training config")?;
    }
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = a.$field { config.$field = v; })* };
    }
    set!(epochs, batch, shuttles, drivers, seed, flavor, hidden);
    if !a.n.is_empty() {
        config.sizes = a.n.clone();
    }
    if !a.difficulty.is_empty() {
        config.difficulties = a.difficulty.clone();
    }
    if let Some(lr) = a.lr {
        config.lr_actor = lr;
        config.lr_critic = lr;
    }
    if a.grad_clip.is_some() {
        config.grad_clip = a.grad_clip;
    }
    if a.no_distance {
        config.distance = false;
    }
    if a.checkpoint_every.is_some() {
        config.checkpoint_every = a.checkpoint_every;
    }
    config.checkpoint_dir = Some(a.out.clone());
    config.validate()?;

    std::fs::create_dir_all(&a.out)?;
    std::fs::write(
        a.out.join("config.json"),
        serde_json::to_string_pretty(&config)?,
    )?;
    let mut agent = agent.take().unwrap_or_else(|| Agent::new(&config));
    let stats = train_agent(&mut agent, &config, |s| {
        println!(
            "epoch {:>5}  mean_R {:>9.4}  critic_loss {:>9.4}  {:.2}s",
            s.epoch, s.mean_reward, s.critic_loss, s.seconds
        );
    })?;
    stats.write_csv(&a.out.join("train_stats.csv"))?;
    agent.save(&config, &a.out.join("final.json"))?;
    println!("saved {}", a.out.join("final.json").display());
    Ok(())
}

fn emit_rows(rows: &[ResultRow], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_rows(rows, File::create(path)?),
        None => write_rows(rows, std::io::stdout().lock()),
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    let method = match (&a.checkpoint, a.greedy, a.random, a.oracle) {
        (Some(p), false, false, false) => Method::Rl(p.clone()),
        (None, true, false, false) => Method::Greedy,
        (None, false, true, false) => Method::Random(a.random_seed),
        (None, false, false, true) => Method::Oracle,
        _ => bail!("choose exactly one of --checkpoint, --greedy, --random, --oracle"),
    };
    let instances = load_instances(&a.instances)?;
    let rows = method.run(&instances)?;
    emit_rows(&rows, a.out.as_deref())?;
    let ms: Vec<f64> = rows.iter().map(|r| r.makespan).collect();
    eprintln!(
        "{}: {} instances, mean makespan {:.4}",
        method.label(),
        rows.len(),
        mean(&ms)
    );
    Ok(())
}

fn compare(a: CompareArgs) -> Result<()> {
    let (ma, mb) = (Method::parse(&a.a)?, Method::parse(&a.b)?);
    let instances = load_instances(&a.instances)?;
    let ra = ma.run(&instances)?;
    let rb = mb.run(&instances)?;
    let summary = Summary::new(&ra, &rb)?;
    let all: Vec<ResultRow> = ra.into_iter().chain(rb).collect();
    if let Some(path) = &a.out {
        write_rows(&all, File::create(path)?)?;
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(&summary)?;
    let text = String::from_utf8(w.into_inner()?)?;
    if let Some(path) = &a.summary {
        std::fs::write(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<()> {
    let instances = load_instances(&a.instance)?;
    let rows = Method::Oracle.run(&instances)?;
    emit_rows(&rows, a.out.as_deref())
}

fn plot_data(a: PlotArgs) -> Result<()> {
    if a.stats.is_empty() && a.instance.is_none() {
        bail!("nothing to export: pass --stats and/or --instance");
    }
    if !a.stats.is_empty() {
        let out = a
            .rewards_out
            .clone()
            .unwrap_or_else(|| PathBuf::from("rewards.csv"));
        let mut w = csv::Writer::from_path(&out)?;
        w.write_record(["run", "epoch", "mean_R"])?;
        for path in &a.stats {
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let mut r = csv::Reader::from_path(path)
                .with_context(|| format!("reading {}", path.display()))?;
            for rec in r.records() {
                let rec = rec?;
                w.write_record([label.as_str(), &rec[0], &rec[1]])?;
            }
        }
        w.flush()?;
    }
    if let Some(path) = &a.instance {
        let inst = load_instances(path)?.remove(0);
        let method = Method::parse(&a.method)?;
        let trajectory = match &method {
            Method::Greedy => ffevss_core::greedy_baseline(&mut Env::new(&inst))?,
            Method::Rl(ckpt) => {
                let (agent, _) = Agent::load(ckpt)?;
                ffevss_rl::greedy_inference(&agent.actor, &mut Env::new(&inst))?
            }
            _ => bail!("routes can be exported for greedy or a checkpoint"),
        };
        let nodes: Vec<_> = inst
            .nodes()
            .iter()
            .map(|n| json!({"id": n.id, "x": n.x, "y": n.y, "role": role_name(n.role)}))
            .collect();
        let shuttles: Vec<_> = trajectory
            .routes(inst.num_shuttles())
            .into_iter()
            .enumerate()
            .map(|(s, route)| {
                let start = std::iter::once((0.0, ffevss_core::DEPOT));
                let points: Vec<_> = start
                    .chain(route)
                    .map(|(t, node)| json!({"t": t, "node": node, "x": inst.node(node).x, "y": inst.node(node).y}))
                    .collect();
                json!({"shuttle": s, "polyline": points})
            })
            .collect();
        let doc = json!({
            "seed": inst.seed(),
            "method": method.label(),
            "makespan": -trajectory.total_reward(),
            "nodes": nodes,
            "shuttles": shuttles,
        });
        let out = a
            .routes_out
            .clone()
            .unwrap_or_else(|| PathBuf::from("routes.json"));
        let mut f = File::create(&out)?;
        writeln!(f, "{}", serde_json::to_string_pretty(&doc)?)?;
    }
    Ok(())
}

fn role_name(role: NodeRole) -> &'static str {
    match role {
        NodeRole::Depot => "depot",
        NodeRole::Supplier => "supplier",
        NodeRole::Demander => "demander",
        NodeRole::Charger => "charger",
    }
}
