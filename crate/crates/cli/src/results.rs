use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ffevss_core::{load_instance, oracle_optimal, Env, NetworkInstance, OracleLimits};
use ffevss_rl::{
    evaluate, evaluate_greedy_baseline, evaluate_random, win_pct, Agent, EpisodeResult,
};
use serde::{Deserialize, Serialize};

/// One evaluated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: Option<u64>,
    pub method: String,
    pub makespan: f64,
    pub decisions: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Greedy-decoded policy from a checkpoint file.
    Rl(PathBuf),
    Greedy,
    Random(u64),
    Oracle,
}

impl Method {
    /// `greedy`, `oracle`, `random`, `random:SEED`, `rl:PATH` or a bare
    /// checkpoint path.
    pub fn parse(text: &str) -> Result<Self> {
        Ok(match text {
            "greedy" => Method::Greedy,
            "oracle" => Method::Oracle,
            "random" => Method::Random(0),
            _ => {
                if let Some(seed) = text.strip_prefix("random:") {
                    Method::Random(
                        seed.parse()
                            .with_context(|| format!("bad random seed {seed:?}"))?,
                    )
                } else {
                    let path = text.strip_prefix("rl:").unwrap_or(text);
                    if !Path::new(path).is_file() {
                        bail!("unknown method or missing checkpoint: {text}");
                    }
                    Method::Rl(PathBuf::from(path))
                }
            }
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Method::Rl(_) => "rl",
            Method::Greedy => "greedy",
            Method::Random(_) => "random",
            Method::Oracle => "oracle",
        }
    }

    pub fn run(&self, instances: &[NetworkInstance]) -> Result<Vec<ResultRow>> {
        let results = match self {
            Method::Rl(path) => {
                let (agent, _) = Agent::load(path)?;
                evaluate(&agent.actor, instances)?
            }
            Method::Greedy => evaluate_greedy_baseline(instances)?,
            Method::Random(seed) => evaluate_random(instances, *seed)?,
            Method::Oracle => return instances.iter().map(oracle_row).collect(),
        };
        for (r, inst) in results.iter().zip(instances) {
            if !r.completed {
                bail!(
                    "{} did not complete instance {:?}",
                    self.label(),
                    inst.seed()
                );
            }
        }
        Ok(results.iter().map(|r| row(self.label(), r)).collect())
    }
}

fn row(method: &str, r: &EpisodeResult) -> ResultRow {
    ResultRow {
        seed: r.seed,
        method: method.to_string(),
        makespan: r.makespan,
        decisions: r.decisions,
        seconds: r.seconds,
    }
}

fn oracle_row(inst: &NetworkInstance) -> Result<ResultRow> {
    let start = Instant::now();
    let sol = oracle_optimal(&Env::new(inst), OracleLimits::default())?;
    Ok(ResultRow {
        seed: inst.seed(),
        method: "oracle".into(),
        makespan: sol.makespan,
        decisions: sol.actions.iter().map(Vec::len).sum(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Instances from a JSON file or every `*.json` file of a directory, in
/// file-name order.
pub fn load_instances(path: &Path) -> Result<Vec<NetworkInstance>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        if files.is_empty() {
            bail!("no instance files in {}", path.display());
        }
        files
            .iter()
            .map(|f| load_instance(f).with_context(|| format!("loading {}", f.display())))
            .collect()
    } else {
        Ok(vec![
            load_instance(path).with_context(|| format!("loading {}", path.display()))?
        ])
    }
}

pub fn write_rows<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Mean makespans of two paired result sets and the share of instances on
/// which `a` did at least as well as `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method_a: String,
    pub method_b: String,
    pub instances: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub win_pct: f64,
}

impl Summary {
    pub fn new(a: &[ResultRow], b: &[ResultRow]) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            bail!("result sets must be paired and non-empty");
        }
        let ma: Vec<f64> = a.iter().map(|r| r.makespan).collect();
        let mb: Vec<f64> = b.iter().map(|r| r.makespan).collect();
        Ok(Self {
            method_a: a[0].method.clone(),
            method_b: b[0].method.clone(),
            instances: a.len(),
            mean_a: mean(&ma),
            mean_b: mean(&mb),
            win_pct: win_pct(&ma, &mb),
        })
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}
