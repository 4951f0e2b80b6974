//! Seeded batch runs of best-reply dynamics on random instance families.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use netprice::equilibrium::{check_bound, check_equilibrium, BoundKind};
use netprice::instances::{
    gen_random_berge_forest, gen_random_cycle, gen_random_graph, gen_random_graph_edges, gen_random_hyper,
    gen_random_path, gen_random_tree,
};
use netprice::market::{evaluate, max_welfare, MarketInstance, PriceProfile};
use netprice::{generic_dynamics, ExtPrice, Rational, Schedule, TiePolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
#[allow(clippy::enum_variant_names)]
pub enum Family {
    RandomGraph,
    RandomGraphEdges,
    RandomTree,
    RandomPath,
    RandomCycle,
    RandomHyper,
    RandomBergeForest,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Random,
    RoundRobin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Lowest,
    Highest,
    NonMalicious,
}

impl PolicyKind {
    pub fn policy(self) -> TiePolicy {
        match self {
            PolicyKind::Lowest => TiePolicy::PreferLowest,
            PolicyKind::Highest => TiePolicy::PreferHighest,
            PolicyKind::NonMalicious => TiePolicy::non_malicious(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// Random prices on a 1/6 grid up to the largest value, ~1/5 at Infinity.
    Random,
    Infinite,
    Zero,
}

/// Everything that determines an experiment's output.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub family: Family,
    pub n: usize,
    pub edge_prob: f64,
    pub edges: usize,
    pub k_max: usize,
    pub value_max: u64,
    pub trials: u64,
    pub schedule: ScheduleKind,
    pub policy: PolicyKind,
    pub initial: InitialKind,
    /// Fixed step cap; `50 · n · max(|E|, 1)` per trial when absent.
    pub cap: Option<usize>,
    pub seed: u64,
}

/// One CSV row. Rationals appear exact and as floats.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentRow {
    pub trial: u64,
    pub seed: u64,
    pub n: usize,
    pub demands: usize,
    pub converged: bool,
    pub steps: usize,
    pub cap: usize,
    pub revenue: String,
    pub revenue_f64: f64,
    pub max_welfare: String,
    pub max_welfare_f64: f64,
    pub is_nonmal_ne: bool,
    /// Graph revenue bound; empty unless the outcome is a non-malicious NE
    /// on a graph.
    pub bound_thm3_holds: Option<bool>,
    /// Hypergraph revenue bound, same convention.
    pub bound_thm8_holds: Option<bool>,
    /// Revenue over the bound's right-hand side, when a bound was checked.
    pub bound_ratio_f64: Option<f64>,
    pub trace_file: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub trials: u64,
    pub converged: u64,
    pub convergence_rate: f64,
    pub max_steps: usize,
    pub nonmal_ne: u64,
    pub bound_checked: u64,
    pub bound_failures: u64,
    pub min_bound_ratio: Option<f64>,
    pub counterexamples: Vec<String>,
}

/// SplitMix64 step: trial `i` gets `mix(master + (i+1)·γ)`.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master.wrapping_add((trial + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn instance(cfg: &ExperimentConfig, seed: u64) -> Result<MarketInstance> {
    let (n, v) = (cfg.n, cfg.value_max);
    Ok(match cfg.family {
        Family::RandomGraph => gen_random_graph(n, cfg.edge_prob, v, seed),
        Family::RandomGraphEdges => gen_random_graph_edges(n, cfg.edges, v, seed),
        Family::RandomTree => gen_random_tree(n, v, seed),
        Family::RandomPath => gen_random_path(n, v, seed),
        Family::RandomCycle => gen_random_cycle(n, v, seed)?,
        Family::RandomHyper => gen_random_hyper(n, cfg.k_max, cfg.edges, v, seed)?,
        Family::RandomBergeForest => gen_random_berge_forest(n, cfg.k_max, v, seed),
    })
}

fn initial_profile(kind: InitialKind, inst: &MarketInstance, rng: &mut ChaCha8Rng) -> PriceProfile {
    match kind {
        InitialKind::Infinite => PriceProfile::all_infinite(inst),
        InitialKind::Zero => PriceProfile::all_zero(inst),
        InitialKind::Random => {
            let top: i64 = inst.max_value().ceil().try_into().unwrap_or(1);
            PriceProfile::new(
                (0..inst.num_nodes())
                    .map(|_| {
                        if rng.gen_ratio(1, 5) {
                            ExtPrice::Infinity
                        } else {
                            ExtPrice::Finite(Rational::new(rng.gen_range(0..=6 * top.max(1)), 6))
                        }
                    })
                    .collect(),
            )
        }
    }
}

fn run_trial(cfg: &ExperimentConfig, trial: u64, trace_dir: &Path) -> Result<ExperimentRow> {
    let seed = trial_seed(cfg.seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = instance(cfg, rng.gen())?;
    let start = initial_profile(cfg.initial, &inst, &mut rng);
    let schedule = match cfg.schedule {
        ScheduleKind::Random => Schedule::RandomUniform { seed: rng.gen() },
        ScheduleKind::RoundRobin => Schedule::RoundRobin,
    };
    let cap = cfg
        .cap
        .unwrap_or(50 * inst.num_nodes().max(1) * inst.num_demands().max(1));
    let trace = generic_dynamics(&inst, &start, &schedule, &cfg.policy.policy(), cap)?;
    let prices = trace.final_prices(&inst)?;
    let revenue = evaluate(&inst, &prices)?.total_revenue;
    let welfare = max_welfare(&inst);
    let is_nonmal_ne = trace.converged() && check_equilibrium(&inst, &prices, true).is_non_malicious_ne;

    let (mut thm3, mut thm8, mut ratio) = (None, None, None);
    if is_nonmal_ne {
        let kind = if inst.is_graph() { BoundKind::Thm3 } else { BoundKind::Thm8 };
        let report = check_bound(&inst, &prices, &kind)?;
        if report.rhs.is_positive() {
            ratio = Some((&report.lhs / &report.rhs).to_f64());
        }
        if inst.is_graph() {
            thm3 = Some(report.holds);
        } else {
            thm8 = Some(report.holds);
        }
    }

    let mut trace_file = String::new();
    if !trace.converged() {
        std::fs::create_dir_all(trace_dir).with_context(|| format!("creating {}", trace_dir.display()))?;
        let path = trace_dir.join(format!("trial-{trial}-seed-{seed}.json"));
        let doc = serde_json::json!({
            "instance": inst,
            "prices": trace.initial_profile,
            "trace": trace,
        });
        std::fs::write(&path, serde_json::to_string_pretty(&doc)?)
            .with_context(|| format!("writing {}", path.display()))?;
        trace_file = path.display().to_string();
    }

    Ok(ExperimentRow {
        trial,
        seed,
        n: inst.num_nodes(),
        demands: inst.num_demands(),
        converged: trace.converged(),
        steps: trace.steps.len(),
        cap,
        revenue_f64: revenue.to_f64(),
        revenue: revenue.to_string(),
        max_welfare_f64: welfare.to_f64(),
        max_welfare: welfare.to_string(),
        is_nonmal_ne,
        bound_thm3_holds: thm3,
        bound_thm8_holds: thm8,
        bound_ratio_f64: ratio,
        trace_file,
    })
}

/// Runs every trial (in parallel up to `jobs`) and returns rows in trial
/// order.
pub fn run(cfg: &ExperimentConfig, jobs: usize, trace_dir: &Path) -> Result<Vec<ExperimentRow>> {
    if cfg.n == 0 {
        bail!("--n must be positive");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building thread pool")?;
    pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, t, trace_dir).with_context(|| format!("trial {t}")))
            .collect()
    })
}

pub fn summarize(cfg: &ExperimentConfig, rows: &[ExperimentRow]) -> Summary {
    let converged = rows.iter().filter(|r| r.converged).count() as u64;
    let checked: Vec<&ExperimentRow> = rows
        .iter()
        .filter(|r| r.bound_thm3_holds.or(r.bound_thm8_holds).is_some())
        .collect();
    Summary {
        config: cfg.clone(),
        trials: rows.len() as u64,
        converged,
        convergence_rate: if rows.is_empty() { 1.0 } else { converged as f64 / rows.len() as f64 },
        max_steps: rows.iter().map(|r| r.steps).max().unwrap_or(0),
        nonmal_ne: rows.iter().filter(|r| r.is_nonmal_ne).count() as u64,
        bound_checked: checked.len() as u64,
        bound_failures: checked
            .iter()
            .filter(|r| r.bound_thm3_holds.or(r.bound_thm8_holds) == Some(false))
            .count() as u64,
        min_bound_ratio: checked
            .iter()
            .filter_map(|r| r.bound_ratio_f64)
            .min_by(|a, b| a.total_cmp(b)),
        counterexamples: rows
            .iter()
            .filter(|r| !r.trace_file.is_empty())
            .map(|r| r.trace_file.clone())
            .collect(),
    }
}

pub fn write_csv(out: Option<&PathBuf>, rows: &[ExperimentRow]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r)?;
        }
        if rows.is_empty() {
            w.write_record(CSV_COLUMNS)?;
        }
        w.flush()?;
    }
    match out {
        Some(p) if p.as_os_str() != "-" => std::fs::write(p, buf).with_context(|| format!("writing {}", p.display())),
        _ => {
            use std::io::Write;
            std::io::stdout().lock().write_all(&buf)?;
            Ok(())
        }
    }
}

pub const CSV_COLUMNS: [&str; 16] = [
    "trial",
    "seed",
    "n",
    "demands",
    "converged",
    "steps",
    "cap",
    "revenue",
    "revenue_f64",
    "max_welfare",
    "max_welfare_f64",
    "is_nonmal_ne",
    "bound_thm3_holds",
    "bound_thm8_holds",
    "bound_ratio_f64",
    "trace_file",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_seeds_are_distinct_and_stable() {
        let seeds: Vec<u64> = (0..1000).map(|t| trial_seed(7, t)).collect();
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 1000);
        assert_eq!(trial_seed(7, 3), seeds[3]);
        assert_ne!(trial_seed(8, 3), seeds[3]);
    }
}
