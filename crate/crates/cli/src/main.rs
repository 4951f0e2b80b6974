//! `netprice`: generate instances, run dynamics, check equilibria and
//! bounds, compute the monopolist benchmark and run seeded experiments.
//!
//! Commands read and write JSON documents of the form
//! `{"instance": {...}, "prices": {...}}`, so they compose with pipes.
//!
//! Exit status: 0 success, 1 negative verdict, 2 usage or input error,
//! 3 step cap or search budget reached.

mod doc;
mod experiment;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use netprice::equilibrium::{check_bound, check_equilibrium, BoundKind, EXACT_ARBORICITY_LIMIT};
use netprice::instances::{self as gen, ConstructionBundle};
use netprice::market::{evaluate, max_welfare, PriceProfile};
use netprice::metrics::metrics_report;
use netprice::monopolist::{default_grid_step, evaluate_described_profile, monopolist_grid, DEFAULT_GRID_BUDGET};
use netprice::{
    cycle_algorithm, generic_dynamics, path_algorithm, tree_dynamics, tree_fixed_price, DynamicsTrace, Error,
    ExtPrice, Rational, Schedule,
};
use serde_json::{json, Value};

use doc::{load, write_json, Document};
use experiment::{ExperimentConfig, Family, InitialKind, PolicyKind, ScheduleKind};

#[derive(Parser)]
#[command(name = "netprice", version, about = "Pricing games on networks of sellers and single-minded buyers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Io {
    /// Input JSON document (default: stdin).
    #[arg(short, long, global = true)]
    input: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance bundle (instance, reference profiles, known facts).
    Gen(GenArgs),
    /// Run a dynamics algorithm; writes the trace and the final prices.
    Dynamics(DynamicsArgs),
    /// Check equilibrium conditions and revenue bounds for the given prices.
    Check(CheckArgs),
    /// Monopolist revenue: exact grid search or a given profile's revenue.
    Monopolist(MonopolistArgs),
    /// Maximum degree, arboricity, largest demand, Berge acyclicity.
    Metrics(MetricsArgs),
    /// Seeded batch of best-reply dynamics runs; writes CSV rows and a summary.
    #[command(after_help = EXPERIMENT_HELP)]
    Experiment(ExperimentArgs),
}

const EXPERIMENT_HELP: &str = "\
CSV columns (one row per trial, in trial order):
  trial, seed            trial index and its derived seed
  n, demands             instance size
  converged, steps, cap  dynamics outcome and the step cap used
  revenue, revenue_f64   final revenue, exact and as a float
  max_welfare, max_welfare_f64
  is_nonmal_ne           converged to a non-malicious equilibrium
  bound_thm3_holds       graph revenue bound (empty if not applicable)
  bound_thm8_holds       hypergraph revenue bound (empty if not applicable)
  bound_ratio_f64        revenue over the bound's right-hand side
  trace_file             persisted trace of a run that hit the cap

Trial seeds come from a SplitMix64 counter over the master seed, so output
is identical for any --jobs value.";

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GenFamily {
    /// Four goods on a path with values 1, 6, 1.
    #[value(alias = "fig1")]
    FourGoods,
    /// Path A-B-C-D with values 6, 9, 1.
    #[value(alias = "obs6")]
    SixNineOne,
    Path,
    Cycle,
    Star,
    HarmonicStar,
    Clique,
    /// Clique of w+1 sellers, each with harmonic spikes (--w, --d).
    #[value(alias = "thm5")]
    CliqueGadget,
    /// Path with doubling values and harmonic gadgets (--m, --d).
    #[value(alias = "thm6")]
    DoublingPath,
    /// Two adjacent stars with a high-revenue malicious equilibrium (--d).
    #[value(alias = "prop5")]
    TwoStars,
    RandomGraph,
    RandomGraphEdges,
    RandomTree,
    RandomPath,
    RandomCycle,
    RandomHyper,
    RandomBergeForest,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: GenFamily,
    /// Comma-separated edge values for path, cycle and star.
    #[arg(long, value_delimiter = ',')]
    values: Vec<Rational>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    w: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Edge value for clique.
    #[arg(long, default_value = "1")]
    value: Rational,
    /// Edge probability (random-graph).
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Number of demands (random-graph-edges, random-hyper).
    #[arg(long)]
    edges: Option<usize>,
    /// Largest demand size (random-hyper, random-berge-forest).
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Random values are integers in 1..=vmax.
    #[arg(long, default_value_t = 10)]
    vmax: u64,
    #[arg(long, env = "MARKET_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    io: Io,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Alg {
    Path,
    Cycle,
    TreeFixed,
    Tree,
    Generic,
    /// Replay the document's "trace" and report whether it reproduces.
    Replay,
}

#[derive(Args)]
struct DynamicsArgs {
    #[arg(long, value_enum)]
    alg: Alg,
    /// Reference profile of a bundle to start from instead of "prices".
    #[arg(long)]
    profile: Option<String>,
    /// tree-fixed: the seller with the fixed price.
    #[arg(long)]
    seller: Option<String>,
    /// tree-fixed: the fixed price.
    #[arg(long)]
    price: Option<Rational>,
    /// tree: comma-separated leaves that keep their starting price.
    #[arg(long, value_delimiter = ',')]
    fixed: Vec<String>,
    /// generic: seller schedule.
    #[arg(long, value_enum, default_value = "round-robin")]
    schedule: ScheduleKind,
    /// generic: seed for the random schedule.
    #[arg(long, env = "MARKET_SEED", default_value_t = 0)]
    seed: u64,
    /// generic: tie-breaking policy.
    #[arg(long, value_enum, default_value = "non-malicious")]
    policy: PolicyKind,
    /// Step cap (generic default 50·n·max(|E|,1); tree default 10^4·n).
    #[arg(long)]
    cap: Option<usize>,
    #[command(flatten)]
    io: Io,
}

#[derive(Args)]
struct CheckArgs {
    /// Report the Nash equilibrium verdict (default when nothing else is asked).
    #[arg(long)]
    ne: bool,
    /// Report the non-malicious equilibrium verdict.
    #[arg(long = "non-malicious")]
    non_malicious: bool,
    /// Revenue bound to check: graph (thm3), forest (cor1), hypergraph (thm8),
    /// clique-gadget-cap:W,D (thm5-cap), doubling-path-cap:M,D (thm6-cap).
    /// Repeatable.
    #[arg(long)]
    bound: Vec<BoundKind>,
    /// Exit 1 unless the prices are a Nash equilibrium.
    #[arg(long)]
    expect_ne: bool,
    /// Exit 1 unless the prices are a non-malicious equilibrium.
    #[arg(long)]
    expect_non_malicious: bool,
    #[arg(long)]
    profile: Option<String>,
    #[command(flatten)]
    io: Io,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MonoMethod {
    Grid,
    Profile,
}

#[derive(Args)]
struct MonopolistArgs {
    #[arg(long, value_enum, default_value = "grid")]
    method: MonoMethod,
    /// Grid step (default: half the gcd of the values).
    #[arg(long)]
    step: Option<Rational>,
    /// Largest price searched (default: the largest value).
    #[arg(long)]
    bound: Option<Rational>,
    /// Table-entry budget for the grid search.
    #[arg(long, default_value_t = DEFAULT_GRID_BUDGET)]
    budget: u128,
    #[arg(long)]
    profile: Option<String>,
    #[command(flatten)]
    io: Io,
}

#[derive(Args)]
struct MetricsArgs {
    /// Largest node count for exact arboricity.
    #[arg(long, default_value_t = EXACT_ARBORICITY_LIMIT)]
    node_limit: usize,
    #[command(flatten)]
    io: Io,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    edges: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    vmax: u64,
    #[arg(long, value_enum, default_value = "random")]
    schedule: ScheduleKind,
    #[arg(long, value_enum, default_value = "non-malicious")]
    policy: PolicyKind,
    #[arg(long, value_enum, default_value = "random")]
    initial: InitialKind,
    /// Step cap per trial (default 50·n·max(|E|,1)).
    #[arg(long)]
    cap: Option<usize>,
    /// Master seed.
    #[arg(long, env = "MARKET_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// CSV output (default: stdout).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Summary JSON output (default: stdout after a CSV file, else stderr).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Where traces of runs that hit the cap are written.
    #[arg(long, default_value = "counterexamples")]
    trace_dir: PathBuf,
}

enum Status {
    Ok,
    Negative,
    Capped,
}

fn named(doc: &Document, p: &PriceProfile) -> IndexMap<String, ExtPrice> {
    p.to_named(&doc.instance)
}

fn cmd_gen(a: &GenArgs) -> Result<Status> {
    let need = |x: Option<usize>, flag: &str| x.ok_or_else(|| anyhow!("--{flag} is required for this family"));
    // random instances carry no reference profiles, only the welfare fact
    let wrap = |family: &str, instance| -> Result<ConstructionBundle> {
        let welfare = max_welfare(&instance);
        Ok(ConstructionBundle {
            family: family.to_string(),
            instance,
            reference_profiles: IndexMap::new(),
            expected_facts: IndexMap::from([("max_welfare".to_string(), gen::Fact::Value(welfare))]),
        })
    };
    let bundle = match a.family {
        GenFamily::FourGoods => gen::gen_fig1()?,
        GenFamily::SixNineOne => gen::gen_obs6_path()?,
        GenFamily::Path => gen::gen_path(&a.values)?,
        GenFamily::Cycle => gen::gen_cycle(&a.values)?,
        GenFamily::Star => gen::gen_star(&a.values)?,
        GenFamily::HarmonicStar => gen::gen_harmonic_star(need(a.d, "d")?)?,
        GenFamily::Clique => gen::gen_clique_uniform(need(a.n, "n")?, a.value.clone())?,
        GenFamily::CliqueGadget => gen::gen_thm5(need(a.w, "w")?, need(a.d, "d")?)?,
        GenFamily::DoublingPath => gen::gen_thm6(need(a.m, "m")?, need(a.d, "d")?)?,
        GenFamily::TwoStars => gen::gen_prop5_two_stars(need(a.d, "d")?)?,
        GenFamily::RandomGraph => wrap("random-graph", gen::gen_random_graph(need(a.n, "n")?, a.p, a.vmax, a.seed))?,
        GenFamily::RandomGraphEdges => wrap(
            "random-graph-edges",
            gen::gen_random_graph_edges(need(a.n, "n")?, need(a.edges, "edges")?, a.vmax, a.seed),
        )?,
        GenFamily::RandomTree => wrap("random-tree", gen::gen_random_tree(need(a.n, "n")?, a.vmax, a.seed))?,
        GenFamily::RandomPath => wrap("random-path", gen::gen_random_path(need(a.n, "n")?, a.vmax, a.seed))?,
        GenFamily::RandomCycle => wrap("random-cycle", gen::gen_random_cycle(need(a.n, "n")?, a.vmax, a.seed)?)?,
        GenFamily::RandomHyper => wrap(
            "random-hyper",
            gen::gen_random_hyper(need(a.n, "n")?, a.k, need(a.edges, "edges")?, a.vmax, a.seed)?,
        )?,
        GenFamily::RandomBergeForest => wrap(
            "random-berge-forest",
            gen::gen_random_berge_forest(need(a.n, "n")?, a.k, a.vmax, a.seed),
        )?,
    };
    write_json(a.io.output.as_ref(), &bundle)?;
    Ok(Status::Ok)
}

fn cmd_dynamics(a: &DynamicsArgs) -> Result<Status> {
    let doc = load(a.io.input.as_ref(), a.profile.as_deref())?;
    let inst = &doc.instance;
    let node = |name: &str| inst.node_index(name).ok_or_else(|| anyhow!("unknown seller `{name}`"));
    let mut extra = serde_json::Map::new();
    let trace: DynamicsTrace = match a.alg {
        Alg::Path => {
            let run = path_algorithm(inst)?;
            extra.insert("forward_revenue".into(), json!(run.forward_revenue));
            extra.insert("backward_revenue".into(), json!(run.backward_revenue));
            extra.insert("chose_backward".into(), json!(run.chose_backward));
            extra.insert("passes".into(), json!([run.forward, run.backward]));
            if run.chose_backward { run.backward } else { run.forward }
        }
        Alg::Cycle => {
            let run = cycle_algorithm(inst)?;
            extra.insert("special_case".into(), json!(run.special_case));
            extra.insert("chose_counter_clockwise".into(), json!(run.chose_counter_clockwise));
            extra.insert("passes".into(), json!(run.passes));
            run.trace
        }
        Alg::TreeFixed => {
            let seller = a.seller.as_deref().ok_or_else(|| anyhow!("--seller is required"))?;
            let price = a.price.as_ref().ok_or_else(|| anyhow!("--price is required"))?;
            let run = tree_fixed_price(inst, node(seller)?, price)?;
            extra.insert("seller_utility".into(), json!(run.seller_utility));
            run.trace
        }
        Alg::Tree => {
            let fixed = a.fixed.iter().map(|f| node(f)).collect::<Result<Vec<_>>>()?;
            tree_dynamics(inst, &doc.prices_or_infinite(), &fixed, a.cap)?
        }
        Alg::Generic => {
            let schedule = match a.schedule {
                ScheduleKind::Random => Schedule::RandomUniform { seed: a.seed },
                ScheduleKind::RoundRobin => Schedule::RoundRobin,
            };
            let cap = a
                .cap
                .unwrap_or(50 * inst.num_nodes().max(1) * inst.num_demands().max(1));
            generic_dynamics(inst, &doc.prices_or_infinite(), &schedule, &a.policy.policy(), cap)?
        }
        Alg::Replay => {
            let t = doc.raw.get("trace").ok_or_else(|| anyhow!("input has no \"trace\""))?;
            let trace: DynamicsTrace = serde_json::from_value(t.clone()).context("parsing trace")?;
            let reproduced = match trace.replay(inst) {
                Ok(_) => true,
                Err(Error::ReplayMismatch(i)) => {
                    extra.insert("mismatch_step".into(), json!(i));
                    false
                }
                Err(e) => return Err(e.into()),
            };
            extra.insert("reproduced".into(), json!(reproduced));
            if !reproduced {
                let mut out = json!({ "instance": inst });
                out.as_object_mut().unwrap().extend(extra);
                write_json(a.io.output.as_ref(), &out)?;
                return Ok(Status::Negative);
            }
            trace
        }
    };
    let prices = trace.final_prices(inst)?;
    let revenue = evaluate(inst, &prices)?.total_revenue;
    let mut out = json!({
        "instance": inst,
        "prices": named(&doc, &prices),
        "revenue": revenue,
        "max_welfare": max_welfare(inst),
        "converged": trace.converged(),
        "steps": trace.steps.len(),
    });
    let obj = out.as_object_mut().expect("object");
    obj.extend(extra);
    obj.insert("trace".into(), serde_json::to_value(&trace)?);
    write_json(a.io.output.as_ref(), &out)?;
    Ok(if trace.converged() { Status::Ok } else { Status::Capped })
}

fn cmd_check(a: &CheckArgs) -> Result<Status> {
    let doc = load(a.io.input.as_ref(), a.profile.as_deref())?;
    let inst = &doc.instance;
    let prices = doc.prices_or_infinite();
    let outcome = evaluate(inst, &prices)?;
    let refined = a.non_malicious || a.expect_non_malicious;
    let verdict = check_equilibrium(inst, &prices, refined);
    let mut out = json!({
        "instance": inst,
        "prices": named(&doc, &prices),
        "revenue": outcome.total_revenue,
        "realized_welfare": outcome.realized_welfare,
        "max_welfare": max_welfare(inst),
    });
    let obj = out.as_object_mut().expect("object");
    let plain = !a.non_malicious && a.bound.is_empty();
    if a.ne || a.expect_ne || plain {
        obj.insert("ne".into(), json!(verdict.is_ne));
    }
    if refined {
        obj.insert("non_malicious_ne".into(), json!(verdict.is_non_malicious_ne));
    }
    if !verdict.violations.is_empty() {
        obj.insert("violations".into(), serde_json::to_value(&verdict.violations)?);
    }
    let mut negative = (a.expect_ne && !verdict.is_ne) || (a.expect_non_malicious && !verdict.is_non_malicious_ne);
    let mut bounds = Vec::new();
    for kind in &a.bound {
        match check_bound(inst, &prices, kind) {
            Ok(report) => {
                negative |= !report.holds;
                bounds.push(serde_json::to_value(&report)?);
            }
            // a precondition failing is a negative verdict, not a usage error
            Err(e @ (Error::NotNe | Error::NotNonMaliciousNe | Error::BoundMismatch { .. } | Error::NotGraph | Error::NotTree)) => {
                negative = true;
                bounds.push(json!({ "name": kind.to_string(), "holds": Value::Null, "error": e.to_string() }));
            }
            Err(e) => return Err(e.into()),
        }
    }
    if !a.bound.is_empty() {
        obj.insert("bounds".into(), Value::Array(bounds));
    }
    write_json(a.io.output.as_ref(), &out)?;
    Ok(if negative { Status::Negative } else { Status::Ok })
}

fn cmd_monopolist(a: &MonopolistArgs) -> Result<Status> {
    let doc = load(a.io.input.as_ref(), a.profile.as_deref())?;
    let inst = &doc.instance;
    let result = match a.method {
        MonoMethod::Profile => {
            let p = doc
                .prices
                .as_ref()
                .ok_or_else(|| anyhow!("--method profile needs \"prices\" or --profile"))?;
            evaluate_described_profile(inst, p)?
        }
        MonoMethod::Grid => {
            let step = a.step.clone().unwrap_or_else(|| default_grid_step(inst));
            let bound = a.bound.clone().unwrap_or_else(|| inst.max_value());
            match monopolist_grid(inst, &step, &bound, a.budget) {
                Ok(r) => r,
                Err(e @ Error::BudgetExceeded { .. }) => {
                    eprintln!("netprice: {e}");
                    return Ok(Status::Capped);
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    let mut out = json!({ "instance": inst });
    let obj = out.as_object_mut().expect("object");
    if let Value::Object(m) = serde_json::to_value(&result)? {
        obj.extend(m);
    }
    write_json(a.io.output.as_ref(), &out)?;
    Ok(Status::Ok)
}

fn cmd_metrics(a: &MetricsArgs) -> Result<Status> {
    let doc = load(a.io.input.as_ref(), None)?;
    write_json(a.io.output.as_ref(), &metrics_report(&doc.instance, a.node_limit))?;
    Ok(Status::Ok)
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<Status> {
    if a.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let cfg = ExperimentConfig {
        family: a.family,
        n: a.n,
        edge_prob: a.p,
        edges: a.edges,
        k_max: a.k,
        value_max: a.vmax,
        trials: a.trials,
        schedule: a.schedule,
        policy: a.policy,
        initial: a.initial,
        cap: a.cap,
        seed: a.seed,
    };
    let rows = experiment::run(&cfg, a.jobs, &a.trace_dir)?;
    experiment::write_csv(a.csv.as_ref(), &rows)?;
    let summary = experiment::summarize(&cfg, &rows);
    match (&a.summary, &a.csv) {
        (Some(p), _) => write_json(Some(p), &summary)?,
        (None, Some(_)) => write_json(None, &summary)?,
        (None, None) => eprintln!("{}", serde_json::to_string_pretty(&summary)?),
    }
    Ok(if summary.converged == summary.trials { Status::Ok } else { Status::Capped })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Dynamics(a) => cmd_dynamics(a),
        Command::Check(a) => cmd_check(a),
        Command::Monopolist(a) => cmd_monopolist(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Experiment(a) => cmd_experiment(a),
    };
    match result {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Negative) => ExitCode::from(1),
        Ok(Status::Capped) => ExitCode::from(3),
        Err(e) => {
            eprintln!("netprice: {e:#}");
            ExitCode::from(2)
        }
    }
}
