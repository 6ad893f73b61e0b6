//! The batch pipeline: one function per subcommand. Each returns a JSON
//! summary that `main` prints to stdout.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use archmap::cluster::{build_hierarchy, HierarchyParams, DEFAULT_K_RANGE, DEFAULT_MAX_DEPTH, DEFAULT_MIN_CLUSTER};
use archmap::distance::pairwise;
use archmap::layout::{layout_levels, ViewParams, DEFAULT_STARTS};
use archmap::metrics::ingest_metrics;
use archmap::persist::{load_distances, load_tree, save_distances, save_json, save_layouts, save_tree, CacheKey};
use archmap::principles::{evaluate_principles, load_principles, principle_significance};
use archmap::search::{filtered_search, render_table, Scorer, SearchConfig, SearchTrace, Strategy};
use archmap::{apsp_sampled, ArchGraph, Backend, DistanceMatrix, MetricTable, Principle, Space, SpaceSpec, SurrogateModel};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{CliError, Result};

#[derive(Parser, Debug)]
#[command(name = "archmap", version, about = "Distances, clusters and layouts for NAS search spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a space and write its pairwise distance cache.
    Distances(DistancesArgs),
    /// Build the cluster hierarchy from a distance cache.
    Cluster(ClusterArgs),
    /// Lay out every navigation level of a cluster tree.
    Layout(LayoutArgs),
    /// Compare principle-filtered and unfiltered search.
    Search(SearchArgs),
    /// Design principle statistics.
    Principles {
        #[command(subcommand)]
        command: PrinciplesCommand,
    },
    /// Serve the exploration API.
    Serve(ServeArgs),
}

#[derive(Subcommand, Debug)]
pub enum PrinciplesCommand {
    /// Pass counts and significance tests per principle.
    Eval(EvalArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendArg {
    ExactApsp,
    Astar,
    Bipartite,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyArg {
    Random,
    Evolution,
}

/// Where accuracies come from: a metrics CSV or the surrogate scorer.
#[derive(Args, Debug, Clone, Default)]
pub struct MetricSource {
    #[arg(long, conflicts_with = "surrogate")]
    pub metrics: Option<PathBuf>,
    /// Seed of the surrogate scorer.
    #[arg(long)]
    pub surrogate: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct DistancesArgs {
    /// Preset name (nas201, toy, nas101) or a space spec JSON file.
    #[arg(long)]
    pub space: String,
    #[arg(long)]
    pub sample: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "exact-apsp")]
    pub backend: BackendArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ClusterArgs {
    #[arg(long)]
    pub dist: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MAX_DEPTH)]
    pub max_depth: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_CLUSTER)]
    pub min_cluster: usize,
    #[arg(long, default_value_t = DEFAULT_K_RANGE.0)]
    pub k_min: usize,
    #[arg(long, default_value_t = DEFAULT_K_RANGE.1)]
    pub k_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Needed with --metrics or --surrogate.
    #[arg(long)]
    pub space: Option<String>,
    #[command(flatten)]
    pub source: MetricSource,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct LayoutArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub dist: PathBuf,
    /// Architectures shown per view.
    #[arg(long, default_value_t = 300)]
    pub budget: usize,
    #[arg(long, default_value_t = DEFAULT_STARTS)]
    pub starts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub space: Option<String>,
    #[command(flatten)]
    pub source: MetricSource,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct SearchArgs {
    #[arg(long)]
    pub space: String,
    #[command(flatten)]
    pub source: MetricSource,
    #[arg(long, value_enum, default_value = "random")]
    pub strategy: StrategyArg,
    /// Principle config; P4-P8 as filters when omitted.
    #[arg(long)]
    pub principles: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub budget: usize,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[arg(long)]
    pub space: String,
    #[command(flatten)]
    pub source: MetricSource,
    #[arg(long)]
    pub principles: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long)]
    pub session_dir: PathBuf,
    /// Defaults to `space.json` in the session dir.
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long)]
    pub dist: Option<PathBuf>,
    #[arg(long)]
    pub tree: Option<PathBuf>,
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long)]
    pub traces: Option<PathBuf>,
    #[command(flatten)]
    pub source: MetricSource,
}

/// A preset name or a path to a spec file.
pub fn load_space(arg: &str) -> Result<Space> {
    let spec = match SpaceSpec::preset(arg) {
        Some(spec) => spec,
        None => {
            let text = std::fs::read_to_string(arg)
                .map_err(|e| CliError::Usage(format!("space {arg:?} is neither a preset nor a readable file: {e}")))?;
            SpaceSpec::from_json(&text)?
        }
    };
    Ok(Space::new(spec)?)
}

/// Metrics for `ids` from the CSV or the surrogate, or none.
pub fn load_metrics(space: &Space, source: &MetricSource, ids: &[u64]) -> Result<Option<MetricTable>> {
    match (&source.metrics, source.surrogate) {
        (Some(path), _) => Ok(Some(ingest_metrics(path, space)?)),
        (None, Some(seed)) => Ok(Some(MetricTable::from_surrogate(space, &SurrogateModel::new(seed), ids, 1.0)?)),
        (None, None) => Ok(None),
    }
}

fn check_same_space(space: &Space, key: &CacheKey) -> Result<()> {
    if space.spec_hash() != key.space_hash {
        return Err(archmap::Error::StaleCache(format!(
            "distances were computed for space {:016x}, not {:016x}",
            key.space_hash,
            space.spec_hash()
        ))
        .into());
    }
    Ok(())
}

/// Accuracies aligned with the matrix rows, when a space and a metric
/// source were both given.
fn accuracies(space: Option<&str>, source: &MetricSource, dm: &DistanceMatrix, key: &CacheKey) -> Result<Option<Vec<f64>>> {
    if source.metrics.is_none() && source.surrogate.is_none() {
        return Ok(None);
    }
    let space = load_space(space.ok_or_else(|| CliError::Usage("--space is required with metrics".into()))?)?;
    check_same_space(&space, key)?;
    Ok(load_metrics(&space, source, dm.ids())?.map(|m| m.accuracies(dm.ids())))
}

fn sample_ids(space: &Space, n: usize, seed: u64) -> Result<Vec<u64>> {
    if n < 2 || n as u128 > space.size() {
        return Err(CliError::Usage(format!("--sample must be in 2..={}", space.size())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<u64> = if space.size() <= u32::MAX as u128 {
        index::sample(&mut rng, space.size() as usize, n)
            .into_iter()
            .map(|i| space.nth(i as u64).map(|a| space.arch_id(&a)))
            .collect::<archmap::Result<_>>()?
    } else {
        let mut seen = HashSet::new();
        while seen.len() < n {
            seen.insert(space.arch_id(&space.random(&mut rng)));
        }
        seen.into_iter().collect()
    };
    ids.sort_unstable();
    Ok(ids)
}

pub fn distances(args: &DistancesArgs) -> Result<Value> {
    let space = load_space(&args.space)?;
    let ids = sample_ids(&space, args.sample, args.seed)?;
    let start = Instant::now();
    let dm = match args.backend {
        BackendArg::ExactApsp => apsp_sampled(&ArchGraph::build(&space, &ids)?)?,
        BackendArg::Astar => pairwise(&space, &ids, Backend::ExactAstar)?,
        BackendArg::Bipartite => pairwise(&space, &ids, Backend::ApproxBipartite)?,
    };
    let seconds = start.elapsed().as_secs_f64();
    save_distances(&args.out, &dm, &CacheKey::new(&space, &ids))?;
    Ok(json!({
        "out": args.out,
        "n": dm.len(),
        "backend": dm.backend().name(),
        "seconds": seconds,
        "space_hash": format!("{:016x}", space.spec_hash()),
    }))
}

pub fn cluster(args: &ClusterArgs) -> Result<Value> {
    let (dm, key) = load_distances(&args.dist, None)?;
    let accuracy = accuracies(args.space.as_deref(), &args.source, &dm, &key)?;
    let params = HierarchyParams {
        max_depth: args.max_depth,
        min_cluster: args.min_cluster,
        k_range: (args.k_min, args.k_max),
        seed: args.seed,
    };
    let start = Instant::now();
    let mut tree = build_hierarchy(&dm, params)?;
    if let Some(acc) = &accuracy {
        tree.attach_metrics(acc);
    }
    tree.assign_representatives(&dm, accuracy.as_deref());
    save_tree(&args.out, &tree, &dm, key.space_hash)?;
    Ok(json!({
        "out": args.out,
        "nodes": tree.nodes.len(),
        "depth": tree.depth(),
        "root_k": tree.root().children.len(),
        "seconds": start.elapsed().as_secs_f64(),
    }))
}

pub fn layout(args: &LayoutArgs) -> Result<Value> {
    let (dm, key) = load_distances(&args.dist, None)?;
    let (tree, _) = load_tree(&args.tree, &dm, Some(key.space_hash))?;
    let accuracy = accuracies(args.space.as_deref(), &args.source, &dm, &key)?;
    let params = ViewParams { budget: args.budget, starts: args.starts, seed: args.seed, ..Default::default() };
    let start = Instant::now();
    let levels = layout_levels(&dm, &tree, accuracy.as_deref(), key.space_hash, &params)?;
    save_layouts(&args.out, &levels, key.space_hash)?;
    Ok(json!({
        "out": args.out,
        "levels": levels.len(),
        "shown": levels.iter().map(|l| l.arch_ids().len()).collect::<Vec<_>>(),
        "seconds": start.elapsed().as_secs_f64(),
    }))
}

fn read_principles(path: Option<&Path>) -> Result<Vec<Principle>> {
    match path {
        Some(p) => Ok(load_principles(&std::fs::read_to_string(p)?)?),
        None => Ok(["P4", "P5", "P6", "P7", "P8"].iter().map(|id| Principle::standard(id)).collect::<archmap::Result<_>>()?),
    }
}

fn scorer(space: &Space, source: &MetricSource) -> Result<Box<dyn Scorer>> {
    match (&source.metrics, source.surrogate) {
        (Some(path), _) => Ok(Box::new(ingest_metrics(path, space)?)),
        (None, Some(seed)) => Ok(Box::new(SurrogateModel::new(seed))),
        (None, None) => Err(CliError::Usage("one of --metrics or --surrogate is required".into())),
    }
}

pub fn trace_name(strategy: Strategy, filtered: bool, seed: u64) -> String {
    let s = match strategy {
        Strategy::Random => "random",
        Strategy::Evolution => "evolution",
    };
    format!("{s}_{}_s{seed}", if filtered { "filtered" } else { "unfiltered" })
}

pub fn search(args: &SearchArgs) -> Result<(Value, String)> {
    let space = load_space(&args.space)?;
    let scorer = scorer(&space, &args.source)?;
    let principles = read_principles(args.principles.as_deref())?;
    let strategy = match args.strategy {
        StrategyArg::Random => Strategy::Random,
        StrategyArg::Evolution => Strategy::Evolution,
    };
    std::fs::create_dir_all(&args.out)?;
    let mut runs: Vec<(String, SearchTrace)> = Vec::new();
    let mut seeds = Vec::new();
    for &seed in &args.seeds {
        let config = SearchConfig::new(strategy, args.budget, seed);
        let plain = filtered_search(&space, scorer.as_ref(), &[], &config)?;
        let filtered = filtered_search(&space, scorer.as_ref(), &principles, &config)?;
        let target = plain.best.map_or(f64::NEG_INFINITY, |b| b.score);
        let reach = filtered.evaluations_to_reach(target);
        seeds.push(json!({
            "seed": seed,
            "unfiltered_best": plain.best.map(|b| b.score),
            "filtered_best": filtered.best.map(|b| b.score),
            "filtered_evaluations_to_match": reach,
            "ratio": reach.map(|r| r as f64 / plain.evaluated.len() as f64),
            "discarded_by_filter": filtered.discarded_by_filter,
        }));
        for (trace, is_filtered) in [(plain, false), (filtered, true)] {
            let name = trace_name(strategy, is_filtered, seed);
            save_json(&args.out.join(format!("{name}.json")), &trace)?;
            runs.push((name, trace));
        }
    }
    let labeled: Vec<(String, &SearchTrace)> = runs.iter().map(|(n, t)| (n.clone(), t)).collect();
    let table = render_table(&labeled);
    std::fs::write(args.out.join("table.txt"), &table)?;
    let summary = json!({
        "version": 1,
        "space_hash": format!("{:016x}", space.spec_hash()),
        "filters": runs.iter().find(|r| !r.1.filters.is_empty()).map(|r| r.1.filters.clone()).unwrap_or_default(),
        "budget": args.budget,
        "seeds": seeds,
    });
    save_json(&args.out.join("summary.json"), &summary)?;
    Ok((summary, table))
}

pub fn principles_eval(args: &EvalArgs) -> Result<Value> {
    let space = load_space(&args.space)?;
    let set = match &args.principles {
        Some(_) => read_principles(args.principles.as_deref())?,
        None => Principle::all(),
    };
    let universe: Vec<u64> = match (&args.source.metrics, args.source.surrogate) {
        (Some(path), _) => ingest_metrics(path, &space)?.rows().iter().map(|r| r.arch_id).collect(),
        _ => space.enumerate(None)?.map(|a| space.arch_id(&a)).collect(),
    };
    let metrics = load_metrics(&space, &args.source, &universe)?;
    let mut pass = vec![Vec::new(); set.len()];
    let mut fail = vec![Vec::new(); set.len()];
    let mut counts = vec![[0usize; 2]; set.len()];
    for &id in &universe {
        let arch = space.decode(id)?;
        let result = evaluate_principles(&space, &arch, &set);
        let acc = metrics.as_ref().and_then(|m| m.accuracy(id));
        for (k, p) in set.iter().enumerate() {
            let ok = result[&p.id];
            counts[k][usize::from(!ok)] += 1;
            if let Some(a) = acc {
                if ok { pass[k].push(a) } else { fail[k].push(a) }
            }
        }
    }
    let rows: Vec<Value> = set
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let significance = if metrics.is_some() {
                match principle_significance(&pass[k], &fail[k]) {
                    Ok(s) => json!(s),
                    Err(e) => json!({ "error": e.kind(), "message": e.to_string() }),
                }
            } else {
                Value::Null
            };
            json!({
                "id": p.id,
                "mode": p.mode,
                "pass": counts[k][0],
                "fail": counts[k][1],
                "significance": significance,
            })
        })
        .collect();
    let out = json!({
        "space_hash": format!("{:016x}", space.spec_hash()),
        "universe": universe.len(),
        "principles": rows,
    });
    if let Some(path) = &args.out {
        save_json(path, &out)?;
    }
    Ok(out)
}
