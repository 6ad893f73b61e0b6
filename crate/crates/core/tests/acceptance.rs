//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL/SKIP line, even when all pass.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use archmap::cluster::{
    build_hierarchy, grid_search_k, kmedoids, sample_cluster_aware, HierarchyParams, MIN_PER_CLUSTER,
};
use archmap::distance::pairwise;
use archmap::ged::{approx_ged_bipartite, exact_ged_astar};
use archmap::layout::{layout_cluster, Hex, DEFAULT_MAX_PASSES, DEFAULT_STARTS};
use archmap::metrics::ingest_metrics;
use archmap::principles::{evaluate_principles, principle_significance, Principle};
use archmap::search::{filtered_search, SearchConfig, Strategy};
use archmap::sssp::{sssp_bucketed, UNREACHABLE};
use archmap::{apsp_sampled, ArchGraph, Architecture, Backend, DistanceMatrix, OpKind, Space, SpaceSpec, SurrogateModel};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn heap_dijkstra(g: &ArchGraph, source: usize) -> Vec<u64> {
    let mut dist = vec![UNREACHABLE; g.vertex_count()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0;
    heap.push(Reverse((0u64, source)));
    while let Some(Reverse((d, v))) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for (u, w) in g.neighbors(v) {
            let nd = d + w;
            if nd < dist[u] {
                dist[u] = nd;
                heap.push(Reverse((nd, u)));
            }
        }
    }
    dist
}

fn oracle_equivalence() -> Outcome {
    let space = Space::new(SpaceSpec::toy()).unwrap();
    let ids: Vec<u64> = (0..27).collect();
    let start = Instant::now();
    let dm = apsp_sampled(&ArchGraph::build(&space, &ids).unwrap()).unwrap();
    let archs: Vec<Architecture> = ids.iter().map(|&i| space.decode(i).unwrap()).collect();
    let mut mismatches = 0;
    let mut pairs = 0;
    for i in 0..27 {
        for j in i + 1..27 {
            pairs += 1;
            if exact_ged_astar(&space, &archs[i], &archs[j]).unwrap() != dm.get(i, j) {
                mismatches += 1;
            }
        }
    }
    let t = start.elapsed();
    check(
        pairs == 351 && mismatches == 0 && t < Duration::from_secs(10),
        format!("{pairs} pairs, {mismatches} mismatches (tolerance 0), {:.2?} (limit 10 s)", t),
    )
}

fn dijkstra_equality() -> Outcome {
    let space = Space::new(SpaceSpec::nas201()).unwrap();
    let start = Instant::now();
    let g = ArchGraph::build(&space, &[0, 1]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let sources: Vec<usize> = (0..100).map(|_| rng.gen_range(0..g.vertex_count())).collect();
    let bucketed: Vec<Vec<u64>> = sources.iter().map(|&s| sssp_bucketed(&g, s)).collect();
    let t = start.elapsed();
    let differing = sources
        .iter()
        .zip(&bucketed)
        .filter(|(&s, b)| heap_dijkstra(&g, s) != **b)
        .count();
    check(
        g.vertex_count() == 15_625 && differing == 0 && t < Duration::from_secs(60),
        format!(
            "{} vertices, 100 sources, {differing} differing vectors; build + 100 SSSPs {:.2?} (limit 60 s)",
            g.vertex_count(),
            t
        ),
    )
}

fn speedup() -> Outcome {
    let space = Space::new(SpaceSpec::nas201()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ids: Vec<u64> = (0..15_625).collect();
    ids.shuffle(&mut rng);
    ids.truncate(100);
    let (apsp, t_apsp) = single_thread(|| {
        let s = Instant::now();
        let dm = apsp_sampled(&ArchGraph::build(&space, &ids).unwrap()).unwrap();
        (dm, s.elapsed())
    });
    let (astar, t_astar) = single_thread(|| {
        let s = Instant::now();
        let dm = pairwise(&space, &ids, Backend::ExactAstar).unwrap();
        (dm, s.elapsed())
    });
    let ratio = t_astar.as_secs_f64() / t_apsp.as_secs_f64();
    check(
        ratio >= 10.0 && apsp.values() == astar.values(),
        format!(
            "n=100, one thread: APSP {:.2?}, pairwise A* {:.2?}, speedup {ratio:.1}x (need >= 10x); matrices equal: {}",
            t_apsp,
            t_astar,
            apsp.values() == astar.values()
        ),
    )
}

fn bipartite_bound() -> Outcome {
    let space = Space::new(SpaceSpec::toy()).unwrap();
    let none = space.none_op().unwrap();
    let archs: Vec<Architecture> = (0..27).map(|i| space.decode(i).unwrap()).collect();
    let (mut below, mut sub_pairs, mut sub_unequal) = (0, 0, 0);
    for i in 0..27 {
        for j in i + 1..27 {
            let exact = exact_ged_astar(&space, &archs[i], &archs[j]).unwrap();
            let approx = approx_ged_bipartite(&space, &archs[i], &archs[j]);
            if approx < exact {
                below += 1;
            }
            let same_layers = archs[i]
                .ops()
                .iter()
                .zip(archs[j].ops())
                .all(|(&a, &b)| (a == none) == (b == none));
            if same_layers {
                sub_pairs += 1;
                if approx != exact {
                    sub_unequal += 1;
                }
            }
        }
    }
    check(
        below == 0 && sub_unequal == 0,
        format!("351 pairs: {below} below exact; {sub_pairs} substitution-only pairs, {sub_unequal} unequal"),
    )
}

/// Eq. 1 from axial coordinates only.
fn naive_objective(cells: &[Hex], d: &DistanceMatrix) -> f64 {
    let mut total = 0.0;
    for i in 0..cells.len() {
        for j in 0..cells.len() {
            let (dq, dr) = (cells[i].q - cells[j].q, cells[i].r - cells[j].r);
            if [(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)].contains(&(dq, dr)) {
                total += d.get(i, j);
            }
        }
    }
    total
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    fn heap(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(p.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, p, out);
            let j = if k % 2 == 0 { i } else { 0 };
            p.swap(j, k - 1);
        }
    }
    heap(n, &mut p, &mut out);
    out
}

fn layout_quality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut not_optimal = 0;
    for _ in 0..30 {
        let n = rng.gen_range(2..=8);
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen::<f64>() * 10.0, rng.gen::<f64>() * 10.0]).collect();
        let dm = DistanceMatrix::from_fn((0..n as u64).collect(), Backend::ExactApsp, |i, j| {
            ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt()
        });
        let members: Vec<usize> = (0..n).collect();
        let c = layout_cluster(&members, &dm, &[], DEFAULT_MAX_PASSES, DEFAULT_STARTS).unwrap();
        let (grid, refined, got) = (c.grid, c.placement, c.objective);
        let cells: Vec<Hex> = grid.cells().to_vec();
        let optimum = permutations(n)
            .iter()
            .map(|perm| naive_objective(&perm.iter().map(|&c| cells[c]).collect::<Vec<_>>(), &dm))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(got / optimum - 1.0);
        // exhaustive 2-swap scan
        let current: Vec<Hex> = (0..n).map(|m| grid.cell(refined.cell_of[m])).collect();
        let base = naive_objective(&current, &dm);
        for a in 0..n {
            for b in a + 1..n {
                let mut s = current.clone();
                s.swap(a, b);
                if naive_objective(&s, &dm) < base - 1e-9 {
                    not_optimal += 1;
                }
            }
        }
    }
    check(
        worst <= 0.05 && not_optimal == 0,
        format!("30 instances (N <= 8): worst gap {:.2}% (limit 5%), improving 2-swaps found: {not_optimal}", worst * 100.0),
    )
}

fn random_metric(n: usize, rng: &mut ChaCha8Rng) -> DistanceMatrix {
    let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen::<f64>() * 100.0, rng.gen::<f64>() * 100.0]).collect();
    DistanceMatrix::from_fn((0..n as u64).collect(), Backend::ExactApsp, |i, j| {
        ((pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2)).sqrt()
    })
}

fn clustering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut non_monotone = 0;
    let mut over_cap = 0;
    for trial in 0..50 {
        let n = rng.gen_range(10..80);
        let dm = random_metric(n, &mut rng);
        let members: Vec<usize> = (0..n).collect();
        let k = rng.gen_range(2..=6);
        let r = kmedoids(&dm, &members, k, trial).unwrap();
        if r.trace.windows(2).any(|w| w[1] > w[0]) {
            non_monotone += 1;
        }
        if r.trace.len() > 101 {
            over_cap += 1;
        }
    }

    // blobs: intra-distance 1, inter-distance 10
    let blob = |i: usize| i / 20;
    let dm = DistanceMatrix::from_fn((0..40).collect(), Backend::ExactApsp, |i, j| {
        if blob(i) == blob(j) {
            1.0
        } else {
            10.0
        }
    });
    let members: Vec<usize> = (0..40).collect();
    let gs = grid_search_k(&dm, &members, (2, 6), 0).unwrap();
    let recovered = gs.best_k == 2
        && (0..40).all(|i| (gs.best.assignment[i] == gs.best.assignment[0]) == (blob(i) == 0));

    let mut quota_violations = 0;
    for t in 0..100 {
        let n = rng.gen_range(40..200);
        let dm = random_metric(n, &mut rng);
        let params = HierarchyParams { min_cluster: 20, seed: t, ..Default::default() };
        let tree = build_hierarchy(&dm, params).unwrap();
        for level in 0..=tree.depth() {
            let clusters = tree.clusters_at_level(level);
            let budget = rng.gen_range((MIN_PER_CLUSTER * clusters.len()).min(n)..=n + 10);
            let set = sample_cluster_aware(&tree, &dm, level, budget).unwrap();
            for q in &set.quotas {
                let got = set.for_cluster(q.cluster).len();
                if got < q.size.min(MIN_PER_CLUSTER) || got != q.quota {
                    quota_violations += 1;
                }
            }
        }
    }
    check(
        non_monotone == 0 && over_cap == 0 && recovered && quota_violations == 0,
        format!(
            "50 K-medoids runs: {non_monotone} non-monotone, {over_cap} over 100 iterations; two blobs K*={} exact={recovered}; 100 random trees: {quota_violations} quota violations",
            gs.best_k
        ),
    )
}

fn principle_predicates() -> Outcome {
    let space = Space::new(SpaceSpec::nas201()).unwrap();
    let op = |name: &str| space.op_id(name).unwrap();
    // slots 0→1, 0→2, 1→2, 0→3, 1→3, 2→3: identity shortcut plus two
    // stacked conv3x3 paths, with and without a conv1x1 on the middle edge
    let cells = [
        vec![op("conv3x3"), op("conv3x3"), op("none"), op("identity"), op("conv3x3"), op("conv3x3")],
        vec![op("conv3x3"), op("conv3x3"), op("conv1x1"), op("identity"), op("conv3x3"), op("conv3x3")],
    ];
    let all = Principle::all();
    let mut failing = Vec::new();
    for (k, c) in cells.iter().enumerate() {
        let r = evaluate_principles(&space, &Architecture::op_slot(c.clone()), &all);
        for id in ["P4", "P5", "P6", "P7", "P8"] {
            if !r[id] {
                failing.push(format!("cell{k}:{id}"));
            }
        }
    }
    let p5 = Principle::standard("P5").unwrap();
    let avg = space
        .spec()
        .ops
        .iter()
        .position(|o| o.kind == OpKind::PoolAvg)
        .unwrap() as u8;
    let (mut by_predicate, mut by_histogram) = (0, 0);
    for id in 0..15_625u64 {
        let arch = space.decode(id).unwrap();
        by_predicate += p5.holds(&space, &arch) as usize;
        let mut hist = [0usize; 8];
        let mut rest = id;
        for _ in 0..6 {
            hist[(rest % 5) as usize] += 1;
            rest /= 5;
        }
        by_histogram += (hist[avg as usize] == 0) as usize;
    }
    check(
        failing.is_empty() && by_predicate == by_histogram,
        format!(
            "constructed cells failing P4-P8: {:?}; P5 passes {by_predicate} vs histogram count {by_histogram}",
            failing
        ),
    )
}

fn search_cost_reduction() -> Outcome {
    let space = Space::new(SpaceSpec::nas201()).unwrap();
    let filters = Principle::all();
    let budget = 200;
    let mut ratios = Vec::new();
    for seed in 0..20u64 {
        let model = SurrogateModel::new(seed);
        let base = filtered_search(&space, &model, &[], &SearchConfig::new(Strategy::Random, budget, seed)).unwrap();
        let filtered =
            filtered_search(&space, &model, &filters, &SearchConfig::new(Strategy::Random, budget, seed + 1000)).unwrap();
        let target = base.best.unwrap().score;
        let needed = filtered.evaluations_to_reach(target).map_or(f64::INFINITY, |n| n as f64);
        ratios.push(needed / base.evaluated.len() as f64);
    }
    ratios.sort_by(|a, b| a.total_cmp(b));
    let median = (ratios[9] + ratios[10]) / 2.0;
    check(
        median <= 0.5,
        format!(
            "20 paired seeds, budget {budget}: median evaluations to match unfiltered best = {:.1}% of unfiltered (limit 50%)",
            median * 100.0
        ),
    )
}

fn nas201_csv() -> Outcome {
    let Ok(path) = std::env::var("ARCHMAP_NAS201_CSV") else {
        return Outcome::Skip("set ARCHMAP_NAS201_CSV to a NAS-Bench-201 accuracy export to run".into());
    };
    let space = Space::new(SpaceSpec::nas201()).unwrap();
    let table = ingest_metrics(std::path::Path::new(&path), &space).unwrap();
    let p5 = Principle::standard("P5").unwrap();
    let (mut pass, mut fail) = (Vec::new(), Vec::new());
    for row in table.rows() {
        let arch = space.decode(row.arch_id).unwrap();
        if p5.holds(&space, &arch) {
            pass.push(row.accuracy);
        } else {
            fail.push(row.accuracy);
        }
    }
    let s = principle_significance(&pass, &fail).unwrap();
    check(
        s.p_value < 1e-3 && s.effect_direction > 0,
        format!(
            "{} rows: p = {:.3e}, avg-pool group mean {:.4} vs {:.4}",
            table.len(),
            s.p_value,
            s.fail_mean,
            s.pass_mean
        ),
    )
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("oracle-equivalence", oracle_equivalence),
        ("dijkstra-backend-equality", dijkstra_equality),
        ("apsp-speedup", speedup),
        ("bipartite-upper-bound", bipartite_bound),
        ("layout-quality", layout_quality),
        ("clustering-properties", clustering),
        ("principle-predicates", principle_predicates),
        ("search-cost-reduction", search_cost_reduction),
        ("nas201-avgpool-significance", nas201_csv),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        match outcome {
            Outcome::Pass(d) => println!("acceptance {name:<30} PASS  {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("acceptance {name:<30} FAIL  {d}")
            }
            Outcome::Skip(d) => println!("acceptance {name:<30} SKIP  {d}"),
        }
    }
    println!(
        "acceptance {:<30} NOTED generalization accuracies on external datasets, GPU-hour figures, and activation-map percentages need trained networks; not reproduced",
        "out-of-scope"
    );
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
