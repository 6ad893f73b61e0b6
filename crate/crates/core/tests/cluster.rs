use std::collections::HashSet;

use archmap::cluster::{
    build_hierarchy, grid_search_k, kmedoids, medoid_of, quota, sample_cluster_aware,
    select_representatives, ClusterNode, HierarchyParams,
};
use archmap::{Backend, DistanceMatrix, Error};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn euclidean(points: &[(f64, f64)]) -> DistanceMatrix {
    let ids = (0..points.len() as u64).collect();
    DistanceMatrix::from_fn(ids, Backend::ExactApsp, |i, j| {
        let (a, b) = (points[i], points[j]);
        ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
    })
}

fn random_points(n: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (rng.gen::<f64>() * 100.0, rng.gen::<f64>() * 100.0)).collect()
}

fn blobs(size: usize) -> DistanceMatrix {
    let ids = (0..2 * size as u64).collect();
    DistanceMatrix::from_fn(ids, Backend::ExactApsp, |i, j| if (i < size) == (j < size) { 1.0 } else { 10.0 })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn kmedoids_is_a_partition_with_true_medoids(n in 6usize..40, k in 1usize..6, seed in any::<u64>()) {
        let dm = euclidean(&random_points(n, seed));
        let members: Vec<usize> = (0..n).collect();
        let km = kmedoids(&dm, &members, k, seed).unwrap();
        prop_assert_eq!(km.assignment.len(), n);
        prop_assert_eq!(km.medoids.iter().collect::<HashSet<_>>().len(), k);
        let mut total = 0.0;
        for (i, &c) in km.assignment.iter().enumerate() {
            prop_assert!(c < k);
            let nearest = km.medoids.iter().map(|&m| dm.get(i, m)).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(dm.get(i, km.medoids[c]), nearest);
            total += nearest;
        }
        prop_assert!((total - km.objective).abs() < 1e-9);
        for (c, &med) in km.medoids.iter().enumerate() {
            let cluster: Vec<usize> = (0..n).filter(|&i| km.assignment[i] == c).collect();
            prop_assert!(cluster.contains(&med));
            let cost = |x: usize| cluster.iter().map(|&m| dm.get(x, m)).sum::<f64>();
            for &x in &cluster {
                prop_assert!(cost(med) <= cost(x) + 1e-9);
            }
        }
        for w in km.trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        let again = kmedoids(&dm, &members, k, seed).unwrap();
        prop_assert_eq!(again.assignment, km.assignment);
        prop_assert_eq!(again.medoids, km.medoids);
    }

    #[test]
    fn quota_keeps_floor_cap_and_order(budget in 1usize..2000, sizes in prop::collection::vec(1usize..1000, 1..8)) {
        let total: usize = sizes.iter().sum();
        let quotas: Vec<usize> = sizes.iter().map(|&s| quota(budget, s, total)).collect();
        for (&q, &s) in quotas.iter().zip(&sizes) {
            prop_assert!(q <= s);
            prop_assert!(q >= s.min(10));
            let share = budget as f64 * s as f64 / total as f64;
            if q > 10 && q < s {
                prop_assert!((q as f64 - share).abs() <= 0.5);
            }
        }
        for i in 0..sizes.len() {
            for j in 0..sizes.len() {
                if sizes[i] <= sizes[j] {
                    prop_assert!(quotas[i] <= quotas[j]);
                }
            }
        }
    }
}

#[test]
fn quota_example() {
    let q: Vec<usize> = [800, 150, 50].iter().map(|&s| quota(200, s, 1000)).collect();
    assert_eq!(q, vec![160, 30, 10]);
}

#[test]
fn k_equal_to_members_costs_nothing() {
    let dm = euclidean(&random_points(7, 1));
    let members: Vec<usize> = (0..7).collect();
    assert_eq!(kmedoids(&dm, &members, 7, 0).unwrap().objective, 0.0);
}

#[test]
fn duplicates_make_large_k_degenerate() {
    let dm = DistanceMatrix::from_fn((0..4).collect(), Backend::ExactApsp, |i, j| {
        if i / 2 == j / 2 { 0.0 } else { 1.0 }
    });
    let members: Vec<usize> = (0..4).collect();
    assert!(matches!(kmedoids(&dm, &members, 3, 0), Err(Error::DegenerateK { k: 3, distinct: 2 })));
}

#[test]
fn two_blobs_choose_two() {
    let dm = blobs(20);
    let members: Vec<usize> = (0..40).collect();
    let gs = grid_search_k(&dm, &members, (2, 8), 0).unwrap();
    assert_eq!(gs.best_k, 2);
    let best = gs.curve.iter().min_by(|a, b| a.score.total_cmp(&b.score)).unwrap();
    assert_eq!(best.k, gs.best_k);
    let a = gs.best.assignment[0];
    assert!((0..20).all(|i| gs.best.assignment[i] == a));
    assert!((20..40).all(|i| gs.best.assignment[i] != a));
}

#[test]
fn chosen_k_minimizes_the_logged_score() {
    for seed in 0..5 {
        let dm = euclidean(&random_points(60, seed));
        let members: Vec<usize> = (0..60).collect();
        let gs = grid_search_k(&dm, &members, (2, 10), seed).unwrap();
        let min = gs.curve.iter().map(|s| s.score).fold(f64::INFINITY, f64::min);
        let first = gs.curve.iter().find(|s| s.score == min).unwrap();
        assert_eq!(first.k, gs.best_k);
    }
}

#[test]
fn hierarchy_partitions_every_level() {
    let dm = euclidean(&random_points(200, 9));
    let tree = build_hierarchy(&dm, HierarchyParams { max_depth: 3, ..Default::default() }).unwrap();
    for level in 0..=tree.depth() {
        let mut seen: Vec<usize> =
            tree.clusters_at_level(level).iter().flat_map(|&c| tree.nodes[c].members.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..200).collect::<Vec<_>>());
    }
    for node in &tree.nodes {
        assert_eq!(node.medoid, medoid_of(&dm, &node.members));
        if !node.children.is_empty() {
            let mut union: Vec<usize> =
                node.children.iter().flat_map(|&c| tree.nodes[c].members.clone()).collect();
            union.sort_unstable();
            assert_eq!(union, node.members);
        }
    }
    let again = build_hierarchy(&dm, HierarchyParams { max_depth: 3, ..Default::default() }).unwrap();
    assert_eq!(again, tree);
}

/// Max-min subset by brute force: the medoid plus four of the top ten.
fn brute_force_reps(dm: &DistanceMatrix, medoid: usize, pool: &[usize]) -> Vec<usize> {
    let mut best = (f64::NEG_INFINITY, vec![]);
    let n = pool.len();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() != 4 {
            continue;
        }
        let mut chosen = vec![medoid];
        chosen.extend((0..n).filter(|b| mask & (1 << b) != 0).map(|b| pool[b]));
        let mut min = f64::INFINITY;
        for a in 0..chosen.len() {
            for b in a + 1..chosen.len() {
                min = min.min(dm.get(chosen[a], chosen[b]));
            }
        }
        if min > best.0 {
            best = (min, chosen);
        }
    }
    best.1
}

#[test]
fn representatives_match_brute_force() {
    for seed in 0..10 {
        let dm = euclidean(&random_points(20, 100 + seed));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let acc: Vec<f64> = (0..20).map(|_| rng.gen()).collect();
        let members: Vec<usize> = (0..20).collect();
        let medoid = medoid_of(&dm, &members);
        let node = ClusterNode {
            id: 0,
            level: 0,
            parent: None,
            members,
            medoid,
            children: vec![],
            representatives: vec![],
            k_curve: vec![],
            stats: None,
        };
        let mut top: Vec<usize> = (0..20).collect();
        top.sort_by(|&a, &b| acc[b].total_cmp(&acc[a]));
        let pool: Vec<usize> = top.into_iter().take(10).filter(|&m| m != medoid).collect();
        let mut want = brute_force_reps(&dm, medoid, &pool);
        let mut got = select_representatives(&node, &dm, Some(&acc), 5);
        assert_eq!(got[0], medoid);
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want, "seed {seed}");
    }
}

#[test]
fn samples_respect_quotas() {
    let dm = euclidean(&random_points(300, 4));
    let tree = build_hierarchy(&dm, HierarchyParams { max_depth: 2, ..Default::default() }).unwrap();
    let set = sample_cluster_aware(&tree, &dm, 1, 100).unwrap();
    let total: usize = set.quotas.iter().map(|q| q.size).sum();
    assert_eq!(total, 300);
    for q in &set.quotas {
        assert_eq!(q.quota, quota(100, q.size, total));
        let picked = set.for_cluster(q.cluster);
        assert_eq!(picked.len(), q.quota);
        assert_eq!(picked[0], tree.nodes[q.cluster].medoid);
        assert!(picked.iter().all(|m| tree.nodes[q.cluster].members.contains(m)));
        assert_eq!(picked.iter().collect::<HashSet<_>>().len(), picked.len());
    }
}
