use archmap::cluster::{build_hierarchy, HierarchyParams};
use archmap::layout::{layout_levels, ViewParams};
use archmap::persist::{
    decode_distances, encode_distances, load_distances, load_layouts, load_tree, save_distances, save_layouts,
    save_tree, CacheKey,
};
use archmap::{apsp_sampled, ArchGraph, DistanceMatrix, Error, Space, SpaceSpec};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sample(n: usize, seed: u64) -> Vec<u64> {
    let all: Vec<u64> = (0..15_625).collect();
    all.choose_multiple(&mut ChaCha8Rng::seed_from_u64(seed), n).copied().collect()
}

fn nas_matrix(n: usize) -> (Space, DistanceMatrix) {
    let space = Space::new(SpaceSpec::nas201()).unwrap();
    let dm = apsp_sampled(&ArchGraph::build(&space, &sample(n, 7)).unwrap()).unwrap();
    (space, dm)
}

#[test]
fn distance_cache_round_trips_exactly() {
    let (space, dm) = nas_matrix(500);
    let key = CacheKey::new(&space, dm.ids());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.axdm");
    save_distances(&path, &dm, &key).unwrap();
    let first = std::fs::read(&path).unwrap();
    assert_eq!(&first[..4], b"AXDM");
    assert_eq!(first.len(), 39 + 8 * 500 + 500 * 499 / 2 * 4);

    let (back, k) = load_distances(&path, Some(&key)).unwrap();
    assert_eq!(k, key);
    assert_eq!(back, dm);
    save_distances(&path, &back, &k).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn cost_or_sample_changes_make_the_cache_stale() {
    let (space, dm) = nas_matrix(40);
    let key = CacheKey::new(&space, dm.ids());
    let bytes = encode_distances(&dm, &key).unwrap();

    let mut spec = SpaceSpec::nas201();
    let mut costs = space.cost_matrix().to_vec();
    costs[2][3] = 2.0;
    costs[3][2] = 2.0;
    spec.cost_matrix = Some(costs);
    let edited = Space::new(spec).unwrap();
    let stale = CacheKey::new(&edited, dm.ids());
    assert_ne!(stale.cost_hash, key.cost_hash);
    assert!(matches!(decode_distances(&bytes, Some(&stale)), Err(Error::StaleCache(_))));

    let mut reordered = dm.ids().to_vec();
    reordered.swap(0, 1);
    let other = CacheKey::new(&space, &reordered);
    assert!(matches!(decode_distances(&bytes, Some(&other)), Err(Error::StaleCache(_))));
    assert!(decode_distances(&bytes, None).is_ok());
}

#[test]
fn corrupt_caches_are_rejected() {
    let (space, dm) = nas_matrix(10);
    let bytes = encode_distances(&dm, &CacheKey::new(&space, dm.ids())).unwrap();
    assert!(matches!(decode_distances(&bytes[..bytes.len() - 1], None), Err(Error::CorruptFile(_))));
    assert!(matches!(decode_distances(&bytes[..20], None), Err(Error::CorruptFile(_))));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_distances(&bad, None), Err(Error::CorruptFile(_))));
}

#[test]
fn tree_and_layout_files_round_trip() {
    let (space, dm) = nas_matrix(300);
    let hash = space.spec_hash();
    let mut tree = build_hierarchy(&dm, HierarchyParams { max_depth: 2, ..Default::default() }).unwrap();
    tree.assign_representatives(&dm, None);
    let dir = tempfile::tempdir().unwrap();

    let tree_path = dir.path().join("tree.json");
    save_tree(&tree_path, &tree, &dm, hash).unwrap();
    let text = std::fs::read_to_string(&tree_path).unwrap();
    assert!(text.trim_start().starts_with("{\n  \"version\""));
    let (back, h) = load_tree(&tree_path, &dm, Some(hash)).unwrap();
    assert_eq!((back.clone(), h), (tree.clone(), hash));
    save_tree(&tree_path, &back, &dm, hash).unwrap();
    assert_eq!(std::fs::read_to_string(&tree_path).unwrap(), text);
    assert!(matches!(load_tree(&tree_path, &dm, Some(hash ^ 1)), Err(Error::StaleCache(_))));

    let params = ViewParams { budget: 120, starts: 2, ..Default::default() };
    let views = layout_levels(&dm, &tree, None, hash, &params).unwrap();
    let layout_path = dir.path().join("layout.json");
    save_layouts(&layout_path, &views, hash).unwrap();
    let text = std::fs::read_to_string(&layout_path).unwrap();
    let back = load_layouts(&layout_path, Some(hash)).unwrap();
    assert_eq!(back, views);
    save_layouts(&layout_path, &back, hash).unwrap();
    assert_eq!(std::fs::read_to_string(&layout_path).unwrap(), text);
}
