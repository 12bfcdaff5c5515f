//! Geodesic queries checked against the Floyd–Warshall all-pairs oracle.

mod common;

use common::AllPairs;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vln::fixtures::{gen_world, SynthSpec};
use vln::ViewpointId;

fn world_30(seed: u64) -> vln::world::WorldGraph {
    gen_world(&SynthSpec {
        seed,
        node_count: 30,
        ..SynthSpec::default()
    })
    .expect("world")
}

#[test]
fn geodesic_matches_floyd_warshall_on_every_pair() {
    for seed in [0u64, 7, 42] {
        let world = world_30(seed);
        let oracle = AllPairs::compute(&world);
        for a in &oracle.ids {
            for b in &oracle.ids {
                let got = world.geodesic_distance(a, b).expect("known");
                let want = oracle.d(a, b);
                assert!(
                    (got - want).abs() < 1e-9,
                    "seed {seed}: d({a},{b}) = {got}, oracle {want}"
                );
            }
        }
    }
}

#[test]
fn geodesic_is_symmetric() {
    let world = world_30(3);
    let ids: Vec<ViewpointId> = world.nodes().keys().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..300 {
        let a = &ids[rng.random_range(0..ids.len())];
        let b = &ids[rng.random_range(0..ids.len())];
        let ab = world.geodesic_distance(a, b).expect("known");
        let ba = world.geodesic_distance(b, a).expect("known");
        assert!(
            (ab - ba).abs() < 1e-9,
            "d({a},{b})={ab} but d({b},{a})={ba}"
        );
    }
}

#[test]
fn triangle_inequality_on_sampled_triples() {
    let world = world_30(11);
    let oracle = AllPairs::compute(&world);
    let ids = &oracle.ids;
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let a = &ids[rng.random_range(0..ids.len())];
        let b = &ids[rng.random_range(0..ids.len())];
        let c = &ids[rng.random_range(0..ids.len())];
        assert!(
            oracle.d(a, c) <= oracle.d(a, b) + oracle.d(b, c) + 1e-9,
            "triangle violated on ({a},{b},{c})"
        );
    }
}

#[test]
fn shortest_path_weight_equals_geodesic_on_1000_pairs() {
    let world = world_30(23);
    let ids: Vec<ViewpointId> = world.nodes().keys().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..1000 {
        let a = &ids[rng.random_range(0..ids.len())];
        let b = &ids[rng.random_range(0..ids.len())];
        let path = world.shortest_path(a, b).expect("connected");
        assert_eq!(path.first().expect("non-empty"), a);
        assert_eq!(path.last().expect("non-empty"), b);
        for pair in path.windows(2) {
            assert!(
                world.edge_weight(&pair[0], &pair[1]).is_some(),
                "hop {} -> {} is not an edge",
                pair[0],
                pair[1]
            );
        }
        let weight = world.path_length(&path).expect("contiguous");
        let geodesic = world.geodesic_distance(a, b).expect("known");
        assert!(
            (weight - geodesic).abs() < 1e-9,
            "path weight {weight} vs geodesic {geodesic} for ({a},{b})"
        );
    }
}

#[test]
fn fixture_round_trip_is_byte_identical() {
    // A 50-node synthetic world survives load -> save -> load untouched.
    let spec = SynthSpec {
        seed: 50,
        node_count: 50,
        ..SynthSpec::default()
    };
    let world = gen_world(&spec).expect("world");
    let dir = tempfile::tempdir().expect("tempdir");
    world.save(dir.path()).expect("save");
    let bytes_first = std::fs::read(dir.path().join("synth/graph.json")).expect("read");

    let loaded = vln::world::load_world(dir.path(), "synth").expect("load");
    loaded.save(dir.path()).expect("save again");
    let bytes_second = std::fs::read(dir.path().join("synth/graph.json")).expect("read");
    assert_eq!(bytes_first, bytes_second);

    let reloaded = vln::world::load_world(dir.path(), "synth").expect("reload");
    assert_eq!(reloaded.to_canonical_json(), loaded.to_canonical_json());
}
