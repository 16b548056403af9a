//! Shared fixtures for the benchmark targets.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use fable_core::forest::Forest;
use fable_core::testutil;
use fable_core::vector::{
    Embedder, Granularity, HashEmbedder, NodeEmbedding, NodeKey, VectorIndex,
};

/// A random unit-vector index of the given size.
pub fn random_index(seed: u64, size: usize, dimension: usize) -> VectorIndex {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut index = VectorIndex::new(dimension);
    for i in 0..size {
        let raw: Vec<f64> = (0..dimension).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let vector: Vec<f32> = raw.into_iter().map(|x| (x / norm) as f32).collect();
        index
            .insert(
                NodeEmbedding::new(
                    NodeKey::new(format!("d{:03}", i % 50), format!("n{i:05}")),
                    if i % 3 == 0 { Granularity::Internal } else { Granularity::Leaf },
                    vector,
                )
                .unwrap(),
            )
            .unwrap();
    }
    index
}

/// A random unit query vector.
pub fn random_query(seed: u64, dimension: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..dimension).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    raw.into_iter().map(|x| (x / norm) as f32).collect()
}

/// A seeded forest plus a matching hash-embedded index.
pub fn forest_fixture(seed: u64, docs: usize, nodes_per_doc: usize, dimension: usize) -> (Forest, VectorIndex) {
    let mut rng = testutil::rng(seed);
    let forest = testutil::random_forest(&mut rng, docs, nodes_per_doc);
    let index = fable_core::vector::build_index(&forest, &HashEmbedder::new(dimension)).unwrap();
    (forest, index)
}

/// Embed a query with the same hash embedder the fixtures use.
pub fn embed_query(text: &str, dimension: usize) -> Vec<f32> {
    HashEmbedder::new(dimension).embed(text).unwrap()
}
