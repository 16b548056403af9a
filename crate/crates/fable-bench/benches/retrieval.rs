use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use fable_bench::{embed_query, forest_fixture, random_index, random_query};
use fable_core::fusion::{budget_control, node_fusion};
use fable_core::retrieve::tree_expansion;
use fable_core::tokens::Tokenizer;
use fable_core::vector::{NodeKey, Scope};

fn bench_topk(c: &mut Criterion) {
    let index = random_index(1, 5000, 64);
    let query = random_query(2, 64);
    c.bench_function("topk_5000x64_k20", |b| {
        b.iter(|| index.topk(black_box(&query), 20, Scope::All))
    });
}

fn bench_tree_expansion(c: &mut Criterion) {
    let (forest, index) = forest_fixture(3, 8, 40, 64);
    let docs: Vec<String> = forest.doc_ids().map(str::to_string).collect();
    let query = embed_query("ledger harbor quartz meadow", 64);
    let tok = Tokenizer::approx_bytes();
    c.bench_function("tree_expansion_8_docs", |b| {
        b.iter(|| tree_expansion(black_box(&query), &docs, &forest, &index, 2048, &tok).unwrap())
    });
}

fn bench_node_fusion(c: &mut Criterion) {
    let (forest, _) = forest_fixture(4, 6, 30, 32);
    let keys: Vec<NodeKey> = forest
        .doc_ids()
        .flat_map(|d| {
            let tree = forest.tree(d).unwrap();
            tree.preorder().map(|n| NodeKey::new(d, n)).collect::<Vec<_>>()
        })
        .collect();
    let llm: Vec<NodeKey> = keys.iter().step_by(7).cloned().collect();
    let treexp: Vec<NodeKey> = keys.iter().step_by(5).cloned().collect();
    c.bench_function("node_fusion_mixed_selection", |b| {
        b.iter(|| node_fusion(black_box(&llm), black_box(&treexp), &forest).unwrap())
    });
}

fn bench_budget_control(c: &mut Criterion) {
    let (forest, _) = forest_fixture(5, 4, 40, 32);
    let chunks: Vec<fable_core::Chunk> = forest
        .doc_ids()
        .flat_map(|d| forest.doc_chunks(d).unwrap().into_iter().cloned().collect::<Vec<_>>())
        .collect();
    let tok = Tokenizer::approx_bytes();
    c.bench_function("budget_control_prefix", |b| {
        b.iter(|| budget_control(black_box(&chunks), 512, &tok))
    });
}

criterion_group!(
    retrieval,
    bench_topk,
    bench_tree_expansion,
    bench_node_fusion,
    bench_budget_control
);
criterion_main!(retrieval);
