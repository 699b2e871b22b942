//! Generated labels against brute-force enumeration written independently of
//! the generators, plus file-format round trips.

use lpgnn_core::datasets::{
    generate_clique, generate_subgraph_matching, k_fold_split, load_tu_dataset, read_jsonl, write_jsonl,
    CliqueParams, SubgraphParams,
};
use std::path::Path;

mod common;

#[test]
fn subgraph_labels_match_enumeration() {
    let ds = generate_subgraph_matching(&SubgraphParams {
        n_graphs: 100,
        seed: 11,
        ..Default::default()
    })
    .unwrap();
    let mut positives = 0;
    let mut total = 0;
    for (g, label) in ds.graphs.iter().zip(common::subgraph_labels(&ds)) {
        assert_eq!(g.supervised_nodes(), (0..g.num_nodes()).collect::<Vec<_>>());
        assert_eq!(g.node_targets(), label.as_slice());
        positives += label.iter().sum::<usize>();
        total += label.len();
    }
    let rate = positives as f64 / total as f64;
    assert!(rate >= 3.0 / 7.0, "every graph holds a planted copy, positive rate {rate}");
}

#[test]
fn clique_labels_match_enumeration() {
    let ds = generate_clique(&CliqueParams {
        n_graphs: 100,
        seed: 5,
        ..Default::default()
    })
    .unwrap();
    for g in &ds.graphs {
        let label = common::clique_labels(g, 3).expect("maximum clique exceeds 3");
        assert!(label.contains(&1), "no 3-clique in an accepted graph");
        assert_eq!(g.node_targets(), label.as_slice());
    }
}

#[test]
fn generation_is_a_function_of_seed() {
    let p = SubgraphParams {
        n_graphs: 30,
        seed: 2,
        ..Default::default()
    };
    let a = generate_subgraph_matching(&p).unwrap();
    let b = generate_subgraph_matching(&p).unwrap();
    assert_eq!(a.graphs, b.graphs);
    let c = generate_subgraph_matching(&SubgraphParams { seed: 3, ..p }).unwrap();
    assert_ne!(a.graphs, c.graphs);
}

#[test]
fn jsonl_file_roundtrip() {
    let ds = generate_subgraph_matching(&SubgraphParams {
        n_graphs: 9,
        ..Default::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.jsonl");
    write_jsonl(&ds, std::fs::File::create(&path).unwrap()).unwrap();
    let back = read_jsonl(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back.graphs, ds.graphs);
    assert_eq!(back.task, ds.task);
}

#[test]
fn mutag_statistics() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/MUTAG");
    let ds = load_tu_dataset(&dir).unwrap();
    assert_eq!(ds.len(), 188);
    assert_eq!(ds.num_classes, 2);
    let nodes: usize = ds.graphs.iter().map(|g| g.num_nodes()).sum();
    assert_eq!(nodes, 3371);
    assert!((ds.average_nodes() - 17.93).abs() < 0.01);
    let indicator = std::fs::read_to_string(dir.join("MUTAG_graph_indicator.txt")).unwrap();
    assert_eq!(indicator.lines().filter(|l| !l.trim().is_empty()).count(), nodes);
    for g in &ds.graphs {
        assert!(g.arcs().iter().all(|&(u, v)| u < g.num_nodes() && v < g.num_nodes()));
    }
    let labels = ds.graph_labels();
    let folds = k_fold_split(&labels, 10, 0).unwrap();
    let positives = labels.iter().filter(|&&y| y == 1).count();
    for f in &folds {
        let p = f.validation.iter().filter(|&&i| labels[i] == 1).count();
        let expected = positives as f64 / 10.0;
        assert!((p as f64 - expected).abs() <= 1.0);
    }
}
