//! Reader for the TU Dortmund plain-text graph benchmark layout:
//! `DS_A.txt` (1-indexed `row, col` arc pairs), `DS_graph_indicator.txt`,
//! `DS_graph_labels.txt` and optionally `DS_node_labels.txt`.

use super::{DatasetError, LabeledDataset, Provenance, TaskKind};
use crate::graph::{degree_one_hot_features, Graph, GraphBuilder, NeighborIndex};
use crate::matrix::Matrix;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

fn read_lines(path: &Path) -> Result<Vec<String>, DatasetError> {
    if !path.is_file() {
        return Err(DatasetError::MissingFile(path.to_path_buf()));
    }
    Ok(std::fs::read_to_string(path)?
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

fn parse_int(file: &str, line: usize, s: &str) -> Result<i64, DatasetError> {
    s.trim().parse::<i64>().map_err(|e| DatasetError::Parse {
        file: file.to_string(),
        line,
        message: format!("'{s}': {e}"),
    })
}

fn parse_index(file: &str, line: usize, s: &str, max: usize) -> Result<usize, DatasetError> {
    let v = parse_int(file, line, s)?;
    if v < 1 || v as usize > max {
        return Err(DatasetError::DanglingNode {
            file: file.to_string(),
            line,
            node: v.max(0) as usize,
            max,
        });
    }
    Ok(v as usize - 1)
}

/// Maps sorted distinct raw labels onto 0..k.
fn remap(labels: &[i64]) -> (Vec<usize>, usize) {
    let ids: BTreeMap<i64, usize> = labels
        .iter()
        .copied()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

/// Largest node degree over a corpus.
pub fn max_degree_over(graphs: &[Graph]) -> usize {
    graphs
        .iter()
        .map(|g| NeighborIndex::build(g).max_degree())
        .max()
        .unwrap_or(0)
}

/// Loads `<dir>/<DS>_*.txt`, where DS is the directory name.
pub fn load_tu_dataset(directory: impl AsRef<Path>) -> Result<LabeledDataset, DatasetError> {
    let dir = directory.as_ref();
    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| DatasetError::InvalidParams(format!("cannot derive dataset name from {}", dir.display())))?
        .to_string();
    let file = |suffix: &str| -> PathBuf { dir.join(format!("{name}_{suffix}.txt")) };

    let indicator_name = format!("{name}_graph_indicator.txt");
    let indicator_lines = read_lines(&file("graph_indicator"))?;
    let label_lines = read_lines(&file("graph_labels"))?;
    let arc_path = file("A");
    let arc_name = format!("{name}_A.txt");
    let arc_lines = read_lines(&arc_path)?;

    let num_graphs = label_lines.len();
    let mut graph_of = Vec::with_capacity(indicator_lines.len());
    let mut prev = 0usize;
    for (i, l) in indicator_lines.iter().enumerate() {
        let gid = parse_int(&indicator_name, i + 1, l)?;
        let gid = usize::try_from(gid).unwrap_or(0);
        if gid != prev && gid != prev + 1 {
            return Err(DatasetError::NonContiguousIndicator {
                line: i + 1,
                got: gid,
                expected_prev: prev,
                expected_next: prev + 1,
            });
        }
        prev = gid;
        graph_of.push(gid - 1);
    }
    if prev != num_graphs {
        return Err(DatasetError::Parse {
            file: indicator_name,
            line: indicator_lines.len(),
            message: format!("indicator names {prev} graphs but there are {num_graphs} graph labels"),
        });
    }
    let total_nodes = graph_of.len();
    let mut starts = vec![0usize; num_graphs + 1];
    for &g in &graph_of {
        starts[g + 1] += 1;
    }
    for g in 0..num_graphs {
        starts[g + 1] += starts[g];
    }

    let mut arcs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    for (i, l) in arc_lines.iter().enumerate() {
        let mut parts = l.split(',');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(DatasetError::Parse {
                    file: arc_name.clone(),
                    line: i + 1,
                    message: format!("expected 'row, col', got '{l}'"),
                })
            }
        };
        let u = parse_index(&arc_name, i + 1, a, total_nodes)?;
        let v = parse_index(&arc_name, i + 1, b, total_nodes)?;
        let g = graph_of[u];
        if graph_of[v] != g {
            return Err(DatasetError::ArcAcrossGraphs { line: i + 1 });
        }
        arcs[g].push((u - starts[g], v - starts[g]));
    }

    let graph_name = format!("{name}_graph_labels.txt");
    let raw_graph_labels = label_lines
        .iter()
        .enumerate()
        .map(|(i, l)| parse_int(&graph_name, i + 1, l))
        .collect::<Result<Vec<_>, _>>()?;
    let (graph_labels, num_classes) = remap(&raw_graph_labels);

    let node_label_path = file("node_labels");
    let node_features: Option<(Vec<usize>, usize)> = if node_label_path.is_file() {
        let node_name = format!("{name}_node_labels.txt");
        let lines = read_lines(&node_label_path)?;
        if lines.len() != total_nodes {
            return Err(DatasetError::Parse {
                file: node_name,
                line: lines.len(),
                message: format!("{} node labels for {total_nodes} nodes", lines.len()),
            });
        }
        let raw = lines
            .iter()
            .enumerate()
            .map(|(i, l)| {
                // some corpora append attributes after a comma; the label is the first field
                parse_int(&node_name, i + 1, l.split(',').next().unwrap_or(l))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Some(remap(&raw))
    } else {
        None
    };

    let mut graphs = Vec::with_capacity(num_graphs);
    for g in 0..num_graphs {
        let n = starts[g + 1] - starts[g];
        let features = match &node_features {
            Some((labels, width)) => {
                let mut m = Matrix::zeros(n, *width);
                for v in 0..n {
                    m.row_mut(v)[labels[starts[g] + v]] = 1.0;
                }
                m
            }
            None => Matrix::zeros(n, 0),
        };
        graphs.push(
            GraphBuilder::new(n, std::mem::take(&mut arcs[g]), features)
                .graph_target(Some(graph_labels[g]))
                .allow_self_loops(true)
                .build()?,
        );
    }
    if node_features.is_none() {
        let max_degree = max_degree_over(&graphs);
        for g in graphs.iter_mut() {
            let f = degree_one_hot_features(g, max_degree)?;
            *g = g.with_node_features(f)?;
        }
    }

    Ok(LabeledDataset {
        graphs,
        task: TaskKind::GraphMulticlass,
        num_classes,
        provenance: Provenance::TuDirectory {
            name,
            path: dir.to_path_buf(),
        },
    })
}
