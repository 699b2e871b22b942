//! JSON-lines dataset files: a header line describing the dataset, then one
//! graph per line.

use super::{DatasetError, LabeledDataset, Provenance, TaskKind};
use crate::graph::{Graph, GraphBuilder};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

pub const DATASET_FORMAT: &str = "lpgnn-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    task: TaskKind,
    num_classes: usize,
    num_graphs: usize,
    node_feature_dim: usize,
    arc_feature_dim: usize,
    provenance: Provenance,
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphRecord {
    num_nodes: usize,
    arcs: Vec<(usize, usize)>,
    node_features: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    arc_features: Vec<Vec<f64>>,
    #[serde(default)]
    supervised_nodes: Vec<usize>,
    #[serde(default)]
    node_targets: Vec<usize>,
    #[serde(default)]
    graph_target: Option<usize>,
}

pub fn write_jsonl<W: Write>(ds: &LabeledDataset, mut out: W) -> Result<(), DatasetError> {
    let (m, d) = ds.feature_dims();
    let header = Header {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        task: ds.task,
        num_classes: ds.num_classes,
        num_graphs: ds.len(),
        node_feature_dim: m,
        arc_feature_dim: d,
        provenance: ds.provenance.clone(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for g in &ds.graphs {
        let rec = GraphRecord {
            num_nodes: g.num_nodes(),
            arcs: g.arcs().to_vec(),
            node_features: g.node_features().iter_rows().map(|r| r.to_vec()).collect(),
            arc_features: if g.arc_feature_dim() == 0 {
                Vec::new()
            } else {
                g.arc_features().iter_rows().map(|r| r.to_vec()).collect()
            },
            supervised_nodes: g.supervised_nodes().to_vec(),
            node_targets: g.node_targets().to_vec(),
            graph_target: g.graph_target(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<LabeledDataset, DatasetError> {
    let mut lines = input.lines();
    let first = lines.next().ok_or_else(|| DatasetError::Parse {
        file: "jsonl".into(),
        line: 1,
        message: "empty file".into(),
    })??;
    let header: Header = serde_json::from_str(&first)?;
    if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
        return Err(DatasetError::Parse {
            file: "jsonl".into(),
            line: 1,
            message: format!("unsupported format {} v{}", header.format, header.version),
        });
    }
    let mut graphs = Vec::with_capacity(header.num_graphs);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GraphRecord = serde_json::from_str(&line)?;
        let features = Matrix::from_rows(header.node_feature_dim, &rec.node_features);
        let arc_features = if header.arc_feature_dim == 0 {
            Matrix::zeros(rec.arcs.len(), 0)
        } else {
            Matrix::from_rows(header.arc_feature_dim, &rec.arc_features)
        };
        let g: Graph = GraphBuilder::new(rec.num_nodes, rec.arcs, features)
            .arc_features(arc_features)
            .node_targets(rec.supervised_nodes, rec.node_targets)
            .graph_target(rec.graph_target)
            .allow_self_loops(true)
            .build()
            .map_err(|e| DatasetError::Parse {
                file: "jsonl".into(),
                line: i + 2,
                message: e.to_string(),
            })?;
        graphs.push(g);
    }
    if graphs.len() != header.num_graphs {
        return Err(DatasetError::Parse {
            file: "jsonl".into(),
            line: graphs.len() + 1,
            message: format!("header announces {} graphs, found {}", header.num_graphs, graphs.len()),
        });
    }
    let ds = LabeledDataset {
        graphs,
        task: header.task,
        num_classes: header.num_classes,
        provenance: header.provenance,
    };
    ds.validate()?;
    Ok(ds)
}
