//! On-disk formats. Node ids in every file are 1-based.
//!
//! - graph (JSON): `{"n": 3, "edges": [{"i": 1, "j": 2, "weight": 1.0}]}`
//! - datasets (JSON): `{"d": 2, "nodes": [{"id": 1, "X": [[..], ..], "y": [..]}]}`,
//!   with optional top-level `"loss"` (default `"squared"`) and `"eta"`;
//!   nodes missing from the file get the trivial loss
//! - partition (JSON): `{"clusters": [[1, 2], [3]]}`
//! - weights (CSV): `node_id,w_1,...,w_d`
//! - trace (CSV): `iter,objective,gtv,gap`, empty `gap` when unavailable
//! - penalty matrix for `quadratic_q:<file>` (JSON): `[[..], ..]`

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::analysis::Partition;
use crate::error::{GtvError, Result};
use crate::graph::{EmpiricalGraph, NodeField};
use crate::losses::{LocalDataset, LocalLoss, LossKind};
use crate::penalties::GtvPenalty;
use crate::solver::TraceRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<EdgeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: usize,
    #[serde(rename = "X")]
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub nodes: Vec<NodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub clusters: Vec<Vec<usize>>,
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| GtvError::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| GtvError::Io(format!("{}: {e}", path.display())))
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| GtvError::Parse(format!("{what}: {e}")))
}

/// 1-based id → 0-based index.
fn node_index(id: usize, n: usize, what: &str) -> Result<usize> {
    if id == 0 || id > n {
        return Err(GtvError::Parse(format!("{what}: node id {id} outside 1..={n}")));
    }
    Ok(id - 1)
}

pub fn graph_from_file(file: &GraphFile) -> Result<EmpiricalGraph> {
    let records = file
        .edges
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let what = format!("edge {}", k + 1);
            Ok((
                node_index(e.i, file.n, &what)?,
                node_index(e.j, file.n, &what)?,
                e.weight,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    EmpiricalGraph::new(file.n, &records).map_err(|e| match e {
        GtvError::SelfLoop { index, node } => {
            GtvError::Parse(format!("edge {}: self-loop at node {}", index + 1, node + 1))
        }
        GtvError::DuplicateEdge { index, i, j } => {
            GtvError::Parse(format!("edge {}: duplicate edge {{{}, {}}}", index + 1, i + 1, j + 1))
        }
        GtvError::InvalidWeight { index, weight } => GtvError::Parse(format!(
            "edge {}: weight {weight} must be positive and finite",
            index + 1
        )),
        other => other,
    })
}

pub fn graph_to_file(g: &EmpiricalGraph) -> GraphFile {
    GraphFile {
        n: g.node_count(),
        edges: g
            .edges()
            .iter()
            .map(|e| EdgeRecord {
                i: e.head + 1,
                j: e.tail + 1,
                weight: e.weight,
            })
            .collect(),
    }
}

pub fn parse_graph(text: &str) -> Result<EmpiricalGraph> {
    graph_from_file(&parse_json(text, "graph file")?)
}

pub fn load_graph(path: &Path) -> Result<EmpiricalGraph> {
    parse_graph(&read_file(path)?)
}

pub fn save_graph(path: &Path, g: &EmpiricalGraph) -> Result<()> {
    write_file(path, &serde_json::to_string_pretty(&graph_to_file(g))?)
}

/// Per-node datasets (`None` for nodes absent from the file).
pub fn datasets_from_file(file: &DatasetFile, n: usize) -> Result<Vec<Option<LocalDataset>>> {
    let mut out = vec![None; n];
    for rec in &file.nodes {
        let what = format!("dataset of node {}", rec.id);
        let i = node_index(rec.id, n, &what)?;
        if out[i].is_some() {
            return Err(GtvError::Parse(format!("{what} appears twice")));
        }
        let ds = LocalDataset::from_rows(file.d, &rec.x, rec.y.clone())
            .map_err(|e| GtvError::Parse(format!("{what}: {e}")))?;
        out[i] = Some(ds);
    }
    Ok(out)
}

/// Losses of the kind named in the file; missing or empty datasets give the
/// trivial loss.
pub fn losses_from_file(file: &DatasetFile, n: usize) -> Result<Vec<LocalLoss>> {
    let kind = file.loss.unwrap_or(LossKind::Squared);
    let eta = file.eta.unwrap_or(0.0);
    datasets_from_file(file, n)?
        .into_iter()
        .map(|ds| match ds {
            Some(ds) if !ds.is_empty() => match kind {
                LossKind::Squared => LocalLoss::squared(ds),
                LossKind::Logistic => LocalLoss::logistic(ds),
                LossKind::Ridge => LocalLoss::ridge(ds, eta),
                LossKind::Lasso => LocalLoss::lasso(ds, eta),
                LossKind::Trivial => Ok(LocalLoss::trivial(file.d)),
            },
            _ => Ok(LocalLoss::trivial(file.d)),
        })
        .collect()
}

pub fn datasets_to_file(datasets: &[Option<LocalDataset>], d: usize) -> DatasetFile {
    let nodes = datasets
        .iter()
        .enumerate()
        .filter_map(|(i, ds)| {
            ds.as_ref().map(|ds| NodeRecord {
                id: i + 1,
                x: (0..ds.len()).map(|r| ds.row(r)).collect(),
                y: ds.labels().iter().copied().collect(),
            })
        })
        .collect();
    DatasetFile {
        d,
        loss: None,
        eta: None,
        nodes,
    }
}

pub fn load_dataset_file(path: &Path) -> Result<DatasetFile> {
    parse_json(&read_file(path)?, "dataset file")
}

pub fn load_losses(path: &Path, n: usize) -> Result<Vec<LocalLoss>> {
    losses_from_file(&load_dataset_file(path)?, n)
}

pub fn save_datasets(path: &Path, datasets: &[Option<LocalDataset>], d: usize) -> Result<()> {
    write_file(path, &serde_json::to_string_pretty(&datasets_to_file(datasets, d))?)
}

pub fn partition_from_file(file: &PartitionFile, n: usize) -> Result<Partition> {
    let clusters = file
        .clusters
        .iter()
        .map(|c| c.iter().map(|&id| node_index(id, n, "partition")).collect())
        .collect::<Result<Vec<Vec<usize>>>>()?;
    Partition::new(n, clusters)
}

pub fn partition_to_file(p: &Partition) -> PartitionFile {
    PartitionFile {
        clusters: p.clusters().iter().map(|c| c.iter().map(|i| i + 1).collect()).collect(),
    }
}

pub fn load_partition(path: &Path, n: usize) -> Result<Partition> {
    partition_from_file(&parse_json(&read_file(path)?, "partition file")?, n)
}

pub fn save_partition(path: &Path, p: &Partition) -> Result<()> {
    write_file(path, &serde_json::to_string_pretty(&partition_to_file(p))?)
}

/// Square matrix stored as a JSON array of rows.
pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = parse_json(&read_file(path)?, "matrix file")?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(GtvError::Parse(format!("{}: matrix must be square", path.display())));
    }
    Ok(DMatrix::from_row_iterator(n, n, rows.into_iter().flatten()))
}

/// `norm2`, `norm1`, `quadratic` or `quadratic_q:<matrix file>`.
pub fn parse_penalty(token: &str) -> Result<GtvPenalty> {
    match token.strip_prefix("quadratic_q:") {
        Some(file) => GtvPenalty::quadratic_q(load_matrix(Path::new(file))?),
        None => token.parse(),
    }
}

fn csv_err(e: csv::Error) -> GtvError {
    if e.is_io_error() {
        GtvError::Io(e.to_string())
    } else {
        GtvError::Parse(e.to_string())
    }
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| GtvError::Parse(format!("{what}: '{field}' is not a number")))
}

pub fn write_weights_csv<W: Write>(out: W, w: &NodeField) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let mut header = vec!["node_id".to_string()];
    header.extend((1..=w.dim()).map(|k| format!("w_{k}")));
    wr.write_record(&header).map_err(csv_err)?;
    for (i, row) in w.rows().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(row.iter().map(f64::to_string));
        wr.write_record(&rec).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_weights_csv<R: Read>(input: R) -> Result<NodeField> {
    let mut rd = csv::Reader::from_reader(input);
    let dim = rd.headers().map_err(csv_err)?.len().saturating_sub(1);
    if dim == 0 {
        return Err(GtvError::Parse(
            "weights CSV needs node_id and at least one w_k column".into(),
        ));
    }
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let id: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| GtvError::Parse(format!("weights CSV: bad node id '{}'", &rec[0])))?;
        let vals = (1..rec.len())
            .map(|k| parse_f64(&rec[k], "weights CSV"))
            .collect::<Result<Vec<_>>>()?;
        rows.push((id, vals));
    }
    rows.sort_by_key(|r| r.0);
    if rows.iter().enumerate().any(|(k, r)| r.0 != k + 1) {
        return Err(GtvError::Parse(
            "weights CSV: node ids must be 1..=n without gaps".into(),
        ));
    }
    let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.1).collect();
    NodeField::from_rows(dim, &rows)
}

pub fn write_trace_csv<W: Write>(out: W, trace: &[TraceRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["iter", "objective", "gtv", "gap"]).map_err(csv_err)?;
    for t in trace {
        let gap = t.gap.map(|g| g.to_string()).unwrap_or_default();
        wr.write_record([t.iter.to_string(), t.objective.to_string(), t.gtv.to_string(), gap])
            .map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if header != ["iter", "objective", "gtv", "gap"] {
        return Err(GtvError::Parse(format!("unexpected trace header {header:?}")));
    }
    rd.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            let iter = rec[0]
                .trim()
                .parse()
                .map_err(|_| GtvError::Parse(format!("trace: bad iteration '{}'", &rec[0])))?;
            let gap = match rec[3].trim() {
                "" => None,
                s => Some(parse_f64(s, "trace gap")?),
            };
            Ok(TraceRecord {
                iter,
                objective: parse_f64(&rec[1], "trace objective")?,
                gtv: parse_f64(&rec[2], "trace gtv")?,
                gap,
            })
        })
        .collect()
}

pub fn save_weights(path: &Path, w: &NodeField) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| GtvError::Io(format!("{}: {e}", path.display())))?;
    write_weights_csv(f, w)
}

pub fn save_trace(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| GtvError::Io(format!("{}: {e}", path.display())))?;
    write_trace_csv(f, trace)
}
