//! File formats: hierarchy JSON, wide panel CSV and network checkpoints.
//!
//! Panel CSV files have a `t` column of strictly increasing integers
//! followed by one column per node id. Floats are written with 17
//! significant digits so a panel survives a write/read cycle bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hts_sr_core::neuralnet::{Activation, NetworkDims, NetworkParams};
use hts_sr_core::{Hierarchy, Matrix, SeriesPanel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `{"nodes": [...], "parent": {"child": parent}}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyFile {
    pub nodes: Vec<u32>,
    pub parent: BTreeMap<u32, u32>,
}

impl HierarchyFile {
    pub fn from_hierarchy(h: &Hierarchy) -> Self {
        Self {
            nodes: h.node_ids().to_vec(),
            parent: h.parent_pairs().into_iter().collect(),
        }
    }

    pub fn build(&self) -> Result<Hierarchy> {
        Ok(Hierarchy::from_nodes(&self.nodes, &self.parent)?)
    }
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_hierarchy(path: &Path) -> Result<Hierarchy> {
    let text = read_to_string(path)?;
    let file: HierarchyFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    file.build()
}

pub fn write_hierarchy(h: &Hierarchy, path: &Path) -> Result<()> {
    write_json(path, &HierarchyFile::from_hierarchy(h))
}

/// Writes `bytes` to a sibling temporary file and renames it into place,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// 17 significant digits; parses back to the identical `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Columns of a wide CSV file keyed by node id.
#[derive(Debug, Clone, PartialEq)]
pub struct WideTable {
    pub times: Vec<i64>,
    pub columns: BTreeMap<u32, Vec<f64>>,
}

pub fn read_wide_csv(path: &Path) -> Result<WideTable> {
    let bad = |msg: String| Error::format(path, msg);
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.get(0) != Some("t") {
        return Err(bad("first column must be `t`".into()));
    }
    let mut ids = Vec::with_capacity(headers.len() - 1);
    for name in headers.iter().skip(1) {
        let id: u32 = name.parse().map_err(|_| bad(format!("column `{name}` is not a node id")))?;
        if ids.contains(&id) {
            return Err(bad(format!("duplicate column for node {id}")));
        }
        ids.push(id);
    }

    let mut times: Vec<i64> = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); ids.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let row = line + 2;
        let t: i64 = record[0]
            .parse()
            .map_err(|_| bad(format!("row {row}: timestamp `{}` is not an integer", &record[0])))?;
        if let Some(&prev) = times.last() {
            if t == prev {
                return Err(bad(format!("row {row}: duplicate timestamp {t}")));
            }
            if t < prev {
                return Err(bad(format!("row {row}: timestamp {t} is not increasing")));
            }
        }
        times.push(t);
        for (k, cell) in record.iter().skip(1).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| bad(format!("row {row}, node {}: `{cell}` is not numeric", ids[k])))?;
            values[k].push(v);
        }
    }
    Ok(WideTable {
        times,
        columns: ids.into_iter().zip(values).collect(),
    })
}

/// Default training length for files that do not state one: the first
/// 70% of timepoints.
pub fn default_train_len(len: usize) -> usize {
    len * 7 / 10
}

/// Builds a panel in canonical node order. Every bottom node needs a
/// column; missing upper-level columns are summed from the bottoms and
/// present ones are kept verbatim.
pub fn panel_from_table(path: &Path, table: &WideTable, h: &Hierarchy, train_len: Option<usize>) -> Result<SeriesPanel> {
    if let Some(id) = table.columns.keys().find(|id| h.index_of(**id).is_none()) {
        return Err(Error::format(path, format!("column for node {id} is not in the hierarchy")));
    }
    let len = table.times.len();
    let mut bottom = Matrix::zeros(h.n_bottom(), len);
    for (r, id) in h.bottom_ids().iter().enumerate() {
        let col = table
            .columns
            .get(id)
            .ok_or_else(|| Error::format(path, format!("missing column for bottom node {id}")))?;
        bottom.row_mut(r).copy_from_slice(col);
    }
    let mut values = h.aggregate_bottom(&bottom)?;
    for (r, id) in h.node_ids()[..h.n_upper()].iter().enumerate() {
        if let Some(col) = table.columns.get(id) {
            values.row_mut(r).copy_from_slice(col);
        }
    }
    let train_len = train_len.unwrap_or_else(|| default_train_len(len));
    Ok(SeriesPanel::with_times(h, values, train_len, table.times.clone())?)
}

pub fn load_panel_csv(path: &Path, h: &Hierarchy, train_len: Option<usize>) -> Result<SeriesPanel> {
    let table = read_wide_csv(path)?;
    panel_from_table(path, &table, h, train_len)
}

/// Writes `values` (one row per node) as a wide CSV.
pub fn write_matrix_csv(path: &Path, nodes: &[u32], times: &[i64], values: &Matrix) -> Result<()> {
    assert_eq!(values.shape(), (nodes.len(), times.len()));
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once("t".to_string()).chain(nodes.iter().map(u32::to_string));
    w.write_record(header).map_err(|e| Error::format(path, e.to_string()))?;
    for (c, t) in times.iter().enumerate() {
        let row = std::iter::once(t.to_string()).chain((0..nodes.len()).map(|r| format_float(values[(r, c)])));
        w.write_record(row).map_err(|e| Error::format(path, e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::format(path, e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn write_panel_csv(panel: &SeriesPanel, path: &Path) -> Result<()> {
    write_matrix_csv(path, panel.node_ids(), panel.times(), panel.values())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsRecord {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub bias: bool,
}

/// Network weights plus the seed that initialized them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub dims: DimsRecord,
    pub seed: u64,
    pub activation: String,
    pub lag: usize,
    #[serde(rename = "W2")]
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
    #[serde(rename = "W3")]
    pub w3: Vec<Vec<f64>>,
    pub b3: Vec<f64>,
}

fn matrix_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

pub fn parse_activation(name: &str) -> Option<Activation> {
    [Activation::Sigmoid, Activation::Relu]
        .into_iter()
        .find(|a| a.name() == name)
}

impl Checkpoint {
    pub fn new(params: &NetworkParams, seed: u64, activation: Activation, lag: usize) -> Self {
        let d = params.dims;
        Self {
            dims: DimsRecord {
                input: d.input,
                hidden: d.hidden,
                output: d.output,
                bias: d.bias,
            },
            seed,
            activation: activation.name().into(),
            lag,
            w2: matrix_rows(&params.w2),
            b2: params.b2.clone(),
            w3: matrix_rows(&params.w3),
            b3: params.b3.clone(),
        }
    }

    pub fn params(&self) -> hts_sr_core::Result<NetworkParams> {
        let d = self.dims;
        let dims = NetworkDims::new(d.input, d.hidden, d.output, d.bias)?;
        let rows = |m: &[Vec<f64>], r: usize, c: usize| {
            if m.len() != r || m.iter().any(|row| row.len() != c) {
                return Err(hts_sr_core::Error::Shape(format!("weight matrix is not {r}x{c}")));
            }
            Ok(Matrix::from_rows(m))
        };
        let w2 = rows(&self.w2, d.hidden, d.input)?;
        let w3 = rows(&self.w3, d.output, d.hidden)?;
        NetworkParams::from_parts(dims, w2, self.b2.clone(), w3, self.b3.clone())
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_json(path, ckpt)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
