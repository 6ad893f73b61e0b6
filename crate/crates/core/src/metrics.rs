//! Per-architecture metrics, from CSV or from the surrogate scorer.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Architecture, OpKind, Space};
use crate::surrogate::SurrogateModel;

pub const CSV_HEADER: [&str; 5] = ["arch_id", "accuracy", "params", "flops", "train_time"];

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Ingested,
    Surrogate,
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub arch_id: u64,
    pub accuracy: f64,
    pub params: f64,
    pub flops: f64,
    /// Hours.
    pub train_time: f64,
    pub extras: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricTable {
    pub provenance: Provenance,
    pub extra_columns: Vec<String>,
    rows: Vec<MetricRow>,
    index: HashMap<u64, usize>,
}

impl MetricTable {
    pub fn empty(provenance: Provenance) -> Self {
        MetricTable { provenance, extra_columns: Vec::new(), rows: Vec::new(), index: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[MetricRow] {
        &self.rows
    }

    pub fn get(&self, arch_id: u64) -> Option<&MetricRow> {
        self.index.get(&arch_id).map(|&i| &self.rows[i])
    }

    pub fn accuracy(&self, arch_id: u64) -> Option<f64> {
        self.get(arch_id).map(|r| r.accuracy)
    }

    /// Accuracy per id in `ids` order, NaN where missing.
    pub fn accuracies(&self, ids: &[u64]) -> Vec<f64> {
        ids.iter().map(|&id| self.accuracy(id).unwrap_or(f64::NAN)).collect()
    }

    fn push(&mut self, row: MetricRow) {
        self.index.insert(row.arch_id, self.rows.len());
        self.rows.push(row);
    }

    /// Surrogate accuracies with structural size proxies for `ids`.
    pub fn from_surrogate(space: &Space, model: &SurrogateModel, ids: &[u64], hours_per_arch: f64) -> Result<Self> {
        let mut t = MetricTable::empty(Provenance::Surrogate);
        for &id in ids {
            let arch = space.decode(id)?;
            let (params, flops) = size_proxy(space, &arch);
            t.push(MetricRow {
                arch_id: id,
                accuracy: model.score(space, &arch),
                params,
                flops,
                train_time: hours_per_arch,
                extras: Vec::new(),
            });
        }
        Ok(t)
    }
}

/// Parameter and FLOP counts of a cell at 16 channels on a 32×32 map. A
/// convolution's kernel size is read from its name (`conv3x3` → 3).
pub fn size_proxy(space: &Space, arch: &Architecture) -> (f64, f64) {
    const CHANNELS: f64 = 16.0;
    const PIXELS: f64 = 32.0 * 32.0;
    let mut params = 0.0;
    let mut flops = 0.0;
    for &op in arch.ops() {
        let t = space.op(op);
        let k = kernel_size(&t.name) as f64;
        match t.kind {
            OpKind::Conv => {
                let p = k * k * CHANNELS * CHANNELS;
                params += p;
                flops += p * PIXELS;
            }
            OpKind::PoolAvg | OpKind::PoolMax => flops += k * k * CHANNELS * PIXELS,
            _ => {}
        }
    }
    (params, flops)
}

fn kernel_size(name: &str) -> u32 {
    name.find('x')
        .and_then(|i| {
            let digits: String =
                name[..i].chars().rev().take_while(|c| c.is_ascii_digit()).collect::<Vec<_>>().into_iter().rev().collect();
            digits.parse().ok()
        })
        .unwrap_or(1)
}

pub fn ingest_metrics(path: &Path, space: &Space) -> Result<MetricTable> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, space)
}

/// Validates a metrics CSV. Row numbers in errors are file line numbers.
pub fn ingest_reader<R: Read>(reader: R, space: &Space) -> Result<MetricTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse { row: 1, msg: e.to_string() })?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < CSV_HEADER.len() || names[..CSV_HEADER.len()] != CSV_HEADER {
        return Err(Error::Parse {
            row: 1,
            msg: format!("header must start with {}", CSV_HEADER.join(",")),
        });
    }
    let mut table = MetricTable::empty(Provenance::Ingested);
    table.extra_columns = names[CSV_HEADER.len()..].iter().map(|s| s.to_string()).collect();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let num = |i: usize, field: &'static str| -> Result<f64> {
            let v: f64 = record[i]
                .parse()
                .map_err(|_| Error::Parse { row, msg: format!("{field}: {:?} is not a number", &record[i]) })?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::OutOfRange { row, field, value: v });
            }
            Ok(v)
        };
        let arch_id: u64 = record[0]
            .parse()
            .map_err(|_| Error::Parse { row, msg: format!("arch_id: {:?} is not an id", &record[0]) })?;
        let accuracy = num(1, "accuracy")?;
        if accuracy > 1.0 {
            return Err(Error::OutOfRange { row, field: "accuracy", value: accuracy });
        }
        let params = num(2, "params")?;
        let flops = num(3, "flops")?;
        let train_time = num(4, "train_time")?;
        if space.decode(arch_id).is_err() {
            return Err(Error::UnknownArch { row, arch_id });
        }
        if table.index.contains_key(&arch_id) {
            return Err(Error::DuplicateArch { row, arch_id });
        }
        table.push(MetricRow {
            arch_id,
            accuracy,
            params,
            flops,
            train_time,
            extras: record.iter().skip(CSV_HEADER.len()).map(str::to_string).collect(),
        });
    }
    Ok(table)
}
