//! Residual-vs-oracle-cost traces and their CSV form.
//!
//! Header: `method,estimator,problem,seed,oracle_units,epochs,rel_residual,wall_ms`.
//! `rel_residual` is written with 17 significant digits; `epochs` and
//! `wall_ms` use the shortest representation that reads back exactly.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VfosaError};

pub const TRACE_HEADER: [&str; 8] = [
    "method",
    "estimator",
    "problem",
    "seed",
    "oracle_units",
    "epochs",
    "rel_residual",
    "wall_ms",
];

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceMeta {
    pub method: String,
    pub estimator: String,
    pub problem: String,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub oracle_units: u64,
    pub epochs: f64,
    pub rel_residual: f64,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTrace {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn new(meta: TraceMeta) -> Self {
        Self {
            meta,
            rows: Vec::new(),
        }
    }

    pub fn final_residual(&self) -> Option<f64> {
        self.rows.last().map(|r| r.rel_residual)
    }

    /// Rows without the wall-clock column, for determinism comparisons.
    pub fn numeric_columns(&self) -> Vec<(u64, u64, u64)> {
        self.rows
            .iter()
            .map(|r| (r.oracle_units, r.epochs.to_bits(), r.rel_residual.to_bits()))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(TRACE_HEADER)?;
        let seed = self.meta.seed.to_string();
        for r in &self.rows {
            w.write_record([
                self.meta.method.as_str(),
                self.meta.estimator.as_str(),
                self.meta.problem.as_str(),
                seed.as_str(),
                &r.oracle_units.to_string(),
                &r.epochs.to_string(),
                &format!("{:.16e}", r.rel_residual),
                &r.wall_ms.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(input);
        let mut records = rd.records();
        let header = match records.next() {
            Some(h) => h?,
            None => return Err(VfosaError::Trace("missing header".into())),
        };
        if header.iter().ne(TRACE_HEADER.iter().copied()) {
            return Err(VfosaError::Trace(format!(
                "unexpected header {:?}, expected {}",
                header.iter().collect::<Vec<_>>(),
                TRACE_HEADER.join(",")
            )));
        }
        let mut trace = RunTrace::default();
        for (k, rec) in records.enumerate() {
            let line = k + 2;
            let rec = rec?;
            if rec.len() != TRACE_HEADER.len() {
                return Err(VfosaError::Parse {
                    line,
                    msg: format!("expected 8 fields, found {}", rec.len()),
                });
            }
            let num = |idx: usize| -> Result<f64> {
                rec[idx]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| VfosaError::Parse {
                        line,
                        msg: format!(
                            "column {} is not numeric: {:?}",
                            TRACE_HEADER[idx], &rec[idx]
                        ),
                    })
            };
            let int = |idx: usize| -> Result<u64> {
                rec[idx]
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| VfosaError::Parse {
                        line,
                        msg: format!(
                            "column {} is not an integer: {:?}",
                            TRACE_HEADER[idx], &rec[idx]
                        ),
                    })
            };
            let meta = TraceMeta {
                method: rec[0].to_string(),
                estimator: rec[1].to_string(),
                problem: rec[2].to_string(),
                seed: int(3)?,
            };
            if trace.rows.is_empty() {
                trace.meta = meta;
            } else if meta != trace.meta {
                return Err(VfosaError::Parse {
                    line,
                    msg: "metadata differs from the first row".into(),
                });
            }
            trace.rows.push(TraceRow {
                oracle_units: int(4)?,
                epochs: num(5)?,
                rel_residual: num(6)?,
                wall_ms: num(7)?,
            });
        }
        Ok(trace)
    }
}

pub fn write_trace_csv(trace: &RunTrace, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    trace.write_csv(std::io::BufWriter::new(f))
}

pub fn read_trace_csv(path: &Path) -> Result<RunTrace> {
    let f = std::fs::File::open(path)?;
    RunTrace::read_csv(std::io::BufReader::new(f))
}
