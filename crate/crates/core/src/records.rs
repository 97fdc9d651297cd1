//! CSV persistence of evaluation records and GA traces, JSON for genomes.
//!
//! Floats are written in Rust's shortest round-trip form, so reading a file
//! back reproduces every value bit for bit (NaN and infinities included).

use std::io::{Read, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::evolve::{GenerationTrace, Genome};
use crate::experiment::EvalRecord;
use crate::policy::ConditionTag;
use crate::Vec2;

/// Column order of the records file.
pub const RECORD_COLUMNS: [&str; 19] = [
    "layout",
    "condition",
    "target_x",
    "target_y",
    "seed",
    "hidden",
    "param_count",
    "l1",
    "l2",
    "trajectory_error",
    "final_error",
    "success",
    "collision_penalty",
    "collision_steps",
    "collided",
    "best_loss",
    "best_loss_trace",
    "config_hash",
    "error",
];

pub const TRACE_COLUMNS: [&str; 4] = ["generation", "best_loss", "champion_l1", "champion_l2"];

#[derive(Debug, Error)]
pub enum RecordsError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("unexpected header: expected {expected:?}, got {got:?}")]
    Header { expected: Vec<String>, got: Vec<String> },
    #[error("row {row}, column {column}: cannot parse {value:?}")]
    Field { row: usize, column: &'static str, value: String },
}

/// A records row together with the hash of the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredRecord {
    pub record: EvalRecord,
    pub config_hash: String,
}

fn trace_field(trace: &[f64]) -> String {
    trace.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// Writes records as CSV. An empty `error` column marks a successful record,
/// so failed records must carry a non-empty message.
pub fn write_records<W: Write>(out: W, records: &[EvalRecord], config_hash: &str) -> Result<(), RecordsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record([
            r.layout.clone(),
            r.condition.as_str().to_string(),
            r.target.x.to_string(),
            r.target.y.to_string(),
            r.seed.to_string(),
            r.hidden.to_string(),
            r.param_count.to_string(),
            r.l1.to_string(),
            r.l2.to_string(),
            r.trajectory_error.to_string(),
            r.final_error.to_string(),
            r.success.to_string(),
            r.collision_penalty.to_string(),
            r.collision_steps.to_string(),
            r.collided.to_string(),
            r.best_loss.to_string(),
            trace_field(&r.best_loss_trace),
            config_hash.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn check_header(rdr: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<(), RecordsError> {
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got != expected {
        return Err(RecordsError::Header { expected: expected.iter().map(|s| s.to_string()).collect(), got });
    }
    Ok(())
}

fn parse<T: FromStr>(row: usize, column: &'static str, value: &str) -> Result<T, RecordsError> {
    value.parse().map_err(|_| RecordsError::Field { row, column, value: value.to_string() })
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<StoredRecord>, RecordsError> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, &RECORD_COLUMNS)?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let n = i + 1;
        let f = |k: usize| row.get(k).unwrap_or("");
        let c = |k: usize| RECORD_COLUMNS[k];
        let trace = if f(16).is_empty() {
            Vec::new()
        } else {
            f(16).split(';').map(|v| parse(n, c(16), v)).collect::<Result<_, _>>()?
        };
        let condition: ConditionTag = parse(n, c(1), f(1))?;
        let record = EvalRecord {
            layout: f(0).to_string(),
            condition,
            target: Vec2::new(parse(n, c(2), f(2))?, parse(n, c(3), f(3))?),
            seed: parse(n, c(4), f(4))?,
            hidden: parse(n, c(5), f(5))?,
            param_count: parse(n, c(6), f(6))?,
            l1: parse(n, c(7), f(7))?,
            l2: parse(n, c(8), f(8))?,
            trajectory_error: parse(n, c(9), f(9))?,
            final_error: parse(n, c(10), f(10))?,
            success: parse(n, c(11), f(11))?,
            collision_penalty: parse(n, c(12), f(12))?,
            collision_steps: parse(n, c(13), f(13))?,
            collided: parse(n, c(14), f(14))?,
            best_loss: parse(n, c(15), f(15))?,
            best_loss_trace: trace,
            error: Some(f(18).to_string()).filter(|e| !e.is_empty()),
        };
        out.push(StoredRecord { record, config_hash: f(17).to_string() });
    }
    Ok(out)
}

pub fn write_trace<W: Write>(out: W, trace: &GenerationTrace) -> Result<(), RecordsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for (g, (loss, m)) in trace.best_loss.iter().zip(&trace.champion_morphology).enumerate() {
        w.write_record([g.to_string(), loss.to_string(), m.l1.to_string(), m.l2.to_string()])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One row of a trace file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub generation: usize,
    pub best_loss: f64,
    pub champion_l1: f64,
    pub champion_l2: f64,
}

pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRow>, RecordsError> {
    let mut rdr = csv::Reader::from_reader(input);
    check_header(&mut rdr, &TRACE_COLUMNS)?;
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let f = |k: usize| row.get(k).unwrap_or("");
        out.push(TraceRow {
            generation: parse(i + 1, TRACE_COLUMNS[0], f(0))?,
            best_loss: parse(i + 1, TRACE_COLUMNS[1], f(1))?,
            champion_l1: parse(i + 1, TRACE_COLUMNS[2], f(2))?,
            champion_l2: parse(i + 1, TRACE_COLUMNS[3], f(3))?,
        });
    }
    Ok(out)
}

pub fn write_genome<W: Write>(out: W, genome: &Genome) -> Result<(), RecordsError> {
    serde_json::to_writer_pretty(out, genome)?;
    Ok(())
}

pub fn read_genome<R: Read>(input: R) -> Result<Genome, RecordsError> {
    Ok(serde_json::from_reader(input)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::fixtures::record;

    #[test]
    fn records_round_trip_exactly() {
        let mut a = record(ConditionTag::CoDesign, Vec2::new(0.1, -0.05), 3, 0.1 + 0.2);
        a.best_loss_trace = vec![1.5, 0.1 + 0.2, 1e-300];
        let mut b = record(ConditionTag::ControlOnly, Vec2::new(0.0, 0.2), 4, f64::NAN);
        b.error = Some("target \"x\", blocked".into());
        b.best_loss_trace.clear();
        b.l1 = f64::INFINITY;
        let mut buf = Vec::new();
        write_records(&mut buf, &[a.clone(), b.clone()], "abc123").unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        assert_eq!(back[0].record, a);
        assert_eq!(back[0].config_hash, "abc123");
        assert!(back[1].record.final_error.is_nan());
        assert_eq!(back[1].record.error, b.error);
        assert_eq!(back[1].record.l1, f64::INFINITY);
        assert!(back[1].record.best_loss_trace.is_empty());
    }

    #[test]
    fn bad_header_is_reported() {
        let err = read_records("a,b\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, RecordsError::Header { .. }));
    }

    #[test]
    fn bad_field_names_column() {
        let mut buf = Vec::new();
        write_records(&mut buf, &[record(ConditionTag::CoDesign, Vec2::ZERO, 0, 0.1)], "h").unwrap();
        let text = String::from_utf8(buf).unwrap().replace(",co_design,", ",sideways,");
        let err = read_records(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("condition"), "{err}");
    }
}
