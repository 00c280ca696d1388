//! CSV and JSON outputs: step logs, per-context aggregates and sweep tables.
//!
//! Floats are written in shortest round-trip form so reruns are byte-identical.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::ParetoPoint;
use crate::runtime::{StepMode, StepRecord};
use crate::types::Context;

pub const STEPS_HEADER: [&str; 9] = [
    "t", "mode", "context", "config_id", "sensor_j", "algo_j", "switch_j", "loss", "latency_s",
];

pub const SCENARIO_HEADER: [&str; 6] = [
    "context",
    "steps",
    "avg_loss",
    "avg_energy_j",
    "avg_latency_s",
    "top_config",
];

pub const PARETO_HEADER: [&str; 5] = ["lambda_e", "gate", "avg_loss", "avg_energy_j", "avg_latency_s"];

fn csv_write_err(e: csv::Error) -> Error {
    Error::Config(format!("writing CSV: {e}"))
}

pub fn write_steps_csv<W: Write>(records: &[StepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STEPS_HEADER).map_err(csv_write_err)?;
    for r in records {
        w.write_record([
            r.t.to_string(),
            r.mode.as_str().to_owned(),
            r.context.to_string(),
            r.config_id.clone(),
            r.sensor_j.to_string(),
            r.algo_j.to_string(),
            r.switch_j.to_string(),
            r.loss.to_string(),
            r.latency_s.to_string(),
        ])
        .map_err(csv_write_err)?;
    }
    w.flush().map_err(|e| Error::io("<steps.csv>", e))
}

/// Reads a steps CSV written by [`write_steps_csv`]. `source` names the input in errors.
pub fn read_steps_csv<R: Read>(input: R, source: &str) -> Result<Vec<StepRecord>> {
    let malformed = |message: String| Error::MalformedInput {
        path: source.to_owned(),
        message,
    };
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| malformed(format!("unreadable header: {e}")))?
        .clone();
    if header.iter().ne(STEPS_HEADER) {
        return Err(malformed(format!(
            "expected columns {}, found {}",
            STEPS_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| malformed(format!("line {line}: {e}")))?;
        let num = |col: usize| -> Result<f64> {
            row[col].parse::<f64>().map_err(|_| {
                malformed(format!("line {line}: `{}` is not a number ({})", &row[col], STEPS_HEADER[col]))
            })
        };
        let mode = match &row[1] {
            "fusion" => StepMode::Fusion,
            "context_id" => StepMode::ContextId,
            other => return Err(malformed(format!("line {line}: unknown mode `{other}`"))),
        };
        out.push(StepRecord {
            t: row[0]
                .parse()
                .map_err(|_| malformed(format!("line {line}: `{}` is not a step index", &row[0])))?,
            mode,
            context: row[2]
                .parse()
                .map_err(|e: Error| malformed(format!("line {line}: {e}")))?,
            config_id: row[3].to_owned(),
            sensor_j: num(4)?,
            algo_j: num(5)?,
            switch_j: num(6)?,
            loss: num(7)?,
            latency_s: num(8)?,
        });
    }
    if out.is_empty() {
        return Err(malformed("no step rows".into()));
    }
    Ok(out)
}

pub fn load_steps_csv(path: impl AsRef<Path>) -> Result<Vec<StepRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_steps_csv(std::io::BufReader::new(file), &path.display().to_string())
}

/// Averages of one context's steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextAggregate {
    pub context: Context,
    pub steps: usize,
    pub avg_loss: f64,
    pub avg_energy_j: f64,
    pub avg_latency_s: f64,
    /// Configuration active for the most steps; ties go to the smaller id.
    pub top_config: String,
}

/// Groups step records by context, in order of first appearance.
pub fn aggregate_by_context(records: &[StepRecord]) -> Vec<ContextAggregate> {
    struct Acc {
        steps: usize,
        loss: f64,
        energy: f64,
        latency: f64,
        configs: BTreeMap<String, usize>,
    }
    let mut order: Vec<Context> = Vec::new();
    let mut accs: BTreeMap<Context, Acc> = BTreeMap::new();
    for r in records {
        let acc = accs.entry(r.context.clone()).or_insert_with(|| {
            order.push(r.context.clone());
            Acc {
                steps: 0,
                loss: 0.0,
                energy: 0.0,
                latency: 0.0,
                configs: BTreeMap::new(),
            }
        });
        acc.steps += 1;
        acc.loss += r.loss;
        acc.energy += r.system_j();
        acc.latency += r.latency_s;
        *acc.configs.entry(r.config_id.clone()).or_default() += 1;
    }
    order
        .into_iter()
        .map(|ctx| {
            let a = &accs[&ctx];
            let n = a.steps as f64;
            let top = a
                .configs
                .iter()
                .fold(None::<(&String, usize)>, |best, (id, c)| match best {
                    Some((_, bc)) if bc >= *c => best,
                    _ => Some((id, *c)),
                })
                .map(|(id, _)| id.clone())
                .unwrap_or_default();
            ContextAggregate {
                context: ctx,
                steps: a.steps,
                avg_loss: a.loss / n,
                avg_energy_j: a.energy / n,
                avg_latency_s: a.latency / n,
                top_config: top,
            }
        })
        .collect()
}

pub fn write_scenario_csv<W: Write>(rows: &[ContextAggregate], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCENARIO_HEADER).map_err(csv_write_err)?;
    for r in rows {
        w.write_record([
            r.context.to_string(),
            r.steps.to_string(),
            r.avg_loss.to_string(),
            r.avg_energy_j.to_string(),
            r.avg_latency_s.to_string(),
            r.top_config.clone(),
        ])
        .map_err(csv_write_err)?;
    }
    w.flush().map_err(|e| Error::io("<scenario.csv>", e))
}

pub fn write_pareto_csv<W: Write>(points: &[ParetoPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PARETO_HEADER).map_err(csv_write_err)?;
    for p in points {
        w.write_record([
            p.lambda_e.to_string(),
            p.gate.to_string(),
            p.avg_loss.to_string(),
            p.avg_energy_j.to_string(),
            p.avg_latency_s.to_string(),
        ])
        .map_err(csv_write_err)?;
    }
    w.flush().map_err(|e| Error::io("<pareto.csv>", e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
