//! Flattening of sweep results into one table, written as CSV or JSON.
//!
//! Both formats carry the same cells. Numbers are printed with 12
//! significant digits; infinite bounds print as `inf`, absent values as an
//! empty CSV cell or JSON `null`.

use std::io::Write;

use hfss_core::estimator::GainEstimate;
use hfss_core::sim::{ProbeOutcome, SweepResult};
use hfss_core::supervised::PenaltyUnit;
use serde_json::{json, Map, Value};

use crate::config::normalized;
use crate::Scenario;

pub const SIG_DIGITS: usize = 12;

/// `%g`-style formatting with [`SIG_DIGITS`] significant digits.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIG_DIGITS as i32).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// A table cell before rendering.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Empty,
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Empty => String::new(),
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Empty => Value::Null,
            Cell::Num(x) if x.is_finite() => {
                let rounded: f64 = fmt_num(*x).parse().expect("formatted number parses");
                json!(rounded)
            }
            Cell::Num(x) => Value::String(fmt_num(*x)),
            Cell::Int(n) => json!(n),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

fn opt(x: Option<f64>) -> Cell {
    x.map_or(Cell::Empty, Cell::Num)
}

fn text(s: &str) -> Cell {
    if s.is_empty() {
        Cell::Empty
    } else {
        Cell::Text(s.to_string())
    }
}

pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub meta: Map<String, Value>,
}

/// Column headers; penalty columns gain a `_db` suffix for power penalties.
pub fn columns(unit: PenaltyUnit) -> Vec<String> {
    let sfx = match unit {
        PenaltyUnit::Bits => "",
        PenaltyUnit::Db => "_db",
    };
    [
        "scenario", "seed", "stage", "p_c", "gain_lo", "gain_hi", "kind", "note", "p_c_d",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([
        format!("penalty_actual{sfx}"),
        format!("penalty_predicted{sfx}"),
    ])
    .chain(["r_c".to_string()])
    .collect()
}

fn estimate_cells(e: Option<&GainEstimate<f64>>) -> [Cell; 3] {
    match e {
        Some(e) => [
            Cell::Num(e.lower),
            Cell::Num(e.upper),
            text(e.kind.as_str()),
        ],
        None => [Cell::Empty, Cell::Empty, Cell::Empty],
    }
}

pub fn flatten(res: &SweepResult<f64>, sc: &Scenario) -> Table {
    let head = || [Cell::Text(res.scenario_id.clone()), Cell::Int(res.seed)];
    let mut rows = Vec::new();
    for lp in &res.learning {
        let (est, note) = match &lp.outcome {
            ProbeOutcome::Estimate(e) => (
                Some(e),
                if e.diagnostic.is_some() {
                    "pr_outage_after_probe"
                } else {
                    ""
                },
            ),
            ProbeOutcome::Reprobe(r) => (None, r.as_str()),
        };
        let mut row: Vec<Cell> = head().into();
        row.push(text("learn"));
        row.push(Cell::Num(lp.p_c));
        row.extend(estimate_cells(est));
        row.push(text(note));
        row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
        rows.push(row);
    }
    if let Some(choice) = &res.planning {
        let mut row: Vec<Cell> = head().into();
        row.push(text("plan"));
        row.push(Cell::Num(choice.p_c));
        row.extend(estimate_cells(Some(&choice.estimate)));
        match &res.plan {
            Some(plan) => {
                row.push(text(plan.budget.name()));
                row.extend([
                    Cell::Num(plan.p_c_d),
                    Cell::Empty,
                    Cell::Num(plan.predicted_penalty),
                    Cell::Num(plan.r_c_d),
                ]);
            }
            None => row.extend([
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
            ]),
        }
        rows.push(row);
    }
    for tp in &res.transmission {
        let mut row: Vec<Cell> = head().into();
        row.push(text("transmit"));
        row.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
        row.push(text(if tp.pr_outage { "pr_outage" } else { "" }));
        row.extend([
            Cell::Num(tp.p_c_d),
            opt(tp.penalty_actual),
            Cell::Num(tp.penalty_predicted),
            Cell::Num(tp.r_c),
        ]);
        rows.push(row);
    }

    let mut meta = Map::new();
    meta.insert("scenario".into(), json!(res.scenario_id));
    meta.insert("seed".into(), json!(res.seed));
    meta.insert("version".into(), json!(res.version));
    meta.insert("policy".into(), json!(res.policy.as_str()));
    meta.insert("penalty_unit".into(), json!(res.penalty_unit.to_string()));
    let config: Map<String, Value> = normalized(sc)
        .into_iter()
        .map(|(k, v)| (k.to_string(), json!(v)))
        .collect();
    meta.insert("config".into(), Value::Object(config));
    if let Some(s) = &res.schedule {
        let stages: Map<String, Value> = s
            .stages()
            .iter()
            .map(|(st, w)| (format!("{st:?}").to_lowercase(), json!([w.start, w.end])))
            .collect();
        meta.insert("schedule".into(), Value::Object(stages));
    }
    Table {
        columns: columns(res.penalty_unit),
        rows,
        meta,
    }
}

pub fn write_csv<W: Write>(table: &Table, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::csv))?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_json(table: &Table) -> Value {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> = table
                .columns
                .iter()
                .cloned()
                .zip(row.iter().map(Cell::json))
                .collect();
            Value::Object(obj)
        })
        .collect();
    json!({ "meta": Value::Object(table.meta.clone()), "rows": rows })
}

pub fn write_json<W: Write>(table: &Table, mut out: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, &to_json(table))?;
    writeln!(out)
}
