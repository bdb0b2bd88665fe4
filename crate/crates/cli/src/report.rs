//! Result tables: one per metric, methods as rows and datasets as columns.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::TableFormat;
use crate::error::{Error, Result};
use crate::runner::ResultRecord;

pub const METRICS: [&str; 3] = ["ARI", "NMI", "CE"];

fn metric_value(record: &ResultRecord, metric: &str) -> f64 {
    match metric {
        "ARI" => record.ari,
        "NMI" => record.nmi,
        "CE" => record.ce,
        _ => unreachable!("unknown metric {metric}"),
    }
}

/// A metric laid out as a method × dataset grid. Missing cells are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub metric: String,
    pub datasets: Vec<String>,
    pub methods: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

/// The JSON document: tables plus the raw records (which carry wall time).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub tables: Vec<MetricTable>,
    pub records: Vec<ResultRecord>,
}

fn first_appearance<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen: Vec<String> = Vec::new();
    for item in items {
        if !seen.iter().any(|s| s == item) {
            seen.push(item.to_string());
        }
    }
    seen
}

pub fn metric_tables(records: &[ResultRecord]) -> Vec<MetricTable> {
    let datasets = first_appearance(records.iter().map(|r| r.dataset.as_str()));
    let methods = first_appearance(records.iter().map(|r| r.method.as_str()));
    METRICS
        .iter()
        .map(|&metric| {
            let values = methods
                .iter()
                .map(|m| {
                    datasets
                        .iter()
                        .map(|d| {
                            records
                                .iter()
                                .find(|r| r.method.as_str() == m && &r.dataset == d)
                                .map(|r| metric_value(r, metric))
                        })
                        .collect()
                })
                .collect();
            MetricTable {
                metric: metric.to_string(),
                datasets: datasets.clone(),
                methods: methods.clone(),
                values,
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

fn csv(tables: &[MetricTable]) -> String {
    let mut out = String::new();
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "{},{}", t.metric, t.datasets.join(","));
        for (method, row) in t.methods.iter().zip(&t.values) {
            let cells: Vec<String> = row.iter().map(|&v| cell(v)).collect();
            let _ = writeln!(out, "{method},{}", cells.join(","));
        }
    }
    out
}

fn markdown(tables: &[MetricTable]) -> String {
    let mut out = String::new();
    for (i, t) in tables.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "### {}\n", t.metric);
        let _ = writeln!(out, "| method | {} |", t.datasets.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(t.datasets.len()));
        for (method, row) in t.methods.iter().zip(&t.values) {
            let cells: Vec<String> = row.iter().map(|&v| cell(v)).collect();
            let _ = writeln!(out, "| {method} | {} |", cells.join(" | "));
        }
    }
    out
}

/// Renders the records in the requested format. Values carry 4 decimals;
/// CSV and Markdown omit timing so that repeated runs compare equal.
pub fn emit_table(records: &[ResultRecord], format: TableFormat) -> Result<String> {
    let tables = metric_tables(records);
    Ok(match format {
        TableFormat::Csv => csv(&tables),
        TableFormat::Markdown => markdown(&tables),
        TableFormat::Json => {
            let report = JsonReport {
                tables,
                records: records.to_vec(),
            };
            let mut s = serde_json::to_string_pretty(&report).map_err(|source| Error::Json {
                path: "<report>".into(),
                source,
            })?;
            s.push('\n');
            s
        }
    })
}
