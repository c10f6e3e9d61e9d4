//! CSV dumps of distributions and operators.

use std::fmt::Write as _;

use serde::Deserialize;

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::operator::{LinearOperator, Role};
use crate::scalar::{format_probability, Scalar};

/// `index,probability`, ascending indices, 17 significant digits.
pub fn distribution_to_csv<S: Scalar>(d: &Distribution<S>) -> String {
    let mut out = String::from("index,probability\n");
    for (i, p) in d.iter() {
        let _ = writeln!(out, "{i},{}", format_probability(p.to_f64()));
    }
    out
}

#[derive(Deserialize)]
struct DistributionRow {
    index: usize,
    probability: f64,
}

/// Reads a distribution dump over a domain of `domain_size` states.
pub fn read_distribution_csv(text: &[u8], domain_size: usize) -> Result<Distribution<f64>> {
    let mut reader = csv::Reader::from_reader(text);
    let mut entries = Vec::new();
    for (line, row) in reader.deserialize::<DistributionRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(format!("record {}", line + 1), e.to_string()))?;
        entries.push((row.index, row.probability));
    }
    Distribution::new(domain_size, entries)
}

/// `row,col,value` in `(row, col)` order.
pub fn operator_to_csv<S: Scalar>(op: &LinearOperator<S>) -> String {
    let mut out = String::from("row,col,value\n");
    for (r, c, v) in op.entries() {
        let _ = writeln!(out, "{r},{c},{}", format_probability(v.to_f64()));
    }
    out
}

#[derive(Deserialize)]
struct OperatorRow {
    row: usize,
    col: usize,
    value: f64,
}

pub fn read_operator_csv(
    text: &[u8],
    rows: usize,
    cols: usize,
    role: Role,
) -> Result<LinearOperator<f64>> {
    let mut reader = csv::Reader::from_reader(text);
    let mut triples = Vec::new();
    for (line, row) in reader.deserialize::<OperatorRow>().enumerate() {
        let row = row.map_err(|e| Error::parse(format!("record {}", line + 1), e.to_string()))?;
        triples.push((row.row, row.col, row.value));
    }
    LinearOperator::new(rows, cols, role, triples)
}
