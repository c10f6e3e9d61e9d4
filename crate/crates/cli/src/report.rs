//! Deterministic report rendering.
//!
//! Keys are sorted (`serde_json`'s default map), floats are rounded to 15
//! decimals, and nothing time- or host-dependent is recorded.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use pai_core::scalar::{format_decimal, round_fixed};
use pai_core::{Distribution, Error, Partition, Result, Scalar};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

/// SHA-256 over the network file and the config file.
pub fn config_hash(network: &[u8], config: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update((network.len() as u64).to_le_bytes());
    h.update(network);
    h.update(config);
    hex::encode(h.finalize())
}

pub fn number(x: f64) -> Value {
    json!(round_fixed(x))
}

/// `{label: probability}` over the nonzero cells.
pub fn cell_map<S: Scalar>(d: &Distribution<S>, p: &Partition) -> Value {
    let mut m = Map::new();
    for (c, v) in d.iter() {
        m.insert(p.label(c), number(v.to_f64()));
    }
    Value::Object(m)
}

/// `{label: "n/d"}` over the nonzero cells, for exact runs.
pub fn exact_cell_map<S: Scalar>(d: &Distribution<S>, p: &Partition) -> Option<Value> {
    if !S::EXACT {
        return None;
    }
    let mut m = Map::new();
    for (c, v) in d.iter() {
        let r = v.to_rational()?;
        m.insert(p.label(c), Value::String(format_decimal(&r)));
    }
    Some(Value::Object(m))
}

pub fn exact_number<S: Scalar>(x: &S) -> Option<Value> {
    S::EXACT
        .then(|| x.to_rational())
        .flatten()
        .map(|r| Value::String(format_decimal(&r)))
}

/// Whitespace-separated `cell label probability` table over every cell.
pub fn plot_table<S: Scalar>(d: &Distribution<S>, p: &Partition, title: &str) -> String {
    let mut out = format!("# {title}\n# cell label probability\n");
    for c in 0..p.cell_count() {
        let _ = writeln!(out, "{c} {} {}", p.label(c), round_fixed(d.get(c).to_f64()));
    }
    out
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
    text.push('\n');
    write(dir, name, &text)
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}
