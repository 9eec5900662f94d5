//! JSON file formats for functionals, behaviors and count tables.
//!
//! Every file carries `format_version`, `kind`, `m` and `d`. Tables are
//! nested arrays indexed `[x][y][a][b]`; marginal blocks are `[setting][outcome]`.
//! Numbers are written in shortest round-trip form, so reading back a file
//! written here reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use bellgap::{Behavior, BellFunctional, CountTable, Scenario};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const FORMAT_VERSION: u64 = 1;

/// Where a counts or behavior file came from, when it was simulated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concurrence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_per_setting: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedFunctional {
    pub name: Option<String>,
    pub functional: BellFunctional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountsFile {
    pub counts: CountTable,
    pub source: Option<Source>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorFile {
    pub behavior: Behavior,
    pub source: Option<Source>,
}

/// Either kind of data a functional can be evaluated against.
#[derive(Debug, Clone, PartialEq)]
pub enum DataFile {
    Counts(CountsFile),
    Behavior(BehaviorFile),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionalRepr {
    format_version: u64,
    kind: String,
    m: usize,
    d: usize,
    #[serde(default)]
    name: Option<String>,
    joint: Value,
    #[serde(default)]
    marginal_a: Option<Value>,
    #[serde(default)]
    marginal_b: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CountsRepr {
    format_version: u64,
    kind: String,
    m: usize,
    d: usize,
    counts: Value,
    #[serde(default)]
    source: Option<Source>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BehaviorRepr {
    format_version: u64,
    kind: String,
    m: usize,
    d: usize,
    p: Value,
    #[serde(default)]
    setting_weights: Option<Value>,
    #[serde(default)]
    source: Option<Source>,
}

pub fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse_value(bytes: &[u8], path: &Path) -> CliResult<Value> {
    serde_json::from_slice(bytes).map_err(|e| CliError::invalid(format!("{}: invalid JSON: {e}", path.display())))
}

fn kind_of(value: &Value, path: &Path) -> CliResult<String> {
    match value.get("format_version").and_then(Value::as_u64) {
        Some(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(CliError::invalid(format!(
                "{}: unsupported format_version {v} (expected {FORMAT_VERSION})",
                path.display()
            )))
        }
        None => return Err(CliError::invalid(format!("{}: missing format_version", path.display()))),
    }
    value
        .get("kind")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| CliError::invalid(format!("{}: missing kind", path.display())))
}

fn decode<T: for<'de> Deserialize<'de>>(value: Value, path: &Path) -> CliResult<T> {
    serde_json::from_value(value).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn check_header(version: u64, kind: &str, want: &str, path: &Path) -> CliResult<()> {
    if version != FORMAT_VERSION || kind != want {
        return Err(CliError::invalid(format!(
            "{}: expected a {want} file (format_version {FORMAT_VERSION}), found {kind} version {version}",
            path.display()
        )));
    }
    Ok(())
}

/// Flattens a nested array of the given shape in row-major order.
fn flatten<T: Copy>(
    value: &Value,
    shape: &[usize],
    what: &str,
    leaf: &dyn Fn(&Value) -> Option<T>,
) -> CliResult<Vec<T>> {
    fn walk<T: Copy>(
        v: &Value,
        shape: &[usize],
        what: &str,
        leaf: &dyn Fn(&Value) -> Option<T>,
        out: &mut Vec<T>,
    ) -> CliResult<()> {
        match shape.split_first() {
            None => {
                let x = leaf(v).ok_or_else(|| CliError::invalid(format!("{what}: bad entry {v}")))?;
                out.push(x);
                Ok(())
            }
            Some((&len, rest)) => {
                let items = v
                    .as_array()
                    .filter(|a| a.len() == len)
                    .ok_or_else(|| CliError::invalid(format!("{what}: expected an array of length {len}")))?;
                items.iter().try_for_each(|item| walk(item, rest, what, leaf, out))
            }
        }
    }
    let mut out = Vec::with_capacity(shape.iter().product());
    walk(value, shape, what, leaf, &mut out)?;
    Ok(out)
}

fn flatten_f64(value: &Value, shape: &[usize], what: &str) -> CliResult<Vec<f64>> {
    flatten(value, shape, what, &Value::as_f64)
}

fn nest<T: Serialize>(flat: &[T], shape: &[usize]) -> Value {
    match shape.split_first() {
        None => serde_json::to_value(&flat[0]).expect("scalar serializes"),
        Some((&len, rest)) => {
            let stride = flat.len() / len;
            Value::Array((0..len).map(|i| nest(&flat[i * stride..(i + 1) * stride], rest)).collect())
        }
    }
}

fn scenario(m: usize, d: usize) -> CliResult<Scenario> {
    Ok(Scenario::new(m, d)?)
}

fn table_shape(sc: Scenario) -> [usize; 4] {
    [sc.m(), sc.m(), sc.d(), sc.d()]
}

pub fn parse_functional(bytes: &[u8], path: &Path) -> CliResult<NamedFunctional> {
    let repr: FunctionalRepr = decode(parse_value(bytes, path)?, path)?;
    check_header(repr.format_version, &repr.kind, "functional", path)?;
    let sc = scenario(repr.m, repr.d)?;
    let joint = flatten_f64(&repr.joint, &table_shape(sc), "joint")?;
    let marginal = |v: &Option<Value>, what| match v {
        Some(v) => flatten_f64(v, &[sc.m(), sc.d()], what),
        None => Ok(vec![0.0; sc.marginal_len()]),
    };
    let ma = marginal(&repr.marginal_a, "marginal_a")?;
    let mb = marginal(&repr.marginal_b, "marginal_b")?;
    Ok(NamedFunctional {
        name: repr.name,
        functional: BellFunctional::new(sc, joint, ma, mb)?,
    })
}

pub fn functional_json(f: &BellFunctional, name: Option<&str>) -> Value {
    let sc = f.scenario();
    let mut obj = serde_json::json!({
        "format_version": FORMAT_VERSION,
        "kind": "functional",
        "m": sc.m(),
        "d": sc.d(),
        "joint": nest(f.joint(), &table_shape(sc)),
        "marginal_a": nest(f.marginal_a(), &[sc.m(), sc.d()]),
        "marginal_b": nest(f.marginal_b(), &[sc.m(), sc.d()]),
    });
    if let Some(name) = name {
        obj["name"] = Value::from(name);
    }
    obj
}

pub fn parse_counts(bytes: &[u8], path: &Path) -> CliResult<CountsFile> {
    let repr: CountsRepr = decode(parse_value(bytes, path)?, path)?;
    check_header(repr.format_version, &repr.kind, "counts", path)?;
    let sc = scenario(repr.m, repr.d)?;
    let counts = flatten(&repr.counts, &table_shape(sc), "counts", &Value::as_u64)?;
    let counts = CountTable::new(sc, counts)?;
    counts.check_positive()?;
    Ok(CountsFile {
        counts,
        source: repr.source,
    })
}

pub fn counts_json(counts: &CountTable, source: Option<&Source>) -> Value {
    let sc = counts.scenario();
    let mut obj = serde_json::json!({
        "format_version": FORMAT_VERSION,
        "kind": "counts",
        "m": sc.m(),
        "d": sc.d(),
        "counts": nest(counts.counts(), &table_shape(sc)),
    });
    if let Some(source) = source {
        obj["source"] = serde_json::to_value(source).expect("source serializes");
    }
    obj
}

pub fn parse_behavior(bytes: &[u8], path: &Path) -> CliResult<BehaviorFile> {
    let repr: BehaviorRepr = decode(parse_value(bytes, path)?, path)?;
    check_header(repr.format_version, &repr.kind, "behavior", path)?;
    let sc = scenario(repr.m, repr.d)?;
    let p = flatten_f64(&repr.p, &table_shape(sc), "p")?;
    let weights = repr
        .setting_weights
        .as_ref()
        .map(|w| flatten_f64(w, &[sc.m(), sc.m()], "setting_weights"))
        .transpose()?;
    Ok(BehaviorFile {
        behavior: Behavior::new(sc, p, weights)?,
        source: repr.source,
    })
}

pub fn behavior_json(b: &Behavior, source: Option<&Source>) -> Value {
    let sc = b.scenario();
    let mut obj = serde_json::json!({
        "format_version": FORMAT_VERSION,
        "kind": "behavior",
        "m": sc.m(),
        "d": sc.d(),
        "p": nest(b.probabilities(), &table_shape(sc)),
        "setting_weights": nest(b.setting_weights(), &[sc.m(), sc.m()]),
    });
    if let Some(source) = source {
        obj["source"] = serde_json::to_value(source).expect("source serializes");
    }
    obj
}

/// Reads a counts or behavior file, dispatching on its `kind`.
pub fn parse_data(bytes: &[u8], path: &Path) -> CliResult<DataFile> {
    let value = parse_value(bytes, path)?;
    match kind_of(&value, path)?.as_str() {
        "counts" => Ok(DataFile::Counts(parse_counts(bytes, path)?)),
        "behavior" => Ok(DataFile::Behavior(parse_behavior(bytes, path)?)),
        other => Err(CliError::invalid(format!(
            "{}: expected counts or behavior, found {other}",
            path.display()
        ))),
    }
}

pub fn read_functional(path: &Path) -> CliResult<NamedFunctional> {
    parse_functional(&read_bytes(path)?, path)
}

pub fn read_counts(path: &Path) -> CliResult<CountsFile> {
    parse_counts(&read_bytes(path)?, path)
}

pub fn read_data(path: &Path) -> CliResult<DataFile> {
    parse_data(&read_bytes(path)?, path)
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn to_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::invalid(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    write_text(path, &to_text(value))
}
