//! Canonical per-cell telemetry dataset: loading, validation, redundancy
//! filtering and gap completion.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Role {
    /// Configuration parameter.
    Cp,
    /// Key performance indicator.
    Kpi,
    /// Performance-management (environment / load) telemetry.
    Pm,
    /// Static engineering parameter.
    Eng,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Cp => "CP",
            Role::Kpi => "KPI",
            Role::Pm => "PM",
            Role::Eng => "ENG",
        })
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CP" => Ok(Role::Cp),
            "KPI" => Ok(Role::Kpi),
            "PM" => Ok(Role::Pm),
            "ENG" => Ok(Role::Eng),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Numeric,
    Categorical,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Numeric => "numeric",
            Kind::Categorical => "categorical",
        })
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "numeric" => Ok(Kind::Numeric),
            "categorical" => Ok(Kind::Categorical),
            other => Err(format!("unknown kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableDescriptor {
    pub name: String,
    pub role: Role,
    pub kind: Kind,
}

impl VariableDescriptor {
    pub fn new(name: impl Into<String>, role: Role, kind: Kind) -> Self {
        Self { name: name.into(), role, kind }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Cat(String),
}

impl Value {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            Value::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Value::Cat(s) => Some(s),
            Value::Num(_) => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => write!(f, "{v}"),
            Value::Cat(s) => f.write_str(s),
        }
    }
}

/// One sample of one cell. `values` is positional, aligned with the schema.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub cell_id: String,
    pub timestamp: i64,
    pub values: Vec<Option<Value>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Vec<VariableDescriptor>,
    /// Sorted by `(cell_id, timestamp)`.
    pub records: Vec<CellRecord>,
    /// Seconds between consecutive grid slots.
    pub sampling_interval: i64,
}

impl Dataset {
    /// Builds a dataset, checking schema uniqueness and record width and
    /// sorting the records.
    pub fn new(schema: Vec<VariableDescriptor>, mut records: Vec<CellRecord>, sampling_interval: i64) -> Result<Self> {
        check_schema(&schema)?;
        if sampling_interval <= 0 {
            return Err(Error::Schema(format!("sampling interval must be positive, got {sampling_interval}")));
        }
        for r in &records {
            if r.values.len() != schema.len() {
                return Err(Error::Schema(format!(
                    "record ({}, {}) has {} values for {} variables",
                    r.cell_id,
                    r.timestamp,
                    r.values.len(),
                    schema.len()
                )));
            }
        }
        records.sort_by(|a, b| (&a.cell_id, a.timestamp).cmp(&(&b.cell_id, b.timestamp)));
        Ok(Self { schema, records, sampling_interval })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|v| v.name == name)
    }

    pub fn descriptor(&self, name: &str) -> Option<&VariableDescriptor> {
        self.schema.iter().find(|v| v.name == name)
    }

    pub fn variables(&self, role: Role) -> impl Iterator<Item = &VariableDescriptor> {
        self.schema.iter().filter(move |v| v.role == role)
    }

    /// Sorted distinct cell ids.
    pub fn cell_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for r in &self.records {
            if ids.last() != Some(&r.cell_id) {
                ids.push(r.cell_id.clone());
            }
        }
        ids
    }

    /// Contiguous record slices per cell, in cell order.
    pub fn by_cell(&self) -> Vec<(&str, &[CellRecord])> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=self.records.len() {
            if i == self.records.len() || self.records[i].cell_id != self.records[start].cell_id {
                out.push((self.records[start].cell_id.as_str(), &self.records[start..i]));
                start = i;
            }
        }
        out
    }

    pub fn cell_records(&self, cell: &str) -> &[CellRecord] {
        let lo = self.records.partition_point(|r| r.cell_id.as_str() < cell);
        let hi = self.records.partition_point(|r| r.cell_id.as_str() <= cell);
        &self.records[lo..hi]
    }

    /// Observed numeric values of one variable for one cell.
    pub fn numeric_series(&self, cell: &str, var: usize) -> Vec<(i64, f64)> {
        self.cell_records(cell)
            .iter()
            .filter_map(|r| r.values[var].as_ref().and_then(Value::as_num).map(|v| (r.timestamp, v)))
            .collect()
    }

    /// All observed numeric values of one variable, dataset-wide.
    pub fn numeric_values(&self, var: usize) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.values[var].as_ref().and_then(Value::as_num)).collect()
    }
}

fn check_schema(schema: &[VariableDescriptor]) -> Result<()> {
    let mut seen = HashSet::new();
    for v in schema {
        if v.name.is_empty() || v.name.chars().any(|c| c.is_whitespace() || c == ',') {
            return Err(Error::Schema(format!("invalid variable name `{}`", v.name)));
        }
        if v.name == "cell_id" || v.name == "timestamp" {
            return Err(Error::Schema(format!("`{}` is reserved", v.name)));
        }
        if !seen.insert(v.name.as_str()) {
            return Err(Error::Schema(format!("variable `{}` declared twice", v.name)));
        }
    }
    Ok(())
}

/// Parsed schema file: descriptors plus an optional declared interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub variables: Vec<VariableDescriptor>,
    pub sampling_interval: Option<i64>,
}

/// Parses `name, role, kind` lines; an `interval = <seconds>` line
/// declares the sampling grid.
pub fn parse_schema(text: &str, file: &str) -> Result<Schema> {
    let mut variables = Vec::new();
    let mut sampling_interval = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { file: file.to_string(), line: idx + 1, msg };
        if let Some((key, value)) = line.split_once('=') {
            if key.trim() != "interval" {
                return Err(err(format!("unknown directive `{}`", key.trim())));
            }
            let secs: i64 = value.trim().parse().map_err(|_| err(format!("bad interval `{}`", value.trim())))?;
            sampling_interval = Some(secs);
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(err(format!("expected `name, role, kind`, got `{line}`")));
        }
        let role = parts[1].parse().map_err(err)?;
        let kind = parts[2].parse().map_err(err)?;
        variables.push(VariableDescriptor::new(parts[0], role, kind));
    }
    check_schema(&variables)?;
    if let Some(secs) = sampling_interval {
        if secs <= 0 {
            return Err(Error::Schema(format!("sampling interval must be positive, got {secs}")));
        }
    }
    Ok(Schema { variables, sampling_interval })
}

pub fn render_schema(ds: &Dataset) -> String {
    let mut out = format!("interval = {}\n", ds.sampling_interval);
    for v in &ds.schema {
        out.push_str(&format!("{}, {}, {}\n", v.name, v.role, v.kind));
    }
    out
}

pub fn load_dataset(path: &Path, schema_path: &Path) -> Result<Dataset> {
    let schema_text = std::fs::read_to_string(schema_path).map_err(|e| Error::io(schema_path, e))?;
    let schema = parse_schema(&schema_text, &schema_path.display().to_string())?;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, schema)
}

/// Reads the data CSV against an already-parsed schema.
pub fn read_dataset<R: Read>(reader: R, schema: Schema) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = csv.headers()?.clone();
    if header.len() < 2 || &header[0] != "cell_id" || &header[1] != "timestamp" {
        return Err(Error::Schema("data header must start with `cell_id,timestamp`".into()));
    }
    let name_to_var: HashMap<&str, usize> =
        schema.variables.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let mut columns = Vec::with_capacity(header.len() - 2);
    let mut seen = HashSet::new();
    for name in header.iter().skip(2) {
        let &var = name_to_var.get(name).ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
        if !seen.insert(var) {
            return Err(Error::Schema(format!("column `{name}` appears twice")));
        }
        columns.push(var);
    }

    let mut records = Vec::new();
    let mut last_ts: HashMap<String, i64> = HashMap::new();
    let mut keys: HashSet<(String, i64)> = HashSet::new();
    for row in csv.records() {
        let row = row?;
        let cell_id = row[0].to_string();
        if cell_id.is_empty() {
            return Err(Error::Unparseable { column: "cell_id".into(), value: String::new() });
        }
        let timestamp: i64 = row[1]
            .trim()
            .parse()
            .map_err(|_| Error::Unparseable { column: "timestamp".into(), value: row[1].to_string() })?;
        if !keys.insert((cell_id.clone(), timestamp)) {
            return Err(Error::DuplicateRecord { cell: cell_id, timestamp });
        }
        if let Some(&previous) = last_ts.get(&cell_id) {
            if timestamp < previous {
                return Err(Error::NonMonotoneTimestamp { cell: cell_id, previous, timestamp });
            }
        }
        last_ts.insert(cell_id.clone(), timestamp);

        let mut values = vec![None; schema.variables.len()];
        for (field, &var) in row.iter().skip(2).zip(&columns) {
            values[var] = parse_value(field, &schema.variables[var])?;
        }
        records.push(CellRecord { cell_id, timestamp, values });
    }

    let mut ds = Dataset::new(schema.variables, records, 1)?;
    ds.sampling_interval = match schema.sampling_interval {
        Some(secs) => secs,
        None => infer_interval(&ds),
    };
    check_grid(&ds)?;
    Ok(ds)
}

fn parse_value(field: &str, var: &VariableDescriptor) -> Result<Option<Value>> {
    if field.is_empty() {
        return Ok(None);
    }
    match var.kind {
        Kind::Numeric => match field.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(Value::Num(v))),
            _ => Err(Error::Unparseable { column: var.name.clone(), value: field.to_string() }),
        },
        Kind::Categorical => Ok(Some(Value::Cat(field.to_string()))),
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// GCD of all per-cell consecutive timestamp differences (1 when no cell
/// has two samples).
fn infer_interval(ds: &Dataset) -> i64 {
    let mut g = 0;
    for (_, recs) in ds.by_cell() {
        for w in recs.windows(2) {
            g = gcd(g, w[1].timestamp - w[0].timestamp);
        }
    }
    g.max(1)
}

fn check_grid(ds: &Dataset) -> Result<()> {
    for (cell, recs) in ds.by_cell() {
        let origin = recs[0].timestamp;
        for r in recs {
            if (r.timestamp - origin) % ds.sampling_interval != 0 {
                return Err(Error::OffGrid {
                    cell: cell.to_string(),
                    timestamp: r.timestamp,
                    interval: ds.sampling_interval,
                });
            }
        }
    }
    Ok(())
}

pub fn write_dataset_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = vec!["cell_id".to_string(), "timestamp".to_string()];
    header.extend(ds.schema.iter().map(|v| v.name.clone()));
    csv.write_record(&header)?;
    for r in &ds.records {
        let mut row = vec![r.cell_id.clone(), r.timestamp.to_string()];
        row.extend(r.values.iter().map(|v| v.as_ref().map(Value::to_string).unwrap_or_default()));
        csv.write_record(&row)?;
    }
    csv.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Writes `data_path` (CSV) and `schema_path` so that [`load_dataset`]
/// reproduces `ds` exactly.
pub fn save_dataset(ds: &Dataset, data_path: &Path, schema_path: &Path) -> Result<()> {
    let file = std::fs::File::create(data_path).map_err(|e| Error::io(data_path, e))?;
    write_dataset_csv(ds, std::io::BufWriter::new(file))?;
    std::fs::write(schema_path, render_schema(ds)).map_err(|e| Error::io(schema_path, e))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RedundancyReport {
    pub dropped_variables: Vec<String>,
    pub dropped_duplicate_records: usize,
}

/// Drops variables with at most one distinct observed value and exact
/// duplicate records.
pub fn filter_redundant(ds: &Dataset) -> (Dataset, RedundancyReport) {
    let mut keep = Vec::new();
    let mut report = RedundancyReport::default();
    for (j, var) in ds.schema.iter().enumerate() {
        let mut first: Option<&Value> = None;
        let mut varies = false;
        for v in ds.records.iter().filter_map(|r| r.values[j].as_ref()) {
            match first {
                None => first = Some(v),
                Some(f) if !same_value(f, v) => {
                    varies = true;
                    break;
                }
                Some(_) => {}
            }
        }
        if varies {
            keep.push(j);
        } else {
            report.dropped_variables.push(var.name.clone());
        }
    }

    let schema = keep.iter().map(|&j| ds.schema[j].clone()).collect();
    let mut records: Vec<CellRecord> = Vec::with_capacity(ds.records.len());
    let mut run_start = 0;
    for r in &ds.records {
        let projected = CellRecord {
            cell_id: r.cell_id.clone(),
            timestamp: r.timestamp,
            values: keep.iter().map(|&j| r.values[j].clone()).collect(),
        };
        if records.last().is_some_and(|l| l.cell_id != r.cell_id || l.timestamp != r.timestamp) {
            run_start = records.len();
        }
        if records[run_start..].contains(&projected) {
            report.dropped_duplicate_records += 1;
        } else {
            records.push(projected);
        }
    }
    (Dataset { schema, records, sampling_interval: ds.sampling_interval }, report)
}

fn same_value(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Num(x), Value::Num(y)) => x == y,
        (Value::Cat(x), Value::Cat(y)) => x == y,
        _ => false,
    }
}

/// A run of missing samples that completion left untouched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnfilledGap {
    pub cell_id: String,
    pub variable: String,
    /// First and last timestamps of missing samples in the run.
    pub from: i64,
    pub to: i64,
    /// Gap length in grid slots.
    pub length: i64,
    /// False when the run touches the start or end of the cell's series.
    pub flanked: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CompletionReport {
    pub filled_values: usize,
    pub unfilled: Vec<UnfilledGap>,
}

/// Fills interior gaps of at most `max_gap` grid slots: numeric by linear
/// interpolation, categorical by carrying the previous label forward.
pub fn fill_gaps(ds: &Dataset, max_gap: usize) -> (Dataset, CompletionReport) {
    let mut out = ds.clone();
    let mut report = CompletionReport::default();
    let interval = ds.sampling_interval;
    let mut start = 0;
    for (cell, recs) in ds.by_cell() {
        let slot = |i: usize| (recs[i].timestamp - recs[0].timestamp) / interval;
        for (j, var) in ds.schema.iter().enumerate() {
            let observed: Vec<usize> = (0..recs.len()).filter(|&i| recs[i].values[j].is_some()).collect();
            let mut gap = |lo: usize, hi: usize, length: i64, flanked: bool| {
                report.unfilled.push(UnfilledGap {
                    cell_id: cell.to_string(),
                    variable: var.name.clone(),
                    from: recs[lo].timestamp,
                    to: recs[hi].timestamp,
                    length,
                    flanked,
                });
            };
            let Some((&first, &last)) = observed.first().zip(observed.last()) else {
                if !recs.is_empty() {
                    gap(0, recs.len() - 1, slot(recs.len() - 1) + 1, false);
                }
                continue;
            };
            if first > 0 {
                gap(0, first - 1, slot(first - 1) - slot(0) + 1, false);
            }
            if last + 1 < recs.len() {
                gap(last + 1, recs.len() - 1, slot(recs.len() - 1) - slot(last + 1) + 1, false);
            }
            for w in observed.windows(2) {
                let (a, b) = (w[0], w[1]);
                if b == a + 1 {
                    continue;
                }
                let length = slot(b) - slot(a) - 1;
                if length > max_gap as i64 {
                    gap(a + 1, b - 1, length, true);
                    continue;
                }
                for i in a + 1..b {
                    let filled = match (&recs[a].values[j], &recs[b].values[j]) {
                        (Some(Value::Num(va)), Some(Value::Num(vb))) => {
                            let frac = (slot(i) - slot(a)) as f64 / (slot(b) - slot(a)) as f64;
                            Value::Num(va + (vb - va) * frac)
                        }
                        (Some(prev), _) => prev.clone(),
                        (None, _) => unreachable!("flanking samples are observed"),
                    };
                    out.records[start + i].values[j] = Some(filled);
                    report.filled_values += 1;
                }
            }
        }
        start += recs.len();
    }
    (out, report)
}

/// Distinct observed categorical labels of a variable, sorted.
pub fn distinct_labels(ds: &Dataset, var: usize) -> Vec<String> {
    let set: BTreeMap<&str, ()> =
        ds.records.iter().filter_map(|r| r.values[var].as_ref().and_then(Value::as_cat)).map(|s| (s, ())).collect();
    set.into_keys().map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        parse_schema(
            "interval = 10\ntilt, CP, numeric\nrrc_sr, KPI, numeric\nusers, PM, numeric\nvendor_id, ENG, categorical\n",
            "schema",
        )
        .unwrap()
    }

    fn load(csv: &str) -> Result<Dataset> {
        read_dataset(csv.as_bytes(), schema())
    }

    #[test]
    fn loads_three_rows() {
        let ds = load(
            "cell_id,timestamp,tilt,rrc_sr,users,vendor_id\n\
             c2,0,4,97.5,10,V1\n\
             c1,0,2,99.1,12,V1\n\
             c1,10,2,,14,V1\n",
        )
        .unwrap();
        assert_eq!(ds.records.len(), 3);
        assert_eq!(ds.schema.len(), 4);
        assert_eq!(ds.records[0].cell_id, "c1");
        assert_eq!(ds.records[1].values[1], None);
        assert_eq!(ds.cell_ids(), vec!["c1", "c2"]);
    }

    #[test]
    fn header_only_is_empty() {
        let ds = load("cell_id,timestamp,tilt,rrc_sr\n").unwrap();
        assert!(ds.records.is_empty());
        assert_eq!(ds.schema.len(), 4);
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = load("cell_id,timestamp,tilt\ncell_7,1000,2\ncell_7,1010,2\ncell_7,1000,3\n").unwrap_err();
        assert!(matches!(err, Error::DuplicateRecord { ref cell, timestamp: 1000 } if cell == "cell_7"));
    }

    #[test]
    fn non_monotone_rejected() {
        let err = load("cell_id,timestamp,tilt\nc,20,2\nc,10,2\n").unwrap_err();
        assert!(matches!(err, Error::NonMonotoneTimestamp { previous: 20, timestamp: 10, .. }));
    }

    #[test]
    fn unknown_column_and_bad_scalar() {
        assert!(matches!(load("cell_id,timestamp,bogus\n"), Err(Error::UnknownColumn(c)) if c == "bogus"));
        assert!(matches!(load("cell_id,timestamp,tilt\nc,0,abc\n"), Err(Error::Unparseable { .. })));
        assert!(matches!(load("cell_id,timestamp,tilt\nc,0,NaN\n"), Err(Error::Unparseable { .. })));
    }

    #[test]
    fn off_grid_rejected() {
        assert!(matches!(load("cell_id,timestamp,tilt\nc,0,1\nc,15,1\n"), Err(Error::OffGrid { .. })));
    }

    #[test]
    fn interval_inferred_without_directive() {
        let schema = parse_schema("tilt, CP, numeric\n", "s").unwrap();
        let ds = read_dataset("cell_id,timestamp,tilt\nc,0,1\nc,900,2\nc,2700,1\n".as_bytes(), schema).unwrap();
        assert_eq!(ds.sampling_interval, 900);
    }

    fn numeric_ds(values: &[Option<f64>]) -> Dataset {
        let schema = vec![VariableDescriptor::new("x", Role::Kpi, Kind::Numeric)];
        let records = values
            .iter()
            .enumerate()
            .map(|(i, v)| CellRecord { cell_id: "c".into(), timestamp: i as i64, values: vec![v.map(Value::Num)] })
            .collect();
        Dataset::new(schema, records, 1).unwrap()
    }

    fn column(ds: &Dataset) -> Vec<Option<f64>> {
        ds.records.iter().map(|r| r.values[0].as_ref().and_then(Value::as_num)).collect()
    }

    #[test]
    fn midpoint_interpolation() {
        let (out, rep) = fill_gaps(&numeric_ds(&[Some(1.0), None, Some(3.0)]), 1);
        assert_eq!(column(&out), vec![Some(1.0), Some(2.0), Some(3.0)]);
        assert_eq!(rep.filled_values, 1);
        assert!(rep.unfilled.is_empty());
    }

    #[test]
    fn long_gap_reported() {
        let ds = numeric_ds(&[Some(1.0), None, None, Some(4.0)]);
        let (out, rep) = fill_gaps(&ds, 1);
        assert_eq!(out, ds);
        assert_eq!(rep.unfilled.len(), 1);
        assert_eq!(rep.unfilled[0].length, 2);
        assert_eq!((rep.unfilled[0].from, rep.unfilled[0].to), (1, 2));
    }

    #[test]
    fn categorical_forward_fill() {
        let schema = vec![VariableDescriptor::new("mode", Role::Cp, Kind::Categorical)];
        let labels = [Some("A"), None, Some("A")];
        let records = labels
            .iter()
            .enumerate()
            .map(|(i, v)| CellRecord {
                cell_id: "c".into(),
                timestamp: i as i64 * 5,
                values: vec![v.map(|s| Value::Cat(s.into()))],
            })
            .collect();
        let ds = Dataset::new(schema, records, 5).unwrap();
        let (out, _) = fill_gaps(&ds, 1);
        assert!(out.records.iter().all(|r| r.values[0] == Some(Value::Cat("A".into()))));
    }

    #[test]
    fn gap_counted_in_grid_slots() {
        // Slots 0 and 3 observed, slot 1 present but missing, slot 2 absent.
        let schema = vec![VariableDescriptor::new("x", Role::Kpi, Kind::Numeric)];
        let records = vec![
            CellRecord { cell_id: "c".into(), timestamp: 0, values: vec![Some(Value::Num(0.0))] },
            CellRecord { cell_id: "c".into(), timestamp: 1, values: vec![None] },
            CellRecord { cell_id: "c".into(), timestamp: 3, values: vec![Some(Value::Num(3.0))] },
        ];
        let ds = Dataset::new(schema, records, 1).unwrap();
        assert_eq!(fill_gaps(&ds, 1).0, ds);
        assert_eq!(column(&fill_gaps(&ds, 2).0), vec![Some(0.0), Some(1.0), Some(3.0)]);
    }

    #[test]
    fn constant_column_and_duplicates_dropped() {
        let ds = load(
            "cell_id,timestamp,tilt,rrc_sr,vendor_id\n\
             c1,0,2,99,V1\n\
             c1,10,4,98,V1\n",
        )
        .unwrap();
        let (out, rep) = filter_redundant(&ds);
        assert!(rep.dropped_variables.contains(&"vendor_id".to_string()));
        assert!(out.index_of("vendor_id").is_none());
        assert!(out.index_of("tilt").is_some());

        let mut dup = out.clone();
        dup.records.push(dup.records[0].clone());
        dup.records.sort_by(|a, b| (&a.cell_id, a.timestamp).cmp(&(&b.cell_id, b.timestamp)));
        let (dedup, rep) = filter_redundant(&dup);
        assert_eq!(rep.dropped_duplicate_records, 1);
        assert_eq!(dedup, out);
    }

    #[test]
    fn no_constant_columns_is_identity() {
        let ds = numeric_ds(&[Some(1.0), Some(2.0)]);
        let (out, rep) = filter_redundant(&ds);
        assert_eq!(out, ds);
        assert_eq!(rep, RedundancyReport::default());
    }

    #[test]
    fn csv_round_trip() {
        let ds = load(
            "cell_id,timestamp,tilt,rrc_sr,users,vendor_id\n\
             c1,0,2,99.123456789,,\"V,1\"\n\
             c1,10,2.5,1e-7,3,V2\n",
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&ds, &mut buf).unwrap();
        let schema = parse_schema(&render_schema(&ds), "s").unwrap();
        assert_eq!(read_dataset(buf.as_slice(), schema).unwrap(), ds);
    }
}
