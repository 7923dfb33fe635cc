//! Mapping raw KPI / CP / PM values onto discrete levels.
//!
//! Numeric KPIs use half-open intervals `[b_i, b_{i+1})` between ordered
//! breakpoints so that every value inside one band yields the same item.
//! CPs with a handful of settings keep each setting as its own level, so a
//! rule reads `tilt →4` rather than `tilt →high`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Kind, Role, Value};
use crate::error::{Error, Result};
use crate::kv;

pub const DEFAULT_LEVELS: usize = 4;

/// Integer-valued CPs with at most this many settings get one level per
/// setting without an explicit scheme.
pub const MAX_AUTO_SETTINGS: usize = 32;

/// Level names for `n` ordered levels.
pub fn default_labels(n: usize) -> Vec<String> {
    let names: &[&str] = match n {
        2 => &["low", "high"],
        3 => &["low", "normal", "high"],
        4 => &["very_low", "low", "normal", "high"],
        5 => &["very_low", "low", "normal", "high", "very_high"],
        _ => &[],
    };
    if names.is_empty() {
        (0..n).map(|i| format!("level_{i}")).collect()
    } else {
        names.iter().map(|s| s.to_string()).collect()
    }
}

/// Index of the half-open interval containing `v`: the number of
/// breakpoints `<= v`.
pub fn interval_level<F: Float>(v: F, breakpoints: &[F]) -> usize {
    breakpoints.partition_point(|&b| b <= v)
}

/// Linearly interpolated empirical quantiles at `1/n, 2/n, ..., (n-1)/n`
/// of ascending `sorted` (position `(len-1)·p`).
pub fn quantile_breakpoints<F: Float>(sorted: &[F], n: usize) -> Vec<F> {
    assert!(!sorted.is_empty() && n >= 1);
    let last = F::from(sorted.len() - 1).unwrap();
    (1..n)
        .map(|i| {
            let h = last * F::from(i).unwrap() / F::from(n).unwrap();
            let lo = h.floor();
            let idx = lo.to_usize().unwrap();
            let frac = h - lo;
            if idx + 1 < sorted.len() {
                sorted[idx] + (sorted[idx + 1] - sorted[idx]) * frac
            } else {
                sorted[idx]
            }
        })
        .collect()
}

/// Canonical text for a numeric setting: integers without a decimal point.
pub fn format_setting(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

fn sanitize_label(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join("_")
}

/// Level assignment for one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LevelMap {
    /// Ordered half-open intervals; `labels.len() == breakpoints.len() + 1`.
    Intervals { breakpoints: Vec<f64>, labels: Vec<String> },
    /// One level per numeric setting, ascending.
    Settings { values: Vec<f64>, labels: Vec<String> },
    /// Raw categorical label to level index; unordered.
    Categories { map: BTreeMap<String, usize>, labels: Vec<String> },
}

impl LevelMap {
    pub fn intervals(variable: &str, breakpoints: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        let invalid = |msg: &str| Error::InvalidScheme { variable: variable.to_string(), msg: msg.to_string() };
        if breakpoints.is_empty() {
            return Err(invalid("need at least one breakpoint (two levels)"));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(invalid("breakpoints must be finite"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("breakpoints must be strictly increasing"));
        }
        let labels = labels.unwrap_or_else(|| default_labels(breakpoints.len() + 1));
        if labels.len() != breakpoints.len() + 1 {
            return Err(invalid("label count must be breakpoint count + 1"));
        }
        check_labels(variable, &labels)?;
        Ok(LevelMap::Intervals { breakpoints, labels })
    }

    pub fn settings(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        values.dedup();
        let labels = values.iter().map(|&v| format_setting(v)).collect();
        LevelMap::Settings { values, labels }
    }

    /// Each distinct raw label becomes its own level, in sorted order.
    pub fn categories<S: AsRef<str>>(raw: &[S]) -> Self {
        let mut sorted: Vec<&str> = raw.iter().map(AsRef::as_ref).collect();
        sorted.sort_unstable();
        sorted.dedup();
        let map = sorted.iter().enumerate().map(|(i, s)| (s.to_string(), i)).collect();
        let labels = sorted.iter().map(|s| sanitize_label(s)).collect();
        LevelMap::Categories { map, labels }
    }

    pub fn n_levels(&self) -> usize {
        self.labels().len()
    }

    pub fn labels(&self) -> &[String] {
        match self {
            LevelMap::Intervals { labels, .. }
            | LevelMap::Settings { labels, .. }
            | LevelMap::Categories { labels, .. } => labels,
        }
    }

    pub fn label(&self, level: usize) -> &str {
        &self.labels()[level]
    }

    /// Whether levels carry an order, i.e. direction-of-change is meaningful.
    pub fn is_ordered(&self) -> bool {
        !matches!(self, LevelMap::Categories { .. })
    }

    pub fn level_of(&self, variable: &str, value: &Value) -> Result<usize> {
        let unmapped = || Error::InvalidScheme {
            variable: variable.to_string(),
            msg: format!("value `{value}` is not covered by the scheme"),
        };
        match (self, value) {
            (LevelMap::Intervals { breakpoints, .. }, Value::Num(v)) => {
                if v.is_nan() {
                    return Err(Error::NanValue(variable.to_string()));
                }
                Ok(interval_level(*v, breakpoints))
            }
            (LevelMap::Settings { values, .. }, Value::Num(v)) => {
                values.binary_search_by(|s| s.total_cmp(v)).map_err(|_| unmapped())
            }
            (LevelMap::Categories { map, .. }, Value::Cat(s)) => map.get(s).copied().ok_or_else(unmapped),
            _ => Err(unmapped()),
        }
    }
}

fn check_labels(variable: &str, labels: &[String]) -> Result<()> {
    let mut sorted: Vec<&String> = labels.iter().collect();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != labels.len() || labels.iter().any(|l| l.is_empty() || l.chars().any(char::is_whitespace)) {
        return Err(Error::InvalidScheme {
            variable: variable.to_string(),
            msg: "labels must be unique, non-empty and contain no whitespace".into(),
        });
    }
    Ok(())
}

/// Per-variable level maps for every quantized variable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuantizationScheme {
    pub entries: BTreeMap<String, LevelMap>,
}

impl QuantizationScheme {
    pub fn get(&self, variable: &str) -> Result<&LevelMap> {
        self.entries.get(variable).ok_or_else(|| Error::MissingScheme(variable.to_string()))
    }

    pub fn insert(&mut self, variable: impl Into<String>, map: LevelMap) {
        self.entries.insert(variable.into(), map);
    }
}

/// Level-index series of one variable in one cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelSeries {
    pub cell_id: String,
    pub variable: String,
    pub points: Vec<(i64, usize)>,
}

pub fn quantize_kpi(
    cell_id: &str,
    variable: &str,
    series: &[(i64, f64)],
    scheme: &QuantizationScheme,
) -> Result<LevelSeries> {
    let map = scheme.get(variable)?;
    let points = series
        .iter()
        .map(|&(t, v)| {
            if v.is_nan() {
                return Err(Error::NanValue(variable.to_string()));
            }
            Ok((t, map.level_of(variable, &Value::Num(v))?))
        })
        .collect::<Result<_>>()?;
    Ok(LevelSeries { cell_id: cell_id.to_string(), variable: variable.to_string(), points })
}

/// Breakpoints at the empirical `i/n` quantiles of the variable's observed
/// values. Coinciding quantiles (heavy ties) are merged, lowering the level
/// count; fewer than two surviving levels is an error.
pub fn fit_quantile_scheme(ds: &Dataset, variable: &str, n_levels: usize) -> Result<LevelMap> {
    let var = ds.index_of(variable).ok_or_else(|| Error::VariableAbsent(variable.to_string()))?;
    if n_levels < 2 {
        return Err(Error::InvalidArgument(format!("n_levels must be >= 2, got {n_levels}")));
    }
    let mut values = ds.numeric_values(var);
    values.sort_by(f64::total_cmp);
    let mut distinct = values.clone();
    distinct.dedup();
    if distinct.len() < n_levels {
        return Err(Error::TooFewDistinct { variable: variable.to_string(), distinct: distinct.len(), needed: n_levels });
    }
    let mut breakpoints = quantile_breakpoints(&values, n_levels);
    breakpoints.dedup();
    // A breakpoint at the minimum would leave level 0 empty.
    breakpoints.retain(|&b| b > values[0]);
    if breakpoints.is_empty() {
        return Err(Error::TooFewDistinct { variable: variable.to_string(), distinct: 1, needed: n_levels });
    }
    let labels = (breakpoints.len() + 1 == n_levels).then(|| default_labels(n_levels));
    LevelMap::intervals(variable, breakpoints, labels)
}

/// Levels for a CP (or any discrete variable) taken from its observed
/// settings: categorical values, or integer values with few distinct
/// settings. Continuous values need an explicit scheme.
pub fn fit_discrete_levels(ds: &Dataset, variable: &str) -> Result<LevelMap> {
    let var = ds.index_of(variable).ok_or_else(|| Error::VariableAbsent(variable.to_string()))?;
    match ds.schema[var].kind {
        Kind::Categorical => Ok(LevelMap::categories(&crate::dataset::distinct_labels(ds, var))),
        Kind::Numeric => settings_from(variable, ds.numeric_values(var)),
    }
}

fn settings_from(variable: &str, mut values: Vec<f64>) -> Result<LevelMap> {
    values.sort_by(f64::total_cmp);
    values.dedup();
    if values.iter().all(|v| v.fract() == 0.0) && values.len() <= MAX_AUTO_SETTINGS {
        Ok(LevelMap::settings(values))
    } else {
        Err(Error::ContinuousWithoutScheme(variable.to_string()))
    }
}

/// Discretizes a CP series. With no scheme the level set is derived from
/// the series itself.
pub fn discretize_cp(
    cell_id: &str,
    variable: &str,
    series: &[(i64, Value)],
    scheme: Option<&LevelMap>,
) -> Result<(LevelSeries, LevelMap)> {
    let map = match scheme {
        Some(map) => map.clone(),
        None => {
            let cats: Vec<&str> = series.iter().filter_map(|(_, v)| v.as_cat()).collect();
            if cats.len() == series.len() && !cats.is_empty() {
                LevelMap::categories(&cats)
            } else {
                settings_from(variable, series.iter().filter_map(|(_, v)| v.as_num()).collect())?
            }
        }
    };
    let points = series
        .iter()
        .map(|(t, v)| Ok((*t, map.level_of(variable, v)?)))
        .collect::<Result<_>>()?;
    Ok((LevelSeries { cell_id: cell_id.to_string(), variable: variable.to_string(), points }, map))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increase,
    Decrease,
}

impl Direction {
    pub fn between(previous: usize, current: usize) -> Option<Self> {
        match current.cmp(&previous) {
            std::cmp::Ordering::Greater => Some(Direction::Increase),
            std::cmp::Ordering::Less => Some(Direction::Decrease),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Increase => "increase",
            Direction::Decrease => "decrease",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Direction items at every sample whose level differs from the previous
/// sample.
pub fn delta_items(series: &LevelSeries, map: &LevelMap) -> Result<Vec<(i64, Direction)>> {
    if !map.is_ordered() {
        return Err(Error::UnorderedLevels(series.variable.clone()));
    }
    Ok(series
        .points
        .windows(2)
        .filter_map(|w| Direction::between(w[0].1, w[1].1).map(|d| (w[1].0, d)))
        .collect())
}

/// One line of a quantization config.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeSpec {
    /// Quantile fit with the given level count.
    Auto(usize),
    /// One level per observed setting.
    Distinct,
    Breakpoints { breakpoints: Vec<f64>, labels: Option<Vec<String>> },
    /// Explicit raw-label → level-label map for categorical variables.
    Map(Vec<(String, String)>),
}

/// Expert quantization knowledge. Variables without an entry fall back to
/// defaults: CPs to their settings, KPIs and PMs to `default_levels`
/// quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationConfig {
    pub default_levels: usize,
    pub entries: BTreeMap<String, SchemeSpec>,
}

impl Default for QuantizationConfig {
    fn default() -> Self {
        Self { default_levels: DEFAULT_LEVELS, entries: BTreeMap::new() }
    }
}

impl QuantizationConfig {
    /// Grammar per line:
    /// `var = auto[:n]`, `var = distinct`, `var = 90, 95, 99 [| l0, l1, l2, l3]`,
    /// `var = map raw:label, raw:label`, and `default_levels = n`.
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut cfg = QuantizationConfig::default();
        for e in kv::parse(text, file)? {
            if e.key == "default_levels" {
                cfg.default_levels = kv::value(file, &e)?;
                if cfg.default_levels < 2 {
                    return Err(kv::parse_err(file, &e, "default_levels must be >= 2"));
                }
                continue;
            }
            let v = e.value.as_str();
            let spec = if v == "auto" {
                SchemeSpec::Auto(cfg.default_levels)
            } else if let Some(n) = v.strip_prefix("auto:") {
                let n: usize = n.trim().parse().map_err(|_| kv::parse_err(file, &e, "bad level count"))?;
                if n < 2 {
                    return Err(kv::parse_err(file, &e, "level count must be >= 2"));
                }
                SchemeSpec::Auto(n)
            } else if v == "distinct" {
                SchemeSpec::Distinct
            } else if let Some(pairs) = v.strip_prefix("map ") {
                let pairs = pairs
                    .split(',')
                    .map(|p| {
                        p.trim()
                            .split_once(':')
                            .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                            .ok_or_else(|| kv::parse_err(file, &e, format!("bad map pair `{p}`")))
                    })
                    .collect::<Result<_>>()?;
                SchemeSpec::Map(pairs)
            } else {
                let (bps, labels) = match v.split_once('|') {
                    Some((b, l)) => (b, Some(l.split(',').map(|s| s.trim().to_string()).collect())),
                    None => (v, None),
                };
                let breakpoints = bps
                    .split(',')
                    .map(|s| s.trim().parse::<f64>().map_err(|_| kv::parse_err(file, &e, format!("bad breakpoint `{s}`"))))
                    .collect::<Result<_>>()?;
                SchemeSpec::Breakpoints { breakpoints, labels }
            };
            cfg.entries.insert(e.key.clone(), spec);
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// Builds level maps for every CP, KPI and PM variable with observations.
/// Returns the scheme plus human-readable notes about fallbacks taken.
pub fn fit_schemes(ds: &Dataset, config: &QuantizationConfig) -> Result<(QuantizationScheme, Vec<String>)> {
    let mut scheme = QuantizationScheme::default();
    let mut notes = Vec::new();
    for (j, var) in ds.schema.iter().enumerate() {
        if var.role == Role::Eng {
            continue;
        }
        if ds.records.iter().all(|r| r.values[j].is_none()) {
            notes.push(format!("`{}` has no observations; not quantized", var.name));
            continue;
        }
        let map = match config.entries.get(&var.name) {
            Some(SchemeSpec::Auto(n)) => fit_quantile_scheme(ds, &var.name, *n)?,
            Some(SchemeSpec::Distinct) => fit_discrete_levels(ds, &var.name)?,
            Some(SchemeSpec::Breakpoints { breakpoints, labels }) => {
                LevelMap::intervals(&var.name, breakpoints.clone(), labels.clone())?
            }
            Some(SchemeSpec::Map(pairs)) => categorical_map(&var.name, pairs)?,
            None => match (var.role, var.kind) {
                (_, Kind::Categorical) | (Role::Cp, _) => fit_discrete_levels(ds, &var.name)?,
                (Role::Kpi, Kind::Numeric) => fit_quantile_scheme(ds, &var.name, config.default_levels)?,
                (_, Kind::Numeric) => match fit_quantile_scheme(ds, &var.name, config.default_levels) {
                    Ok(map) => map,
                    Err(Error::TooFewDistinct { .. }) => {
                        notes.push(format!("`{}`: too few distinct values for quantiles, using settings", var.name));
                        fit_discrete_levels(ds, &var.name)?
                    }
                    Err(e) => return Err(e),
                },
            },
        };
        scheme.insert(var.name.clone(), map);
    }
    Ok((scheme, notes))
}

fn categorical_map(variable: &str, pairs: &[(String, String)]) -> Result<LevelMap> {
    let mut labels: Vec<String> = Vec::new();
    let mut map = BTreeMap::new();
    for (raw, label) in pairs {
        let idx = match labels.iter().position(|l| l == label) {
            Some(i) => i,
            None => {
                labels.push(label.clone());
                labels.len() - 1
            }
        };
        if map.insert(raw.clone(), idx).is_some() {
            return Err(Error::InvalidScheme { variable: variable.to_string(), msg: format!("`{raw}` mapped twice") });
        }
    }
    check_labels(variable, &labels)?;
    Ok(LevelMap::Categories { map, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CellRecord, VariableDescriptor};

    fn rrc_scheme() -> QuantizationScheme {
        let labels = ["very_low", "low", "fair", "normal"].map(String::from).to_vec();
        let mut s = QuantizationScheme::default();
        s.insert("rrc_sr", LevelMap::intervals("rrc_sr", vec![90.0, 95.0, 99.0], Some(labels)).unwrap());
        s
    }

    #[test]
    fn interval_membership() {
        let s = rrc_scheme();
        let out = quantize_kpi("c", "rrc_sr", &[(0, 99.5), (1, 80.0), (2, 95.0)], &s).unwrap();
        assert_eq!(out.points, vec![(0, 3), (1, 0), (2, 2)]);
        assert_eq!(s.get("rrc_sr").unwrap().label(3), "normal");
        assert_eq!(s.get("rrc_sr").unwrap().label(0), "very_low");
    }

    #[test]
    fn constant_series_all_level_zero() {
        let series: Vec<(i64, f64)> = (0..5).map(|t| (t, 50.0)).collect();
        let out = quantize_kpi("c", "rrc_sr", &series, &rrc_scheme()).unwrap();
        assert!(out.points.iter().all(|&(_, l)| l == 0));
    }

    #[test]
    fn missing_scheme_and_nan() {
        assert!(matches!(quantize_kpi("c", "other", &[(0, 1.0)], &rrc_scheme()), Err(Error::MissingScheme(_))));
        assert!(matches!(quantize_kpi("c", "rrc_sr", &[(0, f64::NAN)], &rrc_scheme()), Err(Error::NanValue(_))));
    }

    fn ds_with(values: &[f64]) -> Dataset {
        let schema = vec![VariableDescriptor::new("x", Role::Kpi, Kind::Numeric)];
        let records = values
            .iter()
            .enumerate()
            .map(|(i, &v)| CellRecord { cell_id: "c".into(), timestamp: i as i64, values: vec![Some(Value::Num(v))] })
            .collect();
        Dataset::new(schema, records, 1).unwrap()
    }

    #[test]
    fn quantiles_of_one_to_hundred() {
        // Position (N-1)p on 1..=100: 24.75 -> 25.75, 49.5 -> 50.5, 74.25 -> 75.25.
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let LevelMap::Intervals { breakpoints, labels } = fit_quantile_scheme(&ds_with(&values), "x", 4).unwrap() else {
            panic!("expected intervals");
        };
        let expected = [25.75, 50.5, 75.25];
        for (b, e) in breakpoints.iter().zip(expected) {
            assert!((b - e).abs() < 1e-12, "{b} vs {e}");
        }
        assert_eq!(labels, default_labels(4));
    }

    #[test]
    fn quantile_degenerate_and_two_point() {
        assert!(matches!(fit_quantile_scheme(&ds_with(&[3.0; 10]), "x", 4), Err(Error::TooFewDistinct { .. })));
        let LevelMap::Intervals { breakpoints, .. } = fit_quantile_scheme(&ds_with(&[0.0, 1.0]), "x", 2).unwrap() else {
            panic!()
        };
        assert_eq!(breakpoints.len(), 1);
        assert!(breakpoints[0] > 0.0 && breakpoints[0] <= 1.0);
    }

    #[test]
    fn integer_cp_settings_are_levels() {
        let series = vec![(0, Value::Num(2.0)), (1, Value::Num(4.0)), (2, Value::Num(2.0))];
        let (levels, map) = discretize_cp("c", "CELLSIMAP.SITRANSECR", &series, None).unwrap();
        assert_eq!(map.labels(), ["2", "4"]);
        assert_eq!(levels.points, vec![(0, 0), (1, 1), (2, 0)]);
    }

    #[test]
    fn categorical_cp_levels() {
        let series = vec![(0, Value::Cat("on".into())), (1, Value::Cat("off".into()))];
        let (_, map) = discretize_cp("c", "sw", &series, None).unwrap();
        assert_eq!(map.n_levels(), 2);
        assert!(!map.is_ordered());
    }

    #[test]
    fn continuous_cp_needs_scheme() {
        let series = vec![(0, Value::Num(2.5)), (1, Value::Num(7.1)), (2, Value::Num(4.0))];
        assert!(matches!(discretize_cp("c", "tilt", &series, None), Err(Error::ContinuousWithoutScheme(_))));
        let map = LevelMap::intervals("tilt", vec![3.0, 6.0], None).unwrap();
        let (levels, map) = discretize_cp("c", "tilt", &series, Some(&map)).unwrap();
        assert_eq!(map.n_levels(), 3);
        assert_eq!(levels.points, vec![(0, 0), (1, 2), (2, 1)]);
    }

    fn series(levels: &[usize]) -> LevelSeries {
        LevelSeries {
            cell_id: "c".into(),
            variable: "tilt".into(),
            points: levels.iter().enumerate().map(|(i, &l)| (i as i64, l)).collect(),
        }
    }

    #[test]
    fn deltas() {
        let map = LevelMap::settings(vec![2.0, 3.0, 4.0]);
        // settings 2,2,4,3 -> level indices 0,0,2,1
        let d = delta_items(&series(&[0, 0, 2, 1]), &map).unwrap();
        assert_eq!(d, vec![(2, Direction::Increase), (3, Direction::Decrease)]);
        assert!(delta_items(&series(&[1, 1, 1]), &map).unwrap().is_empty());
        assert!(delta_items(&series(&[1]), &map).unwrap().is_empty());
        let cats = LevelMap::categories(&["on", "off"]);
        assert!(matches!(delta_items(&series(&[0, 1]), &cats), Err(Error::UnorderedLevels(_))));
    }

    #[test]
    fn config_grammar() {
        let cfg = QuantizationConfig::parse(
            "default_levels = 3\nrrc_sr = 90, 95, 99 | very_low, low, fair, normal\nusers = auto\n\
             thr = auto:5\ntilt = distinct\nmode = map on:enabled, auto:enabled, off:disabled\n",
            "q",
        )
        .unwrap();
        assert_eq!(cfg.default_levels, 3);
        assert_eq!(cfg.entries["users"], SchemeSpec::Auto(3));
        assert_eq!(cfg.entries["thr"], SchemeSpec::Auto(5));
        assert_eq!(cfg.entries["tilt"], SchemeSpec::Distinct);
        let SchemeSpec::Map(pairs) = &cfg.entries["mode"] else { panic!() };
        let map = categorical_map("mode", pairs).unwrap();
        assert_eq!(map.labels(), ["enabled", "disabled"]);
        assert_eq!(map.level_of("mode", &Value::Cat("auto".into())).unwrap(), 0);
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(LevelMap::intervals("x", vec![3.0, 3.0], None).is_err());
        assert!(LevelMap::intervals("x", vec![], None).is_err());
        assert!(LevelMap::intervals("x", vec![1.0], Some(vec!["a".into()])).is_err());
    }
}
