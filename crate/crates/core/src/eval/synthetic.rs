//! Planted-rule synthetic telemetry.
//!
//! Every slot draws each CP setting uniformly and each PM level with a
//! lean towards a level that depends on the cell's group. A KPI whose
//! planted pattern matches takes the planted level with the response
//! probability and otherwise a uniform other level; with no matching
//! pattern it is uniform over all levels. KPI level `i` is written as a raw
//! value in `[10i, 10i + 10)` so breakpoints `10, 20, ...` recover it.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{LabelSet, Verdict};
use crate::dataset::{save_dataset, CellRecord, Dataset, Kind, Role, Value, VariableDescriptor};
use crate::error::{Error, Result};
use crate::kv;
use crate::miner::Rule;
use crate::quantize::default_labels;
use crate::transactions::{Item, ItemTag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRule {
    /// `(variable, value)` pairs: a CP setting or a PM level label.
    pub pattern: Vec<(String, String)>,
    pub kpi: String,
    pub level: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub cells: usize,
    pub timestamps: usize,
    pub interval: i64,
    /// Cells are split into this many groups that differ in their
    /// engineering parameters.
    pub groups: usize,
    /// CP name and its settings.
    pub cps: Vec<(String, Vec<String>)>,
    /// KPI name and level count.
    pub kpis: Vec<(String, usize)>,
    /// PM name and level count.
    pub pms: Vec<(String, usize)>,
    pub engs: Vec<String>,
    pub rules: Vec<PlantedRule>,
    /// Within-level jitter of raw KPI/PM values, in `[0, 1]` of the band.
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            cells: 4,
            timestamps: 500,
            interval: 900,
            groups: 1,
            cps: Vec::new(),
            kpis: Vec::new(),
            pms: Vec::new(),
            engs: Vec::new(),
            rules: Vec::new(),
            noise: 0.5,
        }
    }
}

fn parse_rule(text: &str) -> Option<PlantedRule> {
    let (lhs, rest) = text.split_once("->")?;
    let (rhs, p) = rest.split_once('@')?;
    let pattern = lhs
        .split(',')
        .map(|t| t.split_once('=').map(|(v, x)| (v.trim().to_string(), x.trim().to_string())))
        .collect::<Option<Vec<_>>>()?;
    let (kpi, level) = rhs.split_once('=')?;
    Some(PlantedRule {
        pattern,
        kpi: kpi.trim().to_string(),
        level: level.trim().to_string(),
        probability: p.trim().parse().ok()?,
    })
}

fn named_count(text: &str) -> Option<(String, usize)> {
    let (name, n) = text.split_once(':')?;
    Some((name.trim().to_string(), n.trim().parse().ok()?))
}

impl SyntheticSpec {
    /// Key-value spec, e.g.
    ///
    /// ```text
    /// seed = 7
    /// cells = 4
    /// timestamps = 600
    /// cp = tilt: 0, 2, 4, 6
    /// kpi = rrc_sr: 4
    /// pm = users: 3
    /// rule = tilt=2 -> rrc_sr=normal @ 0.95
    /// ```
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut spec = SyntheticSpec::default();
        for e in kv::parse(text, file)? {
            let bad = |what: &str| kv::parse_err(file, &e, format!("bad {what} `{}`", e.value));
            match e.key.as_str() {
                "seed" => spec.seed = kv::value(file, &e)?,
                "cells" => spec.cells = kv::value(file, &e)?,
                "timestamps" => spec.timestamps = kv::value(file, &e)?,
                "interval" => spec.interval = kv::value(file, &e)?,
                "groups" => spec.groups = kv::value(file, &e)?,
                "noise" => spec.noise = kv::value(file, &e)?,
                "cp" => {
                    let (name, values) = e.value.split_once(':').ok_or_else(|| bad("cp"))?;
                    let values = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
                    spec.cps.push((name.trim().to_string(), values));
                }
                "kpi" => spec.kpis.push(named_count(&e.value).ok_or_else(|| bad("kpi"))?),
                "pm" => spec.pms.push(named_count(&e.value).ok_or_else(|| bad("pm"))?),
                "eng" => spec.engs.push(e.value.clone()),
                "rule" => spec.rules.push(parse_rule(&e.value).ok_or_else(|| bad("rule"))?),
                _ => return Err(kv::parse_err(file, &e, format!("unknown key `{}`", e.key))),
            }
        }
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn kpi_levels(&self, kpi: &str) -> Option<Vec<String>> {
        self.kpis.iter().find(|(n, _)| n == kpi).map(|(_, n)| default_labels(*n))
    }

    fn pm_levels(&self, pm: &str) -> Option<Vec<String>> {
        self.pms.iter().find(|(n, _)| n == pm).map(|(_, n)| default_labels(*n))
    }

    /// Rendered item of one pattern term.
    fn pattern_item(&self, var: &str, value: &str) -> Item {
        let tag = if self.pms.iter().any(|(n, _)| n == var) { ItemTag::EnvLevel } else { ItemTag::CpLevel };
        Item::new(var, value, tag)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Unsatisfiable(msg));
        if self.cells == 0 || self.timestamps == 0 || self.interval <= 0 {
            return bad("cells, timestamps and interval must be positive".into());
        }
        if self.groups == 0 || self.groups > self.cells {
            return bad(format!("groups must be in 1..={}", self.cells));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise {} outside [0, 1]", self.noise));
        }
        let mut names = BTreeSet::new();
        let all = self
            .cps
            .iter()
            .map(|c| &c.0)
            .chain(self.kpis.iter().map(|k| &k.0))
            .chain(self.pms.iter().map(|p| &p.0))
            .chain(&self.engs);
        for n in all {
            if !names.insert(n.as_str()) {
                return bad(format!("variable `{n}` declared twice"));
            }
        }
        for (name, values) in &self.cps {
            if values.len() < 2 || values.iter().collect::<BTreeSet<_>>().len() != values.len() {
                return bad(format!("CP `{name}` needs at least two distinct settings"));
            }
        }
        for (name, n) in self.kpis.iter().chain(&self.pms) {
            if *n < 2 {
                return bad(format!("`{name}` needs at least two levels"));
            }
        }
        for r in &self.rules {
            if !(r.probability > 0.0 && r.probability <= 1.0) {
                return bad(format!("response probability {} outside (0, 1]", r.probability));
            }
            let Some(levels) = self.kpi_levels(&r.kpi) else {
                return bad(format!("unknown KPI `{}`", r.kpi));
            };
            if !levels.contains(&r.level) {
                return bad(format!("KPI `{}` has no level `{}`", r.kpi, r.level));
            }
            if r.pattern.is_empty() {
                return bad("empty rule pattern".into());
            }
            let mut seen = BTreeSet::new();
            for (var, value) in &r.pattern {
                if !seen.insert(var) {
                    return bad(format!("`{var}` appears twice in one pattern"));
                }
                let known = match self.cps.iter().find(|(n, _)| n == var) {
                    Some((_, settings)) => settings.contains(value),
                    None => self.pm_levels(var).is_some_and(|l| l.contains(value)),
                };
                if !known {
                    return bad(format!("pattern term `{var}={value}` names no CP setting or PM level"));
                }
            }
        }
        for (i, a) in self.rules.iter().enumerate() {
            for b in &self.rules[i + 1..] {
                if a.kpi != b.kpi || (a.level == b.level && a.probability == b.probability) {
                    continue;
                }
                let compatible =
                    a.pattern.iter().all(|(v, x)| b.pattern.iter().all(|(w, y)| v != w || x == y));
                if compatible {
                    return bad(format!("patterns for `{}` can hold together with different responses", a.kpi));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub truth: Vec<PlantedRule>,
    /// Quantization config text recovering the generating levels.
    pub quantization: String,
}

impl Synthetic {
    /// Writes `data.csv`, `schema.txt`, `quantization.cfg`, `truth.json`
    /// and a `pipeline.cfg` wired to them.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_dataset(&self.dataset, &dir.join("data.csv"), &dir.join("schema.txt"))?;
        let write = |name: &str, text: &str| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("quantization.cfg", &self.quantization)?;
        write("truth.json", &(serde_json::to_string_pretty(&self.truth)? + "\n"))?;
        write(
            "pipeline.cfg",
            "data = data.csv\nschema = schema.txt\nquantization = quantization.cfg\noutput = out\n",
        )
    }
}

fn band_value(rng: &mut ChaCha8Rng, level: usize, noise: f64) -> f64 {
    10.0 * level as f64 + 5.0 + noise * rng.gen_range(-5.0..5.0)
}

/// Simulates the spec and returns the data with its planted rules.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Synthetic> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let numeric = |vals: &[String]| vals.iter().all(|v| v.parse::<f64>().is_ok());

    let mut schema = Vec::new();
    for e in &spec.engs {
        schema.push(VariableDescriptor::new(e, Role::Eng, Kind::Numeric));
    }
    for (name, values) in &spec.cps {
        let kind = if numeric(values) { Kind::Numeric } else { Kind::Categorical };
        schema.push(VariableDescriptor::new(name, Role::Cp, kind));
    }
    for (name, _) in &spec.pms {
        schema.push(VariableDescriptor::new(name, Role::Pm, Kind::Numeric));
    }
    for (name, _) in &spec.kpis {
        schema.push(VariableDescriptor::new(name, Role::Kpi, Kind::Numeric));
    }

    let width = (spec.cells - 1).to_string().len().max(3);
    let mut records = Vec::with_capacity(spec.cells * spec.timestamps);
    for c in 0..spec.cells {
        let cell_id = format!("cell_{c:0width$}");
        let group = c * spec.groups / spec.cells;
        let eng: Vec<f64> = spec
            .engs
            .iter()
            .enumerate()
            .map(|(e, _)| 100.0 * (e + 1) as f64 * (group + 1) as f64 + rng.gen_range(-1.0..1.0))
            .collect();
        for t in 0..spec.timestamps {
            let mut values: Vec<Option<Value>> = eng.iter().map(|&v| Some(Value::Num(v))).collect();
            let mut state: Vec<(&str, String)> = Vec::new();
            for (name, settings) in &spec.cps {
                let s = &settings[rng.gen_range(0..settings.len())];
                values.push(Some(match s.parse::<f64>() {
                    Ok(x) if numeric(settings) => Value::Num(x),
                    _ => Value::Cat(s.clone()),
                }));
                state.push((name, s.clone()));
            }
            for (p, (name, n)) in spec.pms.iter().enumerate() {
                // Each group leans towards its own PM level, giving cells of
                // one group similar load profiles.
                let favoured = (group + p) % n;
                let draw = rng.gen_range(0..n + 2);
                let level = if draw >= *n { favoured } else { draw };
                values.push(Some(Value::Num(band_value(&mut rng, level, spec.noise))));
                state.push((name, default_labels(*n)[level].clone()));
            }
            for (name, n) in &spec.kpis {
                let labels = default_labels(*n);
                let planted = spec.rules.iter().find(|r| {
                    r.kpi == *name && r.pattern.iter().all(|(v, x)| state.iter().any(|(s, y)| s == v && y == x))
                });
                let level = match planted {
                    Some(r) => {
                        let target = labels.iter().position(|l| *l == r.level).expect("validated level");
                        if rng.gen_bool(r.probability) {
                            target
                        } else {
                            let other = rng.gen_range(0..n - 1);
                            if other >= target { other + 1 } else { other }
                        }
                    }
                    None => rng.gen_range(0..*n),
                };
                values.push(Some(Value::Num(band_value(&mut rng, level, spec.noise))));
            }
            records.push(CellRecord { cell_id: cell_id.clone(), timestamp: t as i64 * spec.interval, values });
        }
    }
    let dataset = Dataset::new(schema, records, spec.interval)?;

    let mut quantization = String::from("# levels used by the generator\n");
    for (name, _) in &spec.cps {
        writeln!(quantization, "{name} = distinct").unwrap();
    }
    for (name, n) in spec.pms.iter().chain(&spec.kpis) {
        let bps: Vec<String> = (1..*n).map(|i| (10 * i).to_string()).collect();
        writeln!(quantization, "{name} = {} | {}", bps.join(", "), default_labels(*n).join(", ")).unwrap();
    }
    Ok(Synthetic { dataset, truth: spec.rules.clone(), quantization })
}

/// Ground-truth verdicts for mined rules: a rule is correct when each of
/// its consequent items is the response of some planted rule whose pattern
/// lies within the mined antecedent.
pub fn label_against_truth(rules: &[Rule], spec: &SyntheticSpec) -> LabelSet {
    let planted: Vec<(BTreeSet<String>, String)> = spec
        .rules
        .iter()
        .map(|r| {
            let pattern = r.pattern.iter().map(|(v, x)| spec.pattern_item(v, x).render()).collect();
            (pattern, Item::new(&r.kpi, &r.level, ItemTag::KpiLevel).render())
        })
        .collect();
    let mut labels = LabelSet::default();
    for rule in rules {
        let key = rule.key();
        let implied = key
            .consequent
            .iter()
            .all(|c| planted.iter().any(|(p, response)| response == c && p.is_subset(&key.antecedent)));
        labels.labels.insert(key, if implied { Verdict::Correct } else { Verdict::Incorrect });
    }
    labels
}

/// The mined rule matching a planted rule exactly, if any.
pub fn find_planted<'a>(rules: &'a [Rule], planted: &PlantedRule, spec: &SyntheticSpec) -> Option<&'a Rule> {
    let ante: BTreeSet<String> = planted.pattern.iter().map(|(v, x)| spec.pattern_item(v, x).render()).collect();
    let cons = Item::new(&planted.kpi, &planted.level, ItemTag::KpiLevel).render();
    rules.iter().find(|r| {
        let k = r.key();
        k.antecedent == ante && k.consequent.len() == 1 && k.consequent.contains(&cons)
    })
}
