//! Evaluation protocols: precision against labelled rules, robustness of
//! the rule ranking under injected KPI noise, and planted-rule synthetic
//! data with known ground truth.

mod synthetic;

pub use synthetic::{find_planted, generate_synthetic, label_against_truth, PlantedRule, Synthetic, SyntheticSpec};

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Kind, Role, Value};
use crate::error::{Error, Result};
use crate::miner::{Rule, RuleKey};
use crate::transactions::ARROW;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Incorrect,
}

impl FromStr for Verdict {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "correct" => Ok(Self::Correct),
            "incorrect" => Ok(Self::Incorrect),
            other => Err(Error::InvalidArgument(format!("verdict `{other}` (expected correct or incorrect)"))),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Correct => "correct",
            Self::Incorrect => "incorrect",
        })
    }
}

/// Expert verdicts keyed by rendered antecedent and consequent item sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelSet {
    pub labels: BTreeMap<RuleKey, Verdict>,
}

/// Items in rendered form; `tilt→2` and `tilt → 2` both read as `tilt →2`.
fn split_items(field: &str) -> Vec<String> {
    field
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s.split_once(ARROW) {
            Some((head, level)) => format!("{} {ARROW}{}", head.trim(), level.trim()),
            None => s.to_string(),
        })
        .collect()
}

impl LabelSet {
    /// Lines of `antecedent_items;consequent_items;verdict`, items
    /// comma-separated and rendered like `tilt →2`. Blank lines, `#`
    /// comments and an optional header line are skipped.
    pub fn parse(text: &str, file: &str) -> Result<Self> {
        let mut labels = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { file: file.to_string(), line: n + 1, msg };
            let fields: Vec<&str> = line.split(';').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 `;`-separated fields, found {}", fields.len())));
            }
            if labels.is_empty() && fields[2].trim() == "verdict" {
                continue;
            }
            let key = RuleKey::new(split_items(fields[0]), split_items(fields[1]));
            if key.antecedent.is_empty() || key.consequent.is_empty() {
                return Err(err("empty antecedent or consequent".into()));
            }
            let verdict: Verdict = fields[2].parse().map_err(|e: Error| err(e.to_string()))?;
            if labels.insert(key, verdict).is_some() {
                return Err(err("duplicate labelled rule".into()));
            }
        }
        Ok(Self { labels })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn render(&self) -> String {
        let mut out = String::from("antecedent_items;consequent_items;verdict\n");
        for (k, v) in &self.labels {
            let join = |s: &std::collections::BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(", ");
            out.push_str(&format!("{};{};{v}\n", join(&k.antecedent), join(&k.consequent)));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleVerdict {
    pub rule: String,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionReport {
    pub precision: f64,
    pub correct: usize,
    pub incorrect: usize,
    /// Mined rules absent from the label set, excluded from the ratio.
    pub unlabeled: usize,
    pub verdicts: Vec<RuleVerdict>,
}

/// Share of label-covered mined rules that are labelled correct.
pub fn precision_against_labels(rules: &[Rule], labels: &LabelSet) -> Result<PrecisionReport> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("label set is empty".into()));
    }
    let mut report = PrecisionReport { precision: 0.0, correct: 0, incorrect: 0, unlabeled: 0, verdicts: Vec::new() };
    for r in rules {
        let verdict = labels.labels.get(&r.key()).copied();
        match verdict {
            Some(Verdict::Correct) => report.correct += 1,
            Some(Verdict::Incorrect) => report.incorrect += 1,
            None => report.unlabeled += 1,
        }
        report.verdicts.push(RuleVerdict { rule: r.render(), verdict });
    }
    let covered = report.correct + report.incorrect;
    if covered == 0 {
        return Err(Error::PrecisionUndefined);
    }
    report.precision = report.correct as f64 / covered as f64;
    Ok(report)
}

/// Adds uniform noise on `[-amplitude·σ, +amplitude·σ]` to
/// `round(fraction·n)` randomly chosen observations of every numeric KPI,
/// σ being the variable's population standard deviation. Each KPI draws its
/// own sample without replacement; everything else is left untouched.
pub fn inject_noise(ds: &Dataset, fraction: f64, amplitude: f64, seed: u64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("noise fraction {fraction} outside [0, 1]")));
    }
    if !(amplitude >= 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise amplitude {amplitude} must be finite and >= 0")));
    }
    let mut out = ds.clone();
    if fraction == 0.0 || amplitude == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (j, var) in ds.schema.iter().enumerate() {
        if var.role != Role::Kpi {
            continue;
        }
        if var.kind != Kind::Numeric {
            return Err(Error::InvalidArgument(format!("KPI `{}` is not numeric", var.name)));
        }
        let observed: Vec<usize> = (0..out.records.len()).filter(|&i| out.records[i].values[j].is_some()).collect();
        let values: Vec<f64> = observed.iter().filter_map(|&i| out.records[i].values[j].as_ref()?.as_num()).collect();
        let n = values.len();
        let sigma = if n == 0 {
            0.0
        } else {
            let mean = values.iter().sum::<f64>() / n as f64;
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt()
        };
        if sigma == 0.0 {
            warn!("KPI `{}` has zero standard deviation; no noise added", var.name);
            continue;
        }
        let take = (fraction * n as f64).round() as usize;
        let mut chosen = sample(&mut rng, n, take).into_vec();
        chosen.sort_unstable();
        let half = amplitude * sigma;
        for k in chosen {
            let slot = &mut out.records[observed[k]].values[j];
            if let Some(Value::Num(v)) = slot {
                *v += rng.gen_range(-half..=half);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Containment {
    /// Smallest noisy prefix length holding every original top-k rule.
    Depth(usize),
    /// Some original top-k rule is missing from the noisy list.
    NotContained,
}

impl Containment {
    pub fn depth(self) -> Option<usize> {
        match self {
            Self::Depth(d) => Some(d),
            Self::NotContained => None,
        }
    }
}

/// Containment depth over rule keys; see [`containment_depth`].
pub fn containment_depth_keys(original: &[RuleKey], noisy: &[RuleKey], k: usize) -> Result<Containment> {
    if k > original.len() {
        return Err(Error::KOutOfRange { k, len: original.len() });
    }
    let mut first: BTreeMap<&RuleKey, usize> = BTreeMap::new();
    for (i, key) in noisy.iter().enumerate() {
        first.entry(key).or_insert(i);
    }
    let mut depth = 0;
    for key in &original[..k] {
        match first.get(key) {
            Some(&i) => depth = depth.max(i + 1),
            None => return Ok(Containment::NotContained),
        }
    }
    Ok(Containment::Depth(depth))
}

/// Smallest `k′` such that the top `k` original rules all appear among the
/// first `k′` noisy rules, matching on antecedent and consequent item sets.
pub fn containment_depth(original: &[Rule], noisy: &[Rule], k: usize) -> Result<Containment> {
    let keys = |rs: &[Rule]| rs.iter().map(Rule::key).collect::<Vec<_>>();
    containment_depth_keys(&keys(original), &keys(noisy), k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CellRecord, VariableDescriptor};
    use crate::miner::{RuleCounts, RuleMetrics};
    use crate::transactions::{Item, ItemTag};

    fn rule(cp: &str, level: &str) -> Rule {
        Rule {
            antecedent: vec![Item::new(cp, level, ItemTag::CpLevel)],
            consequent: vec![Item::new("rrc", "normal", ItemTag::KpiLevel)],
            metrics: RuleMetrics { support: 0.1, confidence: 0.9, lift: 1.1, counts: RuleCounts { n_ab: 1, n_a: 1, n_b: 1, n_all: 10 } },
            cluster_id: 0,
        }
    }

    fn rules(n: usize) -> Vec<Rule> {
        (0..n).map(|i| rule(&format!("cp{i:02}"), "1")).collect()
    }

    #[test]
    fn precision_22_of_25() {
        let mined = rules(25);
        let mut text = String::from("antecedent_items;consequent_items;verdict\n");
        for (i, r) in mined.iter().enumerate() {
            let v = if i < 22 { "correct" } else { "incorrect" };
            text.push_str(&format!("{};rrc →normal;{v}\n", r.antecedent[0]));
        }
        let labels = LabelSet::parse(&text, "labels.csv").unwrap();
        let report = precision_against_labels(&mined, &labels).unwrap();
        assert_eq!((report.correct, report.incorrect), (22, 3));
        assert!((report.precision - 0.88).abs() < 1e-15);
    }

    #[test]
    fn unlabeled_rules_excluded() {
        let mined = rules(3);
        let labels = LabelSet::parse("cp00 →1;rrc →normal;correct\n", "l").unwrap();
        let report = precision_against_labels(&mined, &labels).unwrap();
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.unlabeled, 2);
        let labels = LabelSet::parse("other →1;rrc →normal;correct\n", "l").unwrap();
        assert!(matches!(precision_against_labels(&mined, &labels), Err(Error::PrecisionUndefined)));
    }

    #[test]
    fn label_round_trip_and_duplicates() {
        let text = "a →1, b →2;rrc →low;incorrect\n";
        let labels = LabelSet::parse(text, "l").unwrap();
        assert_eq!(LabelSet::parse(&labels.render(), "l").unwrap(), labels);
        assert!(LabelSet::parse("a →1;k →x;correct\nb →1;k →x;correct\na →1;k →x;incorrect\n", "l").is_err());
    }

    #[test]
    fn label_items_accept_any_arrow_spacing() {
        let a = LabelSet::parse("tilt→2;rrc → low;correct\n", "l").unwrap();
        let b = LabelSet::parse("tilt →2;rrc →low;correct\n", "l").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn containment_identity_and_shift() {
        let orig = rules(20);
        assert_eq!(containment_depth(&orig, &orig, 10).unwrap(), Containment::Depth(10));
        // Move original rule 10 (1-based) to noisy position 13.
        let mut noisy = orig.clone();
        let r = noisy.remove(9);
        noisy.insert(12, r);
        assert_eq!(containment_depth(&orig, &noisy, 10).unwrap(), Containment::Depth(13));
        noisy.retain(|x| x.antecedent[0].variable != "cp03");
        assert_eq!(containment_depth(&orig, &noisy, 10).unwrap(), Containment::NotContained);
        assert!(matches!(containment_depth(&orig, &noisy, 21), Err(Error::KOutOfRange { k: 21, len: 20 })));
    }

    fn kpi_ds(values: &[f64]) -> Dataset {
        let schema = vec![
            VariableDescriptor::new("rrc", Role::Kpi, Kind::Numeric),
            VariableDescriptor::new("users", Role::Pm, Kind::Numeric),
        ];
        let records = values
            .iter()
            .enumerate()
            .map(|(i, &v)| CellRecord {
                cell_id: "c".into(),
                timestamp: i as i64,
                values: vec![Some(Value::Num(v)), Some(Value::Num(i as f64))],
            })
            .collect();
        Dataset::new(schema, records, 1).unwrap()
    }

    #[test]
    fn noise_identities() {
        let ds = kpi_ds(&(0..50).map(f64::from).collect::<Vec<_>>());
        assert_eq!(inject_noise(&ds, 0.0, 0.1, 1).unwrap(), ds);
        assert_eq!(inject_noise(&ds, 1.0, 0.0, 1).unwrap(), ds);
        let constant = kpi_ds(&[3.0; 10]);
        assert_eq!(inject_noise(&constant, 1.0, 0.5, 1).unwrap(), constant);
    }

    #[test]
    fn noise_count_bounds_and_reproducibility() {
        let values: Vec<f64> = (0..100).map(f64::from).collect();
        let ds = kpi_ds(&values);
        let sigma = (values.iter().map(|v| (v - 49.5) * (v - 49.5)).sum::<f64>() / 100.0).sqrt();
        let noisy = inject_noise(&ds, 0.2, 0.1, 42).unwrap();
        assert_eq!(noisy, inject_noise(&ds, 0.2, 0.1, 42).unwrap());
        assert_ne!(noisy, inject_noise(&ds, 0.2, 0.1, 43).unwrap());
        let mut changed = 0;
        for (a, b) in ds.records.iter().zip(&noisy.records) {
            let d = b.values[0].as_ref().unwrap().as_num().unwrap() - a.values[0].as_ref().unwrap().as_num().unwrap();
            if d != 0.0 {
                changed += 1;
                assert!(d.abs() <= 0.1 * sigma);
            }
            assert_eq!(a.values[1], b.values[1]);
        }
        assert_eq!(changed, 20);
    }
}
