//! Extending mined rules with environment (PM) context.
//!
//! PM variables are ranked against a KPI by a dependence score on their
//! quantized levels. The selected features become `ENV_LEVEL` items and
//! each rule's antecedent is grown by up to `max_size` of them, level by
//! level, counting a candidate only when every sub-candidate was frequent.

use std::collections::{BTreeSet, HashSet};

use log::warn;
use num_traits::Float;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Role};
use crate::error::{Error, Result};
use crate::miner::{compare_rules, min_count, Rule, RuleCounts, RuleMetrics, RuleOrder};
use crate::quantize::QuantizationScheme;
use crate::transactions::{Item, ItemId, ItemTag, TidIndex, TransactionDb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureScore {
    /// Mutual information in nats.
    #[default]
    Mi,
    /// Pearson chi-square statistic of the contingency table.
    Chi2,
}

impl std::str::FromStr for FeatureScore {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mi" => Ok(Self::Mi),
            "chi2" => Ok(Self::Chi2),
            other => Err(Error::InvalidArgument(format!("unknown feature score `{other}` (expected mi or chi2)"))),
        }
    }
}

/// Contingency counts of two level series aligned on (cell, timestamp).
fn contingency(pairs: &[(usize, usize)]) -> (Vec<Vec<u64>>, Vec<u64>, Vec<u64>) {
    let nx = pairs.iter().map(|p| p.0 + 1).max().unwrap_or(0);
    let ny = pairs.iter().map(|p| p.1 + 1).max().unwrap_or(0);
    let mut joint = vec![vec![0u64; ny]; nx];
    let mut px = vec![0u64; nx];
    let mut py = vec![0u64; ny];
    for &(x, y) in pairs {
        joint[x][y] += 1;
        px[x] += 1;
        py[y] += 1;
    }
    (joint, px, py)
}

/// Plug-in mutual information (nats) of paired discrete observations.
pub fn mutual_information<F: Float>(pairs: &[(usize, usize)]) -> F {
    if pairs.is_empty() {
        return F::zero();
    }
    let (joint, px, py) = contingency(pairs);
    let n = F::from(pairs.len()).unwrap();
    let mut mi = F::zero();
    for (x, row) in joint.iter().enumerate() {
        for (y, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = F::from(c).unwrap();
            let expected = F::from(px[x]).unwrap() * F::from(py[y]).unwrap() / n;
            mi = mi + c / n * (c / expected).ln();
        }
    }
    mi.max(F::zero())
}

/// Pearson chi-square statistic over the observed levels.
pub fn chi_square<F: Float>(pairs: &[(usize, usize)]) -> F {
    if pairs.is_empty() {
        return F::zero();
    }
    let (joint, px, py) = contingency(pairs);
    let n = F::from(pairs.len()).unwrap();
    let mut chi = F::zero();
    for (x, row) in joint.iter().enumerate() {
        for (y, &c) in row.iter().enumerate() {
            if px[x] == 0 || py[y] == 0 {
                continue;
            }
            let expected = F::from(px[x]).unwrap() * F::from(py[y]).unwrap() / n;
            let d = F::from(c).unwrap() - expected;
            chi = chi + d * d / expected;
        }
    }
    chi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvFeatureRanking {
    pub target_kpi: String,
    pub score: FeatureScore,
    /// Every PM variable, by descending score then name.
    pub ranking: Vec<(String, f64)>,
    /// Number of leading entries selected.
    pub m: usize,
}

impl EnvFeatureRanking {
    pub fn selected(&self) -> impl Iterator<Item = &str> {
        self.ranking.iter().take(self.m).map(|(n, _)| n.as_str())
    }
}

/// Ranks the PM variables by dependence on `target_kpi` within `cells` and
/// selects the top `m`.
pub fn select_env_features(
    ds: &Dataset,
    cells: &[String],
    target_kpi: &str,
    m: usize,
    schemes: &QuantizationScheme,
    score: FeatureScore,
) -> Result<EnvFeatureRanking> {
    if m == 0 {
        return Err(Error::InvalidArgument("feature selection size must be at least 1".into()));
    }
    let pms: Vec<usize> =
        ds.schema.iter().enumerate().filter(|(_, v)| v.role == Role::Pm).map(|(j, _)| j).collect();
    if pms.is_empty() {
        return Err(Error::NoPmVariables);
    }
    let kpi = ds.index_of(target_kpi).ok_or_else(|| Error::VariableAbsent(target_kpi.to_string()))?;
    let kpi_map = schemes.get(target_kpi)?;

    let mut ranking = Vec::with_capacity(pms.len());
    for &j in &pms {
        let name = &ds.schema[j].name;
        let map = schemes.get(name)?;
        let mut pairs = Vec::new();
        for cell in cells {
            for r in ds.cell_records(cell) {
                if let (Some(p), Some(k)) = (&r.values[j], &r.values[kpi]) {
                    pairs.push((map.level_of(name, p)?, kpi_map.level_of(target_kpi, k)?));
                }
            }
        }
        let s: f64 = match score {
            FeatureScore::Mi => mutual_information(&pairs),
            FeatureScore::Chi2 => chi_square(&pairs),
        };
        ranking.push((name.clone(), s));
    }
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if m > ranking.len() {
        warn!("{m} environment features requested but only {} PM variables exist; using all", ranking.len());
    }
    let m = m.min(ranking.len());
    Ok(EnvFeatureRanking { target_kpi: target_kpi.to_string(), score, ranking, m })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedRule {
    pub base: Rule,
    /// Sorted `ENV_LEVEL` items added to the antecedent; empty for the base
    /// rule itself.
    pub environment: Vec<Item>,
    pub metrics: RuleMetrics<f64>,
}

impl ExtendedRule {
    pub fn unextended(base: Rule) -> Self {
        Self { metrics: base.metrics, base, environment: Vec::new() }
    }

    /// The extension as a plain rule with the environment folded into the
    /// antecedent.
    pub fn as_rule(&self) -> Rule {
        let mut antecedent: Vec<Item> = self.base.antecedent.iter().chain(&self.environment).cloned().collect();
        antecedent.sort();
        Rule {
            antecedent,
            consequent: self.base.consequent.clone(),
            metrics: self.metrics,
            cluster_id: self.base.cluster_id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendOptions {
    /// Largest number of environment items added to one rule.
    pub max_size: usize,
    /// An extension is kept only if its confidence exceeds the base
    /// confidence by more than this.
    pub confidence_margin: f64,
}

impl Default for ExtendOptions {
    fn default() -> Self {
        Self { max_size: 2, confidence_margin: 0.0 }
    }
}

/// Environment supersets of one rule that met the support threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidates {
    /// Sorted env item ids with the count of rule ∪ env.
    pub survivors: Vec<(Vec<ItemId>, u64)>,
    /// How many candidates were counted against the database.
    pub evaluated: usize,
}

fn ids_of(db: &TransactionDb, items: &[Item]) -> Result<Vec<ItemId>> {
    items
        .iter()
        .map(|it| db.dictionary.id(it).ok_or_else(|| Error::InvalidArgument(format!("item `{it}` is not in the database"))))
        .collect()
}

fn sorted_union(a: &[ItemId], b: &[ItemId]) -> Vec<ItemId> {
    let mut u: Vec<ItemId> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    u
}

/// Level-wise candidate generation for `rule_items` (antecedent ∪
/// consequent ids). `env` lists the candidate env items; two items of the
/// same variable never appear together.
pub fn extension_candidates(
    db: &TransactionDb,
    index: &TidIndex,
    rule_items: &[ItemId],
    env: &[ItemId],
    min_count: u64,
    max_size: usize,
) -> Candidates {
    let var = |i: ItemId| db.dictionary.item(i).variable.as_str();
    let count = |extra: &[ItemId]| index.count(&sorted_union(rule_items, extra), db.n_all());
    let mut env: Vec<ItemId> = env.to_vec();
    env.sort_unstable();
    env.dedup();

    let mut survivors = Vec::new();
    let mut evaluated = 0;
    let mut level: Vec<Vec<ItemId>> = Vec::new();
    for &e in &env {
        evaluated += 1;
        let c = count(&[e]);
        if c >= min_count {
            survivors.push((vec![e], c));
            level.push(vec![e]);
        }
    }
    for size in 2..=max_size {
        let frequent: HashSet<&[ItemId]> = level.iter().map(Vec::as_slice).collect();
        let mut next = Vec::new();
        for (i, a) in level.iter().enumerate() {
            for b in &level[i + 1..] {
                if a[..size - 2] != b[..size - 2] {
                    continue;
                }
                let (x, y) = (a[size - 2], b[size - 2]);
                if a[..size - 1].iter().any(|&p| var(p) == var(y)) {
                    continue;
                }
                let mut cand = a.clone();
                cand.push(y.max(x));
                cand[size - 2] = x.min(y);
                cand.sort_unstable();
                // Closure principle: every (size-1)-subset must be frequent.
                let all_frequent = (0..size).all(|skip| {
                    let sub: Vec<ItemId> =
                        cand.iter().enumerate().filter(|&(k, _)| k != skip).map(|(_, &v)| v).collect();
                    frequent.contains(sub.as_slice())
                });
                if !all_frequent {
                    continue;
                }
                evaluated += 1;
                let c = count(&cand);
                if c >= min_count {
                    survivors.push((cand.clone(), c));
                    next.push(cand);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        next.sort();
        level = next;
    }
    Candidates { survivors, evaluated }
}

/// Grows each rule with environment items from `env_db` and keeps the base
/// rules plus every extension that meets `min_support` and sharpens
/// confidence by more than the margin. Output lists each base rule followed
/// by its extensions in canonical order.
pub fn extend_rules(
    rules: &[Rule],
    env_db: &TransactionDb,
    min_support: f64,
    options: &ExtendOptions,
) -> Result<Vec<ExtendedRule>> {
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(Error::InvalidArgument(format!("min_support {min_support} outside (0, 1]")));
    }
    let env: Vec<ItemId> =
        env_db.dictionary.iter().filter(|(_, it)| it.tag == ItemTag::EnvLevel).map(|(id, _)| id).collect();
    if env.is_empty() || options.max_size == 0 || env_db.n_all() == 0 {
        return Ok(rules.iter().cloned().map(ExtendedRule::unextended).collect());
    }
    let env_vars: BTreeSet<&str> = env.iter().map(|&i| env_db.dictionary.item(i).variable.as_str()).collect();
    let index = TidIndex::new(env_db);
    let threshold = min_count(min_support, env_db.n_all());
    let n_all = env_db.n_all() as u64;

    let per_rule: Vec<Vec<ExtendedRule>> = rules
        .par_iter()
        .map(|rule| -> Result<Vec<ExtendedRule>> {
            for it in rule.antecedent.iter().chain(&rule.consequent) {
                if env_vars.contains(it.variable.as_str()) {
                    return Err(Error::EnvCollision(it.variable.clone()));
                }
            }
            let ante = ids_of(env_db, &rule.antecedent)?;
            let cons = ids_of(env_db, &rule.consequent)?;
            let all = sorted_union(&ante, &cons);
            let n_a = index.count(&cons, env_db.n_all());
            let found = extension_candidates(env_db, &index, &all, &env, threshold, options.max_size);

            let mut out = vec![ExtendedRule::unextended(rule.clone())];
            let mut ext = Vec::new();
            for (extra, n_ab) in found.survivors {
                let n_b = index.count(&sorted_union(&ante, &extra), env_db.n_all());
                let metrics = RuleCounts { n_ab, n_a, n_b, n_all }.metrics::<f64>()?;
                if metrics.confidence > rule.metrics.confidence + options.confidence_margin {
                    let mut environment: Vec<Item> = extra.iter().map(|&i| env_db.dictionary.item(i).clone()).collect();
                    environment.sort();
                    ext.push(ExtendedRule { base: rule.clone(), environment, metrics });
                }
            }
            let mut keyed: Vec<(Rule, ExtendedRule)> = ext.into_iter().map(|e| (e.as_rule(), e)).collect();
            keyed.sort_by(|a, b| compare_rules(&a.0, &b.0, RuleOrder::Support));
            out.extend(keyed.into_iter().map(|(_, e)| e));
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_rule.into_iter().flatten().collect())
}

/// Union of the top-`m` features over several target KPIs, in first-seen
/// order of the per-KPI rankings.
pub fn union_of_selections<'a>(rankings: impl IntoIterator<Item = &'a EnvFeatureRanking>) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for r in rankings {
        for name in r.selected() {
            if seen.insert(name.to_string()) {
                out.push(name.to_string());
            }
        }
    }
    out
}
