//! CP/context ⇒ KPI rule generation, filtering and canonical ordering.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::fpgrowth::FrequentItemset;
use super::metrics::{RuleCounts, RuleMetrics};
use crate::error::Result;
use crate::transactions::{Item, ItemId, ItemTag, TransactionDb};

/// `antecedent ⇒ consequent` where the consequent holds KPI level items
/// only and the antecedent holds CP, CP-delta, lagged-KPI or environment
/// items.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    /// Sorted.
    pub antecedent: Vec<Item>,
    /// Sorted.
    pub consequent: Vec<Item>,
    pub metrics: RuleMetrics<f64>,
    pub cluster_id: usize,
}

/// Identity of a rule independent of metrics: rendered item sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RuleKey {
    pub antecedent: BTreeSet<String>,
    pub consequent: BTreeSet<String>,
}

impl RuleKey {
    pub fn new<I, J, S, T>(antecedent: I, consequent: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        Self {
            antecedent: antecedent.into_iter().map(Into::into).collect(),
            consequent: consequent.into_iter().map(Into::into).collect(),
        }
    }
}

impl Rule {
    pub fn key(&self) -> RuleKey {
        RuleKey::new(self.antecedent.iter().map(Item::render), self.consequent.iter().map(Item::render))
    }

    /// `a, b ⇒ c` with items in sorted rendered order.
    pub fn render(&self) -> String {
        let key = self.key();
        let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(", ");
        format!("{} ⇒ {}", join(&key.antecedent), join(&key.consequent))
    }
}

fn is_consequent_item(item: &Item) -> bool {
    item.tag == ItemTag::KpiLevel
}

/// Splits every frequent itemset holding both KPI-level and other items
/// into `others ⇒ KPI levels`, keeping rules that meet both thresholds.
pub fn generate_rules(
    itemsets: &[FrequentItemset],
    db: &TransactionDb,
    min_confidence: f64,
    min_lift: f64,
    cluster_id: usize,
) -> Result<Vec<Rule>> {
    let counts: HashMap<&[ItemId], u64> = itemsets.iter().map(|s| (s.items.as_slice(), s.count)).collect();
    let count_of = |set: &[ItemId]| counts.get(set).copied().unwrap_or_else(|| db.count(set));
    let mut rules = Vec::new();
    for set in itemsets {
        let (cons, ante): (Vec<ItemId>, Vec<ItemId>) =
            set.items.iter().partition(|&&i| is_consequent_item(db.dictionary.item(i)));
        if cons.is_empty() || ante.is_empty() {
            continue;
        }
        let c = RuleCounts { n_ab: set.count, n_a: count_of(&cons), n_b: count_of(&ante), n_all: db.n_all() as u64 };
        let metrics = c.metrics::<f64>()?;
        if metrics.confidence < min_confidence || metrics.lift < min_lift {
            continue;
        }
        let items = |ids: &[ItemId]| {
            let mut v: Vec<Item> = ids.iter().map(|&i| db.dictionary.item(i).clone()).collect();
            v.sort();
            v
        };
        rules.push(Rule { antecedent: items(&ante), consequent: items(&cons), metrics, cluster_id });
    }
    Ok(rules)
}

/// Primary sort key; the remaining metrics follow in the fixed order
/// support, confidence, lift, then the rendered rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleOrder {
    #[default]
    Support,
    Confidence,
    Lift,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RuleFilter {
    pub min_support: f64,
    pub min_confidence: f64,
    pub min_lift: f64,
}

pub fn compare_rules(a: &Rule, b: &Rule, order: RuleOrder) -> Ordering {
    let (ma, mb) = (&a.metrics, &b.metrics);
    let desc = |x: f64, y: f64| y.total_cmp(&x);
    let support = desc(ma.support, mb.support);
    let confidence = desc(ma.confidence, mb.confidence);
    let lift = desc(ma.lift, mb.lift);
    let metrics = match order {
        RuleOrder::Support => support.then(confidence).then(lift),
        RuleOrder::Confidence => confidence.then(support).then(lift),
        RuleOrder::Lift => lift.then(support).then(confidence),
    };
    metrics.then_with(|| a.render().cmp(&b.render()))
}

/// Drops rules below `filter` and sorts the rest (descending metrics,
/// ascending rendering on ties).
pub fn sort_filter_rules(rules: Vec<Rule>, order: RuleOrder, filter: &RuleFilter) -> Vec<Rule> {
    let mut kept: Vec<Rule> = rules
        .into_iter()
        .filter(|r| {
            r.metrics.support >= filter.min_support
                && r.metrics.confidence >= filter.min_confidence
                && r.metrics.lift >= filter.min_lift
        })
        .collect();
    kept.sort_by(|a, b| compare_rules(a, b, order));
    kept
}
