//! Frequent itemsets, rule metrics and multi-level aggregation.

pub mod aggregate;
pub mod fpgrowth;
pub mod metrics;
pub mod rules;

pub use aggregate::{aggregate_variable_pair, aggregate_variable_pair_checked, AggregateReport, VariablePairAggregate};
pub use fpgrowth::{min_count, mine_frequent, FrequentItemset};
pub use metrics::{rule_counts, rule_counts_indexed, rule_metrics, RuleCounts, RuleMetrics};
pub use rules::{compare_rules, generate_rules, sort_filter_rules, Rule, RuleFilter, RuleKey, RuleOrder};
