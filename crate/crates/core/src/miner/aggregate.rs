//! Variable-level rules `B ⇒ A` (CP variable `B`, KPI variable `A`) and
//! their exact decomposition into level-pair rules `b^k ⇒ a^l`.
//!
//! Because a transaction holds at most one level of each variable, the
//! level events partition the variable event and
//!
//! * support(B⇒A)    = Σ_{l,k} support(b^k⇒a^l)
//! * confidence(B⇒A) = Σ_k (N_{b^k}/N_B) Σ_l confidence(b^k⇒a^l)
//! * lift(B⇒A)       = Σ_{l,k} (N_{a^l} N_{b^k})/(N_A N_B) · lift(b^k⇒a^l)
//!
//! The aggregate is computed from variable-level counts and the sums from
//! level-pair metrics; [`VariablePairAggregate::verify`] checks they agree.

use serde::Serialize;

use super::metrics::{RuleCounts, RuleMetrics};
use crate::error::{Error, Result, Undefined};
use crate::scalar::Scalar;
use crate::transactions::{ItemId, ItemTag, TransactionDb};

#[derive(Debug, Clone, PartialEq)]
pub struct VariablePairAggregate<T> {
    pub kpi: String,
    pub cp: String,
    /// `(label, N_{a^l})` in dictionary order.
    pub kpi_levels: Vec<(String, u64)>,
    /// `(label, N_{b^k})` in dictionary order.
    pub cp_levels: Vec<(String, u64)>,
    /// `pair_counts[l][k] = N_{a^l b^k}`.
    pub pair_counts: Vec<Vec<u64>>,
    pub aggregate: RuleMetrics<T>,
    pub support_sum: T,
    pub confidence_sum: T,
    pub lift_sum: T,
}

impl<T: Scalar> VariablePairAggregate<T> {
    /// Level-pair counts for `b^k ⇒ a^l`.
    pub fn pair(&self, l: usize, k: usize) -> RuleCounts {
        RuleCounts {
            n_ab: self.pair_counts[l][k],
            n_a: self.kpi_levels[l].1,
            n_b: self.cp_levels[k].1,
            n_all: self.aggregate.counts.n_all,
        }
    }

    /// Checks the three decomposition identities within
    /// [`Scalar::IDENTITY_TOLERANCE`] (exactly for rational scalars).
    pub fn verify(&self) -> Result<()> {
        let tol = T::IDENTITY_TOLERANCE;
        let checks = [
            ("support", self.aggregate.support, self.support_sum),
            ("confidence", self.aggregate.confidence, self.confidence_sum),
            ("lift", self.aggregate.lift, self.lift_sum),
        ];
        for (identity, aggregate, decomposed) in checks {
            if !aggregate.close_to(decomposed, tol) {
                return Err(Error::IdentityViolation {
                    identity,
                    aggregate: aggregate.to_f64(),
                    decomposed: decomposed.to_f64(),
                });
            }
        }
        Ok(())
    }

    pub fn report(&self) -> AggregateReport {
        let cells = (0..self.kpi_levels.len())
            .flat_map(|l| (0..self.cp_levels.len()).map(move |k| (l, k)))
            .map(|(l, k)| {
                let c = self.pair(l, k);
                PairCell {
                    kpi_level: self.kpi_levels[l].0.clone(),
                    cp_level: self.cp_levels[k].0.clone(),
                    support: c.support::<T>().to_f64(),
                    confidence: c.confidence::<T>().ok().map(Scalar::to_f64),
                    lift: c.lift::<T>().ok().map(Scalar::to_f64),
                    counts: c,
                }
            })
            .collect();
        AggregateReport {
            kpi: self.kpi.clone(),
            cp: self.cp.clone(),
            aggregate: self.aggregate.to_f64(),
            support_sum: self.support_sum.to_f64(),
            confidence_sum: self.confidence_sum.to_f64(),
            lift_sum: self.lift_sum.to_f64(),
            levels: cells,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairCell {
    pub kpi_level: String,
    pub cp_level: String,
    pub support: f64,
    pub confidence: Option<f64>,
    pub lift: Option<f64>,
    pub counts: RuleCounts,
}

/// JSON view of an aggregate with its per-level matrix.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateReport {
    pub kpi: String,
    pub cp: String,
    pub aggregate: RuleMetrics<f64>,
    pub support_sum: f64,
    pub confidence_sum: f64,
    pub lift_sum: f64,
    pub levels: Vec<PairCell>,
}

fn levels_of(db: &TransactionDb, var: &str, tag: ItemTag) -> Vec<ItemId> {
    db.dictionary.iter().filter(|(_, it)| it.tag == tag && it.variable == var).map(|(id, _)| id).collect()
}

/// Aggregate and decomposed metrics of `cp ⇒ kpi`. The identities are
/// verified in debug builds; see [`aggregate_variable_pair_checked`].
pub fn aggregate_variable_pair<T: Scalar>(db: &TransactionDb, kpi: &str, cp: &str) -> Result<VariablePairAggregate<T>> {
    aggregate_variable_pair_checked(db, kpi, cp, cfg!(debug_assertions))
}

pub fn aggregate_variable_pair_checked<T: Scalar>(
    db: &TransactionDb,
    kpi: &str,
    cp: &str,
    verify: bool,
) -> Result<VariablePairAggregate<T>> {
    let a_ids = levels_of(db, kpi, ItemTag::KpiLevel);
    let b_ids = levels_of(db, cp, ItemTag::CpLevel);
    if a_ids.is_empty() {
        return Err(Error::VariableAbsent(kpi.to_string()));
    }
    if b_ids.is_empty() {
        return Err(Error::VariableAbsent(cp.to_string()));
    }
    let hits = |ids: &[ItemId], items: &[ItemId]| -> Vec<usize> {
        items.iter().filter_map(|i| ids.iter().position(|x| x == i)).collect()
    };

    let mut n_al = vec![0u64; a_ids.len()];
    let mut n_bk = vec![0u64; b_ids.len()];
    let mut pairs = vec![vec![0u64; b_ids.len()]; a_ids.len()];
    let (mut n_a, mut n_b, mut n_ab) = (0u64, 0u64, 0u64);
    // Level counts are taken per level, variable counts per transaction, so
    // a transaction carrying two levels of one variable breaks the identities.
    for t in &db.transactions {
        let ls = hits(&a_ids, &t.items);
        let ks = hits(&b_ids, &t.items);
        for &l in &ls {
            n_al[l] += 1;
            for &k in &ks {
                pairs[l][k] += 1;
            }
        }
        for &k in &ks {
            n_bk[k] += 1;
        }
        n_a += u64::from(!ls.is_empty());
        n_b += u64::from(!ks.is_empty());
        n_ab += u64::from(!ls.is_empty() && !ks.is_empty());
    }
    let n_all = db.n_all() as u64;
    let aggregate = RuleCounts { n_ab, n_a, n_b, n_all }.metrics::<T>()?;

    let mut support_sum = T::zero();
    let mut confidence_sum = T::zero();
    let mut lift_sum = T::zero();
    let (na, nb) = (T::from_count(n_a), T::from_count(n_b));
    for (k, &nk) in n_bk.iter().enumerate() {
        let mut inner = T::zero();
        for (l, &nl) in n_al.iter().enumerate() {
            let c = RuleCounts { n_ab: pairs[l][k], n_a: nl, n_b: nk, n_all };
            support_sum = support_sum + c.support::<T>();
            if nk > 0 {
                inner = inner + c.confidence::<T>()?;
            }
            if nk > 0 && nl > 0 {
                let weight = T::from_count(nl) / na * T::from_count(nk) / nb;
                lift_sum = lift_sum + weight * c.lift::<T>()?;
            }
        }
        if nk > 0 {
            confidence_sum = confidence_sum + T::from_count(nk) / nb * inner;
        }
    }

    let out = VariablePairAggregate {
        kpi: kpi.to_string(),
        cp: cp.to_string(),
        kpi_levels: a_ids.iter().zip(&n_al).map(|(&i, &n)| (db.dictionary.item(i).level.clone(), n)).collect(),
        cp_levels: b_ids.iter().zip(&n_bk).map(|(&i, &n)| (db.dictionary.item(i).level.clone(), n)).collect(),
        pair_counts: pairs,
        aggregate,
        support_sum,
        confidence_sum,
        lift_sum,
    };
    if verify {
        out.verify()?;
    }
    Ok(out)
}

/// Error kind used when a variable has dictionary entries but occurs in no
/// transaction.
pub fn is_undefined_lift(e: &Error) -> bool {
    matches!(e, Error::UndefinedMetric(Undefined::Lift))
}
