//! Support, confidence and lift of `B ⇒ A` (antecedent `B`, consequent `A`)
//! from raw transaction counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Undefined};
use crate::scalar::Scalar;
use crate::transactions::{ItemId, TidIndex, TransactionDb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RuleCounts {
    /// Transactions containing antecedent and consequent.
    pub n_ab: u64,
    /// Transactions containing the consequent.
    pub n_a: u64,
    /// Transactions containing the antecedent.
    pub n_b: u64,
    pub n_all: u64,
}

impl RuleCounts {
    /// `N_AB / N_all`; zero on an empty database.
    pub fn support<T: Scalar>(&self) -> T {
        if self.n_all == 0 {
            return T::zero();
        }
        T::from_count(self.n_ab) / T::from_count(self.n_all)
    }

    /// `N_AB / N_B`.
    pub fn confidence<T: Scalar>(&self) -> Result<T> {
        if self.n_b == 0 {
            return Err(Error::UndefinedMetric(Undefined::Confidence));
        }
        Ok(T::from_count(self.n_ab) / T::from_count(self.n_b))
    }

    /// `N_AB · N_all / (N_A · N_B)`.
    pub fn lift<T: Scalar>(&self) -> Result<T> {
        if self.n_a == 0 || self.n_b == 0 {
            return Err(Error::UndefinedMetric(Undefined::Lift));
        }
        // Divide step by step; the product of counts can overflow exact types.
        Ok(T::from_count(self.n_ab) / T::from_count(self.n_a) * T::from_count(self.n_all) / T::from_count(self.n_b))
    }

    /// Counts of the reversed rule `A ⇒ B`.
    pub fn reversed(&self) -> Self {
        Self { n_a: self.n_b, n_b: self.n_a, ..*self }
    }

    pub fn metrics<T: Scalar>(&self) -> Result<RuleMetrics<T>> {
        Ok(RuleMetrics {
            support: self.support(),
            confidence: self.confidence()?,
            lift: self.lift()?,
            counts: *self,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleMetrics<T> {
    pub support: T,
    pub confidence: T,
    pub lift: T,
    pub counts: RuleCounts,
}

impl<T: Scalar> RuleMetrics<T> {
    pub fn to_f64(&self) -> RuleMetrics<f64> {
        RuleMetrics {
            support: self.support.to_f64(),
            confidence: self.confidence.to_f64(),
            lift: self.lift.to_f64(),
            counts: self.counts,
        }
    }
}

fn check_sides(antecedent: &[ItemId], consequent: &[ItemId]) -> Result<()> {
    if antecedent.is_empty() || consequent.is_empty() {
        return Err(Error::InvalidArgument("antecedent and consequent must be non-empty".into()));
    }
    if antecedent.iter().any(|i| consequent.contains(i)) {
        return Err(Error::InvalidArgument("antecedent and consequent must be disjoint".into()));
    }
    Ok(())
}

fn union(a: &[ItemId], b: &[ItemId]) -> Vec<ItemId> {
    let mut u: Vec<ItemId> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    u
}

/// Counts for `antecedent ⇒ consequent` by scanning `db`.
pub fn rule_counts(db: &TransactionDb, antecedent: &[ItemId], consequent: &[ItemId]) -> Result<RuleCounts> {
    check_sides(antecedent, consequent)?;
    let (mut n_ab, mut n_a, mut n_b) = (0, 0, 0);
    for t in &db.transactions {
        let has_b = TransactionDb::contains(t, antecedent);
        let has_a = TransactionDb::contains(t, consequent);
        n_a += has_a as u64;
        n_b += has_b as u64;
        n_ab += (has_a && has_b) as u64;
    }
    Ok(RuleCounts { n_ab, n_a, n_b, n_all: db.n_all() as u64 })
}

/// Same as [`rule_counts`] through a prebuilt bitset index.
pub fn rule_counts_indexed(
    db: &TransactionDb,
    index: &TidIndex,
    antecedent: &[ItemId],
    consequent: &[ItemId],
) -> Result<RuleCounts> {
    check_sides(antecedent, consequent)?;
    let n_all = db.n_all();
    Ok(RuleCounts {
        n_ab: index.count(&union(antecedent, consequent), n_all),
        n_a: index.count(consequent, n_all),
        n_b: index.count(antecedent, n_all),
        n_all: n_all as u64,
    })
}

/// Support, confidence and lift of `antecedent ⇒ consequent` over `db`.
/// Undefined confidence or lift is reported as an error; use
/// [`rule_counts`] to inspect the partial metrics.
pub fn rule_metrics<T: Scalar>(db: &TransactionDb, antecedent: &[ItemId], consequent: &[ItemId]) -> Result<RuleMetrics<T>> {
    rule_counts(db, antecedent, consequent)?.metrics()
}
