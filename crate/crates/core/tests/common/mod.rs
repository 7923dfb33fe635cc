//! Reference implementations shared by the integration tests. Everything
//! here counts by direct scanning over plain sets and shares no code with
//! the FP-tree or the bitset index.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use mlar::eval::{PlantedRule, SyntheticSpec};
use mlar::miner::RuleCounts;
use mlar::transactions::{Item, ItemId, ItemTag, TransactionDb};
use mlar::Exact;
use rand::seq::SliceRandom;
use rand::Rng;

/// Transactions over `n_items` anonymous CP items, each present with
/// probability `density`.
pub fn random_db<R: Rng>(rng: &mut R, n_items: usize, n_tx: usize, density: f64) -> TransactionDb {
    let mut db = TransactionDb::new();
    let ids: Vec<ItemId> = (0..n_items).map(|i| db.intern(Item::new(format!("i{i:02}"), "1", ItemTag::CpLevel))).collect();
    for t in 0..n_tx {
        let items: Vec<ItemId> = ids.iter().copied().filter(|_| rng.gen_bool(density)).collect();
        db.push(items, "c", t as i64).unwrap();
    }
    db
}

/// Level-exclusive transactions: each variable is observed with
/// probability `presence` and then shows one of its levels, drawn from a
/// skewed per-variable distribution.
pub fn random_leveled_db<R: Rng>(
    rng: &mut R,
    vars: &[(String, ItemTag, usize)],
    n_tx: usize,
    presence: f64,
) -> TransactionDb {
    let mut db = TransactionDb::new();
    let weights: Vec<Vec<f64>> = vars.iter().map(|(_, _, n)| (0..*n).map(|_| rng.gen_range(0.1..1.0)).collect()).collect();
    for t in 0..n_tx {
        let mut items = Vec::new();
        for ((name, tag, _), w) in vars.iter().zip(&weights) {
            if !rng.gen_bool(presence) {
                continue;
            }
            let total: f64 = w.iter().sum();
            let mut x = rng.gen_range(0.0..total);
            let mut level = w.len() - 1;
            for (l, wl) in w.iter().enumerate() {
                if x < *wl {
                    level = l;
                    break;
                }
                x -= wl;
            }
            items.push(db.intern(Item::new(name, format!("l{level}"), *tag)));
        }
        db.push(items, "c", t as i64).unwrap();
    }
    db
}

pub fn sets(db: &TransactionDb) -> Vec<BTreeSet<ItemId>> {
    db.transactions.iter().map(|t| t.items.iter().copied().collect()).collect()
}

pub fn direct_count(tx: &[BTreeSet<ItemId>], itemset: &[ItemId]) -> u64 {
    tx.iter().filter(|t| itemset.iter().all(|i| t.contains(i))).count() as u64
}

/// Every itemset whose count reaches `min_count`, by enumerating every
/// non-empty subset of the item universe against per-transaction bitmasks.
pub fn brute_force_frequent(db: &TransactionDb, min_count: u64) -> BTreeMap<Vec<ItemId>, u64> {
    let n = db.dictionary.len();
    assert!(n <= 20, "exhaustive enumeration needs a small universe");
    let masks: Vec<u32> = db.transactions.iter().map(|t| t.items.iter().fold(0, |m, &i| m | 1 << i)).collect();
    let mut out = BTreeMap::new();
    for set in 1u32..(1 << n) {
        let c = masks.iter().filter(|&&m| m & set == set).count() as u64;
        if c >= min_count {
            out.insert((0..n as u32).filter(|i| set & (1 << i) != 0).collect(), c);
        }
    }
    out
}

/// Every env subset of size `1..=max_size` (one item per env variable)
/// whose union with `rule_items` reaches `min_count`.
pub fn brute_force_extensions(
    db: &TransactionDb,
    rule_items: &[ItemId],
    env: &[ItemId],
    min_count: u64,
    max_size: usize,
) -> BTreeMap<Vec<ItemId>, u64> {
    let tx = sets(db);
    let mut out = BTreeMap::new();
    for mask in 1u32..(1 << env.len()) {
        let mut pick: Vec<ItemId> = (0..env.len()).filter(|i| mask & (1 << i) != 0).map(|i| env[i]).collect();
        if pick.len() > max_size {
            continue;
        }
        let vars: BTreeSet<&str> = pick.iter().map(|&i| db.dictionary.item(i).variable.as_str()).collect();
        if vars.len() != pick.len() {
            continue;
        }
        pick.sort_unstable();
        let all: Vec<ItemId> = rule_items.iter().chain(&pick).copied().collect();
        let c = direct_count(&tx, &all);
        if c >= min_count {
            out.insert(pick, c);
        }
    }
    out
}

/// `ceil(s · n)` computed in integers from a support given in percent.
pub fn min_count_percent(percent: u64, n: usize) -> u64 {
    ((percent * n as u64).div_ceil(100)).max(1)
}

/// A planted-rule spec in the regime used for recovery checks: every
/// pattern holds in at most a third of the slots, responses ≥ 0.9, so no
/// KPI level is frequent enough on its own to pass a 0.6 confidence bar.
pub fn recovery_spec<R: Rng>(rng: &mut R, seed: u64) -> SyntheticSpec {
    let n_cps = rng.gen_range(2..=3);
    let cps: Vec<(String, Vec<String>)> = (0..n_cps)
        .map(|c| {
            let n = rng.gen_range(4..=5);
            (format!("cp{c}"), (0..n).map(|v| (v * 2).to_string()).collect())
        })
        .collect();
    let kpis: Vec<(String, usize)> = (0..rng.gen_range(1..=2)).map(|k| (format!("kpi{k}"), 4)).collect();
    let labels = mlar::quantize::default_labels(4);
    let mut rules = Vec::new();
    for (k, _) in &kpis {
        // One single-CP rule per KPI on distinct CPs. An interior setting
        // keeps "setting went up/down" from predicting the pattern.
        let cp = &cps[rules.len() % cps.len()];
        let value = cp.1[rng.gen_range(1..cp.1.len() - 1)].clone();
        rules.push(PlantedRule {
            pattern: vec![(cp.0.clone(), value)],
            kpi: k.clone(),
            level: labels.choose(rng).unwrap().clone(),
            probability: rng.gen_range(0.9..=1.0),
        });
    }
    SyntheticSpec {
        seed,
        cells: 4,
        timestamps: 1000,
        interval: 900,
        groups: 1,
        cps,
        kpis,
        pms: vec![("load".to_string(), 3)],
        engs: Vec::new(),
        rules,
        noise: 0.8,
    }
}

/// Aggregate metrics and their level-sum forms for `cp ⇒ kpi`, counted by
/// scanning item labels. Returns `[support, confidence, lift]` twice, or
/// `None` when either variable never occurs.
pub fn identity_oracle(db: &TransactionDb, kpi: &str, cp: &str) -> Option<([Exact; 3], [Exact; 3])> {
    let level_of = |t: &[ItemId], var: &str, tag: ItemTag| {
        t.iter()
            .map(|&i| db.dictionary.item(i))
            .find(|it| it.variable == var && it.tag == tag)
            .map(|it| it.level.clone())
    };
    let mut n_a = 0i128;
    let mut n_b = 0i128;
    let mut n_ab = 0i128;
    let mut n_al: BTreeMap<String, i128> = BTreeMap::new();
    let mut n_bk: BTreeMap<String, i128> = BTreeMap::new();
    let mut pairs: BTreeMap<(String, String), i128> = BTreeMap::new();
    for t in &db.transactions {
        let a = level_of(&t.items, kpi, ItemTag::KpiLevel);
        let b = level_of(&t.items, cp, ItemTag::CpLevel);
        if let Some(l) = &a {
            n_a += 1;
            *n_al.entry(l.clone()).or_default() += 1;
        }
        if let Some(k) = &b {
            n_b += 1;
            *n_bk.entry(k.clone()).or_default() += 1;
        }
        if let (Some(l), Some(k)) = (a, b) {
            n_ab += 1;
            *pairs.entry((l, k)).or_default() += 1;
        }
    }
    if n_a == 0 || n_b == 0 {
        return None;
    }
    let n = db.n_all() as i128;
    let r = |p: i128, q: i128| Exact::new(p, q);
    let aggregate = [r(n_ab, n), r(n_ab, n_b), r(n_ab * n, n_a * n_b)];

    let zero = Exact::from_integer(0);
    let (mut s, mut c, mut l) = (zero, zero, zero);
    for (kl, &nk) in &n_bk {
        let mut inner = zero;
        for (ll, &nl) in &n_al {
            let nlk = pairs.get(&(ll.clone(), kl.clone())).copied().unwrap_or(0);
            s += r(nlk, n);
            inner += r(nlk, nk);
            l += r(nl * nk, n_a * n_b) * r(nlk * n, nl * nk);
        }
        c += r(nk, n_b) * inner;
    }
    Some((aggregate, [s, c, l]))
}

/// Checks the metric contracts on one count tuple. Counts must be
/// consistent (`n_ab <= min(n_a, n_b)`, `n_a + n_b - n_ab <= n_all`).
pub fn check_metric_contracts(c: RuleCounts) -> Result<(), String> {
    use mlar::error::Undefined;
    let metrics = c.metrics::<f64>();
    if c.n_b == 0 {
        return match c.confidence::<f64>() {
            Err(mlar::Error::UndefinedMetric(Undefined::Confidence)) => Ok(()),
            other => Err(format!("{c:?}: confidence should be undefined, got {other:?}")),
        };
    }
    if c.n_a == 0 {
        return match metrics {
            Err(mlar::Error::UndefinedMetric(Undefined::Lift)) => Ok(()),
            other => Err(format!("{c:?}: lift should be undefined, got {other:?}")),
        };
    }
    let m = metrics.map_err(|e| format!("{c:?}: {e}"))?;
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
    if m.support > m.confidence + 1e-15 {
        return Err(format!("{c:?}: support {} > confidence {}", m.support, m.confidence));
    }
    let via_lift = m.lift * c.n_a as f64 / c.n_all as f64;
    if !close(m.confidence, via_lift) {
        return Err(format!("{c:?}: confidence {} != lift·N_A/N_all {}", m.confidence, via_lift));
    }
    let rev = c.reversed().metrics::<f64>().map_err(|e| format!("{c:?} reversed: {e}"))?;
    if !close(m.lift, rev.lift) || m.support != rev.support {
        return Err(format!("{c:?}: lift {} vs reversed {}", m.lift, rev.lift));
    }
    let exact = c.metrics::<Exact>().map_err(|e| e.to_string())?;
    let expected = [
        Exact::new(c.n_ab as i128, c.n_all as i128),
        Exact::new(c.n_ab as i128, c.n_b as i128),
        Exact::new(c.n_ab as i128 * c.n_all as i128, c.n_a as i128 * c.n_b as i128),
    ];
    if [exact.support, exact.confidence, exact.lift] != expected {
        return Err(format!("{c:?}: exact metrics {exact:?} differ from {expected:?}"));
    }
    Ok(())
}

/// Internally consistent count tuples, including the zero-count corners.
pub fn consistent_counts() -> impl proptest::strategy::Strategy<Value = RuleCounts> {
    use proptest::prelude::*;
    (0u64..5000)
        .prop_flat_map(|n_all| (Just(n_all), 0..=n_all, 0..=n_all))
        .prop_flat_map(|(n_all, n_a, n_b)| {
            let lo = (n_a + n_b).saturating_sub(n_all);
            (Just(n_all), Just(n_a), Just(n_b), lo..=n_a.min(n_b))
        })
        .prop_map(|(n_all, n_a, n_b, n_ab)| RuleCounts { n_ab, n_a, n_b, n_all })
}

/// A level-exclusive database with one KPI and one CP of `levels` levels
/// each plus one unrelated CP.
pub fn identity_db<R: Rng>(rng: &mut R) -> TransactionDb {
    let vars = vec![
        ("kpi".to_string(), ItemTag::KpiLevel, rng.gen_range(2..=6)),
        ("cp".to_string(), ItemTag::CpLevel, rng.gen_range(2..=6)),
        ("other".to_string(), ItemTag::CpLevel, 3),
    ];
    let n_tx = rng.gen_range(10..=500);
    let presence = rng.gen_range(0.5..1.0);
    random_leveled_db(rng, &vars, n_tx, presence)
}
