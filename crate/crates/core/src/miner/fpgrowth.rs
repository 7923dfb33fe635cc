//! FP-growth: one pass to count item frequencies, one pass to insert each
//! transaction (frequent items in descending-frequency order) into a prefix
//! tree, then recursive mining of conditional trees.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::transactions::{ItemId, TransactionDb};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FrequentItemset {
    /// Sorted item ids.
    pub items: Vec<ItemId>,
    /// Number of transactions containing every item.
    pub count: u64,
}

/// Smallest count meeting `min_support` over `n_all` transactions.
pub fn min_count(min_support: f64, n_all: usize) -> u64 {
    // Tolerate representation error in products like 0.05 * 10000.
    let raw = min_support * n_all as f64;
    ((raw - raw.abs() * 1e-12).ceil() as u64).max(1)
}

const NONE: u32 = u32::MAX;

/// Arena FP-tree in struct-of-arrays form. Children are kept as a singly
/// linked sibling list, so inserting a node never allocates per node.
struct FpTree {
    /// Rank in the tree's item order (0 = most frequent).
    rank: Vec<u32>,
    count: Vec<u64>,
    parent: Vec<u32>,
    first_child: Vec<u32>,
    next_sibling: Vec<u32>,
    first_root: u32,
    /// Node indices per rank.
    header: Vec<Vec<u32>>,
    /// Rank -> item id.
    items: Vec<ItemId>,
}

impl FpTree {
    fn new(items: Vec<ItemId>) -> Self {
        let header = vec![Vec::new(); items.len()];
        Self {
            rank: Vec::new(),
            count: Vec::new(),
            parent: Vec::new(),
            first_child: Vec::new(),
            next_sibling: Vec::new(),
            first_root: NONE,
            header,
            items,
        }
    }

    /// Inserts a path of ascending ranks with multiplicity `count`.
    fn insert(&mut self, ranks: &[u32], count: u64) {
        let mut parent = NONE;
        for &rank in ranks {
            let head = if parent == NONE { self.first_root } else { self.first_child[parent as usize] };
            let mut c = head;
            while c != NONE && self.rank[c as usize] != rank {
                c = self.next_sibling[c as usize];
            }
            if c == NONE {
                c = self.rank.len() as u32;
                self.rank.push(rank);
                self.count.push(0);
                self.parent.push(parent);
                self.first_child.push(NONE);
                self.next_sibling.push(head);
                if parent == NONE {
                    self.first_root = c;
                } else {
                    self.first_child[parent as usize] = c;
                }
                self.header[rank as usize].push(c);
            }
            self.count[c as usize] += count;
            parent = c;
        }
    }

    fn support(&self, rank: usize) -> u64 {
        self.header[rank].iter().map(|&n| self.count[n as usize]).sum()
    }

    /// Conditional tree of the prefix paths ending at `rank`.
    fn conditional(&self, rank: usize, min_count: u64, counts: &mut Vec<u64>) -> Option<FpTree> {
        counts.clear();
        counts.resize(rank, 0);
        for &n in &self.header[rank] {
            let c = self.count[n as usize];
            let mut p = self.parent[n as usize];
            while p != NONE {
                counts[self.rank[p as usize] as usize] += c;
                p = self.parent[p as usize];
            }
        }
        // Keep the parent order; it is a valid total order for the subtree.
        let mut remap = vec![NONE; rank];
        let mut items = Vec::new();
        for (r, &c) in counts.iter().enumerate() {
            if c >= min_count {
                remap[r] = items.len() as u32;
                items.push(self.items[r]);
            }
        }
        if items.is_empty() {
            return None;
        }
        let mut tree = FpTree::new(items);
        let mut path = Vec::new();
        for &n in &self.header[rank] {
            let c = self.count[n as usize];
            path.clear();
            let mut p = self.parent[n as usize];
            while p != NONE {
                let r = remap[self.rank[p as usize] as usize];
                if r != NONE {
                    path.push(r);
                }
                p = self.parent[p as usize];
            }
            path.reverse();
            if !path.is_empty() {
                tree.insert(&path, c);
            }
        }
        Some(tree)
    }
}

fn grow(tree: &FpTree, min_count: u64, suffix: &mut Vec<ItemId>, out: &mut Vec<FrequentItemset>, scratch: &mut Vec<u64>) {
    for rank in (0..tree.items.len()).rev() {
        let count = tree.support(rank);
        if count < min_count {
            continue;
        }
        suffix.push(tree.items[rank]);
        let mut items = suffix.clone();
        items.sort_unstable();
        out.push(FrequentItemset { items, count });
        if let Some(cond) = tree.conditional(rank, min_count, scratch) {
            grow(&cond, min_count, suffix, out, scratch);
        }
        suffix.pop();
    }
}

/// Every itemset contained in at least `ceil(min_support · N_all)`
/// transactions, sorted by size then lexicographically by item id.
pub fn mine_frequent(db: &TransactionDb, min_support: f64) -> Result<Vec<FrequentItemset>> {
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(Error::InvalidArgument(format!("min_support must be in (0, 1], got {min_support}")));
    }
    if db.n_all() == 0 {
        return Ok(Vec::new());
    }
    let threshold = min_count(min_support, db.n_all());

    let mut freq = vec![0u64; db.dictionary.len()];
    for t in &db.transactions {
        for &i in &t.items {
            freq[i as usize] += 1;
        }
    }
    let mut order: Vec<ItemId> = (0..freq.len() as ItemId).filter(|&i| freq[i as usize] >= threshold).collect();
    order.sort_by(|&a, &b| freq[b as usize].cmp(&freq[a as usize]).then(a.cmp(&b)));
    let mut rank_of = vec![NONE; freq.len()];
    for (r, &i) in order.iter().enumerate() {
        rank_of[i as usize] = r as u32;
    }

    let mut tree = FpTree::new(order);
    let mut path = Vec::new();
    for t in &db.transactions {
        path.clear();
        path.extend(t.items.iter().map(|&i| rank_of[i as usize]).filter(|&r| r != NONE));
        path.sort_unstable();
        if !path.is_empty() {
            tree.insert(&path, 1);
        }
    }

    let mut out = Vec::new();
    grow(&tree, threshold, &mut Vec::new(), &mut out, &mut Vec::new());
    out.sort_by(|a, b| a.items.len().cmp(&b.items.len()).then_with(|| a.items.cmp(&b.items)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transactions::{Item, ItemTag};

    fn it(name: &str) -> Item {
        let tag = if name.starts_with('a') { ItemTag::KpiLevel } else { ItemTag::CpLevel };
        Item::new(name, "x", tag)
    }

    fn db(rows: &[&[&str]]) -> TransactionDb {
        TransactionDb::from_items(rows.iter().map(|r| r.iter().map(|n| it(n)).collect::<Vec<_>>())).unwrap()
    }

    fn named(db: &TransactionDb, sets: &[FrequentItemset]) -> Vec<(Vec<String>, u64)> {
        let mut v: Vec<(Vec<String>, u64)> = sets
            .iter()
            .map(|s| {
                let mut names: Vec<String> = s.items.iter().map(|&i| db.dictionary.item(i).variable.clone()).collect();
                names.sort();
                (names, s.count)
            })
            .collect();
        v.sort();
        v
    }

    #[test]
    fn four_transaction_example() {
        // Exhaustive enumeration of the 15 subsets of {a1,a2,b1,b2}:
        // {b1}:3 {a1}:3 {b1,a1}:2 are the only ones with count >= 2.
        let d = db(&[&["b1", "a1"], &["b1", "a1"], &["b1", "a2"], &["b2", "a1"]]);
        let got = named(&d, &mine_frequent(&d, 0.5).unwrap());
        let want = vec![
            (vec!["a1".to_string()], 3),
            (vec!["a1".to_string(), "b1".to_string()], 2),
            (vec!["b1".to_string()], 3),
        ];
        assert_eq!(got, want);
    }

    #[test]
    fn full_support_without_universal_item() {
        let d = db(&[&["b1", "a1"], &["b2", "a1"], &["b1", "a2"]]);
        assert!(mine_frequent(&d, 1.0).unwrap().is_empty());
    }

    #[test]
    fn single_transaction() {
        let d = db(&[&["x"]]);
        let got = mine_frequent(&d, 0.1).unwrap();
        assert_eq!(got, vec![FrequentItemset { items: vec![0], count: 1 }]);
    }

    #[test]
    fn empty_db_and_bad_threshold() {
        assert!(mine_frequent(&TransactionDb::new(), 0.5).unwrap().is_empty());
        assert!(mine_frequent(&TransactionDb::new(), 0.0).is_err());
        assert!(mine_frequent(&TransactionDb::new(), 1.5).is_err());
    }

    #[test]
    fn threshold_rounding() {
        assert_eq!(min_count(0.05, 10_000), 500);
        assert_eq!(min_count(0.5, 4), 2);
        assert_eq!(min_count(0.5, 5), 3);
        assert_eq!(min_count(0.1, 1), 1);
        assert_eq!(min_count(0.07, 100), 7);
    }
}
