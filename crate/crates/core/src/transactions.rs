//! Transaction database: one transaction per (cell, timestamp), holding the
//! level items observed there.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::cluster::CellClustering;
use crate::dataset::{CellRecord, Dataset, Role};
use crate::error::{Error, Result};
use crate::quantize::{Direction, QuantizationScheme};

pub type ItemId = u32;

pub const ARROW: char = '→';
const LAG_SUFFIX: &str = "[t-1]";
const DELTA_SUFFIX: &str = "[delta]";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ItemTag {
    CpLevel,
    CpDelta,
    KpiLevel,
    KpiLagLevel,
    EnvLevel,
}

/// A `(variable, level)` fact. Renders as `<variable> →<level>`; lag and
/// delta items carry a `[t-1]` / `[delta]` suffix on the variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Item {
    pub variable: String,
    pub level: String,
    pub tag: ItemTag,
}

impl Item {
    pub fn new(variable: impl Into<String>, level: impl Into<String>, tag: ItemTag) -> Self {
        Self { variable: variable.into(), level: level.into(), tag }
    }

    fn head(&self) -> String {
        match self.tag {
            ItemTag::KpiLagLevel => format!("{}{LAG_SUFFIX}", self.variable),
            ItemTag::CpDelta => format!("{}{DELTA_SUFFIX}", self.variable),
            _ => self.variable.clone(),
        }
    }

    pub fn render(&self) -> String {
        self.to_string()
    }

    /// Whitespace-free form used in transaction dumps.
    pub fn token(&self) -> String {
        format!("{}{ARROW}{}", self.head(), self.level)
    }

    /// Inverse of [`Item::render`] (also accepts [`Item::token`]); the role
    /// of a plain variable decides between CP, KPI and ENV level items.
    pub fn parse(text: &str, role_of: impl Fn(&str) -> Option<Role>) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidArgument(format!("item `{text}`: {msg}"));
        let (head, level) = text.split_once(ARROW).ok_or_else(|| bad("missing →"))?;
        let (head, level) = (head.trim(), level.trim());
        if head.is_empty() || level.is_empty() {
            return Err(bad("empty variable or level"));
        }
        if let Some(var) = head.strip_suffix(LAG_SUFFIX) {
            return Ok(Item::new(var, level, ItemTag::KpiLagLevel));
        }
        if let Some(var) = head.strip_suffix(DELTA_SUFFIX) {
            return Ok(Item::new(var, level, ItemTag::CpDelta));
        }
        let tag = match role_of(head) {
            Some(Role::Cp) => ItemTag::CpLevel,
            Some(Role::Kpi) => ItemTag::KpiLevel,
            Some(Role::Pm) => ItemTag::EnvLevel,
            Some(Role::Eng) | None => return Err(bad("unknown or non-minable variable")),
        };
        Ok(Item::new(head, level, tag))
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {ARROW}{}", self.head(), self.level)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ItemDictionary {
    items: Vec<Item>,
    index: HashMap<Item, ItemId>,
}

impl ItemDictionary {
    pub fn intern(&mut self, item: Item) -> ItemId {
        if let Some(&id) = self.index.get(&item) {
            return id;
        }
        let id = self.items.len() as ItemId;
        self.index.insert(item.clone(), id);
        self.items.push(item);
        id
    }

    pub fn id(&self, item: &Item) -> Option<ItemId> {
        self.index.get(item).copied()
    }

    pub fn item(&self, id: ItemId) -> &Item {
        &self.items[id as usize]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ItemId, &Item)> {
        self.items.iter().enumerate().map(|(i, it)| (i as ItemId, it))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transaction {
    /// Sorted, distinct.
    pub items: Vec<ItemId>,
    pub cell_id: String,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransactionDb {
    pub transactions: Vec<Transaction>,
    pub dictionary: ItemDictionary,
}

impl TransactionDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_all(&self) -> usize {
        self.transactions.len()
    }

    pub fn intern(&mut self, item: Item) -> ItemId {
        self.dictionary.intern(item)
    }

    /// Appends a transaction, enforcing at most one item per
    /// `(variable, tag)`.
    pub fn push(&mut self, mut items: Vec<ItemId>, cell_id: impl Into<String>, timestamp: i64) -> Result<()> {
        items.sort_unstable();
        items.dedup();
        check_exclusive(&self.dictionary, &items)?;
        self.transactions.push(Transaction { items, cell_id: cell_id.into(), timestamp });
        Ok(())
    }

    /// Convenience constructor from item lists.
    pub fn from_items<I>(transactions: I) -> Result<Self>
    where
        I: IntoIterator,
        I::Item: IntoIterator<Item = Item>,
    {
        let mut db = Self::new();
        for (i, t) in transactions.into_iter().enumerate() {
            let ids = t.into_iter().map(|it| db.intern(it)).collect();
            db.push(ids, "", i as i64)?;
        }
        Ok(db)
    }

    pub fn contains(t: &Transaction, itemset: &[ItemId]) -> bool {
        itemset.iter().all(|i| t.items.binary_search(i).is_ok())
    }

    /// Number of transactions containing every item of `itemset`, by scan.
    pub fn count(&self, itemset: &[ItemId]) -> u64 {
        self.transactions.iter().filter(|t| Self::contains(t, itemset)).count() as u64
    }

    pub fn render_itemset(&self, itemset: &[ItemId]) -> Vec<String> {
        itemset.iter().map(|&i| self.dictionary.item(i).render()).collect()
    }

    /// One line per transaction, space-separated item tokens.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for t in &self.transactions {
            let line: Vec<String> = t.items.iter().map(|&i| self.dictionary.item(i).token()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn stats(&self) -> TransactionStats {
        let mut counts = vec![0u64; self.dictionary.len()];
        for t in &self.transactions {
            for &i in &t.items {
                counts[i as usize] += 1;
            }
        }
        let mut items: Vec<ItemCount> = self
            .dictionary
            .iter()
            .map(|(id, it)| ItemCount { item: it.render(), tag: it.tag, count: counts[id as usize] })
            .collect();
        items.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.item.cmp(&b.item)));
        let total: usize = self.transactions.iter().map(|t| t.items.len()).sum();
        TransactionStats {
            n_all: self.n_all(),
            distinct_items: self.dictionary.len(),
            mean_items_per_transaction: if self.n_all() == 0 { 0.0 } else { total as f64 / self.n_all() as f64 },
            items,
        }
    }
}

fn check_exclusive(dict: &ItemDictionary, items: &[ItemId]) -> Result<()> {
    let mut seen: Vec<(&str, ItemTag)> = items.iter().map(|&i| dict.item(i)).map(|it| (it.variable.as_str(), it.tag)).collect();
    seen.sort_unstable();
    for w in seen.windows(2) {
        if w[0] == w[1] {
            return Err(Error::LevelConflict(w[0].0.to_string()));
        }
    }
    Ok(())
}

/// Parses a dump back into per-transaction token sets.
pub fn parse_dump(text: &str) -> Vec<BTreeSet<String>> {
    text.lines().map(|l| l.split_whitespace().map(str::to_string).collect()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ItemCount {
    pub item: String,
    pub tag: ItemTag,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransactionStats {
    pub n_all: usize,
    pub distinct_items: usize,
    pub mean_items_per_transaction: f64,
    pub items: Vec<ItemCount>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransactionOptions {
    /// Add the previous slot's KPI levels as `KPI_LAG_LEVEL` items.
    pub include_lag: bool,
    /// Add CP direction-of-change items.
    pub include_delta: bool,
}

impl Default for TransactionOptions {
    fn default() -> Self {
        Self { include_lag: true, include_delta: true }
    }
}

/// Builds the stage-2 database for one cluster. Environment variables are
/// not included; see [`attach_env_items`].
pub fn build_transactions(
    ds: &Dataset,
    clustering: &CellClustering<impl Sized>,
    cluster_id: usize,
    schemes: &QuantizationScheme,
    options: TransactionOptions,
) -> Result<TransactionDb> {
    let cells = clustering.cluster(cluster_id)?;
    let cps: Vec<usize> = vars_with_role(ds, Role::Cp);
    let kpis: Vec<usize> = vars_with_role(ds, Role::Kpi);
    let level = |var: usize, r: &CellRecord| -> Result<Option<usize>> {
        match &r.values[var] {
            None => Ok(None),
            Some(v) => {
                let name = &ds.schema[var].name;
                schemes.get(name)?.level_of(name, v).map(Some)
            }
        }
    };

    let mut db = TransactionDb::new();
    for cell in cells {
        let recs = ds.cell_records(cell);
        for (i, r) in recs.iter().enumerate() {
            let prev = (i > 0 && recs[i - 1].timestamp == r.timestamp - ds.sampling_interval).then(|| &recs[i - 1]);
            let mut ids = Vec::new();
            for &var in &cps {
                if let Some(l) = level(var, r)? {
                    let name = &ds.schema[var].name;
                    ids.push(db.intern(Item::new(name, schemes.get(name)?.label(l), ItemTag::CpLevel)));
                }
            }
            for &var in &kpis {
                if let Some(l) = level(var, r)? {
                    let name = &ds.schema[var].name;
                    ids.push(db.intern(Item::new(name, schemes.get(name)?.label(l), ItemTag::KpiLevel)));
                }
            }
            if ids.is_empty() {
                continue;
            }
            let Some(p) = prev else {
                db.push(ids, cell.as_str(), r.timestamp)?;
                continue;
            };
            if options.include_lag {
                for &var in &kpis {
                    if let Some(l) = level(var, p)? {
                        let name = &ds.schema[var].name;
                        ids.push(db.intern(Item::new(name, schemes.get(name)?.label(l), ItemTag::KpiLagLevel)));
                    }
                }
            }
            if options.include_delta {
                for &var in &cps {
                    let name = &ds.schema[var].name;
                    if !schemes.get(name)?.is_ordered() {
                        continue;
                    }
                    if let (Some(before), Some(now)) = (level(var, p)?, level(var, r)?) {
                        if let Some(d) = Direction::between(before, now) {
                            ids.push(db.intern(Item::new(name, d.as_str(), ItemTag::CpDelta)));
                        }
                    }
                }
            }
            db.push(ids, cell.as_str(), r.timestamp)?;
        }
    }
    Ok(db)
}

fn vars_with_role(ds: &Dataset, role: Role) -> Vec<usize> {
    ds.schema.iter().enumerate().filter(|(_, v)| v.role == role).map(|(j, _)| j).collect()
}

/// Copy of `db` whose transactions also carry `ENV_LEVEL` items for the
/// given PM variables. Existing item ids are preserved.
pub fn attach_env_items(
    db: &TransactionDb,
    ds: &Dataset,
    schemes: &QuantizationScheme,
    env_vars: &[String],
) -> Result<TransactionDb> {
    let vars: Vec<usize> = env_vars
        .iter()
        .map(|name| {
            let j = ds.index_of(name).ok_or_else(|| Error::VariableAbsent(name.clone()))?;
            if ds.schema[j].role != Role::Pm {
                return Err(Error::InvalidArgument(format!("`{name}` is not a PM variable")));
            }
            Ok(j)
        })
        .collect::<Result<_>>()?;
    let mut out = db.clone();
    for t in out.transactions.iter_mut() {
        let recs = ds.cell_records(&t.cell_id);
        let Ok(pos) = recs.binary_search_by_key(&t.timestamp, |r| r.timestamp) else {
            continue;
        };
        let r = &recs[pos];
        for &j in &vars {
            if let Some(v) = &r.values[j] {
                let name = &ds.schema[j].name;
                let map = schemes.get(name)?;
                let item = Item::new(name, map.label(map.level_of(name, v)?), ItemTag::EnvLevel);
                t.items.push(out.dictionary.intern(item));
            }
        }
        t.items.sort_unstable();
        t.items.dedup();
        check_exclusive(&out.dictionary, &t.items)?;
    }
    Ok(out)
}

/// Per-item transaction bitsets for fast intersection counting.
#[derive(Debug, Clone)]
pub struct TidIndex {
    words: usize,
    sets: Vec<Vec<u64>>,
}

impl TidIndex {
    pub fn new(db: &TransactionDb) -> Self {
        let words = db.n_all().div_ceil(64);
        let mut sets = vec![vec![0u64; words]; db.dictionary.len()];
        for (t, tr) in db.transactions.iter().enumerate() {
            for &i in &tr.items {
                sets[i as usize][t / 64] |= 1 << (t % 64);
            }
        }
        Self { words, sets }
    }

    /// Transactions containing all of `itemset` (all transactions when
    /// empty).
    pub fn count(&self, itemset: &[ItemId], n_all: usize) -> u64 {
        match itemset {
            [] => n_all as u64,
            [one] => self.sets[*one as usize].iter().map(|w| w.count_ones() as u64).sum(),
            [first, rest @ ..] => (0..self.words)
                .map(|w| {
                    let word = rest.iter().fold(self.sets[*first as usize][w], |acc, &i| acc & self.sets[i as usize][w]);
                    word.count_ones() as u64
                })
                .sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Kind, Value, VariableDescriptor};
    use crate::quantize::LevelMap;

    fn fixture() -> (Dataset, QuantizationScheme) {
        let schema = vec![
            VariableDescriptor::new("CELLSIMAP.SITRANSECR", Role::Cp, Kind::Numeric),
            VariableDescriptor::new("rrc_sr", Role::Kpi, Kind::Numeric),
            VariableDescriptor::new("users", Role::Pm, Kind::Numeric),
        ];
        let records = vec![
            CellRecord {
                cell_id: "c1".into(),
                timestamp: 0,
                values: vec![Some(Value::Num(2.0)), Some(Value::Num(99.5)), Some(Value::Num(3.0))],
            },
            CellRecord {
                cell_id: "c1".into(),
                timestamp: 60,
                values: vec![Some(Value::Num(4.0)), Some(Value::Num(80.0)), Some(Value::Num(30.0))],
            },
            CellRecord {
                cell_id: "c1".into(),
                timestamp: 120,
                values: vec![Some(Value::Num(4.0)), None, None],
            },
            CellRecord { cell_id: "c1".into(), timestamp: 180, values: vec![None, None, Some(Value::Num(1.0))] },
        ];
        let ds = Dataset::new(schema, records, 60).unwrap();
        let mut s = QuantizationScheme::default();
        s.insert("CELLSIMAP.SITRANSECR", LevelMap::settings(vec![2.0, 4.0]));
        let labels = ["very_low", "low", "fair", "normal"].map(String::from).to_vec();
        s.insert("rrc_sr", LevelMap::intervals("rrc_sr", vec![90.0, 95.0, 99.0], Some(labels)).unwrap());
        s.insert("users", LevelMap::intervals("users", vec![10.0], None).unwrap());
        (ds, s)
    }

    fn rendered(db: &TransactionDb, t: usize) -> BTreeSet<String> {
        db.render_itemset(&db.transactions[t].items).into_iter().collect()
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn lag_and_delta_items() {
        let (ds, s) = fixture();
        let c = CellClustering::<f64>::single(ds.cell_ids());
        let db = build_transactions(&ds, &c, 0, &s, TransactionOptions::default()).unwrap();
        assert_eq!(db.n_all(), 3);
        assert_eq!(rendered(&db, 0), set(&["CELLSIMAP.SITRANSECR →2", "rrc_sr →normal"]));
        assert_eq!(
            rendered(&db, 1),
            set(&[
                "CELLSIMAP.SITRANSECR →4",
                "rrc_sr →very_low",
                "rrc_sr[t-1] →normal",
                "CELLSIMAP.SITRANSECR[delta] →increase"
            ])
        );
        // KPI missing at t=120: CP items plus lag of the previous KPI.
        assert_eq!(rendered(&db, 2), set(&["CELLSIMAP.SITRANSECR →4", "rrc_sr[t-1] →very_low"]));
    }

    #[test]
    fn partial_record_without_extras() {
        let (ds, s) = fixture();
        let c = CellClustering::<f64>::single(ds.cell_ids());
        let opts = TransactionOptions { include_lag: false, include_delta: false };
        let db = build_transactions(&ds, &c, 0, &s, opts).unwrap();
        assert_eq!(rendered(&db, 2), set(&["CELLSIMAP.SITRANSECR →4"]));
    }

    #[test]
    fn empty_and_unknown_cluster() {
        let (ds, s) = fixture();
        let c = CellClustering::<f64> { clusters: vec![vec![]], merges: vec![] };
        let db = build_transactions(&ds, &c, 0, &s, TransactionOptions::default()).unwrap();
        assert_eq!(db.n_all(), 0);
        assert!(matches!(build_transactions(&ds, &c, 3, &s, TransactionOptions::default()), Err(Error::UnknownCluster(3))));
    }

    #[test]
    fn missing_scheme_is_error() {
        let (ds, mut s) = fixture();
        s.entries.remove("rrc_sr");
        let c = CellClustering::<f64>::single(ds.cell_ids());
        assert!(matches!(build_transactions(&ds, &c, 0, &s, TransactionOptions::default()), Err(Error::MissingScheme(_))));
    }

    #[test]
    fn env_items_preserve_ids() {
        let (ds, s) = fixture();
        let c = CellClustering::<f64>::single(ds.cell_ids());
        let db = build_transactions(&ds, &c, 0, &s, TransactionOptions::default()).unwrap();
        let env = attach_env_items(&db, &ds, &s, &["users".into()]).unwrap();
        assert_eq!(env.n_all(), db.n_all());
        for (id, item) in db.dictionary.iter() {
            assert_eq!(env.dictionary.id(item), Some(id));
        }
        assert!(rendered(&env, 0).contains("users →low"));
        assert!(rendered(&env, 1).contains("users →high"));
        assert!(attach_env_items(&db, &ds, &s, &["rrc_sr".into()]).is_err());
    }

    #[test]
    fn exclusivity_enforced() {
        let r = TransactionDb::from_items([vec![
            Item::new("k", "low", ItemTag::KpiLevel),
            Item::new("k", "high", ItemTag::KpiLevel),
        ]]);
        assert!(matches!(r, Err(Error::LevelConflict(_))));
        // Same variable under different tags is fine.
        TransactionDb::from_items([vec![Item::new("k", "low", ItemTag::KpiLevel), Item::new("k", "high", ItemTag::KpiLagLevel)]])
            .unwrap();
    }

    #[test]
    fn render_parse_and_dump() {
        let role = |v: &str| match v {
            "tilt" => Some(Role::Cp),
            "rrc" => Some(Role::Kpi),
            "users" => Some(Role::Pm),
            _ => None,
        };
        for it in [
            Item::new("tilt", "2", ItemTag::CpLevel),
            Item::new("tilt", "increase", ItemTag::CpDelta),
            Item::new("rrc", "low", ItemTag::KpiLevel),
            Item::new("rrc", "low", ItemTag::KpiLagLevel),
            Item::new("users", "high", ItemTag::EnvLevel),
        ] {
            assert_eq!(Item::parse(&it.render(), role).unwrap(), it);
            assert_eq!(Item::parse(&it.token(), role).unwrap(), it);
        }
        assert_eq!(Item::new("tilt", "2", ItemTag::CpLevel).render(), "tilt →2");

        let db = TransactionDb::from_items([
            vec![Item::new("tilt", "2", ItemTag::CpLevel), Item::new("rrc", "low", ItemTag::KpiLevel)],
            vec![Item::new("tilt", "4", ItemTag::CpLevel)],
        ])
        .unwrap();
        let mut buf = Vec::new();
        db.write_dump(&mut buf).unwrap();
        let parsed = parse_dump(std::str::from_utf8(&buf).unwrap());
        assert_eq!(parsed[0], set(&["tilt→2", "rrc→low"]));
        assert_eq!(parsed[1], set(&["tilt→4"]));
    }

    #[test]
    fn tid_index_counts_match_scan() {
        let (ds, s) = fixture();
        let c = CellClustering::<f64>::single(ds.cell_ids());
        let db = build_transactions(&ds, &c, 0, &s, TransactionOptions::default()).unwrap();
        let idx = TidIndex::new(&db);
        let ids: Vec<ItemId> = db.dictionary.iter().map(|(i, _)| i).collect();
        for a in &ids {
            assert_eq!(idx.count(&[*a], db.n_all()), db.count(&[*a]));
            for b in &ids {
                let mut pair = vec![*a, *b];
                pair.sort();
                pair.dedup();
                assert_eq!(idx.count(&pair, db.n_all()), db.count(&pair));
            }
        }
        assert_eq!(idx.count(&[], db.n_all()), 3);
    }
}
