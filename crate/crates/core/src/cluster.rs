//! Grouping similar cells with average-linkage agglomerative clustering.

use std::collections::HashSet;

use log::warn;
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Kind, Role, Value};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFeatureVector<F> {
    pub cell_id: String,
    pub features: Vec<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureTable<F> {
    /// Column names, e.g. `height`, `users.mean`, `users.std`.
    pub names: Vec<String>,
    pub vectors: Vec<CellFeatureVector<F>>,
    /// Columns dropped for having zero variance across cells.
    pub excluded: Vec<String>,
}

/// Per-cell summaries: numeric ENG values as-is, numeric PM mean and
/// standard deviation; every column then standardized across cells.
pub fn cell_features<F: Float>(ds: &Dataset) -> Result<FeatureTable<F>> {
    let cells = ds.by_cell();
    let mut names = Vec::new();
    let mut columns: Vec<Vec<F>> = Vec::new();
    for (j, var) in ds.schema.iter().enumerate() {
        if var.kind != Kind::Numeric || !matches!(var.role, Role::Eng | Role::Pm) {
            continue;
        }
        let mut means = Vec::with_capacity(cells.len());
        let mut stds = Vec::with_capacity(cells.len());
        let mut missing = Vec::new();
        for (cell, recs) in &cells {
            let obs: Vec<F> = recs
                .iter()
                .filter_map(|r| r.values[j].as_ref().and_then(Value::as_num))
                .map(|v| F::from(v).unwrap())
                .collect();
            if obs.is_empty() {
                missing.push(cell.to_string());
                continue;
            }
            let (m, s) = mean_std(&obs);
            means.push(m);
            stds.push(s);
        }
        if !missing.is_empty() {
            return Err(Error::MissingFeature { feature: var.name.clone(), cells: missing });
        }
        if var.role == Role::Eng {
            names.push(var.name.clone());
            columns.push(means);
        } else {
            names.push(format!("{}.mean", var.name));
            columns.push(means);
            names.push(format!("{}.std", var.name));
            columns.push(stds);
        }
    }

    let mut kept_names = Vec::new();
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for (name, col) in names.into_iter().zip(columns) {
        let (m, s) = mean_std(&col);
        if s <= F::epsilon() * m.abs().max(F::one()) {
            warn!("feature `{name}` is constant across cells; excluded from clustering");
            excluded.push(name);
            continue;
        }
        kept.push(col.iter().map(|&v| (v - m) / s).collect::<Vec<F>>());
        kept_names.push(name);
    }
    let vectors = cells
        .iter()
        .enumerate()
        .map(|(i, (cell, _))| CellFeatureVector {
            cell_id: cell.to_string(),
            features: kept.iter().map(|col| col[i]).collect(),
        })
        .collect();
    Ok(FeatureTable { names: kept_names, vectors, excluded })
}

/// Mean and population standard deviation.
fn mean_std<F: Float>(xs: &[F]) -> (F, F) {
    if xs.is_empty() {
        return (F::zero(), F::zero());
    }
    let n = F::from(xs.len()).unwrap();
    let mean = xs.iter().fold(F::zero(), |a, &x| a + x) / n;
    let var = xs.iter().fold(F::zero(), |a, &x| a + (x - mean) * (x - mean)) / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cut<F> {
    /// Stop when this many clusters remain.
    Count(usize),
    /// Apply only merges at distance strictly below the threshold.
    Distance(F),
}

/// One dendrogram step. Clusters are named by their smallest cell id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge<F> {
    pub left: String,
    pub right: String,
    pub distance: F,
    /// Size of the merged cluster.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellClustering<F> {
    /// Sorted cell ids per cluster; clusters ordered by first cell id.
    pub clusters: Vec<Vec<String>>,
    /// The full dendrogram, independent of the cut.
    pub merges: Vec<Merge<F>>,
}

impl<F> CellClustering<F> {
    pub fn cluster_of(&self, cell: &str) -> Option<usize> {
        self.clusters.iter().position(|c| c.binary_search_by(|x| x.as_str().cmp(cell)).is_ok())
    }

    pub fn cluster(&self, id: usize) -> Result<&[String]> {
        self.clusters.get(id).map(Vec::as_slice).ok_or(Error::UnknownCluster(id))
    }

    /// A single cluster holding every given cell.
    pub fn single(mut cells: Vec<String>) -> Self {
        cells.sort();
        let clusters = if cells.is_empty() { Vec::new() } else { vec![cells] };
        Self { clusters, merges: Vec::new() }
    }
}

/// Average-linkage agglomerative clustering under Euclidean distance.
///
/// Cells are processed in lexicographic id order and distance ties go to
/// the pair with the smallest cluster names, so the result does not depend
/// on input order.
pub fn cluster_cells<F: Float>(
    features: &[CellFeatureVector<F>],
    linkage: Linkage,
    cut: Cut<F>,
) -> Result<CellClustering<F>> {
    let Linkage::Average = linkage;
    if features.is_empty() {
        return Err(Error::EmptyInput("clustering needs at least one cell"));
    }
    let mut sorted: Vec<&CellFeatureVector<F>> = features.iter().collect();
    sorted.sort_by(|a, b| a.cell_id.cmp(&b.cell_id));
    let mut seen = HashSet::new();
    for f in &sorted {
        if !seen.insert(f.cell_id.as_str()) {
            return Err(Error::InvalidArgument(format!("cell `{}` appears twice", f.cell_id)));
        }
        if f.features.len() != sorted[0].features.len() {
            return Err(Error::InvalidArgument("feature vectors differ in length".into()));
        }
    }
    let n = sorted.len();
    if let Cut::Count(c) = cut {
        if c > n {
            return Err(Error::CutTooLarge { requested: c, cells: n });
        }
        if c == 0 {
            return Err(Error::InvalidArgument("cut count must be at least 1".into()));
        }
    }

    let steps = dendrogram(&sorted);
    let applied = match cut {
        Cut::Count(c) => n - c,
        Cut::Distance(t) => steps.iter().take_while(|s| s.distance < t).count(),
    };

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for s in &steps[..applied] {
        let (a, b) = (find(&mut parent, s.a), find(&mut parent, s.b));
        parent[a.max(b)] = a.min(b);
    }
    let mut clusters: Vec<Vec<String>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for (i, cell) in sorted.iter().enumerate() {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = clusters.len();
            clusters.push(Vec::new());
        }
        clusters[slot[root]].push(cell.cell_id.clone());
    }

    let merges = steps
        .iter()
        .map(|s| Merge {
            left: sorted[s.a].cell_id.clone(),
            right: sorted[s.b].cell_id.clone(),
            distance: s.distance,
            size: s.size,
        })
        .collect();
    Ok(CellClustering { clusters, merges })
}

struct Step<F> {
    a: usize,
    b: usize,
    distance: F,
    size: usize,
}

fn euclidean<F: Float>(x: &[F], y: &[F]) -> F {
    x.iter().zip(y).fold(F::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b)).sqrt()
}

/// Full merge sequence. A cluster is identified by its smallest member
/// index, which is also the row it occupies in the distance matrix.
fn dendrogram<F: Float>(cells: &[&CellFeatureVector<F>]) -> Vec<Step<F>> {
    let n = cells.len();
    let mut dist = vec![F::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(&cells[i].features, &cells[j].features);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let better = |d: F, j: usize, best: Option<(F, usize)>| match best {
        None => true,
        Some((bd, bj)) => d < bd || (d == bd && j < bj),
    };
    let nearest = |i: usize, dist: &[F], active: &[bool]| -> Option<(F, usize)> {
        let mut best = None;
        for j in (0..n).filter(|&j| j != i && active[j]) {
            let d = dist[i * n + j];
            if better(d, j, best) {
                best = Some((d, j));
            }
        }
        best
    };
    let mut nn: Vec<Option<(F, usize)>> = (0..n).map(|i| nearest(i, &dist, &active)).collect();

    let mut steps = Vec::with_capacity(n.saturating_sub(1));
    let mut floor = F::neg_infinity();
    for _ in 1..n {
        let mut pick: Option<(F, usize, usize)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            if let Some((d, j)) = nn[i] {
                let (a, b) = (i.min(j), i.max(j));
                let take = match pick {
                    None => true,
                    Some((pd, pa, pb)) => d < pd || (d == pd && (a, b) < (pa, pb)),
                };
                if take {
                    pick = Some((d, a, b));
                }
            }
        }
        let (d, a, b) = pick.expect("at least two active clusters");
        // Average linkage is monotone; clamp away rounding dips.
        floor = floor.max(d);
        let (na, nb) = (F::from(size[a]).unwrap(), F::from(size[b]).unwrap());
        active[b] = false;
        for k in (0..n).filter(|&k| active[k] && k != a) {
            let merged = (na * dist[a * n + k] + nb * dist[b * n + k]) / (na + nb);
            dist[a * n + k] = merged;
            dist[k * n + a] = merged;
        }
        size[a] += size[b];
        steps.push(Step { a, b, distance: floor, size: size[a] });

        nn[b] = None;
        for k in (0..n).filter(|&k| active[k]) {
            match nn[k] {
                _ if k == a => nn[k] = nearest(k, &dist, &active),
                Some((_, j)) if j == a || j == b => nn[k] = nearest(k, &dist, &active),
                cached => {
                    let d = dist[k * n + a];
                    if better(d, a, cached) {
                        nn[k] = Some((d, a));
                    }
                }
            }
        }
    }
    steps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CellRecord, VariableDescriptor};

    fn fv(id: &str, xs: &[f64]) -> CellFeatureVector<f64> {
        CellFeatureVector { cell_id: id.into(), features: xs.to_vec() }
    }

    fn four() -> Vec<CellFeatureVector<f64>> {
        vec![fv("c1", &[0.0, 0.0]), fv("c2", &[0.0, 0.1]), fv("c3", &[10.0, 10.0]), fv("c4", &[10.0, 10.3])]
    }

    #[test]
    fn two_tight_pairs() {
        let c = cluster_cells(&four(), Linkage::Average, Cut::Count(2)).unwrap();
        assert_eq!(c.clusters, vec![vec!["c1", "c2"], vec!["c3", "c4"]]);
        assert_eq!(c.merges.len(), 3);
        assert!((c.merges[0].distance - 0.1).abs() < 1e-12);
        assert_eq!((c.merges[0].left.as_str(), c.merges[0].right.as_str()), ("c1", "c2"));
        // Final merge: mean of the four cross distances.
        let cross = [(0.0f64, 0.0f64), (0.0, 0.1)]
            .iter()
            .flat_map(|p| [(10.0, 10.0), (10.0, 10.3)].map(|q: (f64, f64)| ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()))
            .sum::<f64>()
            / 4.0;
        assert!((c.merges[2].distance - cross).abs() < 1e-12);
    }

    #[test]
    fn single_cell() {
        let c = cluster_cells(&[fv("only", &[1.0])], Linkage::Average, Cut::Count(1)).unwrap();
        assert_eq!(c.clusters, vec![vec!["only"]]);
        assert!(c.merges.is_empty());
    }

    #[test]
    fn zero_threshold_keeps_singletons() {
        let c = cluster_cells(&four(), Linkage::Average, Cut::Distance(0.0)).unwrap();
        assert_eq!(c.clusters.len(), 4);
    }

    #[test]
    fn cut_larger_than_cells() {
        assert!(matches!(
            cluster_cells(&four(), Linkage::Average, Cut::Count(5)),
            Err(Error::CutTooLarge { requested: 5, cells: 4 })
        ));
    }

    fn feature_ds(rows: &[(&str, f64, Option<f64>)]) -> Dataset {
        let schema = vec![
            VariableDescriptor::new("height", Role::Eng, Kind::Numeric),
            VariableDescriptor::new("users", Role::Pm, Kind::Numeric),
        ];
        let records = rows
            .iter()
            .enumerate()
            .map(|(i, (c, h, u))| CellRecord {
                cell_id: c.to_string(),
                timestamp: i as i64,
                values: vec![Some(Value::Num(*h)), u.map(Value::Num)],
            })
            .collect();
        Dataset::new(schema, records, 1).unwrap()
    }

    #[test]
    fn feature_dimensions_and_standardization() {
        let ds = feature_ds(&[("a", 10.0, Some(1.0)), ("a", 10.0, Some(3.0)), ("b", 30.0, Some(5.0)), ("b", 30.0, Some(9.0))]);
        let t = cell_features::<f64>(&ds).unwrap();
        assert_eq!(t.names, vec!["height", "users.mean", "users.std"]);
        assert_eq!(t.vectors.len(), 2);
        for col in 0..3 {
            let m = (t.vectors[0].features[col] + t.vectors[1].features[col]) / 2.0;
            assert!(m.abs() < 1e-12);
            assert!((t.vectors[0].features[col].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_cells_identical_vectors() {
        let ds = feature_ds(&[("a", 10.0, Some(1.0)), ("b", 10.0, Some(1.0)), ("c", 20.0, Some(4.0))]);
        let t = cell_features::<f64>(&ds).unwrap();
        assert_eq!(t.vectors[0].features, t.vectors[1].features);
        // users.std is zero for every single-sample cell.
        assert_eq!(t.excluded, vec!["users.std"]);
    }

    #[test]
    fn all_missing_pm_is_error() {
        let ds = feature_ds(&[("a", 10.0, Some(1.0)), ("b", 20.0, None)]);
        match cell_features::<f64>(&ds) {
            Err(Error::MissingFeature { cells, .. }) => assert_eq!(cells, vec!["b"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn generic_over_f32() {
        let f: Vec<CellFeatureVector<f32>> = four()
            .into_iter()
            .map(|v| CellFeatureVector { cell_id: v.cell_id, features: v.features.iter().map(|&x| x as f32).collect() })
            .collect();
        let c = cluster_cells(&f, Linkage::Average, Cut::Count(2)).unwrap();
        assert_eq!(c.clusters.len(), 2);
    }
}
