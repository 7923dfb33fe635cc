//! The staged pipeline: ingest → cluster → mine → extend → evaluate.
//!
//! Each stage reads its predecessors' artifacts from the output directory
//! and writes its own, so any stage can be inspected and re-run alone.
//! [`run_pipeline`] simply runs the stages in order.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cluster::{cell_features, cluster_cells, CellClustering, Linkage, Merge};
use crate::config::PipelineConfig;
use crate::dataset::{
    fill_gaps, filter_redundant, load_dataset, save_dataset, CompletionReport, Dataset, RedundancyReport, Role,
};
use crate::error::{Error, Result, Stage};
use crate::eval::{containment_depth, inject_noise, precision_against_labels, LabelSet, PrecisionReport};
use crate::miner::{
    aggregate_variable_pair_checked, generate_rules, mine_frequent, sort_filter_rules, AggregateReport, Rule, RuleCounts,
    RuleFilter,
};
use crate::quantize::{fit_schemes, QuantizationConfig, QuantizationScheme};
use crate::ruleplus::{extend_rules, select_env_features, union_of_selections, EnvFeatureRanking, ExtendOptions, ExtendedRule};
use crate::transactions::{attach_env_items, build_transactions, Item, TransactionDb, TransactionStats};

pub const DATASET: &str = "dataset.csv";
pub const SCHEMA: &str = "schema.txt";
pub const SCHEMES: &str = "schemes.json";
pub const INGEST_REPORT: &str = "ingest_report.json";
pub const CLUSTERING: &str = "clustering.json";
pub const RULES: &str = "rules.json";
pub const RULES_CSV: &str = "rules.csv";
pub const AGGREGATES: &str = "aggregates.json";
pub const TRANSACTIONS: &str = "transactions.json";
pub const TRANSACTION_DUMP: &str = "transactions.txt";
pub const ENV_FEATURES: &str = "env_features.json";
pub const EXTENDED_RULES: &str = "extended_rules.json";
pub const FINAL_RULES: &str = "final_rules.json";
pub const EVALUATION: &str = "evaluation.json";

pub fn cluster_dir(output: &Path, id: usize) -> PathBuf {
    output.join(format!("cluster_{id}"))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    if !path.is_file() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// JSON form of a rule; extended rules add `environment`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleRecord {
    pub antecedent: Vec<String>,
    pub consequent: Vec<String>,
    pub support: f64,
    pub confidence: f64,
    pub lift: f64,
    pub counts: RuleCounts,
    pub cluster_id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<Vec<String>>,
}

impl RuleRecord {
    pub fn from_rule(r: &Rule) -> Self {
        Self {
            antecedent: r.antecedent.iter().map(Item::render).collect(),
            consequent: r.consequent.iter().map(Item::render).collect(),
            support: r.metrics.support,
            confidence: r.metrics.confidence,
            lift: r.metrics.lift,
            counts: r.metrics.counts,
            cluster_id: r.cluster_id,
            environment: None,
        }
    }

    pub fn from_extended(e: &ExtendedRule) -> Self {
        let mut rec = Self::from_rule(&e.as_rule());
        rec.antecedent = e.base.antecedent.iter().map(Item::render).collect();
        rec.environment = Some(e.environment.iter().map(Item::render).collect());
        rec
    }

    /// Rebuilds the rule against `ds`'s schema. Metrics are recomputed from
    /// the stored counts so no precision is lost through the text form.
    pub fn to_rule(&self, ds: &Dataset) -> Result<Rule> {
        let role_of = |v: &str| ds.descriptor(v).map(|d| d.role);
        let items = |xs: &[String]| -> Result<Vec<Item>> {
            let mut v = xs.iter().map(|s| Item::parse(s, role_of)).collect::<Result<Vec<_>>>()?;
            v.sort();
            Ok(v)
        };
        let mut antecedent = items(&self.antecedent)?;
        if let Some(env) = &self.environment {
            antecedent.extend(items(env)?);
            antecedent.sort();
        }
        Ok(Rule {
            antecedent,
            consequent: items(&self.consequent)?,
            metrics: self.counts.metrics()?,
            cluster_id: self.cluster_id,
        })
    }
}

fn write_rules_csv(path: &Path, rules: &[Rule]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["antecedent", "consequent", "support", "confidence", "lift", "n_ab", "n_a", "n_b", "n_all", "cluster_id"])?;
    for r in rules {
        let join = |xs: &[Item]| xs.iter().map(Item::render).collect::<Vec<_>>().join(", ");
        let c = r.metrics.counts;
        w.write_record([
            join(&r.antecedent),
            join(&r.consequent),
            r.metrics.support.to_string(),
            r.metrics.confidence.to_string(),
            r.metrics.lift.to_string(),
            c.n_ab.to_string(),
            c.n_a.to_string(),
            c.n_b.to_string(),
            c.n_all.to_string(),
            r.cluster_id.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestReport {
    pub records_loaded: usize,
    pub records_kept: usize,
    pub sampling_interval: i64,
    pub redundancy: RedundancyReport,
    pub completion: CompletionReport,
    pub quantization_notes: Vec<String>,
}

/// Load, clean, complete and quantize the raw data.
pub fn ingest(cfg: &PipelineConfig) -> Result<IngestReport> {
    let run = || -> Result<IngestReport> {
        cfg.check_inputs()?;
        let raw = load_dataset(cfg.data.as_deref().unwrap(), cfg.schema.as_deref().unwrap())?;
        let (filtered, redundancy) = filter_redundant(&raw);
        let (ds, completion) = fill_gaps(&filtered, cfg.max_gap);
        let qcfg = match &cfg.quantization {
            Some(p) => QuantizationConfig::read(p)?,
            None => QuantizationConfig::default(),
        };
        let (schemes, notes) = fit_schemes(&ds, &qcfg)?;
        for n in &notes {
            info!("{n}");
        }
        create_dir(&cfg.output)?;
        save_dataset(&ds, &cfg.output.join(DATASET), &cfg.output.join(SCHEMA))?;
        write_json(&cfg.output.join(SCHEMES), &schemes)?;
        let report = IngestReport {
            records_loaded: raw.records.len(),
            records_kept: ds.records.len(),
            sampling_interval: ds.sampling_interval,
            redundancy,
            completion,
            quantization_notes: notes,
        };
        write_json(&cfg.output.join(INGEST_REPORT), &report)?;
        info!("ingest: {} records, {} variables", ds.records.len(), ds.schema.len());
        Ok(report)
    };
    run().map_err(|e| e.in_stage(Stage::Ingest))
}

fn load_ingested(output: &Path) -> Result<(Dataset, QuantizationScheme)> {
    for f in [DATASET, SCHEMA] {
        if !output.join(f).is_file() {
            return Err(Error::MissingArtifact(output.join(f)));
        }
    }
    let ds = load_dataset(&output.join(DATASET), &output.join(SCHEMA))?;
    let schemes = read_json(&output.join(SCHEMES))?;
    Ok((ds, schemes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterEntry {
    pub id: usize,
    pub cells: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub features: Vec<String>,
    pub excluded_features: Vec<String>,
    pub clusters: Vec<ClusterEntry>,
    pub merges: Vec<Merge<f64>>,
}

impl ClusteringReport {
    pub fn clustering(&self) -> CellClustering<f64> {
        CellClustering { clusters: self.clusters.iter().map(|c| c.cells.clone()).collect(), merges: self.merges.clone() }
    }
}

/// Group similar cells by their engineering and PM summaries.
pub fn cluster(cfg: &PipelineConfig) -> Result<ClusteringReport> {
    let run = || -> Result<ClusteringReport> {
        let (ds, _) = load_ingested(&cfg.output)?;
        let report = if ds.records.is_empty() {
            ClusteringReport { features: Vec::new(), excluded_features: Vec::new(), clusters: Vec::new(), merges: Vec::new() }
        } else {
            let table = cell_features::<f64>(&ds)?;
            let c = cluster_cells(&table.vectors, Linkage::Average, cfg.cut)?;
            ClusteringReport {
                features: table.names,
                excluded_features: table.excluded,
                clusters: c.clusters.into_iter().enumerate().map(|(id, cells)| ClusterEntry { id, cells }).collect(),
                merges: c.merges,
            }
        };
        write_json(&cfg.output.join(CLUSTERING), &report)?;
        info!("cluster: {} clusters", report.clusters.len());
        Ok(report)
    };
    run().map_err(|e| e.in_stage(Stage::Cluster))
}

fn load_clustering(output: &Path) -> Result<CellClustering<f64>> {
    Ok(read_json::<ClusteringReport>(&output.join(CLUSTERING))?.clustering())
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Stage-2 result for one cluster.
#[derive(Debug, Clone)]
pub struct MinedCluster {
    pub cluster_id: usize,
    pub db: TransactionDb,
    pub frequent_itemsets: usize,
    pub rules: Vec<Rule>,
}

/// Transactions, frequent itemsets and sorted rules for one cluster.
pub fn mine_cluster(
    ds: &Dataset,
    clustering: &CellClustering<f64>,
    cluster_id: usize,
    schemes: &QuantizationScheme,
    cfg: &PipelineConfig,
) -> Result<MinedCluster> {
    let db = build_transactions(ds, clustering, cluster_id, schemes, cfg.transactions)?;
    let sets = mine_frequent(&db, cfg.min_support)?;
    let rules = generate_rules(&sets, &db, cfg.min_confidence, cfg.min_lift, cluster_id)?;
    let filter = RuleFilter { min_support: cfg.min_support, min_confidence: cfg.min_confidence, min_lift: cfg.min_lift };
    let rules = sort_filter_rules(rules, cfg.order, &filter);
    Ok(MinedCluster { cluster_id, db, frequent_itemsets: sets.len(), rules })
}

#[derive(Debug, Clone, Serialize)]
struct TransactionReport<'a> {
    cluster_id: usize,
    cells: &'a [String],
    frequent_itemsets: usize,
    rules: usize,
    stats: TransactionStats,
}

/// Every KPI × CP pair present in the cluster's transactions.
fn aggregates(ds: &Dataset, db: &TransactionDb, verify: bool) -> Result<Vec<AggregateReport>> {
    let mut out = Vec::new();
    for kpi in ds.variables(Role::Kpi) {
        for cp in ds.variables(Role::Cp) {
            match aggregate_variable_pair_checked::<f64>(db, &kpi.name, &cp.name, verify) {
                Ok(a) => out.push(a.report()),
                Err(Error::VariableAbsent(_)) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Mine every cluster and write its rule, aggregate and transaction
/// reports. Clusters run in parallel; reports are written in cluster order.
pub fn mine(cfg: &PipelineConfig) -> Result<Vec<MinedCluster>> {
    let run = || -> Result<Vec<MinedCluster>> {
        let (ds, schemes) = load_ingested(&cfg.output)?;
        let clustering = load_clustering(&cfg.output)?;
        let verify = cfg.verify_identities || cfg!(debug_assertions);
        let results: Vec<(MinedCluster, Vec<AggregateReport>)> = with_pool(cfg.threads, || {
            (0..clustering.clusters.len())
                .into_par_iter()
                .map(|id| {
                    let mined = mine_cluster(&ds, &clustering, id, &schemes, cfg)?;
                    let agg = aggregates(&ds, &mined.db, verify)?;
                    Ok((mined, agg))
                })
                .collect::<Result<Vec<_>>>()
        })??;
        for (mined, agg) in &results {
            let dir = cluster_dir(&cfg.output, mined.cluster_id);
            create_dir(&dir)?;
            let records: Vec<RuleRecord> = mined.rules.iter().map(RuleRecord::from_rule).collect();
            write_json(&dir.join(RULES), &records)?;
            write_rules_csv(&dir.join(RULES_CSV), &mined.rules)?;
            write_json(&dir.join(AGGREGATES), agg)?;
            let report = TransactionReport {
                cluster_id: mined.cluster_id,
                cells: &clustering.clusters[mined.cluster_id],
                frequent_itemsets: mined.frequent_itemsets,
                rules: mined.rules.len(),
                stats: mined.db.stats(),
            };
            write_json(&dir.join(TRANSACTIONS), &report)?;
            if cfg.dump_transactions {
                let p = dir.join(TRANSACTION_DUMP);
                let f = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
                mined.db.write_dump(std::io::BufWriter::new(f)).map_err(|e| Error::io(&p, e))?;
            }
            info!("mine: cluster {} has {} rules", mined.cluster_id, mined.rules.len());
        }
        Ok(results.into_iter().map(|(m, _)| m).collect())
    };
    run().map_err(|e| e.in_stage(Stage::Mine))
}

fn load_rules(output: &Path, id: usize, ds: &Dataset, file: &str) -> Result<Vec<Rule>> {
    let records: Vec<RuleRecord> = read_json(&cluster_dir(output, id).join(file))?;
    records.iter().map(|r| r.to_rule(ds)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvSelection {
    pub cluster_id: usize,
    pub rankings: Vec<EnvFeatureRanking>,
    pub selected: Vec<String>,
}

/// Per-KPI rankings and the union of their selections for one cluster.
pub fn select_cluster_env(
    ds: &Dataset,
    cells: &[String],
    cluster_id: usize,
    schemes: &QuantizationScheme,
    cfg: &PipelineConfig,
) -> Result<EnvSelection> {
    let mut rankings = Vec::new();
    let has_pm = ds.variables(Role::Pm).next().is_some();
    if cfg.env_features > 0 && has_pm {
        for kpi in ds.variables(Role::Kpi) {
            if schemes.get(&kpi.name).is_err() {
                continue;
            }
            rankings.push(select_env_features(ds, cells, &kpi.name, cfg.env_features, schemes, cfg.feature_score)?);
        }
    } else if cfg.env_features > 0 {
        warn!("no PM variables; rules are not extended");
    }
    let selected = union_of_selections(&rankings);
    Ok(EnvSelection { cluster_id, rankings, selected })
}

/// Stage 3 for one cluster: env feature selection then rule extension.
pub fn extend_cluster(
    ds: &Dataset,
    clustering: &CellClustering<f64>,
    cluster_id: usize,
    schemes: &QuantizationScheme,
    rules: &[Rule],
    cfg: &PipelineConfig,
) -> Result<(EnvSelection, Vec<ExtendedRule>)> {
    let cells = clustering.cluster(cluster_id)?;
    let selection = select_cluster_env(ds, cells, cluster_id, schemes, cfg)?;
    let db = build_transactions(ds, clustering, cluster_id, schemes, cfg.transactions)?;
    let env_db = attach_env_items(&db, ds, schemes, &selection.selected)?;
    let options = ExtendOptions { max_size: cfg.max_extension, confidence_margin: cfg.confidence_margin };
    let extended = extend_rules(rules, &env_db, cfg.min_support, &options)?;
    Ok((selection, extended))
}

/// Extend every cluster's rules with environment context and write the
/// per-cluster and combined final rule sets.
pub fn extend(cfg: &PipelineConfig) -> Result<Vec<Vec<ExtendedRule>>> {
    let run = || -> Result<Vec<Vec<ExtendedRule>>> {
        let (ds, schemes) = load_ingested(&cfg.output)?;
        let clustering = load_clustering(&cfg.output)?;
        let rules: Vec<Vec<Rule>> =
            (0..clustering.clusters.len()).map(|id| load_rules(&cfg.output, id, &ds, RULES)).collect::<Result<_>>()?;
        let results = with_pool(cfg.threads, || {
            rules
                .par_iter()
                .enumerate()
                .map(|(id, rs)| extend_cluster(&ds, &clustering, id, &schemes, rs, cfg))
                .collect::<Result<Vec<_>>>()
        })??;
        let mut all = Vec::new();
        let mut out = Vec::new();
        for (selection, extended) in results {
            let dir = cluster_dir(&cfg.output, selection.cluster_id);
            write_json(&dir.join(ENV_FEATURES), &selection)?;
            let records: Vec<RuleRecord> = extended.iter().map(RuleRecord::from_extended).collect();
            write_json(&dir.join(EXTENDED_RULES), &records)?;
            all.extend(records);
            info!("extend: cluster {} has {} rules", selection.cluster_id, extended.len());
            out.push(extended);
        }
        write_json(&cfg.output.join(FINAL_RULES), &all)?;
        Ok(out)
    };
    run().map_err(|e| e.in_stage(Stage::Extend))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DepthEntry {
    pub k: usize,
    /// `None` when a top-k rule vanished or fewer than k rules exist.
    pub depth: Option<usize>,
    pub status: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterRobustness {
    pub cluster_id: usize,
    pub original_rules: usize,
    pub noisy_rules: usize,
    pub depths: Vec<DepthEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub noise_fraction: f64,
    pub noise_amplitude: f64,
    pub noise_seed: u64,
    pub robustness: Vec<ClusterRobustness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<PrecisionReport>,
}

/// Containment depths of the original rule ranking inside the ranking
/// mined from a noisy copy of the data, for each `k`.
pub fn robustness(
    ds: &Dataset,
    clustering: &CellClustering<f64>,
    schemes: &QuantizationScheme,
    original: &[Vec<Rule>],
    cfg: &PipelineConfig,
) -> Result<Vec<ClusterRobustness>> {
    let noisy = inject_noise(ds, cfg.noise_fraction, cfg.noise_amplitude, cfg.noise_seed)?;
    with_pool(cfg.threads, || {
        original
            .par_iter()
            .enumerate()
            .map(|(id, orig)| {
                let mined = mine_cluster(&noisy, clustering, id, schemes, cfg)?;
                let depths = cfg
                    .top_k
                    .iter()
                    .map(|&k| {
                        if k > orig.len() {
                            return Ok(DepthEntry { k, depth: None, status: "fewer_rules_than_k" });
                        }
                        let d = containment_depth(orig, &mined.rules, k)?.depth();
                        Ok(DepthEntry { k, depth: d, status: if d.is_some() { "contained" } else { "not_contained" } })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ClusterRobustness { cluster_id: id, original_rules: orig.len(), noisy_rules: mined.rules.len(), depths })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Noise robustness of the stage-2 rankings and, with a label file,
/// precision of the final rule set.
pub fn evaluate(cfg: &PipelineConfig) -> Result<EvaluationReport> {
    let run = || -> Result<EvaluationReport> {
        let (ds, schemes) = load_ingested(&cfg.output)?;
        let clustering = load_clustering(&cfg.output)?;
        let n = clustering.clusters.len();
        let original: Vec<Vec<Rule>> = (0..n).map(|id| load_rules(&cfg.output, id, &ds, RULES)).collect::<Result<_>>()?;
        let robustness = robustness(&ds, &clustering, &schemes, &original, cfg)?;
        let precision = match &cfg.labels {
            None => None,
            Some(p) => {
                let labels = LabelSet::read(p)?;
                let mut finals = Vec::new();
                for id in 0..n {
                    finals.extend(load_rules(&cfg.output, id, &ds, EXTENDED_RULES)?);
                }
                Some(precision_against_labels(&finals, &labels)?)
            }
        };
        let report = EvaluationReport {
            noise_fraction: cfg.noise_fraction,
            noise_amplitude: cfg.noise_amplitude,
            noise_seed: cfg.noise_seed,
            robustness,
            precision,
        };
        write_json(&cfg.output.join(EVALUATION), &report)?;
        Ok(report)
    };
    run().map_err(|e| e.in_stage(Stage::Evaluate))
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineSummary {
    pub clusters: usize,
    pub rules: Vec<usize>,
    pub extended_rules: Vec<usize>,
    pub evaluation: EvaluationReport,
}

/// Validates the config, then runs every stage in order.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary> {
    cfg.validate().map_err(|e| e.in_stage(Stage::Config))?;
    cfg.check_inputs().map_err(|e| e.in_stage(Stage::Config))?;
    ingest(cfg)?;
    let clustering = cluster(cfg)?;
    let mined = mine(cfg)?;
    let extended = extend(cfg)?;
    let evaluation = evaluate(cfg)?;
    Ok(PipelineSummary {
        clusters: clustering.clusters.len(),
        rules: mined.iter().map(|m| m.rules.len()).collect(),
        extended_rules: extended.iter().map(Vec::len).collect(),
        evaluation,
    })
}

/// Every distinct rendered rule across the final rule set.
pub fn final_rule_keys(output: &Path) -> Result<BTreeSet<(Vec<String>, Vec<String>)>> {
    let recs: Vec<RuleRecord> = read_json(&output.join(FINAL_RULES))?;
    Ok(recs
        .into_iter()
        .map(|r| {
            let mut ante = r.antecedent;
            ante.extend(r.environment.unwrap_or_default());
            ante.sort();
            (ante, r.consequent)
        })
        .collect())
}
