//! Pipeline configuration: a `key = value` file whose keys double as CLI
//! flags. Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use crate::cluster::Cut;
use crate::error::{Error, Result};
use crate::kv;
use crate::miner::RuleOrder;
use crate::ruleplus::FeatureScore;
use crate::transactions::TransactionOptions;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub quantization: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub output: PathBuf,

    /// Longest gap (in samples) filled during completion.
    pub max_gap: usize,
    pub cut: Cut<f64>,

    pub min_support: f64,
    pub min_confidence: f64,
    pub min_lift: f64,
    pub order: RuleOrder,
    pub transactions: TransactionOptions,
    pub verify_identities: bool,
    pub dump_transactions: bool,

    /// Environment features selected per KPI; 0 disables extension.
    pub env_features: usize,
    pub max_extension: usize,
    pub confidence_margin: f64,
    pub feature_score: FeatureScore,

    pub noise_fraction: f64,
    pub noise_amplitude: f64,
    pub noise_seed: u64,
    pub top_k: Vec<usize>,

    /// Worker cap for per-cluster work; `None` uses every core.
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data: None,
            schema: None,
            quantization: None,
            labels: None,
            output: PathBuf::from("out"),
            max_gap: 2,
            cut: Cut::Count(1),
            min_support: 0.05,
            min_confidence: 0.6,
            min_lift: 1.0,
            order: RuleOrder::Support,
            transactions: TransactionOptions::default(),
            verify_identities: false,
            dump_transactions: false,
            env_features: 3,
            max_extension: 2,
            confidence_margin: 0.0,
            feature_score: FeatureScore::Mi,
            noise_fraction: 0.2,
            noise_amplitude: 0.1,
            noise_seed: 0,
            top_k: vec![10, 15, 20],
            threads: None,
        }
    }
}

/// Every recognised key, in documentation order.
pub const KEYS: &[&str] = &[
    "data",
    "schema",
    "quantization",
    "labels",
    "output",
    "max_gap",
    "cut_count",
    "cut_distance",
    "min_support",
    "min_confidence",
    "min_lift",
    "order",
    "include_lag",
    "include_delta",
    "verify_identities",
    "dump_transactions",
    "env_features",
    "max_extension",
    "confidence_margin",
    "feature_score",
    "noise_fraction",
    "noise_amplitude",
    "noise_seed",
    "top_k",
    "threads",
];

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}

impl PipelineConfig {
    /// Sets one key. Relative paths are joined onto `base`.
    pub fn apply(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let bad = || Error::Config(format!("bad value `{value}` for `{key}`"));
        fn num<T: std::str::FromStr>(v: &str, bad: impl Fn() -> Error) -> Result<T> {
            v.trim().parse().map_err(|_| bad())
        }
        let path = || base.join(value);
        match key {
            "data" => self.data = Some(path()),
            "schema" => self.schema = Some(path()),
            "quantization" => self.quantization = Some(path()),
            "labels" => self.labels = Some(path()),
            "output" => self.output = path(),
            "max_gap" => self.max_gap = num(value, bad)?,
            "cut_count" => self.cut = Cut::Count(num(value, bad)?),
            "cut_distance" => self.cut = Cut::Distance(num(value, bad)?),
            "min_support" => self.min_support = num(value, bad)?,
            "min_confidence" => self.min_confidence = num(value, bad)?,
            "min_lift" => self.min_lift = num(value, bad)?,
            "order" => {
                self.order = match value {
                    "support" => RuleOrder::Support,
                    "confidence" => RuleOrder::Confidence,
                    "lift" => RuleOrder::Lift,
                    _ => return Err(bad()),
                }
            }
            "include_lag" => self.transactions.include_lag = parse_bool(value).ok_or_else(bad)?,
            "include_delta" => self.transactions.include_delta = parse_bool(value).ok_or_else(bad)?,
            "verify_identities" => self.verify_identities = parse_bool(value).ok_or_else(bad)?,
            "dump_transactions" => self.dump_transactions = parse_bool(value).ok_or_else(bad)?,
            "env_features" => self.env_features = num(value, bad)?,
            "max_extension" => self.max_extension = num(value, bad)?,
            "confidence_margin" => self.confidence_margin = num(value, bad)?,
            "feature_score" => self.feature_score = value.parse().map_err(|_| bad())?,
            "noise_fraction" => self.noise_fraction = num(value, bad)?,
            "noise_amplitude" => self.noise_amplitude = num(value, bad)?,
            "noise_seed" => self.noise_seed = num(value, bad)?,
            "top_k" => {
                self.top_k = value.split(',').map(|k| num(k, bad)).collect::<Result<_>>()?;
            }
            "threads" => self.threads = Some(num(value, bad)?),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str, file: &str, base: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        let mut cut_keys = 0;
        for e in kv::parse(text, file)? {
            cut_keys += usize::from(e.key.starts_with("cut_"));
            cfg.apply(&e.key, &e.value, base)
                .map_err(|err| Error::Config(format!("{file}:{}: {}", e.line, strip_prefix(&err))))?;
        }
        if cut_keys > 1 {
            return Err(Error::Config(format!("{file}: give either cut_count or cut_distance, not both")));
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Range checks on every threshold.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.min_support > 0.0 && self.min_support <= 1.0) {
            return fail(format!("min_support {} outside (0, 1]", self.min_support));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return fail(format!("min_confidence {} outside [0, 1]", self.min_confidence));
        }
        if !(self.min_lift >= 0.0 && self.min_lift.is_finite()) {
            return fail(format!("min_lift {} must be finite and >= 0", self.min_lift));
        }
        match self.cut {
            Cut::Count(0) => return fail("cut_count must be at least 1".into()),
            Cut::Distance(d) if !(d >= 0.0 && d.is_finite()) => {
                return fail(format!("cut_distance {d} must be finite and >= 0"))
            }
            _ => {}
        }
        if !(self.confidence_margin >= 0.0 && self.confidence_margin < 1.0) {
            return fail(format!("confidence_margin {} outside [0, 1)", self.confidence_margin));
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return fail(format!("noise_fraction {} outside [0, 1]", self.noise_fraction));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return fail(format!("noise_amplitude {} must be finite and >= 0", self.noise_amplitude));
        }
        if self.top_k.is_empty() || self.top_k.contains(&0) {
            return fail("top_k needs at least one positive k".into());
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        Ok(())
    }

    /// Checks that every input file named by the config exists.
    pub fn check_inputs(&self) -> Result<()> {
        let required = [("data", &self.data), ("schema", &self.schema)];
        for (key, p) in required {
            match p {
                None => return Err(Error::Config(format!("`{key}` is not set"))),
                Some(p) if !p.is_file() => return Err(Error::Config(format!("{key} file {} not found", p.display()))),
                _ => {}
            }
        }
        for (key, p) in [("quantization", &self.quantization), ("labels", &self.labels)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(Error::Config(format!("{key} file {} not found", p.display())));
                }
            }
        }
        Ok(())
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(msg) => msg.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn parse_resolves_paths_and_values() {
        let text = "data = in/d.csv\nschema = /abs/s.txt\nmin_support = 0.1\ncut_distance = 1.5\ntop_k = 5, 10\n\
                    include_lag = no\nfeature_score = chi2\n";
        let cfg = PipelineConfig::parse(text, "p.cfg", Path::new("/work")).unwrap();
        assert_eq!(cfg.data.as_deref(), Some(Path::new("/work/in/d.csv")));
        assert_eq!(cfg.schema.as_deref(), Some(Path::new("/abs/s.txt")));
        assert_eq!(cfg.cut, Cut::Distance(1.5));
        assert_eq!(cfg.top_k, vec![5, 10]);
        assert!(!cfg.transactions.include_lag);
        assert_eq!(cfg.feature_score, FeatureScore::Chi2);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let cfg = PipelineConfig::parse("min_support = 1.5\n", "p", Path::new(".")).unwrap();
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.exit_code(), 1);
        for text in ["bogus = 1\n", "min_support = lots\n", "cut_count = 2\ncut_distance = 1\n"] {
            let err = PipelineConfig::parse(text, "p", Path::new(".")).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err:?}");
        }
    }

    #[test]
    fn every_key_is_accepted() {
        let mut cfg = PipelineConfig::default();
        for key in KEYS {
            let value = match *key {
                "order" => "lift",
                "feature_score" => "mi",
                "include_lag" | "include_delta" | "verify_identities" | "dump_transactions" => "true",
                "top_k" => "3",
                _ => "1",
            };
            cfg.apply(key, value, Path::new(".")).unwrap();
        }
    }
}
