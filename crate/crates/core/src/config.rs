//! Experiment configuration: a line-oriented `key = value` file.
//!
//! Keys are dotted (`channel.alpha = 4`), `#` starts a comment, and absent
//! keys keep their defaults. Unknown keys, malformed values and violated
//! invariants are reported with the offending key and line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::ChannelConfig;
use crate::data::{AttackKind, AttackSpec, PartitionSpec};
use crate::error::{FlccError, Result};
use crate::federate::FederationConfig;
use crate::learn::ModelArch;
use crate::mac::MacConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub lambda: f64,
    /// When nonzero, place exactly this many nodes instead of a Poisson count.
    pub node_count: usize,
    pub width: f64,
    pub height: f64,
    pub cell_radius: f64,
    pub num_channels: usize,
    pub untrusted_fraction: f64,
    pub tx_power: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            lambda: 0.001,
            node_count: 0,
            width: 150.0,
            height: 150.0,
            cell_radius: 50.0,
            num_channels: 7,
            untrusted_fraction: 0.2,
            tx_power: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    pub partition: PartitionSpec,
    /// Evaluate on the first `test_size` test items (0 = all).
    pub test_size: usize,
    /// Trust validation uses the first `validation_size` test items.
    pub validation_size: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        let dir = Path::new("data/mnist");
        DataConfig {
            train_images: dir.join("train-images-idx3-ubyte.gz"),
            train_labels: dir.join("train-labels-idx1-ubyte.gz"),
            test_images: dir.join("t10k-images-idx3-ubyte.gz"),
            test_labels: dir.join("t10k-labels-idx1-ubyte.gz"),
            partition: PartitionSpec::default(),
            test_size: 0,
            validation_size: 500,
        }
    }
}

/// The success-probability sweep of `net-analyze`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeConfig {
    pub t_db_min: f64,
    pub t_db_max: f64,
    pub t_db_step: f64,
    pub lambdas: Vec<f64>,
    pub distance: f64,
    pub trials: u64,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            t_db_min: -10.0,
            t_db_max: 30.0,
            t_db_step: 5.0,
            lambdas: vec![0.001, 0.01],
            distance: 1.0,
            trials: 100_000,
        }
    }
}

impl AnalyzeConfig {
    /// `t_db_min, t_db_min + step, ...` up to `t_db_max` inclusive.
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.t_db_max - self.t_db_min) / self.t_db_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.t_db_min + i as f64 * self.t_db_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub channel: ChannelConfig,
    /// Stored in dB so the file round-trips exactly.
    pub threshold_db: f64,
    pub mac: MacConfig,
    pub arch: ModelArch,
    pub federation: FederationConfig,
    pub data: DataConfig,
    /// `None` disables attacks even when untrusted nodes exist.
    pub attack: Option<AttackSpec>,
    pub analyze: AnalyzeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            geometry: GeometryConfig::default(),
            channel: ChannelConfig::default(),
            threshold_db: 0.0,
            mac: MacConfig::default(),
            arch: ModelArch::default_conv(),
            federation: FederationConfig::default(),
            data: DataConfig::default(),
            attack: Some(AttackSpec::default()),
            analyze: AnalyzeConfig::default(),
        }
    }
}

fn parse<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse::<T>()
        .map_err(|_| format!("cannot parse `{v}` as {}", std::any::type_name::<T>()))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').map(|s| parse::<f64>(s.trim())).collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let g = &mut self.geometry;
        let f = &mut self.federation;
        let d = &mut self.data;
        let a = &mut self.analyze;
        match key {
            "seed" => self.seed = parse(v)?,
            "geometry.lambda" => g.lambda = parse(v)?,
            "geometry.node_count" => g.node_count = parse(v)?,
            "geometry.width" => g.width = parse(v)?,
            "geometry.height" => g.height = parse(v)?,
            "geometry.cell_radius" => g.cell_radius = parse(v)?,
            "geometry.num_channels" => g.num_channels = parse(v)?,
            "geometry.untrusted_fraction" => g.untrusted_fraction = parse(v)?,
            "geometry.tx_power" => g.tx_power = parse(v)?,
            "channel.alpha" => self.channel.alpha = parse(v)?,
            "channel.noise_power" => self.channel.noise_power = parse(v)?,
            "channel.threshold_db" => self.threshold_db = parse(v)?,
            "channel.active_probability" => self.channel.active_probability = parse(v)?,
            "channel.d_min" => self.channel.d_min = parse(v)?,
            "mac.contention_window" => self.mac.contention_window = parse(v)?,
            "mac.max_retries" => self.mac.max_retries = parse(v)?,
            "mac.active_probability" => self.mac.active_probability = parse(v)?,
            "mac.mode" => self.mac.mode = v.parse()?,
            "learn.arch" => self.arch = v.parse().map_err(|e: FlccError| e.to_string())?,
            "learn.learning_rate" => f.sgd.learning_rate = parse(v)?,
            "learn.batch_size" => f.sgd.batch_size = parse(v)?,
            "fed.max_rounds" => f.max_rounds = parse(v)?,
            "fed.epsilon" => f.epsilon = parse(v)?,
            "fed.trust_learning_rate" => f.trust_learning_rate = parse(v)?,
            "fed.blacklist_threshold" => f.blacklist_threshold = parse(v)?,
            "fed.initial_trust" => f.initial_trust = parse(v)?,
            "fed.hierarchy" => f.hierarchy = v.parse().map_err(|e: FlccError| e.to_string())?,
            "fed.cloud_blend" => f.cloud_blend = parse(v)?,
            "data.train_images" => d.train_images = PathBuf::from(v),
            "data.train_labels" => d.train_labels = PathBuf::from(v),
            "data.test_images" => d.test_images = PathBuf::from(v),
            "data.test_labels" => d.test_labels = PathBuf::from(v),
            "data.min_samples" => d.partition.min_samples = parse(v)?,
            "data.max_samples" => d.partition.max_samples = parse(v)?,
            "data.overlap" => d.partition.overlap_allowed = parse_bool(v)?,
            "data.test_size" => d.test_size = parse(v)?,
            "data.validation_size" => d.validation_size = parse(v)?,
            "attack.kind" => {
                self.attack = match v {
                    "none" => None,
                    _ => Some(AttackSpec {
                        kind: v.parse::<AttackKind>().map_err(|e| e.to_string())?,
                        magnitude: self.attack.map_or(1.0, |a| a.magnitude),
                    }),
                }
            }
            "attack.magnitude" => {
                let m = parse(v)?;
                match &mut self.attack {
                    Some(a) => a.magnitude = m,
                    None => return Err("set attack.kind before attack.magnitude".into()),
                }
            }
            "analyze.t_db_min" => a.t_db_min = parse(v)?,
            "analyze.t_db_max" => a.t_db_max = parse(v)?,
            "analyze.t_db_step" => a.t_db_step = parse(v)?,
            "analyze.lambdas" => a.lambdas = parse_list(v)?,
            "analyze.distance" => a.distance = parse(v)?,
            "analyze.trials" => a.trials = parse(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let g = &self.geometry;
        let f = &self.federation;
        let d = &self.data;
        let a = &self.analyze;
        let path = |p: &Path| p.display().to_string();
        let mut out = vec![
            ("seed", self.seed.to_string()),
            ("geometry.lambda", g.lambda.to_string()),
            ("geometry.node_count", g.node_count.to_string()),
            ("geometry.width", g.width.to_string()),
            ("geometry.height", g.height.to_string()),
            ("geometry.cell_radius", g.cell_radius.to_string()),
            ("geometry.num_channels", g.num_channels.to_string()),
            ("geometry.untrusted_fraction", g.untrusted_fraction.to_string()),
            ("geometry.tx_power", g.tx_power.to_string()),
            ("channel.alpha", self.channel.alpha.to_string()),
            ("channel.noise_power", self.channel.noise_power.to_string()),
            ("channel.threshold_db", self.threshold_db.to_string()),
            ("channel.active_probability", self.channel.active_probability.to_string()),
            ("channel.d_min", self.channel.d_min.to_string()),
            ("mac.contention_window", self.mac.contention_window.to_string()),
            ("mac.max_retries", self.mac.max_retries.to_string()),
            ("mac.active_probability", self.mac.active_probability.to_string()),
            ("mac.mode", self.mac.mode.to_string()),
            ("learn.arch", self.arch.to_string()),
            ("learn.learning_rate", f.sgd.learning_rate.to_string()),
            ("learn.batch_size", f.sgd.batch_size.to_string()),
            ("fed.max_rounds", f.max_rounds.to_string()),
            ("fed.epsilon", f.epsilon.to_string()),
            ("fed.trust_learning_rate", f.trust_learning_rate.to_string()),
            ("fed.blacklist_threshold", f.blacklist_threshold.to_string()),
            ("fed.initial_trust", f.initial_trust.to_string()),
            ("fed.hierarchy", f.hierarchy.to_string()),
            ("fed.cloud_blend", f.cloud_blend.to_string()),
            ("data.train_images", path(&d.train_images)),
            ("data.train_labels", path(&d.train_labels)),
            ("data.test_images", path(&d.test_images)),
            ("data.test_labels", path(&d.test_labels)),
            ("data.min_samples", d.partition.min_samples.to_string()),
            ("data.max_samples", d.partition.max_samples.to_string()),
            ("data.overlap", d.partition.overlap_allowed.to_string()),
            ("data.test_size", d.test_size.to_string()),
            ("data.validation_size", d.validation_size.to_string()),
        ];
        match &self.attack {
            Some(atk) => {
                out.push(("attack.kind", atk.kind.to_string()));
                out.push(("attack.magnitude", atk.magnitude.to_string()));
            }
            None => out.push(("attack.kind", "none".into())),
        }
        out.extend([
            ("analyze.t_db_min", a.t_db_min.to_string()),
            ("analyze.t_db_max", a.t_db_max.to_string()),
            ("analyze.t_db_step", a.t_db_step.to_string()),
            ("analyze.lambdas", join(&a.lambdas)),
            ("analyze.distance", a.distance.to_string()),
            ("analyze.trials", a.trials.to_string()),
        ]);
        out
    }

    /// The resolved configuration in the same text format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Cross-checks every invariant; on failure returns the key to blame.
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        let g = &self.geometry;
        let check = |ok: bool, key: &'static str, why: &str| {
            if ok {
                Ok(())
            } else {
                Err((key, why.to_string()))
            }
        };
        check(g.lambda >= 0.0 && g.lambda.is_finite(), "geometry.lambda", "must be >= 0")?;
        check(g.width > 0.0 && g.width.is_finite(), "geometry.width", "must be > 0")?;
        check(g.height > 0.0 && g.height.is_finite(), "geometry.height", "must be > 0")?;
        check(g.cell_radius > 0.0 && g.cell_radius.is_finite(), "geometry.cell_radius", "must be > 0")?;
        check(g.num_channels >= 1, "geometry.num_channels", "must be >= 1")?;
        check((0.0..=1.0).contains(&g.untrusted_fraction), "geometry.untrusted_fraction", "must lie in [0, 1]")?;
        check(g.tx_power > 0.0 && g.tx_power.is_finite(), "geometry.tx_power", "must be > 0")?;
        check(self.threshold_db.is_finite(), "channel.threshold_db", "must be finite")?;
        self.channel.validate().map_err(|e| (channel_key(&e), e.to_string()))?;
        self.mac.validate().map_err(|e| (mac_key(&e), e.to_string()))?;
        self.arch.validate().map_err(|e| ("learn.arch", e.to_string()))?;
        self.federation.validate().map_err(|e| (fed_key(&e), e.to_string()))?;
        let p = &self.data.partition;
        check(p.min_samples >= 1, "data.min_samples", "must be >= 1")?;
        check(p.min_samples <= p.max_samples, "data.max_samples", "must be >= data.min_samples")?;
        check(self.data.validation_size >= 1, "data.validation_size", "must be >= 1")?;
        check(self.arch.classes() == 10, "learn.arch", "the digit data has 10 classes")?;
        if let Some(atk) = &self.attack {
            atk.validate().map_err(|e| ("attack.magnitude", e.to_string()))?;
        }
        let a = &self.analyze;
        check(a.t_db_min.is_finite(), "analyze.t_db_min", "must be finite")?;
        check(a.t_db_max >= a.t_db_min && a.t_db_max.is_finite(), "analyze.t_db_max", "must be >= analyze.t_db_min")?;
        check(a.t_db_step > 0.0 && a.t_db_step.is_finite(), "analyze.t_db_step", "must be > 0")?;
        check(
            (a.t_db_max - a.t_db_min) / a.t_db_step <= 1e4,
            "analyze.t_db_step",
            "grid too fine (more than 10000 points)",
        )?;
        check(!a.lambdas.is_empty(), "analyze.lambdas", "need at least one intensity")?;
        check(
            a.lambdas.iter().all(|l| *l >= 0.0 && l.is_finite()),
            "analyze.lambdas",
            "intensities must be >= 0",
        )?;
        check(a.distance > 0.0 && a.distance.is_finite(), "analyze.distance", "must be > 0")?;
        check(a.trials >= 1, "analyze.trials", "must be >= 1")?;
        Ok(())
    }

    /// Parses configuration text.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut lines: BTreeMap<&'static str, usize> = BTreeMap::new();
        let keys: Vec<&'static str> = cfg.entries().iter().map(|(k, _)| *k).collect();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |key: &str, reason: String| FlccError::Config {
                line,
                key: key.to_string(),
                reason,
            };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(content, "expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let known = keys
                .iter()
                .chain(["attack.magnitude"].iter())
                .find(|k| **k == key)
                .copied()
                .ok_or_else(|| err(key, "unknown key".into()))?;
            if lines.insert(known, line).is_some() {
                return Err(err(key, "duplicate key".into()));
            }
            cfg.set(key, value).map_err(|r| err(key, r))?;
        }
        cfg.channel.sinr_threshold = crate::channel::db_to_linear(cfg.threshold_db);
        cfg.validate().map_err(|(key, reason)| FlccError::Config {
            line: lines.get(key).copied().unwrap_or(0),
            key: key.to_string(),
            reason,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| FlccError::io(path, e))?;
        Self::parse_text(&text)
    }
}

fn channel_key(e: &FlccError) -> &'static str {
    match e {
        FlccError::InvalidParameter { name: "alpha", .. } => "channel.alpha",
        FlccError::InvalidParameter { name: "noise_power", .. } => "channel.noise_power",
        FlccError::InvalidParameter { name: "active_probability", .. } => "channel.active_probability",
        FlccError::InvalidParameter { name: "d_min", .. } => "channel.d_min",
        _ => "channel.threshold_db",
    }
}

fn mac_key(e: &FlccError) -> &'static str {
    match e {
        FlccError::InvalidParameter { name: "contention_window", .. } => "mac.contention_window",
        FlccError::InvalidParameter { name: "max_retries", .. } => "mac.max_retries",
        _ => "mac.active_probability",
    }
}

fn fed_key(e: &FlccError) -> &'static str {
    match e {
        FlccError::InvalidParameter { name, .. } => match *name {
            "epsilon" => "fed.epsilon",
            "trust_learning_rate" => "fed.trust_learning_rate",
            "blacklist_threshold" => "fed.blacklist_threshold",
            "initial_trust" => "fed.initial_trust",
            "cloud_blend" => "fed.cloud_blend",
            "learning_rate" => "learn.learning_rate",
            _ => "learn.batch_size",
        },
        _ => "fed.max_rounds",
    }
}
