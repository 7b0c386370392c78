//! Flat `key = value` run configuration with layered resolution.

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::BenchmarkConfig;
use crate::train::{Method, TrainConfig};

/// Every experiment knob in one place. Component seeds are derived from
/// `seed` when the configuration is resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bench: BenchmarkConfig,
    pub method: Method,
    /// Overrides the per-method weight for the `train` command.
    pub lambda: Option<f64>,
    pub spurious_positive: Option<String>,
    pub spurious_negative: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            bench: BenchmarkConfig::default().seeded(BenchmarkConfig::default().seed),
            method: Method::Standard,
            lambda: None,
            spurious_positive: None,
            spurious_negative: None,
        }
    }
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.bench.seed
    }

    pub fn train_config(&self) -> TrainConfig {
        let mut cfg = self.bench.train_config(self.method);
        if let Some(l) = self.lambda {
            cfg.lambda = l;
        }
        cfg
    }

    /// Key/value pairs in canonical order; parsing the rendered text gives
    /// back the same configuration.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let b = &self.bench;
        let g = &b.generator;
        let opt = |v: &Option<String>| v.clone().unwrap_or_default();
        vec![
            ("seed", b.seed.to_string()),
            ("positive_count", g.positive_count.to_string()),
            ("negative_count", g.negative_count.to_string()),
            ("topic_count", g.topic_count.to_string()),
            ("topics", g.topics.to_string()),
            ("filler_count", g.filler_count.to_string()),
            ("min_len", g.min_len.to_string()),
            ("max_len", g.max_len.to_string()),
            ("min_genuine", g.min_genuine.to_string()),
            ("max_genuine", g.max_genuine.to_string()),
            ("min_topic", g.min_topic.to_string()),
            ("max_topic", g.max_topic.to_string()),
            ("label_noise", g.label_noise.to_string()),
            ("train_size", g.train_size.to_string()),
            ("test_size", g.test_size.to_string()),
            ("rho", b.rho.to_string()),
            ("spurious_positive", opt(&self.spurious_positive)),
            ("spurious_negative", opt(&self.spurious_negative)),
            ("center_scale", b.plant.scale.to_string()),
            ("noise", b.plant.noise.to_string()),
            ("min_angle", b.plant.min_angle_deg.to_string()),
            ("dim", b.model.dim.to_string()),
            ("max_positions", b.model.max_positions.to_string()),
            ("classes", b.model.classes.to_string()),
            ("prompt_count", b.model.prompt_count.to_string()),
            ("pooling", b.model.pooling.name().to_string()),
            ("method", self.method.name().to_string()),
            ("lambda", self.lambda.map(|l| l.to_string()).unwrap_or_default()),
            ("lambda_co", b.lambda_co.to_string()),
            ("lambda_cp", b.lambda_cp.to_string()),
            ("learning_rate", b.adam.learning_rate.to_string()),
            ("beta1", b.adam.beta1.to_string()),
            ("beta2", b.adam.beta2.to_string()),
            ("adam_eps", b.adam.eps.to_string()),
            ("epochs", b.epochs.to_string()),
            ("batch_size", b.batch_size.to_string()),
            ("score_k", b.score_k.to_string()),
            ("neighbor_k", b.neighbor_k.to_string()),
        ]
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let b = &mut self.bench;
        let g = &mut b.generator;
        match key {
            "seed" => b.seed = num(key, value)?,
            "positive_count" => g.positive_count = num(key, value)?,
            "negative_count" => g.negative_count = num(key, value)?,
            "topic_count" => g.topic_count = num(key, value)?,
            "topics" => g.topics = num(key, value)?,
            "filler_count" => g.filler_count = num(key, value)?,
            "min_len" => g.min_len = num(key, value)?,
            "max_len" => g.max_len = num(key, value)?,
            "min_genuine" => g.min_genuine = num(key, value)?,
            "max_genuine" => g.max_genuine = num(key, value)?,
            "min_topic" => g.min_topic = num(key, value)?,
            "max_topic" => g.max_topic = num(key, value)?,
            "label_noise" => g.label_noise = num(key, value)?,
            "train_size" => g.train_size = num(key, value)?,
            "test_size" => g.test_size = num(key, value)?,
            "rho" => b.rho = num(key, value)?,
            "spurious_positive" => self.spurious_positive = text(value),
            "spurious_negative" => self.spurious_negative = text(value),
            "center_scale" => b.plant.scale = num(key, value)?,
            "noise" => b.plant.noise = num(key, value)?,
            "min_angle" => b.plant.min_angle_deg = num(key, value)?,
            "dim" => b.model.dim = num(key, value)?,
            "max_positions" => b.model.max_positions = num(key, value)?,
            "classes" => b.model.classes = num(key, value)?,
            "prompt_count" => b.model.prompt_count = num(key, value)?,
            "pooling" => b.model.pooling = value.parse()?,
            "method" => self.method = value.parse()?,
            "lambda" => {
                self.lambda = match value {
                    "" => None,
                    v => Some(num(key, v)?),
                }
            }
            "lambda_co" => b.lambda_co = num(key, value)?,
            "lambda_cp" => b.lambda_cp = num(key, value)?,
            "learning_rate" => b.adam.learning_rate = num(key, value)?,
            "beta1" => b.adam.beta1 = num(key, value)?,
            "beta2" => b.adam.beta2 = num(key, value)?,
            "adam_eps" => b.adam.eps = num(key, value)?,
            "epochs" => b.epochs = num(key, value)?,
            "batch_size" => b.batch_size = num(key, value)?,
            "score_k" => b.score_k = num(key, value)?,
            "neighbor_k" => b.neighbor_k = num(key, value)?,
            _ => return Err(Error::UnknownKeys(vec![key.to_string()])),
        }
        Ok(())
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn text(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_string())
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: origin.to_string(),
            line: n + 1,
            message,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(err("empty key".into()));
        }
        if out.iter().any(|(seen, _)| seen == key) {
            return Err(err(format!("duplicate key `{key}`")));
        }
        out.push((key.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splits a `key=value` flag.
pub fn parse_override(flag: &str) -> Result<(String, String)> {
    let (k, v) = flag
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("expected key=value, found `{flag}`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Defaults, then the file, then the flag overrides. Every unknown key in the
/// file and the flags is reported at once.
pub fn parse_config(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut layers = Vec::new();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        layers.extend(parse_pairs(&text, &path.display().to_string())?);
    }
    layers.extend(overrides.iter().cloned());

    let known: BTreeSet<&str> = RunConfig::default().entries().into_iter().map(|(k, _)| k).collect();
    let unknown: Vec<String> = layers
        .iter()
        .filter(|(k, _)| !known.contains(k.as_str()))
        .map(|(k, _)| k.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownKeys(unknown));
    }

    let mut cfg = RunConfig::default();
    for (k, v) in &layers {
        cfg.set(k, v)?;
    }
    let seed = cfg.bench.seed;
    cfg.bench = cfg.bench.seeded(seed);
    cfg.bench.generator.validate()?;
    cfg.train_config().validate()?;
    if cfg.bench.plant.noise < 0.0 || !(cfg.bench.plant.min_angle_deg > 0.0 && cfg.bench.plant.min_angle_deg <= 90.0) {
        return Err(Error::Config("noise must be ≥ 0 and min_angle in (0, 90]".into()));
    }
    if !(0.0..=1.0).contains(&cfg.bench.rho) {
        return Err(Error::Config(format!("rho must lie in [0, 1], got {}", cfg.bench.rho)));
    }
    Ok(cfg)
}
