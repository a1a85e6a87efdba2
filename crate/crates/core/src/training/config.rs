use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{KaneError, Result};
use crate::model::ModelConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Hinge loss over relation and attribute triples.
    Completion,
    /// Cross-entropy over labeled entities.
    Classification,
}

impl FromStr for Task {
    type Err = KaneError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "completion" => Ok(Task::Completion),
            "classification" => Ok(Task::Classification),
            other => Err(KaneError::Config(format!(
                "unknown task {other:?} (expected completion or classification)"
            ))),
        }
    }
}

impl Task {
    /// Summed hinge gradients are large, so completion needs a small step;
    /// the mean cross-entropy gives one small step per epoch and needs a big one.
    pub fn default_learning_rate(self) -> f64 {
        match self {
            Task::Completion => 0.001,
            Task::Classification => 0.1,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Completion => "completion",
            Task::Classification => "classification",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    /// Hinge margin γ.
    pub margin: f64,
    /// `None` picks [`Task::default_learning_rate`].
    pub learning_rate: Option<f64>,
    pub batch_size: usize,
    /// Corruptions per positive.
    pub negatives: usize,
    pub epochs: usize,
    pub seed: u64,
    pub task: Task,
    /// Validate every this many epochs (0 disables validation).
    pub eval_every: usize,
    /// Validation checks without improvement before stopping.
    pub patience: usize,
    /// L2-normalize entity rows after every epoch.
    pub renormalize: bool,
    /// Resample corruptions that hit a known positive.
    pub filter_negatives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            margin: 1.0,
            learning_rate: None,
            batch_size: 32,
            negatives: 10,
            epochs: 200,
            seed: 42,
            task: Task::Completion,
            eval_every: 5,
            patience: 20,
            renormalize: false,
            filter_negatives: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| KaneError::Config(format!("invalid value {value:?} for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(KaneError::Config(format!("invalid boolean {value:?} for `{key}`"))),
    }
}

impl TrainConfig {
    pub const KEYS: &'static [&'static str] = &[
        "dim",
        "head_dim",
        "heads",
        "layers",
        "aggregator",
        "encoder",
        "leaky_slope",
        "norm",
        "use_attributes",
        "attention_form",
        "margin",
        "learning_rate",
        "batch_size",
        "negatives",
        "epochs",
        "seed",
        "task",
        "eval_every",
        "patience",
        "renormalize",
        "filter_negatives",
    ];

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let m = &mut self.model;
        match key.trim() {
            "dim" | "k" => m.dim = parse(key, value)?,
            "head_dim" => m.head_dim = parse(key, value)?,
            "heads" => m.heads = parse(key, value)?,
            "layers" => m.layers = parse(key, value)?,
            "aggregator" => m.aggregator = value.parse()?,
            "encoder" => m.encoder = value.parse()?,
            "leaky_slope" => m.leaky_slope = parse(key, value)?,
            "norm" => m.norm = value.parse()?,
            "use_attributes" => m.use_attributes = parse_bool(key, value)?,
            "attention_form" => m.attention_form = value.parse()?,
            "margin" => self.margin = parse(key, value)?,
            "learning_rate" | "lr" => {
                self.learning_rate = if value.eq_ignore_ascii_case("auto") {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "batch_size" => self.batch_size = parse(key, value)?,
            "negatives" => self.negatives = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "task" => self.task = value.parse()?,
            "eval_every" => self.eval_every = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "renormalize" => self.renormalize = parse_bool(key, value)?,
            "filter_negatives" => self.filter_negatives = parse_bool(key, value)?,
            other => {
                return Err(KaneError::Config(format!(
                    "unknown setting `{other}` (known: {})",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment line.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| KaneError::Parse {
                source_name: "<config>".into(),
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            self.set(key, value).map_err(|e| KaneError::Parse {
                source_name: "<config>".into(),
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// All settings as `key = value` lines, in [`TrainConfig::KEYS`] order.
    pub fn to_kv_text(&self) -> String {
        let m = &self.model;
        let values: Vec<String> = vec![
            m.dim.to_string(),
            m.head_dim.to_string(),
            m.heads.to_string(),
            m.layers.to_string(),
            m.aggregator.to_string(),
            m.encoder.to_string(),
            m.leaky_slope.to_string(),
            m.norm.to_string(),
            m.use_attributes.to_string(),
            m.attention_form.to_string(),
            self.margin.to_string(),
            self.learning_rate.map_or("auto".into(), |lr| lr.to_string()),
            self.batch_size.to_string(),
            self.negatives.to_string(),
            self.epochs.to_string(),
            self.seed.to_string(),
            self.task.to_string(),
            self.eval_every.to_string(),
            self.patience.to_string(),
            self.renormalize.to_string(),
            self.filter_negatives.to_string(),
        ];
        Self::KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn effective_learning_rate(&self) -> f64 {
        self.learning_rate.unwrap_or_else(|| self.task.default_learning_rate())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.margin > 0.0) || !self.margin.is_finite() {
            return Err(KaneError::Config(format!("margin must be > 0, got {}", self.margin)));
        }
        let lr = self.effective_learning_rate();
        if !(lr > 0.0) || !lr.is_finite() {
            return Err(KaneError::Config(format!("learning_rate must be > 0, got {lr}")));
        }
        if self.batch_size == 0 {
            return Err(KaneError::Config("batch_size must be at least 1".into()));
        }
        if self.task == Task::Completion && self.negatives == 0 {
            return Err(KaneError::Config("negatives must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Aggregator, Norm};

    #[test]
    fn defaults_are_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn kv_text_round_trips() {
        let mut c = TrainConfig::default();
        c.set("aggregator", "average").unwrap();
        c.set("norm", "L2").unwrap();
        c.set("lr", "0.05").unwrap();
        let mut d = TrainConfig::default();
        d.apply_kv_text(&c.to_kv_text()).unwrap();
        assert_eq!(c, d);
        assert_eq!(d.model.aggregator, Aggregator::Average);
        assert_eq!(d.model.norm, Norm::L2);
        assert_eq!(d.effective_learning_rate(), 0.05);
    }

    #[test]
    fn learning_rate_follows_task_until_set() {
        let mut c = TrainConfig::default();
        assert_eq!(c.effective_learning_rate(), 0.001);
        c.set("task", "classification").unwrap();
        assert_eq!(c.effective_learning_rate(), 0.1);
        c.set("learning_rate", "0.01").unwrap();
        assert_eq!(c.effective_learning_rate(), 0.01);
        c.set("lr", "auto").unwrap();
        assert_eq!(c.learning_rate, None);
    }

    #[test]
    fn bad_settings_are_rejected() {
        let mut c = TrainConfig::default();
        assert!(c.set("colour", "red").is_err());
        assert!(c.set("epochs", "-3").is_err());
        assert!(matches!(
            c.apply_kv_text("# ok\nmargin = 1\nbroken line\n"),
            Err(KaneError::Parse { line: 3, .. })
        ));
        c.set("margin", "0").unwrap();
        assert!(c.validate().is_err());
    }
}
