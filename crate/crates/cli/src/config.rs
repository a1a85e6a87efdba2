use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use kane_core::training::TrainConfig;

pub const OUTPUT_DIR_ENV: &str = "KANE_OUTPUT_DIR";

/// Input paths, output directory and every training setting.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub relations: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            relations: None,
            attributes: None,
            labels: None,
            output_dir: std::env::var_os(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(".")),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "relations" => self.relations = Some(value.into()),
            "attributes" => self.attributes = Some(value.into()),
            "labels" => self.labels = Some(value.into()),
            "output_dir" => self.output_dir = value.into(),
            other => self.train.set(other, value)?,
        }
        Ok(())
    }

    /// `key = value` lines; `#` starts a comment.
    pub fn apply_file(&mut self, path: &std::path::Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`", path.display(), i + 1);
            };
            self.set(k, v)
                .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        }
        Ok(())
    }

    /// `KEY=VALUE` from the command line.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {kv:?}");
        };
        self.set(k, v).with_context(|| format!("in --set {kv}"))
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}
