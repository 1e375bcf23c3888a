use std::path::Path;

use super::samples::Encoding;
use crate::error::{Error, Result};

pub const DEFAULT_GRANULARITIES: [usize; 5] = [900, 925, 950, 975, 1000];

/// Training hyper-parameters. Stored as a flat `key = value` file; see
/// [`TrainConfig::KEYS`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub filters: usize,
    pub blocks: usize,
    pub granularities: Vec<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub val_interval: usize,
    pub seed: u64,
    pub encoding: Encoding,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            filters: 32,
            blocks: crate::nn::model::DEFAULT_BLOCKS,
            granularities: DEFAULT_GRANULARITIES.to_vec(),
            batch_size: 20,
            learning_rate: 0.002,
            max_iterations: 5000,
            val_interval: 500,
            seed: 0,
            encoding: Encoding::Grid,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value `{value}` for `{key}`")))
}

pub fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let list = value
        .split(',')
        .map(|v| parse_num(key, v.trim()))
        .collect::<Result<Vec<usize>>>()?;
    if list.is_empty() || list.contains(&0) {
        return Err(Error::InvalidArgument(format!("`{key}` needs positive values")));
    }
    Ok(list)
}

impl TrainConfig {
    pub const KEYS: [&'static str; 9] = [
        "filters",
        "blocks",
        "granularities",
        "batch_size",
        "learning_rate",
        "max_iterations",
        "val_interval",
        "seed",
        "encoding",
    ];

    /// Sets one field from its textual form. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "filters" => self.filters = parse_num(key, value)?,
            "blocks" => self.blocks = parse_num(key, value)?,
            "granularities" => self.granularities = parse_list(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "max_iterations" => self.max_iterations = parse_num(key, value)?,
            "val_interval" => self.val_interval = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "encoding" => self.encoding = value.parse()?,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown config key `{other}` (known: {})",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Defaults overridden by the `key = value` lines of `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("config line {}: expected key = value", no + 1))
            })?;
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_text(&self) -> String {
        let grans: Vec<String> = self.granularities.iter().map(usize::to_string).collect();
        format!(
            "filters = {}\nblocks = {}\ngranularities = {}\nbatch_size = {}\nlearning_rate = {}\n\
             max_iterations = {}\nval_interval = {}\nseed = {}\nencoding = {}\n",
            self.filters,
            self.blocks,
            grans.join(","),
            self.batch_size,
            self.learning_rate,
            self.max_iterations,
            self.val_interval,
            self.seed,
            self.encoding
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.filters == 0 {
            return bad("filters must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.val_interval == 0 {
            return bad("val_interval must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.granularities.is_empty() {
            return bad("granularities must not be empty");
        }
        Ok(())
    }
}
