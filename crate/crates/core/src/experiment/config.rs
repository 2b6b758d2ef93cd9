//! Experiment configuration files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::method::{parse_method, Method};
use crate::data::{load_dataset, synth_dataset_with_noise, DataFormat, Dataset, Recipe};
use crate::ensemble::{kfold_split, FoldSplit};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::seed_path;
use crate::trainer::{AugmentConfig, TrainConfig};

/// Evaluation protocol of one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Stratified k-fold cross-validation.
    KFold(usize),
    /// A fixed training and test set.
    TrainTest,
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Protocol::KFold(k) => write!(f, "{k}cv"),
            Protocol::TrainTest => f.write_str("tr-te"),
        }
    }
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.to_ascii_lowercase();
        if s == "tr-te" {
            return Ok(Protocol::TrainTest);
        }
        match s.strip_suffix("cv").map(str::parse::<usize>) {
            Some(Ok(k)) if k >= 2 => Ok(Protocol::KFold(k)),
            _ => Err(Error::config(format!("unknown protocol '{s}' (expected <k>cv or tr-te)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synth {
        recipe: Recipe,
        n: usize,
        /// Size of a separate test set (train/test protocol only).
        test_n: Option<usize>,
        classes: usize,
        size: usize,
        noise: f64,
        seed: u64,
    },
    Idx {
        train: PathBuf,
        test: Option<PathBuf>,
        size: Option<usize>,
    },
    ImageDir {
        root: PathBuf,
        test: Option<PathBuf>,
        size: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub name: String,
    pub source: DataSource,
    pub protocol: Protocol,
}

/// A dataset ready for evaluation: every sample plus its split.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub name: String,
    pub data: Dataset,
    pub split: FoldSplit,
}

impl DatasetSpec {
    /// Loads or generates the samples; k-fold splits are seeded by `split_seed`.
    pub fn load(&self, split_seed: u64) -> Result<LoadedDataset> {
        let (train, test) = match &self.source {
            DataSource::Synth {
                recipe,
                n,
                test_n,
                classes,
                size,
                noise,
                seed,
            } => {
                let train = synth_dataset_with_noise(*recipe, *n, *classes, *size, *seed, *noise)?;
                let test = test_n
                    .map(|t| synth_dataset_with_noise(*recipe, t, *classes, *size, seed_path!(*seed, "test"), *noise))
                    .transpose()?;
                (train, test)
            }
            DataSource::Idx { train, test, size } => (
                load_dataset(train, DataFormat::Idx, *size)?,
                test.as_ref().map(|t| load_dataset(t, DataFormat::Idx, *size)).transpose()?,
            ),
            DataSource::ImageDir { root, test, size } => (
                load_dataset(root, DataFormat::ImageDir, Some(*size))?,
                test.as_ref()
                    .map(|t| load_dataset(t, DataFormat::ImageDir, Some(*size)))
                    .transpose()?,
            ),
        };
        let (data, split) = match (self.protocol, test) {
            (Protocol::TrainTest, Some(test)) => {
                let n_train = train.len();
                let data = train.concat(&test)?;
                let split = FoldSplit::fixed(data.len(), (0..n_train).collect(), (n_train..data.len()).collect())?;
                (data, split)
            }
            (Protocol::TrainTest, None) => {
                return Err(Error::config(format!("dataset '{}': tr-te protocol needs a test set", self.name)))
            }
            (Protocol::KFold(k), None) => {
                let split = kfold_split(train.labels(), k, split_seed)?;
                (train, split)
            }
            (Protocol::KFold(_), Some(_)) => {
                return Err(Error::config(format!(
                    "dataset '{}': a separate test set implies the tr-te protocol",
                    self.name
                )))
            }
        };
        Ok(LoadedDataset {
            name: self.name.clone(),
            data,
            split,
        })
    }
}

/// Everything an experiment run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub train: TrainConfig,
    pub conv_filters: Vec<usize>,
    pub dense_units: Vec<usize>,
    pub datasets: Vec<DatasetSpec>,
    pub methods: Vec<Method>,
    /// Text the configuration was parsed from, kept for the manifest.
    pub source_text: String,
}

impl ExperimentConfig {
    /// Backbone for a dataset with the given sample shape and class count.
    pub fn backbone(&self, input: [usize; 3], classes: usize) -> ModelSpec {
        ModelSpec::mini_conv_net(input, classes, &self.conv_filters, &self.dense_units)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses `key = value` lines; relative paths resolve against `base_dir`.
    ///
    /// ```text
    /// seed = 1
    /// batch_size = 30            max_epochs = 30     learning_rate = 0.0001
    /// momentum = 0.9             augment = true      rescale = 1 2
    /// conv_filters = 8 16        dense_units = 64
    /// dataset = <name> synth recipe=<r> n=<n> [test=<n>] classes=<c> size=<s> [noise=<x>] [seed=<u64>] [protocol=<p>]
    /// dataset = <name> idx train=<prefix> [test=<prefix>] [size=<s>] [protocol=<p>]
    /// dataset = <name> image-dir root=<dir> [test=<dir>] size=<s> [protocol=<p>]
    /// method = <method name>
    /// ```
    ///
    /// `dataset` and `method` repeat; `#` starts a comment line. The protocol
    /// defaults to `tr-te` when a test set is given and `5cv` otherwise.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = ExperimentConfig {
            seed: 0,
            train: TrainConfig {
                augmentation: Some(AugmentConfig::default()),
                ..TrainConfig::default()
            },
            conv_filters: vec![8, 16],
            dense_units: vec![64],
            datasets: Vec::new(),
            methods: Vec::new(),
            source_text: text.to_string(),
        };
        let mut augment = true;
        let mut rescale = AugmentConfig::default().rescale_range;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::config(format!("config line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| -> Result<f64> { v.parse().map_err(|_| err(format!("'{v}' is not a number"))) };
            let int = |v: &str| -> Result<usize> { v.parse().map_err(|_| err(format!("'{v}' is not a count"))) };
            let ints = |v: &str| -> Result<Vec<usize>> { v.split_whitespace().map(int).collect() };
            match key {
                "seed" => cfg.seed = value.parse().map_err(|_| err(format!("bad seed '{value}'")))?,
                "batch_size" => cfg.train.batch_size = int(value)?,
                "max_epochs" => cfg.train.max_epochs = int(value)?,
                "learning_rate" => cfg.train.learning_rate = num(value)?,
                "momentum" => cfg.train.momentum = num(value)?,
                "augment" => {
                    augment = match value {
                        "true" | "on" | "yes" => true,
                        "false" | "off" | "no" => false,
                        _ => return Err(err(format!("augment must be true or false, got '{value}'"))),
                    }
                }
                "rescale" => {
                    let v: Vec<f64> = value.split_whitespace().map(num).collect::<Result<_>>()?;
                    if v.len() != 2 {
                        return Err(err("rescale takes two factors".into()));
                    }
                    rescale = (v[0], v[1]);
                }
                "conv_filters" => cfg.conv_filters = ints(value)?,
                "dense_units" => cfg.dense_units = ints(value)?,
                "dataset" => cfg.datasets.push(DatasetSpec::parse(value, base_dir).map_err(|e| err(e.to_string()))?),
                "method" => cfg.methods.push(parse_method(value)?),
                _ => return Err(err(format!("unknown key '{key}'"))),
            }
        }
        cfg.train.augmentation = augment.then_some(AugmentConfig {
            rescale_range: rescale,
            ..AugmentConfig::default()
        });
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.datasets.is_empty() || self.methods.is_empty() {
            return Err(Error::config("an experiment needs at least one dataset and one method"));
        }
        for (i, d) in self.datasets.iter().enumerate() {
            if self.datasets[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::config(format!("dataset '{}' listed twice", d.name)));
            }
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::config(format!("method '{}' listed twice", m.name)));
            }
        }
        Ok(())
    }

    /// One-line summary of the training options, for manifests.
    pub fn describe_training(&self) -> String {
        let t = &self.train;
        let mut s = format!(
            "batch_size={} max_epochs={} learning_rate={} momentum={}",
            t.batch_size, t.max_epochs, t.learning_rate, t.momentum
        );
        match &t.augmentation {
            Some(a) => {
                let _ = write!(s, " augment=true rescale={} {}", a.rescale_range.0, a.rescale_range.1);
            }
            None => s.push_str(" augment=false"),
        }
        s
    }
}

impl DatasetSpec {
    /// Parses the value of a `dataset =` line (see [`ExperimentConfig::parse`]).
    pub fn parse(value: &str, base_dir: &Path) -> Result<Self> {
        parse_dataset(value, base_dir)
    }
}

fn parse_dataset(value: &str, base_dir: &Path) -> Result<DatasetSpec> {
    let mut words = value.split_whitespace();
    let name = words.next().ok_or_else(|| Error::config("dataset needs a name"))?.to_string();
    if name.contains(',') {
        return Err(Error::config(format!("dataset name '{name}' may not contain commas")));
    }
    let kind = words.next().ok_or_else(|| Error::config(format!("dataset '{name}' needs a source kind")))?;
    let mut kv = Vec::new();
    for w in words {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| Error::config(format!("dataset '{name}': expected key=value, got '{w}'")))?;
        kv.push((k, v));
    }
    let mut take = |key: &str| -> Option<String> {
        let pos = kv.iter().position(|(k, _)| *k == key)?;
        Some(kv.remove(pos).1.to_string())
    };
    let missing = |key: &str| Error::config(format!("dataset '{name}' needs {key}="));
    let count = |key: &str, v: String| -> Result<usize> {
        v.parse().map_err(|_| Error::config(format!("dataset '{name}': {key}='{v}' is not a count")))
    };
    let path = |v: String| -> PathBuf {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            base_dir.join(p)
        }
    };
    let protocol = take("protocol").map(|p| p.parse()).transpose()?;
    let source = match kind {
        "synth" => {
            let recipe: Recipe = take("recipe").ok_or_else(|| missing("recipe"))?.parse()?;
            let n = count("n", take("n").ok_or_else(|| missing("n"))?)?;
            let test_n = take("test").map(|v| count("test", v)).transpose()?;
            let classes = count("classes", take("classes").ok_or_else(|| missing("classes"))?)?;
            let size = count("size", take("size").ok_or_else(|| missing("size"))?)?;
            let noise = match take("noise") {
                Some(v) => v.parse().map_err(|_| Error::config(format!("dataset '{name}': bad noise '{v}'")))?,
                None => 1.0,
            };
            let seed = match take("seed") {
                Some(v) => v.parse().map_err(|_| Error::config(format!("dataset '{name}': bad seed '{v}'")))?,
                None => seed_path!(0, "synth", name.as_str()),
            };
            DataSource::Synth {
                recipe,
                n,
                test_n,
                classes,
                size,
                noise,
                seed,
            }
        }
        "idx" => DataSource::Idx {
            train: path(take("train").ok_or_else(|| missing("train"))?),
            test: take("test").map(path),
            size: take("size").map(|v| count("size", v)).transpose()?,
        },
        "image-dir" => DataSource::ImageDir {
            root: path(take("root").ok_or_else(|| missing("root"))?),
            test: take("test").map(path),
            size: count("size", take("size").ok_or_else(|| missing("size"))?)?,
        },
        _ => {
            return Err(Error::config(format!(
                "dataset '{name}': unknown source '{kind}' (expected synth, idx or image-dir)"
            )))
        }
    };
    if let Some((k, _)) = kv.first() {
        return Err(Error::config(format!("dataset '{name}': unknown key '{k}'")));
    }
    let has_test = match &source {
        DataSource::Synth { test_n, .. } => test_n.is_some(),
        DataSource::Idx { test, .. } | DataSource::ImageDir { test, .. } => test.is_some(),
    };
    let protocol = protocol.unwrap_or(if has_test { Protocol::TrainTest } else { Protocol::KFold(5) });
    Ok(DatasetSpec { name, source, protocol })
}
