//! Flat `key = value` run configuration with command-line override
//! precedence.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{ModelKind, RecurrenceKind, TrainConfig};

/// Everything a training run needs. Flags override file values, file values
/// override defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub segmentations: Option<PathBuf>,
    pub permissive_segmentations: bool,
    /// Optional external word vectors to warm-start the input table.
    pub init_vectors: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub model: ModelKind,
    pub max_vocab: usize,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: None,
            dev: None,
            segmentations: None,
            permissive_segmentations: false,
            init_vectors: None,
            out_dir: PathBuf::from("out"),
            model: ModelKind::Varembed,
            max_vocab: 50_000,
            train: TrainConfig::default(),
        }
    }
}

pub fn parse_model_kind(v: &str) -> Result<ModelKind> {
    match v {
        "varembed" => Ok(ModelKind::Varembed),
        "additive" => Ok(ModelKind::Additive),
        other => Err(Error::Config(format!(
            "unknown model kind {other:?} (expected varembed or additive)"
        ))),
    }
}

pub fn parse_recurrence(v: &str) -> Result<RecurrenceKind> {
    match v {
        "rnn" => Ok(RecurrenceKind::Rnn),
        "lstm" => Ok(RecurrenceKind::Lstm),
        other => Err(Error::Config(format!(
            "unknown recurrence {other:?} (expected rnn or lstm)"
        ))),
    }
}

impl RunConfig {
    /// Apply one key, the shared path for file entries and flag overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let uint = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: bad integer {v:?}")))
        };
        let float = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key}: bad number {v:?}")))
        };
        match key {
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "dev" => self.dev = Some(PathBuf::from(value)),
            "segmentations" => self.segmentations = Some(PathBuf::from(value)),
            "init_vectors" => self.init_vectors = Some(PathBuf::from(value)),
            "permissive_segmentations" => {
                self.permissive_segmentations = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => return Err(Error::Config(format!("{key}: expected true/false"))),
                }
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            "model" => self.model = parse_model_kind(value)?,
            "recurrence" => self.train.recurrence = parse_recurrence(value)?,
            "max_vocab" => self.max_vocab = uint(value)?,
            "k" => self.train.k = uint(value)?,
            "h" => self.train.h = uint(value)?,
            "epochs" => self.train.epochs = uint(value)?,
            "batch_size" => self.train.batch_size = uint(value)?,
            "bptt" => self.train.bptt = uint(value)?,
            "seed" => {
                self.train.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("seed: bad integer {value:?}")))?
            }
            "lr" => self.train.lr = float(value)?,
            "lr_decay" => self.train.lr_decay = float(value)?,
            "clip" => self.train.clip = float(value)?,
            "plateau_threshold" => self.train.plateau_threshold = float(value)?,
            "rho" => self.train.rho = float(value)?,
            "eps" => self.train.eps = float(value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Read a `key = value` file; `#` starts a comment, blank lines ignored.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_str(&text, path)
    }

    /// Apply config text; `path` is for error messages only.
    pub fn apply_str(&mut self, text: &str, path: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected key = value"))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn file_values_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        let mut f = fs::File::create(&path).unwrap();
        writeln!(f, "# a comment").unwrap();
        writeln!(f, "corpus = data/train.txt").unwrap();
        writeln!(f, "k = 16  # inline comment").unwrap();
        writeln!(f, "model = additive").unwrap();
        writeln!(f, "lr = 0.02").unwrap();
        drop(f);
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.corpus.as_deref(), Some(Path::new("data/train.txt")));
        assert_eq!(cfg.train.k, 16);
        assert_eq!(cfg.train.h, 128); // default preserved
        assert_eq!(cfg.model, ModelKind::Additive);
        assert_eq!(cfg.train.lr, 0.02);
    }

    #[test]
    fn bad_keys_and_values_error_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "k = 4\nnonsense = 1\n").unwrap();
        let err = RunConfig::load(&path).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
        fs::write(&path, "k = not-a-number\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
        fs::write(&path, "no equals sign\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn later_set_overrides_earlier() {
        let mut cfg = RunConfig::default();
        cfg.set("k", "8").unwrap();
        cfg.set("k", "4").unwrap();
        assert_eq!(cfg.train.k, 4);
    }
}
