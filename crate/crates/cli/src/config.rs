//! Resolved run configuration.
//!
//! Values come from three layers, later ones winning: built-in defaults, a
//! `key = value` file given with `--config`, then command-line flags. The
//! file format is one `key = value` pair per line; blank lines and lines
//! starting with `#` are ignored. Every run writes the resolved result to
//! `resolved.conf` in its output directory, in the same format.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use multilstm::model::{ModelKind, ModelSpec, MultiLstmConfig};
use multilstm::train::{RmsPropConfig, TrainConfig};
use multilstm::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub train_data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub checkpoints: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    pub out: Option<PathBuf>,

    pub model: ModelKind,
    pub hidden: usize,
    pub attention_units: usize,
    pub input_window: usize,
    pub output_window: usize,
    pub offset: i64,
    pub frame_rate: f64,

    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub clip: f64,
    pub minibatch: usize,
    pub epochs: usize,
    pub seed: u64,

    pub threshold: f64,
    pub length_penalty: f64,
    pub overlap: f64,
    pub offsets: Vec<i64>,
    pub workers: usize,

    pub query: String,
    pub first: Option<String>,
    pub second: Option<String>,
    pub max_gap: usize,
    pub top_k: usize,
    pub suppress: bool,

    pub tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = MultiLstmConfig::default();
        let train = TrainConfig::default();
        RunConfig {
            data: None,
            train_data: None,
            checkpoint: None,
            checkpoints: None,
            predictions: None,
            spec: None,
            out: None,
            model: ModelKind::MultiLstm,
            hidden: model.hidden,
            attention_units: model.attention_units,
            input_window: model.input_window,
            output_window: model.output_window,
            offset: model.offset,
            frame_rate: model.frame_rate,
            learning_rate: train.optimizer.learning_rate,
            decay: train.optimizer.decay,
            epsilon: train.optimizer.epsilon,
            clip: train.clip,
            minibatch: train.minibatch,
            epochs: train.epochs,
            seed: train.seed,
            threshold: multilstm::eval::DEFAULT_THRESHOLD,
            length_penalty: multilstm::eval::DEFAULT_LENGTH_PENALTY,
            overlap: multilstm::eval::DEFAULT_OVERLAP,
            offsets: vec![-10, -5, 0, 5, 10],
            workers: 1,
            query: "sequential".into(),
            first: None,
            second: None,
            max_gap: 10,
            top_k: 10,
            suppress: true,
            tolerance: 1e-4,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("bad value `{value}` for `{key}`: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<i64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let path = || Some(PathBuf::from(v));
        match key {
            "data" => self.data = path(),
            "train_data" => self.train_data = path(),
            "checkpoint" => self.checkpoint = path(),
            "checkpoints" => self.checkpoints = path(),
            "predictions" => self.predictions = path(),
            "spec" => self.spec = path(),
            "out" => self.out = path(),
            "model" => self.model = parse(key, v)?,
            "hidden" => self.hidden = parse(key, v)?,
            "attention_units" => self.attention_units = parse(key, v)?,
            "input_window" => self.input_window = parse(key, v)?,
            "output_window" => self.output_window = parse(key, v)?,
            "offset" => self.offset = parse(key, v)?,
            "frame_rate" => self.frame_rate = parse(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "decay" => self.decay = parse(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "clip" => self.clip = parse(key, v)?,
            "minibatch" => self.minibatch = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "threshold" => self.threshold = parse(key, v)?,
            "length_penalty" => self.length_penalty = parse(key, v)?,
            "overlap" => self.overlap = parse(key, v)?,
            "offsets" => self.offsets = parse_list(key, v)?,
            "workers" => self.workers = parse(key, v)?,
            "query" => self.query = v.to_string(),
            "first" => self.first = Some(v.to_string()),
            "second" => self.second = Some(v.to_string()),
            "max_gap" => self.max_gap = parse(key, v)?,
            "top_k" => self.top_k = parse(key, v)?,
            "suppress" => self.suppress = parse(key, v)?,
            "tolerance" => self.tolerance = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let paths = [
            ("data", &self.data),
            ("train_data", &self.train_data),
            ("checkpoint", &self.checkpoint),
            ("checkpoints", &self.checkpoints),
            ("predictions", &self.predictions),
            ("spec", &self.spec),
            ("out", &self.out),
        ];
        for (k, p) in paths {
            if let Some(p) = p {
                out.push((k, p.display().to_string()));
            }
        }
        let model = match self.model {
            ModelKind::SingleFrame => "single-frame",
            ModelKind::Lstm => "lstm",
            ModelKind::MultiLstm => "multilstm",
        };
        out.extend([
            ("model", model.to_string()),
            ("hidden", self.hidden.to_string()),
            ("attention_units", self.attention_units.to_string()),
            ("input_window", self.input_window.to_string()),
            ("output_window", self.output_window.to_string()),
            ("offset", self.offset.to_string()),
            ("frame_rate", self.frame_rate.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("decay", self.decay.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("clip", self.clip.to_string()),
            ("minibatch", self.minibatch.to_string()),
            ("epochs", self.epochs.to_string()),
            ("seed", self.seed.to_string()),
            ("threshold", self.threshold.to_string()),
            ("length_penalty", self.length_penalty.to_string()),
            ("overlap", self.overlap.to_string()),
            ("offsets", self.offsets.iter().map(|o| o.to_string()).collect::<Vec<_>>().join(",")),
            ("workers", self.workers.to_string()),
            ("query", self.query.clone()),
        ]);
        if let Some(f) = &self.first {
            out.push(("first", f.clone()));
        }
        if let Some(s) = &self.second {
            out.push(("second", s.clone()));
        }
        out.extend([
            ("max_gap", self.max_gap.to_string()),
            ("top_k", self.top_k.to_string()),
            ("suppress", self.suppress.to_string()),
            ("tolerance", self.tolerance.to_string()),
        ]);
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join("resolved.conf");
        std::fs::write(&path, self.to_text())
            .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
    }

    pub fn model_config(&self) -> MultiLstmConfig {
        MultiLstmConfig {
            input_window: self.input_window,
            output_window: self.output_window,
            hidden: self.hidden,
            attention_units: self.attention_units,
            offset: self.offset,
            frame_rate: self.frame_rate,
        }
    }

    pub fn model_spec(&self, input_dim: usize, classes: usize) -> ModelSpec {
        ModelSpec {
            kind: self.model,
            input_dim,
            classes,
            multilstm: self.model_config(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            minibatch: self.minibatch,
            epochs: self.epochs,
            seed: self.seed,
            clip: self.clip,
            optimizer: RmsPropConfig {
                decay: self.decay,
                epsilon: self.epsilon,
                learning_rate: self.learning_rate,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# comment\n\nseed = 9\nlearning_rate=0.003\noffsets = -4, 0,4\nfirst = pass\nmodel = lstm\n")
            .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.offsets, vec![-4, 0, 4]);
        assert_eq!(cfg.model, ModelKind::Lstm);
        let mut back = RunConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_input_is_rejected() {
        let mut cfg = RunConfig::default();
        assert!(cfg.apply_text("nonsense").is_err());
        assert!(cfg.apply_text("colour = red").is_err());
        assert!(cfg.apply_text("epochs = many").is_err());
    }

    #[test]
    fn defaults_match_the_library() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.train_config(), TrainConfig::default());
        assert_eq!(cfg.model_config(), MultiLstmConfig::default());
        assert_eq!((cfg.threshold, cfg.length_penalty, cfg.overlap), (0.1, 0.01, 0.1));
    }
}
