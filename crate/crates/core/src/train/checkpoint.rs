//! Checkpoint file layout:
//!
//! ```text
//! MLSTMCKPT 1\n
//! <one-line JSON header: model spec, train config, epoch, seed, tensor manifest>\n
//! <parameters as little-endian f64, manifest order>
//! <RMSProp cache as little-endian f64, manifest order>
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AnyModel, ModelSpec};
use crate::numeric::Matrix;
use crate::train::rmsprop::RmsPropState;
use crate::train::trainer::TrainConfig;

const MAGIC: &str = "MLSTMCKPT";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub model: AnyModel,
    pub optimizer: RmsPropState,
    pub train: TrainConfig,
    /// Completed epochs.
    pub epoch: usize,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    model: ModelSpec,
    train: TrainConfig,
    epoch: usize,
    seed: u64,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let tensors = self.model.tensors();
        if tensors.len() != self.optimizer.cache.len() {
            return Err(Error::Consistency("optimizer state does not mirror the model".into()));
        }
        let header = Header {
            model: self.spec.clone(),
            train: TrainConfig { optimizer: self.optimizer.config, ..self.train.clone() },
            epoch: self.epoch,
            seed: self.train.seed,
            tensors: self
                .model
                .tensor_names()
                .into_iter()
                .zip(&tensors)
                .map(|(name, t)| TensorEntry { name, rows: t.rows(), cols: t.cols() })
                .collect(),
        };
        let json = serde_json::to_string(&header).map_err(|e| Error::Consistency(e.to_string()))?;
        let mut out = format!("{MAGIC} {VERSION}\n{json}\n").into_bytes();
        for t in tensors.iter().copied().chain(&self.optimizer.cache) {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
        let bad = |reason: String| Error::format(path, reason);
        let mut lines = bytes.splitn(3, |&b| b == b'\n');
        let magic = lines.next().unwrap_or_default();
        if magic != format!("{MAGIC} {VERSION}").as_bytes() {
            return Err(bad(format!("expected `{MAGIC} {VERSION}` header line")));
        }
        let json = lines.next().ok_or_else(|| bad("missing header".into()))?;
        let body = lines.next().ok_or_else(|| bad("missing tensor data".into()))?;
        let header: Header = serde_json::from_slice(json).map_err(|e| bad(format!("header: {e}")))?;

        let mut model = AnyModel::zeros(&header.model)?;
        let names = model.tensor_names();
        if names.len() != header.tensors.len() {
            return Err(bad(format!("{} tensors listed, model has {}", header.tensors.len(), names.len())));
        }
        for ((entry, name), t) in header.tensors.iter().zip(&names).zip(model.tensors()) {
            if &entry.name != name || (entry.rows, entry.cols) != t.shape() {
                return Err(bad(format!("tensor `{}` does not match the model layout", entry.name)));
            }
        }
        let count: usize = header.tensors.iter().map(|t| t.rows * t.cols).sum();
        if body.len() != 2 * count * 8 {
            return Err(bad(format!("expected {} data bytes, found {}", 2 * count * 8, body.len())));
        }
        let mut values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
        for t in model.tensors_mut() {
            t.data_mut().iter_mut().for_each(|v| *v = values.next().expect("length checked"));
        }
        let cache = header
            .tensors
            .iter()
            .map(|e| Matrix::new(e.rows, e.cols, values.by_ref().take(e.rows * e.cols).collect()))
            .collect::<Result<Vec<_>>>()?;
        if cache.iter().any(|c| c.data().iter().any(|&v| v < 0.0)) {
            return Err(bad("negative RMSProp cache entry".into()));
        }
        Ok(Checkpoint {
            spec: header.model,
            model,
            optimizer: RmsPropState { config: header.train.optimizer, cache },
            train: header.train,
            epoch: header.epoch,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_bytes(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelKind, MultiLstmConfig};
    use crate::numeric::SeededRng;
    use crate::train::rmsprop::RmsPropConfig;

    fn sample(kind: ModelKind) -> Checkpoint {
        let spec = ModelSpec {
            kind,
            input_dim: 3,
            classes: 2,
            multilstm: MultiLstmConfig { hidden: 4, attention_units: 3, input_window: 3, output_window: 2, offset: -2, ..MultiLstmConfig::default() },
        };
        let mut rng = SeededRng::new(9);
        let model = AnyModel::init(&spec, &mut rng).unwrap();
        let mut optimizer = RmsPropState::for_tensors(RmsPropConfig::default(), &model.tensors());
        for c in &mut optimizer.cache {
            c.data_mut().iter_mut().for_each(|v| *v = rng.uniform(0.0, 1.0) / 3.0);
        }
        Checkpoint { spec, model, optimizer, train: TrainConfig { seed: 17, epochs: 3, ..TrainConfig::default() }, epoch: 3 }
    }

    #[test]
    fn round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        for kind in [ModelKind::SingleFrame, ModelKind::Lstm, ModelKind::MultiLstm] {
            let ck = sample(kind);
            let path = dir.path().join("m.ckpt");
            ck.save(&path).unwrap();
            let back = Checkpoint::load(&path).unwrap();
            assert_eq!(back, ck);
            assert_eq!(back.to_bytes().unwrap(), ck.to_bytes().unwrap());
        }
    }

    #[test]
    fn rejects_damaged_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        let bytes = sample(ModelKind::Lstm).to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 8], &path).is_err());
        assert!(Checkpoint::from_bytes(b"NOTACKPT 1\n{}\n", &path).is_err());
        let mut wrong = bytes.clone();
        wrong[10] = b'9';
        assert!(Checkpoint::from_bytes(&wrong, &path).is_err());
        assert!(matches!(Checkpoint::load(&dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
