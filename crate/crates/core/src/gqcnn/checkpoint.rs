use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{NetworkParams, NetworkSpec, Tensor};
use crate::grasp_image::DatasetStats;
use crate::{Error, Result};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Trained parameters together with the normalisation they expect.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams<f32>,
    pub stats: DatasetStats,
    pub seed: u64,
    pub epoch: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    file: String,
    sha256: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    spec: NetworkSpec,
    stats: DatasetStats,
    seed: u64,
    epoch: usize,
    tensors: Vec<TensorEntry>,
}

fn sha_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_checkpoint(dir: &Path, ckpt: &Checkpoint) -> Result<()> {
    ckpt.params.validate()?;
    fs::create_dir_all(dir)?;
    let mut tensors = Vec::new();
    for t in &ckpt.params.tensors {
        let bytes: Vec<u8> = t.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        let file = format!("{}.bin", t.name);
        fs::write(dir.join(&file), &bytes)?;
        tensors.push(TensorEntry {
            name: t.name.clone(),
            shape: t.shape.clone(),
            file,
            sha256: sha_hex(&bytes),
        });
    }
    let m = Manifest {
        spec: ckpt.params.spec.clone(),
        stats: ckpt.stats,
        seed: ckpt.seed,
        epoch: ckpt.epoch,
        tensors,
    };
    fs::write(dir.join(CHECKPOINT_FILE), serde_json::to_string_pretty(&m)?)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let path = dir.join(CHECKPOINT_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::CorruptCheckpoint(format!("cannot read {}: {e}; run `train` first", path.display())))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    let mut tensors = Vec::new();
    for e in m.tensors {
        let p = dir.join(&e.file);
        let bytes = fs::read(&p).map_err(|err| Error::CorruptCheckpoint(format!("{}: {err}", p.display())))?;
        if sha_hex(&bytes) != e.sha256 || bytes.len() % 4 != 0 {
            return Err(Error::CorruptCheckpoint(format!("checksum mismatch in {}", p.display())));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        tensors.push(Tensor {
            name: e.name,
            shape: e.shape,
            data,
        });
    }
    let params = NetworkParams { spec: m.spec, tensors };
    params.validate().map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
    Ok(Checkpoint {
        params,
        stats: m.stats,
        seed: m.seed,
        epoch: m.epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gqcnn::init_params;

    #[test]
    fn round_trip_and_corruption() {
        let ckpt = Checkpoint {
            params: init_params(&NetworkSpec::tiny(), 3).unwrap(),
            stats: DatasetStats {
                pixel_mean: 0.7,
                pixel_std: 0.02,
                depth_mean: 0.68,
                depth_std: 0.03,
                positive_fraction: 0.2,
            },
            seed: 3,
            epoch: 4,
        };
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(dir.path(), &ckpt).unwrap();
        assert_eq!(load_checkpoint(dir.path()).unwrap(), ckpt);
        let f = dir.path().join("conv1.weight.bin");
        let mut b = fs::read(&f).unwrap();
        b[0] ^= 1;
        fs::write(&f, b).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::CorruptCheckpoint(_))));
    }
}
