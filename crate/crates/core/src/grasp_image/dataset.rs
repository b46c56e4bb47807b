use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{compute_stats, DatasetStats, GraspImageRecord, Provenance};
use crate::{rng, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;
const RECORD_MAGIC: &[u8; 4] = b"GIR1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspDataset {
    pub crop_size: usize,
    pub records: Vec<GraspImageRecord>,
}

/// Settings recorded alongside a dataset when it is written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub chunk_size: usize,
    pub split_seed: u64,
    pub validation_fraction: f64,
    pub config_hash: String,
    pub dropped_off_frame: usize,
}

impl Default for DatasetInfo {
    fn default() -> Self {
        Self {
            chunk_size: 1000,
            split_seed: 0,
            validation_fraction: 0.2,
            config_hash: String::new(),
            dropped_off_frame: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkInfo {
    pub index: usize,
    pub records: usize,
    pub images_sha256: String,
    pub poses_sha256: String,
    pub labels_sha256: String,
    pub metrics_sha256: String,
    pub provenance_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub crop_size: usize,
    pub num_records: usize,
    pub num_positive: usize,
    pub positive_fraction: f64,
    pub num_images: usize,
    pub train_records: usize,
    pub validation_records: usize,
    pub split_seed: u64,
    pub validation_fraction: f64,
    /// Normalisation statistics of the training split, when it has nonconstant data.
    pub stats: Option<DatasetStats>,
    pub config_hash: String,
    pub dropped_off_frame: usize,
    pub chunk_size: usize,
    pub chunks: Vec<ChunkInfo>,
}

impl GraspDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split(&self, validation_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
        split_image_wise(&self.records, validation_fraction, seed)
    }
}

/// Splits record indices into (train, validation) by rendered image: a shuffled
/// `validation_fraction` of the distinct images, with all of their crops, goes to validation.
pub fn split_image_wise(records: &[GraspImageRecord], validation_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let keys: BTreeSet<(u32, u32, u32)> = records.iter().map(|r| r.provenance.image_key()).collect();
    let mut keys: Vec<_> = keys.into_iter().collect();
    keys.shuffle(&mut rng::stream(seed, &[0x5e11]));
    let n_val = (validation_fraction.clamp(0.0, 1.0) * keys.len() as f64).round() as usize;
    let val: BTreeSet<_> = keys[..n_val].iter().copied().collect();
    let (mut train, mut valid) = (Vec::new(), Vec::new());
    for (i, r) in records.iter().enumerate() {
        if val.contains(&r.provenance.image_key()) {
            valid.push(i);
        } else {
            train.push(i);
        }
    }
    (train, valid)
}

fn sha_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Columns {
    images: Vec<u8>,
    poses: Vec<u8>,
    labels: Vec<u8>,
    metrics: Vec<u8>,
    provenance: Vec<u8>,
}

fn encode(records: &[GraspImageRecord]) -> Columns {
    let mut c = Columns {
        images: Vec::new(),
        poses: Vec::new(),
        labels: Vec::new(),
        metrics: Vec::new(),
        provenance: Vec::new(),
    };
    for r in records {
        for p in &r.image {
            c.images.extend_from_slice(&p.to_le_bytes());
        }
        c.poses.extend_from_slice(&r.depth.to_le_bytes());
        c.labels.push(r.label as u8);
        c.metrics.extend_from_slice(&r.metric.to_le_bytes());
        let p = r.provenance;
        for v in [p.object, p.stable_pose, p.image, p.grasp] {
            c.provenance.extend_from_slice(&v.to_le_bytes());
        }
    }
    c
}

fn f32s(bytes: &[u8]) -> impl Iterator<Item = f32> + '_ {
    bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
}

fn decode(c: &Columns, n: usize, crop_size: usize) -> Result<Vec<GraspImageRecord>> {
    let px = crop_size * crop_size;
    let sizes = [
        (c.images.len(), n * px * 4, "images"),
        (c.poses.len(), n * 4, "poses"),
        (c.labels.len(), n, "labels"),
        (c.metrics.len(), n * 4, "metrics"),
        (c.provenance.len(), n * 16, "provenance"),
    ];
    for (got, want, what) in sizes {
        if got != want {
            return Err(Error::CorruptDataset(format!("{what}: expected {want} bytes, found {got}")));
        }
    }
    let images: Vec<f32> = f32s(&c.images).collect();
    let poses: Vec<f32> = f32s(&c.poses).collect();
    let metrics: Vec<f32> = f32s(&c.metrics).collect();
    let prov: Vec<u32> = c
        .provenance
        .chunks_exact(4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    (0..n)
        .map(|i| {
            let label = match c.labels[i] {
                0 => false,
                1 => true,
                v => return Err(Error::CorruptDataset(format!("label byte {v} at record {i}"))),
            };
            Ok(GraspImageRecord {
                image: images[i * px..(i + 1) * px].to_vec(),
                depth: poses[i],
                label,
                metric: metrics[i],
                provenance: Provenance {
                    object: prov[4 * i],
                    stable_pose: prov[4 * i + 1],
                    image: prov[4 * i + 2],
                    grasp: prov[4 * i + 3],
                },
            })
        })
        .collect()
}

/// Writes chunked column files plus `manifest.json` into `dir`.
pub fn write_dataset(dir: &Path, dataset: &GraspDataset, info: &DatasetInfo) -> Result<DatasetManifest> {
    if info.chunk_size == 0 {
        return Err(Error::InvalidArgument("chunk size must be positive".into()));
    }
    let px = dataset.crop_size * dataset.crop_size;
    if let Some(i) = dataset.records.iter().position(|r| r.image.len() != px) {
        return Err(Error::InvalidArgument(format!("record {i} is not a {0}x{0} crop", dataset.crop_size)));
    }
    fs::create_dir_all(dir)?;
    let mut chunks = Vec::new();
    for (index, part) in dataset.records.chunks(info.chunk_size).enumerate() {
        let c = encode(part);
        let files = [
            ("images", &c.images),
            ("poses", &c.poses),
            ("labels", &c.labels),
            ("metrics", &c.metrics),
            ("provenance", &c.provenance),
        ];
        for (name, bytes) in files {
            fs::write(dir.join(format!("{name}_{index:04}.bin")), bytes)?;
        }
        chunks.push(ChunkInfo {
            index,
            records: part.len(),
            images_sha256: sha_hex(&c.images),
            poses_sha256: sha_hex(&c.poses),
            labels_sha256: sha_hex(&c.labels),
            metrics_sha256: sha_hex(&c.metrics),
            provenance_sha256: sha_hex(&c.provenance),
        });
    }
    let (train, valid) = dataset.split(info.validation_fraction, info.split_seed);
    let stats = compute_stats(train.iter().map(|&i| &dataset.records[i])).ok();
    let num_positive = dataset.records.iter().filter(|r| r.label).count();
    let num_images = dataset
        .records
        .iter()
        .map(|r| r.provenance.image_key())
        .collect::<BTreeSet<_>>()
        .len();
    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        crop_size: dataset.crop_size,
        num_records: dataset.len(),
        num_positive,
        positive_fraction: if dataset.is_empty() {
            0.0
        } else {
            num_positive as f64 / dataset.len() as f64
        },
        num_images,
        train_records: train.len(),
        validation_records: valid.len(),
        split_seed: info.split_seed,
        validation_fraction: info.validation_fraction,
        stats,
        config_hash: info.config_hash.clone(),
        dropped_off_frame: info.dropped_off_frame,
        chunk_size: info.chunk_size,
        chunks,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE)).map_err(|e| {
        Error::CorruptDataset(format!("cannot read {}: {e}; was the dataset generated?", dir.join(MANIFEST_FILE).display()))
    })?;
    let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| Error::CorruptDataset(format!("manifest: {e}")))?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::CorruptDataset(format!("unsupported manifest version {}", m.version)));
    }
    Ok(m)
}

/// Reads a dataset written by [`write_dataset`], verifying every chunk checksum.
pub fn read_dataset(dir: &Path) -> Result<(GraspDataset, DatasetManifest)> {
    let m = read_manifest(dir)?;
    let mut records = Vec::with_capacity(m.num_records);
    for chunk in &m.chunks {
        let load = |name: &str, sha: &str| -> Result<Vec<u8>> {
            let path = dir.join(format!("{name}_{:04}.bin", chunk.index));
            let bytes = fs::read(&path).map_err(|e| Error::CorruptDataset(format!("{}: {e}", path.display())))?;
            if sha_hex(&bytes) != sha {
                return Err(Error::CorruptDataset(format!("checksum mismatch in {}", path.display())));
            }
            Ok(bytes)
        };
        let cols = Columns {
            images: load("images", &chunk.images_sha256)?,
            poses: load("poses", &chunk.poses_sha256)?,
            labels: load("labels", &chunk.labels_sha256)?,
            metrics: load("metrics", &chunk.metrics_sha256)?,
            provenance: load("provenance", &chunk.provenance_sha256)?,
        };
        records.extend(decode(&cols, chunk.records, m.crop_size)?);
    }
    if records.len() != m.num_records {
        return Err(Error::CorruptDataset(format!(
            "manifest lists {} records, chunks hold {}",
            m.num_records,
            records.len()
        )));
    }
    Ok((
        GraspDataset {
            crop_size: m.crop_size,
            records,
        },
        m,
    ))
}

/// Single-file record container with a trailing checksum, used for intermediate results.
pub fn write_record_file(path: &Path, crop_size: usize, records: &[GraspImageRecord]) -> Result<()> {
    let c = encode(records);
    let mut out = Vec::new();
    out.extend_from_slice(RECORD_MAGIC);
    out.extend_from_slice(&(crop_size as u32).to_le_bytes());
    out.extend_from_slice(&(records.len() as u64).to_le_bytes());
    for part in [&c.images, &c.poses, &c.labels, &c.metrics, &c.provenance] {
        out.extend_from_slice(part);
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &out)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_record_file(path: &Path) -> Result<(usize, Vec<GraspImageRecord>)> {
    let bytes = fs::read(path)?;
    let corrupt = |why: &str| Error::CorruptDataset(format!("{}: {why}", path.display()));
    if bytes.len() < 16 + 32 || &bytes[..4] != RECORD_MAGIC {
        return Err(corrupt("not a record file"));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(corrupt("checksum mismatch"));
    }
    let crop_size = u32::from_le_bytes(body[4..8].try_into().expect("4 bytes")) as usize;
    let n = u64::from_le_bytes(body[8..16].try_into().expect("8 bytes")) as usize;
    let px = crop_size * crop_size;
    let lens = [n * px * 4, n * 4, n, n * 4, n * 16];
    if 16 + lens.iter().sum::<usize>() != body.len() {
        return Err(corrupt("length does not match header"));
    }
    let mut at = 16;
    let mut take = |len: usize| {
        let s = body[at..at + len].to_vec();
        at += len;
        s
    };
    let cols = Columns {
        images: take(lens[0]),
        poses: take(lens[1]),
        labels: take(lens[2]),
        metrics: take(lens[3]),
        provenance: take(lens[4]),
    };
    Ok((crop_size, decode(&cols, n, crop_size)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn random_records(n: usize, seed: u64) -> Vec<GraspImageRecord> {
        let mut r = rng::stream(seed, &[]);
        (0..n)
            .map(|i| GraspImageRecord {
                image: (0..32 * 32).map(|_| r.random_range(0.5..0.8f32)).collect(),
                depth: r.random_range(0.6..0.75),
                label: r.random_bool(0.25),
                metric: r.random_range(0.0..0.01),
                provenance: Provenance {
                    object: (i / 100) as u32,
                    stable_pose: 0,
                    image: ((i / 10) % 10) as u32,
                    grasp: (i % 10) as u32,
                },
            })
            .collect()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let ds = GraspDataset {
            crop_size: 32,
            records: random_records(1000, 1),
        };
        let dir = tempfile::tempdir().unwrap();
        let info = DatasetInfo {
            chunk_size: 300,
            split_seed: 7,
            ..Default::default()
        };
        let m = write_dataset(dir.path(), &ds, &info).unwrap();
        assert_eq!(m.chunks.len(), 4);
        assert_eq!(m.chunks.iter().map(|c| c.records).sum::<usize>(), 1000);
        assert_eq!(m.num_images, 100);
        assert_eq!(m.validation_records, 200);
        let (back, m2) = read_dataset(dir.path()).unwrap();
        assert_eq!(m, m2);
        assert_eq!(back.records.len(), ds.records.len());
        for (a, b) in back.records.iter().zip(&ds.records) {
            assert_eq!(a.image.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.image.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
            assert_eq!((a.depth.to_bits(), a.metric.to_bits(), a.label, a.provenance), (b.depth.to_bits(), b.metric.to_bits(), b.label, b.provenance));
        }
    }

    #[test]
    fn truncation_and_tampering_are_detected() {
        let ds = GraspDataset {
            crop_size: 32,
            records: random_records(20, 2),
        };
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &ds, &DatasetInfo::default()).unwrap();
        let img = dir.path().join("images_0000.bin");
        let bytes = fs::read(&img).unwrap();
        fs::write(&img, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(Error::CorruptDataset(_))));
        let mut flipped = bytes.clone();
        flipped[100] ^= 1;
        fs::write(&img, &flipped).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(Error::CorruptDataset(_))));
    }

    #[test]
    fn split_keeps_images_together() {
        let recs = random_records(1000, 3);
        let (train, valid) = split_image_wise(&recs, 0.2, 11);
        assert_eq!(train.len() + valid.len(), 1000);
        let tk: BTreeSet<_> = train.iter().map(|&i| recs[i].provenance.image_key()).collect();
        let vk: BTreeSet<_> = valid.iter().map(|&i| recs[i].provenance.image_key()).collect();
        assert!(tk.is_disjoint(&vk));
        assert_eq!(vk.len(), 20);
        assert_eq!(split_image_wise(&recs, 0.2, 11), (train, valid));
    }

    #[test]
    fn record_file_round_trip() {
        let recs = random_records(30, 4);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("obj.rec");
        write_record_file(&p, 32, &recs).unwrap();
        assert_eq!(read_record_file(&p).unwrap(), (32, recs));
        let mut bytes = fs::read(&p).unwrap();
        bytes[20] ^= 4;
        fs::write(&p, &bytes).unwrap();
        assert!(matches!(read_record_file(&p), Err(Error::CorruptDataset(_))));
    }
}
