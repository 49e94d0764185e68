//! IDX ingestion, per-node partitioning and attacker models.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use flate2::read::GzDecoder;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{FlccError, Result};
use crate::learn::{Examples, ModelParams};
use crate::rng::SimRng;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;
pub const NUM_CLASSES: usize = 10;

/// Byte images with labels in `[0, 10)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
    labels: Vec<u8>,
}

impl LabeledDataset {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        if pixels.len() != rows * cols * labels.len() {
            return Err(FlccError::InvalidInput(format!(
                "{} pixel bytes for {} images of {rows}x{cols}",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(FlccError::InvalidInput(format!("label {l} out of range")));
        }
        Ok(LabeledDataset {
            rows,
            cols,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let mut pixels = Vec::with_capacity(indices.len() * self.rows * self.cols);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            pixels.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        LabeledDataset {
            rows: self.rows,
            cols: self.cols,
            pixels,
            labels,
        }
    }

    /// The first `n` items (or all of them).
    pub fn head(&self, n: usize) -> LabeledDataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }

    /// Pixels scaled to `[0, 1]`.
    pub fn to_examples(&self) -> Examples {
        let mut ex = Examples::new(self.rows * self.cols);
        let mut buf = vec![0.0; self.rows * self.cols];
        for i in 0..self.len() {
            for (b, &p) in buf.iter_mut().zip(self.image(i)) {
                *b = p as f64 / 255.0;
            }
            ex.push(&buf, self.labels[i] as usize).expect("dims match");
        }
        ex
    }

    /// Image and label files in IDX layout.
    pub fn to_idx_bytes(&self) -> (Vec<u8>, Vec<u8>) {
        let n = self.len() as u32;
        let mut images = Vec::with_capacity(16 + self.pixels.len());
        images.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        images.extend_from_slice(&n.to_be_bytes());
        images.extend_from_slice(&(self.rows as u32).to_be_bytes());
        images.extend_from_slice(&(self.cols as u32).to_be_bytes());
        images.extend_from_slice(&self.pixels);
        let mut labels = Vec::with_capacity(8 + self.labels.len());
        labels.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        labels.extend_from_slice(&n.to_be_bytes());
        labels.extend_from_slice(&self.labels);
        (images, labels)
    }

    pub fn write_idx(&self, images_path: &Path, labels_path: &Path) -> Result<()> {
        let (images, labels) = self.to_idx_bytes();
        write_maybe_gz(images_path, &images)?;
        write_maybe_gz(labels_path, &labels)
    }
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| FlccError::io(path, e))?;
    if !is_gz(path) {
        return Ok(raw);
    }
    let mut out = Vec::new();
    GzDecoder::new(&raw[..])
        .read_to_end(&mut out)
        .map_err(|e| FlccError::Format {
            path: path.to_path_buf(),
            field: "gzip",
            reason: e.to_string(),
        })?;
    Ok(out)
}

fn write_maybe_gz(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e| FlccError::io(path, e);
    if is_gz(path) {
        let file = fs::File::create(path).map_err(io)?;
        let mut enc = flate2::GzBuilder::new().mtime(0).write(file, flate2::Compression::default());
        enc.write_all(bytes).map_err(io)?;
        enc.finish().map_err(io)?;
        Ok(())
    } else {
        fs::write(path, bytes).map_err(io)
    }
}

struct Header<'a> {
    path: &'a Path,
    bytes: &'a [u8],
}

impl Header<'_> {
    fn u32_at(&self, at: usize, field: &'static str) -> Result<u32> {
        self.bytes
            .get(at..at + 4)
            .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
            .ok_or_else(|| self.err(field, format!("truncated header ({} bytes)", self.bytes.len())))
    }

    fn err(&self, field: &'static str, reason: String) -> FlccError {
        FlccError::Format {
            path: self.path.to_path_buf(),
            field,
            reason,
        }
    }
}

/// Parses an IDX image/label file pair. Files ending in `.gz` are
/// decompressed transparently.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let img_bytes = read_maybe_gz(images_path)?;
    let lbl_bytes = read_maybe_gz(labels_path)?;
    parse_idx(images_path, &img_bytes, labels_path, &lbl_bytes)
}

pub fn parse_idx(
    images_path: &Path,
    images: &[u8],
    labels_path: &Path,
    labels: &[u8],
) -> Result<LabeledDataset> {
    let ih = Header {
        path: images_path,
        bytes: images,
    };
    let lh = Header {
        path: labels_path,
        bytes: labels,
    };
    let magic = ih.u32_at(0, "magic")?;
    if magic != IMAGE_MAGIC {
        return Err(ih.err("magic", format!("expected 0x{IMAGE_MAGIC:08x}, found 0x{magic:08x}")));
    }
    let magic = lh.u32_at(0, "magic")?;
    if magic != LABEL_MAGIC {
        return Err(lh.err("magic", format!("expected 0x{LABEL_MAGIC:08x}, found 0x{magic:08x}")));
    }
    let count = ih.u32_at(4, "count")? as usize;
    let rows = ih.u32_at(8, "rows")? as usize;
    let cols = ih.u32_at(12, "cols")? as usize;
    let label_count = lh.u32_at(4, "count")? as usize;
    if label_count != count {
        return Err(lh.err(
            "count",
            format!("{label_count} labels but {count} images"),
        ));
    }
    let need = count * rows * cols;
    if images.len() - 16 != need {
        return Err(ih.err(
            "pixels",
            format!("expected {need} pixel bytes, found {}", images.len() - 16),
        ));
    }
    if labels.len() - 8 != count {
        return Err(lh.err(
            "labels",
            format!("expected {count} label bytes, found {}", labels.len() - 8),
        ));
    }
    let lbl = labels[8..].to_vec();
    if let Some(pos) = lbl.iter().position(|&l| l as usize >= NUM_CLASSES) {
        return Err(lh.err("labels", format!("label {} at item {pos} out of range", lbl[pos])));
    }
    Ok(LabeledDataset {
        rows,
        cols,
        pixels: images[16..].to_vec(),
        labels: lbl,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionSpec {
    pub min_samples: usize,
    pub max_samples: usize,
    pub overlap_allowed: bool,
}

impl Default for PartitionSpec {
    fn default() -> Self {
        PartitionSpec {
            min_samples: 100,
            max_samples: 200,
            overlap_allowed: true,
        }
    }
}

impl PartitionSpec {
    pub fn validate(&self, dataset_len: usize) -> Result<()> {
        if self.min_samples == 0 || self.min_samples > self.max_samples {
            return Err(FlccError::param(
                "partition",
                format!("need 1 <= min ({}) <= max ({})", self.min_samples, self.max_samples),
            ));
        }
        if self.max_samples > dataset_len {
            return Err(FlccError::InsufficientData {
                needed: self.max_samples,
                available: dataset_len,
            });
        }
        Ok(())
    }
}

/// Per-node sample indices into the source dataset.
pub type Partition = BTreeMap<usize, Vec<usize>>;

/// Each node draws a size uniformly from `[min, max]`, then that many
/// distinct samples. With overlap, every node samples the whole set
/// independently; without it, samples are drawn from one shared pool.
pub fn partition(
    dataset_len: usize,
    node_ids: &[usize],
    spec: &PartitionSpec,
    rng: &mut SimRng,
) -> Result<Partition> {
    spec.validate(dataset_len)?;
    let sizes: Vec<usize> = node_ids
        .iter()
        .map(|_| rng.gen_range(spec.min_samples..=spec.max_samples))
        .collect();
    let mut out = Partition::new();
    if spec.overlap_allowed {
        for (&id, &n) in node_ids.iter().zip(&sizes) {
            out.insert(id, index::sample(rng, dataset_len, n).into_vec());
        }
    } else {
        let total: usize = sizes.iter().sum();
        if total > dataset_len {
            return Err(FlccError::InsufficientData {
                needed: total,
                available: dataset_len,
            });
        }
        let pool = index::sample(rng, dataset_len, total).into_vec();
        let mut at = 0;
        for (&id, &n) in node_ids.iter().zip(&sizes) {
            out.insert(id, pool[at..at + n].to_vec());
            at += n;
        }
    }
    Ok(out)
}

/// CSV `node_id,sample_index`, one row per assigned sample.
pub fn partition_manifest(partition: &Partition) -> String {
    let mut s = String::from("node_id,sample_index\n");
    for (id, idx) in partition {
        for i in idx {
            s.push_str(&format!("{id},{i}\n"));
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    LabelFlip,
    SignFlipGradient,
    ScaledNoise,
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackKind::LabelFlip => "label_flip",
            AttackKind::SignFlipGradient => "sign_flip",
            AttackKind::ScaledNoise => "scaled_noise",
        })
    }
}

impl FromStr for AttackKind {
    type Err = FlccError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "label_flip" => Ok(AttackKind::LabelFlip),
            "sign_flip" => Ok(AttackKind::SignFlipGradient),
            "scaled_noise" => Ok(AttackKind::ScaledNoise),
            _ => Err(FlccError::param(
                "attack",
                format!("unknown attack `{s}` (label_flip, sign_flip, scaled_noise)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackSpec {
    pub kind: AttackKind,
    /// Noise standard deviation for `ScaledNoise`.
    pub magnitude: f64,
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec {
            kind: AttackKind::LabelFlip,
            magnitude: 1.0,
        }
    }
}

impl AttackSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.magnitude >= 0.0 && self.magnitude.is_finite()) {
            return Err(FlccError::param(
                "attack.magnitude",
                format!("must be >= 0, got {}", self.magnitude),
            ));
        }
        Ok(())
    }

    /// Corrupts an attacker's local data before training. Only `LabelFlip`
    /// touches data.
    pub fn corrupt_dataset(&self, data: &LabeledDataset) -> LabeledDataset {
        match self.kind {
            AttackKind::LabelFlip => flip_labels(data),
            _ => data.clone(),
        }
    }

    /// Corrupts an attacker's submitted parameters. `LabelFlip` submits
    /// honestly.
    pub fn corrupt_update(
        &self,
        global: &ModelParams,
        submitted: &ModelParams,
        rng: &mut SimRng,
    ) -> ModelParams {
        match self.kind {
            AttackKind::LabelFlip => submitted.clone(),
            AttackKind::SignFlipGradient => sign_flip(global, submitted),
            AttackKind::ScaledNoise => add_noise(submitted, self.magnitude, rng),
        }
    }
}

/// `y -> (y + 1) mod 10`.
pub fn flip_labels(data: &LabeledDataset) -> LabeledDataset {
    let mut out = data.clone();
    for l in &mut out.labels {
        *l = (*l + 1) % NUM_CLASSES as u8;
    }
    out
}

/// `2 * global - submitted`: the update delta with its sign reversed.
pub fn sign_flip(global: &ModelParams, submitted: &ModelParams) -> ModelParams {
    let values = global
        .values
        .iter()
        .zip(&submitted.values)
        .map(|(g, w)| 2.0 * g - w)
        .collect();
    ModelParams {
        values,
        arch: submitted.arch.clone(),
    }
}

pub fn add_noise(params: &ModelParams, std_dev: f64, rng: &mut SimRng) -> ModelParams {
    if std_dev == 0.0 {
        return params.clone();
    }
    let normal = Normal::new(0.0, std_dev).expect("finite std dev");
    ModelParams {
        values: params.values.iter().map(|v| v + normal.sample(rng)).collect(),
        arch: params.arch.clone(),
    }
}
