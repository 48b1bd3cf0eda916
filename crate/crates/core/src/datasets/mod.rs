//! Synthetic generators and FashionMNIST ingestion.

mod idx;
mod synthetic;

pub use idx::{parse_idx, read_idx_file, write_idx_file, IdxArray, IMAGES_MAGIC, LABELS_MAGIC};
pub use synthetic::{gen_swissroll, gen_wreg, wreg_target, SwissRoll};

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::derive_seed;
use crate::mlp::{Dataset, Targets};

pub const FMNIST_TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const FMNIST_TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const FMNIST_TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const FMNIST_TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Wreg,
    Src,
    Fmnist,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub kind: DataKind,
    pub sample_count: usize,
    #[serde(default = "default_classes")]
    pub class_count: usize,
    /// Set from the run's data seed.
    #[serde(skip)]
    pub seed: u64,
    /// Directory holding the four IDX files (fmnist only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_dir: Option<PathBuf>,
    #[serde(default)]
    pub swissroll: SwissRoll,
}

fn default_classes() -> usize {
    4
}

impl DataConfig {
    pub fn new(kind: DataKind, sample_count: usize, seed: u64) -> Self {
        let class_count = match kind {
            DataKind::Wreg => 1,
            DataKind::Src => 2,
            DataKind::Fmnist => 4,
        };
        Self {
            kind,
            sample_count,
            class_count,
            seed,
            source_dir: None,
            swissroll: SwissRoll::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_count == 0 {
            return Err(Error::invalid("sample_count must be at least 1"));
        }
        match self.kind {
            DataKind::Fmnist if self.class_count == 0 || self.class_count > 10 => Err(Error::invalid(format!(
                "fmnist class_count must lie in 1..=10, got {}",
                self.class_count
            ))),
            DataKind::Fmnist if self.source_dir.is_none() => Err(Error::invalid("fmnist needs source_dir")),
            DataKind::Src if self.class_count != 2 => Err(Error::invalid("swiss roll has exactly 2 classes")),
            _ => Ok(()),
        }
    }

    /// Width of the network output this data calls for.
    pub fn output_width(&self) -> usize {
        match self.kind {
            DataKind::Wreg => 1,
            _ => self.class_count,
        }
    }
}

/// Training and evaluation sets. Synthetic evaluation sets are the same size
/// and drawn from a seed derived from the training seed.
pub fn load(config: &DataConfig) -> Result<(Dataset, Dataset)> {
    config.validate()?;
    let eval_seed = derive_seed(config.seed, 1);
    match config.kind {
        DataKind::Wreg => Ok((gen_wreg(config.sample_count, config.seed)?, gen_wreg(config.sample_count, eval_seed)?)),
        DataKind::Src => Ok((
            config.swissroll.generate(config.sample_count, config.seed)?,
            config.swissroll.generate(config.sample_count, eval_seed)?,
        )),
        DataKind::Fmnist => load_fmnist(config),
    }
}

/// The first `sample_count` training and test images whose label is below
/// `class_count`, in file order, pixels scaled to `[0, 1]`.
pub fn load_fmnist(config: &DataConfig) -> Result<(Dataset, Dataset)> {
    config.validate()?;
    let dir = config.source_dir.as_deref().expect("validated");
    let train = load_idx_subset(
        &locate(dir, FMNIST_TRAIN_IMAGES)?,
        &locate(dir, FMNIST_TRAIN_LABELS)?,
        config.class_count,
        config.sample_count,
        "fmnist-train",
    )?;
    let eval = load_idx_subset(
        &locate(dir, FMNIST_TEST_IMAGES)?,
        &locate(dir, FMNIST_TEST_LABELS)?,
        config.class_count,
        config.sample_count,
        "fmnist-eval",
    )?;
    Ok((train, eval))
}

/// `name` or `name.gz` inside `dir`.
pub fn locate(dir: &Path, name: &str) -> Result<PathBuf> {
    let plain = dir.join(name);
    let gz = dir.join(format!("{name}.gz"));
    [plain.clone(), gz]
        .into_iter()
        .find(|p| p.is_file())
        .ok_or_else(|| Error::io(plain, std::io::Error::new(std::io::ErrorKind::NotFound, "idx file (or .gz) not found")))
}

pub fn load_idx_subset(
    images_path: &Path,
    labels_path: &Path,
    class_count: usize,
    take: usize,
    name: &str,
) -> Result<Dataset> {
    let images = read_idx_file(images_path, "idx images")?;
    let labels = read_idx_file(labels_path, "idx labels")?;
    subset_from_idx(&images, &labels, class_count, take, name)
}

pub fn subset_from_idx(images: &IdxArray, labels: &IdxArray, class_count: usize, take: usize, name: &str) -> Result<Dataset> {
    if images.magic != IMAGES_MAGIC {
        return Err(Error::Format {
            what: "idx images",
            offset: 0,
            reason: format!("expected magic {IMAGES_MAGIC}, got {}", images.magic),
        });
    }
    if labels.magic != LABELS_MAGIC {
        return Err(Error::Format {
            what: "idx labels",
            offset: 0,
            reason: format!("expected magic {LABELS_MAGIC}, got {}", labels.magic),
        });
    }
    if images.count() != labels.count() {
        return Err(Error::Format {
            what: "idx labels",
            offset: 4,
            reason: format!("{} labels for {} images", labels.count(), images.count()),
        });
    }
    let chosen: Vec<usize> = (0..labels.count())
        .filter(|&i| (labels.data[i] as usize) < class_count)
        .take(take)
        .collect();
    if chosen.len() < take {
        return Err(Error::invalid(format!(
            "{name}: only {} samples with label < {class_count}, {take} requested",
            chosen.len()
        )));
    }
    let width = images.item_len();
    let mut inputs = Array2::zeros((take, width));
    for (row, &i) in chosen.iter().enumerate() {
        for (x, &b) in inputs.row_mut(row).iter_mut().zip(images.item(i)) {
            *x = b as f64 / 255.0;
        }
    }
    let classes = chosen.iter().map(|&i| labels.data[i] as usize).collect();
    Dataset::new(name, inputs, Targets::Classes(classes))
}

/// Re-encodes a dataset of `[0, 1]` pixels and class labels as IDX arrays,
/// with images shaped `side × side` when the width is a perfect square.
pub fn dataset_to_idx(data: &Dataset) -> Result<(IdxArray, IdxArray)> {
    let Targets::Classes(classes) = data.targets() else {
        return Err(Error::invalid("idx export needs class labels"));
    };
    let (n, width) = data.inputs().dim();
    let side = (width as f64).sqrt().round() as usize;
    let dims = if side * side == width { vec![n, side, side] } else { vec![n, width] };
    let pixels = data.inputs().iter().map(|&x| (x * 255.0).round().clamp(0.0, 255.0) as u8).collect();
    let images = IdxArray::new(dims, pixels)?;
    let labels = classes
        .iter()
        .map(|&c| u8::try_from(c).map_err(|_| Error::invalid(format!("label {c} does not fit a byte"))))
        .collect::<Result<Vec<_>>>()?;
    Ok((images, IdxArray::new(vec![n], labels)?))
}

/// CSV with columns `x0..`, then `y0..` (regression) or `label`.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let d = data.input_width();
    let mut header: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    match data.targets() {
        Targets::Classes(_) => header.push("label".into()),
        Targets::Values(v) => header.extend((0..v.ncols()).map(|i| format!("y{i}"))),
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, x) in data.inputs().rows().into_iter().enumerate() {
        let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        match data.targets() {
            Targets::Classes(c) => rec.push(c[i].to_string()),
            Targets::Values(v) => rec.extend(v.row(i).iter().map(|y| y.to_string())),
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_filters_and_scales() {
        let images = {
            let mut a = IdxArray::new(vec![4, 1, 2], vec![0, 255, 10, 20, 30, 40, 51, 102]).unwrap();
            a.magic = IMAGES_MAGIC;
            a
        };
        let labels = IdxArray::new(vec![4], vec![0, 7, 3, 1]).unwrap();
        let d = subset_from_idx(&images, &labels, 4, 2, "t").unwrap();
        assert_eq!(d.inputs().row(0).to_vec(), vec![0.0, 1.0]);
        assert_eq!(d.inputs().row(1).to_vec(), vec![30.0 / 255.0, 40.0 / 255.0]);
        assert_eq!(d.targets(), &Targets::Classes(vec![0, 3]));
        assert!(subset_from_idx(&images, &labels, 4, 4, "t").is_err());
        let short = IdxArray::new(vec![3], vec![0, 1, 2]).unwrap();
        assert!(matches!(subset_from_idx(&images, &short, 4, 1, "t"), Err(Error::Format { .. })));
    }
}
