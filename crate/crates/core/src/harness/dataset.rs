//! Dataset ingestion and seeded train/test splitting.
//!
//! A dataset is a directory of per-class subdirectories of PGM files. Scans
//! sort classes and files by name so the manifest, and everything derived
//! from it, is independent of directory enumeration order.

use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::pgm_dimensions;

/// Name and version of the split shuffle: a ChaCha8 stream drives an inline
/// Fisher–Yates pass per class, in class order. Recorded in emitted split
/// lists so published splits stay reproducible.
pub const SPLIT_RNG_VERSION: &str = "chacha8-fy-v1";

/// One class directory: its name, and its image paths sorted by file name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassEntry {
    pub name: String,
    pub images: Vec<PathBuf>,
    /// (width, height) per image, parallel to `images`.
    pub dimensions: Vec<(usize, usize)>,
}

/// Deterministic description of a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub classes: Vec<ClassEntry>,
}

impl DatasetManifest {
    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    /// Every image must share dimensions unless a resize target is given.
    pub fn validate_dimensions(&self, resize: Option<(usize, usize)>) -> Result<()> {
        if resize.is_some() {
            return Ok(());
        }
        let mut first: Option<((usize, usize), String)> = None;
        for class in &self.classes {
            for (path, dims) in class.images.iter().zip(&class.dimensions) {
                match &first {
                    None => first = Some((*dims, path.display().to_string())),
                    Some((expect, seen_at)) if dims != expect => {
                        return Err(Error::Dataset(format!(
                            "mixed dimensions without a resize flag: {} is {}x{} but {} is {}x{}; \
                             pass resize=WxH to normalize",
                            path.display(),
                            dims.0,
                            dims.1,
                            seen_at,
                            expect.0,
                            expect.1
                        )));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

fn is_pgm(path: &Path) -> bool {
    path.extension()
        .map(|e| e.eq_ignore_ascii_case("pgm"))
        .unwrap_or(false)
}

/// Scan a directory of per-class subdirectories into a manifest.
pub fn scan_dataset(path: &Path) -> Result<DatasetManifest> {
    let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
    let mut class_dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    class_dirs.sort();
    if class_dirs.is_empty() {
        return Err(Error::Dataset(format!(
            "{} contains no class subdirectories",
            path.display()
        )));
    }

    let mut classes = Vec::with_capacity(class_dirs.len());
    for dir in class_dirs {
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut images: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_pgm(p))
            .collect();
        images.sort();
        if images.is_empty() {
            return Err(Error::Dataset(format!(
                "class directory {} contains no PGM files",
                dir.display()
            )));
        }
        let dimensions = images
            .iter()
            .map(|p| pgm_dimensions(p))
            .collect::<Result<Vec<_>>>()?;
        classes.push(ClassEntry { name, images, dimensions });
    }
    Ok(DatasetManifest { root: path.to_path_buf(), classes })
}

/// One image of a split, with its class and a root-relative label for logs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub class_id: u32,
    pub class_name: String,
    pub path: PathBuf,
    /// `class/file` form used in emitted logs, independent of the dataset's
    /// absolute location.
    pub rel: String,
}

/// A seeded train/test partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub seed: u64,
    pub n_train: usize,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

fn sample(manifest: &DatasetManifest, class_id: usize, image: usize) -> Sample {
    let class = &manifest.classes[class_id];
    let path = &class.images[image];
    let file = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Sample {
        class_id: class_id as u32,
        class_name: class.name.clone(),
        path: path.clone(),
        rel: format!("{}/{}", class.name, file),
    }
}

/// Partition every class into `n_train` training images and the remainder as
/// test images, using one seeded shuffle per class. Identical
/// `(manifest, seed, n_train)` always produce the identical split.
pub fn split(manifest: &DatasetManifest, seed: u64, n_train: usize) -> Result<Split> {
    if n_train == 0 {
        return Err(Error::Dataset("n_train must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class_id, class) in manifest.classes.iter().enumerate() {
        let n = class.images.len();
        if n_train >= n {
            return Err(Error::Dataset(format!(
                "class {} has no test samples: {} image(s) with n_train={}",
                class.name, n, n_train
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        // Inline Fisher-Yates on the raw ChaCha stream; self-contained so the
        // published SPLIT_RNG_VERSION stays stable across dependency bumps.
        for i in (1..n).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }
        let (chosen, rest) = order.split_at(n_train);
        let mut chosen = chosen.to_vec();
        let mut rest = rest.to_vec();
        chosen.sort_unstable();
        rest.sort_unstable();
        train.extend(chosen.iter().map(|&i| sample(manifest, class_id, i)));
        test.extend(rest.iter().map(|&i| sample(manifest, class_id, i)));
    }
    Ok(Split { seed, n_train, train, test })
}
