//! On-disk model archive: one directory per trained scale bank.
//!
//! Layout:
//!   manifest.txt            key=value: version, kind, scales, lambda,
//!                           valid_bins, layout, classes
//!   merge_s{S}_{name}.txt   one merge map per scale and plane/pair
//!   dict_s{S}.bin           binary dictionary per scale
//!
//! The dictionary format is an 8-byte magic, little-endian u32 dimension and
//! column count, the column-major f64 matrix, then one u32 class id per
//! column. Writes are byte-deterministic so retraining on identical inputs
//! reproduces identical archives.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::binmerge::MergeMap;
use crate::descriptors::{DescriptorKind, LAYOUT_VERSION};
use crate::error::{Error, Result};
use crate::recognition::{Dictionary, ScaleBank, ScaleModel};

const MAGIC: &[u8; 8] = b"LFDBANK1";
const MANIFEST: &str = "manifest.txt";

fn merge_file_name(scale: usize, target_name: &str) -> String {
    format!("merge_s{scale}_{target_name}.txt")
}

fn dict_file_name(scale: usize) -> String {
    format!("dict_s{scale}.bin")
}

/// Write a bank to `dir`, creating it if needed.
pub fn save_bank(bank: &ScaleBank, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    for name in bank.class_names() {
        if name.contains(',') || name.contains('\n') {
            return Err(Error::Archive(format!(
                "class name `{name}` contains a comma or newline and cannot be stored"
            )));
        }
    }
    let scales: Vec<String> = bank.scales().iter().map(|s| s.to_string()).collect();
    let manifest = format!(
        "version=1\nkind={}\nscales={}\nlambda={}\nvalid_bins={}\nlayout={}\nclasses={}\n",
        bank.kind(),
        scales.join(","),
        bank.lambda(),
        bank.valid_bins(),
        LAYOUT_VERSION,
        bank.class_names().join(","),
    );
    let manifest_path = dir.join(MANIFEST);
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;

    let targets = bank.kind().targets();
    for model in bank.models() {
        for (map, target) in model.merge_maps().iter().zip(&targets) {
            let path = dir.join(merge_file_name(model.scale(), &target.name()));
            fs::write(&path, map.to_text()).map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join(dict_file_name(model.scale()));
        fs::write(&path, encode_dictionary(model.dictionary())).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn encode_dictionary(dict: &Dictionary) -> Vec<u8> {
    let d = dict.dimension();
    let n = dict.len();
    let mut out = Vec::with_capacity(16 + d * n * 8 + n * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    // nalgebra stores column-major, matching the file layout.
    for v in dict.matrix().as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for id in dict.class_ids() {
        out.extend_from_slice(&id.to_le_bytes());
    }
    out
}

fn decode_dictionary(bytes: &[u8], path: &Path) -> Result<Dictionary> {
    let fail = |detail: &str| Error::parse(path, detail);
    if bytes.len() < 16 {
        return Err(fail("file shorter than the fixed header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(fail("bad magic; not a dictionary file"));
    }
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = 16 + d * n * 8 + n * 4;
    if bytes.len() != expected {
        return Err(fail(&format!(
            "expected {expected} bytes for a {d}x{n} dictionary, found {}",
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(d * n);
    let mut off = 16;
    for _ in 0..d * n {
        values.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
        off += 8;
    }
    let mut class_ids = Vec::with_capacity(n);
    for _ in 0..n {
        class_ids.push(u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()));
        off += 4;
    }
    Dictionary::from_matrix(DMatrix::from_column_slice(d, n, &values), class_ids)
}

fn manifest_value<'a>(pairs: &'a [(String, String)], key: &str, path: &Path) -> Result<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::parse(path, format!("manifest is missing key `{key}`")))
}

/// Load a bank previously written by [`save_bank`]. The ridge factorization
/// is rebuilt from the stored dictionary.
pub fn load_bank(dir: &Path) -> Result<ScaleBank> {
    let manifest_path = dir.join(MANIFEST);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let pairs: Vec<(String, String)> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::parse(&manifest_path, format!("line `{l}` is not key=value")))
        })
        .collect::<Result<_>>()?;

    let version = manifest_value(&pairs, "version", &manifest_path)?;
    if version != "1" {
        return Err(Error::Archive(format!("unsupported archive version `{version}`")));
    }
    let kind = DescriptorKind::parse(manifest_value(&pairs, "kind", &manifest_path)?)?;
    let layout = manifest_value(&pairs, "layout", &manifest_path)?;
    if layout != LAYOUT_VERSION {
        return Err(Error::Archive(format!(
            "archive uses feature layout `{layout}`, this build expects `{LAYOUT_VERSION}`"
        )));
    }
    let lambda: f64 = manifest_value(&pairs, "lambda", &manifest_path)?
        .parse()
        .map_err(|_| Error::parse(&manifest_path, "lambda is not a number"))?;
    let valid_bins: usize = manifest_value(&pairs, "valid_bins", &manifest_path)?
        .parse()
        .map_err(|_| Error::parse(&manifest_path, "valid_bins is not an integer"))?;
    let scales: Vec<usize> = manifest_value(&pairs, "scales", &manifest_path)?
        .split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::parse(&manifest_path, format!("scale `{t}` is not an integer")))
        })
        .collect::<Result<_>>()?;
    let class_names: Vec<String> = manifest_value(&pairs, "classes", &manifest_path)?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();

    let targets = kind.targets();
    let mut models = Vec::with_capacity(scales.len());
    for scale in scales {
        let mut maps = Vec::with_capacity(targets.len());
        for target in &targets {
            let path = dir.join(merge_file_name(scale, &target.name()));
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            maps.push(MergeMap::from_text(&text).map_err(|detail| Error::parse(&path, detail))?);
        }
        let dict_path = dir.join(dict_file_name(scale));
        let bytes = fs::read(&dict_path).map_err(|e| Error::io(&dict_path, e))?;
        let dictionary = decode_dictionary(&bytes, &dict_path)?;
        models.push(ScaleModel::new(scale, maps, dictionary, lambda)?);
    }
    ScaleBank::new(kind, lambda, valid_bins, class_names, models)
}

/// Conventional bank directory for a kind under an experiment output root.
pub fn bank_dir(root: &Path, kind: DescriptorKind) -> PathBuf {
    root.join(format!("model_{kind}"))
}
