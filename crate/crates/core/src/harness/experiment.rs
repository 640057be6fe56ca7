//! Training of scale banks and the degradation evaluation protocol.
//!
//! Training computes, per scale: STFT planes of every training image, label
//! images for every plane/pair of every requested kind, pooled global label
//! histograms, learned merge maps, assembled features, and the class-labeled
//! dictionary. Evaluation degrades every held-out probe, classifies it under
//! every requested kind and scale mode, logs one prediction row per probe,
//! and derives the accuracy table from the log.
//!
//! Work is parallelized over scales (training) and probes (evaluation);
//! results are collected in deterministic order, so thread count never
//! changes output bytes.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::archive::{bank_dir, load_bank, save_bank};
use crate::binmerge::learn_merge_map;
use crate::descriptors::{
    assemble_feature, label_images, regional_histograms, DescriptorKind, FeatureLayout,
    FeatureVector, LabelImage, RegionalHistogramSet,
};
use crate::error::{Error, Result};
use crate::harness::config::{DegradationEntry, ExperimentConfig, ScaleMode};
use crate::harness::dataset::{scan_dataset, split, Split};
use crate::imaging::{degrade, load_pgm, resize_center_crop, GrayImage};
use crate::recognition::{
    recognize_single_scale, select_winner, Dictionary, ScaleBank, ScaleModel, ScaleOutcome,
};
use crate::stft::compute_planes;

/// Load an image, applying the configured resize if any.
pub fn load_image(path: &Path, resize: Option<(usize, usize)>) -> Result<GrayImage> {
    let image = load_pgm(path)?;
    match resize {
        Some((w, h)) if (image.width(), image.height()) != (w, h) => {
            resize_center_crop(&image, w, h)
        }
        _ => Ok(image),
    }
}

fn train_scale_model(
    kind: DescriptorKind,
    scale: usize,
    valid_bins: usize,
    lambda: f64,
    labels_per_image: &[Vec<LabelImage>],
    class_ids: &[u32],
) -> Result<ScaleModel> {
    let bins = kind.label_bins();
    let plane_count = kind.plane_count();

    // One merge map per plane/pair, learned from labels pooled over all
    // training images.
    let mut maps = Vec::with_capacity(plane_count);
    for target in 0..plane_count {
        let mut global = vec![0u64; bins];
        for labels in labels_per_image {
            for label in labels[target].labels() {
                global[*label as usize] += 1;
            }
        }
        maps.push(learn_merge_map(&global, valid_bins)?);
    }

    let layout = FeatureLayout { kind, scale, valid_bins };
    let features: Vec<FeatureVector> = labels_per_image
        .iter()
        .map(|labels| {
            let hists: Vec<RegionalHistogramSet> = labels
                .iter()
                .map(|li| regional_histograms(li, bins))
                .collect::<Result<_>>()?;
            assemble_feature(&hists, &maps, layout)
        })
        .collect::<Result<_>>()?;

    let dictionary = Dictionary::from_features(&features, class_ids.to_vec())?;
    ScaleModel::new(scale, maps, dictionary, lambda)
}

/// Train one bank per configured kind and write the model archives under the
/// configured output directory. Returns the archive directories.
pub fn train(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let manifest = scan_dataset(&config.dataset)?;
    manifest.validate_dimensions(config.resize)?;
    let partition = split(&manifest, config.seed, config.n_train)?;

    let class_ids: Vec<u32> = partition.train.iter().map(|s| s.class_id).collect();
    let train_images: Vec<GrayImage> = partition
        .train
        .iter()
        .map(|s| load_image(&s.path, config.resize))
        .collect::<Result<_>>()?;

    let scales = config.bank_scales();
    if scales.is_empty() {
        return Err(Error::Config("no scales to train: modes list is empty".into()));
    }

    // Per scale: compute planes once, then derive every kind's models.
    let per_scale: Vec<Vec<(DescriptorKind, ScaleModel)>> = scales
        .par_iter()
        .map(|&scale| -> Result<Vec<(DescriptorKind, ScaleModel)>> {
            let planes = train_images
                .iter()
                .map(|img| compute_planes(img, scale))
                .collect::<Result<Vec<_>>>()?;
            let mut models = Vec::with_capacity(config.kinds.len());
            for &kind in &config.kinds {
                let labels_per_image: Vec<Vec<LabelImage>> =
                    planes.iter().map(|p| label_images(p, kind)).collect();
                let model = train_scale_model(
                    kind,
                    scale,
                    config.valid_bins_for(kind),
                    config.lambda,
                    &labels_per_image,
                    &class_ids,
                )?;
                models.push((kind, model));
            }
            Ok(models)
        })
        .collect::<Result<_>>()?;

    let mut written = Vec::with_capacity(config.kinds.len());
    for &kind in &config.kinds {
        let models: Vec<ScaleModel> = per_scale
            .iter()
            .map(|scale_models| {
                scale_models
                    .iter()
                    .find(|(k, _)| *k == kind)
                    .map(|(_, m)| m.clone())
                    .expect("every scale trains every kind")
            })
            .collect();
        let bank = ScaleBank::new(
            kind,
            config.lambda,
            config.valid_bins_for(kind),
            manifest.class_names(),
            models,
        )?;
        let dir = bank_dir(&config.output, kind);
        save_bank(&bank, &dir)?;
        written.push(dir);
    }
    Ok(written)
}

/// A probe ready for evaluation.
#[derive(Debug, Clone)]
pub struct ProbeImage {
    pub rel: String,
    pub class_id: u32,
    pub class_name: String,
    pub image: GrayImage,
}

/// One line of the per-probe prediction log.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub probe: String,
    pub degradation: String,
    pub kind: DescriptorKind,
    pub mode: ScaleMode,
    pub predicted: String,
    pub truth: String,
    pub winning_scale: usize,
    pub confidence: f64,
}

/// Accuracy percentages: one row per degradation, one column per
/// kind and scale-mode variant, plus a trailing average row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl ResultsTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("degradation");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (label, cells) in &self.rows {
            out.push_str(label);
            for v in cells {
                out.push_str(&format!(",{v:.2}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_aligned_text(&self) -> String {
        let label_width = self
            .rows
            .iter()
            .map(|(l, _)| l.len())
            .chain(std::iter::once("degradation".len()))
            .max()
            .unwrap_or(0);
        let col_width = self.columns.iter().map(|c| c.len()).max().unwrap_or(0).max(6);
        let mut out = String::new();
        out.push_str(&format!("{:<label_width$}", "degradation"));
        for c in &self.columns {
            out.push_str(&format!("  {c:>col_width$}"));
        }
        out.push('\n');
        for (label, cells) in &self.rows {
            out.push_str(&format!("{label:<label_width$}"));
            for v in cells {
                out.push_str(&format!("  {v:>col_width$.2}"));
            }
            out.push('\n');
        }
        out
    }
}

fn column_name(kind: DescriptorKind, mode: ScaleMode) -> String {
    format!("{}{}", kind, mode.suffix())
}

/// Derive the accuracy table from the prediction log; cells are
/// `100 * correct / total` per (degradation, column).
pub fn table_from_predictions(
    predictions: &[PredictionRow],
    degradations: &[DegradationEntry],
    kinds: &[DescriptorKind],
    modes: &[ScaleMode],
) -> ResultsTable {
    let mut columns = Vec::new();
    for &kind in kinds {
        for &mode in modes {
            columns.push((kind, mode));
        }
    }
    let mut rows = Vec::new();
    for entry in degradations {
        let cells: Vec<f64> = columns
            .iter()
            .map(|(kind, mode)| {
                let (mut correct, mut total) = (0usize, 0usize);
                for row in predictions {
                    if row.degradation == entry.label && row.kind == *kind && row.mode == *mode {
                        total += 1;
                        if row.predicted == row.truth {
                            correct += 1;
                        }
                    }
                }
                if total == 0 {
                    0.0
                } else {
                    100.0 * correct as f64 / total as f64
                }
            })
            .collect();
        rows.push((entry.label.clone(), cells));
    }
    let averages: Vec<f64> = (0..columns.len())
        .map(|c| {
            let sum: f64 = rows.iter().map(|(_, cells)| cells[c]).sum();
            sum / rows.len().max(1) as f64
        })
        .collect();
    rows.push(("average".into(), averages));
    ResultsTable {
        columns: columns.iter().map(|(k, m)| column_name(*k, *m)).collect(),
        rows,
    }
}

/// Classify every degraded probe under every kind and mode. The banks decide
/// the kinds; scale outcomes are shared between the single and competition
/// modes of a probe.
pub fn evaluate_probes(
    banks: &[ScaleBank],
    probes: &[ProbeImage],
    degradations: &[DegradationEntry],
    modes: &[ScaleMode],
    single_scale: usize,
    competition_scales: &[usize],
) -> Result<Vec<PredictionRow>> {
    for bank in banks {
        if modes.contains(&ScaleMode::Single) && bank.model(single_scale).is_none() {
            return Err(Error::Archive(format!(
                "bank for {} was not trained at single scale {single_scale}",
                bank.kind()
            )));
        }
        if modes.contains(&ScaleMode::Competition) {
            for s in competition_scales {
                if bank.model(*s).is_none() {
                    return Err(Error::Archive(format!(
                        "bank for {} was not trained at competition scale {s}",
                        bank.kind()
                    )));
                }
            }
        }
    }

    let mut all_rows = Vec::new();
    for entry in degradations {
        let rows_per_probe: Vec<Vec<PredictionRow>> = probes
            .par_iter()
            .map(|probe| -> Result<Vec<PredictionRow>> {
                let image = match &entry.spec {
                    Some(spec) => degrade(&probe.image, spec)?,
                    None => probe.image.clone(),
                };
                let mut rows = Vec::new();
                for bank in banks {
                    // Compute each needed scale once per probe and kind.
                    let mut needed: Vec<usize> = Vec::new();
                    if modes.contains(&ScaleMode::Single) {
                        needed.push(single_scale);
                    }
                    if modes.contains(&ScaleMode::Competition) {
                        needed.extend(competition_scales);
                    }
                    needed.sort_unstable();
                    needed.dedup();
                    let outcomes: Vec<ScaleOutcome> = needed
                        .iter()
                        .map(|&s| recognize_single_scale(bank, s, &image))
                        .collect::<Result<_>>()?;
                    let outcome_at =
                        |s: usize| outcomes.iter().find(|o| o.scale == s).expect("computed above");

                    for &mode in modes {
                        let (class, scale, confidence) = match mode {
                            ScaleMode::Single => {
                                let o = outcome_at(single_scale);
                                (o.class, o.scale, o.confidence)
                            }
                            ScaleMode::Competition => {
                                let competing: Vec<ScaleOutcome> = competition_scales
                                    .iter()
                                    .map(|&s| outcome_at(s).clone())
                                    .collect();
                                let w = select_winner(&competing).expect("non-empty scales");
                                (competing[w].class, competing[w].scale, competing[w].confidence)
                            }
                        };
                        rows.push(PredictionRow {
                            probe: probe.rel.clone(),
                            degradation: entry.label.clone(),
                            kind: bank.kind(),
                            mode,
                            predicted: bank.class_names()[class].clone(),
                            truth: probe.class_name.clone(),
                            winning_scale: scale,
                            confidence,
                        });
                    }
                }
                Ok(rows)
            })
            .collect::<Result<_>>()?;
        all_rows.extend(rows_per_probe.into_iter().flatten());
    }
    Ok(all_rows)
}

/// Everything an evaluation run produces.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub table: ResultsTable,
    pub predictions: Vec<PredictionRow>,
    pub written: Vec<PathBuf>,
}

fn predictions_csv(rows: &[PredictionRow]) -> String {
    let mut out =
        String::from("probe,degradation,kind,mode,predicted,true,winning_scale,confidence\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{:.6}\n",
            r.probe,
            r.degradation,
            r.kind,
            match r.mode {
                ScaleMode::Single => "single",
                ScaleMode::Competition => "competition",
            },
            r.predicted,
            r.truth,
            r.winning_scale,
            r.confidence
        ));
    }
    out
}

/// Load the trained banks, run the full degradation protocol on the held-out
/// test split, and write `predictions.csv`, `results.csv`, and `results.txt`
/// under the configured output directory.
pub fn evaluate(config: &ExperimentConfig, archive_root: &Path) -> Result<EvalReport> {
    let manifest = scan_dataset(&config.dataset)?;
    manifest.validate_dimensions(config.resize)?;
    let partition = split(&manifest, config.seed, config.n_train)?;
    evaluate_split(config, archive_root, &partition, false)
}

/// As [`evaluate`] but scoring the training images themselves; used for
/// self-recognition sanity runs.
pub fn evaluate_on_training_set(config: &ExperimentConfig, archive_root: &Path) -> Result<EvalReport> {
    let manifest = scan_dataset(&config.dataset)?;
    manifest.validate_dimensions(config.resize)?;
    let partition = split(&manifest, config.seed, config.n_train)?;
    evaluate_split(config, archive_root, &partition, true)
}

fn evaluate_split(
    config: &ExperimentConfig,
    archive_root: &Path,
    partition: &Split,
    use_train_probes: bool,
) -> Result<EvalReport> {
    let banks: Vec<ScaleBank> = config
        .kinds
        .iter()
        .map(|&kind| load_bank(&bank_dir(archive_root, kind)))
        .collect::<Result<_>>()?;

    let samples = if use_train_probes { &partition.train } else { &partition.test };
    let probes: Vec<ProbeImage> = samples
        .iter()
        .map(|s| {
            Ok(ProbeImage {
                rel: s.rel.clone(),
                class_id: s.class_id,
                class_name: s.class_name.clone(),
                image: load_image(&s.path, config.resize)?,
            })
        })
        .collect::<Result<_>>()?;

    let predictions = evaluate_probes(
        &banks,
        &probes,
        &config.degradations,
        &config.modes,
        config.single_scale,
        &config.competition_scales,
    )?;
    let table =
        table_from_predictions(&predictions, &config.degradations, &config.kinds, &config.modes);

    fs::create_dir_all(&config.output).map_err(|e| Error::io(&config.output, e))?;
    let mut written = Vec::new();
    for (name, contents) in [
        ("predictions.csv", predictions_csv(&predictions)),
        ("results.csv", table.to_csv()),
        ("results.txt", table.to_aligned_text()),
    ] {
        let path = config.output.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(EvalReport { table, predictions, written })
}
