//! Diagnostic dumps: scaled label images, per-region histogram CSVs,
//! optional magnitude/phase plane exports, and per-scale confidence traces
//! of a probe against a trained model.

use std::fs;
use std::path::PathBuf;

use crate::archive::load_bank;
use crate::descriptors::{
    label_image, regional_histograms, DescriptorKind, FrequencyPair, LabelTarget, REGION_GRID,
};
use crate::error::{Error, Result};
use crate::harness::experiment::load_image;
use crate::imaging::save_pgm;
use crate::recognition::recognize_single_scale;
use crate::stft::compute_planes;

/// What to dump and where.
#[derive(Debug, Clone)]
pub struct InspectRequest {
    pub image: PathBuf,
    pub scale: usize,
    pub kind: DescriptorKind,
    /// 1-based (principal, correlated) indices for enhanced kinds.
    pub pair: Option<(usize, usize)>,
    /// 1-based plane index for single-plane kinds.
    pub plane: Option<usize>,
    /// Trained bank directory; enables the per-scale confidence trace.
    pub model: Option<PathBuf>,
    /// Also export min-max scaled magnitude and phase planes.
    pub export_planes: bool,
    pub output: PathBuf,
    pub resize: Option<(usize, usize)>,
}

fn target_for(req: &InspectRequest) -> Result<LabelTarget> {
    if req.kind.is_enhanced() {
        let (p, c) = req.pair.unwrap_or((1, 2));
        if p == 0 || c == 0 {
            return Err(Error::Parameter("pair indices are 1-based".into()));
        }
        Ok(LabelTarget::Pair(FrequencyPair::new(p - 1, c - 1)?))
    } else {
        let p = req.plane.unwrap_or(1);
        if p == 0 || p > 4 {
            return Err(Error::Parameter("plane index must be in 1..=4".into()));
        }
        Ok(LabelTarget::Plane(p - 1))
    }
}

/// Run the dump. Returns every file written.
pub fn inspect(req: &InspectRequest) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&req.output).map_err(|e| Error::io(&req.output, e))?;
    let image = load_image(&req.image, req.resize)?;
    let planes = compute_planes(&image, req.scale)?;
    let target = target_for(req)?;
    let labels = label_image(&planes, req.kind, target)?;

    let mut written = Vec::new();

    let label_path = req
        .output
        .join(format!("label_{}_s{}_{}.pgm", req.kind, req.scale, target.name()));
    save_pgm(&labels.to_gray(req.kind.label_bins()), &label_path)?;
    written.push(label_path);

    let hists = regional_histograms(&labels, req.kind.label_bins())?;
    for row in 0..REGION_GRID {
        for col in 0..REGION_GRID {
            let region = row * REGION_GRID + col;
            let mut csv = String::from("label,count\n");
            for (label, count) in hists.region(region).iter().enumerate() {
                csv.push_str(&format!("{label},{count}\n"));
            }
            let path = req.output.join(format!("region_r{row}c{col}.csv"));
            fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }

    if req.export_planes {
        for i in 0..4 {
            let mag_path = req.output.join(format!("magnitude_s{}_u{}.pgm", req.scale, i + 1));
            save_pgm(&planes.magnitude_image(i), &mag_path)?;
            written.push(mag_path);
            let phase_path = req.output.join(format!("phase_s{}_u{}.pgm", req.scale, i + 1));
            save_pgm(&planes.phase_image(i), &phase_path)?;
            written.push(phase_path);
        }
    }

    if let Some(model_dir) = &req.model {
        let bank = load_bank(model_dir)?;
        if bank.kind() != req.kind {
            return Err(Error::Archive(format!(
                "model at {} holds {}, request asks for {}",
                model_dir.display(),
                bank.kind(),
                req.kind
            )));
        }
        let mut csv = String::from("scale,top_class,confidence\n");
        for scale in bank.scales() {
            let outcome = recognize_single_scale(&bank, scale, &image)?;
            csv.push_str(&format!(
                "{},{},{:.6}\n",
                scale,
                bank.class_names()[outcome.class],
                outcome.confidence
            ));
        }
        let path = req.output.join("confidences.csv");
        fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::GrayImage;
    use crate::testutil::{seeded_rng, unit_f64};

    #[test]
    fn label_dump_writes_one_pgm_and_sixteen_csvs() {
        let tmp = tempfile::tempdir().unwrap();
        let mut rng = seeded_rng(71);
        let samples: Vec<f64> = (0..32 * 32).map(|_| unit_f64(&mut rng)).collect();
        let img = GrayImage::new(32, 32, samples).unwrap();
        let img_path = tmp.path().join("probe.pgm");
        save_pgm(&img, &img_path).unwrap();

        let req = InspectRequest {
            image: img_path,
            scale: 5,
            kind: DescriptorKind::Elmd,
            pair: Some((1, 2)),
            plane: None,
            model: None,
            export_planes: false,
            output: tmp.path().join("dump"),
            resize: None,
        };
        let written = inspect(&req).unwrap();
        let pgms = written.iter().filter(|p| p.extension().unwrap() == "pgm").count();
        let csvs = written.iter().filter(|p| p.extension().unwrap() == "csv").count();
        assert_eq!(pgms, 1);
        assert_eq!(csvs, 16);

        // Histogram totals equal sub-region pixel counts.
        for path in written.iter().filter(|p| p.extension().unwrap() == "csv") {
            let text = fs::read_to_string(path).unwrap();
            let total: u64 = text
                .lines()
                .skip(1)
                .map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap())
                .sum();
            assert_eq!(total, 8 * 8);
        }
    }

    #[test]
    fn confidence_trace_has_one_row_per_scale() {
        use crate::harness::config::{ExperimentConfig, ScaleMode};
        use crate::harness::experiment::train;

        let tmp = tempfile::tempdir().unwrap();
        let data = tmp.path().join("data");
        let mut rng = seeded_rng(72);
        for class in 0..2 {
            let dir = data.join(format!("c{class}"));
            fs::create_dir_all(&dir).unwrap();
            for i in 0..3 {
                let bias = 0.2 + 0.5 * class as f64;
                let samples: Vec<f64> = (0..24 * 24)
                    .map(|_| (bias + 0.3 * unit_f64(&mut rng)).clamp(0.0, 1.0))
                    .collect();
                save_pgm(
                    &GrayImage::new(24, 24, samples).unwrap(),
                    &dir.join(format!("s{i}.pgm")),
                )
                .unwrap();
            }
        }
        let mut config = ExperimentConfig::default();
        config.dataset = data.clone();
        config.output = tmp.path().join("out");
        config.n_train = 2;
        config.kinds = vec![DescriptorKind::Lmd];
        config.modes = vec![ScaleMode::Competition];
        config.apply("scales", "5,7").unwrap();
        train(&config).unwrap();

        let req = InspectRequest {
            image: data.join("c0/s0.pgm"),
            scale: 5,
            kind: DescriptorKind::Lmd,
            pair: None,
            plane: Some(1),
            model: Some(config.output.join("model_lmd")),
            export_planes: false,
            output: tmp.path().join("dump"),
            resize: None,
        };
        let written = inspect(&req).unwrap();
        let trace = written.iter().find(|p| p.ends_with("confidences.csv")).unwrap();
        let text = fs::read_to_string(trace).unwrap();
        // Header plus one row per trained scale.
        assert_eq!(text.lines().count(), 1 + 2);
        assert!(text.lines().nth(1).unwrap().starts_with("5,"));
        assert!(text.lines().nth(2).unwrap().starts_with("7,"));
    }
}
