//! Experiment configuration: a plain-text key=value file, with every key
//! overridable by a command-line flag of the same name. Defaults follow the
//! reference regime: single scale 11, competition scales 11..31 step 2,
//! 48 valid bins for the single-plane kinds and 16 for the enhanced kinds,
//! lambda 0.01, Gaussian STFT window.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::descriptors::DescriptorKind;
use crate::error::{Error, Result};
use crate::imaging::DegradationSpec;

/// How probes are scored: at the fixed single scale, or by the multi-scale
/// competition over the full scale range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    Single,
    Competition,
}

impl ScaleMode {
    /// Column suffix in result tables: `s` for single, `c` for competition.
    pub fn suffix(self) -> &'static str {
        match self {
            ScaleMode::Single => "s",
            ScaleMode::Competition => "c",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "single" => Ok(ScaleMode::Single),
            "competition" => Ok(ScaleMode::Competition),
            other => Err(Error::Config(format!("unknown scale mode `{other}`"))),
        }
    }
}

/// One row of the degradation protocol; `spec: None` is the clean pass.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationEntry {
    pub label: String,
    pub spec: Option<DegradationSpec>,
}

impl DegradationEntry {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "clean" {
            return Ok(DegradationEntry { label: "clean".into(), spec: None });
        }
        let spec = DegradationSpec::parse(text)?;
        Ok(DegradationEntry { label: spec.label(), spec: Some(spec) })
    }
}

/// Everything a training or evaluation run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    pub seed: u64,
    pub n_train: usize,
    pub kinds: Vec<DescriptorKind>,
    pub modes: Vec<ScaleMode>,
    pub single_scale: usize,
    pub competition_scales: Vec<usize>,
    pub valid_bins: BTreeMap<DescriptorKind, usize>,
    pub lambda: f64,
    pub degradations: Vec<DegradationEntry>,
    pub output: PathBuf,
    pub resize: Option<(usize, usize)>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: PathBuf::new(),
            seed: 1,
            n_train: 5,
            kinds: DescriptorKind::ALL.to_vec(),
            modes: vec![ScaleMode::Single, ScaleMode::Competition],
            single_scale: 11,
            competition_scales: (11..=31).step_by(2).collect(),
            valid_bins: DescriptorKind::ALL
                .into_iter()
                .map(|k| (k, k.default_valid_bins()))
                .collect(),
            lambda: 0.01,
            degradations: vec![
                DegradationEntry::parse("lowres(2)").unwrap(),
                DegradationEntry::parse("gaussian(3,7)").unwrap(),
                DegradationEntry::parse("motion(7,45)").unwrap(),
                DegradationEntry::parse("lowres(4)").unwrap(),
            ],
            output: PathBuf::from("out"),
            resize: None,
        }
    }
}

/// Split a comma list, but only at depth zero so `gaussian(3,7)` stays whole.
fn split_top_level(text: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut current = String::new();
    for ch in text.chars() {
        match ch {
            '(' => {
                depth += 1;
                current.push(ch);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                current.push(ch);
            }
            ',' if depth == 0 => {
                parts.push(current.trim().to_string());
                current.clear();
            }
            _ => current.push(ch),
        }
    }
    if !current.trim().is_empty() {
        parts.push(current.trim().to_string());
    }
    parts
}

fn parse_scales(text: &str) -> Result<Vec<usize>> {
    let bad = |detail: String| Error::Config(format!("scales `{text}`: {detail}"));
    let mut scales: Vec<usize> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step".into()));
        }
        let nums: Vec<usize> = parts
            .iter()
            .map(|p| p.trim().parse().map_err(|_| bad(format!("`{p}` is not an integer"))))
            .collect::<Result<_>>()?;
        if nums[2] == 0 {
            return Err(bad("step must be positive".into()));
        }
        (nums[0]..=nums[1]).step_by(nums[2]).collect()
    } else {
        split_top_level(text)
            .iter()
            .map(|p| p.parse().map_err(|_| bad(format!("`{p}` is not an integer"))))
            .collect::<Result<_>>()?
    };
    if scales.is_empty() {
        return Err(bad("no scales given".into()));
    }
    for s in &scales {
        if *s < 3 || *s % 2 == 0 {
            return Err(bad(format!("scale {s} must be odd and >= 3")));
        }
    }
    // Keep scales ascending so tie-breaking always favors the smallest.
    scales.sort_unstable();
    scales.dedup();
    Ok(scales)
}

fn parse_resize(text: &str) -> Result<Option<(usize, usize)>> {
    if text == "none" {
        return Ok(None);
    }
    let (w, h) = text
        .split_once('x')
        .ok_or_else(|| Error::Config(format!("resize `{text}` is not WxH")))?;
    let w = w.trim().parse().map_err(|_| Error::Config(format!("resize width `{w}`")))?;
    let h = h.trim().parse().map_err(|_| Error::Config(format!("resize height `{h}`")))?;
    if w == 0 || h == 0 {
        return Err(Error::Config("resize target must be positive".into()));
    }
    Ok(Some((w, h)))
}

impl ExperimentConfig {
    /// Apply one key=value assignment.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "dataset" => self.dataset = PathBuf::from(value),
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("seed `{value}` is not an integer")))?
            }
            "n_train" => {
                self.n_train = value
                    .parse()
                    .map_err(|_| Error::Config(format!("n_train `{value}` is not an integer")))?
            }
            "kinds" => {
                self.kinds = split_top_level(value)
                    .iter()
                    .map(|k| DescriptorKind::parse(k))
                    .collect::<Result<_>>()?;
                if self.kinds.is_empty() {
                    return Err(Error::Config("kinds list is empty".into()));
                }
            }
            "modes" => {
                self.modes = split_top_level(value)
                    .iter()
                    .map(|m| ScaleMode::parse(m))
                    .collect::<Result<_>>()?;
                if self.modes.is_empty() {
                    return Err(Error::Config("modes list is empty".into()));
                }
            }
            "single_scale" => {
                let s: usize = value
                    .parse()
                    .map_err(|_| Error::Config(format!("single_scale `{value}`")))?;
                if s < 3 || s % 2 == 0 {
                    return Err(Error::Config(format!("single_scale {s} must be odd and >= 3")));
                }
                self.single_scale = s;
            }
            "scales" => self.competition_scales = parse_scales(value)?,
            "valid_bins_lmd" | "valid_bins_lpd" | "valid_bins_elmd" | "valid_bins_elpd" => {
                let kind = DescriptorKind::parse(&key["valid_bins_".len()..])?;
                let v: usize =
                    value.parse().map_err(|_| Error::Config(format!("{key} `{value}`")))?;
                if v == 0 || v > kind.label_bins() {
                    return Err(Error::Config(format!(
                        "{key} must be in 1..={}",
                        kind.label_bins()
                    )));
                }
                self.valid_bins.insert(kind, v);
            }
            "lambda" => {
                let l: f64 =
                    value.parse().map_err(|_| Error::Config(format!("lambda `{value}`")))?;
                if !l.is_finite() || l <= 0.0 {
                    return Err(Error::Config("lambda must be > 0".into()));
                }
                self.lambda = l;
            }
            "degradations" => {
                self.degradations = split_top_level(value)
                    .iter()
                    .map(|d| DegradationEntry::parse(d))
                    .collect::<Result<_>>()?;
                if self.degradations.is_empty() {
                    return Err(Error::Config("degradations list is empty".into()));
                }
            }
            "output" => self.output = PathBuf::from(value),
            "resize" => self.resize = parse_resize(value)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Build from an optional config file plus override assignments, applied
    /// in that order.
    pub fn from_sources(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for (number, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::Config(format!(
                        "{}:{}: `{line}` is not key=value",
                        path.display(),
                        number + 1
                    ))
                })?;
                config.apply(key.trim(), value)?;
            }
        }
        for (key, value) in overrides {
            config.apply(key, value)?;
        }
        if config.dataset.as_os_str().is_empty() {
            return Err(Error::Config("dataset path is required".into()));
        }
        Ok(config)
    }

    /// Valid-bin count for a kind (defaults filled at construction).
    pub fn valid_bins_for(&self, kind: DescriptorKind) -> usize {
        *self.valid_bins.get(&kind).unwrap_or(&kind.default_valid_bins())
    }

    /// The union of scales that banks must be trained at to serve the
    /// configured modes: the single scale, plus the competition range when
    /// competition is requested.
    pub fn bank_scales(&self) -> Vec<usize> {
        let mut scales = Vec::new();
        if self.modes.contains(&ScaleMode::Single) {
            scales.push(self.single_scale);
        }
        if self.modes.contains(&ScaleMode::Competition) {
            scales.extend(&self.competition_scales);
        }
        scales.sort_unstable();
        scales.dedup();
        scales
    }
}
