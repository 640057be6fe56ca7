//! Local frequency descriptors: 8-bit single-plane codes and 12-bit
//! joint space–frequency codes, regional histogram pooling, and feature
//! vector assembly.
//!
//! A single-plane code compares a pixel's response against its eight ring
//! neighbors on one frequency plane. An enhanced code prepends four
//! comparisons against the cross neighbors on a second (correlated) plane,
//! capturing the correlation between frequencies at the same location.
//! Magnitude variants compare response moduli with `>=`; phase variants
//! compare phase quadrants for equality.

use crate::binmerge::{apply_merge, MergeMap};
use crate::error::{Error, Result};
use crate::imaging::GrayImage;
use crate::stft::{compute_planes, Plane, StftPlanes, FREQUENCY_COUNT};

/// Eight ring neighbors in (row, col) offsets, clockwise from top-left.
pub const EIGHT_RING: [(i64, i64); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
];

/// Four cross neighbors in (row, col) offsets: up, right, down, left.
pub const FOUR_CROSS: [(i64, i64); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

/// Number of sub-regions per label image (a 4x4 grid).
pub const REGION_GRID: usize = 4;
pub const REGION_COUNT: usize = REGION_GRID * REGION_GRID;

/// Version tag for the fixed feature layout (plane/pair-major, then region
/// row-major, then valid bin). Recorded in model manifests so features from
/// different runs are comparable.
pub const LAYOUT_VERSION: &str = "v1";

/// The four descriptor variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DescriptorKind {
    /// Local magnitude descriptor: 8-bit codes per single plane.
    Lmd,
    /// Local phase descriptor: 8-bit codes per single plane.
    Lpd,
    /// Enhanced magnitude descriptor: 12-bit codes per ordered plane pair.
    Elmd,
    /// Enhanced phase descriptor: 12-bit codes per ordered plane pair.
    Elpd,
}

impl DescriptorKind {
    pub const ALL: [DescriptorKind; 4] = [
        DescriptorKind::Lmd,
        DescriptorKind::Lpd,
        DescriptorKind::Elmd,
        DescriptorKind::Elpd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DescriptorKind::Lmd => "lmd",
            DescriptorKind::Lpd => "lpd",
            DescriptorKind::Elmd => "elmd",
            DescriptorKind::Elpd => "elpd",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "lmd" => Ok(DescriptorKind::Lmd),
            "lpd" => Ok(DescriptorKind::Lpd),
            "elmd" => Ok(DescriptorKind::Elmd),
            "elpd" => Ok(DescriptorKind::Elpd),
            other => Err(Error::Config(format!("unknown descriptor kind `{other}`"))),
        }
    }

    pub fn is_enhanced(self) -> bool {
        matches!(self, DescriptorKind::Elmd | DescriptorKind::Elpd)
    }

    pub fn uses_magnitude(self) -> bool {
        matches!(self, DescriptorKind::Lmd | DescriptorKind::Elmd)
    }

    /// Code width in bits: 8 for single-plane kinds, 12 for enhanced kinds.
    pub fn bits(self) -> usize {
        if self.is_enhanced() {
            12
        } else {
            8
        }
    }

    /// Raw label bin count: 256 or 4096.
    pub fn label_bins(self) -> usize {
        1 << self.bits()
    }

    /// Feature planes per image: 4 single planes or 12 ordered pairs.
    pub fn plane_count(self) -> usize {
        if self.is_enhanced() {
            FrequencyPair::all().len()
        } else {
            FREQUENCY_COUNT
        }
    }

    /// Default learned valid-bin count: 48 for single-plane kinds, 16 for
    /// enhanced kinds; both give 16 x planes x V = 3072 feature dimensions.
    pub fn default_valid_bins(self) -> usize {
        if self.is_enhanced() {
            16
        } else {
            48
        }
    }

    /// The canonical plane/pair enumeration for this kind.
    pub fn targets(self) -> Vec<LabelTarget> {
        if self.is_enhanced() {
            FrequencyPair::all().into_iter().map(LabelTarget::Pair).collect()
        } else {
            (0..FREQUENCY_COUNT).map(LabelTarget::Plane).collect()
        }
    }
}

impl std::fmt::Display for DescriptorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An ordered frequency pair: the principal plane contributes the eight ring
/// bits, the correlated plane the four cross bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrequencyPair {
    pub principal: usize,
    pub correlated: usize,
}

impl FrequencyPair {
    pub fn new(principal: usize, correlated: usize) -> Result<Self> {
        if principal >= FREQUENCY_COUNT || correlated >= FREQUENCY_COUNT {
            return Err(Error::Parameter(format!(
                "frequency index out of range in pair ({principal},{correlated})"
            )));
        }
        if principal == correlated {
            return Err(Error::Parameter(
                "principal and correlated frequencies must differ".into(),
            ));
        }
        Ok(FrequencyPair { principal, correlated })
    }

    /// All 12 ordered pairs of distinct frequencies, principal-major.
    pub fn all() -> Vec<FrequencyPair> {
        let mut pairs = Vec::with_capacity(12);
        for p in 0..FREQUENCY_COUNT {
            for c in 0..FREQUENCY_COUNT {
                if p != c {
                    pairs.push(FrequencyPair { principal: p, correlated: c });
                }
            }
        }
        pairs
    }
}

/// What a label image is computed over: one plane (single-plane kinds) or an
/// ordered pair (enhanced kinds).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelTarget {
    Plane(usize),
    Pair(FrequencyPair),
}

impl LabelTarget {
    /// Short name used in file names and layout descriptions, e.g. `u1` or
    /// `u1u2` (1-based frequency indices).
    pub fn name(&self) -> String {
        match self {
            LabelTarget::Plane(i) => format!("u{}", i + 1),
            LabelTarget::Pair(p) => format!("u{}u{}", p.principal + 1, p.correlated + 1),
        }
    }
}

/// Per-pixel integer codes produced by a descriptor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    width: usize,
    height: usize,
    labels: Vec<u16>,
}

impl LabelImage {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> u16 {
        self.labels[row * self.width + col]
    }

    /// Linearly scaled raster for diagnostic export; `bins` is the label
    /// range of the producing kind.
    pub fn to_gray(&self, bins: usize) -> GrayImage {
        let denom = (bins - 1).max(1) as f64;
        let samples = self.labels.iter().map(|l| *l as f64 / denom).collect();
        GrayImage::new(self.width, self.height, samples).unwrap()
    }
}

/// Bit for a magnitude comparison: 1 iff the focused response is at least
/// the neighbor's, so ties score 1.
#[inline]
pub fn magnitude_bit(focused: f64, neighbor: f64) -> bool {
    focused >= neighbor
}

/// Bit for a phase comparison: 1 iff both responses fall in the same
/// quadrant.
#[inline]
pub fn phase_bit(focused: u8, neighbor: u8) -> bool {
    focused == neighbor
}

/// Encode an ordered bit list into an integer; the bit at position `w`
/// (1-based) contributes `2^(w-1)`.
#[inline]
pub fn encode_bits(bits: &[bool]) -> u16 {
    debug_assert!(bits.len() <= 16);
    bits.iter()
        .enumerate()
        .fold(0u16, |acc, (i, b)| acc | ((*b as u16) << i))
}

fn build_labels<T, F>(principal: &Plane<T>, correlated: Option<&Plane<T>>, bit: F) -> LabelImage
where
    T: Clone,
    F: Fn(&T, &T) -> bool,
{
    let (w, h) = (principal.width(), principal.height());
    let mut labels = Vec::with_capacity(w * h);
    let mut bits = [false; 12];
    for row in 0..h as i64 {
        for col in 0..w as i64 {
            let mut n = 0;
            if let Some(corr) = correlated {
                let focused = corr.at(row as usize, col as usize);
                for (dr, dc) in FOUR_CROSS {
                    bits[n] = bit(focused, corr.at_clamped(row + dr, col + dc));
                    n += 1;
                }
            }
            let focused = principal.at(row as usize, col as usize);
            for (dr, dc) in EIGHT_RING {
                bits[n] = bit(focused, principal.at_clamped(row + dr, col + dc));
                n += 1;
            }
            labels.push(encode_bits(&bits[..n]));
        }
    }
    LabelImage { width: w, height: h, labels }
}

/// 12-bit joint magnitude labels for one ordered pair of magnitude planes.
pub fn enhanced_magnitude_labels(principal: &Plane<f64>, correlated: &Plane<f64>) -> LabelImage {
    build_labels(principal, Some(correlated), |a, b| magnitude_bit(*a, *b))
}

/// 12-bit joint phase labels for one ordered pair of quadrant planes.
pub fn enhanced_quadrant_labels(principal: &Plane<u8>, correlated: &Plane<u8>) -> LabelImage {
    build_labels(principal, Some(correlated), |a, b| phase_bit(*a, *b))
}

/// 8-bit magnitude labels for a single magnitude plane.
pub fn single_magnitude_labels(plane: &Plane<f64>) -> LabelImage {
    build_labels(plane, None, |a, b| magnitude_bit(*a, *b))
}

/// 8-bit phase labels for a single quadrant plane.
pub fn single_quadrant_labels(plane: &Plane<u8>) -> LabelImage {
    build_labels(plane, None, |a, b| phase_bit(*a, *b))
}

/// Label image of `planes` for one kind and target.
pub fn label_image(planes: &StftPlanes, kind: DescriptorKind, target: LabelTarget) -> Result<LabelImage> {
    match (kind.is_enhanced(), target) {
        (true, LabelTarget::Pair(pair)) => Ok(if kind.uses_magnitude() {
            enhanced_magnitude_labels(
                &planes.magnitude_plane(pair.principal),
                &planes.magnitude_plane(pair.correlated),
            )
        } else {
            enhanced_quadrant_labels(
                &planes.quadrant_plane(pair.principal),
                &planes.quadrant_plane(pair.correlated),
            )
        }),
        (false, LabelTarget::Plane(i)) if i < FREQUENCY_COUNT => Ok(if kind.uses_magnitude() {
            single_magnitude_labels(&planes.magnitude_plane(i))
        } else {
            single_quadrant_labels(&planes.quadrant_plane(i))
        }),
        _ => Err(Error::Parameter(format!(
            "target {target:?} does not match descriptor kind {kind}"
        ))),
    }
}

/// Histograms of one label image over the 4x4 sub-region grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionalHistogramSet {
    bins: usize,
    /// Row-major region order; each histogram has `bins` counts.
    regions: Vec<Vec<u64>>,
    pixel_counts: [u64; REGION_COUNT],
}

impl RegionalHistogramSet {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn region(&self, index: usize) -> &[u64] {
        &self.regions[index]
    }

    pub fn pixel_count(&self, index: usize) -> u64 {
        self.pixel_counts[index]
    }

    /// Whole-image histogram: the sum over all regions.
    pub fn pooled(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.bins];
        for region in &self.regions {
            for (o, c) in out.iter_mut().zip(region) {
                *o += c;
            }
        }
        out
    }
}

#[inline]
fn region_index(coord: usize, base: usize) -> usize {
    match coord.checked_div(base) {
        Some(region) => region.min(REGION_GRID - 1),
        None => REGION_GRID - 1,
    }
}

/// Pool a label image into 4x4 regional histograms. Remainder rows and
/// columns are absorbed by the last region in each dimension.
pub fn regional_histograms(label_image: &LabelImage, bins: usize) -> Result<RegionalHistogramSet> {
    let row_base = label_image.height() / REGION_GRID;
    let col_base = label_image.width() / REGION_GRID;
    let mut regions = vec![vec![0u64; bins]; REGION_COUNT];
    let mut pixel_counts = [0u64; REGION_COUNT];
    for row in 0..label_image.height() {
        let ri = region_index(row, row_base);
        for col in 0..label_image.width() {
            let label = label_image.at(row, col) as usize;
            if label >= bins {
                return Err(Error::Parameter(format!(
                    "label {label} out of range for {bins} bins"
                )));
            }
            let region = ri * REGION_GRID + region_index(col, col_base);
            regions[region][label] += 1;
            pixel_counts[region] += 1;
        }
    }
    Ok(RegionalHistogramSet { bins, regions, pixel_counts })
}

/// Fixed feature layout: which kind and scale produced the vector, and how
/// wide each merged regional histogram is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub kind: DescriptorKind,
    pub scale: usize,
    pub valid_bins: usize,
}

impl FeatureLayout {
    pub fn dimension(&self) -> usize {
        self.kind.plane_count() * REGION_COUNT * self.valid_bins
    }
}

/// An assembled descriptor: merged regional histograms, L1-normalized per
/// region, concatenated plane/pair-major, then L2-normalized as a whole.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    layout: FeatureLayout,
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn layout(&self) -> FeatureLayout {
        self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Reduce, normalize, and concatenate regional histograms into one feature
/// vector. One merge map per plane/pair, in layout order.
pub fn assemble_feature(
    hist_sets: &[RegionalHistogramSet],
    merge_maps: &[MergeMap],
    layout: FeatureLayout,
) -> Result<FeatureVector> {
    if hist_sets.len() != layout.kind.plane_count() || merge_maps.len() != hist_sets.len() {
        return Err(Error::Parameter(format!(
            "expected {} histogram sets and merge maps for {}, got {} and {}",
            layout.kind.plane_count(),
            layout.kind,
            hist_sets.len(),
            merge_maps.len()
        )));
    }
    let mut values = Vec::with_capacity(layout.dimension());
    for (hists, map) in hist_sets.iter().zip(merge_maps) {
        if map.source_bins() != hists.bins() || map.source_bins() != layout.kind.label_bins() {
            return Err(Error::Parameter(format!(
                "merge map over {} bins does not match {} histogram bins",
                map.source_bins(),
                hists.bins()
            )));
        }
        if map.valid_bins() != layout.valid_bins {
            return Err(Error::Parameter(format!(
                "merge map has {} valid bins, layout expects {}",
                map.valid_bins(),
                layout.valid_bins
            )));
        }
        for region in 0..REGION_COUNT {
            let merged = apply_merge(hists.region(region), map)?;
            let total: u64 = merged.iter().sum();
            if total == 0 {
                values.resize(values.len() + map.valid_bins(), 0.0);
            } else {
                let inv = 1.0 / total as f64;
                values.extend(merged.iter().map(|c| *c as f64 * inv));
            }
        }
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for v in &mut values {
            *v /= norm;
        }
    }
    Ok(FeatureVector { layout, values })
}

/// Label images for every plane/pair of a kind, in canonical order.
pub fn label_images(planes: &StftPlanes, kind: DescriptorKind) -> Vec<LabelImage> {
    if kind.is_enhanced() {
        if kind.uses_magnitude() {
            let mags = planes.magnitude_planes();
            FrequencyPair::all()
                .into_iter()
                .map(|p| enhanced_magnitude_labels(&mags[p.principal], &mags[p.correlated]))
                .collect()
        } else {
            let quads = planes.quadrant_planes();
            FrequencyPair::all()
                .into_iter()
                .map(|p| enhanced_quadrant_labels(&quads[p.principal], &quads[p.correlated]))
                .collect()
        }
    } else if kind.uses_magnitude() {
        (0..FREQUENCY_COUNT)
            .map(|i| single_magnitude_labels(&planes.magnitude_plane(i)))
            .collect()
    } else {
        (0..FREQUENCY_COUNT)
            .map(|i| single_quadrant_labels(&planes.quadrant_plane(i)))
            .collect()
    }
}

/// Full descriptor of precomputed planes: labels, regional histograms,
/// merge, normalize, concatenate.
pub fn extract_feature_from_planes(
    planes: &StftPlanes,
    kind: DescriptorKind,
    merge_maps: &[MergeMap],
) -> Result<FeatureVector> {
    let layout = FeatureLayout {
        kind,
        scale: planes.scale(),
        valid_bins: merge_maps
            .first()
            .map(|m| m.valid_bins())
            .ok_or_else(|| Error::Parameter("no merge maps supplied".into()))?,
    };
    let hist_sets: Vec<RegionalHistogramSet> = label_images(planes, kind)
        .iter()
        .map(|li| regional_histograms(li, kind.label_bins()))
        .collect::<Result<_>>()?;
    assemble_feature(&hist_sets, merge_maps, layout)
}

/// Full descriptor of an image at one scale.
pub fn extract_feature(
    image: &GrayImage,
    scale: usize,
    kind: DescriptorKind,
    merge_maps: &[MergeMap],
) -> Result<FeatureVector> {
    extract_feature_from_planes(&compute_planes(image, scale)?, kind, merge_maps)
}
