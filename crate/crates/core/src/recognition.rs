//! The coding classifier and the multi-scale competition.
//!
//! A probe feature `y` is coded over the training dictionary `D` with an
//! l2-regularized least squares solve, `alpha = (D'D + lambda I)^-1 D' y`,
//! and classified by the smallest per-class reconstruction error
//! `d_i = ||y - D_i alpha_i||`. The margin between the best and second-best
//! class distances gives the generalized confidence
//! `e = 1 - d_best / d_runner_up`, and the recognizer runs the whole pipeline
//! at every trained window scale, keeping the answer of the scale with the
//! highest first-candidate confidence.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::binmerge::MergeMap;
use crate::descriptors::{extract_feature, DescriptorKind, FeatureVector};
use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Sentinel confidence for a degenerate margin (runner-up distance of zero
/// with a nonzero best distance).
pub const DEGENERATE_CONFIDENCE: f64 = -1e9;
const ZERO_DISTANCE: f64 = 1e-12;

/// Class-labeled training features, one unit-norm column per image.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    data: DMatrix<f64>,
    class_ids: Vec<u32>,
    class_count: usize,
}

impl Dictionary {
    /// Build from a `d x n` matrix and one class id per column. Class ids
    /// must be dense in `[0, class_count)` and every column unit norm.
    pub fn from_matrix(data: DMatrix<f64>, class_ids: Vec<u32>) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(Error::Parameter("dictionary must be non-empty".into()));
        }
        if class_ids.len() != data.ncols() {
            return Err(Error::Parameter(format!(
                "{} class ids for {} columns",
                class_ids.len(),
                data.ncols()
            )));
        }
        for (j, col) in data.column_iter().enumerate() {
            let norm = col.norm();
            if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
                return Err(Error::Parameter(format!(
                    "dictionary column {j} has norm {norm}, expected 1"
                )));
            }
        }
        let class_count = (*class_ids.iter().max().unwrap() + 1) as usize;
        let mut present = vec![false; class_count];
        for &id in &class_ids {
            present[id as usize] = true;
        }
        if !present.iter().all(|p| *p) {
            return Err(Error::Parameter("class ids must be dense: some class has no column".into()));
        }
        Ok(Dictionary { data, class_ids, class_count })
    }

    /// Build from assembled training features (already unit norm).
    pub fn from_features(features: &[FeatureVector], class_ids: Vec<u32>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Parameter("dictionary must be non-empty".into()));
        }
        let d = features[0].len();
        if features.iter().any(|f| f.len() != d) {
            return Err(Error::Parameter("training features disagree on dimension".into()));
        }
        let data = DMatrix::from_fn(d, features.len(), |r, c| features[c].values()[r]);
        Dictionary::from_matrix(data, class_ids)
    }

    pub fn dimension(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn class_ids(&self) -> &[u32] {
        &self.class_ids
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }
}

/// Ridge coefficients for one probe.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingSolution {
    pub alpha: Vec<f64>,
    pub lambda: f64,
}

/// Precomputed factorization of `D'D + lambda I`, reused across probes.
#[derive(Debug, Clone)]
pub struct RidgeSolver {
    lambda: f64,
    transpose: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl RidgeSolver {
    pub fn new(dictionary: &Dictionary, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(Error::Parameter(format!("lambda must be > 0, got {lambda}")));
        }
        let transpose = dictionary.data.transpose();
        let mut gram = &transpose * &dictionary.data;
        for i in 0..gram.nrows() {
            gram[(i, i)] += lambda;
        }
        let chol = Cholesky::new(gram)
            .ok_or_else(|| Error::Parameter("ridge normal matrix is not positive definite".into()))?;
        Ok(RidgeSolver { lambda, transpose, chol })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn solve(&self, probe: &[f64]) -> Result<CodingSolution> {
        if probe.len() != self.transpose.ncols() {
            return Err(Error::Parameter(format!(
                "probe dimension {} does not match dictionary dimension {}",
                probe.len(),
                self.transpose.ncols()
            )));
        }
        if probe.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("probe contains non-finite values".into()));
        }
        let rhs = &self.transpose * DVector::from_column_slice(probe);
        let alpha = self.chol.solve(&rhs);
        Ok(CodingSolution {
            alpha: alpha.as_slice().to_vec(),
            lambda: self.lambda,
        })
    }
}

/// One-shot ridge coding of a probe over a dictionary.
pub fn solve_coding(dictionary: &Dictionary, probe: &[f64], lambda: f64) -> Result<CodingSolution> {
    RidgeSolver::new(dictionary, lambda)?.solve(probe)
}

/// Per-class reconstruction errors `||y - D_i alpha_i||`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistances(pub Vec<f64>);

impl ClassDistances {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Distance of the probe to each class's reconstruction from its own columns
/// and coefficients.
pub fn class_distances(
    dictionary: &Dictionary,
    solution: &CodingSolution,
    probe: &[f64],
) -> Result<ClassDistances> {
    if probe.len() != dictionary.dimension() {
        return Err(Error::Parameter("probe dimension does not match dictionary".into()));
    }
    if solution.alpha.len() != dictionary.len() {
        return Err(Error::Parameter("coefficient count does not match dictionary".into()));
    }
    let d = dictionary.dimension();
    let mut reconstructions = vec![vec![0.0f64; d]; dictionary.class_count()];
    for (j, col) in dictionary.data.column_iter().enumerate() {
        let class = dictionary.class_ids[j] as usize;
        let a = solution.alpha[j];
        let recon = &mut reconstructions[class];
        for (r, v) in recon.iter_mut().zip(col.iter()) {
            *r += a * v;
        }
    }
    let distances = reconstructions
        .iter()
        .map(|recon| {
            probe
                .iter()
                .zip(recon)
                .map(|(y, r)| (y - r) * (y - r))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(ClassDistances(distances))
}

/// The best class of a distance vector and its generalized confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstCandidate {
    pub class: usize,
    pub confidence: f64,
    /// Set when the runner-up distance was numerically zero, making the
    /// margin formula degenerate.
    pub degenerate: bool,
}

/// Pick the class of least distance (lowest id on ties) and score it with
/// `1 - d_best / d_runner_up`.
pub fn first_candidate_confidence(distances: &[f64]) -> Result<FirstCandidate> {
    if distances.len() < 2 {
        return Err(Error::Parameter("confidence needs at least two classes".into()));
    }
    if distances.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(Error::Parameter("distances must be finite and nonnegative".into()));
    }
    let mut best = 0usize;
    for (i, d) in distances.iter().enumerate().skip(1) {
        if *d < distances[best] {
            best = i;
        }
    }
    let runner_up = distances
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best)
        .map(|(_, d)| *d)
        .fold(f64::INFINITY, f64::min);

    if runner_up < ZERO_DISTANCE {
        // The margin formula divides by the runner-up; a full tie at zero is
        // scored 0, anything else gets the sentinel.
        let confidence = if distances[best] < ZERO_DISTANCE { 0.0 } else { DEGENERATE_CONFIDENCE };
        return Ok(FirstCandidate { class: best, confidence, degenerate: true });
    }
    Ok(FirstCandidate {
        class: best,
        confidence: 1.0 - distances[best] / runner_up,
        degenerate: false,
    })
}

/// Everything trained for one window scale.
#[derive(Debug, Clone)]
pub struct ScaleModel {
    scale: usize,
    merge_maps: Vec<MergeMap>,
    dictionary: Dictionary,
    solver: RidgeSolver,
}

impl ScaleModel {
    pub fn new(scale: usize, merge_maps: Vec<MergeMap>, dictionary: Dictionary, lambda: f64) -> Result<Self> {
        let solver = RidgeSolver::new(&dictionary, lambda)?;
        Ok(ScaleModel { scale, merge_maps, dictionary, solver })
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn merge_maps(&self) -> &[MergeMap] {
        &self.merge_maps
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dictionary
    }
}

/// A trained recognizer: per-scale merge maps and dictionaries for one
/// descriptor kind, plus the class-name table.
#[derive(Debug, Clone)]
pub struct ScaleBank {
    kind: DescriptorKind,
    lambda: f64,
    valid_bins: usize,
    class_names: Vec<String>,
    models: Vec<ScaleModel>,
}

impl ScaleBank {
    pub fn new(
        kind: DescriptorKind,
        lambda: f64,
        valid_bins: usize,
        class_names: Vec<String>,
        models: Vec<ScaleModel>,
    ) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Parameter("scale bank needs at least one scale".into()));
        }
        let mut last = 0usize;
        for model in &models {
            if model.scale <= last {
                return Err(Error::Parameter("scales must be strictly ascending".into()));
            }
            last = model.scale;
            if model.merge_maps.len() != kind.plane_count() {
                return Err(Error::Parameter(format!(
                    "scale {} has {} merge maps, {} needs {}",
                    model.scale,
                    model.merge_maps.len(),
                    kind,
                    kind.plane_count()
                )));
            }
            for map in &model.merge_maps {
                if map.source_bins() != kind.label_bins() || map.valid_bins() != valid_bins {
                    return Err(Error::Parameter(format!(
                        "scale {} merge map is {}->{}, expected {}->{}",
                        model.scale,
                        map.source_bins(),
                        map.valid_bins(),
                        kind.label_bins(),
                        valid_bins
                    )));
                }
            }
            if model.dictionary.class_count() != class_names.len() {
                return Err(Error::Parameter(format!(
                    "scale {} dictionary has {} classes, manifest names {}",
                    model.scale,
                    model.dictionary.class_count(),
                    class_names.len()
                )));
            }
        }
        Ok(ScaleBank { kind, lambda, valid_bins, class_names, models })
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn valid_bins(&self) -> usize {
        self.valid_bins
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn scales(&self) -> Vec<usize> {
        self.models.iter().map(|m| m.scale).collect()
    }

    pub fn models(&self) -> &[ScaleModel] {
        &self.models
    }

    pub fn model(&self, scale: usize) -> Option<&ScaleModel> {
        self.models.iter().find(|m| m.scale == scale)
    }
}

/// Outcome of running the classifier at one scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleOutcome {
    pub scale: usize,
    pub class: usize,
    pub confidence: f64,
    pub degenerate: bool,
    pub distances: ClassDistances,
}

/// Classify a probe at one trained scale.
pub fn recognize_single_scale(bank: &ScaleBank, scale: usize, image: &GrayImage) -> Result<ScaleOutcome> {
    let model = bank
        .model(scale)
        .ok_or_else(|| Error::Parameter(format!("scale {scale} is not in the bank")))?;
    let feature = extract_feature(image, scale, bank.kind, &model.merge_maps)?;
    let solution = model.solver.solve(feature.values())?;
    let distances = class_distances(&model.dictionary, &solution, feature.values())?;
    let candidate = first_candidate_confidence(distances.as_slice())?;
    Ok(ScaleOutcome {
        scale,
        class: candidate.class,
        confidence: candidate.confidence,
        degenerate: candidate.degenerate,
        distances,
    })
}

/// Result of the multi-scale competition: the identity of the scale with the
/// highest first-candidate confidence, with the full per-scale trace.
#[derive(Debug, Clone, PartialEq)]
pub struct RecognitionResult {
    pub identity: usize,
    pub winning_scale: usize,
    pub confidence: f64,
    pub per_scale: Vec<ScaleOutcome>,
}

/// Index of the winning outcome: maximum confidence, earliest (smallest)
/// scale on ties.
pub fn select_winner(per_scale: &[ScaleOutcome]) -> Option<usize> {
    let mut winner: Option<usize> = None;
    for (i, outcome) in per_scale.iter().enumerate() {
        match winner {
            None => winner = Some(i),
            Some(w) if outcome.confidence > per_scale[w].confidence => winner = Some(i),
            _ => {}
        }
    }
    winner
}

/// Run the classifier at every trained scale and keep the most confident
/// answer.
pub fn multiscale_recognize(bank: &ScaleBank, image: &GrayImage) -> Result<RecognitionResult> {
    let per_scale: Vec<ScaleOutcome> = bank
        .scales()
        .into_iter()
        .map(|s| recognize_single_scale(bank, s, image))
        .collect::<Result<_>>()?;
    let winner = select_winner(&per_scale)
        .ok_or_else(|| Error::Parameter("scale bank has no scales".into()))?;
    Ok(RecognitionResult {
        identity: per_scale[winner].class,
        winning_scale: per_scale[winner].scale,
        confidence: per_scale[winner].confidence,
        per_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{seeded_rng, unit_f64};
    use rand_chacha::rand_core::RngCore;

    fn unit_columns(rng: &mut impl RngCore, d: usize, n: usize) -> DMatrix<f64> {
        let mut m = DMatrix::from_fn(d, n, |_, _| unit_f64(rng) - 0.5);
        for mut col in m.column_iter_mut() {
            let norm = col.norm();
            col /= norm;
        }
        m
    }

    /// Independent normal-equation solve: Gaussian elimination with partial
    /// pivoting on (D'D + lambda I) x = D' y.
    fn normal_equation_oracle(d: &DMatrix<f64>, y: &[f64], lambda: f64) -> Vec<f64> {
        let n = d.ncols();
        let mut a = vec![vec![0.0f64; n + 1]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = d.column(i).dot(&d.column(j)) + if i == j { lambda } else { 0.0 };
            }
            a[i][n] = d
                .column(i)
                .iter()
                .zip(y)
                .map(|(c, yv)| c * yv)
                .sum::<f64>();
        }
        for col in 0..n {
            let pivot = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
            a.swap(col, pivot);
            let diag = a[col][col];
            for row in col + 1..n {
                let factor = a[row][col] / diag;
                for k in col..=n {
                    a[row][k] -= factor * a[col][k];
                }
            }
        }
        let mut x = vec![0.0f64; n];
        for row in (0..n).rev() {
            let mut acc = a[row][n];
            for k in row + 1..n {
                acc -= a[row][k] * x[k];
            }
            x[row] = acc / a[row][row];
        }
        x
    }

    #[test]
    fn identity_dictionary_closed_form() {
        let n = 5;
        let data = DMatrix::<f64>::identity(n, n);
        let dict = Dictionary::from_matrix(data, (0..n as u32).collect()).unwrap();
        let y = [0.1, -0.4, 0.8, 0.0, 0.3];
        let sol = solve_coding(&dict, &y, 0.01).unwrap();
        for (a, yv) in sol.alpha.iter().zip(&y) {
            assert!((a - yv / 1.01).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_probe_gives_zero_coefficients() {
        let mut rng = seeded_rng(51);
        let dict = Dictionary::from_matrix(unit_columns(&mut rng, 6, 4), vec![0, 0, 1, 1]).unwrap();
        let sol = solve_coding(&dict, &[0.0; 6], 0.5).unwrap();
        assert!(sol.alpha.iter().all(|a| a.abs() < 1e-14));
    }

    #[test]
    fn solve_matches_normal_equation_oracle() {
        let mut rng = seeded_rng(52);
        let data = unit_columns(&mut rng, 20, 30);
        let dict = Dictionary::from_matrix(data.clone(), (0..30).map(|i| i % 3).collect()).unwrap();
        let y: Vec<f64> = (0..20).map(|_| unit_f64(&mut rng) - 0.5).collect();
        let sol = solve_coding(&dict, &y, 0.01).unwrap();
        let oracle = normal_equation_oracle(&data, &y, 0.01);
        for (a, b) in sol.alpha.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn single_class_distance_is_global_residual() {
        let mut rng = seeded_rng(53);
        let data = unit_columns(&mut rng, 8, 5);
        let dict = Dictionary::from_matrix(data.clone(), vec![0; 5]).unwrap();
        let y: Vec<f64> = (0..8).map(|_| unit_f64(&mut rng)).collect();
        let sol = solve_coding(&dict, &y, 0.01).unwrap();
        let distances = class_distances(&dict, &sol, &y).unwrap();
        let alpha = DVector::from_column_slice(&sol.alpha);
        let residual = (DVector::from_column_slice(&y) - &data * alpha).norm();
        assert!((distances.0[0] - residual).abs() < 1e-12);
    }

    #[test]
    fn probe_equal_to_column_wins_its_class() {
        let mut rng = seeded_rng(54);
        let data = unit_columns(&mut rng, 24, 8);
        let ids = vec![0, 0, 1, 1, 2, 2, 3, 3];
        let dict = Dictionary::from_matrix(data.clone(), ids).unwrap();
        let probe: Vec<f64> = data.column(4).iter().copied().collect();
        let sol = solve_coding(&dict, &probe, 1e-9).unwrap();
        let distances = class_distances(&dict, &sol, &probe).unwrap();
        for (i, d) in distances.0.iter().enumerate() {
            if i != 2 {
                assert!(distances.0[2] < *d, "class 2 should be closest: {:?}", distances.0);
            }
        }
    }

    #[test]
    fn orthonormal_class_span_is_recovered() {
        // Columns are standard basis vectors; classes own disjoint spans.
        let d = 6;
        let data = DMatrix::<f64>::identity(d, d);
        let dict = Dictionary::from_matrix(data, vec![0, 0, 1, 1, 2, 2]).unwrap();
        // Probe in the span of class 1 (columns 2 and 3).
        let probe = [0.0, 0.0, 0.6, 0.8, 0.0, 0.0];
        let sol = solve_coding(&dict, &probe, 1e-6).unwrap();
        let distances = class_distances(&dict, &sol, &probe).unwrap();
        assert!(distances.0[1] < distances.0[0]);
        assert!(distances.0[1] < distances.0[2]);
        assert!(distances.0[1] < 1e-5);
    }

    #[test]
    fn confidence_worked_examples() {
        let c = first_candidate_confidence(&[2.0, 4.0]).unwrap();
        assert_eq!(c.class, 0);
        assert!((c.confidence - 0.5).abs() < 1e-15);

        let c = first_candidate_confidence(&[3.0, 3.0]).unwrap();
        assert_eq!(c.class, 0);
        assert_eq!(c.confidence, 0.0);

        let c = first_candidate_confidence(&[1.0, 5.0, 2.0]).unwrap();
        assert_eq!(c.class, 0);
        assert!((c.confidence - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_margins_are_flagged() {
        let c = first_candidate_confidence(&[0.0, 0.0]).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.confidence, 0.0);
        assert!(first_candidate_confidence(&[1.0]).is_err());
        assert!(first_candidate_confidence(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn confidence_invariant_under_positive_scaling() {
        let mut rng = seeded_rng(55);
        for _ in 0..100 {
            let d: Vec<f64> = (0..5).map(|_| unit_f64(&mut rng) + 0.01).collect();
            let a = first_candidate_confidence(&d).unwrap();
            let scaled: Vec<f64> = d.iter().map(|x| x * 37.5).collect();
            let b = first_candidate_confidence(&scaled).unwrap();
            assert_eq!(a.class, b.class);
            assert!((a.confidence - b.confidence).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbing_the_solution_increases_the_objective() {
        let mut rng = seeded_rng(56);
        let data = unit_columns(&mut rng, 16, 12);
        let dict = Dictionary::from_matrix(data.clone(), (0..12).map(|i| i % 4).collect()).unwrap();
        let y: Vec<f64> = (0..16).map(|_| unit_f64(&mut rng) - 0.5).collect();
        let lambda = 0.01;
        let sol = solve_coding(&dict, &y, lambda).unwrap();
        let objective = |alpha: &[f64]| {
            let av = DVector::from_column_slice(alpha);
            let r = DVector::from_column_slice(&y) - &data * &av;
            r.norm_squared() + lambda * av.norm_squared()
        };
        let base = objective(&sol.alpha);
        for _ in 0..20 {
            let mut delta: Vec<f64> = (0..12).map(|_| unit_f64(&mut rng) - 0.5).collect();
            let norm = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut delta {
                *v *= 1e-4 / norm;
            }
            let perturbed: Vec<f64> =
                sol.alpha.iter().zip(&delta).map(|(a, d)| a + d).collect();
            assert!(objective(&perturbed) > base);
        }
    }

    #[test]
    fn winner_selection_prefers_confidence_then_smaller_scale() {
        let outcome = |scale: usize, confidence: f64| ScaleOutcome {
            scale,
            class: 0,
            confidence,
            degenerate: false,
            distances: ClassDistances(vec![0.1, 0.2]),
        };
        let outcomes = vec![outcome(11, 0.1), outcome(13, 0.9), outcome(15, 0.1)];
        assert_eq!(select_winner(&outcomes), Some(1));
        let tied = vec![outcome(11, 0.4), outcome(13, 0.4)];
        assert_eq!(select_winner(&tied), Some(0));
    }
}
