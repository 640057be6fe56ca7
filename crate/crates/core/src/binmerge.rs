//! Histogram bin-merge learning: iteratively combine the two label bins of
//! least mass until a target number of valid bins remains, then reduce
//! feature histograms through the learned partition.
//!
//! Counts are kept as exact integers throughout so tie handling never depends
//! on floating-point rounding. Ties on mass are broken toward the groups with
//! the smallest contained source-bin index, which makes learning fully
//! deterministic and independent of training-image order.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// A learned partition of raw label bins into valid bins.
///
/// `assignment[b]` is the valid-bin group of source bin `b`. Group ids are
/// dense in `[0, valid_bins)` and ordered by each group's smallest source bin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeMap {
    source_bins: usize,
    valid_bins: usize,
    assignment: Vec<u32>,
}

impl MergeMap {
    pub fn new(source_bins: usize, valid_bins: usize, assignment: Vec<u32>) -> Result<Self> {
        if assignment.len() != source_bins {
            return Err(Error::Parameter(format!(
                "assignment length {} does not match {source_bins} source bins",
                assignment.len()
            )));
        }
        if valid_bins == 0 || valid_bins > source_bins {
            return Err(Error::Parameter(format!(
                "valid bin count {valid_bins} out of range for {source_bins} source bins"
            )));
        }
        let mut seen = vec![false; valid_bins];
        for &g in &assignment {
            let g = g as usize;
            if g >= valid_bins {
                return Err(Error::Parameter(format!("group id {g} >= {valid_bins}")));
            }
            seen[g] = true;
        }
        if !seen.iter().all(|s| *s) {
            return Err(Error::Parameter("assignment is not onto: some group is empty".into()));
        }
        Ok(MergeMap { source_bins, valid_bins, assignment })
    }

    /// The identity partition: every source bin is its own valid bin.
    pub fn identity(bins: usize) -> Self {
        MergeMap {
            source_bins: bins,
            valid_bins: bins,
            assignment: (0..bins as u32).collect(),
        }
    }

    pub fn source_bins(&self) -> usize {
        self.source_bins
    }

    pub fn valid_bins(&self) -> usize {
        self.valid_bins
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    /// Serialize to the archive text format: `B V` on the first line, then
    /// one group id per source bin per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(8 + self.assignment.len() * 3);
        out.push_str(&format!("{} {}\n", self.source_bins, self.valid_bins));
        for g in &self.assignment {
            out.push_str(&format!("{g}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("missing header line")?;
        let mut it = header.split_whitespace();
        let source_bins: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or("header field B is not an integer")?;
        let valid_bins: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or("header field V is not an integer")?;
        let mut assignment = Vec::with_capacity(source_bins);
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            assignment.push(line.parse::<u32>().map_err(|_| format!("bad group id `{line}`"))?);
        }
        MergeMap::new(source_bins, valid_bins, assignment).map_err(|e| e.to_string())
    }
}

/// Learn a merge map from a pooled label histogram.
///
/// Starting from one singleton group per bin, the two groups of least count
/// are merged (counts summed) until `target` groups remain. Zero-count bins
/// participate normally and are therefore merged away first.
pub fn learn_merge_map(global_histogram: &[u64], target: usize) -> Result<MergeMap> {
    let bins = global_histogram.len();
    if target == 0 || target > bins {
        return Err(Error::Parameter(format!(
            "target valid bins {target} out of range for {bins} source bins"
        )));
    }
    if global_histogram.iter().all(|c| *c == 0) {
        return Err(Error::Parameter("global histogram is empty".into()));
    }

    // Groups keyed by (count, smallest contained bin); the smallest bin is
    // unique per group, so the set order is total. `members[i]` holds the
    // member list of the group whose smallest bin is `i`.
    let mut queue: BTreeSet<(u64, u32)> = (0..bins)
        .map(|b| (global_histogram[b], b as u32))
        .collect();
    let mut members: Vec<Vec<u32>> = (0..bins as u32).map(|b| vec![b]).collect();

    while queue.len() > target {
        let first = *queue.iter().next().unwrap();
        queue.remove(&first);
        let second = *queue.iter().next().unwrap();
        queue.remove(&second);

        let (keep, absorb) = if first.1 < second.1 { (first, second) } else { (second, first) };
        let absorbed = std::mem::take(&mut members[absorb.1 as usize]);
        members[keep.1 as usize].extend(absorbed);
        queue.insert((first.0 + second.0, keep.1));
    }

    // Group ids by ascending smallest contained source bin.
    let mut smallest_bins: Vec<u32> = queue.iter().map(|(_, s)| *s).collect();
    smallest_bins.sort_unstable();
    let mut assignment = vec![0u32; bins];
    for (group, smallest) in smallest_bins.iter().enumerate() {
        for &bin in &members[*smallest as usize] {
            assignment[bin as usize] = group as u32;
        }
    }
    MergeMap::new(bins, target, assignment)
}

/// Reduce a histogram through a merge map. Total count is preserved exactly.
pub fn apply_merge(histogram: &[u64], map: &MergeMap) -> Result<Vec<u64>> {
    if histogram.len() != map.source_bins {
        return Err(Error::Parameter(format!(
            "histogram length {} does not match map source bins {}",
            histogram.len(),
            map.source_bins
        )));
    }
    let mut out = vec![0u64; map.valid_bins];
    for (count, group) in histogram.iter().zip(&map.assignment) {
        out[*group as usize] += count;
    }
    Ok(out)
}
