//! Hough-style voting that turns a direction field into instance masks.
//!
//! Directions are discretized into `num_bins` equal angular bins. Every
//! object pixel casts a vote for the pixels lying inside its bin's cone; a
//! pixel's score is the fraction of other object pixels voting for it.
//! Thresholding plus greedy non-maximum suppression picks instance centers,
//! and remaining object pixels attach to the nearest center they point at.
//!
//! Two score implementations ship: [`VotingMode::Exact`] is the O(N^2)
//! definition, [`VotingMode::Fast`] rasterizes each voter's cone as one
//! column interval per row into a difference-array accumulator. They agree
//! bit-for-bit because both discretize with the same [`direction_bin`] and
//! accumulate integer counts.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::types::{
    same_grid, DirectionField, Error, ImageGrid, InstanceLabelMap, Result, SemanticLabels,
    CLASS_OBJECT, CLASS_TABLE,
};

/// Tunables of the voting stage. All four are config-exposed; the defaults
/// target 640x480 tabletop scenes and `nms_radius` should scale with the
/// image diagonal (see [`VotingParams::default_for_grid`]).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VotingParams {
    /// Number of equal angular bins M; at least 4.
    pub num_bins: usize,
    /// Minimum score for a pixel to become a center candidate, in [0, 1].
    pub score_threshold: f64,
    /// Suppression radius in pixels, at least 1. A candidate within this
    /// Euclidean distance (inclusive) of a kept center is dropped.
    pub nms_radius: f64,
    /// Maximum angle, in degrees within (0, 180), between a pixel's
    /// direction and the ray to a center for the pixel to "point at" it.
    pub assign_angle_tol_deg: f64,
}

impl Default for VotingParams {
    fn default() -> Self {
        Self {
            num_bins: 60,
            score_threshold: 0.006,
            nms_radius: 50.0,
            assign_angle_tol_deg: 30.0,
        }
    }
}

impl VotingParams {
    /// Defaults with `nms_radius` scaled proportionally to the grid
    /// diagonal (50 px at 640x480, whose diagonal is 800).
    ///
    /// The threshold and radius balance two measured score populations
    /// on dense tabletop scenes. With scores normalized by the global
    /// object-pixel count, an instance's centroid peak is roughly 0.75
    /// of its pixel share, so crowded scenes push the weakest true peak
    /// toward 0.0075. Meanwhile direction rays aligned through a large
    /// instance's centroid build spurious side peaks up to a third of
    /// that instance's own peak; those live inside the instance, so a
    /// suppression radius covering the largest plausible instance radius
    /// lets every true peak silence its own ridge rather than relying on
    /// the threshold to separate overlapping score ranges.
    pub fn default_for_grid(grid: ImageGrid) -> Self {
        Self {
            nms_radius: (grid.diagonal() / 16.0).max(1.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_bins < 4 {
            return Err(Error::InvalidParam(format!(
                "num_bins {} is below the minimum of 4",
                self.num_bins
            )));
        }
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::InvalidParam(format!(
                "score_threshold {} outside [0, 1]",
                self.score_threshold
            )));
        }
        if !(self.nms_radius >= 1.0) {
            return Err(Error::InvalidParam(format!(
                "nms_radius {} is below 1",
                self.nms_radius
            )));
        }
        if !(self.assign_angle_tol_deg > 0.0 && self.assign_angle_tol_deg < 180.0) {
            return Err(Error::InvalidParam(format!(
                "assign_angle_tol_deg {} outside (0, 180)",
                self.assign_angle_tol_deg
            )));
        }
        Ok(())
    }
}

/// Which center-score implementation to run. Both produce bit-identical
/// results; Fast is the production default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VotingMode {
    /// The O(N^2) definition, kept as the reference path.
    Exact,
    /// Cone rasterization with difference arrays; linear in votes cast.
    #[default]
    Fast,
}

/// Per-pixel center likelihood in [0, 1]; zero at non-object pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterScores {
    grid: ImageGrid,
    scores: Vec<f64>,
}

impl CenterScores {
    /// Wraps a raw score raster; every value must be finite in [0, 1].
    pub fn new(grid: ImageGrid, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != grid.len() {
            return Err(Error::LengthMismatch {
                context: "CenterScores",
                expected: grid.len(),
                actual: scores.len(),
            });
        }
        for (i, &s) in scores.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidParam(format!(
                    "score {s} at pixel ({}, {}) outside [0, 1]",
                    i / grid.width,
                    i % grid.width
                )));
            }
        }
        Ok(Self { grid, scores })
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.scores[self.grid.index(row, col)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.scores
    }
}

/// A selected instance center with the score that won it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Center {
    pub row: usize,
    pub col: usize,
    pub score: f64,
}

/// Angular bin of the vector (dr, dc) in image coordinates: the angle is
/// atan2(dr, dc) wrapped to [0, 2*pi), and bin k covers [k*w, (k+1)*w) for
/// bin width w = 2*pi / num_bins. The identical discretization applies to
/// predicted directions and to geometric pixel-to-pixel offsets, so bin
/// equality is meaningful across the two.
#[inline]
pub fn direction_bin(dr: f64, dc: f64, num_bins: usize) -> usize {
    debug_assert!(num_bins > 0);
    let mut theta = dr.atan2(dc);
    if theta < 0.0 {
        theta += TAU;
    }
    let bin = (theta / (TAU / num_bins as f64)).floor() as i64;
    bin.clamp(0, num_bins as i64 - 1) as usize
}

/// Per-pixel center scores: for each object pixel p, the fraction of other
/// object pixels q whose predicted-direction bin equals the bin of the
/// geometric direction q -> p. Non-object pixels score 0, as does the sole
/// object pixel of an image. Object pixels whose direction is invalid cast
/// no votes but still count in the denominator and still receive scores.
pub fn center_scores(
    labels: &SemanticLabels,
    dirs: &DirectionField,
    params: &VotingParams,
    mode: VotingMode,
) -> Result<CenterScores> {
    params.validate()?;
    same_grid("center_scores", labels.grid(), dirs.grid())?;
    let grid = labels.grid();
    let n_obj = labels
        .as_slice()
        .iter()
        .filter(|&&l| l == CLASS_OBJECT)
        .count();
    if n_obj < 2 {
        return Ok(CenterScores {
            grid,
            scores: vec![0.0; grid.len()],
        });
    }
    let votes = match mode {
        VotingMode::Exact => votes_exact(labels, dirs, params.num_bins),
        VotingMode::Fast => votes_fast(labels, dirs, params.num_bins),
    };
    let denom = (n_obj - 1) as f64;
    let mut scores = vec![0.0; grid.len()];
    for (i, &l) in labels.as_slice().iter().enumerate() {
        if l == CLASS_OBJECT {
            scores[i] = votes[i] as f64 / denom;
        }
    }
    Ok(CenterScores { grid, scores })
}

/// Reference vote count: every voter q tests every other object pixel p.
fn votes_exact(labels: &SemanticLabels, dirs: &DirectionField, num_bins: usize) -> Vec<i64> {
    let grid = labels.grid();
    let w = grid.width;
    let object: Vec<usize> = labels
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == CLASS_OBJECT)
        .map(|(i, _)| i)
        .collect();
    let mut votes = vec![0i64; grid.len()];
    for &q in &object {
        let (qr, qc) = (q / w, q % w);
        if !dirs.is_valid(qr, qc) {
            continue;
        }
        let d = dirs.get(qr, qc);
        let qbin = direction_bin(d[0], d[1], num_bins);
        for &p in &object {
            if p == q {
                continue;
            }
            let dr = (p / w) as i64 - qr as i64;
            let dc = (p % w) as i64 - qc as i64;
            if direction_bin(dr as f64, dc as f64, num_bins) == qbin {
                votes[p] += 1;
            }
        }
    }
    votes
}

/// Smallest x in [lo, hi] satisfying `pred`, where `pred` is monotone
/// false-then-true over the range; None when nothing satisfies it.
fn first_where(mut lo: i64, mut hi: i64, pred: impl Fn(i64) -> bool) -> Option<i64> {
    if !pred(hi) {
        return None;
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

/// Largest x in [lo, hi] satisfying `pred`, where `pred` is monotone
/// true-then-false over the range; None when nothing satisfies it.
fn last_where(mut lo: i64, mut hi: i64, pred: impl Fn(i64) -> bool) -> Option<i64> {
    if !pred(lo) {
        return None;
    }
    while lo < hi {
        let mid = lo + (hi - lo + 1) / 2;
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Some(lo)
}

/// The dc range, within [-max_dc, max_dc], whose offsets (dr, dc) fall in
/// `bin`; (1, 0) encodes the empty range. Exploits that for fixed dr the
/// wrapped angle of (dr, dc) is monotone in dc: decreasing for dr > 0,
/// increasing for dr < 0. The dr == 0 row splits into the two half-lines,
/// which excludes the self-offset (0, 0) from every cone.
fn bin_interval(bin: usize, dr: i64, max_dc: i64, num_bins: usize) -> (i64, i64) {
    if dr == 0 {
        if max_dc == 0 {
            return (1, 0);
        }
        if bin == direction_bin(0.0, 1.0, num_bins) {
            return (1, max_dc);
        }
        if bin == direction_bin(0.0, -1.0, num_bins) {
            return (-max_dc, -1);
        }
        return (1, 0);
    }
    let g = |dc: i64| direction_bin(dr as f64, dc as f64, num_bins);
    let (lo, hi) = if dr > 0 {
        (
            first_where(-max_dc, max_dc, |dc| g(dc) <= bin),
            last_where(-max_dc, max_dc, |dc| g(dc) >= bin),
        )
    } else {
        (
            first_where(-max_dc, max_dc, |dc| g(dc) >= bin),
            last_where(-max_dc, max_dc, |dc| g(dc) <= bin),
        )
    };
    match (lo, hi) {
        (Some(a), Some(z)) if a <= z => (a, z),
        _ => (1, 0),
    }
}

/// Difference-array vote count. Voters are grouped by bin; each bin's cone
/// is precomputed as one dc interval per dr via [`bin_interval`], then every
/// voter stamps its shifted intervals into per-row difference arrays whose
/// prefix sums are the vote counts. Votes landing outside object pixels are
/// accumulated but never read.
fn votes_fast(labels: &SemanticLabels, dirs: &DirectionField, num_bins: usize) -> Vec<i64> {
    let grid = labels.grid();
    let (h, w) = (grid.height, grid.width);
    let max_dc = w as i64 - 1;

    let mut by_bin: Vec<Vec<usize>> = vec![Vec::new(); num_bins];
    for (i, &l) in labels.as_slice().iter().enumerate() {
        if l != CLASS_OBJECT || !dirs.validity()[i] {
            continue;
        }
        let d = dirs.dirs()[i];
        by_bin[direction_bin(d[0], d[1], num_bins)].push(i);
    }

    let stride = w + 1;
    let mut diff = vec![0i64; h * stride];
    let mut table: Vec<(i64, i64)> = Vec::with_capacity(2 * h - 1);
    for (bin, voters) in by_bin.iter().enumerate() {
        if voters.is_empty() {
            continue;
        }
        table.clear();
        for dr in -(h as i64 - 1)..=(h as i64 - 1) {
            table.push(bin_interval(bin, dr, max_dc, num_bins));
        }
        for &q in voters {
            let (qr, qc) = ((q / w) as i64, (q % w) as i64);
            for pr in 0..h {
                let (lo, hi) = table[(pr as i64 - qr + h as i64 - 1) as usize];
                if lo > hi {
                    continue;
                }
                let a = (qc + lo).max(0);
                let z = (qc + hi).min(w as i64 - 1);
                if a > z {
                    continue;
                }
                diff[pr * stride + a as usize] += 1;
                diff[pr * stride + z as usize + 1] -= 1;
            }
        }
    }

    let mut votes = vec![0i64; grid.len()];
    for r in 0..h {
        let mut acc = 0i64;
        for c in 0..w {
            acc += diff[r * stride + c];
            votes[r * w + c] = acc;
        }
    }
    votes
}

/// Thresholds scores and applies greedy non-maximum suppression: candidates
/// with score >= score_threshold are visited in descending score order, ties
/// broken by (row, col) ascending, and each is kept unless it lies within
/// nms_radius (inclusive) of an already-kept center. The returned list keeps
/// that order.
pub fn select_centers(scores: &CenterScores, params: &VotingParams) -> Result<Vec<Center>> {
    params.validate()?;
    let grid = scores.grid;
    let w = grid.width;
    let mut candidates: Vec<Center> = scores
        .scores
        .iter()
        .enumerate()
        .filter(|(_, &s)| s >= params.score_threshold)
        .map(|(i, &s)| Center {
            row: i / w,
            col: i % w,
            score: s,
        })
        .collect();
    candidates.sort_unstable_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then_with(|| (a.row, a.col).cmp(&(b.row, b.col)))
    });
    let r2 = params.nms_radius * params.nms_radius;
    let mut kept: Vec<Center> = Vec::new();
    'candidates: for cand in candidates {
        for k in &kept {
            let dr = cand.row as f64 - k.row as f64;
            let dc = cand.col as f64 - k.col as f64;
            if dr * dr + dc * dc <= r2 {
                continue 'candidates;
            }
        }
        kept.push(cand);
    }
    Ok(kept)
}

/// Attaches object pixels to centers. A center is "pointed at" by pixel p
/// when the angle between p's direction and the ray p -> center is at most
/// assign_angle_tol_deg; p takes the nearest pointed-at center, or the
/// center of minimum angular deviation when it points at none. Distance and
/// angle ties go to the earlier center in `centers`. A pixel sitting exactly
/// on a center has zero deviation to it; a pixel with an invalid direction
/// takes the nearest center outright. With no centers at all, object pixels
/// become background. Table pixels keep label 1, any other class maps to
/// background, and instance ids are compacted to be contiguous from 2 after
/// empty centers are dropped.
pub fn assign_pixels(
    labels: &SemanticLabels,
    dirs: &DirectionField,
    centers: &[Center],
    params: &VotingParams,
) -> Result<InstanceLabelMap> {
    Ok(assign_impl(labels, dirs, centers, params)?.0)
}

fn assign_impl(
    labels: &SemanticLabels,
    dirs: &DirectionField,
    centers: &[Center],
    params: &VotingParams,
) -> Result<(InstanceLabelMap, Vec<Center>)> {
    params.validate()?;
    same_grid("assign_pixels", labels.grid(), dirs.grid())?;
    let grid = labels.grid();
    let w = grid.width;
    let cos_tol = params.assign_angle_tol_deg.to_radians().cos();

    let mut raw = vec![0u32; grid.len()];
    for (i, &l) in labels.as_slice().iter().enumerate() {
        if l == CLASS_TABLE {
            raw[i] = 1;
            continue;
        }
        if l != CLASS_OBJECT || centers.is_empty() {
            continue;
        }
        let (pr, pc) = ((i / w) as i64, (i % w) as i64);
        let d = dirs.dirs()[i];
        let valid = dirs.validity()[i];
        let mut best_pointed: Option<(i64, usize)> = None;
        let mut best_fallback: Option<(f64, usize)> = None;
        for (k, ctr) in centers.iter().enumerate() {
            let ur = ctr.row as i64 - pr;
            let uc = ctr.col as i64 - pc;
            let dist2 = ur * ur + uc * uc;
            let (pointed, cos_dev) = if !valid || dist2 == 0 {
                (true, 1.0)
            } else {
                let cos_dev =
                    (d[0] * ur as f64 + d[1] * uc as f64) / (dist2 as f64).sqrt();
                (cos_dev >= cos_tol, cos_dev)
            };
            if pointed {
                if best_pointed.is_none_or(|(bd, _)| dist2 < bd) {
                    best_pointed = Some((dist2, k));
                }
            } else if best_pointed.is_none()
                && best_fallback.is_none_or(|(bc, _)| cos_dev > bc)
            {
                best_fallback = Some((cos_dev, k));
            }
        }
        let k = best_pointed
            .map(|(_, k)| k)
            .or(best_fallback.map(|(_, k)| k))
            .expect("centers is nonempty");
        raw[i] = k as u32 + 2;
    }

    let mut counts = vec![0u32; centers.len()];
    for &v in &raw {
        if v >= 2 {
            counts[(v - 2) as usize] += 1;
        }
    }
    let mut remap = vec![0u32; centers.len()];
    let mut kept = Vec::new();
    for (k, &n) in counts.iter().enumerate() {
        if n > 0 {
            remap[k] = 2 + kept.len() as u32;
            kept.push(centers[k]);
        }
    }
    for v in raw.iter_mut() {
        if *v >= 2 {
            *v = remap[(*v - 2) as usize];
        }
    }
    Ok((InstanceLabelMap::new(grid, raw)?, kept))
}

/// The full voting stage: score, select, assign.
pub fn hough_vote(
    labels: &SemanticLabels,
    dirs: &DirectionField,
    params: &VotingParams,
    mode: VotingMode,
) -> Result<InstanceLabelMap> {
    Ok(hough_vote_detailed(labels, dirs, params, mode)?.0)
}

/// [`hough_vote`] that also returns the surviving centers, index-aligned
/// with instance ids: `centers[k]` is the center of instance id k + 2.
pub fn hough_vote_detailed(
    labels: &SemanticLabels,
    dirs: &DirectionField,
    params: &VotingParams,
    mode: VotingMode,
) -> Result<(InstanceLabelMap, Vec<Center>)> {
    let scores = center_scores(labels, dirs, params, mode)?;
    let centers = select_centers(&scores, params)?;
    assign_impl(labels, dirs, &centers, params)
}
