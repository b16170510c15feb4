//! Instance segmentation evaluation: Hungarian matching on pairwise
//! F-measure, then Overlap and Boundary precision/recall/F reported in
//! [0, 100].
//!
//! One matching drives both metrics: predicted and ground-truth instances
//! are paired to maximize summed pairwise overlap F, and the boundary
//! numbers reuse those pairs. Degenerate images follow fixed conventions:
//! both maps empty of instances scores 100/100/100, exactly one empty
//! scores 0/0/0. The table label (1) never participates; instance maps
//! only treat labels >= 2 as instances.

use serde::{Deserialize, Serialize};

use crate::morphology::{boundary_pixels, SeShape, StructuringElement};
use crate::types::{same_grid, BinaryMask, ImageGrid, InstanceLabelMap, Result};

/// Precision, recall, and F-measure, each in [0, 100].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PRF {
    pub precision: f64,
    pub recall: f64,
    pub fmeasure: f64,
}

impl PRF {
    /// Builds from fractional precision/recall in [0, 1], scaling by 100.
    /// F is the harmonic mean, or 0 when both components are 0.
    fn from_fractions(p: f64, r: f64) -> Self {
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        Self {
            precision: 100.0 * p,
            recall: 100.0 * r,
            fmeasure: 100.0 * f,
        }
    }

    const ALL_100: Self = Self {
        precision: 100.0,
        recall: 100.0,
        fmeasure: 100.0,
    };

    const ALL_0: Self = Self {
        precision: 0.0,
        recall: 0.0,
        fmeasure: 0.0,
    };
}

/// One-to-one pairing between predicted and ground-truth instance ids.
/// Pairs maximize the summed pairwise F; pairs whose F is 0 are still
/// reported as matched and simply contribute nothing to the metric sums.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    /// (predicted id, ground-truth id), ascending by predicted id.
    pub pairs: Vec<(u32, u32)>,
    pub unmatched_pred: Vec<u32>,
    pub unmatched_gt: Vec<u32>,
}

/// Bounding box and population of one mask, computed once so the pair
/// loops below stay window-local instead of rescanning full frames.
#[derive(Clone, Copy, Debug)]
struct MaskStats {
    /// (row0, col0, row1, col1), inclusive; None for an empty mask.
    bbox: Option<(usize, usize, usize, usize)>,
    count: usize,
}

fn mask_stats(mask: &BinaryMask) -> MaskStats {
    let g = mask.grid();
    let mut bbox: Option<(usize, usize, usize, usize)> = None;
    let mut count = 0usize;
    for (i, &b) in mask.as_slice().iter().enumerate() {
        if !b {
            continue;
        }
        count += 1;
        let (r, c) = (i / g.width, i % g.width);
        bbox = Some(match bbox {
            None => (r, c, r, c),
            Some((r0, c0, r1, c1)) => (r0.min(r), c0.min(c), r1.max(r), c1.max(c)),
        });
    }
    MaskStats { bbox, count }
}

/// |a and b|, scanning only the overlap of the two bounding boxes.
fn window_intersection(a: &BinaryMask, sa: &MaskStats, b: &BinaryMask, sb: &MaskStats) -> u64 {
    let (Some(ba), Some(bb)) = (sa.bbox, sb.bbox) else {
        return 0;
    };
    let (r0, c0) = (ba.0.max(bb.0), ba.1.max(bb.1));
    let (r1, c1) = (ba.2.min(bb.2), ba.3.min(bb.3));
    if r1 < r0 || c1 < c0 {
        return 0;
    }
    let mut n = 0u64;
    for r in r0..=r1 {
        for c in c0..=c1 {
            if a.get(r, c) && b.get(r, c) {
                n += 1;
            }
        }
    }
    n
}

fn pairwise_f_stats(pred: &BinaryMask, sp: &MaskStats, gt: &BinaryMask, sg: &MaskStats) -> f64 {
    let inter = window_intersection(pred, sp, gt, sg);
    if inter == 0 {
        return 0.0;
    }
    let p = inter as f64 / sp.count as f64;
    let r = inter as f64 / sg.count as f64;
    2.0 * p * r / (p + r)
}

/// Pairwise F-measure of two masks in [0, 1]: P = |a and b| / |a|,
/// R = |a and b| / |b|, F their harmonic mean; any empty mask or empty
/// intersection yields 0.
pub fn pairwise_f(pred: &BinaryMask, gt: &BinaryMask) -> f64 {
    pairwise_f_stats(pred, &mask_stats(pred), gt, &mask_stats(gt))
}

/// Square assignment minimizing total cost, O(n^3) shortest augmenting
/// paths with potentials. Returns the column assigned to each row.
fn hungarian_min(cost: &[f64], n: usize) -> Vec<usize> {
    // Column 0 and row index 0 are sentinels; data is 1-indexed.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        // Walk the augmenting path back, flipping assignments.
        while j0 != 0 {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if matched_row[j] != 0 {
            row_to_col[matched_row[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Optimal one-to-one matching between the instances of two maps,
/// maximizing summed pairwise F. The score matrix is padded to square with
/// zeros; real-to-real pairs in the optimum are matched even at score 0,
/// while pairs involving padding become the unmatched lists.
pub fn match_instances(pred: &InstanceLabelMap, gt: &InstanceLabelMap) -> Result<Matching> {
    same_grid("match_instances", gt.grid(), pred.grid())?;
    let pred_masks = pred.instance_masks();
    let gt_masks = gt.instance_masks();
    let (np, ng) = (pred_masks.len(), gt_masks.len());
    let n = np.max(ng);
    if n == 0 {
        return Ok(Matching {
            pairs: Vec::new(),
            unmatched_pred: Vec::new(),
            unmatched_gt: Vec::new(),
        });
    }
    // Negated scores turn maximization into the minimization the solver
    // expects; padding cells keep score 0.
    let pred_stats: Vec<MaskStats> = pred_masks.iter().map(|(_, m)| mask_stats(m)).collect();
    let gt_stats: Vec<MaskStats> = gt_masks.iter().map(|(_, m)| mask_stats(m)).collect();
    let mut cost = vec![0.0; n * n];
    for (i, (_, pm)) in pred_masks.iter().enumerate() {
        for (j, (_, gm)) in gt_masks.iter().enumerate() {
            cost[i * n + j] = -pairwise_f_stats(pm, &pred_stats[i], gm, &gt_stats[j]);
        }
    }
    let row_to_col = hungarian_min(&cost, n);
    let mut pairs = Vec::new();
    let mut unmatched_pred = Vec::new();
    let mut unmatched_gt = Vec::new();
    let mut gt_taken = vec![false; ng];
    for (i, &j) in row_to_col.iter().enumerate() {
        if i < np && j < ng {
            pairs.push((pred_masks[i].0, gt_masks[j].0));
            gt_taken[j] = true;
        } else if i < np {
            unmatched_pred.push(pred_masks[i].0);
        }
    }
    for (j, taken) in gt_taken.iter().enumerate() {
        if !taken {
            unmatched_gt.push(gt_masks[j].0);
        }
    }
    Ok(Matching {
        pairs,
        unmatched_pred,
        unmatched_gt,
    })
}

/// Raw integer counts behind one image's metrics; summing these across
/// images yields the micro (pixel-weighted) aggregate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub pred_instances: usize,
    pub gt_instances: usize,
    /// Overlap intersection pixels summed over matched pairs.
    pub overlap_inter: u64,
    /// Total pixels over all predicted / ground-truth instances.
    pub pred_pixels: u64,
    pub gt_pixels: u64,
    /// Boundary precision numerator: predicted contour pixels inside the
    /// dilated matched ground-truth contour.
    pub boundary_pnum: u64,
    pub boundary_pden: u64,
    /// Boundary recall numerator: ground-truth contour pixels inside the
    /// dilated matched predicted contour.
    pub boundary_rnum: u64,
    pub boundary_rden: u64,
}

/// Everything evaluate computes for one (prediction, ground truth) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PairEvaluation {
    pub matching: Matching,
    pub overlap: PRF,
    pub boundary: PRF,
    pub counts: EvalCounts,
}

/// Default boundary slack radius: about 0.75% of the image diagonal,
/// 6 px at 640x480, never below 1.
pub fn default_slack(grid: ImageGrid) -> usize {
    ((0.0075 * grid.diagonal()).round() as usize).max(1)
}

/// Pixels of `first` lying within the slack disk of some pixel of
/// `second`, i.e. |first and dilate(second, disk(slack))|, computed inside
/// the window second's bounding box grown by the slack: dilation cannot
/// reach outside it.
fn within_slack(
    first: &BinaryMask,
    second: &BinaryMask,
    ssecond: &MaskStats,
    slack: usize,
) -> u64 {
    let Some((r0, c0, r1, c1)) = ssecond.bbox else {
        return 0;
    };
    let g = first.grid();
    if slack == 0 {
        return window_intersection(first, &mask_stats(first), second, ssecond);
    }
    let (wr0, wc0) = (r0.saturating_sub(slack), c0.saturating_sub(slack));
    let (wr1, wc1) = ((r1 + slack).min(g.height - 1), (c1 + slack).min(g.width - 1));
    let ww = wc1 - wc0 + 1;
    let mut dil = vec![false; (wr1 - wr0 + 1) * ww];
    let offsets = StructuringElement::new(SeShape::Disk, slack)
        .expect("slack >= 1")
        .offsets();
    for r in r0..=r1 {
        for c in c0..=c1 {
            if !second.get(r, c) {
                continue;
            }
            for &(dr, dc) in &offsets {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr >= wr0 as i64 && nc >= wc0 as i64 && nr <= wr1 as i64 && nc <= wc1 as i64 {
                    dil[(nr as usize - wr0) * ww + (nc as usize - wc0)] = true;
                }
            }
        }
    }
    let mut n = 0u64;
    for r in wr0..=wr1 {
        for c in wc0..=wc1 {
            if first.get(r, c) && dil[(r - wr0) * ww + (c - wc0)] {
                n += 1;
            }
        }
    }
    n
}

/// Evaluates one prediction against ground truth: one Hungarian matching
/// on overlap pairwise F drives both the Overlap and the Boundary numbers.
pub fn evaluate_pair(
    pred: &InstanceLabelMap,
    gt: &InstanceLabelMap,
    slack_radius: usize,
) -> Result<PairEvaluation> {
    let matching = match_instances(pred, gt)?;
    let pred_masks = pred.instance_masks();
    let gt_masks = gt.instance_masks();
    // Masks, contours, and their stats are computed once per instance; the
    // pair loop then only touches bounded windows.
    let prep = |masks: &[(u32, BinaryMask)]| -> Vec<(MaskStats, BinaryMask, MaskStats)> {
        masks
            .iter()
            .map(|(_, m)| {
                let contour = boundary_pixels(m);
                let cs = mask_stats(&contour);
                (mask_stats(m), contour, cs)
            })
            .collect()
    };
    let pred_prep = prep(&pred_masks);
    let gt_prep = prep(&gt_masks);

    let mut counts = EvalCounts {
        pred_instances: pred_masks.len(),
        gt_instances: gt_masks.len(),
        ..EvalCounts::default()
    };
    for (ms, _, cs) in &pred_prep {
        counts.pred_pixels += ms.count as u64;
        counts.boundary_pden += cs.count as u64;
    }
    for (ms, _, cs) in &gt_prep {
        counts.gt_pixels += ms.count as u64;
        counts.boundary_rden += cs.count as u64;
    }
    for &(pid, gid) in &matching.pairs {
        let (i, j) = ((pid - 2) as usize, (gid - 2) as usize);
        let (pm, gm) = (&pred_masks[i].1, &gt_masks[j].1);
        let (pms, pc, pcs) = &pred_prep[i];
        let (gms, gc, gcs) = &gt_prep[j];
        counts.overlap_inter += window_intersection(pm, pms, gm, gms);
        counts.boundary_pnum += within_slack(pc, gc, gcs, slack_radius);
        counts.boundary_rnum += within_slack(gc, pc, pcs, slack_radius);
    }

    Ok(PairEvaluation {
        overlap: prf_from_counts(
            counts.pred_instances,
            counts.gt_instances,
            counts.overlap_inter,
            counts.pred_pixels,
            counts.overlap_inter,
            counts.gt_pixels,
        ),
        boundary: prf_from_counts(
            counts.pred_instances,
            counts.gt_instances,
            counts.boundary_pnum,
            counts.boundary_pden,
            counts.boundary_rnum,
            counts.boundary_rden,
        ),
        matching,
        counts,
    })
}

/// The degenerate conventions plus the P/R/F formulas: both sides empty
/// scores 100/100/100, exactly one empty scores 0/0/0, otherwise the
/// numerator/denominator ratios apply (instance masks are nonempty by
/// construction, so denominators are positive).
fn prf_from_counts(np: usize, ng: usize, pnum: u64, pden: u64, rnum: u64, rden: u64) -> PRF {
    match (np == 0, ng == 0) {
        (true, true) => PRF::ALL_100,
        (true, false) | (false, true) => PRF::ALL_0,
        (false, false) => {
            PRF::from_fractions(pnum as f64 / pden as f64, rnum as f64 / rden as f64)
        }
    }
}

/// Overlap precision/recall/F: intersections of matched pairs over total
/// predicted pixels (precision) and total ground-truth pixels (recall).
pub fn overlap_prf(pred: &InstanceLabelMap, gt: &InstanceLabelMap) -> Result<PRF> {
    Ok(evaluate_pair(pred, gt, 0)?.overlap)
}

/// Boundary precision/recall/F with dilation slack: contours are true
/// pixels with an out-of-mask 8-neighbor or on the image border; a contour
/// pixel counts when it lands inside the matched counterpart's contour
/// dilated by a disk of slack_radius.
pub fn boundary_prf(
    pred: &InstanceLabelMap,
    gt: &InstanceLabelMap,
    slack_radius: usize,
) -> Result<PRF> {
    Ok(evaluate_pair(pred, gt, slack_radius)?.boundary)
}

/// How per-image numbers combine into a dataset summary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    /// Unweighted mean of each per-image number.
    #[default]
    Macro,
    /// Pixel-weighted: counts are summed across images, then the formulas
    /// and the degenerate conventions apply once to the totals.
    Micro,
}

/// One evaluated image, keyed for reporting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub id: String,
    pub overlap: PRF,
    pub boundary: PRF,
    pub counts: EvalCounts,
}

/// Dataset-level summary plus the per-image rows it was built from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub aggregation: Aggregation,
    pub overlap: PRF,
    pub boundary: PRF,
    pub per_image: Vec<ImageReport>,
}

/// Combines per-image reports. Macro averages the six numbers directly;
/// Micro sums the raw counts first. An empty batch reports 0 everywhere.
pub fn aggregate(per_image: Vec<ImageReport>, mode: Aggregation) -> ScoreReport {
    let n = per_image.len();
    if n == 0 {
        return ScoreReport {
            aggregation: mode,
            overlap: PRF::ALL_0,
            boundary: PRF::ALL_0,
            per_image,
        };
    }
    let (overlap, boundary) = match mode {
        Aggregation::Macro => {
            let mut o = [0.0; 3];
            let mut b = [0.0; 3];
            for r in &per_image {
                o[0] += r.overlap.precision;
                o[1] += r.overlap.recall;
                o[2] += r.overlap.fmeasure;
                b[0] += r.boundary.precision;
                b[1] += r.boundary.recall;
                b[2] += r.boundary.fmeasure;
            }
            let nf = n as f64;
            (
                PRF {
                    precision: o[0] / nf,
                    recall: o[1] / nf,
                    fmeasure: o[2] / nf,
                },
                PRF {
                    precision: b[0] / nf,
                    recall: b[1] / nf,
                    fmeasure: b[2] / nf,
                },
            )
        }
        Aggregation::Micro => {
            let mut t = EvalCounts::default();
            for r in &per_image {
                let c = r.counts;
                t.pred_instances += c.pred_instances;
                t.gt_instances += c.gt_instances;
                t.overlap_inter += c.overlap_inter;
                t.pred_pixels += c.pred_pixels;
                t.gt_pixels += c.gt_pixels;
                t.boundary_pnum += c.boundary_pnum;
                t.boundary_pden += c.boundary_pden;
                t.boundary_rnum += c.boundary_rnum;
                t.boundary_rden += c.boundary_rden;
            }
            (
                prf_from_counts(
                    t.pred_instances,
                    t.gt_instances,
                    t.overlap_inter,
                    t.pred_pixels,
                    t.overlap_inter,
                    t.gt_pixels,
                ),
                prf_from_counts(
                    t.pred_instances,
                    t.gt_instances,
                    t.boundary_pnum,
                    t.boundary_pden,
                    t.boundary_rnum,
                    t.boundary_rden,
                ),
            )
        }
    };
    ScoreReport {
        aggregation: mode,
        overlap,
        boundary,
        per_image,
    }
}
