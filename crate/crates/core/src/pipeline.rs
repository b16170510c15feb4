//! End-to-end orchestration: dense prediction to cleaned instance masks,
//! the refinement-crop seam, and directory-level evaluation.

use std::path::Path;

use crate::augment::{crop_box_for, make_refine_pair, RefinePair, REFINE_SIZE};
use crate::config::{ImpConfig, PipelineConfig};
use crate::geometry::PinholeCamera;
use crate::io;
use crate::metrics::{aggregate, evaluate_pair, Aggregation, ImageReport, ScoreReport};
use crate::morphology::imp_process;
use crate::predictor::DensePredictor;
use crate::types::{
    BinaryMask, DepthMap, Error, InstanceLabelMap, OrganizedPointCloud, Result, RgbRaster,
    SemanticLabels, CLASS_TABLE,
};
use crate::voting::{hough_vote_detailed, Center, VotingMode};

/// Backprojects a depth image and segments the resulting cloud.
pub fn segment_depth(
    depth: &DepthMap,
    camera: &PinholeCamera,
    predictor: &dyn DensePredictor,
    cfg: &PipelineConfig,
    mode: VotingMode,
) -> Result<InstanceLabelMap> {
    segment_cloud(&camera.backproject(depth)?, predictor, cfg, mode)
}

/// The first pipeline stage: dense prediction, Hough voting, and per-mask
/// cleanup. Pixels without a valid 3D point are forced to background
/// before voting, so an all-invalid cloud yields zero instances no matter
/// what the predictor claims.
pub fn segment_cloud(
    cloud: &OrganizedPointCloud,
    predictor: &dyn DensePredictor,
    cfg: &PipelineConfig,
    mode: VotingMode,
) -> Result<InstanceLabelMap> {
    let grid = cloud.grid();
    let (probs, dirs) = predictor.predict(cloud)?;
    if probs.grid() != grid {
        return Err(Error::GridMismatch {
            context: "predictor semantic output must match the input grid",
            expected: grid,
            actual: probs.grid(),
        });
    }
    if dirs.grid() != grid {
        return Err(Error::GridMismatch {
            context: "predictor direction output must match the input grid",
            expected: grid,
            actual: dirs.grid(),
        });
    }
    if probs.classes() != 3 {
        return Err(Error::InvalidParam(format!(
            "predictor returned {} classes, the pipeline needs background/table/object",
            probs.classes()
        )));
    }

    let mut raw = probs.argmax_labels().as_slice().to_vec();
    for (l, &ok) in raw.iter_mut().zip(cloud.validity()) {
        if !ok {
            *l = 0;
        }
    }
    let labels = SemanticLabels::new(grid, 3, raw)?;
    let voting = cfg.voting.for_grid(grid)?;
    let (voted, centers) = hough_vote_detailed(&labels, &dirs, &voting, mode)?;
    if cfg.imp.enabled {
        imp_clean(&voted, &centers, &cfg.imp)
    } else {
        Ok(voted)
    }
}

/// Cleans each instance of a voted map with opening, closing, and
/// closest-component selection around its center, then rebuilds one
/// consistent map. Closing runs per instance, so two cleaned masks can
/// claim the same pixel; contested pixels go to the nearer center
/// (ties to the smaller instance id). Instances cleaned away entirely are
/// dropped and the ids compacted. `centers[k]` must be the center of
/// instance id k + 2, as produced by voting.
pub fn imp_clean(
    instances: &InstanceLabelMap,
    centers: &[Center],
    imp: &ImpConfig,
) -> Result<InstanceLabelMap> {
    let grid = instances.grid();
    let masks = instances.instance_masks();
    if masks.len() != centers.len() {
        return Err(Error::InvalidParam(format!(
            "imp_clean: {} instances but {} centers",
            masks.len(),
            centers.len()
        )));
    }
    let se_open = imp.open_element(grid)?;
    let se_close = imp.close_element(grid)?;

    // Background/table survives from the input; instance pixels are
    // re-derived from the cleaned masks. A pixel the cleanup removed from
    // every instance falls back to its non-object class.
    let mut out: Vec<u32> = instances
        .as_slice()
        .iter()
        .map(|&v| if v == CLASS_TABLE as u32 { v } else { 0 })
        .collect();
    let mut best_d2 = vec![i64::MAX; grid.len()];
    let mut used = Vec::new();
    for ((id, mask), center) in masks.iter().zip(centers) {
        let cleaned =
            imp_process(mask, (center.row, center.col), &se_open, &se_close, imp.connectivity);
        if cleaned.count_true() == 0 {
            continue;
        }
        used.push(*id);
        for (r, c) in cleaned.iter_true() {
            let dr = r as i64 - center.row as i64;
            let dc = c as i64 - center.col as i64;
            let d2 = dr * dr + dc * dc;
            let at = grid.index(r, c);
            // Strict inequality keeps the earlier (smaller) id on ties.
            if out[at] < 2 || d2 < best_d2[at] {
                out[at] = *id;
                best_d2[at] = d2;
            }
        }
    }

    let mut remap = std::collections::HashMap::new();
    for (next, id) in used.iter().enumerate() {
        remap.insert(*id, next as u32 + 2);
    }
    for v in out.iter_mut() {
        if *v >= 2 {
            *v = remap[v];
        }
    }
    InstanceLabelMap::new(grid, out)
}

/// Crops every instance for the external refiner: one pair per instance,
/// in ascending id order. At inference there is no ground truth, so the
/// pair's gt crop simply repeats the mask crop; writers omit it.
pub fn refine_seam(
    masks: &InstanceLabelMap,
    rgb: &RgbRaster,
    pad_frac: f64,
) -> Result<Vec<(u32, RefinePair)>> {
    masks
        .instance_masks()
        .into_iter()
        .map(|(id, mask)| Ok((id, make_refine_pair(rgb, &mask, &mask, pad_frac)?)))
        .collect()
}

/// Replaces instance masks with externally refined 224x224 masks by
/// inverting the crop transform: each refined mask is resized back into
/// the crop box its instance produced under `pad_frac` (nearest-neighbor,
/// the inverse of the seam's resize) and becomes the instance's new mask.
/// Instances without a refined mask keep their current pixels; an
/// all-empty refinement drops its instance. Contested pixels go to the
/// instance whose crop-box center is nearer (ties to the smaller id).
pub fn paste_refined(
    masks: &InstanceLabelMap,
    refined: &[(u32, BinaryMask)],
    pad_frac: f64,
) -> Result<InstanceLabelMap> {
    let grid = masks.grid();
    let refine_grid = crate::types::ImageGrid::new(REFINE_SIZE, REFINE_SIZE)?;
    let source = masks.instance_masks();
    for (id, mask) in refined {
        if mask.grid() != refine_grid {
            return Err(Error::GridMismatch {
                context: "paste_refined: refined masks must be 224x224",
                expected: refine_grid,
                actual: mask.grid(),
            });
        }
        if source.iter().all(|(sid, _)| sid != id) {
            return Err(Error::InvalidParam(format!(
                "paste_refined: no instance with id {id}"
            )));
        }
    }

    let mut out: Vec<u32> = masks
        .as_slice()
        .iter()
        .map(|&v| if v == CLASS_TABLE as u32 { v } else { 0 })
        .collect();
    let mut best_d2 = vec![f64::INFINITY; grid.len()];
    let mut used = Vec::new();
    for (id, mask) in &source {
        let replacement = refined.iter().find(|(rid, _)| rid == id);
        let new_mask = match replacement {
            None => mask.clone(),
            Some((_, r224)) => {
                let cb = crop_box_for(mask, pad_frac)?;
                let nn = |local: usize, len: usize| -> usize {
                    ((((local as f64 + 0.5) * REFINE_SIZE as f64 / len as f64).floor())
                        as usize)
                        .min(REFINE_SIZE - 1)
                };
                BinaryMask::from_fn(grid, |r, c| {
                    if r < cb.row0
                        || c < cb.col0
                        || r >= cb.row0 + cb.height
                        || c >= cb.col0 + cb.width
                    {
                        return false;
                    }
                    r224.get(nn(r - cb.row0, cb.height), nn(c - cb.col0, cb.width))
                })
            }
        };
        if new_mask.count_true() == 0 {
            continue;
        }
        let (cr, cc) = new_mask.centroid().expect("nonempty mask");
        used.push(*id);
        for (r, c) in new_mask.iter_true() {
            let d2 = (r as f64 - cr).powi(2) + (c as f64 - cc).powi(2);
            let at = grid.index(r, c);
            if out[at] < 2 || d2 < best_d2[at] {
                out[at] = *id;
                best_d2[at] = d2;
            }
        }
    }

    let mut remap = std::collections::HashMap::new();
    for (next, id) in used.iter().enumerate() {
        remap.insert(*id, next as u32 + 2);
    }
    for v in out.iter_mut() {
        if *v >= 2 {
            *v = remap[v];
        }
    }
    InstanceLabelMap::new(grid, out)
}

/// Directory-level evaluation result: the aggregate report plus scene ids
/// present on only one side (skipped).
#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub report: ScoreReport,
    pub missing: Vec<String>,
}

/// Evaluates every scene id present in both roots: `label.png` under
/// `<root>/<scene>/`. Pairs are scored on a bounded worker pool and merged
/// in scene-id order, so the report is identical for any worker count.
pub fn evaluate_dirs(
    pred_root: &Path,
    gt_root: &Path,
    slack_radius: Option<usize>,
    aggregation: Aggregation,
    workers: usize,
) -> Result<EvalOutcome> {
    if workers == 0 {
        return Err(Error::InvalidParam("workers must be positive".into()));
    }
    let list = |root: &Path| -> Result<Vec<(String, std::path::PathBuf)>> {
        let mut found = Vec::new();
        for entry in std::fs::read_dir(root)
            .map_err(|e| Error::Data(format!("{}: {e}", root.display())))?
        {
            let entry = entry.map_err(|e| Error::Data(format!("{}: {e}", root.display())))?;
            let path = entry.path();
            if path.is_dir() && path.join("label.png").is_file() {
                found.push((entry.file_name().to_string_lossy().into_owned(), path));
            }
        }
        found.sort();
        Ok(found)
    };
    let preds = list(pred_root)?;
    let gts = list(gt_root)?;

    let mut pairs = Vec::new();
    let mut missing = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < preds.len() || j < gts.len() {
        match (preds.get(i), gts.get(j)) {
            (Some(p), Some(g)) if p.0 == g.0 => {
                pairs.push((p.0.clone(), p.1.clone(), g.1.clone()));
                i += 1;
                j += 1;
            }
            (Some(p), Some(g)) if p.0 < g.0 => {
                missing.push(p.0.clone());
                i += 1;
            }
            (Some(_), Some(g)) => {
                missing.push(g.0.clone());
                j += 1;
            }
            (Some(p), None) => {
                missing.push(p.0.clone());
                i += 1;
            }
            (None, Some(g)) => {
                missing.push(g.0.clone());
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Data(format!("worker pool: {e}")))?;
    let mut rows: Vec<ImageReport> = pool.install(|| {
        use rayon::prelude::*;
        pairs
            .par_iter()
            .map(|(id, pred_dir, gt_dir)| {
                let pred = io::read_label_png(&pred_dir.join("label.png"))?;
                let gt = io::read_label_png(&gt_dir.join("label.png"))?;
                let slack =
                    slack_radius.unwrap_or_else(|| crate::metrics::default_slack(gt.grid()));
                let eval = evaluate_pair(&pred, &gt, slack)
                    .map_err(|e| Error::Data(format!("scene {id}: {e}")))?;
                Ok(ImageReport {
                    id: id.clone(),
                    overlap: eval.overlap,
                    boundary: eval.boundary,
                    counts: eval.counts,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(EvalOutcome { report: aggregate(rows, aggregation), missing })
}

/// Writes `summary.json` (the full report) and `per_image.csv` under
/// `out_dir`.
pub fn write_report(out_dir: &Path, report: &ScoreReport) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::Data(format!("{}: {e}", out_dir.display())))?;
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(out_dir.join("summary.json"), json)
        .map_err(|e| Error::Data(format!("{}: {e}", out_dir.display())))?;
    let mut csv = String::from(
        "id,overlap_precision,overlap_recall,overlap_f,boundary_precision,boundary_recall,boundary_f\n",
    );
    for row in &report.per_image {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.id,
            row.overlap.precision,
            row.overlap.recall,
            row.overlap.fmeasure,
            row.boundary.precision,
            row.boundary.recall,
            row.boundary.fmeasure,
        ));
    }
    std::fs::write(out_dir.join("per_image.csv"), csv)
        .map_err(|e| Error::Data(format!("{}: {e}", out_dir.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::VotingConfig;
    use crate::io::write_label_png;
    use crate::metrics::overlap_prf;
    use crate::predictor::OraclePredictor;
    use crate::types::{ImageGrid, SemanticProbs};

    fn grid(h: usize, w: usize) -> ImageGrid {
        ImageGrid::new(h, w).unwrap()
    }

    /// Table everywhere, rectangular instances on top.
    fn rect_scene(g: ImageGrid, rects: &[(usize, usize, usize, usize)]) -> InstanceLabelMap {
        let mut v = vec![CLASS_TABLE as u32; g.len()];
        for (k, &(r0, c0, r1, c1)) in rects.iter().enumerate() {
            for r in r0..=r1 {
                for c in c0..=c1 {
                    v[g.index(r, c)] = k as u32 + 2;
                }
            }
        }
        InstanceLabelMap::new(g, v).unwrap()
    }

    fn valid_cloud(g: ImageGrid) -> OrganizedPointCloud {
        OrganizedPointCloud::new(g, vec![[0.0, 0.0, 1.0]; g.len()], vec![true; g.len()])
            .unwrap()
    }

    fn test_config() -> PipelineConfig {
        PipelineConfig {
            voting: VotingConfig { nms_radius: Some(20.0), ..VotingConfig::default() },
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn zero_noise_oracle_reproduces_ground_truth_exactly() {
        let g = grid(96, 128);
        let gt = rect_scene(
            g,
            &[(10, 10, 25, 25), (10, 80, 25, 95), (60, 40, 75, 55)],
        );
        let cfg = test_config();
        let out = segment_cloud(
            &valid_cloud(g),
            &OraclePredictor::exact(gt.clone()),
            &cfg,
            VotingMode::Fast,
        )
        .unwrap();
        // Instance ids follow peak order, not ground-truth order, so compare
        // up to relabeling: same semantics, and each mask matched exactly.
        assert_eq!(out.semantics(), gt.semantics());
        assert_eq!(out.num_instances(), gt.num_instances());
        for (_, m) in gt.instance_masks() {
            assert_eq!(out.instance_masks().iter().filter(|(_, o)| *o == m).count(), 1);
        }
        let prf = overlap_prf(&out, &gt).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.fmeasure), (100.0, 100.0, 100.0));
    }

    #[test]
    fn fast_and_exact_agree_end_to_end() {
        let g = grid(64, 64);
        let gt = rect_scene(g, &[(5, 5, 16, 16), (40, 40, 55, 55)]);
        let cfg = test_config();
        let oracle = OraclePredictor::noisy(gt.clone(), 5.0, 0.01, 3).unwrap();
        let fast =
            segment_cloud(&valid_cloud(g), &oracle, &cfg, VotingMode::Fast).unwrap();
        let exact =
            segment_cloud(&valid_cloud(g), &oracle, &cfg, VotingMode::Exact).unwrap();
        assert_eq!(fast, exact);
    }

    #[test]
    fn all_invalid_cloud_yields_zero_instances() {
        let g = grid(48, 48);
        let gt = rect_scene(g, &[(10, 10, 20, 20)]);
        let cloud =
            OrganizedPointCloud::new(g, vec![[0.0; 3]; g.len()], vec![false; g.len()])
                .unwrap();
        let out = segment_cloud(
            &cloud,
            &OraclePredictor::exact(gt),
            &test_config(),
            VotingMode::Fast,
        )
        .unwrap();
        assert_eq!(out.num_instances(), 0);
        assert!(out.as_slice().iter().all(|&v| v == 0));
    }

    struct BadPredictor {
        grid: ImageGrid,
        classes: usize,
    }

    impl DensePredictor for BadPredictor {
        fn predict(
            &self,
            _cloud: &OrganizedPointCloud,
        ) -> Result<(SemanticProbs, crate::types::DirectionField)> {
            let n = self.grid.len();
            let mut probs = vec![0.0; n * self.classes];
            for px in probs.chunks_exact_mut(self.classes) {
                px[0] = 1.0;
            }
            Ok((
                SemanticProbs::new(self.grid, self.classes, probs)?,
                crate::geometry::gt_direction_field(&InstanceLabelMap::new(
                    self.grid,
                    vec![0; n],
                )?),
            ))
        }
    }

    #[test]
    fn predictor_contract_violations_are_rejected_by_name() {
        let g = grid(16, 16);
        let cloud = valid_cloud(g);
        let cfg = test_config();
        let wrong_grid = BadPredictor { grid: grid(16, 17), classes: 3 };
        let err = segment_cloud(&cloud, &wrong_grid, &cfg, VotingMode::Fast).unwrap_err();
        assert!(err.to_string().contains("grid"), "{err}");
        let wrong_classes = BadPredictor { grid: g, classes: 2 };
        let err =
            segment_cloud(&cloud, &wrong_classes, &cfg, VotingMode::Fast).unwrap_err();
        assert!(err.to_string().contains("classes"), "{err}");
    }

    #[test]
    fn imp_clean_gives_contested_pixels_to_the_nearer_center() {
        let g = grid(24, 24);
        // Instance 2 is a C-shape opening right; instance 3 sits inside its
        // mouth, so closing instance 2 claims instance 3's pixels too.
        let mut v = vec![CLASS_TABLE as u32; g.len()];
        for (r, c) in g.pixels() {
            let top = (4..=6).contains(&r) && (4..=16).contains(&c);
            let bottom = (12..=14).contains(&r) && (4..=16).contains(&c);
            let bridge = (7..=11).contains(&r) && (4..=6).contains(&c);
            if top || bottom || bridge {
                v[g.index(r, c)] = 2;
            }
            if (8..=10).contains(&r) && (10..=12).contains(&c) {
                v[g.index(r, c)] = 3;
            }
        }
        let map = InstanceLabelMap::new(g, v).unwrap();
        let centers = vec![
            Center { row: 9, col: 7, score: 1.0 },
            Center { row: 9, col: 11, score: 1.0 },
        ];
        let imp = ImpConfig {
            open_radius: Some(1),
            close_radius: Some(3),
            ..ImpConfig::default()
        };
        let out = imp_clean(&map, &centers, &imp).unwrap();
        assert_eq!(out.num_instances(), 2);
        // The block keeps its own pixels; the fill around it joins the C.
        assert_eq!(out.get(9, 11), 3);
        assert_eq!(out.get(8, 10), 3);
        assert_eq!(out.get(9, 8), 2);
        assert_eq!(out.get(5, 10), 2);
    }

    #[test]
    fn imp_clean_drops_emptied_instances_and_compacts_ids() {
        let g = grid(32, 32);
        // Instance 2 is salt (two isolated pixels), instance 3 is solid.
        let mut v = vec![0u32; g.len()];
        v[g.index(2, 2)] = 2;
        v[g.index(2, 6)] = 2;
        for r in 10..=20 {
            for c in 10..=20 {
                v[g.index(r, c)] = 3;
            }
        }
        let map = InstanceLabelMap::new(g, v).unwrap();
        let centers = vec![
            Center { row: 2, col: 4, score: 1.0 },
            Center { row: 15, col: 15, score: 1.0 },
        ];
        let imp = ImpConfig {
            open_radius: Some(1),
            close_radius: Some(2),
            ..ImpConfig::default()
        };
        let out = imp_clean(&map, &centers, &imp).unwrap();
        assert_eq!(out.num_instances(), 1);
        assert_eq!(out.get(15, 15), 2);
        assert_eq!(out.get(2, 2), 0);
    }

    #[test]
    fn refine_seam_makes_one_clipped_pair_per_instance() {
        let g = grid(64, 80);
        // The second instance touches the top-left corner.
        let gt = rect_scene(g, &[(20, 30, 40, 50), (0, 0, 10, 12)]);
        let rgb = RgbRaster::filled(g, [50, 60, 70]);
        let pairs = refine_seam(&gt, &rgb, 0.25).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].0, 2);
        assert_eq!(pairs[1].0, 3);
        for (_, p) in &pairs {
            assert_eq!(p.rgb_crop.grid(), grid(REFINE_SIZE, REFINE_SIZE));
            assert_eq!(p.mask_crop, p.gt_crop);
            assert!(p.crop_box.row0 + p.crop_box.height <= g.height);
            assert!(p.crop_box.col0 + p.crop_box.width <= g.width);
        }
    }

    #[test]
    fn paste_refined_inverts_the_crop_for_aligned_sizes() {
        let g = grid(128, 128);
        // 40x40 mask, pad 0.2: crop 56x56, and 224 = 4 * 56, so the
        // nearest-neighbor round trip is exact.
        let gt = rect_scene(g, &[(30, 50, 69, 89)]);
        let rgb = RgbRaster::filled(g, [0, 0, 0]);
        let pairs = refine_seam(&gt, &rgb, 0.2).unwrap();
        assert_eq!(pairs[0].1.crop_box.height, 56);
        let refined = vec![(2u32, pairs[0].1.mask_crop.clone())];
        let out = paste_refined(&gt, &refined, 0.2).unwrap();
        assert_eq!(out, gt);
    }

    #[test]
    fn paste_refined_drops_emptied_and_rejects_bad_input() {
        let g = grid(64, 64);
        let gt = rect_scene(g, &[(10, 10, 20, 20), (40, 40, 50, 50)]);
        let empty = BinaryMask::filled(grid(REFINE_SIZE, REFINE_SIZE), false);
        let out = paste_refined(&gt, &[(2, empty.clone())], 0.25).unwrap();
        assert_eq!(out.num_instances(), 1);
        assert_eq!(out.get(45, 45), 2);

        let wrong_size = BinaryMask::filled(grid(10, 10), true);
        assert!(paste_refined(&gt, &[(2, wrong_size)], 0.25).is_err());
        assert!(paste_refined(&gt, &[(9, empty)], 0.25).is_err());
    }

    #[test]
    fn evaluate_dirs_is_deterministic_and_lists_missing() {
        let g = grid(16, 16);
        let make = |rects: &[(usize, usize, usize, usize)]| rect_scene(g, rects);
        let gt_root = tempfile::tempdir().unwrap();
        let pred_root = tempfile::tempdir().unwrap();
        let write = |root: &Path, scene: &str, map: &InstanceLabelMap| {
            let dir = root.join(scene);
            std::fs::create_dir_all(&dir).unwrap();
            write_label_png(&dir.join("label.png"), map).unwrap();
        };
        let a = make(&[(2, 2, 7, 7)]);
        let b_gt = make(&[(4, 4, 11, 11)]);
        let b_pred = make(&[(5, 4, 12, 11)]);
        write(gt_root.path(), "a", &a);
        write(gt_root.path(), "b", &b_gt);
        write(gt_root.path(), "c", &a);
        write(pred_root.path(), "a", &a);
        write(pred_root.path(), "b", &b_pred);
        write(pred_root.path(), "d", &a);

        let one = evaluate_dirs(pred_root.path(), gt_root.path(), Some(1), Aggregation::Macro, 1)
            .unwrap();
        let four = evaluate_dirs(pred_root.path(), gt_root.path(), Some(1), Aggregation::Macro, 4)
            .unwrap();
        assert_eq!(one.report, four.report);
        assert_eq!(one.missing, vec!["c".to_string(), "d".to_string()]);
        assert_eq!(one.report.per_image.len(), 2);
        assert_eq!(one.report.per_image[0].id, "a");
        assert_eq!(one.report.per_image[0].overlap.fmeasure, 100.0);
        assert!(one.report.per_image[1].overlap.fmeasure < 100.0);

        let outdir = tempfile::tempdir().unwrap();
        write_report(outdir.path(), &one.report).unwrap();
        let csv = std::fs::read_to_string(outdir.path().join("per_image.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(outdir.path().join("summary.json").is_file());
    }
}
