//! Runtime self-verification behind the `selfcheck` subcommand.
//!
//! Every check compares the shipped implementation against an independent
//! route computed here: central finite differences for the loss gradients,
//! a from-scratch flood fill for connected components, exhaustive
//! permutation search for the matching, and bitwise reruns for
//! determinism. The whole report is a pure function of the seed.

use crate::config::PipelineConfig;
use crate::losses::{
    direction_loss, rrn_loss, semantic_loss, weighted_ce, SemanticLossWeights,
};
use crate::augment::{augment_mask, AugmentConfig};
use crate::geometry::gt_direction_field;
use crate::metrics::{match_instances, pairwise_f};
use crate::morphology::{close, connected_components, dilate, erode, open, Connectivity, StructuringElement};
use crate::pipeline::segment_depth;
use crate::predictor::{DensePredictor, OraclePredictor};
use crate::rng::{substream, Stream};
use crate::scenegen::{generate_scene, SceneConfig};
use crate::types::{
    BinaryMask, DirectionField, ImageGrid, InstanceLabelMap, OrganizedPointCloud, Result,
    SemanticLabels, SemanticProbs,
};
use crate::voting::{hough_vote, VotingMode, VotingParams};
use rand::Rng;

/// Relative tolerance for gradient vs finite-difference agreement.
const GRAD_TOL: f64 = 1e-5;
/// Probe step for central differences.
const FD_STEP: f64 = 1e-5;

/// Outcome of one check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// The full battery's outcome for one seed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelfcheckReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl SelfcheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One line per check plus a summary line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.passed { "ok  " } else { "FAIL" };
            out.push_str(&format!("{tag}  {:<34}  {}\n", c.name, c.detail));
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        out.push_str(&format!(
            "selfcheck: {passed}/{} checks passed\n",
            self.checks.len()
        ));
        out
    }
}

/// Test hook: perturbs one analytic gradient before the finite-difference
/// comparison, so the report's failure line names the broken loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    None,
    SemanticGradient,
    DirectionGradient,
    RrnGradient,
}

pub fn run(seed: u64) -> SelfcheckReport {
    run_with_fault(seed, Fault::None)
}

pub fn run_with_fault(seed: u64, fault: Fault) -> SelfcheckReport {
    let checks = vec![
        semantic_gradient_check(seed, fault),
        direction_gradient_check(seed, fault),
        rrn_gradient_check(seed, fault),
        perfect_prediction_check(seed),
        voting_equivalence_check(seed),
        morphology_laws_check(seed),
        components_check(seed),
        matching_check(seed),
        augmentation_check(seed),
        pipeline_determinism_check(seed),
    ];
    SelfcheckReport { seed, checks }
}

fn central_diff(f: &dyn Fn(&[f64]) -> f64, x: &[f64], k: usize) -> f64 {
    let mut plus = x.to_vec();
    let mut minus = x.to_vec();
    plus[k] += FD_STEP;
    minus[k] -= FD_STEP;
    (f(&plus) - f(&minus)) / (2.0 * FD_STEP)
}

/// Relative error, or 0 when both sides are numerically zero.
fn rel_err(got: f64, want: f64) -> f64 {
    let denom = got.abs().max(want.abs());
    if denom < 1e-12 {
        0.0
    } else {
        (got - want).abs() / denom
    }
}

fn grad_result(name: &'static str, trials: usize, max_err: f64) -> CheckResult {
    CheckResult {
        name,
        passed: max_err <= GRAD_TOL,
        detail: format!("{trials} trials, max rel err {max_err:.2e}"),
    }
}

/// Random 3-class labels with every class present.
fn random_labels(g: ImageGrid, rng: &mut Stream) -> SemanticLabels {
    let mut v: Vec<u8> = (0..g.len()).map(|_| rng.random_range(0..3u8)).collect();
    v[0] = 0;
    v[1] = 1;
    v[2] = 2;
    SemanticLabels::new(g, 3, v).expect("labels in range")
}

/// Random simplexes bounded away from zero so the probes stay inside the
/// well-conditioned region.
fn random_probs(g: ImageGrid, classes: usize, rng: &mut Stream) -> Vec<f64> {
    let mut v = Vec::with_capacity(g.len() * classes);
    for _ in 0..g.len() {
        let raw: Vec<f64> = (0..classes).map(|_| rng.random_range(0.05..1.0)).collect();
        let sum: f64 = raw.iter().sum();
        v.extend(raw.iter().map(|x| x / sum));
    }
    v
}

fn semantic_gradient_check(seed: u64, fault: Fault) -> CheckResult {
    let g = ImageGrid::new(6, 6).expect("static grid");
    let mut max_err: f64 = 0.0;
    let trials = 20;
    for t in 0..trials {
        let mut rng = substream(seed, 100 + t);
        let gt = random_labels(g, &mut rng);
        let probs = random_probs(g, 3, &mut rng);
        let weights = SemanticLossWeights::from_labels(&gt);
        let (_, mut grad) = weighted_ce(&probs, 3, &gt, &weights);
        if fault == Fault::SemanticGradient {
            grad[0] += 0.5;
        }
        let f = |x: &[f64]| weighted_ce(x, 3, &gt, &weights).0;
        for k in 0..probs.len() {
            max_err = max_err.max(rel_err(grad[k], central_diff(&f, &probs, k)));
        }
    }
    grad_result("semantic gradient", trials as usize, max_err)
}

/// Two instances over a table strip, the fixture all direction checks use.
fn direction_fixture(g: ImageGrid) -> InstanceLabelMap {
    let mut v = vec![1u32; g.len()];
    for (r, c) in g.pixels() {
        if r < 1 {
            v[g.index(r, c)] = 0;
        }
        if (1..4).contains(&r) && (1..4).contains(&c) {
            v[g.index(r, c)] = 2;
        }
        if (4..6).contains(&r) && (3..6).contains(&c) {
            v[g.index(r, c)] = 3;
        }
    }
    InstanceLabelMap::new(g, v).expect("contiguous fixture ids")
}

fn direction_gradient_check(seed: u64, fault: Fault) -> CheckResult {
    let g = ImageGrid::new(6, 6).expect("static grid");
    let map = direction_fixture(g);
    let gt = gt_direction_field(&map);
    let mut max_err: f64 = 0.0;
    let trials = 20;
    for t in 0..trials {
        let mut rng = substream(seed, 200 + t);
        let dirs: Vec<[f64; 2]> = (0..g.len())
            .map(|_| {
                let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                [a.sin(), a.cos()]
            })
            .collect();
        let pred = DirectionField::new(g, dirs).expect("unit directions");
        let (_, mut grad) = direction_loss(&pred, &gt, &map).expect("same grid");
        if fault == Fault::DirectionGradient {
            grad[0][0] += 0.5;
        }
        let flat: Vec<f64> = pred.dirs().iter().flat_map(|d| [d[0], d[1]]).collect();
        let f = |x: &[f64]| {
            let dirs: Vec<[f64; 2]> = x.chunks_exact(2).map(|p| [p[0], p[1]]).collect();
            // The probe bends each norm by at most the step, inside the
            // field's drift tolerance.
            let field = DirectionField::with_validity(g, dirs, vec![true; g.len()])
                .expect("probe stays within norm tolerance");
            direction_loss(&field, &gt, &map).expect("same grid").0
        };
        for k in 0..flat.len() {
            max_err = max_err.max(rel_err(grad[k / 2][k % 2], central_diff(&f, &flat, k)));
        }
    }
    grad_result("direction gradient", trials as usize, max_err)
}

fn rrn_gradient_check(seed: u64, fault: Fault) -> CheckResult {
    let g = ImageGrid::new(6, 6).expect("static grid");
    let mut max_err: f64 = 0.0;
    let trials = 20;
    for t in 0..trials {
        let mut rng = substream(seed, 300 + t);
        let mask = BinaryMask::from_fn(g, |_, _| rng.random_bool(0.4));
        let probs = random_probs(g, 2, &mut rng);
        let pred = SemanticProbs::new(g, 2, probs.clone()).expect("normalized rows");
        let (_, mut grad) = rrn_loss(&pred, &mask).expect("same grid");
        if fault == Fault::RrnGradient {
            grad[0] += 0.5;
        }
        let labels = SemanticLabels::new(
            g,
            2,
            mask.as_slice().iter().map(|&b| b as u8).collect(),
        )
        .expect("binary labels");
        let weights = SemanticLossWeights::from_labels(&labels);
        let f = |x: &[f64]| weighted_ce(x, 2, &labels, &weights).0;
        for k in 0..probs.len() {
            max_err = max_err.max(rel_err(grad[k], central_diff(&f, &probs, k)));
        }
    }
    grad_result("rrn gradient", trials as usize, max_err)
}

fn perfect_prediction_check(seed: u64) -> CheckResult {
    let g = ImageGrid::new(8, 8).expect("static grid");
    let mut rng = substream(seed, 400);
    let map = direction_fixture(ImageGrid::new(6, 6).expect("static grid"));

    let gt = random_labels(g, &mut rng);
    let mut onehot = vec![0.0; g.len() * 3];
    for (i, &l) in gt.as_slice().iter().enumerate() {
        onehot[i * 3 + l as usize] = 1.0;
    }
    let pred = SemanticProbs::new(g, 3, onehot).expect("one-hot rows");
    let (sv, _) = semantic_loss(&pred, &gt).expect("same grid");

    let dirs = gt_direction_field(&map);
    let (dv, _) = direction_loss(&dirs, &dirs, &map).expect("same grid");

    let mask = BinaryMask::from_fn(g, |_, _| rng.random_bool(0.5));
    let mut two = vec![0.0; g.len() * 2];
    for (i, &b) in mask.as_slice().iter().enumerate() {
        two[i * 2 + b as usize] = 1.0;
    }
    let rpred = SemanticProbs::new(g, 2, two).expect("one-hot rows");
    let (rv, _) = rrn_loss(&rpred, &mask).expect("same grid");

    let worst = sv.abs().max(dv.abs()).max(rv.abs());
    CheckResult {
        name: "zero loss at perfect prediction",
        passed: worst <= 1e-9,
        detail: format!("semantic {sv:.1e}, direction {dv:.1e}, rrn {rv:.1e}"),
    }
}

/// Random instance map: table below a background band, up to three
/// possibly-overlapping rectangles, ids compacted after overwrites.
fn random_instance_map(g: ImageGrid, rng: &mut Stream) -> InstanceLabelMap {
    let mut v = vec![0u32; g.len()];
    let band = g.height / 4;
    for (r, c) in g.pixels() {
        if r >= band {
            v[g.index(r, c)] = 1;
        }
    }
    let rects = rng.random_range(0..=3usize);
    for k in 0..rects {
        let h = rng.random_range(1..=g.height.div_ceil(2));
        let w = rng.random_range(1..=g.width.div_ceil(2));
        let r0 = rng.random_range(0..=g.height - h);
        let c0 = rng.random_range(0..=g.width - w);
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                v[g.index(r, c)] = k as u32 + 2;
            }
        }
    }
    let mut ids: Vec<u32> = v.iter().copied().filter(|&x| x >= 2).collect();
    ids.sort_unstable();
    ids.dedup();
    for x in v.iter_mut() {
        if *x >= 2 {
            *x = 2 + ids.binary_search(x).expect("id collected above") as u32;
        }
    }
    InstanceLabelMap::new(g, v).expect("ids compacted")
}

fn voting_equivalence_check(seed: u64) -> CheckResult {
    let trials = 50;
    let mut mismatches = 0usize;
    for t in 0..trials {
        let mut rng = substream(seed, 500 + t);
        let g = ImageGrid::new(rng.random_range(8..=48), rng.random_range(8..=48))
            .expect("positive dims");
        let map = random_instance_map(g, &mut rng);
        let cloud =
            OrganizedPointCloud::new(g, vec![[0.0, 0.0, 1.0]; g.len()], vec![true; g.len()])
                .expect("matching lengths");
        let oracle = OraclePredictor::noisy(map, 10.0, 0.05, seed ^ t)
            .expect("valid noise knobs");
        let (probs, dirs) = oracle.predict(&cloud).expect("matching grid");
        let labels = probs.argmax_labels();
        let params = VotingParams::default_for_grid(g);
        let fast = hough_vote(&labels, &dirs, &params, VotingMode::Fast);
        let exact = hough_vote(&labels, &dirs, &params, VotingMode::Exact);
        if fast.expect("fast voting") != exact.expect("exact voting") {
            mismatches += 1;
        }
    }
    CheckResult {
        name: "fast voting matches exact",
        passed: mismatches == 0,
        detail: format!("{trials} grids, {mismatches} mismatches"),
    }
}

fn subset(a: &BinaryMask, b: &BinaryMask) -> bool {
    a.as_slice().iter().zip(b.as_slice()).all(|(&x, &y)| !x || y)
}

fn morphology_laws_check(seed: u64) -> CheckResult {
    let trials = 100;
    let mut violations = 0usize;
    for t in 0..trials {
        let mut rng = substream(seed, 600 + t);
        let g = ImageGrid::new(rng.random_range(1..=24), rng.random_range(1..=24))
            .expect("positive dims");
        let density = rng.random_range(0.0..1.0);
        let mask = BinaryMask::from_fn(g, |_, _| rng.random_bool(density));
        let radius = rng.random_range(1..=3usize);
        let se = if rng.random_bool(0.5) {
            StructuringElement::square(radius)
        } else {
            StructuringElement::disk(radius)
        }
        .expect("radius in range");
        let opened = open(&mask, &se);
        let closed = close(&mask, &se);
        // Closing is extensive only at least `radius` away from the border,
        // where out-of-bounds-as-background cannot erode it back.
        let interior_extensive = g.pixels().all(|(r, c)| {
            let interior = r >= radius
                && c >= radius
                && r + radius < g.height
                && c + radius < g.width;
            !interior || !mask.get(r, c) || closed.get(r, c)
        });
        let ok = subset(&opened, &mask)
            && interior_extensive
            && open(&opened, &se) == opened
            && close(&closed, &se) == closed
            && subset(&erode(&mask, &se), &mask)
            && subset(&mask, &dilate(&mask, &se));
        if !ok {
            violations += 1;
        }
    }
    CheckResult {
        name: "morphology laws",
        passed: violations == 0,
        detail: format!("{trials} masks, {violations} violations"),
    }
}

/// Plain BFS flood fill, sharing nothing with the morphology module.
fn flood_fill_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<Vec<usize>> {
    let g = mask.grid();
    let mut seen = vec![false; g.len()];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for start in 0..g.len() {
        if seen[start] || !mask.as_slice()[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            pixels.push(i);
            let (r, c) = (i / g.width, i % g.width);
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if (dr == 0 && dc == 0)
                        || (connectivity == Connectivity::Four && dr != 0 && dc != 0)
                    {
                        continue;
                    }
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if nr < 0 || nc < 0 || nr >= g.height as i64 || nc >= g.width as i64 {
                        continue;
                    }
                    let j = nr as usize * g.width + nc as usize;
                    if mask.as_slice()[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        pixels.sort_unstable();
        comps.push(pixels);
    }
    // The implementation's documented order: size descending, then first
    // pixel ascending.
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    comps
}

fn components_check(seed: u64) -> CheckResult {
    let trials = 100;
    let mut mismatches = 0usize;
    for t in 0..trials {
        let mut rng = substream(seed, 700 + t);
        let g = ImageGrid::new(rng.random_range(1..=24), rng.random_range(1..=24))
            .expect("positive dims");
        let mask = BinaryMask::from_fn(g, |_, _| rng.random_bool(0.45));
        let connectivity = if t % 2 == 0 {
            Connectivity::Four
        } else {
            Connectivity::Eight
        };
        let got: Vec<Vec<usize>> = connected_components(&mask, connectivity)
            .iter()
            .map(|m| {
                m.as_slice()
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &b)| b.then_some(i))
                    .collect()
            })
            .collect();
        if got != flood_fill_components(&mask, connectivity) {
            mismatches += 1;
        }
    }
    CheckResult {
        name: "components match flood fill",
        passed: mismatches == 0,
        detail: format!("{trials} masks, {mismatches} mismatches"),
    }
}

/// Best achievable matched-pair score by exhaustive permutation search over
/// the zero-padded square score matrix.
fn brute_force_best(scores: &[f64], np: usize, ng: usize) -> f64 {
    let n = np.max(ng);
    let mut cols: Vec<usize> = (0..n).collect();
    let mut best = 0.0f64;
    permute(&mut cols, 0, &mut |perm| {
        let total: f64 = perm
            .iter()
            .enumerate()
            .filter(|&(i, &j)| i < np && j < ng)
            .map(|(i, &j)| scores[i * ng + j])
            .sum();
        best = best.max(total);
    });
    best
}

fn permute(items: &mut [usize], k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

fn matching_check(seed: u64) -> CheckResult {
    let trials = 60;
    let mut failures = 0usize;
    for t in 0..trials {
        let mut rng = substream(seed, 800 + t);
        let g = ImageGrid::new(16, 16).expect("static grid");
        let pred = random_instance_map(g, &mut rng);
        let gt = random_instance_map(g, &mut rng);
        let pred_masks = pred.instance_masks();
        let gt_masks = gt.instance_masks();
        let (np, ng) = (pred_masks.len(), gt_masks.len());
        let mut scores = vec![0.0; np * ng];
        for (i, (_, pm)) in pred_masks.iter().enumerate() {
            for (j, (_, gm)) in gt_masks.iter().enumerate() {
                scores[i * ng + j] = pairwise_f(pm, gm);
            }
        }
        let matching = match_instances(&pred, &gt).expect("same grid");
        let achieved: f64 = matching
            .pairs
            .iter()
            .map(|&(pi, gi)| {
                let i = pred_masks.iter().position(|&(id, _)| id == pi).expect("pred id");
                let j = gt_masks.iter().position(|&(id, _)| id == gi).expect("gt id");
                scores[i * ng + j]
            })
            .sum();
        let best = brute_force_best(&scores, np, ng);
        let ok = (achieved - best).abs() <= 1e-9
            && matching.pairs.len() == np.min(ng)
            && matching.unmatched_pred.len() == np - np.min(ng)
            && matching.unmatched_gt.len() == ng - np.min(ng);
        if !ok {
            failures += 1;
        }
    }
    CheckResult {
        name: "matching matches brute force",
        passed: failures == 0,
        detail: format!("{trials} cases, {failures} suboptimal"),
    }
}

fn augmentation_check(seed: u64) -> CheckResult {
    let g = ImageGrid::new(48, 48).expect("static grid");
    let cfg = AugmentConfig::default();
    let frozen = AugmentConfig {
        apply_probs: [0.0; 4],
        ..AugmentConfig::default()
    };
    let trials = 50;
    let mut failures = 0usize;
    for t in 0..trials {
        let mut rng = substream(seed, 900 + t);
        let h = rng.random_range(4..=20usize);
        let w = rng.random_range(4..=20usize);
        let r0 = rng.random_range(0..=g.height - h);
        let c0 = rng.random_range(0..=g.width - w);
        let mask =
            BinaryMask::from_fn(g, |r, c| (r0..r0 + h).contains(&r) && (c0..c0 + w).contains(&c));
        let once = augment_mask(&mask, &cfg, &mut substream(seed, 2000 + t));
        let twice = augment_mask(&mask, &cfg, &mut substream(seed, 2000 + t));
        let identity = augment_mask(&mask, &frozen, &mut substream(seed, 3000 + t));
        let ok = match (once, twice, identity) {
            (Ok(a), Ok(b), Ok(id)) => a == b && a.count_true() > 0 && id == mask,
            _ => false,
        };
        if !ok {
            failures += 1;
        }
    }
    CheckResult {
        name: "augmentation identity, determinism",
        passed: failures == 0,
        detail: format!("{trials} masks, {failures} failures"),
    }
}

fn pipeline_determinism_check(seed: u64) -> CheckResult {
    fn run_once(seed: u64) -> Result<(InstanceLabelMap, InstanceLabelMap, crate::types::DepthMap)> {
        let scene_cfg = SceneConfig {
            width: 160,
            height: 120,
            ..SceneConfig::default()
        };
        let scene = generate_scene(&scene_cfg, seed, 0)?;
        let oracle = OraclePredictor::noisy(scene.instances.clone(), 5.0, 0.01, seed)?;
        let cfg = PipelineConfig::default();
        let seg = segment_depth(&scene.depth, &scene.camera, &oracle, &cfg, VotingMode::Fast)?;
        Ok((scene.instances, seg, scene.depth))
    }
    match (run_once(seed), run_once(seed)) {
        (Ok((gt1, seg1, d1)), Ok((gt2, seg2, d2))) => {
            let identical = gt1 == gt2 && seg1 == seg2 && d1 == d2;
            CheckResult {
                name: "pipeline determinism",
                passed: identical,
                detail: if identical {
                    format!(
                        "scene and segmentation identical across reruns, {} instances",
                        seg1.num_instances()
                    )
                } else {
                    "reruns differ".to_string()
                },
            }
        }
        (Err(e), _) | (_, Err(e)) => CheckResult {
            name: "pipeline determinism",
            passed: false,
            detail: format!("pipeline error: {e}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_run_passes_every_check() {
        let report = run(42);
        for c in &report.checks {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
        assert_eq!(report.checks.len(), 10);
        assert!(report.all_passed());
    }

    #[test]
    fn report_is_identical_across_reruns() {
        assert_eq!(run(7), run(7));
    }

    #[test]
    fn injected_fault_fails_exactly_the_named_loss() {
        for (fault, name) in [
            (Fault::SemanticGradient, "semantic gradient"),
            (Fault::DirectionGradient, "direction gradient"),
            (Fault::RrnGradient, "rrn gradient"),
        ] {
            let report = run_with_fault(11, fault);
            for c in &report.checks {
                if c.name == name {
                    assert!(!c.passed, "{fault:?} should fail {name}");
                } else {
                    assert!(c.passed, "{fault:?} broke unrelated check {}", c.name);
                }
            }
            let rendered = report.render();
            let fail_line = rendered
                .lines()
                .find(|l| l.starts_with("FAIL"))
                .expect("one failing line");
            assert!(fail_line.contains(name));
        }
    }

    #[test]
    fn render_lists_every_check_and_a_summary() {
        let report = run(3);
        let rendered = report.render();
        assert_eq!(rendered.lines().count(), report.checks.len() + 1);
        assert!(rendered.ends_with("checks passed\n"));
        for c in &report.checks {
            assert!(rendered.contains(c.name));
        }
    }
}
