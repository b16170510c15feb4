//! Training losses as pure functions returning (value, analytic gradient).
//!
//! Gradients are with respect to the prediction rasters themselves, i.e. the
//! post-softmax probabilities and post-normalization direction vectors;
//! chaining through a network's softmax or normalization layer is the
//! caller's job. Every gradient here is verified against central finite
//! differences in the test suite and in the runtime self-check.

use crate::types::{
    same_grid, BinaryMask, DirectionField, Error, InstanceLabelMap, Result, SemanticLabels,
    SemanticProbs, FIXED_DIRECTION,
};

/// Probabilities are clamped here before the log so that a zero never
/// produces an infinite loss; inside the clamp region the derivative is 0.
pub const PROB_CLAMP: f64 = 1e-12;

/// Default weight of the background/table term of the direction loss.
pub const DEFAULT_LAMBDA_BT: f64 = 0.1;

/// Per-pixel cross-entropy weights: pixel i carries weight inversely
/// proportional to the number of pixels sharing its ground-truth class,
/// normalized so all weights sum to 1. Classes with zero pixels contribute
/// nothing to the normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticLossWeights {
    weights: Vec<f64>,
}

impl SemanticLossWeights {
    pub fn from_labels(gt: &SemanticLabels) -> Self {
        let mut counts = vec![0usize; gt.classes()];
        for &l in gt.as_slice() {
            counts[l as usize] += 1;
        }
        // Raw weights 1/count_c sum to the number of present classes, so
        // the normalized weight is 1 / (count_c * present).
        let present = counts.iter().filter(|&&c| c > 0).count() as f64;
        let weights = gt
            .as_slice()
            .iter()
            .map(|&l| 1.0 / (counts[l as usize] as f64 * present))
            .collect();
        Self { weights }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }
}

/// Weights of the direction loss: alpha gives each instance total weight 1
/// split evenly over its pixels (and is 0 off the objects); beta splits
/// weight 1 evenly over background and table pixels; lambda_bt scales the
/// background/table term.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionLossWeights {
    alpha: Vec<f64>,
    beta: f64,
    lambda_bt: f64,
}

impl DirectionLossWeights {
    pub fn from_instances(gt: &InstanceLabelMap) -> Self {
        Self::with_lambda(gt, DEFAULT_LAMBDA_BT)
    }

    pub fn with_lambda(gt: &InstanceLabelMap, lambda_bt: f64) -> Self {
        let mut sizes = vec![0usize; gt.num_instances()];
        let mut bt = 0usize;
        for &l in gt.as_slice() {
            if l >= 2 {
                sizes[(l - 2) as usize] += 1;
            } else {
                bt += 1;
            }
        }
        let alpha = gt
            .as_slice()
            .iter()
            .map(|&l| {
                if l >= 2 {
                    1.0 / sizes[(l - 2) as usize] as f64
                } else {
                    0.0
                }
            })
            .collect();
        let beta = if bt > 0 { 1.0 / bt as f64 } else { 0.0 };
        Self {
            alpha,
            beta,
            lambda_bt,
        }
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda_bt(&self) -> f64 {
        self.lambda_bt
    }
}

/// Weighted cross-entropy over raw probability storage, the form finite
/// difference probes and foreign callers use (no simplex validation). The
/// gradient is the exact derivative of the clamped expression: -w/p at the
/// ground-truth class when p is at or above the clamp, 0 below it, 0
/// elsewhere.
pub fn weighted_ce(
    probs: &[f64],
    classes: usize,
    gt: &SemanticLabels,
    weights: &SemanticLossWeights,
) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = vec![0.0; probs.len()];
    for (i, (&l, &w)) in gt
        .as_slice()
        .iter()
        .zip(weights.as_slice())
        .enumerate()
    {
        let at = i * classes + l as usize;
        let p = probs[at];
        value += w * -p.max(PROB_CLAMP).ln();
        if p >= PROB_CLAMP {
            grad[at] = -w / p;
        }
    }
    (value, grad)
}

/// Class-weighted cross-entropy between predicted probabilities and hard
/// ground-truth labels. Returns the scalar loss and its gradient laid out
/// like the probability raster (pixel-major, classes contiguous). Zero
/// exactly when the prediction is one-hot correct at every pixel.
pub fn semantic_loss(pred: &SemanticProbs, gt: &SemanticLabels) -> Result<(f64, Vec<f64>)> {
    same_grid("semantic_loss", gt.grid(), pred.grid())?;
    if pred.classes() != gt.classes() {
        return Err(Error::InvalidParam(format!(
            "semantic_loss: prediction has {} classes, ground truth {}",
            pred.classes(),
            gt.classes()
        )));
    }
    let weights = SemanticLossWeights::from_labels(gt);
    Ok(weighted_ce(pred.as_slice(), pred.classes(), gt, &weights))
}

/// Weighted cosine-similarity loss on direction fields. Object pixels pay
/// alpha_i/2 * (1 - pred . gt); background and table pixels pay
/// lambda_bt*beta/2 * (1 - pred . FIXED_DIRECTION). The loss is linear in
/// the prediction, so the gradient is the constant -alpha_i/2 * gt_i on
/// objects and -lambda_bt*beta/2 * FIXED_DIRECTION elsewhere. Validity
/// flags are ignored: both fields are read densely.
pub fn direction_loss(
    pred: &DirectionField,
    gt: &DirectionField,
    gt_instances: &InstanceLabelMap,
) -> Result<(f64, Vec<[f64; 2]>)> {
    same_grid("direction_loss", gt_instances.grid(), pred.grid())?;
    same_grid("direction_loss", gt_instances.grid(), gt.grid())?;
    let weights = DirectionLossWeights::from_instances(gt_instances);
    let bt_coef = weights.lambda_bt * weights.beta / 2.0;
    let mut value = 0.0;
    let mut grad = vec![[0.0; 2]; pred.dirs().len()];
    for (i, &l) in gt_instances.as_slice().iter().enumerate() {
        let p = pred.dirs()[i];
        if l >= 2 {
            let v = gt.dirs()[i];
            let a = weights.alpha[i] / 2.0;
            value += a * (1.0 - (p[0] * v[0] + p[1] * v[1]));
            grad[i] = [-a * v[0], -a * v[1]];
        } else {
            let f = FIXED_DIRECTION;
            value += bt_coef * (1.0 - (p[0] * f[0] + p[1] * f[1]));
            grad[i] = [-bt_coef * f[0], -bt_coef * f[1]];
        }
    }
    Ok((value, grad))
}

/// Both loss components and their sum.
#[derive(Clone, Debug, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    pub semantic_value: f64,
    pub direction_value: f64,
    /// Gradient of the semantic component, probability-raster layout.
    pub semantic_grad: Vec<f64>,
    /// Gradient of the direction component, one 2-vector per pixel.
    pub direction_grad: Vec<[f64; 2]>,
}

/// The combined training loss: semantic plus direction.
pub fn total_loss(
    pred_probs: &SemanticProbs,
    gt_labels: &SemanticLabels,
    pred_dirs: &DirectionField,
    gt_dirs: &DirectionField,
    gt_instances: &InstanceLabelMap,
) -> Result<TotalLoss> {
    let (semantic_value, semantic_grad) = semantic_loss(pred_probs, gt_labels)?;
    let (direction_value, direction_grad) = direction_loss(pred_dirs, gt_dirs, gt_instances)?;
    Ok(TotalLoss {
        value: semantic_value + direction_value,
        semantic_value,
        direction_value,
        semantic_grad,
        direction_grad,
    })
}

/// The refinement loss: the same weighted cross entropy with two classes,
/// background (0) versus mask foreground (1).
pub fn rrn_loss(pred: &SemanticProbs, gt: &BinaryMask) -> Result<(f64, Vec<f64>)> {
    same_grid("rrn_loss", gt.grid(), pred.grid())?;
    if pred.classes() != 2 {
        return Err(Error::InvalidParam(format!(
            "rrn_loss: prediction has {} classes, expected 2",
            pred.classes()
        )));
    }
    let labels = SemanticLabels::new(
        gt.grid(),
        2,
        gt.as_slice().iter().map(|&b| b as u8).collect(),
    )?;
    let weights = SemanticLossWeights::from_labels(&labels);
    Ok(weighted_ce(pred.as_slice(), 2, &labels, &weights))
}
