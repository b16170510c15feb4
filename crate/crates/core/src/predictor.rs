//! The seam where dense prediction networks plug into the pipeline, plus a
//! ground-truth-backed stand-in used for testing and synthetic benchmarks.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::gt_direction_field;
use crate::rng::substream;
use crate::types::{
    same_grid, DirectionField, Error, InstanceLabelMap, OrganizedPointCloud, Result,
    SemanticLabels, SemanticProbs,
};

/// A dense predictor maps an organized point cloud to per-pixel class
/// probabilities and center directions on the same grid. Implementations
/// must return outputs whose grids equal the input grid; the pipeline
/// re-checks this and refuses violating predictors.
pub trait DensePredictor {
    fn predict(&self, cloud: &OrganizedPointCloud) -> Result<(SemanticProbs, DirectionField)>;
}

/// One-hot probabilities for hard labels: probability 1 at each pixel's
/// class, 0 elsewhere.
pub fn one_hot_probs(labels: &SemanticLabels) -> SemanticProbs {
    let classes = labels.classes();
    let mut probs = vec![0.0; labels.grid().len() * classes];
    for (i, &l) in labels.as_slice().iter().enumerate() {
        probs[i * classes + l as usize] = 1.0;
    }
    SemanticProbs::new(labels.grid(), classes, probs).expect("one-hot rows are a simplex")
}

/// Predictor that answers from a ground-truth instance map, optionally
/// corrupted: per-pixel label flips at a fixed rate and Gaussian angular
/// noise on every direction. With both knobs at zero the outputs are
/// exactly the one-hot semantics and the analytic direction field.
///
/// Corruption is deterministic in `seed` and independent of the cloud's
/// values (only the grid is consulted), so repeated calls agree. Draws per
/// pixel, row-major: the flip coin, the replacement class offset when the
/// coin fires, then the rotation angle; a knob at zero skips its draws.
#[derive(Clone, Debug)]
pub struct OraclePredictor {
    gt: InstanceLabelMap,
    direction_noise_deg: f64,
    label_flip_prob: f64,
    seed: u64,
}

impl OraclePredictor {
    /// Noise-free oracle: exact semantics and directions.
    pub fn exact(gt: InstanceLabelMap) -> Self {
        Self { gt, direction_noise_deg: 0.0, label_flip_prob: 0.0, seed: 0 }
    }

    /// Oracle with angular direction noise (standard deviation in degrees)
    /// and a per-pixel probability of replacing the semantic class with a
    /// uniformly random other class.
    pub fn noisy(
        gt: InstanceLabelMap,
        direction_noise_deg: f64,
        label_flip_prob: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(direction_noise_deg.is_finite() && direction_noise_deg >= 0.0) {
            return Err(Error::InvalidParam("direction_noise_deg must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&label_flip_prob) {
            return Err(Error::InvalidParam("label_flip_prob outside [0, 1]".into()));
        }
        Ok(Self { gt, direction_noise_deg, label_flip_prob, seed })
    }

    pub fn ground_truth(&self) -> &InstanceLabelMap {
        &self.gt
    }
}

impl DensePredictor for OraclePredictor {
    fn predict(&self, cloud: &OrganizedPointCloud) -> Result<(SemanticProbs, DirectionField)> {
        let grid = self.gt.grid();
        if cloud.grid() != grid {
            return Err(Error::GridMismatch {
                context: "OraclePredictor::predict",
                expected: grid,
                actual: cloud.grid(),
            });
        }
        let labels = self.gt.semantics();
        let dirs = gt_direction_field(&self.gt);
        if self.label_flip_prob == 0.0 && self.direction_noise_deg == 0.0 {
            return Ok((one_hot_probs(&labels), dirs));
        }

        let mut rng = substream(self.seed, 0);
        let sigma = self.direction_noise_deg.to_radians();
        let normal = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE))
            .expect("finite nonnegative sigma");
        let classes = labels.classes() as u8;
        let mut raw = labels.as_slice().to_vec();
        let mut vecs = dirs.dirs().to_vec();
        for i in 0..grid.len() {
            if self.label_flip_prob > 0.0 && rng.random_bool(self.label_flip_prob) {
                let offset = rng.random_range(1..classes);
                raw[i] = (raw[i] + offset) % classes;
            }
            if self.direction_noise_deg > 0.0 {
                let theta = normal.sample(&mut rng);
                let (sin, cos) = theta.sin_cos();
                let [dr, dc] = vecs[i];
                vecs[i] = [dr * cos - dc * sin, dr * sin + dc * cos];
            }
        }
        Ok((
            one_hot_probs(&SemanticLabels::new(grid, classes as usize, raw)?),
            DirectionField::with_validity(grid, vecs, dirs.validity().to_vec())?,
        ))
    }
}

/// Replays one fixed prediction, e.g. loaded from a dense cache file.
#[derive(Clone, Debug)]
pub struct FixedPredictor {
    probs: SemanticProbs,
    dirs: DirectionField,
}

impl FixedPredictor {
    pub fn new(probs: SemanticProbs, dirs: DirectionField) -> Result<Self> {
        same_grid("FixedPredictor", probs.grid(), dirs.grid())?;
        Ok(Self { probs, dirs })
    }
}

impl DensePredictor for FixedPredictor {
    fn predict(&self, cloud: &OrganizedPointCloud) -> Result<(SemanticProbs, DirectionField)> {
        same_grid("FixedPredictor::predict", self.probs.grid(), cloud.grid())?;
        Ok((self.probs.clone(), self.dirs.clone()))
    }
}
