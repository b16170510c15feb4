//! One JSON document holding every tunable in the toolkit. Each section
//! deserializes with defaults, so a config file only needs the keys it
//! changes; grid-derived knobs (suppression radius, cleanup element radii,
//! boundary slack) accept null/absent to mean "derive from the image".

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::metrics::{self, Aggregation};
use crate::morphology::{Connectivity, SeShape, StructuringElement};
use crate::scenegen::{NoiseConfig, SceneConfig};
use crate::types::{Error, ImageGrid, Result};
use crate::voting::VotingParams;

/// Voting tunables as stored in config: identical to [`VotingParams`]
/// except that the suppression radius may be left to scale with the image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VotingConfig {
    pub num_bins: usize,
    pub score_threshold: f64,
    /// None derives diagonal / 16 from the image, the library default.
    pub nms_radius: Option<f64>,
    pub assign_angle_tol_deg: f64,
}

impl Default for VotingConfig {
    fn default() -> Self {
        let p = VotingParams::default();
        Self {
            num_bins: p.num_bins,
            score_threshold: p.score_threshold,
            nms_radius: None,
            assign_angle_tol_deg: p.assign_angle_tol_deg,
        }
    }
}

impl VotingConfig {
    /// Concrete parameters for one image size.
    pub fn for_grid(&self, grid: ImageGrid) -> Result<VotingParams> {
        let params = VotingParams {
            num_bins: self.num_bins,
            score_threshold: self.score_threshold,
            nms_radius: self
                .nms_radius
                .unwrap_or_else(|| VotingParams::default_for_grid(grid).nms_radius),
            assign_angle_tol_deg: self.assign_angle_tol_deg,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Mask cleanup applied to each voted instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImpConfig {
    /// Skip cleanup entirely when false (voting output passes through).
    pub enabled: bool,
    pub se_shape: SeShape,
    /// Opening element radius; None derives round(0.004 * diagonal).
    pub open_radius: Option<usize>,
    /// Closing element radius; None derives round(0.01 * diagonal).
    pub close_radius: Option<usize>,
    pub connectivity: Connectivity,
}

impl Default for ImpConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            se_shape: SeShape::Square,
            open_radius: None,
            close_radius: None,
            connectivity: Connectivity::Eight,
        }
    }
}

impl ImpConfig {
    pub fn open_element(&self, grid: ImageGrid) -> Result<StructuringElement> {
        let radius = self
            .open_radius
            .unwrap_or_else(|| StructuringElement::default_open_for_grid(grid).radius());
        StructuringElement::new(self.se_shape, radius)
    }

    pub fn close_element(&self, grid: ImageGrid) -> Result<StructuringElement> {
        let radius = self
            .close_radius
            .unwrap_or_else(|| StructuringElement::default_for_grid(grid).radius());
        StructuringElement::new(self.se_shape, radius)
    }
}

/// Refinement-crop preparation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    /// Context padding per crop side, as a fraction of the box dimension.
    pub pad_frac: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self { pad_frac: 0.25 }
    }
}

/// Evaluation protocol settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Boundary slack radius in pixels; None derives round(0.0075 * diagonal).
    pub slack_radius: Option<usize>,
    pub aggregation: Aggregation,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { slack_radius: None, aggregation: Aggregation::Macro }
    }
}

impl EvalConfig {
    pub fn slack_for_grid(&self, grid: ImageGrid) -> usize {
        self.slack_radius.unwrap_or_else(|| metrics::default_slack(grid))
    }
}

/// Corruption knobs for the ground-truth-backed predictor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub direction_noise_deg: f64,
    pub label_flip_prob: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { direction_noise_deg: 0.0, label_flip_prob: 0.0 }
    }
}

/// The complete toolkit configuration. Every field has a default, so `{}`
/// is a valid document; unknown top-level keys are rejected to catch typos.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub voting: VotingConfig,
    pub imp: ImpConfig,
    pub refine: RefineConfig,
    pub eval: EvalConfig,
    pub oracle: OracleConfig,
    pub augment: AugmentConfig,
    pub scene: SceneConfig,
    pub noise: NoiseConfig,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Data(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Cross-checks every section. Grid-dependent values are resolved
    /// against the configured scene resolution.
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.noise.validate()?;
        self.augment.validate()?;
        let grid = ImageGrid::new(self.scene.height, self.scene.width)?;
        self.voting.for_grid(grid)?;
        self.imp.open_element(grid)?;
        self.imp.close_element(grid)?;
        if !(self.refine.pad_frac.is_finite() && self.refine.pad_frac >= 0.0) {
            return Err(Error::InvalidParam("refine.pad_frac must be nonnegative".into()));
        }
        if !(self.oracle.direction_noise_deg.is_finite()
            && self.oracle.direction_noise_deg >= 0.0)
        {
            return Err(Error::InvalidParam(
                "oracle.direction_noise_deg must be nonnegative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.oracle.label_flip_prob) {
            return Err(Error::InvalidParam("oracle.label_flip_prob outside [0, 1]".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default_config() {
        let cfg = PipelineConfig::from_json("{}").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn default_round_trips_through_json() {
        let cfg = PipelineConfig::default();
        let back = PipelineConfig::from_json(&cfg.to_json_pretty()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_section_overrides_only_named_keys() {
        let cfg = PipelineConfig::from_json(
            r#"{"voting": {"score_threshold": 0.01}, "scene": {"width": 320}}"#,
        )
        .unwrap();
        assert_eq!(cfg.voting.score_threshold, 0.01);
        assert_eq!(cfg.voting.num_bins, VotingConfig::default().num_bins);
        assert_eq!(cfg.scene.width, 320);
        assert_eq!(cfg.scene.height, SceneConfig::default().height);
    }

    #[test]
    fn unknown_top_level_key_is_rejected() {
        assert!(PipelineConfig::from_json(r#"{"votign": {}}"#).is_err());
    }

    #[test]
    fn grid_derived_knobs_scale_with_the_image() {
        let cfg = PipelineConfig::default();
        let small = ImageGrid::new(240, 320).unwrap();
        let vga = ImageGrid::new(480, 640).unwrap();
        assert_eq!(cfg.voting.for_grid(small).unwrap().nms_radius, 25.0);
        assert_eq!(cfg.voting.for_grid(vga).unwrap().nms_radius, 50.0);
        assert_eq!(cfg.imp.open_element(vga).unwrap().radius(), 3);
        assert_eq!(cfg.imp.close_element(vga).unwrap().radius(), 8);
        assert_eq!(cfg.eval.slack_for_grid(vga), 6);
        assert_eq!(cfg.eval.slack_for_grid(small), 3);
    }

    #[test]
    fn explicit_overrides_take_precedence_over_derivation() {
        let cfg = PipelineConfig::from_json(
            r#"{"voting": {"nms_radius": 12.5},
                "imp": {"open_radius": 1, "close_radius": 4, "se_shape": "disk"},
                "eval": {"slack_radius": 2, "aggregation": "micro"}}"#,
        )
        .unwrap();
        let grid = ImageGrid::new(480, 640).unwrap();
        assert_eq!(cfg.voting.for_grid(grid).unwrap().nms_radius, 12.5);
        assert_eq!(cfg.imp.open_element(grid).unwrap().radius(), 1);
        assert_eq!(cfg.imp.close_element(grid).unwrap().radius(), 4);
        assert_eq!(cfg.imp.open_element(grid).unwrap().shape(), SeShape::Disk);
        assert_eq!(cfg.eval.slack_for_grid(grid), 2);
        assert_eq!(cfg.eval.aggregation, Aggregation::Micro);
    }

    #[test]
    fn invalid_values_fail_validation() {
        assert!(PipelineConfig::from_json(r#"{"voting": {"num_bins": 2}}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"voting": {"nms_radius": 0.5}}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"refine": {"pad_frac": -0.1}}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"oracle": {"label_flip_prob": 2.0}}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"scene": {"width": 0}}"#).is_err());
    }

    #[test]
    fn load_reads_a_file_and_reports_the_path_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"eval": {"slack_radius": 3}}"#).unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.eval.slack_radius, Some(3));

        let missing = dir.path().join("absent.json");
        let err = PipelineConfig::load(&missing).unwrap_err();
        assert!(err.to_string().contains("absent.json"));
    }
}
