//! Mask augmentation for refinement training pairs, plus the crop/resize
//! step that produces the refiner's canonical 224x224 inputs.
//!
//! Each augmentation is a pure function of (input mask, config, RNG
//! stream). Determinism rests on two things: the stream is a fixed
//! counter-based generator ([`crate::rng`]), and every operation documents
//! the exact order of its draws. Tests replay that order to reconstruct
//! the sampled transform and check the output against an independent
//! oracle.

use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::morphology::{boundary_pixels, dilate, erode, StructuringElement};
use crate::rng::Stream;
use crate::types::{same_grid, BinaryMask, Error, ImageGrid, Result, RgbRaster};

/// Output side length of a refinement crop.
pub const REFINE_SIZE: usize = 224;

/// Parameters of the four mask augmentations. Length scales are fractions
/// of sqrt(mask area) so the same config fits small and large instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub rng_seed: u64,
    /// Translation magnitude range, as a fraction of sqrt(area).
    pub translate_frac_range: [f64; 2],
    /// Rotation range in degrees, a subset of [-180, 180].
    pub rotate_deg_range: [f64; 2],
    /// Beta(a, b) parameters for the cut/add disk radius draw.
    pub addcut_radius_beta: [f64; 2],
    /// The beta draw is scaled into [0, this] * sqrt(area) pixels.
    pub addcut_radius_max_frac: f64,
    /// Inclusive range for the number of erosion/dilation iterations.
    pub morph_iters_range: [usize; 2],
    /// Beta(a, b) parameters for the kernel radius draw.
    pub morph_kernel_beta: [f64; 2],
    /// The beta draw is scaled into [0, this] * sqrt(area) pixels.
    pub morph_kernel_max_frac: f64,
    /// Poisson rate for the number of ellipses.
    pub ellipse_count_lambda: f64,
    /// Gamma (shape, scale) for each ellipse semi-axis; the scale is a
    /// fraction of sqrt(area), converted to pixels per mask.
    pub ellipse_radius_gamma: [f64; 2],
    /// Probability of applying each augmentation, in pipeline order:
    /// translate_rotate, add_cut, morph_perturb, ellipse_perturb.
    pub apply_probs: [f64; 4],
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            rng_seed: 0,
            translate_frac_range: [0.0, 0.1],
            rotate_deg_range: [-10.0, 10.0],
            addcut_radius_beta: [1.4, 3.0],
            addcut_radius_max_frac: 0.4,
            morph_iters_range: [1, 3],
            morph_kernel_beta: [2.0, 5.0],
            morph_kernel_max_frac: 0.2,
            ellipse_count_lambda: 2.0,
            ellipse_radius_gamma: [2.0, 0.08],
            apply_probs: [0.5; 4],
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |r: [f64; 2]| r[0].is_finite() && r[1].is_finite() && r[0] <= r[1];
        if !range_ok(self.translate_frac_range) || self.translate_frac_range[0] < 0.0 {
            return Err(Error::InvalidParam(
                "translate_frac_range must be a nonnegative interval".into(),
            ));
        }
        if !range_ok(self.rotate_deg_range)
            || self.rotate_deg_range[0] < -180.0
            || self.rotate_deg_range[1] > 180.0
        {
            return Err(Error::InvalidParam(
                "rotate_deg_range must lie within [-180, 180]".into(),
            ));
        }
        for (name, [a, b]) in [
            ("addcut_radius_beta", self.addcut_radius_beta),
            ("morph_kernel_beta", self.morph_kernel_beta),
        ] {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::InvalidParam(format!("{name} params must be positive")));
            }
        }
        for (name, v) in [
            ("addcut_radius_max_frac", self.addcut_radius_max_frac),
            ("morph_kernel_max_frac", self.morph_kernel_max_frac),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParam(format!("{name} must be nonnegative")));
            }
        }
        if self.morph_iters_range[0] > self.morph_iters_range[1] {
            return Err(Error::InvalidParam("morph_iters_range is empty".into()));
        }
        if !(self.ellipse_count_lambda > 0.0 && self.ellipse_count_lambda.is_finite()) {
            return Err(Error::InvalidParam(
                "ellipse_count_lambda must be positive".into(),
            ));
        }
        if !(self.ellipse_radius_gamma[0] > 0.0 && self.ellipse_radius_gamma[1] > 0.0) {
            return Err(Error::InvalidParam(
                "ellipse_radius_gamma params must be positive".into(),
            ));
        }
        if self.apply_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParam(
                "apply_probs must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

fn sqrt_area(mask: &BinaryMask) -> f64 {
    (mask.count_true() as f64).sqrt()
}

fn require_nonempty(mask: &BinaryMask) -> Result<()> {
    if mask.count_true() == 0 {
        return Err(Error::EmptyMask("augment input"));
    }
    Ok(())
}

/// Rotates the mask about its centroid, then translates it; pixels
/// carried off the grid are dropped.
///
/// Draws, in order: (1) rotation angle, uniform in rotate_deg_range;
/// (2) translation magnitude fraction, uniform in translate_frac_range;
/// (3) translation direction angle, uniform in [0, 2pi).
///
/// Rotation by angle t maps a centroid offset (dr, dc) to
/// (dr cos t - dc sin t, dr sin t + dc cos t); resampling is
/// nearest-neighbor on the inverse map. The translation vector
/// magnitude * (cos phi, sin phi) is rounded to whole pixels.
pub fn translate_rotate(mask: &BinaryMask, cfg: &AugmentConfig, rng: &mut Stream) -> Result<BinaryMask> {
    cfg.validate()?;
    require_nonempty(mask)?;
    let angle = rng
        .random_range(cfg.rotate_deg_range[0]..=cfg.rotate_deg_range[1])
        .to_radians();
    let mag = rng.random_range(cfg.translate_frac_range[0]..=cfg.translate_frac_range[1])
        * sqrt_area(mask);
    let phi = rng.random_range(0.0..TAU);
    let (ctr_r, ctr_c) = mask.centroid()?;
    let dr = (mag * phi.cos()).round() as i64;
    let dc = (mag * phi.sin()).round() as i64;
    let (sin, cos) = angle.sin_cos();
    let grid = mask.grid();
    Ok(BinaryMask::from_fn(grid, |r, c| {
        // Invert translation, then rotation (transpose of the matrix).
        let yr = (r as i64 - dr) as f64 - ctr_r;
        let yc = (c as i64 - dc) as f64 - ctr_c;
        let sr = (yr * cos + yc * sin + ctr_r).round() as i64;
        let sc = (-yr * sin + yc * cos + ctr_c).round() as i64;
        grid.contains(sr, sc) && mask.get(sr as usize, sc as usize)
    }))
}

/// Cuts a disk-shaped piece out of the mask near its boundary, or mirrors
/// that piece outward and unions it in.
///
/// Draws, in order: (1) boundary pixel index, uniform over the mask's
/// boundary pixels in row-major order; (2) radius fraction from
/// Beta(addcut_radius_beta), scaled by addcut_radius_max_frac *
/// sqrt(area); (3) cut/add coin, probability 1/2 (true = cut).
///
/// The region is mask pixels at distance strictly less than the radius
/// from the chosen pixel, so a zero radius changes nothing. Add reflects
/// each region pixel through the chosen pixel, dropping any that land
/// off-grid.
pub fn add_cut(mask: &BinaryMask, cfg: &AugmentConfig, rng: &mut Stream) -> Result<BinaryMask> {
    cfg.validate()?;
    require_nonempty(mask)?;
    let boundary: Vec<(usize, usize)> = boundary_pixels(mask).iter_true().collect();
    let (br, bc) = boundary[rng.random_range(0..boundary.len())];
    let beta = Beta::new(cfg.addcut_radius_beta[0], cfg.addcut_radius_beta[1])
        .expect("validated beta params");
    let radius = beta.sample(rng) * cfg.addcut_radius_max_frac * sqrt_area(mask);
    let cut = rng.random_bool(0.5);
    let r2 = radius * radius;
    let in_region = |r: usize, c: usize| {
        let dr = r as f64 - br as f64;
        let dc = c as f64 - bc as f64;
        dr * dr + dc * dc < r2
    };
    let mut out = mask.clone();
    for (r, c) in mask.iter_true() {
        if !in_region(r, c) {
            continue;
        }
        if cut {
            out.set(r, c, false);
        } else {
            let mr = 2 * br as i64 - r as i64;
            let mc = 2 * bc as i64 - c as i64;
            if mask.grid().contains(mr, mc) {
                out.set(mr as usize, mc as usize, true);
            }
        }
    }
    Ok(out)
}

/// Applies a random sequence of erosions and dilations with square
/// kernels sized relative to the input mask.
///
/// Draws, in order: (1) iteration count, uniform integer in
/// morph_iters_range inclusive; then per iteration (2) an erode/dilate
/// coin, probability 1/2 (true = erode), and (3) a kernel fraction from
/// Beta(morph_kernel_beta). The kernel radius is
/// max(1, round(fraction * morph_kernel_max_frac * sqrt(area))), with the
/// area taken from the input mask once.
pub fn morph_perturb(mask: &BinaryMask, cfg: &AugmentConfig, rng: &mut Stream) -> Result<BinaryMask> {
    cfg.validate()?;
    require_nonempty(mask)?;
    let scale = cfg.morph_kernel_max_frac * sqrt_area(mask);
    let iters = rng.random_range(cfg.morph_iters_range[0]..=cfg.morph_iters_range[1]);
    let beta = Beta::new(cfg.morph_kernel_beta[0], cfg.morph_kernel_beta[1])
        .expect("validated beta params");
    let mut out = mask.clone();
    for _ in 0..iters {
        let erosion = rng.random_bool(0.5);
        let radius = ((beta.sample(rng) * scale).round() as usize).max(1);
        let se = StructuringElement::square(radius).expect("radius >= 1");
        out = if erosion { erode(&out, &se) } else { dilate(&out, &se) };
    }
    Ok(out)
}

/// Unions or subtracts a Poisson number of random ellipses.
///
/// Draws, in order: (1) ellipse count from
/// Poisson(ellipse_count_lambda); then per ellipse (2) center row and
/// (3) center column, uniform over the input's bounding box expanded by
/// 10% of its height/width on each side; (4) first and (5) second
/// semi-axis from Gamma(shape, scale * sqrt(area)) pixels; (6) axis
/// rotation, uniform in [0, pi); (7) add/remove coin, probability 1/2
/// (true = add). A pixel is inside when its rotated, axis-normalized
/// offset has norm at most 1.
pub fn ellipse_perturb(mask: &BinaryMask, cfg: &AugmentConfig, rng: &mut Stream) -> Result<BinaryMask> {
    cfg.validate()?;
    require_nonempty(mask)?;
    let (r0, c0, r1, c1) = mask.bounding_box().expect("nonempty mask");
    let h = (r1 - r0 + 1) as f64;
    let w = (c1 - c0 + 1) as f64;
    let gamma = Gamma::new(
        cfg.ellipse_radius_gamma[0],
        cfg.ellipse_radius_gamma[1] * sqrt_area(mask),
    )
    .expect("validated gamma params");
    let count = Poisson::new(cfg.ellipse_count_lambda)
        .expect("validated lambda")
        .sample(rng) as u64;
    let mut out = mask.clone();
    for _ in 0..count {
        let cr = rng.random_range(r0 as f64 - 0.1 * h..=r1 as f64 + 0.1 * h);
        let cc = rng.random_range(c0 as f64 - 0.1 * w..=c1 as f64 + 0.1 * w);
        let ra = gamma.sample(rng);
        let rb = gamma.sample(rng);
        let theta = rng.random_range(0.0..PI);
        let add = rng.random_bool(0.5);
        stamp_ellipse(&mut out, cr, cc, ra, rb, theta, add);
    }
    Ok(out)
}

fn stamp_ellipse(out: &mut BinaryMask, cr: f64, cc: f64, ra: f64, rb: f64, theta: f64, add: bool) {
    let grid = out.grid();
    let rmax = ra.max(rb);
    let lo_r = ((cr - rmax).floor() as i64).max(0);
    let hi_r = ((cr + rmax).ceil() as i64).min(grid.height as i64 - 1);
    let lo_c = ((cc - rmax).floor() as i64).max(0);
    let hi_c = ((cc + rmax).ceil() as i64).min(grid.width as i64 - 1);
    let (sin, cos) = theta.sin_cos();
    for r in lo_r..=hi_r {
        for c in lo_c..=hi_c {
            let dr = r as f64 - cr;
            let dc = c as f64 - cc;
            let u = (dr * cos + dc * sin) / ra;
            let v = (-dr * sin + dc * cos) / rb;
            if u * u + v * v <= 1.0 {
                out.set(r as usize, c as usize, add);
            }
        }
    }
}

/// Runs the full augmentation pipeline on a ground-truth mask:
/// translate_rotate, add_cut, morph_perturb, ellipse_perturb, each gated
/// independently by its apply_probs entry (one bool draw per gate, drawn
/// before the gated operation's own draws). A step that would empty the
/// mask is rolled back, so the result is never empty.
pub fn augment_mask(gt_mask: &BinaryMask, cfg: &AugmentConfig, rng: &mut Stream) -> Result<BinaryMask> {
    cfg.validate()?;
    require_nonempty(gt_mask)?;
    type Op = fn(&BinaryMask, &AugmentConfig, &mut Stream) -> Result<BinaryMask>;
    let ops: [Op; 4] = [translate_rotate, add_cut, morph_perturb, ellipse_perturb];
    let mut mask = gt_mask.clone();
    for (op, &prob) in ops.iter().zip(&cfg.apply_probs) {
        if !rng.random_bool(prob) {
            continue;
        }
        let next = op(&mask, cfg, rng)?;
        if next.count_true() > 0 {
            mask = next;
        }
    }
    Ok(mask)
}

/// Source rectangle of a refinement crop, inclusive of its full extent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropBox {
    pub row0: usize,
    pub col0: usize,
    pub height: usize,
    pub width: usize,
}

/// A refinement training or inference sample: RGB and masks cropped from
/// one source rectangle and resized to 224x224.
#[derive(Clone, Debug)]
pub struct RefinePair {
    pub rgb_crop: RgbRaster,
    pub mask_crop: BinaryMask,
    pub gt_crop: BinaryMask,
    pub crop_box: CropBox,
}

/// The crop rectangle a mask produces: its bounding box grown to
/// round(dim * (1 + 2 * pad_frac)) per axis, the extra split evenly
/// (extra pixel goes to the bottom/right), then clipped to the image.
pub fn crop_box_for(mask: &BinaryMask, pad_frac: f64) -> Result<CropBox> {
    if !(pad_frac.is_finite() && pad_frac >= 0.0) {
        return Err(Error::InvalidParam("pad_frac must be nonnegative".into()));
    }
    let (r0, c0, r1, c1) = mask.bounding_box().ok_or(Error::EmptyMask("refine crop source"))?;
    let grid = mask.grid();
    let expand = |lo: usize, hi: usize, limit: usize| -> (usize, usize) {
        let dim = hi - lo + 1;
        let target = ((dim as f64) * (1.0 + 2.0 * pad_frac)).round() as usize;
        let extra = target - dim;
        let lead = extra / 2;
        (lo.saturating_sub(lead), (hi + (extra - lead)).min(limit - 1))
    };
    let (row0, row1) = expand(r0, r1, grid.height);
    let (col0, col1) = expand(c0, c1, grid.width);
    Ok(CropBox { row0, col0, height: row1 - row0 + 1, width: col1 - col0 + 1 })
}

/// Crops around the perturbed mask with context padding and resizes to
/// the refiner's 224x224 input: RGB bilinearly, masks nearest-neighbor.
/// The crop rectangle is [`crop_box_for`] of the perturbed mask.
pub fn make_refine_pair(
    rgb: &RgbRaster,
    gt_mask: &BinaryMask,
    perturbed_mask: &BinaryMask,
    pad_frac: f64,
) -> Result<RefinePair> {
    same_grid("make_refine_pair", rgb.grid(), gt_mask.grid())?;
    same_grid("make_refine_pair", rgb.grid(), perturbed_mask.grid())?;
    let crop_box = crop_box_for(perturbed_mask, pad_frac)?;
    let (row0, col0) = (crop_box.row0, crop_box.col0);

    let out_grid = ImageGrid::new(REFINE_SIZE, REFINE_SIZE)?;
    let nn = |out: usize, out_len: usize, src_len: usize| -> usize {
        ((((out as f64 + 0.5) * src_len as f64 / out_len as f64).floor()) as usize)
            .min(src_len - 1)
    };
    let resize_mask = |m: &BinaryMask| -> BinaryMask {
        BinaryMask::from_fn(out_grid, |r, c| {
            m.get(
                row0 + nn(r, REFINE_SIZE, crop_box.height),
                col0 + nn(c, REFINE_SIZE, crop_box.width),
            )
        })
    };

    let mut img = image::RgbImage::new(crop_box.width as u32, crop_box.height as u32);
    for (r, c) in ImageGrid::new(crop_box.height, crop_box.width)?.pixels() {
        img.put_pixel(c as u32, r as u32, image::Rgb(rgb.get(row0 + r, col0 + c)));
    }
    let resized = image::imageops::resize(
        &img,
        REFINE_SIZE as u32,
        REFINE_SIZE as u32,
        image::imageops::FilterType::Triangle,
    );
    Ok(RefinePair {
        rgb_crop: RgbRaster::new(out_grid, resized.into_raw())?,
        mask_crop: resize_mask(perturbed_mask),
        gt_crop: resize_mask(gt_mask),
        crop_box,
    })
}
