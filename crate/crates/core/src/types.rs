//! Raster domain types with validated construction.
//!
//! All rasters are row-major over an [`ImageGrid`]; the element for pixel
//! (row, col) lives at index `row * width + col`. Multi-channel rasters
//! (probabilities, directions, points) keep the channels of one pixel
//! contiguous.

use thiserror::Error;

/// Direction stored at pixels that have no meaningful direction toward an
/// object center: background, table, and a pixel lying exactly on its own
/// instance centroid. Points toward the top of the image, i.e. "image-up"
/// in (delta_row, delta_col) form.
pub const FIXED_DIRECTION: [f64; 2] = [-1.0, 0.0];

/// Errors shared by every module in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("image grid must have positive dimensions")]
    EmptyGrid,
    #[error("{context}: grid {actual:?} does not match {expected:?}")]
    GridMismatch {
        context: &'static str,
        expected: ImageGrid,
        actual: ImageGrid,
    },
    #[error("{context}: buffer holds {actual} elements, expected {expected}")]
    LengthMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("pixel ({row}, {col}): class probabilities sum to {sum}, not 1 within 1e-6")]
    InvalidSimplex { row: usize, col: usize, sum: f64 },
    #[error("pixel ({row}, {col}): probability {value} is negative")]
    NegativeProbability { row: usize, col: usize, value: f64 },
    #[error("pixel ({row}, {col}): direction norm {norm} is not 1 within 1e-4")]
    NonUnitDirection { row: usize, col: usize, norm: f64 },
    #[error("pixel ({row}, {col}): label {label} is not below class count {classes}")]
    LabelOutOfRange {
        row: usize,
        col: usize,
        label: u32,
        classes: usize,
    },
    #[error("instance ids are not contiguous from 2: {detail}")]
    NonContiguousIds { detail: String },
    #[error("empty mask: {0}")]
    EmptyMask(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Height and width of a raster, in pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImageGrid {
    pub height: usize,
    pub width: usize,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { height, width })
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects zero dimensions
    }

    /// Flat index of pixel (row, col).
    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.height && col < self.width);
        row * self.width + col
    }

    /// True when the signed coordinates fall inside the raster.
    #[inline]
    pub fn contains(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    /// Euclidean length of the image diagonal in pixels.
    pub fn diagonal(&self) -> f64 {
        let h = self.height as f64;
        let w = self.width as f64;
        (h * h + w * w).sqrt()
    }

    /// Row-major iterator over all (row, col) pairs.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> {
        let w = self.width;
        (0..self.height).flat_map(move |r| (0..w).map(move |c| (r, c)))
    }

    fn check_len(&self, context: &'static str, actual: usize, channels: usize) -> Result<()> {
        let expected = self.len() * channels;
        if actual != expected {
            return Err(Error::LengthMismatch {
                context,
                expected,
                actual,
            });
        }
        Ok(())
    }
}

pub(crate) fn same_grid(
    context: &'static str,
    expected: ImageGrid,
    actual: ImageGrid,
) -> Result<()> {
    if expected != actual {
        return Err(Error::GridMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

/// Per-pixel boolean raster. The empty mask is legal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    grid: ImageGrid,
    pixels: Vec<bool>,
}

impl BinaryMask {
    pub fn new(grid: ImageGrid, pixels: Vec<bool>) -> Result<Self> {
        grid.check_len("BinaryMask", pixels.len(), 1)?;
        Ok(Self { grid, pixels })
    }

    pub fn filled(grid: ImageGrid, value: bool) -> Self {
        Self {
            grid,
            pixels: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: ImageGrid, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut pixels = Vec::with_capacity(grid.len());
        for (r, c) in grid.pixels() {
            pixels.push(f(r, c));
        }
        Self { grid, pixels }
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.pixels[self.grid.index(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        let i = self.grid.index(row, col);
        self.pixels[i] = value;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.pixels
    }

    pub fn count_true(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    /// Row-major iterator over the coordinates of true pixels.
    pub fn iter_true(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.grid.width;
        self.pixels
            .iter()
            .enumerate()
            .filter(|(_, &p)| p)
            .map(move |(i, _)| (i / w, i % w))
    }

    /// Mean (row, col) of true pixels; errors on the empty mask.
    pub fn centroid(&self) -> Result<(f64, f64)> {
        let mut n = 0usize;
        let mut sum_r = 0.0;
        let mut sum_c = 0.0;
        for (r, c) in self.iter_true() {
            sum_r += r as f64;
            sum_c += c as f64;
            n += 1;
        }
        if n == 0 {
            return Err(Error::EmptyMask("centroid of empty mask is undefined"));
        }
        Ok((sum_r / n as f64, sum_c / n as f64))
    }

    /// Tight bounding box of true pixels as (row0, col0, row1, col1)
    /// inclusive, or None for the empty mask.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for (r, c) in self.iter_true() {
            bbox = Some(match bbox {
                None => (r, c, r, c),
                Some((r0, c0, r1, c1)) => (r0.min(r), c0.min(c), r1.max(r), c1.max(c)),
            });
        }
        bbox
    }
}

/// Hard per-pixel class labels; `classes` is the exclusive upper bound.
/// The pipeline uses C = 3: 0 background, 1 table, 2 object.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemanticLabels {
    grid: ImageGrid,
    classes: usize,
    labels: Vec<u8>,
}

/// Class indices of the 3-class semantic scheme.
pub const CLASS_BACKGROUND: u8 = 0;
pub const CLASS_TABLE: u8 = 1;
pub const CLASS_OBJECT: u8 = 2;

impl SemanticLabels {
    pub fn new(grid: ImageGrid, classes: usize, labels: Vec<u8>) -> Result<Self> {
        grid.check_len("SemanticLabels", labels.len(), 1)?;
        if classes == 0 || classes > 256 {
            return Err(Error::InvalidParam(format!(
                "class count {classes} outside 1..=256"
            )));
        }
        for (i, &l) in labels.iter().enumerate() {
            if (l as usize) >= classes {
                return Err(Error::LabelOutOfRange {
                    row: i / grid.width,
                    col: i % grid.width,
                    label: l as u32,
                    classes,
                });
            }
        }
        Ok(Self {
            grid,
            classes,
            labels,
        })
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[self.grid.index(row, col)]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.labels
    }
}

/// Per-pixel class probability simplex over `classes` entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticProbs {
    grid: ImageGrid,
    classes: usize,
    probs: Vec<f64>,
}

impl SemanticProbs {
    pub fn new(grid: ImageGrid, classes: usize, probs: Vec<f64>) -> Result<Self> {
        grid.check_len("SemanticProbs", probs.len(), classes)?;
        if classes == 0 {
            return Err(Error::InvalidParam("class count must be positive".into()));
        }
        for (i, chunk) in probs.chunks_exact(classes).enumerate() {
            let (row, col) = (i / grid.width, i % grid.width);
            let mut sum = 0.0;
            for &p in chunk {
                if p < 0.0 {
                    return Err(Error::NegativeProbability { row, col, value: p });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidSimplex { row, col, sum });
            }
        }
        Ok(Self {
            grid,
            classes,
            probs,
        })
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Probability vector of one pixel.
    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let i = self.grid.index(row, col) * self.classes;
        &self.probs[i..i + self.classes]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Hard labels by per-pixel argmax; ties go to the smaller class index.
    pub fn argmax_labels(&self) -> SemanticLabels {
        let mut labels = Vec::with_capacity(self.grid.len());
        for chunk in self.probs.chunks_exact(self.classes) {
            let mut best = 0usize;
            for (k, &p) in chunk.iter().enumerate() {
                if p > chunk[best] {
                    best = k;
                }
            }
            labels.push(best as u8);
        }
        SemanticLabels {
            grid: self.grid,
            classes: self.classes,
            labels,
        }
    }
}

/// Per-pixel 2D unit vectors stored as (delta_row, delta_col), with a
/// validity flag per pixel. Invalid pixels may carry any value and are
/// excluded from the unit-norm invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionField {
    grid: ImageGrid,
    dirs: Vec<[f64; 2]>,
    valid: Vec<bool>,
}

impl DirectionField {
    /// Field with every pixel valid; each vector must be unit within 1e-4.
    pub fn new(grid: ImageGrid, dirs: Vec<[f64; 2]>) -> Result<Self> {
        let valid = vec![true; grid.len()];
        Self::with_validity(grid, dirs, valid)
    }

    pub fn with_validity(grid: ImageGrid, dirs: Vec<[f64; 2]>, valid: Vec<bool>) -> Result<Self> {
        grid.check_len("DirectionField dirs", dirs.len(), 1)?;
        grid.check_len("DirectionField validity", valid.len(), 1)?;
        for (i, d) in dirs.iter().enumerate() {
            if !valid[i] {
                continue;
            }
            let norm = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if (norm - 1.0).abs() > 1e-4 {
                return Err(Error::NonUnitDirection {
                    row: i / grid.width,
                    col: i % grid.width,
                    norm,
                });
            }
        }
        Ok(Self { grid, dirs, valid })
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [f64; 2] {
        self.dirs[self.grid.index(row, col)]
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[self.grid.index(row, col)]
    }

    pub fn dirs(&self) -> &[[f64; 2]] {
        &self.dirs
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }
}

/// Instance labeling: 0 background, 1 table, instance ids 2..=1+K contiguous,
/// every instance nonempty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceLabelMap {
    grid: ImageGrid,
    labels: Vec<u32>,
    num_instances: usize,
}

impl InstanceLabelMap {
    pub fn new(grid: ImageGrid, labels: Vec<u32>) -> Result<Self> {
        grid.check_len("InstanceLabelMap", labels.len(), 1)?;
        let max = labels.iter().copied().max().unwrap_or(0);
        let num_instances = (max as usize).saturating_sub(1);
        let mut seen = vec![false; num_instances];
        for &l in &labels {
            if l >= 2 {
                seen[(l - 2) as usize] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::NonContiguousIds {
                detail: format!("id {} has no pixels but id {} exists", missing + 2, max),
            });
        }
        Ok(Self {
            grid,
            labels,
            num_instances,
        })
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    pub fn num_instances(&self) -> usize {
        self.num_instances
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[self.grid.index(row, col)]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    /// One (id, mask) pair per instance, ascending id; masks are disjoint.
    pub fn instance_masks(&self) -> Vec<(u32, BinaryMask)> {
        let mut masks: Vec<(u32, BinaryMask)> = (0..self.num_instances)
            .map(|k| {
                (
                    (k + 2) as u32,
                    BinaryMask::filled(self.grid, false),
                )
            })
            .collect();
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 2 {
                masks[(l - 2) as usize].1.pixels[i] = true;
            }
        }
        masks
    }

    /// 3-class semantics: 0 background, 1 table, 2 any object instance.
    pub fn semantics(&self) -> SemanticLabels {
        let labels = self
            .labels
            .iter()
            .map(|&l| l.min(CLASS_OBJECT as u32) as u8)
            .collect();
        SemanticLabels {
            grid: self.grid,
            classes: 3,
            labels,
        }
    }
}

/// Per-pixel depth in meters with a validity flag (false = missing depth).
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    grid: ImageGrid,
    meters: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn new(grid: ImageGrid, meters: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        grid.check_len("DepthMap meters", meters.len(), 1)?;
        grid.check_len("DepthMap validity", valid.len(), 1)?;
        Ok(Self {
            grid,
            meters,
            valid,
        })
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.meters[self.grid.index(row, col)]
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[self.grid.index(row, col)]
    }

    pub fn meters(&self) -> &[f64] {
        &self.meters
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }
}

/// Organized point cloud: camera-frame XYZ in meters per pixel. Invalid
/// pixels carry (0, 0, 0) and are excluded from geometric computations.
#[derive(Clone, Debug, PartialEq)]
pub struct OrganizedPointCloud {
    grid: ImageGrid,
    points: Vec<[f64; 3]>,
    valid: Vec<bool>,
}

impl OrganizedPointCloud {
    pub fn new(grid: ImageGrid, mut points: Vec<[f64; 3]>, valid: Vec<bool>) -> Result<Self> {
        grid.check_len("OrganizedPointCloud points", points.len(), 1)?;
        grid.check_len("OrganizedPointCloud validity", valid.len(), 1)?;
        for (p, &v) in points.iter_mut().zip(&valid) {
            if !v {
                *p = [0.0; 3];
            }
        }
        Ok(Self {
            grid,
            points,
            valid,
        })
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [f64; 3] {
        self.points[self.grid.index(row, col)]
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[self.grid.index(row, col)]
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.points
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }
}

/// Interleaved 8-bit RGB raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbRaster {
    grid: ImageGrid,
    data: Vec<u8>,
}

impl RgbRaster {
    pub fn new(grid: ImageGrid, data: Vec<u8>) -> Result<Self> {
        grid.check_len("RgbRaster", data.len(), 3)?;
        Ok(Self { grid, data })
    }

    pub fn filled(grid: ImageGrid, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(grid.len() * 3);
        for _ in 0..grid.len() {
            data.extend_from_slice(&rgb);
        }
        Self { grid, data }
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> [u8; 3] {
        let i = self.grid.index(row, col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = self.grid.index(row, col) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(h: usize, w: usize) -> ImageGrid {
        ImageGrid::new(h, w).unwrap()
    }

    #[test]
    fn grid_rejects_zero_dimensions() {
        assert!(ImageGrid::new(0, 5).is_err());
        assert!(ImageGrid::new(5, 0).is_err());
    }

    #[test]
    fn instance_masks_of_all_zero_map_is_empty() {
        let map = InstanceLabelMap::new(grid(4, 4), vec![0; 16]).unwrap();
        assert!(map.instance_masks().is_empty());
    }

    #[test]
    fn instance_masks_single_block() {
        let g = grid(4, 4);
        let mut labels = vec![0u32; 16];
        for (r, c) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            labels[g.index(r, c)] = 2;
        }
        let map = InstanceLabelMap::new(g, labels).unwrap();
        let masks = map.instance_masks();
        assert_eq!(masks.len(), 1);
        assert_eq!(masks[0].0, 2);
        assert_eq!(masks[0].1.count_true(), 4);
    }

    #[test]
    fn instance_masks_seeded_counts_match_per_label_scan() {
        // Deterministic pseudo-random paint of labels {0,1,2,3,4} on 10x10.
        let g = grid(10, 10);
        let mut labels = vec![0u32; 100];
        let mut state = 0x9e3779b97f4a7c15u64;
        for l in labels.iter_mut() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *l = ((state >> 33) % 5) as u32;
        }
        // Make sure every instance id is present so the map validates.
        labels[0] = 2;
        labels[1] = 3;
        labels[2] = 4;
        let map = InstanceLabelMap::new(g, labels.clone()).unwrap();
        let masks = map.instance_masks();
        assert_eq!(masks.len(), 3);
        let mut total = 0;
        for (id, mask) in &masks {
            let expected = labels.iter().filter(|&&l| l == *id).count();
            assert_eq!(mask.count_true(), expected, "count for id {id}");
            total += expected;
        }
        assert_eq!(total, labels.iter().filter(|&&l| l >= 2).count());
    }

    #[test]
    fn instance_masks_round_trip_repaints_original() {
        let g = grid(8, 8);
        let mut labels = vec![0u32; 64];
        let mut state = 12345u64;
        for l in labels.iter_mut() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(99);
            *l = ((state >> 30) % 4) as u32;
        }
        labels[5] = 2;
        labels[6] = 3;
        let map = InstanceLabelMap::new(g, labels.clone()).unwrap();
        let mut repainted = vec![0u32; 64];
        for (i, &l) in labels.iter().enumerate() {
            if l == 1 {
                repainted[i] = 1;
            }
        }
        for (id, mask) in map.instance_masks() {
            for (r, c) in mask.iter_true() {
                repainted[g.index(r, c)] = id;
            }
        }
        assert_eq!(repainted, labels);
    }

    #[test]
    fn non_contiguous_ids_rejected() {
        let mut labels = vec![0u32; 16];
        labels[0] = 2;
        labels[1] = 4; // id 3 missing
        assert!(matches!(
            InstanceLabelMap::new(grid(4, 4), labels),
            Err(Error::NonContiguousIds { .. })
        ));
    }

    #[test]
    fn centroid_singleton_and_block() {
        let g = grid(10, 10);
        let mut m = BinaryMask::filled(g, false);
        m.set(3, 7, true);
        assert_eq!(m.centroid().unwrap(), (3.0, 7.0));

        let mut b = BinaryMask::filled(g, false);
        for (r, c) in [(4, 4), (4, 5), (5, 4), (5, 5)] {
            b.set(r, c, true);
        }
        assert_eq!(b.centroid().unwrap(), (4.5, 4.5));
    }

    #[test]
    fn centroid_matches_independent_summation() {
        // 50-pixel seeded blob vs. a direct sum/count loop.
        let g = grid(20, 20);
        let mut m = BinaryMask::filled(g, false);
        let mut state = 777u64;
        let mut placed = 0;
        while placed < 50 {
            state = state.wrapping_mul(2862933555777941757).wrapping_add(3037000493);
            let r = ((state >> 20) % 20) as usize;
            let c = ((state >> 40) % 20) as usize;
            if !m.get(r, c) {
                m.set(r, c, true);
                placed += 1;
            }
        }
        let (mut sr, mut sc, mut n) = (0.0f64, 0.0f64, 0usize);
        for r in 0..20 {
            for c in 0..20 {
                if m.get(r, c) {
                    sr += r as f64;
                    sc += c as f64;
                    n += 1;
                }
            }
        }
        let (cr, cc) = m.centroid().unwrap();
        assert_eq!(n, 50);
        assert!((cr - sr / 50.0).abs() < 1e-12);
        assert!((cc - sc / 50.0).abs() < 1e-12);
    }

    #[test]
    fn centroid_of_empty_mask_errors() {
        let m = BinaryMask::filled(grid(3, 3), false);
        assert!(matches!(m.centroid(), Err(Error::EmptyMask(_))));
    }

    #[test]
    fn simplex_validation() {
        let g = grid(1, 1);
        assert!(SemanticProbs::new(g, 3, vec![0.2, 0.3, 0.5]).is_ok());
        assert!(matches!(
            SemanticProbs::new(g, 3, vec![0.2, 0.3, 0.6]),
            Err(Error::InvalidSimplex { .. })
        ));
        assert!(matches!(
            SemanticProbs::new(g, 3, vec![-0.1, 0.6, 0.5]),
            Err(Error::NegativeProbability { .. })
        ));
    }

    #[test]
    fn argmax_yields_valid_labels_and_breaks_ties_low() {
        let g = grid(1, 2);
        let probs =
            SemanticProbs::new(g, 3, vec![0.5, 0.5, 0.0, 0.1, 0.2, 0.7]).unwrap();
        let labels = probs.argmax_labels();
        assert_eq!(labels.classes(), 3);
        assert_eq!(labels.get(0, 0), 0); // tie between classes 0 and 1
        assert_eq!(labels.get(0, 1), 2);
    }

    #[test]
    fn direction_field_rejects_non_unit_vectors() {
        let g = grid(1, 1);
        assert!(DirectionField::new(g, vec![[0.6, 0.8]]).is_ok());
        assert!(matches!(
            DirectionField::new(g, vec![[0.5, 0.8]]),
            Err(Error::NonUnitDirection { .. })
        ));
        // Invalid pixels are exempt.
        assert!(DirectionField::with_validity(g, vec![[9.0, 9.0]], vec![false]).is_ok());
    }

    #[test]
    fn invalid_cloud_points_are_zeroed() {
        let g = grid(1, 2);
        let cloud = OrganizedPointCloud::new(
            g,
            vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]],
            vec![true, false],
        )
        .unwrap();
        assert_eq!(cloud.get(0, 0), [1.0, 2.0, 3.0]);
        assert_eq!(cloud.get(0, 1), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn semantics_from_instances_collapses_ids() {
        let g = grid(1, 4);
        let map = InstanceLabelMap::new(g, vec![0, 1, 2, 3]).unwrap();
        let sem = map.semantics();
        assert_eq!(sem.as_slice(), &[0, 1, 2, 2]);
    }
}
