//! Binary morphology and connected components: the initial mask processor
//! that cleans Hough-voting masks (open, close, keep the connected component
//! closest to the voted center).
//!
//! Out-of-bounds pixels count as background for both erosion and dilation, so
//! erosion always eats inward from the image border.

use serde::{Deserialize, Serialize};

use crate::types::{BinaryMask, ImageGrid, Result};

/// Shape of a structuring element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeShape {
    Square,
    /// Offsets with dr^2 + dc^2 <= radius^2.
    Disk,
}

/// Symmetric structuring element of a given pixel radius (radius >= 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructuringElement {
    shape: SeShape,
    radius: usize,
}

impl StructuringElement {
    pub fn new(shape: SeShape, radius: usize) -> Result<Self> {
        if radius == 0 {
            return Err(crate::Error::InvalidParam(
                "structuring element radius must be >= 1".into(),
            ));
        }
        Ok(Self { shape, radius })
    }

    pub fn square(radius: usize) -> Result<Self> {
        Self::new(SeShape::Square, radius)
    }

    pub fn disk(radius: usize) -> Result<Self> {
        Self::new(SeShape::Disk, radius)
    }

    /// Default element for an image: square with radius
    /// max(1, round(0.01 * diagonal)).
    pub fn default_for_grid(grid: ImageGrid) -> Self {
        let r = (0.01 * grid.diagonal()).round() as usize;
        Self {
            shape: SeShape::Square,
            radius: r.max(1),
        }
    }

    /// Default element for the opening step of mask cleanup: square with
    /// radius max(1, round(0.004 * diagonal)), 3 at 640x480. Opening
    /// erodes before it dilates, so its element must stay well under the
    /// smallest instance's half-width or cleanup erases the instance;
    /// this radius still removes speckle from label noise. Closing keeps
    /// the larger [`StructuringElement::default_for_grid`] element, which
    /// is exact on clean convex masks while filling wider holes.
    pub fn default_open_for_grid(grid: ImageGrid) -> Self {
        let r = (0.004 * grid.diagonal()).round() as usize;
        Self {
            shape: SeShape::Square,
            radius: r.max(1),
        }
    }

    pub fn shape(&self) -> SeShape {
        self.shape
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Half-width of the row at vertical offset dr (|dr| <= radius), i.e. the
    /// element covers columns -w..=w on that row.
    fn half_width(&self, dr: i64) -> i64 {
        let r = self.radius as i64;
        match self.shape {
            SeShape::Square => r,
            SeShape::Disk => {
                let rem = r * r - dr * dr;
                ((rem as f64).sqrt().floor() as i64).min(r)
            }
        }
    }

    /// All (dr, dc) offsets of the element.
    pub fn offsets(&self) -> Vec<(i64, i64)> {
        let r = self.radius as i64;
        let mut out = Vec::new();
        for dr in -r..=r {
            let w = self.half_width(dr);
            for dc in -w..=w {
                out.push((dr, dc));
            }
        }
        out
    }

    /// Number of offsets.
    pub fn size(&self) -> usize {
        let r = self.radius as i64;
        (-r..=r).map(|dr| (2 * self.half_width(dr) + 1) as usize).sum()
    }
}

/// Counts of true pixels inside the element around every pixel, via per-row
/// prefix sums. Out-of-image positions contribute nothing.
fn window_counts(mask: &BinaryMask, se: &StructuringElement) -> Vec<u32> {
    let grid = mask.grid();
    let (h, w) = (grid.height, grid.width);
    // prefix[r][c+1] = number of true pixels in row r, columns 0..=c
    let mut prefix = vec![0u32; h * (w + 1)];
    for r in 0..h {
        let base = r * (w + 1);
        let mut acc = 0u32;
        for c in 0..w {
            acc += mask.get(r, c) as u32;
            prefix[base + c + 1] = acc;
        }
    }
    let r_se = se.radius as i64;
    let mut counts = vec![0u32; h * w];
    for r in 0..h as i64 {
        let lo_dr = (-r_se).max(-r);
        let hi_dr = r_se.min(h as i64 - 1 - r);
        for dr in lo_dr..=hi_dr {
            let hw = se.half_width(dr);
            let base = (r + dr) as usize * (w + 1);
            let out_base = r as usize * w;
            for c in 0..w as i64 {
                let c0 = (c - hw).max(0) as usize;
                let c1 = (c + hw).min(w as i64 - 1) as usize;
                counts[out_base + c as usize] += prefix[base + c1 + 1] - prefix[base + c0];
            }
        }
    }
    counts
}

/// Minkowski erosion: a pixel survives iff the element translated to it is
/// entirely true (out-of-bounds counts as false).
pub fn erode(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let full = se.size() as u32;
    let counts = window_counts(mask, se);
    let grid = mask.grid();
    BinaryMask::from_fn(grid, |r, c| counts[grid.index(r, c)] == full)
}

/// Minkowski dilation: a pixel lights up iff the element translated to it
/// touches any true pixel.
pub fn dilate(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    let counts = window_counts(mask, se);
    let grid = mask.grid();
    BinaryMask::from_fn(grid, |r, c| counts[grid.index(r, c)] > 0)
}

/// Opening: erosion followed by dilation. Removes protrusions and speckles
/// smaller than the element.
pub fn open(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    dilate(&erode(mask, se), se)
}

/// Closing: dilation followed by erosion. Fills holes and gaps smaller than
/// the element.
pub fn close(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    erode(&dilate(mask, se), se)
}

/// Pixel connectivity for component labeling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    fn neighbors(&self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1), (0, 1), (1, 0)],
            Connectivity::Eight => &[
                (-1, -1),
                (-1, 0),
                (-1, 1),
                (0, -1),
                (0, 1),
                (1, -1),
                (1, 0),
                (1, 1),
            ],
        }
    }
}

/// Maximal connected components of the true pixels, ordered by descending
/// size, ties by lexicographically smallest first pixel.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Vec<BinaryMask> {
    let grid = mask.grid();
    let (h, w) = (grid.height, grid.width);
    let mut visited = vec![false; grid.len()];
    // (first pixel index, size, mask)
    let mut comps: Vec<(usize, usize, BinaryMask)> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..grid.len() {
        if visited[start] || !mask.as_slice()[start] {
            continue;
        }
        let mut comp = BinaryMask::filled(grid, false);
        let mut size = 0usize;
        visited[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (r, c) = (i / w, i % w);
            comp.set(r, c, true);
            size += 1;
            for &(dr, dc) in connectivity.neighbors() {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 0 || nc < 0 || nr >= h as i64 || nc >= w as i64 {
                    continue;
                }
                let ni = nr as usize * w + nc as usize;
                if !visited[ni] && mask.as_slice()[ni] {
                    visited[ni] = true;
                    stack.push(ni);
                }
            }
        }
        comps.push((start, size, comp));
    }
    // Row-major scan order makes `start` the lexicographic first pixel.
    comps.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    comps.into_iter().map(|(_, _, m)| m).collect()
}

/// Boundary of a mask: true pixels with at least one false 8-neighbor or
/// lying on the image border.
pub fn boundary_pixels(mask: &BinaryMask) -> BinaryMask {
    let grid = mask.grid();
    let (h, w) = (grid.height as i64, grid.width as i64);
    BinaryMask::from_fn(grid, |r, c| {
        if !mask.get(r, c) {
            return false;
        }
        if r == 0 || c == 0 || r + 1 == grid.height || c + 1 == grid.width {
            return true;
        }
        for dr in -1..=1i64 {
            for dc in -1..=1i64 {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                debug_assert!(nr >= 0 && nc >= 0 && nr < h && nc < w);
                if !mask.get(nr as usize, nc as usize) {
                    return true;
                }
            }
        }
        false
    })
}

/// Initial mask processing of one instance: open, close, then keep the
/// connected component whose nearest pixel to `center` is closest (ties by
/// larger size, then lexicographic first pixel). The empty result is legal
/// and means the instance should be dropped.
pub fn imp_process(
    mask: &BinaryMask,
    center: (usize, usize),
    se_open: &StructuringElement,
    se_close: &StructuringElement,
    connectivity: Connectivity,
) -> BinaryMask {
    let grid = mask.grid();
    let Some((r0, c0, r1, c1)) = mask.bounding_box() else {
        return BinaryMask::filled(grid, false);
    };
    // Work on the mask bounding box padded by the close radius. The pad
    // extends past the image edges as virtual background so that closing
    // stays extensive there: with the canvas clipped at the border,
    // dilation has nowhere to reach and the paired erosion would shave a
    // close-radius strip off every instance touching the frame.
    let pad = se_close.radius() as i64;
    let vr0 = r0 as i64 - pad;
    let vc0 = c0 as i64 - pad;
    let crop_h = (r1 as i64 + pad - vr0 + 1) as usize;
    let crop_w = (c1 as i64 + pad - vc0 + 1) as usize;
    let crop_grid = ImageGrid::new(crop_h, crop_w).expect("nonempty crop");
    let crop = BinaryMask::from_fn(crop_grid, |r, c| {
        let (sr, sc) = (vr0 + r as i64, vc0 + c as i64);
        sr >= 0
            && sc >= 0
            && (sr as usize) < grid.height
            && (sc as usize) < grid.width
            && mask.get(sr as usize, sc as usize)
    });

    let cleaned = close(&open(&crop, se_open), se_close);
    let comps = connected_components(&cleaned, connectivity);
    if comps.is_empty() {
        return BinaryMask::filled(grid, false);
    }
    // Distances in full-image coordinates; components arrive sorted by
    // (size desc, first pixel asc), so a stable min on distance alone
    // implements the tie-breaking rule.
    let (ctr_r, ctr_c) = (center.0 as i64, center.1 as i64);
    let mut best: Option<(i64, usize)> = None;
    for (k, comp) in comps.iter().enumerate() {
        let mut d_min = i64::MAX;
        for (r, c) in comp.iter_true() {
            let dr = vr0 + r as i64 - ctr_r;
            let dc = vc0 + c as i64 - ctr_c;
            d_min = d_min.min(dr * dr + dc * dc);
        }
        if best.map_or(true, |(d, _)| d_min < d) {
            best = Some((d_min, k));
        }
    }
    let chosen = &comps[best.expect("components nonempty").1];
    let mut out = BinaryMask::filled(grid, false);
    for (r, c) in chosen.iter_true() {
        let (sr, sc) = (vr0 + r as i64, vc0 + c as i64);
        if sr >= 0 && sc >= 0 && (sr as usize) < grid.height && (sc as usize) < grid.width {
            out.set(sr as usize, sc as usize, true);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ImageGrid;

    fn grid(h: usize, w: usize) -> ImageGrid {
        ImageGrid::new(h, w).unwrap()
    }

    fn solid(g: ImageGrid, r0: usize, c0: usize, r1: usize, c1: usize) -> BinaryMask {
        BinaryMask::from_fn(g, |r, c| r >= r0 && r <= r1 && c >= c0 && c <= c1)
    }

    /// Naive per-pixel neighborhood scan, the independent oracle for
    /// erosion/dilation semantics including borders.
    fn erode_oracle(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
        let g = mask.grid();
        BinaryMask::from_fn(g, |r, c| {
            se.offsets().iter().all(|&(dr, dc)| {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                g.contains(nr, nc) && mask.get(nr as usize, nc as usize)
            })
        })
    }

    fn dilate_oracle(mask: &BinaryMask, se: &StructuringElement) -> BinaryMask {
        let g = mask.grid();
        BinaryMask::from_fn(g, |r, c| {
            se.offsets().iter().any(|&(dr, dc)| {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                g.contains(nr, nc) && mask.get(nr as usize, nc as usize)
            })
        })
    }

    fn seeded_mask(g: ImageGrid, seed: u64, density_pct: u64) -> BinaryMask {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
        BinaryMask::from_fn(g, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) % 100 < density_pct
        })
    }

    #[test]
    fn erode_solid_square_shrinks_by_radius() {
        let g = grid(14, 14);
        let m = solid(g, 2, 2, 11, 11); // 10x10 solid
        let se = StructuringElement::square(1).unwrap();
        assert_eq!(erode(&m, &se), solid(g, 3, 3, 10, 10)); // 8x8
    }

    #[test]
    fn dilate_single_pixel_makes_block() {
        let g = grid(7, 7);
        let mut m = BinaryMask::filled(g, false);
        m.set(3, 3, true);
        let se = StructuringElement::square(1).unwrap();
        assert_eq!(dilate(&m, &se), solid(g, 2, 2, 4, 4));
    }

    #[test]
    fn erode_dilate_match_neighborhood_oracle() {
        for (seed, shape, radius) in [
            (1u64, SeShape::Square, 1usize),
            (2, SeShape::Square, 2),
            (3, SeShape::Disk, 1),
            (4, SeShape::Disk, 3),
            (5, SeShape::Square, 4),
            (6, SeShape::Disk, 5),
        ] {
            let g = grid(21, 17);
            let m = seeded_mask(g, seed, 55);
            let se = StructuringElement::new(shape, radius).unwrap();
            assert_eq!(erode(&m, &se), erode_oracle(&m, &se), "erode {shape:?} r={radius}");
            assert_eq!(dilate(&m, &se), dilate_oracle(&m, &se), "dilate {shape:?} r={radius}");
        }
    }

    #[test]
    fn open_removes_isolated_pixel_and_preserves_solid() {
        let g = grid(14, 14);
        let se = StructuringElement::square(1).unwrap();
        let mut m = solid(g, 2, 2, 11, 11);
        m.set(0, 13, true); // isolated speck
        let opened = open(&m, &se);
        assert!(!opened.get(0, 13));
        assert_eq!(opened, solid(g, 2, 2, 11, 11));
    }

    #[test]
    fn close_fills_single_pixel_hole() {
        let g = grid(14, 14);
        let se = StructuringElement::square(1).unwrap();
        let mut m = solid(g, 2, 2, 11, 11);
        m.set(6, 6, false);
        assert_eq!(close(&m, &se), solid(g, 2, 2, 11, 11));
    }

    #[test]
    fn morphology_laws_hold_on_random_masks() {
        // Closing is extensive only for pixels at least `radius` away from
        // the border: the out-of-bounds-is-background policy makes erosion
        // unconditionally clear the border band.
        let se = StructuringElement::disk(2).unwrap();
        let rad = se.radius();
        for seed in 0..20u64 {
            let g = grid(19, 23);
            let m = seeded_mask(g, seed, 45);
            let eroded = erode(&m, &se);
            let dilated = dilate(&m, &se);
            let opened = open(&m, &se);
            let closed = close(&m, &se);
            for (r, c) in g.pixels() {
                assert!(!eroded.get(r, c) || m.get(r, c), "erode ⊆ m");
                assert!(!m.get(r, c) || dilated.get(r, c), "m ⊆ dilate");
                assert!(!opened.get(r, c) || m.get(r, c), "open ⊆ m");
                let interior = r >= rad
                    && c >= rad
                    && r + rad < g.height
                    && c + rad < g.width;
                if interior {
                    assert!(!m.get(r, c) || closed.get(r, c), "m ⊆ close on interior");
                }
            }
            assert_eq!(open(&opened, &se), opened, "open idempotent");
            assert_eq!(close(&closed, &se), closed, "close idempotent");
        }
    }

    #[test]
    fn duality_away_from_borders() {
        let se = StructuringElement::square(2).unwrap();
        let g = grid(20, 20);
        let m = seeded_mask(g, 9, 50);
        let complement = BinaryMask::from_fn(g, |r, c| !m.get(r, c));
        let lhs = erode(&m, &se);
        let rhs = dilate(&complement, &se);
        for r in 2..18 {
            for c in 2..18 {
                assert_eq!(lhs.get(r, c), !rhs.get(r, c), "duality at ({r},{c})");
            }
        }
    }

    #[test]
    fn components_empty_and_diagonal() {
        let g = grid(5, 5);
        assert!(connected_components(&BinaryMask::filled(g, false), Connectivity::Eight)
            .is_empty());

        let mut m = BinaryMask::filled(g, false);
        m.set(1, 1, true);
        m.set(2, 2, true);
        assert_eq!(connected_components(&m, Connectivity::Eight).len(), 1);
        assert_eq!(connected_components(&m, Connectivity::Four).len(), 2);
    }

    /// Union-find flood oracle, structured differently from the BFS in the
    /// implementation.
    fn components_oracle(mask: &BinaryMask, connectivity: Connectivity) -> Vec<BinaryMask> {
        let g = mask.grid();
        let n = g.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            let mut root = i;
            while parent[root] != root {
                root = parent[root];
            }
            let mut cur = i;
            while parent[cur] != root {
                let next = parent[cur];
                parent[cur] = root;
                cur = next;
            }
            root
        }
        for (r, c) in g.pixels() {
            if !mask.get(r, c) {
                continue;
            }
            for &(dr, dc) in connectivity.neighbors() {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if g.contains(nr, nc) && mask.get(nr as usize, nc as usize) {
                    let a = find(&mut parent, g.index(r, c));
                    let b = find(&mut parent, g.index(nr as usize, nc as usize));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut by_root: std::collections::BTreeMap<usize, BinaryMask> =
            std::collections::BTreeMap::new();
        for (r, c) in g.pixels() {
            if mask.get(r, c) {
                let root = find(&mut parent, g.index(r, c));
                by_root
                    .entry(root)
                    .or_insert_with(|| BinaryMask::filled(g, false))
                    .set(r, c, true);
            }
        }
        let mut comps: Vec<(usize, usize, BinaryMask)> = by_root
            .into_iter()
            .map(|(root, m)| (root, m.count_true(), m))
            .collect();
        comps.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        comps.into_iter().map(|(_, _, m)| m).collect()
    }

    #[test]
    fn components_match_union_find_oracle() {
        for seed in 0..12u64 {
            let g = grid(18, 22);
            let m = seeded_mask(g, seed.wrapping_add(100), 40);
            for conn in [Connectivity::Four, Connectivity::Eight] {
                let got = connected_components(&m, conn);
                let want = components_oracle(&m, conn);
                assert_eq!(got, want, "seed {seed} {conn:?}");
            }
        }
    }

    #[test]
    fn components_partition_the_input() {
        let g = grid(15, 15);
        let m = seeded_mask(g, 7, 35);
        let comps = connected_components(&m, Connectivity::Eight);
        let mut union = BinaryMask::filled(g, false);
        for comp in &comps {
            for (r, c) in comp.iter_true() {
                assert!(!union.get(r, c), "components overlap at ({r},{c})");
                union.set(r, c, true);
            }
        }
        assert_eq!(union, m);
    }

    #[test]
    fn imp_keeps_clean_mask() {
        let g = grid(30, 30);
        let m = solid(g, 8, 8, 21, 21);
        let se = StructuringElement::square(2).unwrap();
        let out = imp_process(&m, (14, 14), &se, &se, Connectivity::Eight);
        assert_eq!(out, m);
    }

    #[test]
    fn imp_removes_seeded_salt() {
        // Solid blob plus 200 salt pixels scattered at Chebyshev distance
        // >= 3 from the blob; opening (radius 1) kills the salt and the
        // closest-component rule keeps exactly the blob.
        let g = grid(64, 64);
        let blob = solid(g, 24, 24, 39, 39);
        let mut m = blob.clone();
        let mut state = 0xabcdefu64;
        let mut placed = 0;
        while placed < 200 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let r = ((state >> 24) % 64) as usize;
            let c = ((state >> 44) % 64) as usize;
            let near_blob = (21..=42).contains(&r) && (21..=42).contains(&c);
            if near_blob || m.get(r, c) {
                continue;
            }
            // Keep salt isolated so opening can remove it.
            let mut isolated = true;
            for dr in -1..=1i64 {
                for dc in -1..=1i64 {
                    let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                    if g.contains(nr, nc) && m.get(nr as usize, nc as usize) {
                        isolated = false;
                    }
                }
            }
            if !isolated {
                continue;
            }
            m.set(r, c, true);
            placed += 1;
        }
        let se = StructuringElement::square(1).unwrap();
        let out = imp_process(&m, (31, 31), &se, &se, Connectivity::Eight);
        assert_eq!(out, blob);
    }

    #[test]
    fn imp_discards_far_satellite() {
        let g = grid(40, 40);
        let mut m = solid(g, 5, 5, 14, 14);
        for r in 30..34 {
            for c in 30..34 {
                m.set(r, c, true);
            }
        }
        let se = StructuringElement::square(1).unwrap();
        let out = imp_process(&m, (9, 9), &se, &se, Connectivity::Eight);
        assert_eq!(out, solid(g, 5, 5, 14, 14));
    }

    #[test]
    fn imp_center_inside_component_selects_it_even_if_smaller() {
        let g = grid(40, 40);
        let mut m = solid(g, 2, 2, 9, 9); // 64 px
        for r in 20..36 {
            for c in 20..36 {
                m.set(r, c, true); // 256 px, farther from center
            }
        }
        let se = StructuringElement::square(1).unwrap();
        let out = imp_process(&m, (5, 5), &se, &se, Connectivity::Eight);
        assert_eq!(out, solid(g, 2, 2, 9, 9));
    }

    #[test]
    fn imp_empty_input_is_empty() {
        let g = grid(10, 10);
        let se = StructuringElement::square(1).unwrap();
        let out = imp_process(&BinaryMask::filled(g, false), (5, 5), &se, &se, Connectivity::Eight);
        assert_eq!(out.count_true(), 0);
    }

    #[test]
    fn imp_crop_matches_full_grid_processing() {
        // The bounding-box crop is an internal optimization; verify against
        // uncropped composition of the same primitives.
        for seed in 0..8u64 {
            let g = grid(48, 48);
            let mut m = BinaryMask::filled(g, false);
            let blob = seeded_mask(grid(12, 12), seed, 60);
            for (r, c) in blob.iter_true() {
                m.set(r + 10, c + 14, true);
            }
            let se_o = StructuringElement::square(1).unwrap();
            let se_c = StructuringElement::disk(2).unwrap();
            let got = imp_process(&m, (16, 20), &se_o, &se_c, Connectivity::Eight);
            let cleaned = close(&open(&m, &se_o), &se_c);
            let comps = connected_components(&cleaned, Connectivity::Eight);
            if comps.is_empty() {
                assert_eq!(got.count_true(), 0);
                continue;
            }
            let mut best: Option<(i64, &BinaryMask)> = None;
            for comp in &comps {
                let d = comp
                    .iter_true()
                    .map(|(r, c)| {
                        let dr = r as i64 - 16;
                        let dc = c as i64 - 20;
                        dr * dr + dc * dc
                    })
                    .min()
                    .unwrap();
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, comp));
                }
            }
            assert_eq!(&got, best.unwrap().1, "seed {seed}");
        }
    }

    #[test]
    fn boundary_marks_border_and_inner_contour() {
        let g = grid(8, 8);
        let m = solid(g, 0, 0, 7, 7);
        let b = boundary_pixels(&m);
        for (r, c) in g.pixels() {
            let on_border = r == 0 || c == 0 || r == 7 || c == 7;
            assert_eq!(b.get(r, c), on_border);
        }

        let inner = solid(g, 2, 2, 5, 5);
        let bi = boundary_pixels(&inner);
        for (r, c) in g.pixels() {
            let expected = inner.get(r, c) && (r == 2 || r == 5 || c == 2 || c == 5);
            assert_eq!(bi.get(r, c), expected);
        }
    }
}
