//! Pinhole camera model, depth backprojection, and ground-truth direction
//! field synthesis.
//!
//! Camera-frame axes follow the image: X grows with column, Y grows with row
//! (so Y is negative above the principal point), Z points into the scene.

use crate::types::{
    same_grid, DepthMap, DirectionField, ImageGrid, InstanceLabelMap, OrganizedPointCloud,
    Result, FIXED_DIRECTION,
};

/// Intrinsics of an undistorted pinhole camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub grid: ImageGrid,
}

impl PinholeCamera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, grid: ImageGrid) -> Result<Self> {
        if !(fx > 0.0) || !(fy > 0.0) {
            return Err(crate::Error::InvalidParam(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        Ok(Self { fx, fy, cx, cy, grid })
    }

    /// Square-pixel camera from a vertical field of view, with the principal
    /// point at the image center: fy = (height/2) / tan(fov/2), fx = fy.
    pub fn from_vertical_fov(grid: ImageGrid, vfov_deg: f64) -> Result<Self> {
        if !(vfov_deg > 0.0) || !(vfov_deg < 180.0) {
            return Err(crate::Error::InvalidParam(format!(
                "vertical FOV {vfov_deg} outside (0, 180) degrees"
            )));
        }
        let half = (vfov_deg / 2.0).to_radians();
        let fy = (grid.height as f64 / 2.0) / half.tan();
        Ok(Self {
            fx: fy,
            fy,
            cx: grid.width as f64 / 2.0,
            cy: grid.height as f64 / 2.0,
            grid,
        })
    }

    /// Backproject organized depth to camera-frame XYZ:
    /// X = (c - cx) z / fx, Y = (r - cy) z / fy, Z = z.
    pub fn backproject(&self, depth: &DepthMap) -> Result<OrganizedPointCloud> {
        same_grid("backproject", self.grid, depth.grid())?;
        let mut points = Vec::with_capacity(self.grid.len());
        for (r, c) in self.grid.pixels() {
            if depth.is_valid(r, c) {
                let z = depth.get(r, c);
                points.push([
                    (c as f64 - self.cx) * z / self.fx,
                    (r as f64 - self.cy) * z / self.fy,
                    z,
                ]);
            } else {
                points.push([0.0; 3]);
            }
        }
        OrganizedPointCloud::new(self.grid, points, depth.validity().to_vec())
    }

    /// Forward-project a camera-frame point to fractional pixel coordinates
    /// (row, col); Z must be positive.
    pub fn project(&self, point: [f64; 3]) -> Option<(f64, f64)> {
        if point[2] <= 0.0 {
            return None;
        }
        Some((
            point[1] / point[2] * self.fy + self.cy,
            point[0] / point[2] * self.fx + self.cx,
        ))
    }
}

/// Ground-truth direction field: each object pixel carries the unit vector
/// toward its instance centroid; background, table, and the degenerate pixel
/// sitting exactly on its centroid carry [`FIXED_DIRECTION`].
pub fn gt_direction_field(instances: &InstanceLabelMap) -> DirectionField {
    let grid = instances.grid();
    let mut centroids: Vec<(f64, f64)> = Vec::with_capacity(instances.num_instances());
    for (_, mask) in instances.instance_masks() {
        centroids.push(mask.centroid().expect("instances are nonempty"));
    }
    let mut dirs = Vec::with_capacity(grid.len());
    for (r, c) in grid.pixels() {
        let label = instances.get(r, c);
        if label < 2 {
            dirs.push(FIXED_DIRECTION);
            continue;
        }
        let (cr, cc) = centroids[(label - 2) as usize];
        let dr = cr - r as f64;
        let dc = cc - c as f64;
        let norm = (dr * dr + dc * dc).sqrt();
        if norm < 1e-12 {
            dirs.push(FIXED_DIRECTION);
        } else {
            dirs.push([dr / norm, dc / norm]);
        }
    }
    DirectionField::new(grid, dirs).expect("normalized by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BinaryMask, DepthMap, ImageGrid, InstanceLabelMap};

    fn grid(h: usize, w: usize) -> ImageGrid {
        ImageGrid::new(h, w).unwrap()
    }

    #[test]
    fn principal_point_backprojects_to_axis() {
        let g = grid(480, 640);
        let cam = PinholeCamera::new(500.0, 500.0, 320.0, 240.0, g).unwrap();
        let mut meters = vec![0.0; g.len()];
        let mut valid = vec![false; g.len()];
        meters[g.index(240, 320)] = 1.0;
        valid[g.index(240, 320)] = true;
        let cloud = cam.backproject(&DepthMap::new(g, meters, valid).unwrap()).unwrap();
        assert_eq!(cloud.get(240, 320), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn vertical_fov_focal_length_and_top_row() {
        let g = grid(480, 640);
        let cam = PinholeCamera::from_vertical_fov(g, 45.0).unwrap();
        let fy_expected = 240.0 / (22.5f64.to_radians()).tan();
        assert!((cam.fy - fy_expected).abs() < 1e-9);
        assert!((cam.fy - 579.41).abs() < 0.01);

        let meters = vec![1.0; g.len()];
        let valid = vec![true; g.len()];
        let cloud = cam.backproject(&DepthMap::new(g, meters, valid).unwrap()).unwrap();
        let y_top = cloud.get(0, 320)[1];
        assert!((y_top - (-240.0 / fy_expected)).abs() < 1e-12);
        assert!((y_top - (-0.4142)).abs() < 1e-4);
    }

    #[test]
    fn reprojection_round_trip_within_1e9() {
        let g = grid(24, 32);
        let cam = PinholeCamera::new(40.0, 36.0, 15.5, 11.5, g).unwrap();
        let mut state = 42u64;
        let mut meters = vec![0.0; g.len()];
        let valid = vec![true; g.len()];
        for z in meters.iter_mut() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *z = 0.3 + (state >> 40) as f64 / (1u64 << 24) as f64 * 2.0;
        }
        let depth = DepthMap::new(g, meters, valid).unwrap();
        let cloud = cam.backproject(&depth).unwrap();
        for (r, c) in g.pixels() {
            let p = cloud.get(r, c);
            let (pr, pc) = cam.project(p).unwrap();
            assert!((pr - r as f64).abs() < 1e-9, "row at ({r},{c})");
            assert!((pc - c as f64).abs() < 1e-9, "col at ({r},{c})");
            assert!((p[2] - depth.get(r, c)).abs() < 1e-12);
        }
    }

    #[test]
    fn backproject_linear_in_depth() {
        let g = grid(6, 7);
        let cam = PinholeCamera::new(10.0, 12.0, 3.0, 2.5, g).unwrap();
        let meters: Vec<f64> = (0..g.len()).map(|i| 0.5 + i as f64 * 0.01).collect();
        let valid = vec![true; g.len()];
        let a = cam
            .backproject(&DepthMap::new(g, meters.clone(), valid.clone()).unwrap())
            .unwrap();
        let scaled: Vec<f64> = meters.iter().map(|z| z * 3.0).collect();
        let b = cam.backproject(&DepthMap::new(g, scaled, valid).unwrap()).unwrap();
        for (r, c) in g.pixels() {
            let pa = a.get(r, c);
            let pb = b.get(r, c);
            for k in 0..3 {
                assert!((pb[k] - 3.0 * pa[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_mismatch_rejected() {
        let cam = PinholeCamera::new(10.0, 10.0, 5.0, 5.0, grid(10, 10)).unwrap();
        let depth = DepthMap::new(grid(9, 10), vec![1.0; 90], vec![true; 90]).unwrap();
        assert!(cam.backproject(&depth).is_err());
    }

    #[test]
    fn direction_three_four_five() {
        // Instance of pixels (0,0) and (6,8) has centroid (3,4), so the pixel
        // at (0,0) gets the 3-4-5 unit vector (0.6, 0.8).
        let g = grid(7, 9);
        let mut labels = vec![0u32; g.len()];
        labels[g.index(0, 0)] = 2;
        labels[g.index(6, 8)] = 2;
        let map = InstanceLabelMap::new(g, labels).unwrap();
        let field = gt_direction_field(&map);
        let d = field.get(0, 0);
        assert!((d[0] - 0.6).abs() < 1e-12 && (d[1] - 0.8).abs() < 1e-12);
        let d2 = field.get(6, 8);
        assert!((d2[0] + 0.6).abs() < 1e-12 && (d2[1] + 0.8).abs() < 1e-12);
    }

    #[test]
    fn all_background_gets_fixed_direction() {
        let g = grid(5, 5);
        let map = InstanceLabelMap::new(g, vec![0; 25]).unwrap();
        let field = gt_direction_field(&map);
        for (r, c) in g.pixels() {
            assert_eq!(field.get(r, c), FIXED_DIRECTION);
        }
    }

    #[test]
    fn degenerate_centroid_pixel_gets_fixed_direction() {
        let g = grid(5, 5);
        let mut labels = vec![0u32; 25];
        labels[g.index(2, 2)] = 2; // single-pixel instance: centroid == pixel
        let map = InstanceLabelMap::new(g, labels).unwrap();
        let field = gt_direction_field(&map);
        assert_eq!(field.get(2, 2), FIXED_DIRECTION);
    }

    #[test]
    fn seeded_field_reconstructs_centroids() {
        let g = grid(20, 20);
        let mut labels = vec![0u32; g.len()];
        // Three seeded rectangular blobs.
        let blobs = [(1usize, 1usize, 5usize, 6usize, 2u32), (8, 3, 12, 9, 3), (4, 12, 17, 18, 4)];
        for &(r0, c0, r1, c1, id) in &blobs {
            for r in r0..=r1 {
                for c in c0..=c1 {
                    labels[g.index(r, c)] = id;
                }
            }
        }
        let map = InstanceLabelMap::new(g, labels).unwrap();
        let field = gt_direction_field(&map);
        let masks = map.instance_masks();
        for (id, mask) in &masks {
            let (cr, cc) = mask.centroid().unwrap();
            for (r, c) in mask.iter_true() {
                let d = field.get(r, c);
                let dist =
                    ((cr - r as f64).powi(2) + (cc - c as f64).powi(2)).sqrt();
                if dist < 1e-12 {
                    assert_eq!(d, FIXED_DIRECTION);
                    continue;
                }
                let rr = r as f64 + d[0] * dist;
                let rc = c as f64 + d[1] * dist;
                assert!(
                    (rr - cr).abs() < 1e-6 && (rc - cc).abs() < 1e-6,
                    "instance {id} pixel ({r},{c}) lands at ({rr},{rc}), centroid ({cr},{cc})"
                );
            }
        }
    }

    #[test]
    fn field_is_unit_norm_everywhere() {
        let g = grid(15, 15);
        let mut labels = vec![0u32; g.len()];
        for r in 3..9 {
            for c in 4..11 {
                labels[g.index(r, c)] = 2;
            }
        }
        let map = InstanceLabelMap::new(g, labels).unwrap();
        let field = gt_direction_field(&map);
        for (r, c) in g.pixels() {
            let d = field.get(r, c);
            let norm = (d[0] * d[0] + d[1] * d[1]).sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn convex_mask_directions_descend_toward_centroid() {
        let g = grid(30, 30);
        let mut labels = vec![0u32; g.len()];
        for r in 5..25 {
            for c in 8..20 {
                labels[g.index(r, c)] = 2;
            }
        }
        let map = InstanceLabelMap::new(g, labels).unwrap();
        let field = gt_direction_field(&map);
        let mask = BinaryMask::from_fn(g, |r, c| map.get(r, c) == 2);
        let (cr, cc) = mask.centroid().unwrap();
        for (r, c) in mask.iter_true() {
            let before = ((cr - r as f64).powi(2) + (cc - c as f64).powi(2)).sqrt();
            if before <= 1.0 {
                continue;
            }
            let d = field.get(r, c);
            let nr = r as f64 + d[0];
            let nc = c as f64 + d[1];
            let after = ((cr - nr).powi(2) + (cc - nc).powi(2)).sqrt();
            assert!(after < before, "no descent at ({r},{c})");
        }
    }
}
