//! File formats: 16-bit PNG depth (millimeters, 0 = invalid) and label
//! images, 8-bit RGB, camera intrinsics JSON, a small binary cache for
//! dense predictor outputs, the on-disk dataset layout, and refinement
//! crop files.
//!
//! A dataset root holds one `camera.json` plus one directory per scene
//! containing `depth.png`, and optionally `rgb.png` and `label.png`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageReader, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::augment::RefinePair;
use crate::geometry::PinholeCamera;
use crate::types::{
    BinaryMask, DepthMap, DirectionField, Error, ImageGrid, InstanceLabelMap, Result, RgbRaster,
    SemanticProbs,
};

fn data_err(path: &Path, what: impl std::fmt::Display) -> Error {
    Error::Data(format!("{}: {what}", path.display()))
}

fn decode(path: &Path) -> Result<DynamicImage> {
    ImageReader::open(path)
        .map_err(|e| data_err(path, e))?
        .decode()
        .map_err(|e| data_err(path, e))
}

fn grid_of(w: u32, h: u32) -> Result<ImageGrid> {
    ImageGrid::new(h as usize, w as usize)
}

/// Millimeter depth image; valid depths round to millimeters and clamp to
/// [1, 65535] so validity survives the round trip, invalid pixels write 0.
pub fn write_depth_png(path: &Path, depth: &DepthMap) -> Result<()> {
    let grid = depth.grid();
    let img = ImageBuffer::<Luma<u16>, Vec<u16>>::from_fn(
        grid.width as u32,
        grid.height as u32,
        |x, y| {
            let (r, c) = (y as usize, x as usize);
            if !depth.is_valid(r, c) {
                return Luma([0]);
            }
            let mm = (depth.get(r, c) * 1000.0).round().clamp(1.0, 65535.0);
            Luma([mm as u16])
        },
    );
    img.save(path).map_err(|e| data_err(path, e))
}

pub fn read_depth_png(path: &Path) -> Result<DepthMap> {
    let img = match decode(path)? {
        DynamicImage::ImageLuma16(img) => img,
        other => {
            return Err(data_err(
                path,
                format!("expected 16-bit grayscale depth, got {:?}", other.color()),
            ))
        }
    };
    let grid = grid_of(img.width(), img.height())?;
    let mut meters = Vec::with_capacity(grid.len());
    let mut valid = Vec::with_capacity(grid.len());
    for (r, c) in grid.pixels() {
        let mm = img.get_pixel(c as u32, r as u32)[0];
        meters.push(mm as f64 / 1000.0);
        valid.push(mm > 0);
    }
    DepthMap::new(grid, meters, valid)
}

/// Instance labels as 16-bit grayscale: 0 background, 1 table, >= 2 objects.
pub fn write_label_png(path: &Path, labels: &InstanceLabelMap) -> Result<()> {
    let grid = labels.grid();
    if let Some(&big) = labels.as_slice().iter().find(|&&v| v > u16::MAX as u32) {
        return Err(data_err(path, format!("label {big} exceeds 16-bit range")));
    }
    let img = ImageBuffer::<Luma<u16>, Vec<u16>>::from_fn(
        grid.width as u32,
        grid.height as u32,
        |x, y| Luma([labels.get(y as usize, x as usize) as u16]),
    );
    img.save(path).map_err(|e| data_err(path, e))
}

pub fn read_label_png(path: &Path) -> Result<InstanceLabelMap> {
    let img = match decode(path)? {
        DynamicImage::ImageLuma16(img) => img,
        other => {
            return Err(data_err(
                path,
                format!("expected 16-bit grayscale labels, got {:?}", other.color()),
            ))
        }
    };
    let grid = grid_of(img.width(), img.height())?;
    let mut raw = Vec::with_capacity(grid.len());
    for (r, c) in grid.pixels() {
        raw.push(img.get_pixel(c as u32, r as u32)[0] as u32);
    }
    InstanceLabelMap::new(grid, raw).map_err(|e| data_err(path, e))
}

pub fn write_rgb_png(path: &Path, rgb: &RgbRaster) -> Result<()> {
    let grid = rgb.grid();
    let img = ImageBuffer::<Rgb<u8>, Vec<u8>>::from_raw(
        grid.width as u32,
        grid.height as u32,
        rgb.as_slice().to_vec(),
    )
    .expect("raster length matches its grid");
    img.save(path).map_err(|e| data_err(path, e))
}

pub fn read_rgb_png(path: &Path) -> Result<RgbRaster> {
    let img = decode(path)?.into_rgb8();
    let grid = grid_of(img.width(), img.height())?;
    RgbRaster::new(grid, img.into_raw())
}

/// An 8-bit mask PNG: nonzero = inside. Written as 0/255.
pub fn write_mask_png(path: &Path, mask: &BinaryMask) -> Result<()> {
    let grid = mask.grid();
    let img = ImageBuffer::<Luma<u8>, Vec<u8>>::from_fn(
        grid.width as u32,
        grid.height as u32,
        |x, y| Luma([if mask.get(y as usize, x as usize) { 255 } else { 0 }]),
    );
    img.save(path).map_err(|e| data_err(path, e))
}

pub fn read_mask_png(path: &Path) -> Result<BinaryMask> {
    let img = decode(path)?.into_luma8();
    let grid = grid_of(img.width(), img.height())?;
    Ok(BinaryMask::from_fn(grid, |r, c| img.get_pixel(c as u32, r as u32)[0] > 0))
}

/// The `camera.json` document at a dataset root.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraJson {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraJson {
    pub fn from_camera(camera: &PinholeCamera) -> Self {
        Self {
            fx: camera.fx,
            fy: camera.fy,
            cx: camera.cx,
            cy: camera.cy,
            width: camera.grid.width,
            height: camera.grid.height,
        }
    }

    pub fn to_camera(self) -> Result<PinholeCamera> {
        PinholeCamera::new(self.fx, self.fy, self.cx, self.cy, ImageGrid::new(self.height, self.width)?)
    }
}

pub fn write_camera_json(path: &Path, camera: &PinholeCamera) -> Result<()> {
    let text = serde_json::to_string_pretty(&CameraJson::from_camera(camera))
        .expect("intrinsics serialize");
    std::fs::write(path, text).map_err(|e| data_err(path, e))
}

pub fn read_camera_json(path: &Path) -> Result<PinholeCamera> {
    let text = std::fs::read_to_string(path).map_err(|e| data_err(path, e))?;
    let parsed: CameraJson =
        serde_json::from_str(&text).map_err(|e| data_err(path, e))?;
    parsed.to_camera()
}

const DENSE_MAGIC: &[u8; 4] = b"UOIS";
const DENSE_VERSION: u8 = 1;

/// Binary cache of a dense per-pixel tensor: magic `UOIS`, version byte,
/// u32 height/width/channels (little-endian), then height * width *
/// channels little-endian f32 values, row-major with channels contiguous
/// per pixel.
pub fn write_dense_tensor(
    path: &Path,
    grid: ImageGrid,
    channels: usize,
    values: &[f32],
) -> Result<()> {
    if values.len() != grid.len() * channels {
        return Err(Error::LengthMismatch {
            context: "write_dense_tensor",
            expected: grid.len() * channels,
            actual: values.len(),
        });
    }
    let file = File::create(path).map_err(|e| data_err(path, e))?;
    let mut w = BufWriter::new(file);
    let mut emit = |bytes: &[u8]| w.write_all(bytes).map_err(|e| data_err(path, e));
    emit(DENSE_MAGIC)?;
    emit(&[DENSE_VERSION])?;
    for dim in [grid.height, grid.width, channels] {
        let v = u32::try_from(dim).map_err(|_| data_err(path, "dimension exceeds u32"))?;
        emit(&v.to_le_bytes())?;
    }
    for &v in values {
        emit(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| data_err(path, e))
}

pub fn read_dense_tensor(path: &Path) -> Result<(ImageGrid, usize, Vec<f32>)> {
    let file = File::open(path).map_err(|e| data_err(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 17];
    r.read_exact(&mut header).map_err(|e| data_err(path, e))?;
    if &header[..4] != DENSE_MAGIC {
        return Err(data_err(path, "bad magic, not a dense tensor cache"));
    }
    if header[4] != DENSE_VERSION {
        return Err(data_err(path, format!("unsupported version {}", header[4])));
    }
    let dim = |at: usize| u32::from_le_bytes(header[at..at + 4].try_into().unwrap()) as usize;
    let (height, width, channels) = (dim(5), dim(9), dim(13));
    let grid = ImageGrid::new(height, width)?;
    if channels == 0 {
        return Err(data_err(path, "zero channels"));
    }
    let count = grid.len() * channels;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| data_err(path, e))?;
    if bytes.len() != count * 4 {
        return Err(data_err(
            path,
            format!("expected {} value bytes, found {}", count * 4, bytes.len()),
        ));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok((grid, channels, values))
}

/// Caches a predictor's outputs as one tensor: per pixel, the class
/// probabilities followed by the direction (delta_row, delta_col). The
/// direction validity flags are not persisted; reads treat every pixel as
/// valid.
pub fn write_predictions(
    path: &Path,
    probs: &SemanticProbs,
    dirs: &DirectionField,
) -> Result<()> {
    if probs.grid() != dirs.grid() {
        return Err(Error::GridMismatch {
            context: "write_predictions",
            expected: probs.grid(),
            actual: dirs.grid(),
        });
    }
    let grid = probs.grid();
    let classes = probs.classes();
    let mut values = Vec::with_capacity(grid.len() * (classes + 2));
    for i in 0..grid.len() {
        for c in 0..classes {
            values.push(probs.as_slice()[i * classes + c] as f32);
        }
        let d = dirs.dirs()[i];
        values.push(d[0] as f32);
        values.push(d[1] as f32);
    }
    write_dense_tensor(path, grid, classes + 2, &values)
}

pub fn read_predictions(path: &Path, classes: usize) -> Result<(SemanticProbs, DirectionField)> {
    let (grid, channels, values) = read_dense_tensor(path)?;
    if channels != classes + 2 {
        return Err(data_err(
            path,
            format!("expected {} channels ({classes} classes + 2), found {channels}", classes + 2),
        ));
    }
    let mut probs = Vec::with_capacity(grid.len() * classes);
    let mut dirs = Vec::with_capacity(grid.len());
    for px in values.chunks_exact(channels) {
        probs.extend(px[..classes].iter().map(|&v| v as f64));
        dirs.push([px[classes] as f64, px[classes + 1] as f64]);
    }
    Ok((
        SemanticProbs::new(grid, classes, probs).map_err(|e| data_err(path, e))?,
        DirectionField::new(grid, dirs).map_err(|e| data_err(path, e))?,
    ))
}

/// One scene directory's images.
#[derive(Clone, Debug)]
pub struct SceneFiles {
    pub depth: DepthMap,
    pub rgb: Option<RgbRaster>,
    pub labels: Option<InstanceLabelMap>,
}

/// Scene directories under a dataset root, sorted by name. A scene is any
/// subdirectory containing `depth.png`; other entries are ignored.
pub fn scene_dirs(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut scenes = Vec::new();
    let entries = std::fs::read_dir(root).map_err(|e| data_err(root, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| data_err(root, e))?;
        let path = entry.path();
        if path.is_dir() && path.join("depth.png").is_file() {
            scenes.push((entry.file_name().to_string_lossy().into_owned(), path));
        }
    }
    scenes.sort();
    Ok(scenes)
}

/// Reads one scene directory; `rgb.png` and `label.png` are optional.
pub fn read_scene_dir(dir: &Path) -> Result<SceneFiles> {
    let depth = read_depth_png(&dir.join("depth.png"))?;
    let rgb_path = dir.join("rgb.png");
    let rgb = if rgb_path.is_file() { Some(read_rgb_png(&rgb_path)?) } else { None };
    let label_path = dir.join("label.png");
    let labels = if label_path.is_file() { Some(read_label_png(&label_path)?) } else { None };
    Ok(SceneFiles { depth, rgb, labels })
}

/// Writes one scene directory (creating it) with depth and any of rgb and
/// labels.
pub fn write_scene_dir(
    dir: &Path,
    depth: &DepthMap,
    rgb: Option<&RgbRaster>,
    labels: Option<&InstanceLabelMap>,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| data_err(dir, e))?;
    write_depth_png(&dir.join("depth.png"), depth)?;
    if let Some(rgb) = rgb {
        write_rgb_png(&dir.join("rgb.png"), rgb)?;
    }
    if let Some(labels) = labels {
        write_label_png(&dir.join("label.png"), labels)?;
    }
    Ok(())
}

/// Index row for one emitted refinement pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineIndexEntry {
    pub scene: String,
    pub instance: u32,
    /// File stem: `<stem>_rgb.png`, `<stem>_mask.png`, `<stem>_gt.png`.
    pub stem: String,
    pub crop_box: crate::augment::CropBox,
}

/// Writes a refinement pair's files next to each other. The ground-truth
/// crop is only written in training mode (`with_gt`).
pub fn write_refine_pair(
    dir: &Path,
    stem: &str,
    pair: &RefinePair,
    with_gt: bool,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| data_err(dir, e))?;
    write_rgb_png(&dir.join(format!("{stem}_rgb.png")), &pair.rgb_crop)?;
    write_mask_png(&dir.join(format!("{stem}_mask.png")), &pair.mask_crop)?;
    if with_gt {
        write_mask_png(&dir.join(format!("{stem}_gt.png")), &pair.gt_crop)?;
    }
    Ok(())
}

pub fn write_refine_index(path: &Path, entries: &[RefineIndexEntry]) -> Result<()> {
    let text = serde_json::to_string_pretty(entries).expect("index serializes");
    std::fs::write(path, text).map_err(|e| data_err(path, e))
}

pub fn read_refine_index(path: &Path) -> Result<Vec<RefineIndexEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| data_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| data_err(path, e))
}
