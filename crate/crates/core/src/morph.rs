//! The two-face morphing function: landmark interpolation, a shared Delaunay
//! triangulation, two piecewise-affine warps and a cross-dissolve.

use crate::delaunay::{triangulate, Triangulation};
use crate::error::{Error, Result};
use crate::face_image::FaceImage;
use crate::geometry::Point;
use crate::landmarks::{add_boundary_points, LandmarkSet};
use crate::warp::{quantize_buffer, TriangleRaster};

#[derive(Debug, Clone, PartialEq)]
pub struct MorphResult {
    pub image: FaceImage,
    /// Interpolated facial landmarks (boundary points stripped).
    pub landmarks: LandmarkSet,
    pub ratio: f64,
    pub degenerate_triangles: usize,
}

/// Blend weights `(source, target)` for ratio `r`.
///
/// The target weight is `1 − (1 − r)` rather than `r`, so that swapping
/// source and target and passing `1 − r` reproduces the same weight pair
/// bit for bit.
pub fn blend_weights(r: f64) -> (f64, f64) {
    let source = 1.0 - r;
    (source, 1.0 - source)
}

fn check_ratio(r: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Domain(format!("morph ratio {r} outside [0, 1]")));
    }
    Ok(())
}

/// Pointwise `(1−r)·src + r·tgt`.
pub fn interpolate_landmarks(src: &LandmarkSet, tgt: &LandmarkSet, r: f64) -> Result<LandmarkSet> {
    check_ratio(r)?;
    if src.len() != tgt.len() {
        return Err(Error::Mismatch(format!(
            "landmark counts differ: {} vs {}",
            src.len(),
            tgt.len()
        )));
    }
    if (src.width, src.height) != (tgt.width, tgt.height) {
        return Err(Error::Mismatch(format!(
            "canvas sizes differ: {}x{} vs {}x{}",
            src.width, src.height, tgt.width, tgt.height
        )));
    }
    let (ws, wt) = blend_weights(r);
    let points = src
        .points
        .iter()
        .zip(&tgt.points)
        .map(|(a, b)| a.blend(ws, *b, wt))
        .collect();
    Ok(LandmarkSet::new(points, src.width, src.height))
}

/// Triangulation shared by both warps of a pair: Delaunay over the mean shape.
pub fn pair_triangulation(src: &[Point], tgt: &[Point]) -> Result<Triangulation> {
    let mean: Vec<Point> = src.iter().zip(tgt).map(|(a, b)| a.blend(0.5, *b, 0.5)).collect();
    triangulate(&mean)
}

/// Morphs `src` toward `tgt` by ratio `r`.
///
/// Both faces must already be aligned on the same canvas. Landmark sets
/// hold facial points only; the canvas boundary points are appended here.
pub fn morph(
    src_image: &FaceImage,
    src_lm: &LandmarkSet,
    tgt_image: &FaceImage,
    tgt_lm: &LandmarkSet,
    r: f64,
    fill: [u8; 3],
) -> Result<MorphResult> {
    check_ratio(r)?;
    let (w, h) = (src_image.width(), src_image.height());
    if (tgt_image.width(), tgt_image.height()) != (w, h) {
        return Err(Error::Mismatch("source and target images differ in size".into()));
    }
    if (src_lm.width, src_lm.height) != (w, h) {
        return Err(Error::Mismatch(format!(
            "landmarks are on a {}x{} canvas, image is {w}x{h}",
            src_lm.width, src_lm.height
        )));
    }
    let facial = src_lm.len();
    let src_full = add_boundary_points(src_lm);
    let tgt_full = add_boundary_points(tgt_lm);
    let dest = interpolate_landmarks(&src_full, &tgt_full, r)?;
    let tri = pair_triangulation(&src_full.points, &tgt_full.points)?;
    let raster = TriangleRaster::new(&dest.points, &tri, w, h)?;

    let (ws, wt) = blend_weights(r);
    let values = if wt == 0.0 {
        raster.warp_f64(src_image, &src_full.points, fill)?
    } else if ws == 0.0 {
        raster.warp_f64(tgt_image, &tgt_full.points, fill)?
    } else {
        let a = raster.warp_f64(src_image, &src_full.points, fill)?;
        let b = raster.warp_f64(tgt_image, &tgt_full.points, fill)?;
        a.iter().zip(&b).map(|(x, y)| ws * x + wt * y).collect()
    };
    Ok(MorphResult {
        image: quantize_buffer(w, h, &values),
        landmarks: dest.prefix(facial),
        ratio: r,
        degenerate_triangles: raster.degenerate_count(),
    })
}
