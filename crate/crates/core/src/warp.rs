//! Piecewise-affine image warping over a landmark triangulation.

use rayon::prelude::*;

use crate::delaunay::Triangulation;
use crate::error::{Error, Result};
use crate::face_image::{quantize, Border, FaceImage};
use crate::geometry::{signed_area, Affine, Point};

/// Destination triangles smaller than this (px²) are skipped.
pub const MIN_TRIANGLE_AREA: f64 = 1e-6;

const NO_OWNER: u32 = u32::MAX;

// barycentric slack so pixels exactly on an edge are claimed
const EDGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct WarpOutput {
    pub image: FaceImage,
    /// Destination triangles whose affine solve was skipped.
    pub degenerate_triangles: usize,
}

/// Pixel-to-triangle assignment for one destination shape.
///
/// Each destination pixel belongs to the lowest-index triangle containing it,
/// which settles shared edges and overlaps from folded meshes.
#[derive(Debug, Clone)]
pub struct TriangleRaster {
    width: u32,
    height: u32,
    triangles: Vec<[usize; 3]>,
    dest: Vec<Point>,
    owner: Vec<u32>,
    degenerate: Vec<bool>,
}

impl TriangleRaster {
    pub fn new(dest: &[Point], tri: &Triangulation, width: u32, height: u32) -> Result<Self> {
        if let Some(bad) = tri.triangles.iter().flatten().find(|&&i| i >= dest.len()) {
            return Err(Error::Mismatch(format!(
                "triangle vertex {bad} out of range for {} destination points",
                dest.len()
            )));
        }
        let w = width as usize;
        let mut owner = vec![NO_OWNER; w * height as usize];
        let mut degenerate = vec![false; tri.triangles.len()];
        for (t, idx) in tri.triangles.iter().enumerate() {
            let [a, b, c] = idx.map(|i| dest[i]);
            let area = signed_area(a, b, c);
            if area.is_nan() || area.abs() < MIN_TRIANGLE_AREA {
                degenerate[t] = true;
                continue;
            }
            let min_x = a.x.min(b.x).min(c.x).ceil().max(0.0);
            let max_x = a.x.max(b.x).max(c.x).floor().min((width - 1) as f64);
            let min_y = a.y.min(b.y).min(c.y).ceil().max(0.0);
            let max_y = a.y.max(b.y).max(c.y).floor().min((height - 1) as f64);
            if min_x > max_x || min_y > max_y {
                continue;
            }
            let inv = 1.0 / (2.0 * area);
            for y in min_y as usize..=max_y as usize {
                let py = y as f64;
                for x in min_x as usize..=max_x as usize {
                    let slot = &mut owner[y * w + x];
                    if *slot != NO_OWNER {
                        continue;
                    }
                    let p = Point::new(x as f64, py);
                    // normalized barycentric coordinates; sign-agnostic via inv
                    let l0 = 2.0 * signed_area(b, c, p) * inv;
                    let l1 = 2.0 * signed_area(c, a, p) * inv;
                    let l2 = 1.0 - l0 - l1;
                    if l0 >= -EDGE_SLACK && l1 >= -EDGE_SLACK && l2 >= -EDGE_SLACK {
                        *slot = t as u32;
                    }
                }
            }
        }
        Ok(TriangleRaster {
            width,
            height,
            triangles: tri.triangles.clone(),
            dest: dest.to_vec(),
            owner,
            degenerate,
        })
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|d| **d).count()
    }

    /// Triangle owning pixel `(x, y)`, if any.
    pub fn owner(&self, x: u32, y: u32) -> Option<usize> {
        let o = self.owner[y as usize * self.width as usize + x as usize];
        (o != NO_OWNER).then_some(o as usize)
    }

    /// Warps `image` (whose landmarks are `source`) onto this raster's
    /// destination shape, returning unrounded channel values.
    pub fn warp_f64(&self, image: &FaceImage, source: &[Point], fill: [u8; 3]) -> Result<Vec<f64>> {
        if source.len() != self.dest.len() {
            return Err(Error::Mismatch(format!(
                "source has {} points, destination has {}",
                source.len(),
                self.dest.len()
            )));
        }
        let maps: Vec<Option<Affine>> = self
            .triangles
            .iter()
            .zip(&self.degenerate)
            .map(|(idx, &degenerate)| {
                if degenerate {
                    return None;
                }
                Affine::from_triangles(idx.map(|i| self.dest[i]), idx.map(|i| source[i]), 0.0)
            })
            .collect();
        let w = self.width as usize;
        let fill_f = fill.map(f64::from);
        let mut out = vec![0.0; w * self.height as usize * 3];
        out.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
            for (x, px) in row.chunks_exact_mut(3).enumerate() {
                let o = self.owner[y * w + x];
                let value = match maps.get(o as usize).copied().flatten() {
                    Some(m) => {
                        let s = m.apply(Point::new(x as f64, y as f64));
                        image.sample_bilinear(s.x, s.y, Border::Clamp)
                    }
                    None => fill_f,
                };
                px.copy_from_slice(&value);
            }
        });
        Ok(out)
    }
}

pub(crate) fn quantize_buffer(width: u32, height: u32, values: &[f64]) -> FaceImage {
    let pixels = values.iter().map(|&v| quantize(v)).collect();
    FaceImage::new(width, height, pixels).expect("buffer sized from raster")
}

/// Warps `image` so the landmarks `from` move to `to`, one affine map per
/// triangle of `tri` (built over `to`). Out-of-frame source positions are
/// clamped; pixels covered by no usable triangle take `fill`.
pub fn warp_image(
    image: &FaceImage,
    from: &[Point],
    to: &[Point],
    tri: &Triangulation,
    fill: [u8; 3],
) -> Result<WarpOutput> {
    if from.len() != to.len() {
        return Err(Error::Mismatch(format!(
            "landmark lists differ in length: {} vs {}",
            from.len(),
            to.len()
        )));
    }
    let raster = TriangleRaster::new(to, tri, image.width(), image.height())?;
    let values = raster.warp_f64(image, from, fill)?;
    Ok(WarpOutput {
        image: quantize_buffer(image.width(), image.height(), &values),
        degenerate_triangles: raster.degenerate_count(),
    })
}
