//! Facial landmark sets: sidecar I/O, eye-based alignment, boundary
//! augmentation and mirroring.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::face_image::{quantize, Border, FaceImage};
use crate::geometry::Point;

/// Default landmark count (dlib/iBUG 68-point convention).
pub const DEFAULT_LANDMARK_COUNT: usize = 68;

/// Points appended by [`add_boundary_points`].
pub const BOUNDARY_POINT_COUNT: usize = 8;

/// Below this inter-ocular distance (px) the alignment scale is unstable.
pub const MIN_EYE_DISTANCE: f64 = 2.0;

/// Left/right symmetry map of the 68-point convention: index `i` of a mirrored
/// face takes the (flipped) position of index `FLIP_68[i]` of the original.
pub const FLIP_68: [usize; 68] = [
    // jaw
    16, 15, 14, 13, 12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1, 0,
    // brows
    26, 25, 24, 23, 22, 21, 20, 19, 18, 17,
    // nose bridge, nostrils
    27, 28, 29, 30, 35, 34, 33, 32, 31,
    // eyes
    45, 44, 43, 42, 47, 46, 39, 38, 37, 36, 41, 40,
    // outer lip
    54, 53, 52, 51, 50, 49, 48, 59, 58, 57, 56, 55,
    // inner lip
    64, 63, 62, 61, 60, 67, 66, 65,
];

/// Ordered landmark coordinates in pixel space of an image of the given size.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet {
    pub points: Vec<Point>,
    pub width: u32,
    pub height: u32,
}

impl LandmarkSet {
    pub fn new(points: Vec<Point>, width: u32, height: u32) -> Self {
        LandmarkSet { points, width, height }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// A copy keeping only the first `n` points.
    pub fn prefix(&self, n: usize) -> LandmarkSet {
        LandmarkSet::new(self.points[..n.min(self.len())].to_vec(), self.width, self.height)
    }
}

/// Which landmark indices make up each eye, and how indices swap under mirroring.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkScheme {
    pub count: usize,
    /// Indices of the eye that appears on the image-left side.
    pub left_eye: Vec<usize>,
    pub right_eye: Vec<usize>,
    pub flip: Option<Vec<usize>>,
}

impl Default for LandmarkScheme {
    fn default() -> Self {
        LandmarkScheme {
            count: DEFAULT_LANDMARK_COUNT,
            left_eye: (36..42).collect(),
            right_eye: (42..48).collect(),
            flip: Some(FLIP_68.to_vec()),
        }
    }
}

impl LandmarkScheme {
    pub fn validate(&self) -> Result<()> {
        if self.count < 3 {
            return Err(Error::config("landmark_count", "need at least 3 landmarks"));
        }
        for (name, eye) in [("left_eye", &self.left_eye), ("right_eye", &self.right_eye)] {
            if eye.is_empty() {
                return Err(Error::config(name, "eye index set is empty"));
            }
            if let Some(bad) = eye.iter().find(|&&i| i >= self.count) {
                return Err(Error::config(
                    name,
                    format!("index {bad} out of range for {} landmarks", self.count),
                ));
            }
        }
        if let Some(flip) = &self.flip {
            if flip.len() != self.count {
                return Err(Error::config(
                    "flip_permutation",
                    format!("has {} entries, expected {}", flip.len(), self.count),
                ));
            }
            for (i, &j) in flip.iter().enumerate() {
                if j >= self.count || flip[j] != i {
                    return Err(Error::config(
                        "flip_permutation",
                        format!("entry {i} -> {j} is not a valid involution"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Target canvas and eye anchor positions shared by every aligned face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CanonicalFrame {
    pub width: u32,
    pub height: u32,
    pub left_eye: Point,
    pub right_eye: Point,
    /// Color used where the aligned canvas has no source coverage.
    pub fill: [u8; 3],
}

impl Default for CanonicalFrame {
    fn default() -> Self {
        CanonicalFrame {
            width: 512,
            height: 512,
            left_eye: Point::new(176.0, 230.0),
            right_eye: Point::new(336.0, 230.0),
            fill: [128, 128, 128],
        }
    }
}

impl CanonicalFrame {
    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(Error::config("frame", "canvas must be at least 2x2"));
        }
        if !self.left_eye.is_finite() || !self.right_eye.is_finite() {
            return Err(Error::config("frame", "eye anchors must be finite"));
        }
        if self.left_eye.y != self.right_eye.y {
            return Err(Error::config("frame.right_eye", "eye anchors must share a row"));
        }
        if self.right_eye.x - self.left_eye.x < MIN_EYE_DISTANCE {
            return Err(Error::config(
                "frame.right_eye",
                "right anchor must lie at least 2 px right of the left anchor",
            ));
        }
        // the flip x -> w-1-x puts the midline at (w-1)/2; anchors sized for w/2 are accepted too
        let mid = (self.left_eye.x + self.right_eye.x) * 0.5;
        if (mid - self.width as f64 * 0.5).abs() > 0.5 + 1e-9 {
            return Err(Error::config(
                "frame",
                format!("eye anchors are not symmetric about the canvas midline (mid {mid})"),
            ));
        }
        Ok(())
    }

    /// Fixed canvas points appended to every landmark set on this canvas.
    pub fn boundary_points(&self) -> [Point; BOUNDARY_POINT_COUNT] {
        boundary_points(self.width, self.height)
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    version: u32,
    image: String,
    width: u32,
    height: u32,
    points: Vec<[Option<f64>; 2]>,
}

/// Parses a landmark sidecar. `NaN`/`Infinity` tokens, which some JSON writers
/// emit, are accepted syntactically and then rejected as non-finite coordinates.
pub fn parse_landmarks(sidecar: &[u8], expected_points: usize) -> Result<(LandmarkSet, String)> {
    let text = std::str::from_utf8(sidecar)
        .map_err(|e| Error::parse("sidecar", format!("not UTF-8: {e}")))?;
    let cleaned = null_out_nonfinite_tokens(text);
    let raw: Sidecar = serde_json::from_str(&cleaned).map_err(|e| {
        Error::parse(json_error_field(&e), format!("malformed sidecar JSON: {e}"))
    })?;
    if raw.version != 1 {
        return Err(Error::parse("version", format!("unsupported version {}", raw.version)));
    }
    if raw.width == 0 || raw.height == 0 {
        return Err(Error::parse("width", "image dimensions must be positive"));
    }
    if raw.points.len() != expected_points {
        return Err(Error::parse(
            "points",
            format!(
                "point count mismatch: expected {expected_points}, found {}",
                raw.points.len()
            ),
        ));
    }
    let mut points = Vec::with_capacity(raw.points.len());
    for (k, [x, y]) in raw.points.into_iter().enumerate() {
        match (x, y) {
            (Some(x), Some(y)) if x.is_finite() && y.is_finite() => points.push(Point::new(x, y)),
            _ => {
                return Err(Error::parse(
                    "points",
                    format!("non-finite coordinate at index {k}"),
                ))
            }
        }
    }
    Ok((LandmarkSet::new(points, raw.width, raw.height), raw.image))
}

/// Serializes a landmark set in sidecar format, one compact JSON document.
pub fn landmarks_to_json(lm: &LandmarkSet, image: &str) -> String {
    let raw = Sidecar {
        version: 1,
        image: image.to_string(),
        width: lm.width,
        height: lm.height,
        points: lm.points.iter().map(|p| [Some(p.x), Some(p.y)]).collect(),
    };
    serde_json::to_string(&raw).expect("sidecar serialization cannot fail")
}

fn json_error_field(e: &serde_json::Error) -> &'static str {
    let msg = e.to_string();
    ["version", "image", "width", "height", "points"]
        .into_iter()
        .find(|f| msg.contains(&format!("`{f}`")))
        .unwrap_or("sidecar")
}

fn null_out_nonfinite_tokens(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    let mut in_string = false;
    while i < bytes.len() {
        let c = bytes[i];
        if in_string {
            if c == b'\\' && i + 1 < bytes.len() {
                out.push_str(&text[i..i + 2]);
                i += 2;
                continue;
            }
            if c == b'"' {
                in_string = false;
            }
            out.push(c as char);
            i += 1;
            continue;
        }
        if c == b'"' {
            in_string = true;
            out.push('"');
            i += 1;
            continue;
        }
        let rest = &text[i..];
        if let Some(token) = ["-Infinity", "Infinity", "NaN"]
            .into_iter()
            .find(|t| rest.starts_with(t))
        {
            out.push_str("null");
            i += token.len();
            continue;
        }
        // copy the whole UTF-8 scalar
        let ch = rest.chars().next().expect("non-empty");
        out.push(ch);
        i += ch.len_utf8();
    }
    out
}

/// Centroids of the two eye clusters, ordered as the scheme's (image-left, image-right).
pub fn eye_centers(lm: &LandmarkSet, scheme: &LandmarkScheme) -> Result<(Point, Point)> {
    let centroid = |idx: &[usize]| -> Result<Point> {
        let mut sum = Point::default();
        for &i in idx {
            let p = lm.points.get(i).ok_or_else(|| {
                Error::Alignment(format!("eye index {i} out of range for {} landmarks", lm.len()))
            })?;
            sum = sum + *p;
        }
        Ok(sum * (1.0 / idx.len() as f64))
    };
    let left = centroid(&scheme.left_eye)?;
    let right = centroid(&scheme.right_eye)?;
    if left.distance(right) < 1e-9 {
        return Err(Error::Alignment("eye centers coincide".into()));
    }
    Ok((left, right))
}

/// Similarity transform `p ↦ anchor + z·(p − origin)` with `z` a complex scale-rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    origin: Point,
    anchor: Point,
    // z = (re, im)
    re: f64,
    im: f64,
}

impl Similarity {
    /// Closed-form similarity sending `(from_a, from_b)` onto `(to_a, to_b)`.
    pub fn from_pairs(from_a: Point, from_b: Point, to_a: Point, to_b: Point) -> Result<Self> {
        let u = from_b - from_a;
        let v = to_b - to_a;
        let den = u.x * u.x + u.y * u.y;
        if den == 0.0 {
            return Err(Error::Alignment("coincident reference points".into()));
        }
        // z = v / u in complex arithmetic
        let re = (v.x * u.x + v.y * u.y) / den;
        let im = (v.y * u.x - v.x * u.y) / den;
        Ok(Similarity {
            origin: from_a,
            anchor: to_a,
            re,
            im,
        })
    }

    pub fn apply(&self, p: Point) -> Point {
        let d = p - self.origin;
        Point::new(
            self.anchor.x + self.re * d.x - self.im * d.y,
            self.anchor.y + self.im * d.x + self.re * d.y,
        )
    }

    pub fn apply_inverse(&self, q: Point) -> Point {
        let d = q - self.anchor;
        let den = self.re * self.re + self.im * self.im;
        Point::new(
            self.origin.x + (self.re * d.x + self.im * d.y) / den,
            self.origin.y + (self.re * d.y - self.im * d.x) / den,
        )
    }

    pub fn scale(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn rotation_deg(&self) -> f64 {
        self.im.atan2(self.re).to_degrees()
    }
}

/// Resamples a face onto the canonical canvas so its eye centers land on the frame anchors.
pub fn align_to_canonical(
    image: &FaceImage,
    lm: &LandmarkSet,
    frame: &CanonicalFrame,
    scheme: &LandmarkScheme,
) -> Result<(FaceImage, LandmarkSet)> {
    let (left, right) = eye_centers(lm, scheme)?;
    if left.distance(right) < MIN_EYE_DISTANCE {
        return Err(Error::Alignment(format!(
            "eye distance {:.3} px below {MIN_EYE_DISTANCE} px",
            left.distance(right)
        )));
    }
    if left.x >= right.x {
        return Err(Error::Alignment(
            "right eye lies left of the left eye; mirrored input cannot be aligned without reflection"
                .into(),
        ));
    }
    let transform = Similarity::from_pairs(left, right, frame.left_eye, frame.right_eye)?;
    let aligned = resample_similarity(image, &transform, frame);
    let points = lm.points.iter().map(|p| transform.apply(*p)).collect();
    Ok((aligned, LandmarkSet::new(points, frame.width, frame.height)))
}

fn resample_similarity(image: &FaceImage, transform: &Similarity, frame: &CanonicalFrame) -> FaceImage {
    let w = frame.width as usize;
    let mut pixels = vec![0u8; w * frame.height as usize * 3];
    pixels
        .par_chunks_mut(w * 3)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, px) in row.chunks_exact_mut(3).enumerate() {
                let src = transform.apply_inverse(Point::new(x as f64, y as f64));
                let v = image.sample_bilinear(src.x, src.y, Border::Constant(frame.fill));
                px[0] = quantize(v[0]);
                px[1] = quantize(v[1]);
                px[2] = quantize(v[2]);
            }
        });
    FaceImage::new(frame.width, frame.height, pixels).expect("canvas buffer sized from frame")
}

fn boundary_points(width: u32, height: u32) -> [Point; BOUNDARY_POINT_COUNT] {
    let r = (width - 1) as f64;
    let b = (height - 1) as f64;
    let mx = (width / 2) as f64;
    let my = (height / 2) as f64;
    [
        Point::new(0.0, 0.0),
        Point::new(r, 0.0),
        Point::new(r, b),
        Point::new(0.0, b),
        Point::new(mx, 0.0),
        Point::new(r, my),
        Point::new(mx, b),
        Point::new(0.0, my),
    ]
}

/// Appends the 4 canvas corners and 4 edge midpoints so a triangulation covers the canvas.
pub fn add_boundary_points(lm: &LandmarkSet) -> LandmarkSet {
    let mut points = lm.points.clone();
    points.extend(boundary_points(lm.width, lm.height));
    LandmarkSet::new(points, lm.width, lm.height)
}

/// Horizontal flip of a face. Landmark x ↦ width−1−x and indices are re-permuted
/// so each index keeps its anatomical meaning.
pub fn mirror(image: &FaceImage, lm: &LandmarkSet, scheme: &LandmarkScheme) -> Result<(FaceImage, LandmarkSet)> {
    Ok((image.flip_horizontal(), mirror_landmarks(lm, scheme)?))
}

pub fn mirror_landmarks(lm: &LandmarkSet, scheme: &LandmarkScheme) -> Result<LandmarkSet> {
    let flip = scheme.flip.as_ref().ok_or_else(|| {
        Error::config("flip_permutation", format!("no symmetry map for {} landmarks", lm.len()))
    })?;
    if flip.len() != lm.len() {
        return Err(Error::config(
            "flip_permutation",
            format!("symmetry map covers {} points, landmark set has {}", flip.len(), lm.len()),
        ));
    }
    let edge = (lm.width - 1) as f64;
    let points = flip
        .iter()
        .map(|&j| {
            let p = lm.points[j];
            Point::new(edge - p.x, p.y)
        })
        .collect();
    Ok(LandmarkSet::new(points, lm.width, lm.height))
}
