//! Deterministic synthetic faces for tests, benchmarks and demos.
//!
//! Faces are drawn procedurally around a 68-point landmark layout, with each
//! expression deforming the mouth, brows and eyes. Everything is a pure
//! function of the subject seed.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::affect_space::Expression;
use crate::error::{Error, Result};
use crate::face_image::{quantize, Border, FaceImage};
use crate::geometry::Point;
use crate::landmarks::{landmarks_to_json, CanonicalFrame, LandmarkSet, Similarity};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFace {
    pub image: FaceImage,
    pub landmarks: LandmarkSet,
}

// layout is designed on a 512 canvas, symmetric about x = 255.5
const DESIGN: f64 = 512.0;
const CX: f64 = 255.5;

struct Shape {
    mouth_width: f64,
    mouth_open: f64,
    corner_drop: f64,
    upper_lip_raise: f64,
    brow_raise: f64,
    inner_brow_drop: f64,
    eye_open: f64,
}

fn shape(expr: Expression) -> Shape {
    let base = Shape {
        mouth_width: 1.0,
        mouth_open: 3.0,
        corner_drop: 0.0,
        upper_lip_raise: 0.0,
        brow_raise: 0.0,
        inner_brow_drop: 0.0,
        eye_open: 1.0,
    };
    match expr {
        Expression::Neutral => base,
        Expression::Happy => Shape {
            mouth_width: 1.22,
            mouth_open: 9.0,
            corner_drop: -16.0,
            eye_open: 0.8,
            ..base
        },
        Expression::Surprised => Shape {
            mouth_width: 0.82,
            mouth_open: 32.0,
            brow_raise: 20.0,
            eye_open: 1.4,
            ..base
        },
        Expression::Afraid => Shape {
            mouth_width: 1.12,
            mouth_open: 18.0,
            corner_drop: 4.0,
            brow_raise: 12.0,
            inner_brow_drop: -8.0,
            eye_open: 1.3,
            ..base
        },
        Expression::Angry => Shape {
            mouth_width: 0.94,
            mouth_open: 2.0,
            corner_drop: 4.0,
            inner_brow_drop: 15.0,
            eye_open: 0.78,
            ..base
        },
        Expression::Disgusted => Shape {
            mouth_width: 0.98,
            mouth_open: 6.0,
            upper_lip_raise: 9.0,
            inner_brow_drop: 9.0,
            eye_open: 0.75,
            ..base
        },
        Expression::Sad => Shape {
            mouth_width: 0.95,
            mouth_open: 2.0,
            corner_drop: 13.0,
            inner_brow_drop: -11.0,
            eye_open: 0.9,
            ..base
        },
    }
}

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, deg: f64) -> Point {
    let t = deg.to_radians();
    // y grows downward, so positive angles sit above the center
    Point::new(cx + rx * t.cos(), cy - ry * t.sin())
}

fn layout(expr: Expression) -> Vec<Point> {
    let s = shape(expr);
    let mut p = Vec::with_capacity(68);
    // jaw 0..=16, left to right under the chin
    for k in 0..17 {
        let t = PI - PI * k as f64 / 16.0;
        p.push(Point::new(CX + 172.0 * t.cos(), 250.0 + 205.0 * t.sin()));
    }
    // brows 17..=26
    for side in [-1.0, 1.0] {
        for k in 0..5 {
            // outer to inner on the left, inner to outer on the right
            let u = if side < 0.0 { k as f64 / 4.0 } else { 1.0 - k as f64 / 4.0 };
            let x = CX + side * (125.0 - 85.0 * u);
            let arch = 12.0 * (PI * u).sin();
            let y = 188.0 - arch - s.brow_raise + s.inner_brow_drop * u * u;
            p.push(Point::new(x, y));
        }
    }
    // nose bridge 27..=30 and base 31..=35
    for k in 0..4 {
        p.push(Point::new(CX, 238.0 + 26.0 * k as f64));
    }
    for k in 0..5 {
        let dx = -30.0 + 15.0 * k as f64;
        let dy = if k == 2 { 6.0 } else if k == 1 || k == 3 { 3.0 } else { 0.0 };
        p.push(Point::new(CX + dx, 326.0 + dy));
    }
    // eyes 36..=47
    for side in [-1.0, 1.0] {
        let ex = CX + side * 80.0;
        for deg in [180.0, 120.0, 60.0, 0.0, -60.0, -120.0] {
            p.push(ellipse(ex, 230.0, 22.0, 9.0 * s.eye_open, deg));
        }
    }
    // outer lip 48..=59
    let mw = 58.0 * s.mouth_width;
    let open = s.mouth_open;
    for deg in [180.0, 150.0, 120.0, 90.0, 60.0, 30.0, 0.0, -30.0, -60.0, -90.0, -120.0, -150.0] {
        let mut q = ellipse(CX, 384.0, mw, 16.0 + open * 0.6, deg);
        let c = deg.to_radians().cos().abs();
        q.y += s.corner_drop * c.powi(3);
        if (0.0..=180.0).contains(&deg) {
            q.y -= s.upper_lip_raise * (1.0 - c);
            q.y -= open * 0.2;
        } else {
            q.y += open * 0.4;
        }
        p.push(q);
    }
    // inner lip 60..=67
    for deg in [180.0, 135.0, 90.0, 45.0, 0.0, -45.0, -90.0, -135.0] {
        let mut q = ellipse(CX, 384.0, mw * 0.7, 1.0 + open * 0.5, deg);
        let c = deg.to_radians().cos().abs();
        q.y += s.corner_drop * c.powi(3);
        if deg > 0.0 && deg < 180.0 {
            q.y -= s.upper_lip_raise * (1.0 - c) * 0.8;
        }
        p.push(q);
    }
    p
}

/// The symmetric neutral layout scaled to a `width × height` canvas.
pub fn template_landmarks(width: u32, height: u32) -> LandmarkSet {
    scaled(layout(Expression::Neutral), width, height)
}

fn scaled(points: Vec<Point>, width: u32, height: u32) -> LandmarkSet {
    let sx = (width - 1) as f64 / (DESIGN - 1.0);
    let sy = (height - 1) as f64 / (DESIGN - 1.0);
    LandmarkSet::new(
        points.into_iter().map(|p| Point::new(p.x * sx, p.y * sy)).collect(),
        width,
        height,
    )
}

fn subject_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 0x5eed)
}

/// Landmarks of one subject's expression on a `width × height` canvas.
///
/// Subjects differ by a fixed per-point jitter and face proportions.
pub fn subject_landmarks(seed: u64, expr: Expression, width: u32, height: u32) -> LandmarkSet {
    let mut rng = subject_rng(seed);
    let widen = rng.gen_range(0.94..1.06);
    let lengthen = rng.gen_range(0.95..1.05);
    let jitter: Vec<(f64, f64)> = (0..68)
        .map(|_| (rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)))
        .collect();
    let pts = layout(expr)
        .into_iter()
        .zip(jitter)
        .enumerate()
        .map(|(i, (p, (jx, jy)))| {
            // keep eye clusters rigid so eye centers stay put
            let (jx, jy) = if (36..48).contains(&i) { (0.0, 0.0) } else { (jx, jy) };
            Point::new(CX + (p.x - CX) * widen + jx, 230.0 + (p.y - 230.0) * lengthen + jy)
        })
        .collect();
    scaled(pts, width, height)
}

struct Palette {
    background: [f64; 3],
    skin: [f64; 3],
    feature: [f64; 3],
    freq: (f64, f64),
}

fn palette(seed: u64) -> Palette {
    let mut rng = subject_rng(seed ^ PALETTE_SALT);
    Palette {
        background: [rng.gen_range(30.0..90.0), rng.gen_range(60.0..120.0), rng.gen_range(90.0..160.0)],
        skin: [rng.gen_range(170.0..230.0), rng.gen_range(120.0..180.0), rng.gen_range(90.0..150.0)],
        feature: [rng.gen_range(20.0..70.0), rng.gen_range(10.0..50.0), rng.gen_range(10.0..50.0)],
        freq: (rng.gen_range(5.0..9.0), rng.gen_range(6.0..11.0)),
    }
}

// keeps the palette stream independent of the landmark stream
const PALETTE_SALT: u64 = 0xc010_ff5e_7a11_0000;

fn render(lm: &LandmarkSet, seed: u64) -> FaceImage {
    let pal = palette(seed);
    let w = lm.width;
    let h = lm.height;
    let jaw = &lm.points[0..17];
    let cx = (jaw[0].x + jaw[16].x) * 0.5;
    let rx = (jaw[16].x - jaw[0].x) * 0.5;
    let top = lm.points[19].y.min(lm.points[24].y) - 0.35 * rx;
    let bottom = jaw[8].y;
    let cy = (top + bottom) * 0.5;
    let ry = (bottom - top) * 0.5;
    let unit = w as f64 / DESIGN;
    let blob = (5.0 * unit).max(1.5);
    let mut buf = vec![0.0f64; w as usize * h as usize * 3];
    for y in 0..h as usize {
        for x in 0..w as usize {
            let fx = x as f64;
            let fy = y as f64;
            let d = ((fx - cx) / rx).powi(2) + ((fy - cy) / ry).powi(2);
            let tex = (fx / (pal.freq.0 * unit)).sin() * (fy / (pal.freq.1 * unit)).sin();
            let base = if d <= 1.0 {
                let shade = 1.0 - 0.25 * d;
                pal.skin.map(|c| c * shade + 10.0 * tex)
            } else {
                let g = fy / h as f64;
                pal.background.map(|c| c * (0.7 + 0.6 * g) + 6.0 * tex)
            };
            buf[(y * w as usize + x) * 3..][..3].copy_from_slice(&base);
        }
    }
    for p in lm.points.iter().skip(17) {
        let x0 = (p.x - blob).floor().max(0.0) as usize;
        let x1 = (p.x + blob).ceil().min((w - 1) as f64) as usize;
        let y0 = (p.y - blob).floor().max(0.0) as usize;
        let y1 = (p.y + blob).ceil().min((h - 1) as f64) as usize;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dist = p.distance(Point::new(x as f64, y as f64));
                if dist < blob {
                    let a = 0.85 * (1.0 - dist / blob);
                    let px = &mut buf[(y * w as usize + x) * 3..][..3];
                    for (v, f) in px.iter_mut().zip(pal.feature) {
                        *v = *v * (1.0 - a) + f * a;
                    }
                }
            }
        }
    }
    FaceImage::new(w, h, buf.into_iter().map(quantize).collect()).expect("canvas-sized buffer")
}

/// A face already aligned on `frame`: its eye centers sit on the frame anchors.
pub fn synthetic_face(seed: u64, expr: Expression, frame: &CanonicalFrame) -> SyntheticFace {
    let lm = subject_landmarks(seed, expr, frame.width, frame.height);
    let left = centroid(&lm.points[36..42]);
    let right = centroid(&lm.points[42..48]);
    let to_frame = Similarity::from_pairs(left, right, frame.left_eye, frame.right_eye)
        .expect("template eyes are distinct");
    let lm = LandmarkSet::new(
        lm.points.iter().map(|p| to_frame.apply(*p)).collect(),
        frame.width,
        frame.height,
    );
    SyntheticFace {
        image: render(&lm, seed),
        landmarks: lm,
    }
}

fn centroid(points: &[Point]) -> Point {
    let sum = points.iter().fold(Point::default(), |acc, p| acc + *p);
    sum * (1.0 / points.len() as f64)
}

/// An unaligned capture of [`synthetic_face`]: rotated, scaled and shifted
/// onto a larger canvas, as a camera would frame it.
pub fn raw_face(seed: u64, expr: Expression, frame: &CanonicalFrame) -> SyntheticFace {
    let aligned = synthetic_face(seed, expr, frame);
    let mut rng = subject_rng(seed ^ 0x7a3);
    let angle = rng.gen_range(-6.0f64..6.0).to_radians();
    let scale = rng.gen_range(0.9..1.1);
    let shift = Point::new(rng.gen_range(10.0..30.0), rng.gen_range(5.0..20.0));
    let width = frame.width + 40;
    let height = frame.height + 24;
    let c = Point::new(frame.width as f64 * 0.5, frame.height as f64 * 0.5);
    let target = |p: Point| {
        let d = p - c;
        let (s, co) = angle.sin_cos();
        Point::new(
            c.x + shift.x + scale * (co * d.x - s * d.y),
            c.y + shift.y + scale * (s * d.x + co * d.y),
        )
    };
    let transform = Similarity::from_pairs(c, c + Point::new(100.0, 0.0), target(c), target(c + Point::new(100.0, 0.0)))
        .expect("distinct reference points");
    let image = FaceImage::from_fn(width, height, |x, y| {
        let s = transform.apply_inverse(Point::new(x as f64, y as f64));
        aligned
            .image
            .sample_bilinear(s.x, s.y, Border::Constant([40, 40, 40]))
            .map(quantize)
    })
    .expect("non-empty canvas");
    let landmarks = LandmarkSet::new(
        aligned.landmarks.points.iter().map(|p| transform.apply(*p)).collect(),
        width,
        height,
    );
    SyntheticFace { image, landmarks }
}

/// Perceived intensity of each apex for a synthetic subject, in `[0.6, 1.0]`.
pub fn perceived_intensity(seed: u64, expr: Expression) -> f64 {
    if expr == Expression::Neutral {
        return 0.0;
    }
    let mut rng = subject_rng(seed ^ ((expr as u64 + 1) * 0x1234_5678));
    (rng.gen_range(0.6..=1.0f64) * 100.0).round() / 100.0
}

/// Writes a subject directory in the input layout: one image plus landmark
/// sidecar per expression, and an `intensity.json` when `with_intensities`.
pub fn write_subject_dir(
    dir: &Path,
    seed: u64,
    frame: &CanonicalFrame,
    expressions: &[Expression],
    raw: bool,
    with_intensities: bool,
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut intensities = serde_json::Map::new();
    for &expr in expressions {
        let face = if raw {
            raw_face(seed, expr, frame)
        } else {
            synthetic_face(seed, expr, frame)
        };
        let name = format!("{}.png", expr.token());
        face.image.save(&dir.join(&name))?;
        let sidecar = dir.join(format!("{}.landmarks.json", expr.token()));
        std::fs::write(&sidecar, landmarks_to_json(&face.landmarks, &name))
            .map_err(|e| Error::io(&sidecar, e))?;
        if expr.is_apex() {
            intensities.insert(expr.token().into(), perceived_intensity(seed, expr).into());
        }
    }
    if with_intensities {
        let path = dir.join("intensity.json");
        let text = serde_json::to_string_pretty(&intensities).expect("map serializes");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
