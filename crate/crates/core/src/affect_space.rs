//! Circumplex affect geometry.
//!
//! Expressions live on a polar plane: the angle encodes the kind of
//! expression and the radius its intensity, with Neutral at the origin.
//! Valence and arousal are the Cartesian projections of that polar point.
//! Angles are kept in degrees everywhere and only converted to radians
//! inside trigonometric evaluation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when deciding whether a grid span is an exact multiple of its step.
pub const LATTICE_TOLERANCE: f64 = 1e-6;

/// Angles closer than this are treated as the same circumplex direction.
pub const ANGLE_EPSILON: f64 = 1e-9;

/// The seven categorical expressions found in typical expression datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expression {
    Neutral,
    Happy,
    Surprised,
    Afraid,
    Angry,
    Disgusted,
    Sad,
}

impl Expression {
    pub const ALL: [Expression; 7] = [
        Expression::Neutral,
        Expression::Happy,
        Expression::Surprised,
        Expression::Afraid,
        Expression::Angry,
        Expression::Disgusted,
        Expression::Sad,
    ];

    /// Apex expressions in ascending circumplex order.
    pub const APEXES: [Expression; 6] = [
        Expression::Happy,
        Expression::Surprised,
        Expression::Afraid,
        Expression::Angry,
        Expression::Disgusted,
        Expression::Sad,
    ];

    /// Lower-case filename token, e.g. `"happy"`.
    pub fn token(self) -> &'static str {
        match self {
            Expression::Neutral => "neutral",
            Expression::Happy => "happy",
            Expression::Surprised => "surprised",
            Expression::Afraid => "afraid",
            Expression::Angry => "angry",
            Expression::Disgusted => "disgusted",
            Expression::Sad => "sad",
        }
    }

    pub fn is_apex(self) -> bool {
        self != Expression::Neutral
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Expression {
    type Err = Error;

    /// Case-insensitive token lookup.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Expression::ALL
            .into_iter()
            .find(|e| e.token() == lower)
            .ok_or_else(|| Error::parse("expression", format!("unknown expression token `{s}`")))
    }
}

/// Label attached to a given or synthesized face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpressionLabel {
    Categorical(Expression),
    /// A synthesized apex between two categorical apexes, carrying its angle in `[0, 360)`.
    Interpolated(f64),
}

impl ExpressionLabel {
    pub fn interpolated(angle_deg: f64) -> Result<Self> {
        if !(0.0..360.0).contains(&angle_deg) {
            return Err(Error::Domain(format!(
                "interpolated angle {angle_deg} outside [0, 360)"
            )));
        }
        Ok(ExpressionLabel::Interpolated(angle_deg))
    }

    pub fn is_neutral(&self) -> bool {
        matches!(self, ExpressionLabel::Categorical(Expression::Neutral))
    }
}

impl fmt::Display for ExpressionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpressionLabel::Categorical(e) => f.write_str(e.token()),
            ExpressionLabel::Interpolated(_) => f.write_str("interpolated"),
        }
    }
}

/// Circumplex angle of each apex expression, in degrees.
///
/// Neutral has no entry: its intensity is zero so its angle is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionAngleTable {
    // sorted by angle, which is also canonical apex order
    entries: Vec<(Expression, f64)>,
}

impl Default for ExpressionAngleTable {
    fn default() -> Self {
        ExpressionAngleTable {
            entries: vec![
                (Expression::Happy, 10.0),
                (Expression::Surprised, 70.0),
                (Expression::Afraid, 100.0),
                (Expression::Angry, 130.0),
                (Expression::Disgusted, 160.0),
                (Expression::Sad, 205.0),
            ],
        }
    }
}

impl ExpressionAngleTable {
    /// Builds a table from explicit entries. Every entry must be an apex with an
    /// angle in `[0, 360)`, and angles must strictly increase in canonical order.
    pub fn new(entries: impl IntoIterator<Item = (Expression, f64)>) -> Result<Self> {
        let mut entries: Vec<(Expression, f64)> = entries.into_iter().collect();
        entries.sort_by_key(|(e, _)| *e);
        for (i, (expr, angle)) in entries.iter().enumerate() {
            if !expr.is_apex() {
                return Err(Error::config("angles.neutral", "neutral has no circumplex angle"));
            }
            if !angle.is_finite() || !(0.0..360.0).contains(angle) {
                return Err(Error::config(
                    format!("angles.{expr}"),
                    format!("angle {angle} outside [0, 360)"),
                ));
            }
            if i > 0 && entries[i - 1].0 == *expr {
                return Err(Error::config(format!("angles.{expr}"), "duplicate entry"));
            }
            if i > 0 && entries[i - 1].1 >= *angle {
                return Err(Error::config(
                    format!("angles.{expr}"),
                    format!(
                        "angle {angle} must exceed {} ({})",
                        entries[i - 1].1,
                        entries[i - 1].0
                    ),
                ));
            }
        }
        Ok(ExpressionAngleTable { entries })
    }

    /// Default table with some angles replaced.
    pub fn with_overrides(overrides: impl IntoIterator<Item = (Expression, f64)>) -> Result<Self> {
        let mut entries = ExpressionAngleTable::default().entries;
        for (expr, angle) in overrides {
            match entries.iter_mut().find(|(e, _)| *e == expr) {
                Some(slot) => slot.1 = angle,
                None => entries.push((expr, angle)),
            }
        }
        ExpressionAngleTable::new(entries)
    }

    pub fn angle(&self, expr: Expression) -> Option<f64> {
        self.entries
            .iter()
            .find(|(e, _)| *e == expr)
            .map(|(_, a)| *a)
    }

    pub fn entries(&self) -> &[(Expression, f64)] {
        &self.entries
    }

    /// The span `[first, last]` of apex angles.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.entries.first()?.1, self.entries.last()?.1))
    }
}

/// A point in the circumplex, held in both polar and Cartesian form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffectPoint {
    angle_deg: f64,
    intensity: f64,
    valence: f64,
    arousal: f64,
}

impl AffectPoint {
    pub fn from_polar(intensity: f64, angle_deg: f64) -> Result<Self> {
        let (valence, arousal) = va_from_polar(intensity, angle_deg)?;
        Ok(AffectPoint {
            angle_deg,
            intensity,
            valence,
            arousal,
        })
    }

    pub fn neutral() -> Self {
        AffectPoint {
            angle_deg: 0.0,
            intensity: 0.0,
            valence: 0.0,
            arousal: 0.0,
        }
    }

    pub fn angle_deg(&self) -> f64 {
        self.angle_deg
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn valence(&self) -> f64 {
        self.valence
    }

    pub fn arousal(&self) -> f64 {
        self.arousal
    }

    pub fn is_neutral(&self) -> bool {
        self.intensity == 0.0
    }
}

/// Projects a polar affect point onto the valence/arousal axes.
pub fn va_from_polar(intensity: f64, angle_deg: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&intensity) {
        return Err(Error::Domain(format!("intensity {intensity} outside [0, 1]")));
    }
    if !angle_deg.is_finite() {
        return Err(Error::Domain(format!("angle {angle_deg} is not finite")));
    }
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    Ok((intensity * cos, intensity * sin))
}

/// Inverse of [`va_from_polar`]. The angle is reported in `[0, 360)` and is 0 at the origin.
pub fn polar_from_va(valence: f64, arousal: f64) -> Result<(f64, f64)> {
    if !valence.is_finite() || !arousal.is_finite() {
        return Err(Error::Domain("valence/arousal must be finite".into()));
    }
    let radius = valence.hypot(arousal);
    if radius > 1.0 + 1e-9 {
        return Err(Error::Domain(format!(
            "valence/arousal radius {radius} exceeds the unit disc"
        )));
    }
    if radius == 0.0 {
        return Ok((0.0, 0.0));
    }
    let mut angle = arousal.atan2(valence).to_degrees().rem_euclid(360.0);
    if angle >= 360.0 {
        angle = 0.0;
    }
    Ok((radius.min(1.0), angle))
}

/// One synthesis target on the template: a circumplex direction plus a radial morph ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridNode {
    pub angle_deg: f64,
    pub ratio: f64,
}

/// Lattice of synthesis targets over the circumplex.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateGrid {
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub angle_step_deg: f64,
    pub radial_step: f64,
    /// Nodes ordered by angle, then ratio.
    pub nodes: Vec<GridNode>,
    pub includes_neutral: bool,
}

impl Default for TemplateGrid {
    fn default() -> Self {
        build_template(10.0, 205.0, 15.0, 0.1).expect("default grid is well formed")
    }
}

impl TemplateGrid {
    pub fn angles(&self) -> Vec<f64> {
        let count = self.angle_count();
        (0..count)
            .map(|k| self.angle_min_deg + k as f64 * self.angle_step_deg)
            .collect()
    }

    pub fn ratios(&self) -> Vec<f64> {
        let count = self.ratio_count();
        (1..=count).map(|k| k as f64 / count as f64).collect()
    }

    pub fn angle_count(&self) -> usize {
        lattice_steps(self.angle_max_deg - self.angle_min_deg, self.angle_step_deg)
            .map(|n| n + 1)
            .unwrap_or(0)
    }

    pub fn ratio_count(&self) -> usize {
        lattice_steps(1.0, self.radial_step).unwrap_or(0)
    }

    /// Non-neutral nodes plus the single neutral point.
    pub fn total_points(&self) -> usize {
        self.nodes.len() + usize::from(self.includes_neutral)
    }

    /// Whether `(angle, ratio)` lies on the lattice within `tol`.
    pub fn contains(&self, angle_deg: f64, ratio: f64, tol: f64) -> bool {
        let on_angle = self.angles().iter().any(|a| (a - angle_deg).abs() <= tol);
        let on_ratio = self.ratios().iter().any(|r| (r - ratio).abs() <= tol);
        on_angle && on_ratio
    }
}

fn lattice_steps(span: f64, step: f64) -> Option<usize> {
    let steps = span / step;
    let rounded = steps.round();
    ((steps - rounded).abs() <= LATTICE_TOLERANCE && rounded >= 0.0).then_some(rounded as usize)
}

/// Builds the angle × radial-ratio template. Spans must be exact multiples of their steps.
pub fn build_template(
    angle_min_deg: f64,
    angle_max_deg: f64,
    angle_step_deg: f64,
    radial_step: f64,
) -> Result<TemplateGrid> {
    for (name, v) in [
        ("angle_min_deg", angle_min_deg),
        ("angle_max_deg", angle_max_deg),
        ("angle_step_deg", angle_step_deg),
        ("radial_step", radial_step),
    ] {
        if !v.is_finite() {
            return Err(Error::config(name, format!("{v} is not finite")));
        }
    }
    if angle_step_deg <= 0.0 {
        return Err(Error::config("angle_step_deg", "step must be positive"));
    }
    if angle_max_deg < angle_min_deg {
        return Err(Error::config(
            "angle_max_deg",
            format!("{angle_max_deg} is below angle_min_deg {angle_min_deg}"),
        ));
    }
    if !(radial_step > 0.0 && radial_step <= 1.0) {
        return Err(Error::config("radial_step", format!("{radial_step} outside (0, 1]")));
    }
    let angle_steps = lattice_steps(angle_max_deg - angle_min_deg, angle_step_deg).ok_or_else(|| {
        Error::config(
            "angle_step_deg",
            format!(
                "span {} is not an integer multiple of {angle_step_deg}",
                angle_max_deg - angle_min_deg
            ),
        )
    })?;
    let ratio_count = lattice_steps(1.0, radial_step)
        .filter(|n| *n > 0)
        .ok_or_else(|| {
            Error::config(
                "radial_step",
                format!("1.0 is not an integer multiple of {radial_step}"),
            )
        })?;

    let mut nodes = Vec::with_capacity((angle_steps + 1) * ratio_count);
    for k in 0..=angle_steps {
        let angle_deg = angle_min_deg + k as f64 * angle_step_deg;
        for j in 1..=ratio_count {
            nodes.push(GridNode {
                angle_deg,
                ratio: j as f64 / ratio_count as f64,
            });
        }
    }
    Ok(TemplateGrid {
        angle_min_deg,
        angle_max_deg,
        angle_step_deg,
        radial_step,
        nodes,
        includes_neutral: true,
    })
}

/// Output images per given image, optionally doubled by mirroring.
pub fn augmentation_factor(
    grid: &TemplateGrid,
    given_images_per_subject: usize,
    mirrored: bool,
) -> Result<f64> {
    if given_images_per_subject == 0 {
        return Err(Error::Domain("given_images_per_subject must be at least 1".into()));
    }
    let total = grid.total_points() * if mirrored { 2 } else { 1 };
    Ok(total as f64 / given_images_per_subject as f64)
}
