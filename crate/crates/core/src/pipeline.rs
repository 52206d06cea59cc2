//! Per-subject synthesis: apex-to-apex interpolation for new expression
//! variations, neutral-to-apex morphs for intensity variations, and the
//! planner that maps a template grid onto those two morph types.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;

use crate::affect_space::{
    AffectPoint, Expression, ExpressionAngleTable, ExpressionLabel, GridNode, TemplateGrid,
    ANGLE_EPSILON,
};
use crate::error::{Error, Result};
use crate::face_image::FaceImage;
use crate::landmarks::{mirror, CanonicalFrame, LandmarkScheme, LandmarkSet};
use crate::morph::morph;

/// Morph ratios within this distance of 1 count as the apex itself.
const RATIO_EPSILON: f64 = 1e-9;

/// How the template's radial lattice is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityMode {
    /// Radial steps are neutral-to-apex morph ratios; intensity = ratio × apex intensity.
    #[default]
    Ratio,
    /// Radial steps are absolute intensities; unreachable targets are a planning error.
    Absolute,
}

/// Where the apex of a radial morph comes from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApexRecipe {
    Given(Expression),
    Interpolated {
        lower: Expression,
        upper: Expression,
        r_apex: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Recipe {
    /// The subject's neutral image, copied through.
    Neutral,
    /// A given apex image at full ratio, copied through.
    Original(Expression),
    Radial { apex: ApexRecipe, r_radial: f64 },
}

/// One output of a subject's plan.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisJob {
    pub subject_id: String,
    /// Target grid position; neutral uses angle 0 and ratio 0.
    pub target: GridNode,
    pub recipe: Recipe,
    pub mirrored: bool,
}

impl SynthesisJob {
    pub fn is_pass_through(&self) -> bool {
        matches!(self.recipe, Recipe::Neutral | Recipe::Original(_))
    }

    fn unmirrored(&self) -> SynthesisJob {
        SynthesisJob {
            mirrored: false,
            ..self.clone()
        }
    }
}

impl fmt::Display for SynthesisJob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.recipe {
            Recipe::Neutral => write!(f, "neutral")?,
            Recipe::Original(e) => write!(f, "original {e}")?,
            Recipe::Radial { apex: ApexRecipe::Given(e), r_radial } => {
                write!(f, "neutral->{e} r={r_radial}")?
            }
            Recipe::Radial {
                apex: ApexRecipe::Interpolated { lower, upper, r_apex },
                r_radial,
            } => write!(f, "neutral->({lower}->{upper} r={r_apex}) r={r_radial}")?,
        }
        write!(
            f,
            " @ ({}, {}){}",
            self.target.angle_deg,
            self.target.ratio,
            if self.mirrored { " mirrored" } else { "" }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Original,
    /// Produced by a direct morph call outside a plan.
    Morph {
        source: ExpressionLabel,
        target: ExpressionLabel,
        ratio: f64,
    },
    Job(SynthesisJob),
}

/// An aligned face with its affect annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedFace {
    pub subject_id: String,
    pub image: FaceImage,
    pub landmarks: LandmarkSet,
    pub affect: AffectPoint,
    pub label: ExpressionLabel,
    pub provenance: Provenance,
    /// True when the intensity derives from a defaulted perceived intensity.
    pub assumed_intensity: bool,
}

/// A given apex expression with its perceived intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct ApexInput {
    pub expression: Expression,
    pub face: AnnotatedFace,
}

/// Annotation-only view of a subject, enough to plan without pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectProfile {
    pub subject_id: String,
    /// (expression, perceived intensity, intensity was assumed)
    pub apexes: Vec<(Expression, f64, bool)>,
}

impl SubjectProfile {
    fn apex(&self, e: Expression) -> Option<(f64, bool)> {
        self.apexes
            .iter()
            .find(|(x, _, _)| *x == e)
            .map(|(_, i, a)| (*i, *a))
    }

    /// Number of given images (neutral plus apexes).
    pub fn given_images(&self) -> usize {
        1 + self.apexes.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectInput {
    pub subject_id: String,
    pub neutral: AnnotatedFace,
    /// Sorted by ascending angle.
    pub apexes: Vec<ApexInput>,
}

/// Aligned image and landmarks of one given expression, plus its perceived
/// intensity (`None` defaults to 1.0 and is flagged as assumed).
pub struct GivenFace {
    pub expression: Expression,
    pub image: FaceImage,
    pub landmarks: LandmarkSet,
    pub intensity: Option<f64>,
}

impl SubjectInput {
    pub fn new(
        subject_id: impl Into<String>,
        faces: Vec<GivenFace>,
        table: &ExpressionAngleTable,
    ) -> Result<Self> {
        let subject_id = subject_id.into();
        let mut neutral = None;
        let mut apexes: Vec<(f64, ApexInput)> = Vec::new();
        for face in faces {
            if face.expression == Expression::Neutral {
                if neutral.is_some() {
                    return Err(Error::Planning(format!("subject `{subject_id}` has two neutral faces")));
                }
                neutral = Some(AnnotatedFace {
                    subject_id: subject_id.clone(),
                    image: face.image,
                    landmarks: face.landmarks,
                    affect: AffectPoint::neutral(),
                    label: ExpressionLabel::Categorical(Expression::Neutral),
                    provenance: Provenance::Original,
                    assumed_intensity: false,
                });
                continue;
            }
            if apexes.iter().any(|(_, a)| a.expression == face.expression) {
                return Err(Error::Planning(format!(
                    "subject `{subject_id}` lists {} twice",
                    face.expression
                )));
            }
            let angle = table.angle(face.expression).ok_or_else(|| {
                Error::Planning(format!("no circumplex angle for {}", face.expression))
            })?;
            let intensity = face.intensity.unwrap_or(1.0);
            if !(intensity > 0.0 && intensity <= 1.0) {
                return Err(Error::Domain(format!(
                    "perceived intensity {intensity} of {} outside (0, 1]",
                    face.expression
                )));
            }
            apexes.push((
                angle,
                ApexInput {
                    expression: face.expression,
                    face: AnnotatedFace {
                        subject_id: subject_id.clone(),
                        image: face.image,
                        landmarks: face.landmarks,
                        affect: AffectPoint::from_polar(intensity, angle)?,
                        label: ExpressionLabel::Categorical(face.expression),
                        provenance: Provenance::Original,
                        assumed_intensity: face.intensity.is_none(),
                    },
                },
            ));
        }
        let neutral = neutral
            .ok_or_else(|| Error::Planning(format!("subject `{subject_id}` has no neutral face")))?;
        apexes.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(SubjectInput {
            subject_id,
            neutral,
            apexes: apexes.into_iter().map(|(_, a)| a).collect(),
        })
    }

    pub fn profile(&self) -> SubjectProfile {
        SubjectProfile {
            subject_id: self.subject_id.clone(),
            apexes: self
                .apexes
                .iter()
                .map(|a| (a.expression, a.face.affect.intensity(), a.face.assumed_intensity))
                .collect(),
        }
    }

    fn apex(&self, e: Expression) -> Option<&AnnotatedFace> {
        self.apexes.iter().find(|a| a.expression == e).map(|a| &a.face)
    }
}

fn check_same_subject(a: &AnnotatedFace, b: &AnnotatedFace) -> Result<()> {
    if a.subject_id != b.subject_id {
        return Err(Error::Mismatch(format!(
            "cannot morph across subjects `{}` and `{}`",
            a.subject_id, b.subject_id
        )));
    }
    Ok(())
}

/// Morphs between two apexes, interpolating intensity and angle linearly.
pub fn apex_to_apex(a1: &AnnotatedFace, a2: &AnnotatedFace, r: f64, fill: [u8; 3]) -> Result<AnnotatedFace> {
    Ok(apex_to_apex_counted(a1, a2, r, fill)?.0)
}

fn apex_to_apex_counted(
    a1: &AnnotatedFace,
    a2: &AnnotatedFace,
    r: f64,
    fill: [u8; 3],
) -> Result<(AnnotatedFace, usize)> {
    check_same_subject(a1, a2)?;
    let (t1, t2) = (a1.affect.angle_deg(), a2.affect.angle_deg());
    if a1.affect.is_neutral() || a2.affect.is_neutral() || t1 >= t2 {
        return Err(Error::Planning(format!(
            "apex-to-apex needs two apexes with increasing angles, got {t1} and {t2}"
        )));
    }
    let m = morph(&a1.image, &a1.landmarks, &a2.image, &a2.landmarks, r, fill)?;
    let intensity = (1.0 - r) * a1.affect.intensity() + r * a2.affect.intensity();
    let angle = (1.0 - r) * t1 + r * t2;
    let label = if r == 0.0 {
        a1.label
    } else if r == 1.0 {
        a2.label
    } else {
        ExpressionLabel::interpolated(angle)?
    };
    Ok((
        AnnotatedFace {
            subject_id: a1.subject_id.clone(),
            image: m.image,
            landmarks: m.landmarks,
            affect: AffectPoint::from_polar(intensity, angle)?,
            label,
            provenance: Provenance::Morph {
                source: a1.label,
                target: a2.label,
                ratio: r,
            },
            assumed_intensity: a1.assumed_intensity || a2.assumed_intensity,
        },
        m.degenerate_triangles,
    ))
}

/// Morphs from neutral toward an (original or interpolated) apex, scaling
/// intensity by the ratio and keeping the apex angle.
pub fn neutral_to_apex(neutral: &AnnotatedFace, apex: &AnnotatedFace, r: f64, fill: [u8; 3]) -> Result<AnnotatedFace> {
    Ok(neutral_to_apex_counted(neutral, apex, r, fill)?.0)
}

fn neutral_to_apex_counted(
    neutral: &AnnotatedFace,
    apex: &AnnotatedFace,
    r: f64,
    fill: [u8; 3],
) -> Result<(AnnotatedFace, usize)> {
    check_same_subject(neutral, apex)?;
    if !neutral.label.is_neutral() || apex.affect.is_neutral() {
        return Err(Error::Planning("neutral-to-apex needs a neutral and an apex face".into()));
    }
    let m = morph(&neutral.image, &neutral.landmarks, &apex.image, &apex.landmarks, r, fill)?;
    let intensity = r * apex.affect.intensity();
    let (affect, label) = if intensity == 0.0 {
        (AffectPoint::neutral(), neutral.label)
    } else {
        (AffectPoint::from_polar(intensity, apex.affect.angle_deg())?, apex.label)
    };
    Ok((
        AnnotatedFace {
            subject_id: neutral.subject_id.clone(),
            image: m.image,
            landmarks: m.landmarks,
            affect,
            label,
            provenance: Provenance::Morph {
                source: neutral.label,
                target: apex.label,
                ratio: r,
            },
            assumed_intensity: intensity != 0.0 && apex.assumed_intensity,
        },
        m.degenerate_triangles,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanOptions {
    pub mirrored: bool,
    pub mode: IntensityMode,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            mirrored: false,
            mode: IntensityMode::Ratio,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectPlan {
    /// Sorted by (angle, ratio, mirrored).
    pub jobs: Vec<SynthesisJob>,
    /// Grid nodes left out because the subject lacks a needed apex.
    pub skipped: Vec<GridNode>,
}

impl SubjectPlan {
    pub fn pass_through_count(&self) -> usize {
        self.jobs.iter().filter(|j| j.is_pass_through()).count()
    }

    pub fn synthesized_count(&self) -> usize {
        self.jobs.len() - self.pass_through_count()
    }
}

/// Where an angle sits relative to the angle table.
enum Bracket {
    At(Expression),
    Between(Expression, Expression, f64),
}

fn bracket(angle: f64, table: &ExpressionAngleTable) -> Option<Bracket> {
    let entries = table.entries();
    if let Some((e, _)) = entries.iter().find(|(_, a)| (a - angle).abs() <= ANGLE_EPSILON) {
        return Some(Bracket::At(*e));
    }
    entries.windows(2).find_map(|w| {
        let ((e1, t1), (e2, t2)) = (w[0], w[1]);
        (t1 < angle && angle < t2).then(|| Bracket::Between(e1, e2, (angle - t1) / (t2 - t1)))
    })
}

/// Expands a template grid into synthesis jobs for one subject.
pub fn plan_subject(
    profile: &SubjectProfile,
    grid: &TemplateGrid,
    table: &ExpressionAngleTable,
    options: PlanOptions,
) -> Result<SubjectPlan> {
    let mut base = vec![SynthesisJob {
        subject_id: profile.subject_id.clone(),
        target: GridNode {
            angle_deg: 0.0,
            ratio: 0.0,
        },
        recipe: Recipe::Neutral,
        mirrored: false,
    }];
    let mut skipped = Vec::new();
    let ratios = grid.ratios();
    for angle in grid.angles() {
        let b = bracket(angle, table).ok_or_else(|| {
            Error::Planning(format!(
                "grid angle {angle} lies outside the apex span {:?}; extrapolation is not supported",
                table.span()
            ))
        })?;
        let apex = match b {
            Bracket::At(e) => profile.apex(e).map(|(i, _)| (ApexRecipe::Given(e), i)),
            Bracket::Between(lower, upper, r_apex) => match (profile.apex(lower), profile.apex(upper)) {
                (Some((i1, _)), Some((i2, _))) => Some((
                    ApexRecipe::Interpolated { lower, upper, r_apex },
                    (1.0 - r_apex) * i1 + r_apex * i2,
                )),
                _ => None,
            },
        };
        let Some((apex, apex_intensity)) = apex else {
            skipped.extend(ratios.iter().map(|&ratio| GridNode { angle_deg: angle, ratio }));
            continue;
        };
        for &ratio in &ratios {
            let r_radial = match options.mode {
                IntensityMode::Ratio => ratio,
                IntensityMode::Absolute => {
                    let r = ratio / apex_intensity;
                    if r > 1.0 + RATIO_EPSILON {
                        return Err(Error::Planning(format!(
                            "intensity {ratio} unreachable at {angle} deg for subject `{}`: apex intensity is {apex_intensity}",
                            profile.subject_id
                        )));
                    }
                    r.min(1.0)
                }
            };
            let recipe = match apex {
                ApexRecipe::Given(e) if (r_radial - 1.0).abs() <= RATIO_EPSILON => Recipe::Original(e),
                _ => Recipe::Radial { apex, r_radial },
            };
            base.push(SynthesisJob {
                subject_id: profile.subject_id.clone(),
                target: GridNode { angle_deg: angle, ratio },
                recipe,
                mirrored: false,
            });
        }
    }
    let mut jobs = Vec::with_capacity(base.len() * 2);
    for job in base {
        if options.mirrored {
            let m = SynthesisJob {
                mirrored: true,
                ..job.clone()
            };
            jobs.push(job);
            jobs.push(m);
        } else {
            jobs.push(job);
        }
    }
    Ok(SubjectPlan { jobs, skipped })
}

/// Settings shared by every job of a run.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub fill: [u8; 3],
    pub scheme: LandmarkScheme,
    /// Materialize each interpolated apex once per subject.
    pub cache_apexes: bool,
}

impl RunContext {
    pub fn new(frame: &CanonicalFrame, scheme: LandmarkScheme) -> Self {
        RunContext {
            fill: frame.fill,
            scheme,
            cache_apexes: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubjectRun {
    /// Sorted by (angle, ratio, mirrored); each carries `Provenance::Job`.
    pub faces: Vec<AnnotatedFace>,
    pub degenerate_triangles: usize,
}

fn angle_key(angle: f64) -> u64 {
    angle.to_bits()
}

/// Executes a subject's plan.
pub fn run_subject(input: &SubjectInput, plan: &SubjectPlan, ctx: &RunContext) -> Result<SubjectRun> {
    let fail = |job: &SynthesisJob, e: Error| Error::Job {
        subject: input.subject_id.clone(),
        job: job.to_string(),
        source: Box::new(e),
    };

    let mut interpolated: Vec<(u64, &SynthesisJob, Expression, Expression, f64)> = Vec::new();
    if ctx.cache_apexes {
        for job in &plan.jobs {
            if let Recipe::Radial {
                apex: ApexRecipe::Interpolated { lower, upper, r_apex },
                ..
            } = job.recipe
            {
                let key = angle_key(job.target.angle_deg);
                if !interpolated.iter().any(|(k, ..)| *k == key) {
                    interpolated.push((key, job, lower, upper, r_apex));
                }
            }
        }
    }
    let cache: HashMap<u64, (AnnotatedFace, usize)> = interpolated
        .par_iter()
        .map(|&(key, job, lower, upper, r_apex)| {
            materialize_interpolated(input, lower, upper, r_apex, ctx.fill)
                .map(|v| (key, v))
                .map_err(|e| fail(job, e))
        })
        .collect::<Result<_>>()?;
    let apex_degenerate: usize = cache.values().map(|(_, d)| d).sum();

    let mut bases: Vec<SynthesisJob> = plan.jobs.iter().map(SynthesisJob::unmirrored).collect();
    bases.dedup();
    let outputs: Vec<(AnnotatedFace, usize)> = bases
        .par_iter()
        .map(|job| run_job(input, job, &cache, ctx).map_err(|e| fail(job, e)))
        .collect::<Result<_>>()?;
    let degenerate = apex_degenerate + outputs.iter().map(|(_, d)| d).sum::<usize>();

    let mut faces = Vec::with_capacity(plan.jobs.len());
    for job in &plan.jobs {
        let base = bases
            .iter()
            .position(|b| b.target == job.target && b.recipe == job.recipe)
            .expect("every job has an unmirrored base");
        let mut face = outputs[base].0.clone();
        if job.mirrored {
            let (image, landmarks) = mirror(&face.image, &face.landmarks, &ctx.scheme).map_err(|e| fail(job, e))?;
            face.image = image;
            face.landmarks = landmarks;
        }
        face.provenance = Provenance::Job(job.clone());
        faces.push(face);
    }
    faces.sort_by(|a, b| job_order(a).partial_cmp(&job_order(b)).expect("finite grid coordinates"));
    Ok(SubjectRun {
        faces,
        degenerate_triangles: degenerate,
    })
}

fn job_order(face: &AnnotatedFace) -> (f64, f64, bool) {
    match &face.provenance {
        Provenance::Job(j) => (j.target.angle_deg, j.target.ratio, j.mirrored),
        _ => (f64::INFINITY, f64::INFINITY, true),
    }
}

fn materialize_interpolated(
    input: &SubjectInput,
    lower: Expression,
    upper: Expression,
    r_apex: f64,
    fill: [u8; 3],
) -> Result<(AnnotatedFace, usize)> {
    let a1 = input
        .apex(lower)
        .ok_or_else(|| Error::Planning(format!("subject has no {lower} apex")))?;
    let a2 = input
        .apex(upper)
        .ok_or_else(|| Error::Planning(format!("subject has no {upper} apex")))?;
    apex_to_apex_counted(a1, a2, r_apex, fill)
}

fn run_job(
    input: &SubjectInput,
    job: &SynthesisJob,
    cache: &HashMap<u64, (AnnotatedFace, usize)>,
    ctx: &RunContext,
) -> Result<(AnnotatedFace, usize)> {
    match job.recipe {
        Recipe::Neutral => Ok((input.neutral.clone(), 0)),
        Recipe::Original(e) => input
            .apex(e)
            .cloned()
            .map(|f| (f, 0))
            .ok_or_else(|| Error::Planning(format!("subject has no {e} apex"))),
        Recipe::Radial { apex, r_radial } => {
            let (apex_face, extra) = match apex {
                ApexRecipe::Given(e) => (
                    input
                        .apex(e)
                        .cloned()
                        .ok_or_else(|| Error::Planning(format!("subject has no {e} apex")))?,
                    0,
                ),
                ApexRecipe::Interpolated { lower, upper, r_apex } => {
                    match cache.get(&angle_key(job.target.angle_deg)) {
                        Some((face, _)) => (face.clone(), 0),
                        None => materialize_interpolated(input, lower, upper, r_apex, ctx.fill)?,
                    }
                }
            };
            let (face, d) = neutral_to_apex_counted(&input.neutral, &apex_face, r_radial, ctx.fill)?;
            Ok((face, d + extra))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affect_space::build_template;
    use crate::fixtures;
    use crate::geometry::Point;

    fn small_frame() -> CanonicalFrame {
        CanonicalFrame {
            width: 96,
            height: 96,
            left_eye: Point::new(33.0, 43.0),
            right_eye: Point::new(63.0, 43.0),
            fill: [128, 128, 128],
        }
    }

    fn subject(seed: u64, exprs: &[Expression], frame: &CanonicalFrame) -> SubjectInput {
        let table = ExpressionAngleTable::default();
        let faces = exprs
            .iter()
            .map(|&e| {
                let f = fixtures::synthetic_face(seed, e, frame);
                GivenFace {
                    expression: e,
                    image: f.image,
                    landmarks: f.landmarks,
                    intensity: e.is_apex().then(|| fixtures::perceived_intensity(seed, e)),
                }
            })
            .collect();
        SubjectInput::new(format!("s{seed}"), faces, &table).unwrap()
    }

    fn face(subject: &str, intensity: f64, angle: f64) -> AnnotatedFace {
        let frame = small_frame();
        let f = fixtures::synthetic_face(1, Expression::Happy, &frame);
        AnnotatedFace {
            subject_id: subject.into(),
            image: f.image,
            landmarks: f.landmarks,
            affect: AffectPoint::from_polar(intensity, angle).unwrap(),
            label: ExpressionLabel::Categorical(Expression::Disgusted),
            provenance: Provenance::Original,
            assumed_intensity: false,
        }
    }

    #[test]
    fn apex_to_apex_annotations() {
        let a1 = face("x", 0.8, 160.0);
        let a2 = face("x", 0.6, 205.0);
        let mid = apex_to_apex(&a1, &a2, 0.5, [0; 3]).unwrap();
        assert!((mid.affect.intensity() - 0.7).abs() < 1e-12);
        assert!((mid.affect.angle_deg() - 182.5).abs() < 1e-12);
        assert!(matches!(mid.label, ExpressionLabel::Interpolated(a) if (a - 182.5).abs() < 1e-12));
        let start = apex_to_apex(&a1, &a2, 0.0, [0; 3]).unwrap();
        assert_eq!(start.affect, a1.affect);
        assert!(apex_to_apex(&a1, &face("y", 0.6, 205.0), 0.5, [0; 3]).is_err());
        assert!(apex_to_apex(&a2, &a1, 0.5, [0; 3]).is_err());
    }

    #[test]
    fn apex_to_apex_angles_are_monotone() {
        let frame = small_frame();
        let s = subject(4, &Expression::ALL, &frame);
        let sad = s.apex(Expression::Disgusted).unwrap();
        let dis = s.apex(Expression::Sad).unwrap();
        let angles: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0]
            .iter()
            .map(|&r| apex_to_apex(sad, dis, r, frame.fill).unwrap().affect.angle_deg())
            .collect();
        assert!(angles.windows(2).all(|w| w[0] < w[1]), "{angles:?}");
        assert_eq!(angles[0], 160.0);
        assert_eq!(angles[4], 205.0);
    }

    #[test]
    fn neutral_to_apex_annotations() {
        let mut n = face("x", 0.0, 0.0);
        n.label = ExpressionLabel::Categorical(Expression::Neutral);
        n.affect = AffectPoint::neutral();
        let apex = face("x", 0.9, 130.0);
        let m = neutral_to_apex(&n, &apex, 0.4, [0; 3]).unwrap();
        assert!((m.affect.intensity() - 0.36).abs() < 1e-12);
        assert_eq!(m.affect.angle_deg(), 130.0);
        let zero = neutral_to_apex(&n, &apex, 0.0, [0; 3]).unwrap();
        assert_eq!(zero.affect.intensity(), 0.0);
        assert!(zero.label.is_neutral());
        let full = neutral_to_apex(&n, &apex, 1.0, [0; 3]).unwrap();
        assert_eq!(full.affect, apex.affect);
        assert!(neutral_to_apex(&n, &face("y", 0.9, 130.0), 0.5, [0; 3]).is_err());
    }

    fn full_profile() -> SubjectProfile {
        SubjectProfile {
            subject_id: "s".into(),
            apexes: Expression::APEXES.iter().map(|&e| (e, 0.8, false)).collect(),
        }
    }

    #[test]
    fn default_plan_counts() {
        let table = ExpressionAngleTable::default();
        let grid = TemplateGrid::default();
        let plan = plan_subject(&full_profile(), &grid, &table, PlanOptions::default()).unwrap();
        assert_eq!(plan.jobs.len(), 141);
        assert_eq!(plan.pass_through_count(), 7);
        assert_eq!(plan.synthesized_count(), 134);
        let mirrored = plan_subject(
            &full_profile(),
            &grid,
            &table,
            PlanOptions {
                mirrored: true,
                ..PlanOptions::default()
            },
        )
        .unwrap();
        assert_eq!(mirrored.jobs.len(), 282);
        let fine = build_template(10.0, 205.0, 7.5, 0.05).unwrap();
        let plan = plan_subject(&full_profile(), &fine, &table, PlanOptions::default()).unwrap();
        assert_eq!(plan.jobs.len(), 541);
    }

    #[test]
    fn plan_brackets_and_ratios() {
        let table = ExpressionAngleTable::default();
        let plan = plan_subject(&full_profile(), &TemplateGrid::default(), &table, PlanOptions::default()).unwrap();
        let at = |angle: f64, ratio: f64| {
            plan.jobs
                .iter()
                .find(|j| j.target.angle_deg == angle && (j.target.ratio - ratio).abs() < 1e-12)
                .unwrap()
                .recipe
        };
        assert_eq!(at(10.0, 1.0), Recipe::Original(Expression::Happy));
        assert_eq!(
            at(10.0, 0.5),
            Recipe::Radial {
                apex: ApexRecipe::Given(Expression::Happy),
                r_radial: 0.5
            }
        );
        match at(85.0, 0.3) {
            Recipe::Radial {
                apex: ApexRecipe::Interpolated { lower, upper, r_apex },
                ..
            } => {
                assert_eq!((lower, upper), (Expression::Surprised, Expression::Afraid));
                assert!((r_apex - 0.5).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn plan_rejects_extrapolation() {
        let table = ExpressionAngleTable::default();
        let grid = build_template(0.0, 210.0, 15.0, 0.5).unwrap();
        assert!(matches!(
            plan_subject(&full_profile(), &grid, &table, PlanOptions::default()),
            Err(Error::Planning(_))
        ));
    }

    #[test]
    fn missing_apex_skips_its_span() {
        let table = ExpressionAngleTable::default();
        let mut profile = full_profile();
        profile.apexes.retain(|(e, _, _)| *e != Expression::Afraid);
        let plan = plan_subject(&profile, &TemplateGrid::default(), &table, PlanOptions::default()).unwrap();
        // 85, 100 and 115 deg depend on Afraid
        assert_eq!(plan.skipped.len(), 30);
        assert_eq!(plan.jobs.len(), 111);
        assert!(plan.jobs.iter().all(|j| ![85.0, 100.0, 115.0].contains(&j.target.angle_deg)));
    }

    #[test]
    fn absolute_mode() {
        let table = ExpressionAngleTable::default();
        let grid = build_template(10.0, 205.0, 15.0, 0.1).unwrap();
        let opts = PlanOptions {
            mode: IntensityMode::Absolute,
            ..PlanOptions::default()
        };
        // apex intensity 0.8 cannot reach 0.9
        assert!(plan_subject(&full_profile(), &grid, &table, opts).is_err());
        let mut p = full_profile();
        for a in &mut p.apexes {
            a.1 = 1.0;
        }
        let plan = plan_subject(&p, &grid, &table, opts).unwrap();
        assert_eq!(plan.jobs.len(), 141);
    }

    #[test]
    fn run_small_subject_end_to_end() {
        let frame = small_frame();
        let s = subject(7, &Expression::ALL, &frame);
        let table = ExpressionAngleTable::default();
        let grid = build_template(10.0, 205.0, 15.0, 0.25).unwrap();
        let plan = plan_subject(
            &s.profile(),
            &grid,
            &table,
            PlanOptions {
                mirrored: true,
                ..PlanOptions::default()
            },
        )
        .unwrap();
        let ctx = RunContext::new(&frame, LandmarkScheme::default());
        let run = run_subject(&s, &plan, &ctx).unwrap();
        assert_eq!(run.faces.len(), (14 * 4 + 1) * 2);

        // pass-throughs are byte-identical copies
        let happy = run
            .faces
            .iter()
            .find(|f| matches!(&f.provenance, Provenance::Job(j) if j.recipe == Recipe::Original(Expression::Happy) && !j.mirrored))
            .unwrap();
        assert_eq!(happy.image, s.apex(Expression::Happy).unwrap().image);

        let half = run
            .faces
            .iter()
            .find(|f| matches!(&f.provenance, Provenance::Job(j) if j.target.angle_deg == 10.0 && j.target.ratio == 0.5 && !j.mirrored))
            .unwrap();
        let i_happy = s.apex(Expression::Happy).unwrap().affect.intensity();
        assert!((half.affect.intensity() - 0.5 * i_happy).abs() < 1e-12);
        assert_eq!(half.affect.angle_deg(), 10.0);

        // mirrored twins share annotations
        for pair in run.faces.chunks(2) {
            assert_eq!(pair[0].affect, pair[1].affect);
            assert_eq!(pair[1].image, pair[0].image.flip_horizontal());
        }

        // cache transparency
        let uncached = run_subject(
            &s,
            &plan,
            &RunContext {
                cache_apexes: false,
                ..ctx.clone()
            },
        )
        .unwrap();
        assert_eq!(uncached.faces, run.faces);
    }

    #[test]
    fn subject_input_validation() {
        let frame = small_frame();
        let table = ExpressionAngleTable::default();
        let f = fixtures::synthetic_face(1, Expression::Happy, &frame);
        let given = |e, i| GivenFace {
            expression: e,
            image: f.image.clone(),
            landmarks: f.landmarks.clone(),
            intensity: i,
        };
        assert!(SubjectInput::new("a", vec![given(Expression::Happy, None)], &table).is_err());
        assert!(SubjectInput::new(
            "a",
            vec![given(Expression::Neutral, None), given(Expression::Happy, Some(1.5))],
            &table
        )
        .is_err());
        let ok = SubjectInput::new(
            "a",
            vec![
                given(Expression::Sad, Some(0.5)),
                given(Expression::Neutral, None),
                given(Expression::Happy, None),
            ],
            &table,
        )
        .unwrap();
        assert_eq!(ok.apexes[0].expression, Expression::Happy);
        assert!(ok.apexes[0].face.assumed_intensity);
        assert_eq!(ok.apexes[0].face.affect.intensity(), 1.0);
        assert!(!ok.apexes[1].face.assumed_intensity);
    }
}
