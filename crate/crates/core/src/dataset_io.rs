//! Pipeline configuration, input discovery, output layout and the CSV manifest.
//!
//! Input layout: `<input_root>/<subject_id>/<expression>.<ext>` with a
//! `<expression>.landmarks.json` sidecar next to every image and an optional
//! `intensity.json` mapping apex tokens to perceived intensities.
//!
//! Output layout: `<output_root>/<subject_id>/<angle>_<ratio>[_m].png`,
//! `neutral[_m].png` for the neutral face, and `<output_root>/manifest.csv`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affect_space::{
    build_template, va_from_polar, Expression, ExpressionAngleTable, TemplateGrid,
};
use crate::error::{Error, Result};
use crate::face_image::FaceImage;
use crate::landmarks::{
    align_to_canonical, parse_landmarks, CanonicalFrame, LandmarkScheme, LandmarkSet,
    DEFAULT_LANDMARK_COUNT, FLIP_68,
};
use crate::pipeline::{
    plan_subject, run_subject, AnnotatedFace, ApexRecipe, GivenFace, IntensityMode, PlanOptions,
    Provenance, Recipe, RunContext, SubjectInput, SubjectPlan, SubjectProfile, SynthesisJob,
};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const INTENSITY_FILE: &str = "intensity.json";
pub const SIDECAR_SUFFIX: &str = ".landmarks.json";
pub const MANIFEST_HEADER: [&str; 13] = [
    "subject_id", "file", "label", "angle_deg", "intensity", "valence", "arousal", "apex1",
    "apex2", "r_apex", "r_radial", "mirrored", "origin",
];

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub angle_step_deg: f64,
    pub radial_step: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            angle_min_deg: 10.0,
            angle_max_deg: 205.0,
            angle_step_deg: 15.0,
            radial_step: 0.1,
        }
    }
}

/// Landmark layout. Eye sets and the flip map default to the 68-point scheme
/// when `count` is 68 and are required otherwise (the flip map only for mirroring).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandmarkConfig {
    pub count: usize,
    pub left_eye: Option<Vec<usize>>,
    pub right_eye: Option<Vec<usize>>,
    pub flip_permutation: Option<Vec<usize>>,
}

impl Default for LandmarkConfig {
    fn default() -> Self {
        LandmarkConfig {
            count: DEFAULT_LANDMARK_COUNT,
            left_eye: None,
            right_eye: None,
            flip_permutation: None,
        }
    }
}

/// Lossless output encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Png,
    Bmp,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Png => "png",
            OutputFormat::Bmp => "bmp",
        }
    }

    fn image_format(self) -> image::ImageFormat {
        match self {
            OutputFormat::Png => image::ImageFormat::Png,
            OutputFormat::Bmp => image::ImageFormat::Bmp,
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "png" => Ok(OutputFormat::Png),
            "bmp" => Ok(OutputFormat::Bmp),
            "jpg" | "jpeg" => Err(Error::config(
                "image_format",
                "lossy output cannot reproduce morph endpoints; use png or bmp",
            )),
            other => Err(Error::config("image_format", format!("unsupported format `{other}`"))),
        }
    }
}

/// The pipeline configuration file, a single JSON document. Every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Apex angle overrides in degrees, keyed by expression token.
    pub angle_table: BTreeMap<String, f64>,
    pub grid: GridConfig,
    pub frame: CanonicalFrame,
    pub mirror: bool,
    pub intensity_mode: IntensityMode,
    pub landmarks: LandmarkConfig,
    pub input_root: PathBuf,
    pub output_root: PathBuf,
    pub image_format: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            angle_table: BTreeMap::new(),
            grid: GridConfig::default(),
            frame: CanonicalFrame::default(),
            mirror: false,
            intensity_mode: IntensityMode::Ratio,
            landmarks: LandmarkConfig::default(),
            input_root: PathBuf::from("in"),
            output_root: PathBuf::from("out"),
            image_format: "png".into(),
        }
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct Settings {
    pub table: ExpressionAngleTable,
    pub grid: TemplateGrid,
    pub frame: CanonicalFrame,
    pub scheme: LandmarkScheme,
    pub plan: PlanOptions,
    pub input_root: PathBuf,
    pub output_root: PathBuf,
    pub format: OutputFormat,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::parse("config", format!("line {} column {}: {e}", e.line(), e.column()))
        })
    }

    /// Reads a config file; relative roots resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for root in [&mut config.input_root, &mut config.output_root] {
            if root.is_relative() {
                *root = base.join(&*root);
            }
        }
        Ok(config)
    }

    /// Checks every precondition the pipeline relies on, before any compute.
    pub fn validate(&self) -> Result<Settings> {
        let overrides = self
            .angle_table
            .iter()
            .map(|(k, &v)| {
                let e = Expression::from_str(k)
                    .map_err(|_| Error::config(format!("angle_table.{k}"), "unknown expression"))?;
                Ok((e, v))
            })
            .collect::<Result<Vec<_>>>()?;
        let table = ExpressionAngleTable::with_overrides(overrides)?;
        let g = &self.grid;
        let grid = build_template(g.angle_min_deg, g.angle_max_deg, g.angle_step_deg, g.radial_step)?;
        if let Some((lo, hi)) = table.span() {
            if g.angle_min_deg < lo || g.angle_max_deg > hi {
                return Err(Error::config(
                    "grid",
                    format!(
                        "angles {}..{} leave the apex span {lo}..{hi}; extrapolation is not supported",
                        g.angle_min_deg, g.angle_max_deg
                    ),
                ));
            }
        }
        self.frame.validate()?;
        let scheme = self.scheme()?;
        scheme.validate()?;
        if self.mirror && scheme.flip.is_none() {
            return Err(Error::config(
                "landmarks.flip_permutation",
                format!("mirroring needs a symmetry map for {} landmarks", scheme.count),
            ));
        }
        Ok(Settings {
            table,
            grid,
            frame: self.frame.clone(),
            scheme,
            plan: PlanOptions {
                mirrored: self.mirror,
                mode: self.intensity_mode,
            },
            input_root: self.input_root.clone(),
            output_root: self.output_root.clone(),
            format: self.image_format.parse()?,
        })
    }

    fn scheme(&self) -> Result<LandmarkScheme> {
        let l = &self.landmarks;
        let default68 = l.count == DEFAULT_LANDMARK_COUNT;
        let eye = |given: &Option<Vec<usize>>, name: &str, fallback: std::ops::Range<usize>| {
            match (given, default68) {
                (Some(v), _) => Ok(v.clone()),
                (None, true) => Ok(fallback.collect()),
                (None, false) => Err(Error::config(
                    format!("landmarks.{name}"),
                    format!("required for {} landmarks", l.count),
                )),
            }
        };
        Ok(LandmarkScheme {
            count: l.count,
            left_eye: eye(&l.left_eye, "left_eye", 36..42)?,
            right_eye: eye(&l.right_eye, "right_eye", 42..48)?,
            flip: l
                .flip_permutation
                .clone()
                .or_else(|| default68.then(|| FLIP_68.to_vec())),
        })
    }
}

/// One given image of a subject, with its parsed sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceFace {
    pub expression: Expression,
    pub image_path: PathBuf,
    pub landmarks: LandmarkSet,
    /// `None` when the subject's intensity file has no entry.
    pub intensity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectSource {
    pub subject_id: String,
    pub dir: PathBuf,
    /// Neutral first, then apexes in canonical order.
    pub faces: Vec<SourceFace>,
}

impl SubjectSource {
    pub fn profile(&self) -> SubjectProfile {
        SubjectProfile {
            subject_id: self.subject_id.clone(),
            apexes: self
                .faces
                .iter()
                .filter(|f| f.expression.is_apex())
                .map(|f| (f.expression, f.intensity.unwrap_or(1.0), f.intensity.is_none()))
                .collect(),
        }
    }

    pub fn missing_apexes(&self) -> Vec<Expression> {
        Expression::APEXES
            .into_iter()
            .filter(|e| !self.faces.iter().any(|f| f.expression == *e))
            .collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Discovery {
    /// Sorted by subject id.
    pub subjects: Vec<SubjectSource>,
    pub warnings: Vec<String>,
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?;
    paths.sort();
    Ok(paths)
}

fn file_name(path: &Path) -> Result<&str> {
    path.file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::parse("path", format!("{} is not valid UTF-8", path.display())))
}

/// Finds every subject directory under the input root whose id passes `filter`.
///
/// Subjects without a neutral image are skipped with a warning; an image
/// without a landmark sidecar is a hard error.
pub fn discover_subjects(settings: &Settings, filter: impl Fn(&str) -> bool) -> Result<Discovery> {
    let mut discovery = Discovery::default();
    let mut warn_and_keep = |msg: String| {
        warn!("{msg}");
        discovery.warnings.push(msg);
    };
    let mut subjects = Vec::new();
    for dir in read_dir_sorted(&settings.input_root)? {
        if !dir.is_dir() {
            continue;
        }
        let subject_id = file_name(&dir)?.to_string();
        if !filter(&subject_id) {
            continue;
        }
        let (faces, notes) = discover_faces(&dir, settings)?;
        notes.into_iter().for_each(&mut warn_and_keep);
        if !faces.iter().any(|f| f.expression == Expression::Neutral) {
            warn_and_keep(format!("subject `{subject_id}` has no neutral image; skipped"));
            continue;
        }
        let source = SubjectSource {
            subject_id,
            dir,
            faces,
        };
        let missing = source.missing_apexes();
        if !missing.is_empty() {
            let names: Vec<&str> = missing.iter().map(|e| e.token()).collect();
            warn_and_keep(format!(
                "subject `{}` lacks {}; dependent grid angles are skipped",
                source.subject_id,
                names.join(", ")
            ));
        }
        subjects.push(source);
    }
    discovery.subjects = subjects;
    Ok(discovery)
}

fn discover_faces(dir: &Path, settings: &Settings) -> Result<(Vec<SourceFace>, Vec<String>)> {
    let mut notes = Vec::new();
    let mut images: Vec<(Expression, PathBuf, String)> = Vec::new();
    for path in read_dir_sorted(dir)? {
        if !path.is_file() {
            continue;
        }
        let name = file_name(&path)?;
        if name.ends_with(SIDECAR_SUFFIX) || name == INTENSITY_FILE {
            continue;
        }
        let Some((stem, ext)) = name.rsplit_once('.') else {
            continue;
        };
        if !IMAGE_EXTENSIONS.contains(&ext.to_ascii_lowercase().as_str()) {
            continue;
        }
        let Ok(expression) = stem.parse::<Expression>() else {
            notes.push(format!("ignoring {}: not an expression token", path.display()));
            continue;
        };
        if let Some((_, other, _)) = images.iter().find(|(e, _, _)| *e == expression) {
            return Err(Error::parse(
                "input",
                format!("{} and {} are both {expression}", other.display(), path.display()),
            ));
        }
        images.push((expression, path.clone(), stem.to_string()));
    }
    images.sort_by_key(|(e, _, _)| *e);

    let intensities = read_intensities(dir)?;
    let mut faces = Vec::with_capacity(images.len());
    for (expression, image_path, stem) in images {
        let sidecar = dir.join(format!("{stem}{SIDECAR_SUFFIX}"));
        if !sidecar.is_file() {
            return Err(Error::MissingSidecar(image_path));
        }
        let bytes = fs::read(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let (landmarks, _) = parse_landmarks(&bytes, settings.scheme.count).map_err(|e| match e {
            Error::Parse { field, message } => Error::Parse {
                field: format!("{}:{field}", sidecar.display()),
                message,
            },
            other => other,
        })?;
        faces.push(SourceFace {
            expression,
            image_path,
            landmarks,
            intensity: intensities.get(&expression).copied(),
        });
    }
    Ok((faces, notes))
}

fn read_intensities(dir: &Path) -> Result<BTreeMap<Expression, f64>> {
    let path = dir.join(INTENSITY_FILE);
    if !path.is_file() {
        return Ok(BTreeMap::new());
    }
    let field = |key: &str| format!("{}:{key}", path.display());
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let raw: BTreeMap<String, f64> =
        serde_json::from_str(&text).map_err(|e| Error::parse(field(""), e.to_string()))?;
    let mut out = BTreeMap::new();
    for (key, value) in raw {
        let e: Expression = key
            .parse()
            .map_err(|_| Error::parse(field(&key), "unknown expression token"))?;
        if !e.is_apex() {
            return Err(Error::parse(field(&key), "neutral has no perceived intensity"));
        }
        if !(value > 0.0 && value <= 1.0) {
            return Err(Error::parse(field(&key), format!("{value} outside (0, 1]")));
        }
        out.insert(e, value);
    }
    Ok(out)
}

/// A subject's aligned faces, plus which pass-through outputs may be copied
/// from their source files verbatim.
pub struct LoadedSubject {
    pub input: SubjectInput,
    /// Source files whose decoded pixels equal their aligned face exactly.
    pub verbatim: BTreeMap<Expression, PathBuf>,
}

/// Decodes and aligns every face of a subject.
pub fn load_subject(source: &SubjectSource, settings: &Settings) -> Result<LoadedSubject> {
    let mut given = Vec::with_capacity(source.faces.len());
    let mut verbatim = BTreeMap::new();
    for face in &source.faces {
        let image = FaceImage::load(&face.image_path)?;
        if (image.width(), image.height()) != (face.landmarks.width, face.landmarks.height) {
            return Err(Error::Mismatch(format!(
                "{} is {}x{} but its sidecar says {}x{}",
                face.image_path.display(),
                image.width(),
                image.height(),
                face.landmarks.width,
                face.landmarks.height
            )));
        }
        let (aligned, landmarks) =
            align_to_canonical(&image, &face.landmarks, &settings.frame, &settings.scheme).map_err(|e| {
                Error::Alignment(format!("{}: {e}", face.image_path.display()))
            })?;
        let same_format = face
            .image_path
            .extension()
            .and_then(|x| x.to_str())
            .is_some_and(|x| x.eq_ignore_ascii_case(settings.format.extension()));
        if same_format && aligned == image {
            verbatim.insert(face.expression, face.image_path.clone());
        }
        given.push(GivenFace {
            expression: face.expression,
            image: aligned,
            landmarks,
            intensity: face.intensity,
        });
    }
    Ok(LoadedSubject {
        input: SubjectInput::new(source.subject_id.clone(), given, &settings.table)?,
        verbatim,
    })
}

/// Angle with at least three integer digits and only the decimals it needs.
fn format_angle(angle: f64) -> String {
    let text = trim_decimals(&format!("{angle:.6}"), 0);
    let (int, frac) = text.split_once('.').map_or((text.as_str(), None), |(i, f)| (i, Some(f)));
    match frac {
        Some(f) => format!("{int:0>3}.{f}"),
        None => format!("{int:0>3}"),
    }
}

/// Ratio with at least two decimals.
fn format_ratio(ratio: f64) -> String {
    trim_decimals(&format!("{ratio:.6}"), 2)
}

fn trim_decimals(text: &str, keep: usize) -> String {
    let Some(dot) = text.find('.') else {
        return text.to_string();
    };
    let mut end = text.len();
    while end > dot + 1 + keep && text.as_bytes()[end - 1] == b'0' {
        end -= 1;
    }
    if end == dot + 1 {
        end = dot;
    }
    text[..end].to_string()
}

/// File name of one output, relative to its subject directory.
pub fn output_file_name(job: &SynthesisJob, format: OutputFormat) -> String {
    let suffix = if job.mirrored { "_m" } else { "" };
    let ext = format.extension();
    match job.recipe {
        Recipe::Neutral => format!("neutral{suffix}.{ext}"),
        _ => format!(
            "{}_{}{suffix}.{ext}",
            format_angle(job.target.angle_deg),
            format_ratio(job.target.ratio)
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Original,
    Synth,
    /// The intensity derives from a defaulted perceived intensity.
    AssumedIntensity,
}

impl Origin {
    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Original => "original",
            Origin::Synth => "synth",
            Origin::AssumedIntensity => "assumed-intensity",
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Origin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Origin::Original),
            "synth" => Ok(Origin::Synth),
            "assumed-intensity" => Ok(Origin::AssumedIntensity),
            _ => Err(Error::Manifest(format!("unknown origin `{s}`"))),
        }
    }
}

/// One manifest row. Float fields hold values exactly representable in the
/// 6-decimal rendering, so a write/read cycle reproduces them bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub subject_id: String,
    /// Path relative to the output root, `/`-separated.
    pub file: String,
    pub label: String,
    pub angle_deg: f64,
    pub intensity: f64,
    pub valence: f64,
    pub arousal: f64,
    pub apex1: String,
    pub apex2: String,
    pub r_apex: f64,
    pub r_radial: f64,
    pub mirrored: bool,
    pub origin: Origin,
}

/// Rounds to 6 decimals, folding negative zero.
pub fn round6(x: f64) -> f64 {
    round_to(x, 1e6)
}

/// Rounds to 9 decimals. Valence and arousal carry the extra digits so
/// V^2 + A^2 stays within 1e-6 of I^2 after rounding.
pub fn round9(x: f64) -> f64 {
    round_to(x, 1e9)
}

fn round_to(x: f64, scale: f64) -> f64 {
    let r = (x * scale).round() / scale;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

impl ManifestRecord {
    /// Builds the row for a planned output. Valence and arousal are
    /// recomputed from the rounded intensity and angle so the row is
    /// self-consistent at full precision.
    pub fn from_face(face: &AnnotatedFace, file: String) -> Result<Self> {
        let Provenance::Job(job) = &face.provenance else {
            return Err(Error::Manifest(format!("{file}: face has no synthesis job")));
        };
        let intensity = round6(face.affect.intensity());
        let angle_deg = if intensity == 0.0 { 0.0 } else { round6(face.affect.angle_deg()) };
        let (v, a) = va_from_polar(intensity, angle_deg)?;
        let (apex1, apex2, r_apex, r_radial) = match job.recipe {
            Recipe::Neutral => (String::new(), String::new(), 0.0, 0.0),
            Recipe::Original(e) => (e.token().to_string(), String::new(), 0.0, 1.0),
            Recipe::Radial {
                apex: ApexRecipe::Given(e),
                r_radial,
            } => (e.token().to_string(), String::new(), 0.0, r_radial),
            Recipe::Radial {
                apex: ApexRecipe::Interpolated { lower, upper, r_apex },
                r_radial,
            } => (lower.token().to_string(), upper.token().to_string(), r_apex, r_radial),
        };
        let origin = if face.assumed_intensity {
            Origin::AssumedIntensity
        } else if job.is_pass_through() {
            Origin::Original
        } else {
            Origin::Synth
        };
        Ok(ManifestRecord {
            subject_id: face.subject_id.clone(),
            file,
            label: face.label.to_string(),
            angle_deg,
            intensity,
            valence: round9(v),
            arousal: round9(a),
            apex1,
            apex2,
            r_apex: round6(r_apex),
            r_radial: round6(r_radial),
            mirrored: job.mirrored,
            origin,
        })
    }

    fn sort_key(&self) -> (&str, f64, f64, bool, &str) {
        (&self.subject_id, self.angle_deg, self.r_radial, self.mirrored, &self.file)
    }

    fn fields(&self) -> [String; 13] {
        [
            self.subject_id.clone(),
            self.file.clone(),
            self.label.clone(),
            format!("{:.6}", self.angle_deg),
            format!("{:.6}", self.intensity),
            format!("{:.9}", round9(self.valence)),
            format!("{:.9}", round9(self.arousal)),
            self.apex1.clone(),
            self.apex2.clone(),
            format!("{:.6}", self.r_apex),
            format!("{:.6}", self.r_radial),
            if self.mirrored { "1" } else { "0" }.to_string(),
            self.origin.to_string(),
        ]
    }
}

/// Sorts records into manifest order: subject, angle, radial ratio, mirrored.
pub fn sort_records(records: &mut [ManifestRecord]) {
    records.sort_by(|a, b| {
        let (ka, kb) = (a.sort_key(), b.sort_key());
        ka.0.cmp(kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(ka.3.cmp(&kb.3))
            .then(ka.4.cmp(kb.4))
    });
}

/// Manifest CSV text for `records`, in manifest order.
pub fn render_manifest(records: &[ManifestRecord]) -> Result<String> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Manifest(e.to_string());
    writer.write_record(MANIFEST_HEADER).map_err(csv_err)?;
    for r in &sorted {
        writer.write_record(r.fields()).map_err(csv_err)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Manifest(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields is UTF-8"))
}

pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let text = render_manifest(records)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut rows = reader.records();
    let header = match rows.next() {
        Some(h) => h.map_err(|e| Error::Manifest(e.to_string()))?,
        None => return Err(Error::Manifest("empty manifest; expected a header".into())),
    };
    if header.iter().ne(MANIFEST_HEADER) {
        return Err(Error::Manifest(format!(
            "unexpected header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (k, row) in rows.enumerate() {
        let line = k + 2;
        let row = row.map_err(|e| Error::Manifest(format!("line {line}: {e}")))?;
        if row.len() != MANIFEST_HEADER.len() {
            return Err(Error::Manifest(format!(
                "line {line}: {} fields, expected {}",
                row.len(),
                MANIFEST_HEADER.len()
            )));
        }
        let float = |i: usize| -> Result<f64> {
            let v: f64 = row[i].parse().map_err(|_| {
                Error::Manifest(format!("line {line}: {} `{}` is not a number", MANIFEST_HEADER[i], &row[i]))
            })?;
            if !v.is_finite() {
                return Err(Error::Manifest(format!("line {line}: {} is not finite", MANIFEST_HEADER[i])));
            }
            Ok(v)
        };
        let mirrored = match &row[11] {
            "0" => false,
            "1" => true,
            other => return Err(Error::Manifest(format!("line {line}: mirrored `{other}` is not 0 or 1"))),
        };
        out.push(ManifestRecord {
            subject_id: row[0].to_string(),
            file: row[1].to_string(),
            label: row[2].to_string(),
            angle_deg: float(3)?,
            intensity: float(4)?,
            valence: float(5)?,
            arousal: float(6)?,
            apex1: row[7].to_string(),
            apex2: row[8].to_string(),
            r_apex: float(9)?,
            r_radial: float(10)?,
            mirrored,
            origin: row[12]
                .parse()
                .map_err(|e: Error| Error::Manifest(format!("line {line}: {e}")))?,
        });
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectPlanReport {
    pub subject_id: String,
    pub given_images: usize,
    pub plan: SubjectPlan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanReport {
    pub subjects: Vec<SubjectPlanReport>,
}

impl PlanReport {
    pub fn total_outputs(&self) -> usize {
        self.subjects.iter().map(|s| s.plan.jobs.len()).sum()
    }

    pub fn given_images(&self) -> usize {
        self.subjects.iter().map(|s| s.given_images).sum()
    }

    /// Outputs per given image over all subjects; `None` with no subjects.
    pub fn augmentation_factor(&self) -> Option<f64> {
        let given = self.given_images();
        (given > 0).then(|| self.total_outputs() as f64 / given as f64)
    }
}

/// Plans every subject without decoding any pixels.
pub fn plan_dataset(settings: &Settings, subjects: &[SubjectSource]) -> Result<PlanReport> {
    let subjects = subjects
        .iter()
        .map(|s| {
            let profile = s.profile();
            Ok(SubjectPlanReport {
                subject_id: s.subject_id.clone(),
                given_images: profile.given_images(),
                plan: plan_subject(&profile, &settings.grid, &settings.table, settings.plan)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PlanReport { subjects })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenerateOptions {
    /// Compare against existing outputs instead of writing.
    pub check_only: bool,
}

#[derive(Debug)]
pub struct SubjectFailure {
    pub subject_id: String,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct GenerateReport {
    pub subjects_done: usize,
    pub images: usize,
    pub degenerate_triangles: usize,
    pub records: Vec<ManifestRecord>,
    pub failures: Vec<SubjectFailure>,
    /// Check mode: outputs whose bytes differ from, or are missing in, the output tree.
    pub mismatches: Vec<PathBuf>,
}

struct Rendered {
    relative: String,
    bytes: Vec<u8>,
}

/// Synthesizes every subject, writing images and the manifest under the
/// output root. Subjects run one after another, jobs within a subject in
/// parallel on the current rayon pool. A failing subject is reported and
/// the rest continue.
pub fn generate(settings: &Settings, subjects: &[SubjectSource], options: GenerateOptions) -> Result<GenerateReport> {
    let root = &settings.output_root;
    if !options.check_only {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    }
    let ctx = RunContext::new(&settings.frame, settings.scheme.clone());
    let mut report = GenerateReport::default();
    for source in subjects {
        match generate_subject(settings, source, &ctx) {
            Ok((records, rendered, degenerate)) => {
                let dir = root.join(&source.subject_id);
                if options.check_only {
                    report.mismatches.extend(compare_outputs(root, &rendered));
                } else if let Err(error) = write_outputs(&dir, root, &rendered) {
                    report.failures.push(SubjectFailure {
                        subject_id: source.subject_id.clone(),
                        error,
                    });
                    continue;
                }
                report.subjects_done += 1;
                report.images += rendered.len();
                report.degenerate_triangles += degenerate;
                report.records.extend(records);
            }
            Err(error) => {
                warn!("subject `{}` failed: {error}", source.subject_id);
                report.failures.push(SubjectFailure {
                    subject_id: source.subject_id.clone(),
                    error,
                });
            }
        }
    }
    sort_records(&mut report.records);
    let manifest = root.join(MANIFEST_FILE);
    if options.check_only {
        let text = render_manifest(&report.records)?;
        if fs::read(&manifest).ok().as_deref() != Some(text.as_bytes()) {
            report.mismatches.push(manifest);
        }
    } else {
        write_manifest(&manifest, &report.records)?;
    }
    Ok(report)
}

fn generate_subject(
    settings: &Settings,
    source: &SubjectSource,
    ctx: &RunContext,
) -> Result<(Vec<ManifestRecord>, Vec<Rendered>, usize)> {
    let loaded = load_subject(source, settings)?;
    let plan = plan_subject(&loaded.input.profile(), &settings.grid, &settings.table, settings.plan)?;
    let run = run_subject(&loaded.input, &plan, ctx)?;
    let rendered = run
        .faces
        .par_iter()
        .map(|face| {
            let Provenance::Job(job) = &face.provenance else {
                unreachable!("run_subject tags every face with its job");
            };
            let relative = format!("{}/{}", source.subject_id, output_file_name(job, settings.format));
            let record = ManifestRecord::from_face(face, relative.clone())?;
            let verbatim = match (job.mirrored, job.recipe) {
                (false, Recipe::Original(e)) => loaded.verbatim.get(&e),
                (false, Recipe::Neutral) => loaded.verbatim.get(&Expression::Neutral),
                _ => None,
            };
            let bytes = match verbatim {
                Some(path) => fs::read(path).map_err(|e| Error::io(path, e))?,
                None => face.image.encode(settings.format.image_format())?,
            };
            Ok((record, Rendered { relative, bytes }))
        })
        .collect::<Result<Vec<_>>>()?;
    let (records, rendered) = rendered.into_iter().unzip();
    Ok((records, rendered, run.degenerate_triangles))
}

fn write_outputs(dir: &Path, root: &Path, rendered: &[Rendered]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    rendered.par_iter().try_for_each(|r| {
        let path = root.join(&r.relative);
        fs::write(&path, &r.bytes).map_err(|e| Error::io(&path, e))
    })
}

fn compare_outputs(root: &Path, rendered: &[Rendered]) -> Vec<PathBuf> {
    rendered
        .par_iter()
        .filter_map(|r| {
            let path = root.join(&r.relative);
            (fs::read(&path).ok().as_deref() != Some(r.bytes.as_slice())).then_some(path)
        })
        .collect()
}
