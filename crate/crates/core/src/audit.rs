//! Manifest auditing: balance histograms and record validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use crate::affect_space::{TemplateGrid, LATTICE_TOLERANCE};
use crate::dataset_io::{round6, ManifestRecord};
use crate::pipeline::IntensityMode;

/// Valence/arousal must agree with intensity/angle within this bound.
pub const VA_TOLERANCE: f64 = 1e-6;

/// Histogram key: angle and radial ratio in micro-units, plus the mirror flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub angle_micro: i64,
    pub ratio_micro: i64,
    pub mirrored: bool,
}

impl Cell {
    fn of(record: &ManifestRecord) -> Cell {
        Cell {
            angle_micro: (round6(record.angle_deg) * 1e6).round() as i64,
            ratio_micro: (round6(record.r_radial) * 1e6).round() as i64,
            mirrored: record.mirrored,
        }
    }

    pub fn angle_deg(&self) -> f64 {
        self.angle_micro as f64 / 1e6
    }

    pub fn ratio(&self) -> f64 {
        self.ratio_micro as f64 / 1e6
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stats {
    /// Records per non-neutral cell.
    pub cells: BTreeMap<Cell, usize>,
    /// Neutral records per mirror flag.
    pub neutral: BTreeMap<bool, usize>,
    pub per_subject: BTreeMap<String, usize>,
    /// Cells holding fewer records than there are subjects.
    pub short_cells: Vec<Cell>,
}

impl Stats {
    pub fn subject_count(&self) -> usize {
        self.per_subject.len()
    }

    pub fn is_balanced(&self) -> bool {
        self.short_cells.is_empty()
    }
}

pub fn stats(records: &[ManifestRecord]) -> Stats {
    let mut s = Stats::default();
    for r in records {
        *s.per_subject.entry(r.subject_id.clone()).or_default() += 1;
        if r.label == "neutral" {
            *s.neutral.entry(r.mirrored).or_default() += 1;
        } else {
            *s.cells.entry(Cell::of(r)).or_default() += 1;
        }
    }
    let subjects = s.per_subject.len();
    s.short_cells = s
        .cells
        .iter()
        .filter(|(_, &n)| n < subjects)
        .map(|(c, _)| *c)
        .collect();
    s
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 1-based line in the manifest file (the header is line 1).
    pub line: usize,
    pub file: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {} ({}): {}", self.line, self.file, self.message)
    }
}

/// What records are checked against.
pub struct ValidationTarget<'a> {
    pub image_root: &'a Path,
    pub grid: &'a TemplateGrid,
    pub mode: IntensityMode,
    pub canvas: (u32, u32),
}

/// Checks VA consistency, grid membership, file existence and image size
/// for every record, in manifest order.
pub fn validate_manifest(records: &[ManifestRecord], target: &ValidationTarget<'_>) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (k, r) in records.iter().enumerate() {
        let mut flag = |message: String| {
            out.push(Violation {
                line: k + 2,
                file: r.file.clone(),
                message,
            })
        };
        if !seen.insert(r.file.as_str()) {
            flag("duplicate file".into());
        }

        let theta = r.angle_deg.to_radians();
        let dv = (r.valence - r.intensity * theta.cos()).abs();
        let da = (r.arousal - r.intensity * theta.sin()).abs();
        let dn = (r.valence * r.valence + r.arousal * r.arousal - r.intensity * r.intensity).abs();
        if !(dv < VA_TOLERANCE && da < VA_TOLERANCE && dn < VA_TOLERANCE) {
            flag(format!(
                "valence/arousal inconsistent with intensity {} at {} deg (|dV| {dv:.3e}, |dA| {da:.3e})",
                r.intensity, r.angle_deg
            ));
        }
        if !(0.0..=1.0).contains(&r.intensity) {
            flag(format!("intensity {} outside [0, 1]", r.intensity));
        }

        if r.label == "neutral" {
            if r.intensity != 0.0 {
                flag("neutral record with nonzero intensity".into());
            }
        } else {
            let radial = match target.mode {
                IntensityMode::Ratio => r.r_radial,
                IntensityMode::Absolute => r.intensity,
            };
            if !target.grid.contains(r.angle_deg, radial, LATTICE_TOLERANCE) {
                flag(format!("({}, {radial}) is not a grid node", r.angle_deg));
            }
        }

        let path = target.image_root.join(&r.file);
        if !path.is_file() {
            flag("file not found".into());
            continue;
        }
        match image::image_dimensions(&path) {
            Ok(dims) if dims == target.canvas => {}
            Ok((w, h)) => flag(format!(
                "image is {w}x{h}, canvas is {}x{}",
                target.canvas.0, target.canvas.1
            )),
            Err(e) => flag(format!("unreadable image: {e}")),
        }
    }
    out
}
