//! Expands a categorical facial-expression set (neutral plus apex faces per
//! subject, with landmark sidecars) into a balanced synthetic dataset over
//! the valence–arousal circumplex using landmark-based face morphing.
//!
//! The pieces, bottom-up:
//!
//! - [`affect_space`]: polar/Cartesian affect coordinates and the template grid.
//! - [`landmarks`]: sidecar parsing, eye-based alignment, mirroring.
//! - [`delaunay`], [`warp`], [`morph`]: the two-face morphing function.
//! - [`pipeline`]: apex-to-apex and neutral-to-apex synthesis and planning.
//! - [`dataset_io`], [`audit`]: files on disk and manifest checks.

pub mod affect_space;
pub mod audit;
pub mod dataset_io;
pub mod delaunay;
pub mod error;
pub mod face_image;
pub mod fixtures;
pub mod geometry;
pub mod landmarks;
pub mod morph;
pub mod pipeline;
pub mod warp;

pub use affect_space::{
    augmentation_factor, build_template, polar_from_va, va_from_polar, AffectPoint, Expression,
    ExpressionAngleTable, ExpressionLabel, GridNode, TemplateGrid,
};
pub use dataset_io::{ManifestRecord, PipelineConfig, Settings};
pub use delaunay::{triangulate, Triangulation};
pub use error::{Error, Result};
pub use face_image::{Border, FaceImage};
pub use geometry::Point;
pub use landmarks::{CanonicalFrame, LandmarkScheme, LandmarkSet};
pub use morph::{morph, MorphResult};
pub use pipeline::{AnnotatedFace, IntensityMode, SubjectInput, SynthesisJob};
pub use warp::warp_image;
