use alloc::string::String;

use crate::bezier::{PatchId, SurfacePoint};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid control grid for patch {patch}: {reason}")]
    InvalidGrid { patch: PatchId, reason: String },

    #[error("unknown patch id {0}")]
    UnknownPatch(PatchId),

    #[error("patch {patch} has not passed the validity check")]
    PatchNotValidated { patch: PatchId },

    #[error("degenerate metric (det = {det:e}){}", fmt_point(.point))]
    DegenerateMetric {
        det: f64,
        point: Option<SurfacePoint>,
    },

    #[error("stencil spacing d = {d} exceeds the patch extent {extent} along the axis at {point}")]
    StencilOutOfPatch {
        point: SurfacePoint,
        d: f64,
        extent: f64,
    },

    #[error("{dropped} of {total} samples dropped during feature assembly (limit 10%)")]
    TooManyDropped { dropped: usize, total: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite gradient at parameter {index} (value {value})")]
    NonFiniteGradient { index: usize, value: f64 },
}

fn fmt_point(point: &Option<SurfacePoint>) -> String {
    match point {
        Some(p) => alloc::format!(" at {p}"),
        None => String::new(),
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
