//! Frame-quality triage and restoration for endoscopy-style video.
//!
//! The library takes decoded video frames plus per-frame artifact detections
//! (bounding boxes labelled blur, bubbles, specularity, saturation, contrast,
//! or miscellaneous) and:
//!
//! * scores each frame's usability ([`quality`]),
//! * routes it to keep / restore / discard ([`pipeline`]),
//! * runs the matching restoration stages: TV deblurring, inpainting,
//!   exposure correction with color retransfer ([`restore`]),
//! * measures the result ([`metrics`]) and evaluates detector output
//!   ([`deteval`]),
//! * and can synthesize degraded test data ([`sim`]).
//!
//! File formats (detection sidecars, configs, reports, PNG frames) live in
//! [`io`]; the `frametriage` binary wires everything into a CLI.

pub mod deteval;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod quality;
pub mod restore;
pub mod sim;

pub use error::Error;
pub use geometry::{ArtifactClass, BBox, Detection, Frame, Mask};

/// Everything in this crate that returns errors uses this alias.
pub type Result<T> = std::result::Result<T, Error>;
