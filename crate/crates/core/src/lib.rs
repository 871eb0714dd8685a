//! Lifting multi-view 2D part detections onto 3D point clouds.
//!
//! The pipeline renders a normalized point cloud from a fixed set of
//! viewpoints ([`geom`]), intersects per-view detections with the projected
//! points ([`detect`]), aggregates the evidence per super point ([`vote`]),
//! and labels each super point. A small weight network ([`weightnet`]) can be
//! trained ([`train`]) against a relaxed mIoU objective ([`loss`]) to
//! re-weight detections before voting. Instance segmentation and AP
//! evaluation live in [`instance`]; semantic evaluation in [`eval`].
//!
//! [`synth`] generates labeled scenes together with an oracle detector, which
//! stands in for an external 2D detector and foreground segmenter.

pub mod cli;
pub mod detect;
pub mod error;
pub mod eval;
pub mod geom;
pub mod gradcheck;
pub mod instance;
pub mod loss;
pub mod synth;
pub mod train;
pub mod vote;
pub mod weightnet;

pub use error::{Error, Result};
