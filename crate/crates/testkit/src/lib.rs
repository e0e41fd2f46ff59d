//! Test-only support shared by the engine's test suites: an independent f64
//! reference model, a finite-difference gradient-check harness, and
//! synthetic glyph datasets. Never part of the shipped library.

mod fd;
mod glyphs;
mod ref_model;

pub use fd::{fd_gradient_check, FdCheck, FdFailure};
pub use glyphs::{glyph_dataset, glyph_pixels, write_glyph_dataset, GLYPH_CLASSES};
pub use ref_model::{gelu64, RefViT};
