//! Two-stage flood mitigation planning for transmission grids.
//!
//! First-stage decisions place temporary flood barriers at substations;
//! the second stage operates the damaged grid under a DC or LPAC-style
//! approximation to minimize load shed. Models are built as [`model::ModelIR`]
//! and solved by the embedded simplex and branch-and-bound [`engine`].

pub mod bigm;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod mitigation;
pub mod model;
pub mod recourse;
pub mod synthetic;
pub mod twostage;

pub use error::{Error, Result};
