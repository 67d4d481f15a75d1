//! Preference elicitation for combinatorial course assignment.
//!
//! The pipeline: students hold combinatorial valuations over course
//! bundles; their noisy GUI reports seed an ensemble of monotone value
//! networks; an acquisition function picks pairwise comparison queries; a
//! proxy (simulated, or an LLM reading the student's free-text narrative)
//! answers them; the ensemble is fine-tuned on the answers under a
//! Bradley-Terry link with a noise-robust loss; finally each student
//! receives her argmax bundle under the trained model.

pub mod acquisition;
pub mod domain;
pub mod harness;
pub mod mvnn;
pub mod proxy;
pub mod training;
pub mod seeds;

pub use domain::{Bundle, CourseCatalog, CourseId};
