//! Course catalog, student valuations, the GUI mistake model, and the
//! brute-force allocation oracle.

mod catalog;
mod mistakes;
mod profile;
mod valuation;

pub use catalog::{binomial, Bundle, BundleIter, CourseCatalog, CourseId, MAX_COURSES};
pub use mistakes::{corrupt, MistakeProfile};
pub use profile::{
    generate_profile, GuiReport, InstanceParams, InteractionGroup, InteractionKind,
    StudentProfile, Tier,
};
pub use valuation::{best_bundle, bundle_value, reported_value, true_value};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("invalid catalog: num_courses {num_courses} must be >= max_bundle_size {max_bundle_size} >= 1")]
    InvalidCatalog {
        num_courses: usize,
        max_bundle_size: usize,
    },
    #[error("catalog of {num_courses} courses exceeds the supported maximum of {}", MAX_COURSES)]
    CatalogTooLarge { num_courses: usize },
    #[error("invalid bundle: size {size} with catalog limit {max_bundle_size} over {num_courses} courses")]
    InvalidBundle {
        size: usize,
        max_bundle_size: usize,
        num_courses: usize,
    },
    #[error("interaction group needs at least 2 members, got {size}")]
    GroupTooSmall { size: usize },
    #[error("interaction strength must lie in (0, 1), got {strength}")]
    InvalidStrength { strength: f64 },
    #[error("group members {members:?} exceed the {num_courses}-course value table")]
    GroupMemberOutOfRange {
        members: Vec<usize>,
        num_courses: usize,
    },
    #[error("complement and substitute groups share the identical member set {members:?}")]
    ConflictingGroups { members: Vec<usize> },
    #[error("base values must be finite and non-negative, got {value}")]
    NegativeBaseValue { value: f64 },
    #[error("tier labels cover {tiers} courses but the catalog has {courses}")]
    TierLengthMismatch { tiers: usize, courses: usize },
}
