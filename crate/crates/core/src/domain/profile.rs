//! Ground-truth student valuations and their GUI-language reports.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::catalog::{Bundle, CourseCatalog, CourseId};
use super::DomainError;

/// Priority tier of a course, used only when rendering narratives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    High,
    Medium,
    Low,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    Complement,
    Substitute,
}

/// A group of courses whose combined value is scaled when two or more of
/// them appear in the same bundle: substitutes shrink by (1-strength) per
/// extra member taken, complements grow by (1+strength).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteractionGroup {
    members: Bundle,
    pub kind: InteractionKind,
    pub strength: f64,
}

impl InteractionGroup {
    pub fn new(
        members: impl IntoIterator<Item = CourseId>,
        kind: InteractionKind,
        strength: f64,
    ) -> Result<Self, DomainError> {
        let members = Bundle::from_courses(members);
        if members.size() < 2 {
            return Err(DomainError::GroupTooSmall {
                size: members.size(),
            });
        }
        if !(strength > 0.0 && strength < 1.0) {
            return Err(DomainError::InvalidStrength { strength });
        }
        Ok(InteractionGroup {
            members,
            kind,
            strength,
        })
    }

    pub fn members(&self) -> Bundle {
        self.members
    }

    pub fn member_ids(&self) -> Vec<usize> {
        self.members.courses().map(|c| c.0).collect()
    }

    /// Scaling applied to each intersecting member's contribution when k
    /// members of this group are present (k >= 2).
    pub fn factor(&self, k: usize) -> f64 {
        debug_assert!(k >= 2);
        let base = match self.kind {
            InteractionKind::Substitute => 1.0 - self.strength,
            InteractionKind::Complement => 1.0 + self.strength,
        };
        base.powi(k as i32 - 1)
    }
}

#[derive(Serialize, Deserialize)]
struct GroupRepr {
    members: Vec<usize>,
    kind: InteractionKind,
    strength: f64,
}

impl Serialize for InteractionGroup {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        GroupRepr {
            members: self.member_ids(),
            kind: self.kind,
            strength: self.strength,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for InteractionGroup {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = GroupRepr::deserialize(deserializer)?;
        InteractionGroup::new(
            repr.members.into_iter().map(CourseId),
            repr.kind,
            repr.strength,
        )
        .map_err(serde::de::Error::custom)
    }
}

/// A student's true valuation: per-course base values plus interaction
/// groups. Tier labels feed narrative generation only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudentProfile {
    base_values: Vec<f64>,
    groups: Vec<InteractionGroup>,
    tiers: Vec<Tier>,
}

impl StudentProfile {
    pub fn new(
        base_values: Vec<f64>,
        groups: Vec<InteractionGroup>,
        tiers: Vec<Tier>,
    ) -> Result<Self, DomainError> {
        if tiers.len() != base_values.len() {
            return Err(DomainError::TierLengthMismatch {
                tiers: tiers.len(),
                courses: base_values.len(),
            });
        }
        if let Some(&v) = base_values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(DomainError::NegativeBaseValue { value: v });
        }
        validate_groups(&groups, base_values.len())?;
        Ok(StudentProfile {
            base_values,
            groups,
            tiers,
        })
    }

    pub fn num_courses(&self) -> usize {
        self.base_values.len()
    }

    pub fn base_values(&self) -> &[f64] {
        &self.base_values
    }

    pub fn base_value(&self, course: CourseId) -> f64 {
        self.base_values[course.index()]
    }

    pub fn groups(&self) -> &[InteractionGroup] {
        &self.groups
    }

    pub fn tier(&self, course: CourseId) -> Tier {
        self.tiers[course.index()]
    }

    /// Course ids in a tier, ordered by descending base value.
    pub fn tier_courses(&self, tier: Tier) -> Vec<CourseId> {
        let mut courses: Vec<CourseId> = (0..self.base_values.len())
            .map(CourseId::from_index)
            .filter(|c| self.tiers[c.index()] == tier)
            .collect();
        courses.sort_by(|a, b| {
            self.base_values[b.index()]
                .partial_cmp(&self.base_values[a.index()])
                .unwrap()
                .then(a.0.cmp(&b.0))
        });
        courses
    }
}

/// The student's (possibly mistaken) report of her profile in the GUI
/// language: per-course values plus interaction adjustments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuiReport {
    reported_base_values: Vec<f64>,
    reported_groups: Vec<InteractionGroup>,
}

impl GuiReport {
    pub fn new(
        reported_base_values: Vec<f64>,
        reported_groups: Vec<InteractionGroup>,
    ) -> Result<Self, DomainError> {
        if let Some(&v) = reported_base_values
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0)
        {
            return Err(DomainError::NegativeBaseValue { value: v });
        }
        validate_groups(&reported_groups, reported_base_values.len())?;
        Ok(GuiReport {
            reported_base_values,
            reported_groups,
        })
    }

    pub fn base_values(&self) -> &[f64] {
        &self.reported_base_values
    }

    pub fn groups(&self) -> &[InteractionGroup] {
        &self.reported_groups
    }

    /// True when the report matches the profile field-by-field.
    pub fn matches_profile(&self, profile: &StudentProfile) -> bool {
        self.reported_base_values == profile.base_values && self.reported_groups == profile.groups
    }
}

fn validate_groups(groups: &[InteractionGroup], num_courses: usize) -> Result<(), DomainError> {
    for g in groups {
        if g.members().mask() >> num_courses.min(64) != 0 {
            return Err(DomainError::GroupMemberOutOfRange {
                members: g.member_ids(),
                num_courses,
            });
        }
    }
    // A complement group and a substitute group over the identical member
    // set would make the valuation ambiguous.
    for (i, a) in groups.iter().enumerate() {
        for b in &groups[i + 1..] {
            if a.members() == b.members() && a.kind != b.kind {
                return Err(DomainError::ConflictingGroups {
                    members: a.member_ids(),
                });
            }
        }
    }
    Ok(())
}

/// How synthetic instances are drawn: a three-tier value structure with a
/// couple of substitute and complement groups of fixed strength.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub num_high: usize,
    pub high_range: (f64, f64),
    pub max_medium: usize,
    pub medium_range: (f64, f64),
    pub low_range: (f64, f64),
    pub num_substitute_groups: usize,
    pub num_complement_groups: usize,
    pub group_size_range: (usize, usize),
    pub group_strength: f64,
}

impl Default for InstanceParams {
    fn default() -> Self {
        InstanceParams {
            num_high: 2,
            high_range: (110.0, 120.0),
            max_medium: 3,
            medium_range: (60.0, 100.0),
            low_range: (40.0, 60.0),
            num_substitute_groups: 2,
            num_complement_groups: 2,
            group_size_range: (2, 5),
            group_strength: 0.40,
        }
    }
}

/// Draws a random ground-truth profile for the catalog.
pub fn generate_profile<R: Rng + ?Sized>(
    catalog: &CourseCatalog,
    params: &InstanceParams,
    rng: &mut R,
) -> StudentProfile {
    let n = catalog.num_courses;
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, rng);

    let num_high = params.num_high.min(n);
    let num_medium = if params.max_medium == 0 {
        0
    } else {
        rng.random_range(0..=params.max_medium).min(n - num_high)
    };

    let mut base_values = vec![0.0; n];
    let mut tiers = vec![Tier::Low; n];
    for (rank, &idx) in order.iter().enumerate() {
        let (tier, range) = if rank < num_high {
            (Tier::High, params.high_range)
        } else if rank < num_high + num_medium {
            (Tier::Medium, params.medium_range)
        } else {
            (Tier::Low, params.low_range)
        };
        tiers[idx] = tier;
        base_values[idx] = rng.random_range(range.0..range.1);
    }

    let mut groups = Vec::new();
    let kinds = std::iter::repeat_n(InteractionKind::Substitute, params.num_substitute_groups)
        .chain(std::iter::repeat_n(
            InteractionKind::Complement,
            params.num_complement_groups,
        ));
    for kind in kinds {
        let (lo, hi) = params.group_size_range;
        let size = rng.random_range(lo..=hi.min(n));
        // Re-draw if the member set collides with an existing group of the
        // other kind (identical sets of opposite kinds are disallowed).
        loop {
            let members = sample_distinct_courses(n, size, rng);
            let group = InteractionGroup::new(members, kind, params.group_strength)
                .expect("generated group is valid");
            let conflict = groups
                .iter()
                .any(|g: &InteractionGroup| g.members() == group.members() && g.kind != kind);
            if !conflict {
                groups.push(group);
                break;
            }
        }
    }

    StudentProfile::new(base_values, groups, tiers).expect("generated profile is valid")
}

fn sample_distinct_courses<R: Rng + ?Sized>(n: usize, size: usize, rng: &mut R) -> Vec<CourseId> {
    let mut indices: Vec<usize> = (0..n).collect();
    shuffle(&mut indices, rng);
    indices.truncate(size);
    indices.into_iter().map(CourseId::from_index).collect()
}

fn shuffle<R: Rng + ?Sized, T>(slice: &mut [T], rng: &mut R) {
    for i in (1..slice.len()).rev() {
        let j = rng.random_range(0..=i);
        slice.swap(i, j);
    }
}
