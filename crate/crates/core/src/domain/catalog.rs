//! Course catalog, bundles, and bundle enumeration.
//!
//! A bundle is a subset of the catalog's courses, stored as a bit mask so
//! that set operations (intersection with interaction groups, popcount,
//! hashing into query histories) stay allocation-free. The mask
//! representation caps catalogs at 64 courses, which comfortably covers the
//! 25-course instances the experiments run on.

use serde::{Deserialize, Serialize};
use std::fmt;

use super::DomainError;

/// Maximum number of courses a catalog may hold (bundles are u64 masks).
pub const MAX_COURSES: usize = 64;

/// 1-based course identifier, displayed as "Course N".
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CourseId(pub usize);

impl CourseId {
    /// Zero-based index into per-course arrays.
    pub fn index(self) -> usize {
        debug_assert!(self.0 >= 1);
        self.0 - 1
    }

    pub fn from_index(index: usize) -> Self {
        CourseId(index + 1)
    }
}

impl fmt::Display for CourseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Course {}", self.0)
    }
}

/// A set of courses encoded as a bit mask (bit i set = course i+1 present).
///
/// Validity with respect to a catalog (membership range and the maximum
/// bundle size) is checked by [`CourseCatalog::validate_bundle`]; the type
/// itself is just a compact course set.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bundle {
    mask: u64,
}

impl Bundle {
    pub const EMPTY: Bundle = Bundle { mask: 0 };

    pub fn from_mask(mask: u64) -> Self {
        Bundle { mask }
    }

    pub fn from_courses<I: IntoIterator<Item = CourseId>>(courses: I) -> Self {
        let mut mask = 0u64;
        for c in courses {
            debug_assert!(c.index() < MAX_COURSES);
            mask |= 1u64 << c.index();
        }
        Bundle { mask }
    }

    /// Convenience constructor from 1-based course ids.
    pub fn from_ids(ids: &[usize]) -> Self {
        Self::from_courses(ids.iter().map(|&id| CourseId(id)))
    }

    pub fn mask(self) -> u64 {
        self.mask
    }

    pub fn contains(self, course: CourseId) -> bool {
        self.mask & (1u64 << course.index()) != 0
    }

    pub fn with(self, course: CourseId) -> Self {
        Bundle {
            mask: self.mask | (1u64 << course.index()),
        }
    }

    pub fn size(self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.mask == 0
    }

    pub fn intersection(self, other: Bundle) -> Bundle {
        Bundle {
            mask: self.mask & other.mask,
        }
    }

    /// Courses in this bundle, ascending by id.
    pub fn courses(self) -> impl Iterator<Item = CourseId> {
        let mut rest = self.mask;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let idx = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(CourseId::from_index(idx))
            }
        })
    }

    /// Key whose numeric order equals lexicographic order of the incidence
    /// vector (course 1 first). Used for deterministic tie-breaking.
    pub fn lex_key(self, num_courses: usize) -> u64 {
        debug_assert!(num_courses <= MAX_COURSES);
        self.mask.reverse_bits() >> (MAX_COURSES - num_courses)
    }
}

impl fmt::Debug for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bundle{{")?;
        let mut first = true;
        for c in self.courses() {
            if !first {
                write!(f, ",")?;
            }
            write!(f, "{}", c.0)?;
            first = false;
        }
        write!(f, "}}")
    }
}

impl Serialize for Bundle {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let ids: Vec<usize> = self.courses().map(|c| c.0).collect();
        ids.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Bundle {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let ids = Vec::<usize>::deserialize(deserializer)?;
        for &id in &ids {
            if id == 0 || id > MAX_COURSES {
                return Err(serde::de::Error::custom(format!(
                    "course id {id} out of range 1..={MAX_COURSES}"
                )));
            }
        }
        Ok(Bundle::from_ids(&ids))
    }
}

/// The fixed course catalog an experiment runs over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseCatalog {
    pub num_courses: usize,
    pub max_bundle_size: usize,
}

impl Default for CourseCatalog {
    fn default() -> Self {
        CourseCatalog {
            num_courses: 25,
            max_bundle_size: 5,
        }
    }
}

impl CourseCatalog {
    pub fn new(num_courses: usize, max_bundle_size: usize) -> Result<Self, DomainError> {
        if max_bundle_size < 1 || num_courses < max_bundle_size {
            return Err(DomainError::InvalidCatalog {
                num_courses,
                max_bundle_size,
            });
        }
        if num_courses > MAX_COURSES {
            return Err(DomainError::CatalogTooLarge { num_courses });
        }
        Ok(CourseCatalog {
            num_courses,
            max_bundle_size,
        })
    }

    pub fn courses(&self) -> impl Iterator<Item = CourseId> {
        (1..=self.num_courses).map(CourseId)
    }

    pub fn contains(&self, course: CourseId) -> bool {
        course.0 >= 1 && course.0 <= self.num_courses
    }

    pub fn is_valid_bundle(&self, bundle: Bundle) -> bool {
        let in_range = bundle.mask() >> self.num_courses == 0;
        in_range && bundle.size() <= self.max_bundle_size
    }

    pub fn validate_bundle(&self, bundle: Bundle) -> Result<(), DomainError> {
        if self.is_valid_bundle(bundle) {
            Ok(())
        } else {
            Err(DomainError::InvalidBundle {
                size: bundle.size(),
                max_bundle_size: self.max_bundle_size,
                num_courses: self.num_courses,
            })
        }
    }

    /// Number of valid bundles: sum of C(n, k) for k = 0..=max_bundle_size.
    pub fn num_bundles(&self) -> u64 {
        (0..=self.max_bundle_size)
            .map(|k| binomial(self.num_courses, k))
            .sum()
    }

    /// Every valid bundle exactly once: sizes ascending, masks ascending
    /// within a size class.
    pub fn enumerate_bundles(&self) -> BundleIter {
        BundleIter {
            num_courses: self.num_courses,
            max_size: self.max_bundle_size,
            current_size: 0,
            next_mask: Some(0),
        }
    }

    /// Uniform draw over all valid bundles (size class weighted by its
    /// cardinality, then a uniform subset of that size).
    pub fn sample_bundle<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Bundle {
        let total = self.num_bundles();
        let mut target = rng.random_range(0..total);
        let mut size = 0;
        for k in 0..=self.max_bundle_size {
            let count = binomial(self.num_courses, k);
            if target < count {
                size = k;
                break;
            }
            target -= count;
        }
        let mut mask = 0u64;
        let mut chosen = 0;
        // Floyd's algorithm for a uniform k-subset.
        for j in (self.num_courses - size)..self.num_courses {
            let t = rng.random_range(0..=j);
            if mask & (1u64 << t) == 0 {
                mask |= 1u64 << t;
            } else {
                mask |= 1u64 << j;
            }
            chosen += 1;
        }
        debug_assert_eq!(chosen, size);
        Bundle::from_mask(mask)
    }
}

/// Iterator over all bundles of size <= max, grouped by size, using Gosper's
/// hack to advance within a size class.
pub struct BundleIter {
    num_courses: usize,
    max_size: usize,
    current_size: usize,
    next_mask: Option<u64>,
}

impl Iterator for BundleIter {
    type Item = Bundle;

    fn next(&mut self) -> Option<Bundle> {
        loop {
            if let Some(mask) = self.next_mask {
                self.next_mask = gosper_next(mask, self.num_courses);
                return Some(Bundle::from_mask(mask));
            }
            if self.current_size >= self.max_size {
                return None;
            }
            self.current_size += 1;
            if self.current_size > self.num_courses {
                return None;
            }
            self.next_mask = Some((1u64 << self.current_size) - 1);
        }
    }
}

fn gosper_next(mask: u64, num_courses: usize) -> Option<u64> {
    if mask == 0 {
        return None;
    }
    let c = mask & mask.wrapping_neg();
    let r = mask + c;
    let next = (((r ^ mask) >> 2) / c) | r;
    if next >> num_courses == 0 {
        Some(next)
    } else {
        None
    }
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result = 1u64;
    for i in 0..k {
        result = result * (n - i) as u64 / (i + 1) as u64;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_roundtrip_and_ops() {
        let b = Bundle::from_ids(&[3, 1, 7]);
        assert_eq!(b.size(), 3);
        assert!(b.contains(CourseId(1)));
        assert!(b.contains(CourseId(7)));
        assert!(!b.contains(CourseId(2)));
        let ids: Vec<usize> = b.courses().map(|c| c.0).collect();
        assert_eq!(ids, vec![1, 3, 7]);
    }

    #[test]
    fn catalog_invariants() {
        assert!(CourseCatalog::new(25, 5).is_ok());
        assert!(CourseCatalog::new(1, 1).is_ok());
        assert!(CourseCatalog::new(4, 5).is_err());
        assert!(CourseCatalog::new(5, 0).is_err());
        assert!(CourseCatalog::new(65, 5).is_err());
    }

    #[test]
    fn bundle_validation() {
        let cat = CourseCatalog::new(5, 2).unwrap();
        assert!(cat.validate_bundle(Bundle::from_ids(&[1, 5])).is_ok());
        assert!(cat.validate_bundle(Bundle::EMPTY).is_ok());
        assert!(cat.validate_bundle(Bundle::from_ids(&[1, 2, 3])).is_err());
        assert!(cat.validate_bundle(Bundle::from_ids(&[6])).is_err());
    }

    #[test]
    fn enumeration_counts() {
        // 25 choose 0..=5 sums to 68,406.
        let cat = CourseCatalog::new(25, 5).unwrap();
        assert_eq!(cat.num_bundles(), 68_406);
        assert_eq!(cat.enumerate_bundles().count(), 68_406);

        // Power set of 3 courses.
        let cat = CourseCatalog::new(3, 3).unwrap();
        assert_eq!(cat.enumerate_bundles().count(), 8);

        // 1 + 5 + 10.
        let cat = CourseCatalog::new(5, 2).unwrap();
        assert_eq!(cat.num_bundles(), 16);
        assert_eq!(cat.enumerate_bundles().count(), 16);
    }

    #[test]
    fn enumeration_unique_and_valid() {
        let cat = CourseCatalog::new(10, 4).unwrap();
        let all: Vec<Bundle> = cat.enumerate_bundles().collect();
        let mut seen = std::collections::HashSet::new();
        for b in &all {
            assert!(cat.is_valid_bundle(*b));
            assert!(seen.insert(*b), "duplicate bundle {b:?}");
        }
        assert_eq!(all.len() as u64, cat.num_bundles());
    }

    #[test]
    fn lex_key_orders_incidence_vectors() {
        let n = 4;
        // (0,1,0,0) < (1,0,0,0) lexicographically.
        let just_2 = Bundle::from_ids(&[2]);
        let just_1 = Bundle::from_ids(&[1]);
        assert!(just_2.lex_key(n) < just_1.lex_key(n));
        // Empty is smallest.
        assert!(Bundle::EMPTY.lex_key(n) < just_2.lex_key(n));
    }

    #[test]
    fn uniform_sampling_hits_all_size_classes() {
        use rand::SeedableRng;
        let cat = CourseCatalog::new(6, 3).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let mut counts = [0usize; 4];
        let draws = 20_000;
        for _ in 0..draws {
            let b = cat.sample_bundle(&mut rng);
            assert!(cat.is_valid_bundle(b));
            counts[b.size()] += 1;
        }
        // Expected proportions follow the size-class cardinalities
        // (1, 6, 15, 20 of 42 total).
        let total = cat.num_bundles() as f64;
        for (k, &count) in counts.iter().enumerate() {
            let expect = binomial(6, k) as f64 / total;
            let got = count as f64 / draws as f64;
            assert!(
                (got - expect).abs() < 0.02,
                "size {k}: got {got}, expect {expect}"
            );
        }
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(25, 5), 53_130);
        assert_eq!(binomial(25, 0), 1);
        assert_eq!(binomial(5, 6), 0);
    }
}
