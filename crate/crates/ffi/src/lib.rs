//! C ABI over the preference-elicitation engine: opaque handles for
//! catalogs, profiles, reports, and trained value models, plus a
//! coarse-grained JSON entry point that runs a whole student pipeline.
//!
//! Conventions: every fallible call returns a [`PeStatus`]; outputs go
//! through out-pointers; `pe_last_error_message` describes the most recent
//! failure on the calling thread; strings returned by the library are
//! released with `pe_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use prefelicit::domain::{
    best_bundle, bundle_value, corrupt, generate_profile, reported_value, true_value, Bundle,
    CourseCatalog, CourseId, GuiReport, InstanceParams, MistakeProfile, StudentProfile,
};
use prefelicit::harness::{
    generate_instances, run_student, ExperimentConfig, ProxyRunner,
};
use prefelicit::proxy::TranscriptStore;
use prefelicit::seeds::rng_from;

/// Result codes for every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidBundle = 3,
    InvalidUtf8 = 4,
    ParseError = 5,
    RunError = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: PeStatus, message: &str) -> PeStatus {
    set_error(message);
    status
}

/// Message for the last error on this thread. Valid until the next failing
/// call on the same thread; never null.
#[no_mangle]
pub extern "C" fn pe_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn pe_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Frees a string returned by this library.
///
/// # Safety
/// `ptr` must have come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pe_string_free(ptr: *mut c_char) {
    if !ptr.is_null() {
        drop(CString::from_raw(ptr));
    }
}

macro_rules! nonnull {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => return fail(PeStatus::NullPointer, concat!(stringify!($ptr), " is null")),
        }
    };
}

macro_rules! out_slot {
    ($ptr:expr) => {
        match unsafe { $ptr.as_mut() } {
            Some(r) => r,
            None => return fail(PeStatus::NullPointer, concat!(stringify!($ptr), " is null")),
        }
    };
}

fn guard<F: FnOnce() -> PeStatus>(f: F) -> PeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(PeStatus::Panic, "internal panic"),
    }
}

fn bundle_from_raw(
    catalog: &CourseCatalog,
    courses: *const u32,
    len: usize,
) -> Result<Bundle, PeStatus> {
    if len > 0 && courses.is_null() {
        set_error("course array is null");
        return Err(PeStatus::NullPointer);
    }
    let ids = unsafe { std::slice::from_raw_parts(courses, len) };
    let mut bundle = Bundle::EMPTY;
    for &id in ids {
        if id == 0 || id as usize > catalog.num_courses {
            set_error("course id out of catalog range");
            return Err(PeStatus::InvalidArgument);
        }
        bundle = bundle.with(CourseId(id as usize));
    }
    match catalog.validate_bundle(bundle) {
        Ok(()) => Ok(bundle),
        Err(e) => {
            set_error(&e.to_string());
            Err(PeStatus::InvalidBundle)
        }
    }
}

// ---------------------------------------------------------------------------
// Catalog

/// Opaque course catalog.
pub struct PeCatalog(CourseCatalog);

/// Creates a catalog; `max_bundle_size` must not exceed `num_courses`.
#[no_mangle]
pub extern "C" fn pe_catalog_new(
    num_courses: u32,
    max_bundle_size: u32,
    out: *mut *mut PeCatalog,
) -> PeStatus {
    guard(|| {
        let out = out_slot!(out);
        match CourseCatalog::new(num_courses as usize, max_bundle_size as usize) {
            Ok(catalog) => {
                *out = Box::into_raw(Box::new(PeCatalog(catalog)));
                PeStatus::Ok
            }
            Err(e) => fail(PeStatus::InvalidArgument, &e.to_string()),
        }
    })
}

/// # Safety
/// `catalog` must come from `pe_catalog_new` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pe_catalog_free(catalog: *mut PeCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Number of valid bundles (all sizes up to the maximum).
#[no_mangle]
pub extern "C" fn pe_catalog_num_bundles(catalog: *const PeCatalog, out: *mut u64) -> PeStatus {
    guard(|| {
        let catalog = nonnull!(catalog);
        let out = out_slot!(out);
        *out = catalog.0.num_bundles();
        PeStatus::Ok
    })
}

// ---------------------------------------------------------------------------
// Profiles and reports

/// Opaque ground-truth student profile.
pub struct PeProfile(StudentProfile);

/// Opaque GUI report (the student's noisy self-report).
pub struct PeReport(GuiReport);

/// Generates a random student profile for the catalog, deterministic in
/// the seed.
#[no_mangle]
pub extern "C" fn pe_profile_generate(
    catalog: *const PeCatalog,
    seed: u64,
    out: *mut *mut PeProfile,
) -> PeStatus {
    guard(|| {
        let catalog = nonnull!(catalog);
        let out = out_slot!(out);
        let profile = generate_profile(
            &catalog.0,
            &InstanceParams::default(),
            &mut rng_from(seed),
        );
        *out = Box::into_raw(Box::new(PeProfile(profile)));
        PeStatus::Ok
    })
}

/// # Safety
/// `profile` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pe_profile_free(profile: *mut PeProfile) {
    if !profile.is_null() {
        drop(Box::from_raw(profile));
    }
}

/// Serializes a profile to JSON; free the string with `pe_string_free`.
#[no_mangle]
pub extern "C" fn pe_profile_to_json(
    profile: *const PeProfile,
    out: *mut *mut c_char,
) -> PeStatus {
    guard(|| {
        let profile = nonnull!(profile);
        let out = out_slot!(out);
        match serde_json::to_string_pretty(&profile.0) {
            Ok(json) => {
                *out = CString::new(json).expect("json has no nul").into_raw();
                PeStatus::Ok
            }
            Err(e) => fail(PeStatus::RunError, &e.to_string()),
        }
    })
}

/// Parses a profile from JSON produced by `pe_profile_to_json`.
#[no_mangle]
pub extern "C" fn pe_profile_from_json(
    json: *const c_char,
    out: *mut *mut PeProfile,
) -> PeStatus {
    guard(|| {
        let out = out_slot!(out);
        if json.is_null() {
            return fail(PeStatus::NullPointer, "json is null");
        }
        let text = match unsafe { CStr::from_ptr(json) }.to_str() {
            Ok(t) => t,
            Err(_) => return fail(PeStatus::InvalidUtf8, "json is not valid UTF-8"),
        };
        match serde_json::from_str::<StudentProfile>(text) {
            Ok(profile) => {
                *out = Box::into_raw(Box::new(PeProfile(profile)));
                PeStatus::Ok
            }
            Err(e) => fail(PeStatus::ParseError, &e.to_string()),
        }
    })
}

/// True value of a bundle given as an array of 1-based course ids.
#[no_mangle]
pub extern "C" fn pe_true_value(
    catalog: *const PeCatalog,
    profile: *const PeProfile,
    courses: *const u32,
    num_courses: usize,
    out: *mut f64,
) -> PeStatus {
    guard(|| {
        let catalog = nonnull!(catalog);
        let profile = nonnull!(profile);
        let out = out_slot!(out);
        let bundle = match bundle_from_raw(&catalog.0, courses, num_courses) {
            Ok(b) => b,
            Err(status) => return status,
        };
        match true_value(&catalog.0, &profile.0, bundle) {
            Ok(v) => {
                *out = v;
                PeStatus::Ok
            }
            Err(e) => fail(PeStatus::InvalidBundle, &e.to_string()),
        }
    })
}

/// Corrupts a profile into a GUI report under the given mistake
/// parameters, deterministic in the seed.
#[no_mangle]
pub extern "C" fn pe_report_corrupt(
    profile: *const PeProfile,
    value_noise_std: f64,
    group_omission_prob: f64,
    strength_noise_std: f64,
    gamma: f64,
    seed: u64,
    out: *mut *mut PeReport,
) -> PeStatus {
    guard(|| {
        let profile = nonnull!(profile);
        let out = out_slot!(out);
        if !(0.0..=1.0).contains(&group_omission_prob)
            || value_noise_std < 0.0
            || strength_noise_std < 0.0
            || gamma < 0.0
        {
            return fail(PeStatus::InvalidArgument, "mistake parameters out of range");
        }
        let mistakes = MistakeProfile {
            value_noise_std,
            group_omission_prob,
            strength_noise_std,
            gamma,
        };
        let report = corrupt(&profile.0, &mistakes, &mut rng_from(seed));
        *out = Box::into_raw(Box::new(PeReport(report)));
        PeStatus::Ok
    })
}

/// # Safety
/// `report` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pe_report_free(report: *mut PeReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Value of a bundle under the GUI report.
#[no_mangle]
pub extern "C" fn pe_reported_value(
    catalog: *const PeCatalog,
    report: *const PeReport,
    courses: *const u32,
    num_courses: usize,
    out: *mut f64,
) -> PeStatus {
    guard(|| {
        let catalog = nonnull!(catalog);
        let report = nonnull!(report);
        let out = out_slot!(out);
        let bundle = match bundle_from_raw(&catalog.0, courses, num_courses) {
            Ok(b) => b,
            Err(status) => return status,
        };
        match reported_value(&catalog.0, &report.0, bundle) {
            Ok(v) => {
                *out = v;
                PeStatus::Ok
            }
            Err(e) => fail(PeStatus::InvalidBundle, &e.to_string()),
        }
    })
}

fn write_best_bundle(
    bundle: Bundle,
    value: f64,
    out_courses: *mut u32,
    capacity: usize,
    out_len: *mut usize,
    out_value: *mut f64,
) -> PeStatus {
    let out_len = match unsafe { out_len.as_mut() } {
        Some(r) => r,
        None => return fail(PeStatus::NullPointer, "out_len is null"),
    };
    let out_value = match unsafe { out_value.as_mut() } {
        Some(r) => r,
        None => return fail(PeStatus::NullPointer, "out_value is null"),
    };
    let ids: Vec<u32> = bundle.courses().map(|c| c.0 as u32).collect();
    if ids.len() > capacity {
        *out_len = ids.len();
        return fail(
            PeStatus::InvalidArgument,
            "out_courses capacity too small for the best bundle",
        );
    }
    if !ids.is_empty() {
        if out_courses.is_null() {
            return fail(PeStatus::NullPointer, "out_courses is null");
        }
        unsafe { std::ptr::copy_nonoverlapping(ids.as_ptr(), out_courses, ids.len()) };
    }
    *out_len = ids.len();
    *out_value = value;
    PeStatus::Ok
}

/// Exact argmax bundle under the true valuation; writes the course ids and
/// the value. `capacity` must be at least the catalog's maximum bundle
/// size.
#[no_mangle]
pub extern "C" fn pe_best_bundle_true(
    catalog: *const PeCatalog,
    profile: *const PeProfile,
    out_courses: *mut u32,
    capacity: usize,
    out_len: *mut usize,
    out_value: *mut f64,
) -> PeStatus {
    guard(|| {
        let catalog = nonnull!(catalog);
        let profile = nonnull!(profile);
        let (bundle, value) = best_bundle(&catalog.0, |b| {
            bundle_value(profile.0.base_values(), profile.0.groups(), b)
        });
        write_best_bundle(bundle, value, out_courses, capacity, out_len, out_value)
    })
}

/// Exact argmax bundle under the GUI report.
#[no_mangle]
pub extern "C" fn pe_best_bundle_reported(
    catalog: *const PeCatalog,
    report: *const PeReport,
    out_courses: *mut u32,
    capacity: usize,
    out_len: *mut usize,
    out_value: *mut f64,
) -> PeStatus {
    guard(|| {
        let catalog = nonnull!(catalog);
        let report = nonnull!(report);
        let (bundle, value) = best_bundle(&catalog.0, |b| {
            bundle_value(report.0.base_values(), report.0.groups(), b)
        });
        write_best_bundle(bundle, value, out_courses, capacity, out_len, out_value)
    })
}

// ---------------------------------------------------------------------------
// Whole-pipeline entry point

/// Runs one student's full elicitation pipeline (simulated proxy only)
/// from a TOML experiment configuration, returning the result as JSON.
/// Free the string with `pe_string_free`.
#[no_mangle]
pub extern "C" fn pe_run_student(
    config_toml: *const c_char,
    student_index: usize,
    out_json: *mut *mut c_char,
) -> PeStatus {
    guard(|| {
        let out_json = out_slot!(out_json);
        if config_toml.is_null() {
            return fail(PeStatus::NullPointer, "config_toml is null");
        }
        let text = match unsafe { CStr::from_ptr(config_toml) }.to_str() {
            Ok(t) => t,
            Err(_) => return fail(PeStatus::InvalidUtf8, "config is not valid UTF-8"),
        };
        let cfg: ExperimentConfig = match toml_from_str(text) {
            Ok(cfg) => cfg,
            Err(e) => return fail(PeStatus::ParseError, &e),
        };
        if let Err(e) = cfg.validate() {
            return fail(PeStatus::InvalidArgument, &e.to_string());
        }
        if student_index >= cfg.num_students {
            return fail(
                PeStatus::InvalidArgument,
                "student_index out of num_students range",
            );
        }
        let instance = generate_instances(&cfg)
            .into_iter()
            .nth(student_index)
            .expect("index checked");
        let proxy = ProxyRunner::Simulated {
            accuracy: cfg.proxy.accuracy,
        };
        match run_student(&cfg, &instance, &proxy, &TranscriptStore::disabled()) {
            Ok(result) => match serde_json::to_string_pretty(&result) {
                Ok(json) => {
                    *out_json = CString::new(json).expect("json has no nul").into_raw();
                    PeStatus::Ok
                }
                Err(e) => fail(PeStatus::RunError, &e.to_string()),
            },
            Err(e) => fail(PeStatus::RunError, &e.to_string()),
        }
    })
}

// toml is re-exported through the core crate's config loader; parse via
// serde to keep this crate's dependency list minimal.
fn toml_from_str(text: &str) -> Result<ExperimentConfig, String> {
    prefelicit::harness::config::parse_toml(text).map_err(|e| e.to_string())
}
