//! C ABI for `plateau-rt`.
//!
//! Every fallible function returns a [`PlateauStatus`] and writes results
//! through out-pointers. Schedules and simulation reports are opaque handles
//! owned by the caller and released with their `_free` function. After a
//! non-`Ok` status, [`plateau_last_error`] describes what went wrong on the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use plateau_rt::asymptotics;
use plateau_rt::runtime_formulas::{
    blo_total_time, needle_time_excluding_optimum, needle_time_uniform_start, EstimateMethod,
};
use plateau_rt::simulator::{self, SimulationConfig, SimulationReport};
use plateau_rt::{Error, MutationRate, MutationSchedule, ProblemSpec, RuntimeEstimate};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateauStatus {
    Ok = 0,
    InvalidArgument = 1,
    /// A size limit was exceeded (for example an oracle state count).
    Capacity = 2,
    /// The value does not fit in a double; `log2_value` is still valid.
    Overflow = 3,
    NullPointer = 4,
    Internal = 5,
    /// Some simulation trials hit the iteration cap; the report is still returned.
    Capped = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateauMethod {
    ExactFourier = 0,
    Asymptotic = 1,
    Oracle = 2,
    MonteCarlo = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateauProblem {
    Needle = 0,
    BlockLeadingOnes = 1,
}

/// An expected iteration count.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauEstimate {
    /// `+inf` when `overflow` is set.
    pub value: f64,
    pub log2_value: f64,
    /// Standard error of a Monte Carlo estimate, NaN otherwise.
    pub std_error: f64,
    pub method: PlateauMethod,
    pub overflow: bool,
}

/// Opaque mutation schedule.
pub struct PlateauSchedule(MutationSchedule);

/// Opaque simulation report.
pub struct PlateauReport(SimulationReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PlateauStatus {
    match err {
        Error::Capacity { .. } => PlateauStatus::Capacity,
        Error::Solver(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => PlateauStatus::Internal,
        _ => PlateauStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F>(f: F) -> PlateauStatus
where
    F: FnOnce() -> Result<PlateauStatus, Error>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(status)) => status,
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".to_owned());
            PlateauStatus::Internal
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(format!("{} is NULL", stringify!($p)));
            return PlateauStatus::NullPointer;
        })+
    };
}

impl From<RuntimeEstimate> for PlateauEstimate {
    fn from(e: RuntimeEstimate) -> Self {
        Self {
            value: e.value,
            log2_value: e.log2_value,
            std_error: e.stderr.unwrap_or(f64::NAN),
            method: match e.method {
                EstimateMethod::ExactFourier => PlateauMethod::ExactFourier,
                EstimateMethod::Asymptotic => PlateauMethod::Asymptotic,
                EstimateMethod::Oracle => PlateauMethod::Oracle,
                EstimateMethod::MonteCarlo => PlateauMethod::MonteCarlo,
            },
            overflow: e.overflow,
        }
    }
}

/// Writes `e` to `out` and reports `Overflow` when the value is not finite.
unsafe fn write_estimate(e: RuntimeEstimate, out: *mut PlateauEstimate) -> PlateauStatus {
    *out = e.into();
    if e.overflow {
        set_error(format!(
            "value exceeds the double range; log2 = {}",
            e.log2_value
        ));
        PlateauStatus::Overflow
    } else {
        PlateauStatus::Ok
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn plateau_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`) and returns its full length in bytes,
/// excluding the NUL. Returns 0 when there is no error.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn plateau_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Expected iterations to reach `1^ell` from a uniform start, or from a
/// uniform non-optimal start when `exclude_optimum` is set.
///
/// # Safety
/// `out` must point to a writable `PlateauEstimate`.
#[no_mangle]
pub unsafe extern "C" fn plateau_needle_time(
    ell: usize,
    p: f64,
    exclude_optimum: bool,
    out: *mut PlateauEstimate,
) -> PlateauStatus {
    non_null!(out);
    guard(|| {
        let rate = MutationRate::new(p)?;
        let e = if exclude_optimum {
            needle_time_excluding_optimum(ell, rate)?
        } else {
            needle_time_uniform_start(ell, rate)?
        };
        Ok(write_estimate(e, out))
    })
}

unsafe fn new_schedule(sched: MutationSchedule, out: *mut *mut PlateauSchedule) -> PlateauStatus {
    *out = Box::into_raw(Box::new(PlateauSchedule(sched)));
    PlateauStatus::Ok
}

/// A schedule using rate `p` at every fitness level.
///
/// # Safety
/// `out` must point to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn plateau_schedule_static(
    p: f64,
    out: *mut *mut PlateauSchedule,
) -> PlateauStatus {
    non_null!(out);
    guard(|| {
        Ok(new_schedule(
            MutationSchedule::Static(MutationRate::new(p)?),
            out,
        ))
    })
}

/// A schedule with one rate per fitness level `0..len`.
///
/// # Safety
/// `rates` must point to `len` readable doubles; `out` to writable handle storage.
#[no_mangle]
pub unsafe extern "C" fn plateau_schedule_table(
    rates: *const f64,
    len: usize,
    out: *mut *mut PlateauSchedule,
) -> PlateauStatus {
    non_null!(rates, out);
    guard(|| {
        let rates = std::slice::from_raw_parts(rates, len)
            .iter()
            .map(|&p| MutationRate::new(p))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(new_schedule(MutationSchedule::Table(rates), out))
    })
}

/// The per-level numerically optimal schedule.
///
/// # Safety
/// `out` must point to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn plateau_schedule_adaptive(
    out: *mut *mut PlateauSchedule,
) -> PlateauStatus {
    non_null!(out);
    new_schedule(MutationSchedule::AdaptiveOptimal, out)
}

/// Releases a schedule. NULL is ignored.
///
/// # Safety
/// `sched` must be NULL or a handle from a `plateau_schedule_*` constructor, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plateau_schedule_free(sched: *mut PlateauSchedule) {
    if !sched.is_null() {
        drop(Box::from_raw(sched));
    }
}

/// Exact expected optimization time on BlockLeadingOnes with `n/ell` blocks.
///
/// # Safety
/// `sched` must be a live schedule handle and `out` a writable `PlateauEstimate`.
#[no_mangle]
pub unsafe extern "C" fn plateau_blo_total_time(
    n: usize,
    ell: usize,
    sched: *const PlateauSchedule,
    out: *mut PlateauEstimate,
) -> PlateauStatus {
    non_null!(sched, out);
    guard(|| {
        let spec = ProblemSpec::block_leading_ones(n, ell)?;
        Ok(write_estimate(blo_total_time(&spec, &(*sched).0)?, out))
    })
}

/// The numerically optimal rate at fitness level `m`; `boundary` reports
/// whether it sits at the edge of the search interval.
///
/// # Safety
/// `rate` and `boundary` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plateau_optimal_adaptive_rate(
    m: usize,
    ell: usize,
    rate: *mut f64,
    boundary: *mut bool,
) -> PlateauStatus {
    non_null!(rate, boundary);
    guard(|| {
        let r = asymptotics::optimal_adaptive_rate_exact(m, ell)?;
        *rate = r.rate.get();
        *boundary = r.boundary;
        Ok(PlateauStatus::Ok)
    })
}

/// The constants λ and α of the optimal static rate λ/n.
///
/// # Safety
/// `lambda` and `alpha` must be writable.
#[no_mangle]
pub unsafe extern "C" fn plateau_static_optimum(
    lambda: *mut f64,
    alpha: *mut f64,
) -> PlateauStatus {
    non_null!(lambda, alpha);
    let opt = asymptotics::static_optimum();
    *lambda = opt.lambda;
    *alpha = opt.alpha;
    PlateauStatus::Ok
}

/// Runs `trials` seeded trials of the (1+1) EA. For `Needle`, `n` is ignored
/// and set to `ell`. A `cap` of 0 selects the default iteration cap.
///
/// On `Ok` and `Capped` a report handle is written to `out`.
///
/// # Safety
/// `sched` must be a live schedule handle and `out` writable handle storage.
#[no_mangle]
pub unsafe extern "C" fn plateau_simulate(
    problem: PlateauProblem,
    n: usize,
    ell: usize,
    sched: *const PlateauSchedule,
    trials: usize,
    seed: u64,
    cap: u64,
    out: *mut *mut PlateauReport,
) -> PlateauStatus {
    non_null!(sched, out);
    guard(|| {
        let spec = match problem {
            PlateauProblem::Needle => ProblemSpec::needle(ell)?,
            PlateauProblem::BlockLeadingOnes => ProblemSpec::block_leading_ones(n, ell)?,
        };
        let mut config = SimulationConfig::new(spec, (*sched).0.clone(), trials, seed)?;
        if cap > 0 {
            config.iteration_cap = cap;
        }
        let report = simulator::run(&config)?;
        let status = if report.capped_trials > 0 {
            set_error(format!(
                "{} trials hit the iteration cap",
                report.capped_trials
            ));
            PlateauStatus::Capped
        } else {
            PlateauStatus::Ok
        };
        *out = Box::into_raw(Box::new(PlateauReport(report)));
        Ok(status)
    })
}

/// Sample mean and standard error over completed trials.
///
/// # Safety
/// `report` must be a live report handle and `out` a writable `PlateauEstimate`.
#[no_mangle]
pub unsafe extern "C" fn plateau_report_estimate(
    report: *const PlateauReport,
    out: *mut PlateauEstimate,
) -> PlateauStatus {
    non_null!(report, out);
    *out = (*report).0.estimate().into();
    PlateauStatus::Ok
}

/// Number of trials that reached the optimum; 0 for a NULL handle.
///
/// # Safety
/// `report` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn plateau_report_trials_completed(report: *const PlateauReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.trials_completed)
}

/// Number of trials stopped by the iteration cap; 0 for a NULL handle.
///
/// # Safety
/// `report` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn plateau_report_capped_trials(report: *const PlateauReport) -> usize {
    report.as_ref().map_or(0, |r| r.0.capped_trials)
}

/// Copies up to `len` per-trial iteration counts into `buf` in trial order and
/// writes the total number of trials to `total`. Capped trials report the cap.
///
/// # Safety
/// `report` must be a live report handle, `buf` NULL or `len` writable
/// `uint64_t`s, and `total` writable.
#[no_mangle]
pub unsafe extern "C" fn plateau_report_iterations(
    report: *const PlateauReport,
    buf: *mut u64,
    len: usize,
    total: *mut usize,
) -> PlateauStatus {
    non_null!(report, total);
    let records = &(*report).0.records;
    if !buf.is_null() {
        for (i, r) in records.iter().take(len).enumerate() {
            *buf.add(i) = r.iterations;
        }
    }
    *total = records.len();
    PlateauStatus::Ok
}

/// Releases a report. NULL is ignored.
///
/// # Safety
/// `report` must be NULL or a handle from [`plateau_simulate`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plateau_report_free(report: *mut PlateauReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(
            status_of(&Error::InvalidRate(2.0)),
            PlateauStatus::InvalidArgument
        );
        assert_eq!(
            status_of(&Error::Capacity {
                what: "ell",
                value: 30,
                limit: 24,
                hint: ""
            }),
            PlateauStatus::Capacity
        );
        assert_eq!(
            status_of(&Error::Solver("x".into())),
            PlateauStatus::Internal
        );
    }

    #[test]
    fn panics_become_internal() {
        assert_eq!(guard(|| panic!("boom")), PlateauStatus::Internal);
        let mut buf = [0 as c_char; 32];
        let n = unsafe { plateau_last_error(buf.as_mut_ptr(), buf.len()) };
        assert_eq!(n, "internal panic".len());
    }
}
