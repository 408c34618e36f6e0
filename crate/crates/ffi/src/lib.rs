//! C ABI for `spincorr`.
//!
//! Simulators and accumulators are exposed as opaque handles created by
//! `*_new` and released by `*_free`. Every fallible call returns a
//! [`SpcStatus`]; on failure [`spc_last_error_message`] describes the error
//! for the calling thread. Angles are in radians and projections are
//! doubled integers (`2m`).

use std::cell::RefCell;
use std::ffi::{c_void, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use spincorr::estimators::{
    chsh, conservation_residual, grouped_correlation, plain_correlation, AccumulatorState,
    CorrelationEstimate,
};
use spincorr::eventlog::{accumulate_file, write_events, EventFileHeader};
use spincorr::models::{
    lhv_linear_corr, qm_joint_prob, spin_s_corr, ConditionalKind, EventRecord, ModelSpec, Outcome,
    Setting, Sign, Simulator, SpinMagnitude,
};
use spincorr::optimizer::{maximize_chsh, violation_scan};
use spincorr::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpcStatus {
    Ok = 0,
    NullPointer = 1,
    Validation = 2,
    InsufficientData = 3,
    Config = 4,
    Evaluation = 5,
    Parse = 6,
    Data = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpcModel {
    QmSingletHalf = 0,
    LhvLinear = 1,
    ConservationExtremal = 2,
    ConservationAdjacent = 3,
}

/// One joint measurement with planar settings.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpcEvent {
    pub seq: u64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub two_m_a: i32,
    pub two_m_b: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpcEstimate {
    pub value: f64,
    pub se: f64,
    pub normalized: f64,
    pub normalized_se: f64,
    pub n: u64,
}

/// Residual for one group; `defined` is false for an empty group and the
/// numeric fields are then NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpcGroupResidual {
    pub two_m_a: i32,
    pub n: u64,
    pub defined: bool,
    pub residual: f64,
    pub se: f64,
    pub normalized_residual: f64,
    pub normalized_se: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpcChshConfiguration {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
    pub m_value: f64,
}

type CorrelationFnPtr = extern "C" fn(theta: f64, user_data: *mut c_void) -> f64;

/// Correlation callback: relative angle in `[0, π]` and the user pointer.
pub type SpcCorrelationFn = Option<extern "C" fn(theta: f64, user_data: *mut c_void) -> f64>;

/// Opaque simulator handle.
pub struct SpcSimulator(Simulator);

/// Opaque accumulator handle.
pub struct SpcAccumulator(AccumulatorState);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SpcStatus {
    match err {
        Error::Validation(_) => SpcStatus::Validation,
        Error::InsufficientData(_) => SpcStatus::InsufficientData,
        Error::Config(_) => SpcStatus::Config,
        Error::Evaluation { .. } => SpcStatus::Evaluation,
        Error::Parse { .. } => SpcStatus::Parse,
        Error::Data { .. } => SpcStatus::Data,
        Error::Io(_) => SpcStatus::Io,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard<F>(f: F) -> SpcStatus
where
    F: FnOnce() -> Result<(), Failure>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SpcStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            SpcStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside spincorr".to_string());
            SpcStatus::Panic
        }
    }
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure::Lib(Error::Validation("path is not valid UTF-8".into())))
}

fn model_spec(model: SpcModel, two_s: u32) -> Result<ModelSpec, Error> {
    let spin = SpinMagnitude::new(two_s)?;
    let m = match model {
        SpcModel::QmSingletHalf => ModelSpec::QmSingletHalf,
        SpcModel::LhvLinear => ModelSpec::LhvLinear,
        SpcModel::ConservationExtremal => ModelSpec::ConservationSpin {
            spin,
            kind: ConditionalKind::Extremal,
        },
        SpcModel::ConservationAdjacent => ModelSpec::ConservationSpin {
            spin,
            kind: ConditionalKind::Adjacent,
        },
    };
    if m.spin() != spin {
        return Err(Error::Validation(format!(
            "model {model:?} requires two_s = 1, got {two_s}"
        )));
    }
    Ok(m)
}

fn sign(v: i32) -> Result<Sign, Error> {
    match v {
        1 => Ok(Sign::Plus),
        -1 => Ok(Sign::Minus),
        other => Err(Error::Validation(format!("outcome {other} is not ±1"))),
    }
}

fn estimate(e: &CorrelationEstimate) -> SpcEstimate {
    SpcEstimate {
        value: e.value,
        se: e.se,
        normalized: e.normalized,
        normalized_se: e.normalized_se,
        n: e.n,
    }
}

fn event_out(ev: &EventRecord) -> SpcEvent {
    SpcEvent {
        seq: ev.seq,
        theta_a: ev.setting_a.planar_angle().unwrap_or(f64::NAN),
        theta_b: ev.setting_b.planar_angle().unwrap_or(f64::NAN),
        two_m_a: ev.outcome_a.two_m(),
        two_m_b: ev.outcome_b.two_m(),
    }
}

/// Message for the most recent failure on this thread, or NULL. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn spc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---- analytic functions --------------------------------------------------

/// # Safety
/// `out` must be a valid pointer to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn spc_qm_joint_prob(theta: f64, oa: i32, ob: i32, out: *mut f64) -> SpcStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = qm_joint_prob(theta, sign(oa)?, sign(ob)?)?;
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn spc_lhv_linear_corr(theta: f64, out: *mut f64) -> SpcStatus {
    guard(|| {
        *out_ref(out, "out")? = lhv_linear_corr(theta)?;
        Ok(())
    })
}

/// `−cos θ · S(S+1)/3` in ħ² units.
///
/// # Safety
/// `out` must be a valid pointer to a writable `double`.
#[no_mangle]
pub unsafe extern "C" fn spc_spin_s_corr(two_s: u32, theta: f64, out: *mut f64) -> SpcStatus {
    guard(|| {
        *out_ref(out, "out")? = spin_s_corr(SpinMagnitude::new(two_s)?, theta)?;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn spc_chsh(p_ab: f64, p_abp: f64, p_apbp: f64, p_apb: f64) -> f64 {
    chsh(p_ab, p_abp, p_apbp, p_apb)
}

// ---- simulator -----------------------------------------------------------

/// Create a simulator for planar settings `theta_a`, `theta_b`.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to be
/// released with [`spc_simulator_free`].
#[no_mangle]
pub unsafe extern "C" fn spc_simulator_new(
    model: SpcModel,
    two_s: u32,
    theta_a: f64,
    theta_b: f64,
    seed: u64,
    out: *mut *mut SpcSimulator,
) -> SpcStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let sim = Simulator::new(
            model_spec(model, two_s)?,
            Setting::from_angle(theta_a),
            Setting::from_angle(theta_b),
            seed,
        )?;
        *out = Box::into_raw(Box::new(SpcSimulator(sim)));
        Ok(())
    })
}

/// # Safety
/// `sim` must be NULL or a handle from [`spc_simulator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spc_simulator_free(sim: *mut SpcSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// # Safety
/// `sim` must be a live simulator handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spc_simulator_event(
    sim: *const SpcSimulator,
    seq: u64,
    out: *mut SpcEvent,
) -> SpcStatus {
    guard(|| {
        let sim = in_ref(sim, "sim")?;
        *out_ref(out, "out")? = event_out(&sim.0.event(seq));
        Ok(())
    })
}

/// Merge events `start .. start + count` into `acc`.
///
/// # Safety
/// `sim` and `acc` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn spc_simulator_accumulate(
    sim: *const SpcSimulator,
    start: u64,
    count: u64,
    acc: *mut SpcAccumulator,
) -> SpcStatus {
    guard(|| {
        let sim = in_ref(sim, "sim")?;
        let acc = out_ref(acc, "acc")?;
        let end = start
            .checked_add(count)
            .ok_or_else(|| Error::Validation("seq range overflows".into()))?;
        acc.0.merge(&sim.0.accumulate(start..end))?;
        Ok(())
    })
}

/// Write `events` simulated events to a CSV event file at `path`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn spc_simulate_to_file(
    path: *const c_char,
    model: SpcModel,
    two_s: u32,
    theta: f64,
    seed: u64,
    events: u64,
) -> SpcStatus {
    guard(|| {
        let path = path_arg(path)?;
        let model = model_spec(model, two_s)?;
        let sim = Simulator::planar(model, theta, seed)?;
        let file = File::create(&path).map_err(Error::from)?;
        write_events(&EventFileHeader::new(model, seed, events), sim.events(0..events), file)?;
        Ok(())
    })
}

// ---- accumulator ---------------------------------------------------------

/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to be
/// released with [`spc_accumulator_free`].
#[no_mangle]
pub unsafe extern "C" fn spc_accumulator_new(two_s: u32, out: *mut *mut SpcAccumulator) -> SpcStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let acc = AccumulatorState::new(SpinMagnitude::new(two_s)?);
        *out = Box::into_raw(Box::new(SpcAccumulator(acc)));
        Ok(())
    })
}

/// # Safety
/// `acc` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spc_accumulator_free(acc: *mut SpcAccumulator) {
    if !acc.is_null() {
        drop(Box::from_raw(acc));
    }
}

/// # Safety
/// `acc` must be a live handle and `event` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spc_accumulator_push(acc: *mut SpcAccumulator, event: *const SpcEvent) -> SpcStatus {
    guard(|| {
        let acc = out_ref(acc, "acc")?;
        let ev = in_ref(event, "event")?;
        let spin = acc.0.spin();
        let record = EventRecord {
            seq: ev.seq,
            setting_a: Setting::from_angle(ev.theta_a),
            setting_b: Setting::from_angle(ev.theta_b),
            outcome_a: Outcome::new(ev.two_m_a, spin)?,
            outcome_b: Outcome::new(ev.two_m_b, spin)?,
        };
        acc.0.push(&record)?;
        Ok(())
    })
}

/// Fold `src` into `dst`; `src` is left unchanged.
///
/// # Safety
/// Both must be live handles.
#[no_mangle]
pub unsafe extern "C" fn spc_accumulator_merge(dst: *mut SpcAccumulator, src: *const SpcAccumulator) -> SpcStatus {
    guard(|| {
        let src = in_ref(src, "src")?.0.clone();
        out_ref(dst, "dst")?.0.merge(&src)?;
        Ok(())
    })
}

/// Event count, or 0 for a NULL handle.
///
/// # Safety
/// `acc` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn spc_accumulator_count(acc: *const SpcAccumulator) -> u64 {
    acc.as_ref().map_or(0, |a| a.0.n())
}

/// Read an event file into a new accumulator.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spc_accumulate_file(path: *const c_char, out: *mut *mut SpcAccumulator) -> SpcStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let path = path_arg(path)?;
        let file = File::open(&path).map_err(Error::from)?;
        let (_, acc) = accumulate_file(BufReader::new(file))?;
        *out = Box::into_raw(Box::new(SpcAccumulator(acc)));
        Ok(())
    })
}

/// # Safety
/// `acc` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spc_plain_correlation(acc: *const SpcAccumulator, out: *mut SpcEstimate) -> SpcStatus {
    guard(|| {
        let acc = in_ref(acc, "acc")?;
        *out_ref(out, "out")? = estimate(&plain_correlation(&acc.0)?);
        Ok(())
    })
}

/// # Safety
/// `acc` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spc_grouped_correlation(acc: *const SpcAccumulator, out: *mut SpcEstimate) -> SpcStatus {
    guard(|| {
        let acc = in_ref(acc, "acc")?;
        *out_ref(out, "out")? = estimate(&grouped_correlation(&acc.0)?);
        Ok(())
    })
}

/// Conservation residuals for all 2S+1 groups.
///
/// Writes up to `capacity` entries to `out` and the number of groups to
/// `written`. `max_abs_normalized` receives the largest defined
/// normalized residual, or NaN when no group is populated. Returns
/// `Validation` when `capacity` is smaller than 2S+1.
///
/// # Safety
/// `acc` must be a live handle; `out` must point to `capacity` writable
/// entries; `written` and `max_abs_normalized` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn spc_conservation_residual(
    acc: *const SpcAccumulator,
    theta: f64,
    out: *mut SpcGroupResidual,
    capacity: usize,
    written: *mut usize,
    max_abs_normalized: *mut f64,
) -> SpcStatus {
    guard(|| {
        let acc = in_ref(acc, "acc")?;
        let report = conservation_residual(&acc.0, theta)?;
        if let Some(w) = written.as_mut() {
            *w = report.groups.len();
        }
        if capacity < report.groups.len() {
            return Err(Error::Validation(format!(
                "capacity {capacity} < {} groups",
                report.groups.len()
            ))
            .into());
        }
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let slots = std::slice::from_raw_parts_mut(out, report.groups.len());
        for (slot, g) in slots.iter_mut().zip(&report.groups) {
            *slot = SpcGroupResidual {
                two_m_a: g.two_m_a,
                n: g.n,
                defined: g.residual.is_some(),
                residual: g.residual.unwrap_or(f64::NAN),
                se: g.se.unwrap_or(f64::NAN),
                normalized_residual: g.normalized_residual.unwrap_or(f64::NAN),
                normalized_se: g.normalized_se.unwrap_or(f64::NAN),
            };
        }
        if let Some(m) = max_abs_normalized.as_mut() {
            *m = report.max_abs_normalized_residual.unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

// ---- optimizer -----------------------------------------------------------

struct Callback {
    f: CorrelationFnPtr,
    user: *mut c_void,
}

// The callback only runs on the single worker of the pool built in
// `with_callback`, so it is never invoked concurrently.
unsafe impl Sync for Callback {}
unsafe impl Send for Callback {}

fn with_callback<T: Send>(
    f: CorrelationFnPtr,
    user: *mut c_void,
    run: impl FnOnce(&(dyn Fn(f64) -> f64 + Sync)) -> T + Send,
) -> Result<T, Error> {
    let cb = Callback { f, user };
    let cb = &cb;
    let corr = move |theta: f64| (cb.f)(theta, cb.user);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(pool.install(|| run(&corr)))
}

/// Maximize the CHSH value of `corr` over planar settings with `a = 0`.
/// `corr` is called from one thread at a time.
///
/// # Safety
/// `corr` must be a valid function pointer for the duration of the call;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spc_maximize_chsh(
    corr: SpcCorrelationFn,
    user_data: *mut c_void,
    grid_step: f64,
    refine_tol: f64,
    out: *mut SpcChshConfiguration,
) -> SpcStatus {
    guard(|| {
        let f = corr.ok_or(Failure::Null("corr"))?;
        let out = out_ref(out, "out")?;
        let opt = with_callback(f, user_data, |c| maximize_chsh(c, grid_step, refine_tol))??;
        let b = opt.best;
        *out = SpcChshConfiguration {
            a: b.a,
            a_prime: b.a_prime,
            b: b.b,
            b_prime: b.b_prime,
            m_value: b.m_value,
        };
        Ok(())
    })
}

/// Fraction and count of grid configurations with M > 2.
///
/// # Safety
/// `corr` must be a valid function pointer; `fraction` must be valid;
/// `violating` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn spc_violation_scan(
    corr: SpcCorrelationFn,
    user_data: *mut c_void,
    grid_step: f64,
    fraction: *mut f64,
    violating: *mut u64,
) -> SpcStatus {
    guard(|| {
        let f = corr.ok_or(Failure::Null("corr"))?;
        let fraction = out_ref(fraction, "fraction")?;
        let scan = with_callback(f, user_data, |c| violation_scan(c, grid_step))??;
        *fraction = scan.fraction;
        if let Some(v) = violating.as_mut() {
            *v = scan.violating;
        }
        Ok(())
    })
}
