//! C interface to the simulator.
//!
//! Handles are opaque pointers created by `aosi_*_new`/`aosi_config_*` and
//! released with the matching `*_free`. Every fallible call returns an
//! [`AosiStatus`]; on failure, `aosi_last_error()` describes the problem.
//! Handles are not thread-safe; the last error is per thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use aosi::config::{load_config, RunConfig};
use aosi::engine::{build_state, Simulator};
use aosi::semantics::Semantics;
use aosi::semantics::SimilarityModel;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AosiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Runtime = 4,
    Panic = 5,
}

/// Run configuration handle.
pub struct AosiConfig {
    inner: RunConfig,
}

/// One simulated episode driven by caller-chosen actions.
pub struct AosiSimulator {
    sim: Simulator,
    norm: aosi::config::StateNorm,
}

/// What happened in one executed period.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AosiStep {
    pub reward: f64,
    /// Mean over sources of the period-average AoSI.
    pub mean_aosi: f64,
    /// Transmission latency in seconds; negative when idle.
    pub latency_s: f64,
    pub delivered: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl ToString) {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn guard(f: impl FnOnce() -> Result<(), (AosiStatus, String)>) -> AosiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AosiStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AosiStatus::Panic
        }
    }
}

fn null() -> (AosiStatus, String) {
    (AosiStatus::NullPointer, "null pointer argument".into())
}

fn config_err(e: impl ToString) -> (AosiStatus, String) {
    (AosiStatus::Config, e.to_string())
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn aosi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aosi_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn aosi_config_default(out: *mut *mut AosiConfig) -> AosiStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(null)?;
        *out = Box::into_raw(Box::new(AosiConfig {
            inner: RunConfig::default(),
        }));
        Ok(())
    })
}

/// Reads and validates a TOML config file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn aosi_config_load(
    path: *const c_char,
    out: *mut *mut AosiConfig,
) -> AosiStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(null)?;
        if path.is_null() {
            return Err(null());
        }
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| (AosiStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let cfg = load_config(Path::new(path)).map_err(config_err)?;
        cfg.validate().map_err(config_err)?;
        *out = Box::into_raw(Box::new(AosiConfig { inner: cfg }));
        Ok(())
    })
}

/// Overrides the number of sources, sampling interval and master seed.
///
/// # Safety
/// `cfg` must come from this library and not yet be freed.
#[no_mangle]
pub unsafe extern "C" fn aosi_config_set_point(
    cfg: *mut AosiConfig,
    sources: usize,
    sampling_interval_s: f64,
    master_seed: u64,
) -> AosiStatus {
    guard(|| {
        let cfg = unsafe { cfg.as_mut() }.ok_or_else(null)?;
        let mut next = cfg.inner.clone();
        next.sim.sources = sources;
        next.sim.sampling_interval_s = sampling_interval_s;
        next.sim.master_seed = master_seed;
        next.validate().map_err(config_err)?;
        cfg.inner = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn aosi_config_free(cfg: *mut AosiConfig) {
    if !cfg.is_null() {
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Similarity of the configured model at `k` symbols per word and an SNR
/// given in dB.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn aosi_similarity(
    cfg: *const AosiConfig,
    k: u32,
    snr_db: f64,
    out: *mut f64,
) -> AosiStatus {
    guard(|| {
        let cfg = unsafe { cfg.as_ref() }.ok_or_else(null)?;
        let out = unsafe { out.as_mut() }.ok_or_else(null)?;
        let model =
            SimilarityModel::from_spec(&cfg.inner.sim.similarity_model).map_err(config_err)?;
        let snr = aosi::channel::from_db(snr_db);
        *out = model
            .similarity(k, snr)
            .map_err(|e| (AosiStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Starts an episode. The config is copied; it may be freed afterwards.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn aosi_sim_new(
    cfg: *const AosiConfig,
    episode_seed: u64,
    out: *mut *mut AosiSimulator,
) -> AosiStatus {
    guard(|| {
        let cfg = unsafe { cfg.as_ref() }.ok_or_else(null)?;
        let out = unsafe { out.as_mut() }.ok_or_else(null)?;
        let sem = Semantics::from_config(&cfg.inner.sim).map_err(config_err)?;
        let sim = Simulator::new(Arc::new(cfg.inner.sim.clone()), Arc::new(sem), episode_seed);
        *out = Box::into_raw(Box::new(AosiSimulator {
            sim,
            norm: cfg.inner.dqn.state_norm.clone(),
        }));
        Ok(())
    })
}

/// # Safety
/// `sim` must come from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn aosi_sim_free(sim: *mut AosiSimulator) {
    if !sim.is_null() {
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Number of joint actions: index 0 idles, `1 + m*K + (k-1)` schedules
/// source `m` with `k` symbols per word.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn aosi_sim_action_count(sim: *const AosiSimulator) -> usize {
    unsafe { sim.as_ref() }.map_or(0, |s| s.sim.action_space().joint_len())
}

/// Length of the observation vector (three features per source).
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn aosi_sim_state_len(sim: *const AosiSimulator) -> usize {
    unsafe { sim.as_ref() }.map_or(0, |s| 3 * s.sim.config().sources)
}

/// Writes the normalized observation `[AoSI, AoI, SNR]` per source.
///
/// # Safety
/// `buf` must hold at least `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aosi_sim_state(
    sim: *const AosiSimulator,
    buf: *mut f64,
    len: usize,
) -> AosiStatus {
    guard(|| {
        let s = unsafe { sim.as_ref() }.ok_or_else(null)?;
        if buf.is_null() {
            return Err(null());
        }
        let state = build_state(s.sim.views(), s.sim.draws(), s.sim.config().tau(), &s.norm);
        if len < state.len() {
            return Err((
                AosiStatus::InvalidArgument,
                format!("buffer holds {len} values, state needs {}", state.len()),
            ));
        }
        unsafe { std::slice::from_raw_parts_mut(buf, state.len()) }.copy_from_slice(&state);
        Ok(())
    })
}

/// Executes one period with the given joint action index.
///
/// # Safety
/// `sim` must be a live handle; `out` may be null.
#[no_mangle]
pub unsafe extern "C" fn aosi_sim_step(
    sim: *mut AosiSimulator,
    action: usize,
    out: *mut AosiStep,
) -> AosiStatus {
    guard(|| {
        let s = unsafe { sim.as_mut() }.ok_or_else(null)?;
        let decoded = s
            .sim
            .action_space()
            .decode(action)
            .map_err(|e| (AosiStatus::InvalidArgument, e.to_string()))?;
        let o = s
            .sim
            .execute(decoded)
            .map_err(|e| (AosiStatus::Runtime, e.to_string()))?;
        if let Some(out) = unsafe { out.as_mut() } {
            *out = AosiStep {
                reward: o.reward,
                mean_aosi: o.averages.iter().sum::<f64>() / o.averages.len() as f64,
                latency_s: o.latency_s().unwrap_or(-1.0),
                delivered: o.success,
            };
        }
        Ok(())
    })
}
