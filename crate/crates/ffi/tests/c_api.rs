use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use aosi_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(aosi_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn default_config() -> *mut AosiConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { aosi_config_default(&mut cfg) }, AosiStatus::Ok);
    cfg
}

#[test]
fn episode_through_handles() {
    let cfg = default_config();
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { aosi_sim_new(cfg, 7, &mut sim) }, AosiStatus::Ok);
    unsafe { aosi_config_free(cfg) };

    assert_eq!(unsafe { aosi_sim_action_count(sim) }, 1 + 3 * 8);
    let n = unsafe { aosi_sim_state_len(sim) };
    assert_eq!(n, 9);
    let mut state = vec![f64::NAN; n];
    assert_eq!(
        unsafe { aosi_sim_state(sim, state.as_mut_ptr(), n) },
        AosiStatus::Ok
    );
    assert!(state.iter().all(|v| v.is_finite()));

    let mut step = AosiStep::default();
    assert_eq!(unsafe { aosi_sim_step(sim, 0, &mut step) }, AosiStatus::Ok);
    assert!(!step.delivered);
    assert_eq!(step.latency_s, -1.0);
    assert_eq!(step.reward, -step.mean_aosi);
    unsafe { aosi_sim_free(sim) };
}

#[test]
fn same_seed_same_trajectory() {
    let run = || {
        let cfg = default_config();
        let mut sim = ptr::null_mut();
        unsafe { aosi_sim_new(cfg, 11, &mut sim) };
        let rewards: Vec<u64> = (0..50)
            .map(|i| {
                let mut step = AosiStep::default();
                assert_eq!(
                    unsafe { aosi_sim_step(sim, i % 25, &mut step) },
                    AosiStatus::Ok
                );
                step.reward.to_bits()
            })
            .collect();
        unsafe {
            aosi_sim_free(sim);
            aosi_config_free(cfg);
        }
        rewards
    };
    assert_eq!(run(), run());
}

#[test]
fn errors_are_reported() {
    assert_eq!(
        unsafe { aosi_config_default(ptr::null_mut()) },
        AosiStatus::NullPointer
    );
    assert!(last_error().contains("null"));

    let cfg = default_config();
    assert_eq!(
        unsafe { aosi_config_set_point(cfg, 0, 0.1, 1) },
        AosiStatus::Config
    );
    assert!(last_error().contains("sources"), "{}", last_error());

    let mut sim = ptr::null_mut();
    unsafe { aosi_sim_new(cfg, 1, &mut sim) };
    assert_eq!(
        unsafe { aosi_sim_step(sim, 1000, ptr::null_mut()) },
        AosiStatus::InvalidArgument
    );
    let mut short = [0.0; 2];
    assert_eq!(
        unsafe { aosi_sim_state(sim, short.as_mut_ptr(), 2) },
        AosiStatus::InvalidArgument
    );

    let missing = CString::new("/nonexistent/run.toml").unwrap();
    let mut other = ptr::null_mut();
    assert_eq!(
        unsafe { aosi_config_load(missing.as_ptr(), &mut other) },
        AosiStatus::Config
    );
    assert!(other.is_null());
    unsafe {
        aosi_sim_free(sim);
        aosi_config_free(cfg);
        aosi_config_free(ptr::null_mut());
    }
}

#[test]
fn similarity_matches_hand_value() {
    let cfg = default_config();
    let mut xi = 0.0;
    assert_eq!(
        unsafe { aosi_similarity(cfg, 1, 2.0, &mut xi) },
        AosiStatus::Ok
    );
    // (1 - e^-0.6) * 1/2 at the sigmoid midpoint.
    assert!((xi - (1.0 - (-0.6f64).exp()) * 0.5).abs() < 1e-12);
    assert_eq!(
        unsafe { aosi_similarity(cfg, 0, 2.0, &mut xi) },
        AosiStatus::InvalidArgument
    );
    unsafe { aosi_config_free(cfg) };
}

#[test]
fn loads_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "[sim]\nsources = 2\nmax_symbols_per_word = 4\n").unwrap();
    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(
        unsafe { aosi_config_load(c_path.as_ptr(), &mut cfg) },
        AosiStatus::Ok
    );
    let mut sim = ptr::null_mut();
    unsafe { aosi_sim_new(cfg, 0, &mut sim) };
    assert_eq!(unsafe { aosi_sim_action_count(sim) }, 1 + 2 * 4);
    unsafe {
        aosi_sim_free(sim);
        aosi_config_free(cfg);
    }
}

/// Compiles a C program against the generated header and the static library.
#[test]
fn header_compiles_and_links_from_c() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let target = manifest.join("../../target/debug");
    let lib = target.join("libaosi_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include "aosi.h"
int main(void) {
    AosiConfig *cfg = NULL;
    AosiSimulator *sim = NULL;
    AosiStep step;
    if (aosi_config_default(&cfg) != AOSI_STATUS_OK) return 1;
    if (aosi_sim_new(cfg, 3, &sim) != AOSI_STATUS_OK) return 2;
    if (aosi_sim_step(sim, 1, &step) != AOSI_STATUS_OK) return 3;
    if (aosi_sim_step(sim, 99999, &step) != AOSI_STATUS_INVALID_ARGUMENT) return 4;
    printf("%s|%s\n", aosi_version(), aosi_last_error());
    aosi_sim_free(sim);
    aosi_config_free(cfg);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status();
    let Ok(status) = status else {
        eprintln!("skipping: no C compiler");
        return;
    };
    assert!(status.success(), "C smoke program failed to build");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(env!("CARGO_PKG_VERSION")), "{text}");
    assert!(text.contains("action index 99999"), "{text}");
}
