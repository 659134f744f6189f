use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use motion_retouch_ffi::*;

const SHORT: &str = "duration = 1.0\nsettle_time = 0.1\n";

fn last_error() -> String {
    unsafe { CStr::from_ptr(mr_last_error_message()) }.to_string_lossy().into_owned()
}

fn short_scenario() -> *mut MrScenario {
    let toml = CString::new(SHORT).unwrap();
    let mut sc = ptr::null_mut();
    assert_eq!(unsafe { mr_scenario_from_toml(toml.as_ptr(), &mut sc) }, MrStatus::Ok, "{}", last_error());
    sc
}

#[test]
fn teach_copy_retouch_through_handles() {
    unsafe {
        let sc = short_scenario();
        let mut tape = ptr::null_mut();
        let mut taught = MrOutcome::default();
        assert_eq!(mr_teach(sc, &mut tape, &mut taught), MrStatus::Ok);
        // One second of teaching never reaches the grasp.
        assert!(!taught.success);
        assert_eq!(taught.failure, 1);

        let mut len = 0;
        assert_eq!(mr_tape_len(tape, &mut len), MrStatus::Ok);
        assert_eq!(len, 501);

        let mut fast = ptr::null_mut();
        assert_eq!(mr_tape_speed_up(tape, 3, &mut fast), MrStatus::Ok);
        assert_eq!(mr_tape_len(fast, &mut len), MrStatus::Ok);
        assert_eq!(len, 167);
        let (mut a, mut b) = ([0.0; 8], [0.0; 8]);
        assert_eq!(mr_tape_angles(tape, 3, a.as_mut_ptr()), MrStatus::Ok);
        assert_eq!(mr_tape_angles(fast, 1, b.as_mut_ptr()), MrStatus::Ok);
        assert_eq!(a, b);

        let mut copied = MrOutcome::default();
        assert_eq!(mr_copy(tape, sc, 1, &mut copied), MrStatus::Ok);
        assert_eq!(copied.failure, 1);

        let mut retouched = ptr::null_mut();
        assert_eq!(mr_retouch(tape, sc, ptr::null(), &mut retouched, ptr::null_mut()), MrStatus::Ok);
        assert_eq!(mr_tape_len(retouched, &mut len), MrStatus::Ok);
        assert_eq!(len, 501);

        for t in [tape, fast, retouched] {
            mr_tape_free(t);
        }
        mr_scenario_free(sc);
    }
}

#[test]
fn save_and_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("t.csv").to_str().unwrap()).unwrap();
    unsafe {
        let sc = short_scenario();
        let mut tape = ptr::null_mut();
        assert_eq!(mr_teach(sc, &mut tape, ptr::null_mut()), MrStatus::Ok);
        assert_eq!(mr_tape_save(tape, path.as_ptr()), MrStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(mr_tape_load(path.as_ptr(), &mut back), MrStatus::Ok);
        let (mut a, mut b) = ([0.0; 8], [0.0; 8]);
        assert_eq!(mr_tape_angles(tape, 500, a.as_mut_ptr()), MrStatus::Ok);
        assert_eq!(mr_tape_angles(back, 500, b.as_mut_ptr()), MrStatus::Ok);
        assert_eq!(a.map(f64::to_bits), b.map(f64::to_bits));
        mr_tape_free(back);
        mr_tape_free(tape);
        mr_scenario_free(sc);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        assert_eq!(mr_scenario_default(ptr::null_mut()), MrStatus::NullPointer);
        assert!(last_error().contains("out_scenario"));

        let missing = CString::new("/nonexistent/tape.csv").unwrap();
        let mut tape = ptr::null_mut();
        assert_eq!(mr_tape_load(missing.as_ptr(), &mut tape), MrStatus::Io);
        assert!(last_error().contains("/nonexistent/tape.csv"));
        assert!(tape.is_null());

        let bad = CString::new("dt = -1.0\n").unwrap();
        let mut sc = ptr::null_mut();
        assert_ne!(mr_scenario_from_toml(bad.as_ptr(), &mut sc), MrStatus::Ok);
        assert!(!last_error().is_empty());

        let sc = short_scenario();
        assert_eq!(mr_teach(sc, &mut tape, ptr::null_mut()), MrStatus::Ok);
        let mut fast = ptr::null_mut();
        assert_eq!(mr_tape_speed_up(tape, 0, &mut fast), MrStatus::InvalidArgument);
        let mut q = [0.0; 8];
        assert_eq!(mr_tape_angles(tape, 10_000, q.as_mut_ptr()), MrStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));

        mr_tape_free(tape);
        mr_scenario_free(sc);
        mr_tape_free(ptr::null_mut());
        mr_scenario_free(ptr::null_mut());
    }
}

#[test]
fn version_matches_package() {
    let v = unsafe { CStr::from_ptr(mr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/motion_retouch.h")
}

#[test]
fn header_declares_every_export() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "mr_last_error_message",
        "mr_version",
        "mr_scenario_default",
        "mr_scenario_from_toml",
        "mr_scenario_load",
        "mr_scenario_free",
        "mr_teach",
        "mr_copy",
        "mr_retouch",
        "mr_tape_load",
        "mr_tape_save",
        "mr_tape_len",
        "mr_tape_speed_up",
        "mr_tape_angles",
        "mr_tape_free",
        "typedef struct MrTape MrTape;",
        "MR_STATUS_NULL_POINTER = 1",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let target = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = target.join("libmotion_retouch_ffi.a");
    assert!(lib.is_file(), "missing {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <string.h>
#include "motion_retouch.h"

int main(void) {
    MrScenario *sc = NULL;
    MrTape *tape = NULL;
    MrOutcome o;
    size_t len = 0;
    if (mr_scenario_from_toml("duration = 0.5\nsettle_time = 0.1\n", &sc) != MR_STATUS_OK) return 1;
    if (mr_teach(sc, &tape, &o) != MR_STATUS_OK) return 2;
    if (mr_tape_len(tape, &len) != MR_STATUS_OK || len != 251) return 3;
    if (mr_tape_len(NULL, &len) != MR_STATUS_NULL_POINTER) return 4;
    if (strstr(mr_last_error_message(), "tape") == NULL) return 5;
    mr_tape_free(tape);
    mr_scenario_free(sc);
    printf("ok %s\n", mr_version());
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let cc = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .expect("cc not found");
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
