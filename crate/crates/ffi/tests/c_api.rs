use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use lamm_ffi::*;

fn last_error() -> String {
    let p = lamm_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn bilinear() -> *mut LammProblem {
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { lamm_problem_bilinear2d(&mut p) },
        LammStatus::LAMM_OK
    );
    p
}

#[test]
fn jvf_and_distance_on_bilinear() {
    let p = bilinear();
    let w = [1.0, 1.0];
    let mut v = [0.0; 2];
    unsafe {
        assert_eq!(
            lamm_problem_jvf(p, w.as_ptr(), 2, v.as_mut_ptr(), 2),
            LammStatus::LAMM_OK
        );
        assert_eq!(v, [1.0, -1.0]);
        let mut d = 0.0;
        let at = [3.0, 4.0];
        assert_eq!(
            lamm_problem_distance(p, at.as_ptr(), 2, &mut d),
            LammStatus::LAMM_OK
        );
        assert_eq!(d, 5.0);
        lamm_problem_free(p);
    }
}

#[test]
fn dimension_and_null_errors() {
    let p = bilinear();
    let w = [1.0, 1.0, 1.0];
    let mut v = [0.0; 3];
    unsafe {
        assert_eq!(
            lamm_problem_jvf(p, w.as_ptr(), 3, v.as_mut_ptr(), 3),
            LammStatus::LAMM_DIMENSION_MISMATCH
        );
        assert!(last_error().contains("length 3"));
        assert_eq!(
            lamm_problem_jvf(p, w.as_ptr(), 2, v.as_mut_ptr(), 1),
            LammStatus::LAMM_BUFFER_TOO_SMALL
        );
        assert_eq!(
            lamm_problem_jvf(ptr::null(), w.as_ptr(), 2, v.as_mut_ptr(), 2),
            LammStatus::LAMM_NULL_POINTER
        );
        assert_eq!(
            lamm_problem_bilinear2d(ptr::null_mut()),
            LammStatus::LAMM_NULL_POINTER
        );
        lamm_problem_free(p);
        lamm_problem_free(ptr::null_mut());
    }
}

#[test]
fn stochastic_bilinear_optimum_zeroes_the_field() {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(
            lamm_problem_stochastic_bilinear(10, 10, 3, &mut p),
            LammStatus::LAMM_OK
        );
        let (mut dt, mut dp) = (0, 0);
        assert_eq!(lamm_problem_dims(p, &mut dt, &mut dp), LammStatus::LAMM_OK);
        assert_eq!((dt, dp), (10, 10));
        let mut opt = [0.0; 20];
        assert_eq!(
            lamm_problem_optimum(p, opt.as_mut_ptr(), 20),
            LammStatus::LAMM_OK
        );
        let mut v = [1.0; 20];
        assert_eq!(
            lamm_problem_jvf(p, opt.as_ptr(), 20, v.as_mut_ptr(), 20),
            LammStatus::LAMM_OK
        );
        assert!(v.iter().all(|x| x.abs() < 1e-10));
        lamm_problem_free(p);
        let mut q = ptr::null_mut();
        assert_eq!(
            lamm_problem_stochastic_bilinear(3, 4, 0, &mut q),
            LammStatus::LAMM_INVALID_ARGUMENT
        );
        assert!(q.is_null());
    }
}

#[test]
fn spectrum_of_gda_on_bilinear() {
    let p = bilinear();
    let op = CString::new("gda-sim:0.3").unwrap();
    let (mut rho, mut n) = (0.0, 0usize);
    let (mut re, mut im) = ([0.0; 2], [0.0; 2]);
    unsafe {
        assert_eq!(
            lamm_spectrum(
                p,
                op.as_ptr(),
                &mut rho,
                re.as_mut_ptr(),
                im.as_mut_ptr(),
                2,
                &mut n
            ),
            LammStatus::LAMM_OK
        );
        assert_eq!(n, 2);
        assert_eq!(re, [1.0, 1.0]);
        assert_eq!(im, [-0.3, 0.3]);
        assert!((rho * rho - 1.09).abs() < 1e-15);
        // Capacity 0 only reports the count.
        assert_eq!(
            lamm_spectrum(
                p,
                op.as_ptr(),
                &mut rho,
                ptr::null_mut(),
                ptr::null_mut(),
                0,
                &mut n
            ),
            LammStatus::LAMM_OK
        );
        let bad = CString::new("gda-sim:x").unwrap();
        assert_eq!(
            lamm_spectrum(
                p,
                bad.as_ptr(),
                &mut rho,
                ptr::null_mut(),
                ptr::null_mut(),
                0,
                &mut n
            ),
            LammStatus::LAMM_INVALID_ARGUMENT
        );
        lamm_problem_free(p);
    }
}

#[test]
fn preset_problem_and_unknown_name() {
    let mut p = ptr::null_mut();
    unsafe {
        assert_eq!(
            lamm_problem_preset(CString::new("qp2").unwrap().as_ptr(), &mut p),
            LammStatus::LAMM_OK
        );
        lamm_problem_free(p);
        assert_eq!(
            lamm_problem_preset(CString::new("qp9").unwrap().as_ptr(), &mut p),
            LammStatus::LAMM_UNKNOWN_PRESET
        );
        assert!(last_error().contains("qp9"));
    }
}

#[test]
fn run_from_toml() {
    let cfg = CString::new(
        "budget_passes = 20.0\neval_stride = 1.0\n[problem]\nkind = \"bilinear2d\"\n[method]\nkind = \"gda\"\neta = 0.3\nvariant = \"simultaneous\"\n[wrapper]\nkind = \"lookahead\"\nk = 4\nalpha = 0.5\n",
    )
    .unwrap();
    let mut t = ptr::null_mut();
    unsafe {
        assert_eq!(lamm_run_toml(cfg.as_ptr(), &mut t), LammStatus::LAMM_OK);
        assert_eq!(lamm_trajectory_len(t), 42);
        let mut row = LammRow {
            update: 9,
            passes: 0.0,
            distance: 0.0,
            series: LammSeries::LAMM_SERIES_EMA,
        };
        assert_eq!(lamm_trajectory_row(t, 0, &mut row), LammStatus::LAMM_OK);
        assert_eq!(
            (row.update, row.passes, row.distance, row.series),
            (0, 0.0, 1.0, LammSeries::LAMM_SERIES_FAST)
        );
        assert_eq!(
            lamm_trajectory_row(t, 42, &mut row),
            LammStatus::LAMM_INVALID_ARGUMENT
        );
        let mut d = 0.0;
        assert_eq!(
            lamm_trajectory_final_distance(t, LammSeries::LAMM_SERIES_SLOW, &mut d),
            LammStatus::LAMM_OK
        );
        assert!(d < 1.0);
        assert_eq!(
            lamm_trajectory_final_distance(t, LammSeries::LAMM_SERIES_EMA, &mut d),
            LammStatus::LAMM_INVALID_ARGUMENT
        );
        let mut s = ptr::null_mut();
        assert_eq!(lamm_trajectory_csv(t, &mut s), LammStatus::LAMM_OK);
        let csv = CStr::from_ptr(s).to_str().unwrap().to_owned();
        assert!(csv.starts_with("update,passes,distance,series\n0,0.0,1.0,fast\n"));
        lamm_string_free(s);
        lamm_trajectory_free(t);
    }
}

#[test]
fn run_errors_surface_as_config_and_unsupported() {
    let mut t = ptr::null_mut();
    unsafe {
        let bad = CString::new("budget_passes = [").unwrap();
        assert_eq!(lamm_run_toml(bad.as_ptr(), &mut t), LammStatus::LAMM_CONFIG);
        let svre = CString::new("budget_passes = 5.0\n[problem]\nkind = \"bilinear2d\"\n[method]\nkind = \"svre\"\neta = 0.1\nrestart_prob = 0.1\n").unwrap();
        assert_eq!(
            lamm_run_toml(svre.as_ptr(), &mut t),
            LammStatus::LAMM_UNSUPPORTED
        );
        assert!(t.is_null());
        assert_eq!(lamm_trajectory_len(ptr::null()), 0);
    }
}

#[test]
fn preset_run_matches_requested_seed() {
    let name = CString::new("bilinear2d-gda-sim").unwrap();
    let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(
            lamm_run_preset(name.as_ptr(), 7, &mut a),
            LammStatus::LAMM_OK
        );
        assert_eq!(
            lamm_run_preset(name.as_ptr(), 7, &mut b),
            LammStatus::LAMM_OK
        );
        let (mut x, mut y) = (ptr::null_mut(), ptr::null_mut());
        lamm_trajectory_csv(a, &mut x);
        lamm_trajectory_csv(b, &mut y);
        assert_eq!(CStr::from_ptr(x), CStr::from_ptr(y));
        lamm_string_free(x);
        lamm_string_free(y);
        lamm_trajectory_free(a);
        lamm_trajectory_free(b);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(lamm_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include")
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok()
}

#[test]
fn header_is_valid_c_and_cxx() {
    if !have_cc() {
        eprintln!("no C compiler on PATH; header check skipped");
        return;
    }
    let header = header_dir().join("lookahead_minmax.h");
    assert!(
        header.exists(),
        "build script did not write {}",
        header.display()
    );
    for lang in ["c", "c++"] {
        let out = Command::new("cc")
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{lang}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "lookahead_minmax.h"
int main(void) {
    LammProblem *p = NULL;
    if (lamm_problem_preset("qp2", &p) != LAMM_OK) return 1;
    double rho = 0.0; size_t n = 0;
    if (lamm_spectrum(p, "gda-sim:0.06896551724137931", &rho, NULL, NULL, 0, &n) != LAMM_OK) return 2;
    double w[3] = {1.0, 2.0, 3.0}, v[3];
    if (lamm_problem_jvf(p, w, 3, v, 3) != LAMM_DIMENSION_MISMATCH) return 3;
    if (lamm_last_error() == NULL) return 4;
    printf("%zu %.12f\n", n, rho * rho);
    lamm_problem_free(p);
    return 0;
}
"#;

#[test]
fn c_program_links_against_static_library() {
    if !have_cc() {
        eprintln!("no C compiler on PATH; link test skipped");
        return;
    }
    // tests run from target/<profile>/deps
    let profile_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let lib = profile_dir.join("liblamm_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; link test skipped", lib.display());
        return;
    }
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c_link");
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let exe = dir.join("main");
    let out = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header_dir())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    // |1 − 2η ∓ 5ηi|² at η = 2/29 is 725/841.
    let text = String::from_utf8(run.stdout).unwrap();
    let mut parts = text.split_whitespace();
    assert_eq!(parts.next(), Some("2"));
    let rho2: f64 = parts.next().unwrap().parse().unwrap();
    assert!((rho2 - 725.0 / 841.0).abs() < 1e-11);
}
