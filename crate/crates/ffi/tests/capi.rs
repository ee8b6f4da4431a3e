use std::ffi::CStr;
use std::process::Command;
use std::ptr;

use axistream_ffi::*;

fn problem(n: usize) -> *mut AxiProblem {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { axi_problem_new(1.0, 1.0, 0.25, n, n, &mut p) }, AxiStatus::Ok);
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe { axi_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn solve_recovers_the_polynomial_case() {
    let n = 32;
    let p = problem(n);
    let (mut r, mut z) = (vec![0.0; n], vec![0.0; n]);
    assert_eq!(unsafe { axi_problem_centers(p, r.as_mut_ptr(), z.as_mut_ptr()) }, AxiStatus::Ok);
    let mut omega = vec![0.0; n * n];
    let mut exact = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            omega[i * n + j] = 8.0 * (1.0 - z[j] * z[j]) + 2.0 * (1.0 - r[i] * r[i]);
            exact[i * n + j] = (1.0 - r[i] * r[i]) * (1.0 - z[j] * z[j]);
        }
    }
    let mut psi = vec![0.0; n * n];
    let (mut res, mut it) = (0.0, 0usize);
    let s = unsafe { axi_solve(p, omega.as_ptr(), psi.as_mut_ptr(), n * n, 1e-12, &mut res, &mut it) };
    assert_eq!(s, AxiStatus::Ok);
    assert!(res <= 1e-12 && it > 0);
    let err = psi.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 2e-3, "max error {err}");

    let mut norm = 0.0;
    let s = unsafe { axi_weighted_norm(p, psi.as_ptr(), psi.len(), false, 1, 0.5, &mut norm) };
    assert_eq!(s, AxiStatus::Ok);
    assert!(norm.is_finite() && norm > 0.0);
    unsafe { axi_problem_free(p) };
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { axi_problem_new(1.0, 1.0, 0.6, 8, 8, &mut p) }, AxiStatus::InvalidArgument);
    assert!(p.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { axi_problem_new(1.0, 1.0, 0.25, 8, 8, ptr::null_mut()) }, AxiStatus::NullPointer);
    assert!(last_error().contains("null"));

    let p = problem(8);
    let omega = [1.0; 10];
    let mut psi = [0.0; 10];
    let s = unsafe { axi_solve(p, omega.as_ptr(), psi.as_mut_ptr(), 10, 0.0, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(s, AxiStatus::InvalidArgument);
    assert!(last_error().contains("64"));
    unsafe { axi_problem_free(p) };
    unsafe { axi_problem_free(ptr::null_mut()) };

    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { axi_resolvent(0.0, -2.0, &mut re, &mut im) }, AxiStatus::Pole);
    let needed = unsafe { axi_last_error_message(ptr::null_mut(), 0) };
    assert!(needed > 0);
}

#[test]
fn resolvent_and_model_problem() {
    let (mut re, mut im) = (0.0, 0.0);
    assert_eq!(unsafe { axi_resolvent(1.0, 0.0, &mut re, &mut im) }, AxiStatus::Ok);
    // 1/(1·(1 + 2i)) = (1 − 2i)/5
    assert!((re - 0.2).abs() < 1e-15 && (im + 0.4).abs() < 1e-15);

    let n = 1 << 12;
    let (lo, hi) = (-40.0, 40.0);
    let d = (hi - lo) / n as f64;
    let g: Vec<f64> = (0..n).map(|k| (-(lo + k as f64 * d - 2.0).powi(2) / 2.0).exp()).collect();
    let mut u = vec![0.0; n];
    let mut residual = 1.0;
    let s = unsafe { axi_mellin_solve(g.as_ptr(), n, lo, hi, 0.5, u.as_mut_ptr(), &mut residual) };
    assert_eq!(s, AxiStatus::Ok);
    assert!(residual < 1e-8, "{residual}");
    assert!(u.iter().all(|v| v.is_finite()));
    assert_eq!(unsafe { axi_mellin_solve(g.as_ptr(), n, lo, hi, 0.0, u.as_mut_ptr(), ptr::null_mut()) }, AxiStatus::Pole);
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(axi_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/axistream.h");
    let Ok(out) = Command::new("cc").args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header]).output() else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn c_program_links_against_the_static_library() {
    // Cargo leaves the archive in deps/ beside this test binary.
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    let Some(archive) = [deps, deps.parent().unwrap()].iter().map(|d| d.join("libaxistream_ffi.a")).find(|p| p.is_file())
    else {
        eprintln!("static library not built, skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let manifest = env!("CARGO_MANIFEST_DIR");
    let Ok(out) = Command::new("cc")
        .arg(format!("{manifest}/tests/c/smoke.c"))
        .arg(format!("-I{manifest}/include"))
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
    else {
        eprintln!("no C compiler, skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stdout));
}
