use std::ffi::{CStr, CString};
use std::ptr;

use pas_slp_ffi::*;

const USERS: [f64; 8] = [3.0, 4.0, 15.0, 2.5, 9.0, 17.0, 18.0, 11.0];
const SYMBOLS: [u32; 4] = [0, 3, 1, 2];

fn scenario(pas: usize) -> *mut PasScenario {
    let mut out = ptr::null_mut();
    let status = unsafe {
        pas_scenario_new(
            USERS.as_ptr(),
            4,
            SYMBOLS.as_ptr(),
            4,
            4,
            pas,
            20.0,
            5.0,
            20.0,
            0.0,
            28e9,
            1.4,
            &mut out,
        )
    };
    assert_eq!(status, PasStatus::Ok);
    assert!(!out.is_null());
    out
}

fn last_error() -> String {
    let p = pas_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn fixed_placement_and_precoder() {
    let s = scenario(5);
    let mut x = [0.0; 20];
    assert_eq!(
        unsafe { pas_fixed_placement(s, x.as_mut_ptr(), x.len()) },
        PasStatus::Ok
    );
    assert_eq!(&x[..5], &[2.0, 6.0, 10.0, 14.0, 18.0]);

    let gamma = [20.0; 4];
    let mut power = 0.0;
    let mut beam = [0.0; 32];
    let status = unsafe {
        pas_solve_at(
            s,
            x.as_ptr(),
            20,
            gamma.as_ptr(),
            -80.0,
            &mut power,
            beam.as_mut_ptr(),
            beam.len(),
        )
    };
    assert_eq!(status, PasStatus::Ok);
    assert!(power > 0.0 && power.is_finite());
    let frob: f64 = beam.iter().map(|v| v * v).sum();
    assert!((frob - power).abs() <= 1e-9 * power);
    unsafe { pas_scenario_free(s) };
}

#[test]
fn ao_never_exceeds_fixed() {
    let s = scenario(3);
    let gamma = [16.0; 4];
    let mut x = [0.0; 12];
    unsafe { pas_fixed_placement(s, x.as_mut_ptr(), 12) };
    let mut fixed = 0.0;
    unsafe {
        pas_solve_at(
            s,
            x.as_ptr(),
            12,
            gamma.as_ptr(),
            -80.0,
            &mut fixed,
            ptr::null_mut(),
            0,
        )
    };

    let (mut power, mut iters, mut converged) = (0.0, 0u32, false);
    assert_eq!(unsafe { pas_scenario_set_max_iters(s, 10) }, PasStatus::Ok);
    let status = unsafe {
        pas_ao_solve(
            s,
            gamma.as_ptr(),
            -80.0,
            x.as_mut_ptr(),
            12,
            &mut power,
            &mut iters,
            &mut converged,
        )
    };
    assert_eq!(status, PasStatus::Ok);
    assert!(power <= fixed);
    assert!(iters <= 10);
    assert!(x.windows(3).step_by(3).all(|r| r[0] < r[1] && r[1] < r[2]));
    unsafe { pas_scenario_free(s) };
}

#[test]
fn error_codes() {
    let mut out = ptr::null_mut();
    let status = unsafe {
        pas_scenario_new(
            ptr::null(),
            4,
            SYMBOLS.as_ptr(),
            4,
            4,
            5,
            20.0,
            5.0,
            20.0,
            0.0,
            28e9,
            1.4,
            &mut out,
        )
    };
    assert_eq!(status, PasStatus::NullPointer);
    assert!(last_error().contains("users_xy"));

    // 50 PAs cannot keep a 1 m spacing on a 20 m guide
    let status = unsafe {
        pas_scenario_new(
            USERS.as_ptr(),
            4,
            SYMBOLS.as_ptr(),
            4,
            4,
            50,
            20.0,
            5.0,
            20.0,
            1.0,
            28e9,
            1.4,
            &mut out,
        )
    };
    assert_eq!(status, PasStatus::InfeasibleGeometry);
    assert!(out.is_null());

    let s = scenario(2);
    let mut small = [0.0; 3];
    assert_eq!(
        unsafe { pas_fixed_placement(s, small.as_mut_ptr(), 3) },
        PasStatus::BufferTooSmall
    );

    let gamma = [10.0; 4];
    let bad = [1.0, 1.0, 5.0, 6.0, 5.0, 6.0, 5.0, 6.0];
    let mut power = 0.0;
    let status = unsafe {
        pas_solve_at(
            s,
            bad.as_ptr(),
            8,
            gamma.as_ptr(),
            -80.0,
            &mut power,
            ptr::null_mut(),
            0,
        )
    };
    assert_eq!(status, PasStatus::InfeasibleGeometry);
    unsafe { pas_scenario_free(s) };
    unsafe { pas_scenario_free(ptr::null_mut()) };
}

#[test]
fn experiment_to_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("r.csv").to_str().unwrap()).unwrap();
    let cfg = CString::new(r#"{"trials": 2, "schemes": ["fixed"], "gamma_db": [12.0]}"#).unwrap();
    let exp = CString::new("power-vs-sinr").unwrap();
    assert_eq!(
        unsafe { pas_run_experiment(cfg.as_ptr(), exp.as_ptr(), path.as_ptr()) },
        PasStatus::Ok
    );
    let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);

    let bad = CString::new(r#"{"trials": 2, "bogus": 1}"#).unwrap();
    assert_eq!(
        unsafe { pas_run_experiment(bad.as_ptr(), exp.as_ptr(), path.as_ptr()) },
        PasStatus::Config
    );
    let unknown = CString::new("fig9").unwrap();
    assert_eq!(
        unsafe { pas_run_experiment(ptr::null(), unknown.as_ptr(), path.as_ptr()) },
        PasStatus::Config
    );
}
