use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use eos_lab_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(eos_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn run_through_handles() {
    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(eos_dataset_two_dim(0.5, 1.0, &mut data), EosStatus::Ok);
        let (mut d, mut n) = (0, 0);
        assert_eq!(eos_dataset_shape(data, &mut d, &mut n), EosStatus::Ok);
        assert_eq!((d, n), (2, 1));

        let mut traj = ptr::null_mut();
        assert_eq!(eos_run(data, 0.5, 0.01, 0, &mut traj), EosStatus::Ok);
        let mut len = 0;
        assert_eq!(eos_trajectory_len(traj, &mut len), EosStatus::Ok);
        assert!(len > 1);

        let mut written = 0;
        assert_eq!(eos_trajectory_residuals(traj, 0, ptr::null_mut(), 0, &mut written), EosStatus::BufferTooSmall);
        assert_eq!(written, len);
        let mut r = vec![0.0; written];
        assert_eq!(eos_trajectory_residuals(traj, 0, r.as_mut_ptr(), r.len(), &mut written), EosStatus::Ok);
        assert!(r[len - 1].abs() < 1e-6);
        assert_eq!(eos_trajectory_residuals(traj, 5, r.as_mut_ptr(), r.len(), &mut written), EosStatus::InvalidArgument);

        let mut s = vec![0.0; len];
        assert_eq!(eos_trajectory_sharpness(traj, s.as_mut_ptr(), s.len(), &mut written), EosStatus::Ok);
        assert!(s.iter().any(|v| v.is_finite()));

        let (mut regime, mut period) = (EosRegime::Inconclusive, 9);
        assert_eq!(eos_trajectory_regime(traj, &mut regime, &mut period), EosStatus::Ok);
        assert_eq!((regime, period), (EosRegime::GradientFlow, 0));
        let mut term = EosTermination::MaxSteps;
        assert_eq!(eos_trajectory_termination(traj, &mut term), EosStatus::Ok);
        assert_eq!(term, EosTermination::Converged);
        let mut err = f64::NAN;
        assert_eq!(eos_trajectory_error_norm(traj, &mut err), EosStatus::Ok);
        assert!(err.is_finite());

        eos_trajectory_free(traj);
        eos_dataset_free(data);
    }
}

#[test]
fn sharpness_at_the_origin_of_one_dim_data() {
    unsafe {
        let x = [2.0];
        let mut data = ptr::null_mut();
        assert_eq!(eos_dataset_single(x.as_ptr(), 1, 1.0, ptr::null(), &mut data), EosStatus::Ok);
        let (p, m) = ([0.0], [0.0]);
        let mut s = 0.0;
        assert_eq!(eos_sharpness(data, p.as_ptr(), m.as_ptr(), 1, &mut s), EosStatus::Ok);
        // loss r^2/4 with r = 4(p^2 - m^2) - 1: Hessian at zero is diag(2, -2)
        assert!((s - 2.0).abs() < 1e-9, "{s}");
        assert_eq!(eos_sharpness(data, p.as_ptr(), m.as_ptr(), 3, &mut s), EosStatus::DimensionMismatch);
        assert!(!last_error().is_empty());
        eos_dataset_free(data);
    }
}

#[test]
fn divergent_run_has_no_error_norm() {
    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(eos_dataset_two_dim(0.5, 1.0, &mut data), EosStatus::Ok);
        let mut traj = ptr::null_mut();
        assert_eq!(eos_run(data, 3.0, 0.01, 0, &mut traj), EosStatus::Ok);
        let (mut regime, mut period) = (EosRegime::GradientFlow, 0);
        eos_trajectory_regime(traj, &mut regime, &mut period);
        assert_eq!(regime, EosRegime::Divergent);
        let mut err = 0.0;
        assert_eq!(eos_trajectory_error_norm(traj, &mut err), EosStatus::NotAvailable);
        eos_trajectory_free(traj);
        eos_dataset_free(data);
    }
}

#[test]
fn two_cycle_points_straddle_zero() {
    unsafe {
        let mut pts = [0.0; 4];
        let mut real = -1;
        assert_eq!(eos_two_cycle(1.0, 1.1, 0.95, pts.as_mut_ptr(), &mut real), EosStatus::Ok);
        assert_eq!(real, 1);
        assert!(pts[0] * pts[2] < 0.0);
        assert_eq!(eos_two_cycle(1.0, 0.5, 0.5, pts.as_mut_ptr(), &mut real), EosStatus::Ok);
        assert_eq!(real, 0);
        assert!(pts.iter().all(|v| v.is_nan()));
    }
}

#[test]
fn null_and_invalid_arguments() {
    unsafe {
        assert_eq!(eos_dataset_two_dim(0.5, 1.0, ptr::null_mut()), EosStatus::NullPointer);
        assert_eq!(last_error(), "out is null");
        let mut data = ptr::null_mut();
        assert_eq!(eos_dataset_two_dim(f64::NAN, 1.0, &mut data), EosStatus::InvalidArgument);
        assert!(data.is_null());
        assert_eq!(eos_dataset_single(ptr::null(), 2, 1.0, ptr::null(), &mut data), EosStatus::NullPointer);
        let mut len = 0;
        assert_eq!(eos_trajectory_len(ptr::null(), &mut len), EosStatus::NullPointer);
        eos_dataset_free(ptr::null_mut());
        eos_trajectory_free(ptr::null_mut());
        assert_eq!(eos_dataset_two_dim(0.5, 1.0, &mut data), EosStatus::Ok);
        assert_eq!(last_error(), "");
        eos_dataset_free(data);
        assert_eq!(CStr::from_ptr(eos_version()).to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn generated_dataset_shape() {
    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(eos_dataset_generate(8, 3, 2, 11, &mut data), EosStatus::Ok);
        let (mut d, mut n) = (0, 0);
        eos_dataset_shape(data, &mut d, &mut n);
        assert_eq!((d, n), (8, 3));
        eos_dataset_free(data);
    }
}

const FUNCTIONS: &[&str] = &[
    "eos_version",
    "eos_last_error",
    "eos_dataset_single",
    "eos_dataset_two_dim",
    "eos_dataset_generate",
    "eos_dataset_free",
    "eos_dataset_shape",
    "eos_sharpness",
    "eos_run",
    "eos_trajectory_free",
    "eos_trajectory_len",
    "eos_trajectory_residuals",
    "eos_trajectory_sharpness",
    "eos_trajectory_regime",
    "eos_trajectory_termination",
    "eos_trajectory_error_norm",
    "eos_two_cycle",
];

#[test]
fn header_declares_the_api_and_compiles() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(root.join("include/eos_lab.h")).unwrap();
    for f in FUNCTIONS {
        assert!(header.contains(&format!(" {f}(")) || header.contains(&format!("*{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct EosDataset EosDataset;"));
    assert!(header.contains("EOS_STATUS_OK = 0"));

    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler; syntax check skipped");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"eos_lab.h\"\nint main(void) {\n  EosDataset *d = 0;\n  EosStatus s = eos_dataset_two_dim(0.5, 1.0, &d);\n  eos_dataset_free(d);\n  return s == EOS_STATUS_OK ? 0 : 1;\n}\n",
    )
    .unwrap();
    let o = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(root.join("include"))
        .arg(&src)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
