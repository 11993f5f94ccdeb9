use std::ffi::{CStr, CString};
use std::ptr;

use dccc_ffi::*;

fn last_error() -> String {
    let p = dccc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn small_config() -> *mut DcccConfig {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(dccc_config_default(&mut cfg), DcccStatus::Ok);
        for (k, v) in [
            ("num_ids", "8"),
            ("images_per_id", "6"),
            ("input_dim", "16"),
            ("intra_noise", "0.05"),
            ("eval_ids", "4"),
            ("output_dim", "8"),
            ("k_neighbors", "5"),
            ("min_samples", "3"),
            ("pk_p", "4"),
            ("pk_k", "2"),
            ("epochs", "3"),
            ("iters_per_epoch", "5"),
        ] {
            assert_eq!(dccc_config_set(cfg, c(k).as_ptr(), c(v).as_ptr()), DcccStatus::Ok, "{k}");
        }
    }
    cfg
}

#[test]
fn config_set_get_and_errors() {
    let cfg = small_config();
    unsafe {
        let mut buf = [0 as std::ffi::c_char; 32];
        let mut needed = 0;
        assert_eq!(
            dccc_config_get(cfg, c("epochs").as_ptr(), buf.as_mut_ptr(), buf.len(), &mut needed),
            DcccStatus::Ok
        );
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), "3");
        assert_eq!(needed, 2);

        assert_eq!(
            dccc_config_get(cfg, c("scheduler").as_ptr(), buf.as_mut_ptr(), 2, &mut needed),
            DcccStatus::BufferTooSmall
        );
        assert_eq!(needed, "expo".len() + 1);

        assert_eq!(dccc_config_set(cfg, c("bogus").as_ptr(), c("1").as_ptr()), DcccStatus::Config);
        assert!(last_error().contains("bogus"));
        assert_eq!(dccc_config_set(cfg, c("gamma").as_ptr(), c("abc").as_ptr()), DcccStatus::Config);
        // an invalid value leaves the config untouched
        assert_eq!(dccc_config_set(cfg, c("epochs").as_ptr(), c("0").as_ptr()), DcccStatus::Config);
        dccc_config_get(cfg, c("epochs").as_ptr(), buf.as_mut_ptr(), buf.len(), ptr::null_mut());
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), "3");

        assert_eq!(dccc_config_set(ptr::null_mut(), c("gamma").as_ptr(), c("0.1").as_ptr()), DcccStatus::NullPointer);
        dccc_config_free(cfg);
        dccc_config_free(ptr::null_mut());
    }
}

#[test]
fn eps_schedule_through_abi() {
    let cfg = small_config();
    unsafe {
        let mut eps = 0.0;
        assert_eq!(dccc_config_eps_at(cfg, 0, &mut eps), DcccStatus::Ok);
        assert_eq!(eps, 0.7);
        assert_eq!(dccc_config_eps_at(cfg, 1_000, &mut eps), DcccStatus::Ok);
        assert_eq!(eps, 0.35);
        assert_eq!(dccc_config_eps_at(cfg, 0, ptr::null_mut()), DcccStatus::NullPointer);
        dccc_config_free(cfg);
    }
}

#[test]
fn config_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.conf");
    std::fs::write(&good, "# test\nepochs = 4\n").unwrap();
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "epochs = 4\nwat = 1\n").unwrap();
    unsafe {
        let mut cfg = ptr::null_mut();
        let p = c(good.to_str().unwrap());
        assert_eq!(dccc_config_from_file(p.as_ptr(), &mut cfg), DcccStatus::Ok);
        dccc_config_free(cfg);

        let p = c(bad.to_str().unwrap());
        assert_eq!(dccc_config_from_file(p.as_ptr(), &mut cfg), DcccStatus::Parse);
        assert!(last_error().contains("line 2"));

        let p = c(dir.path().join("missing").to_str().unwrap());
        assert_eq!(dccc_config_from_file(p.as_ptr(), &mut cfg), DcccStatus::Io);
    }
}

#[test]
fn train_and_read_reports() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let mut run = ptr::null_mut();
        let d = c(dir.path().to_str().unwrap());
        assert_eq!(dccc_train_to_dir(cfg, d.as_ptr(), &mut run), DcccStatus::Ok);
        assert_eq!(dccc_run_num_epochs(run), 3);
        let mut r: DcccEpochReport = std::mem::zeroed();
        assert_eq!(dccc_run_report(run, 2, &mut r), DcccStatus::Ok);
        assert_eq!(r.epoch, 2);
        assert!(r.map >= 0.0 && r.map <= 1.0);
        assert!(r.r1 <= r.r5 && r.r5 <= r.r10);
        assert_eq!(dccc_run_report(run, 3, &mut r), DcccStatus::InvalidArgument);

        let mut needed = 0;
        assert_eq!(dccc_run_reports_csv(run, ptr::null_mut(), 0, &mut needed), DcccStatus::BufferTooSmall);
        let mut buf = vec![0 as std::ffi::c_char; needed];
        assert_eq!(dccc_run_reports_csv(run, buf.as_mut_ptr(), buf.len(), ptr::null_mut()), DcccStatus::Ok);
        let csv = CStr::from_ptr(buf.as_ptr()).to_str().unwrap();
        let on_disk = std::fs::read_to_string(dir.path().join("reports.csv")).unwrap();
        assert_eq!(csv, on_disk);
        assert!(dir.path().join("checkpoint.json").exists());

        // an in-memory run of the same config is identical
        let mut again = ptr::null_mut();
        assert_eq!(dccc_train(cfg, &mut again), DcccStatus::Ok);
        let mut buf2 = vec![0 as std::ffi::c_char; needed];
        dccc_run_reports_csv(again, buf2.as_mut_ptr(), buf2.len(), ptr::null_mut());
        assert_eq!(buf, buf2);

        dccc_run_free(run);
        dccc_run_free(again);
        assert_eq!(dccc_run_num_epochs(ptr::null()), 0);
        dccc_config_free(cfg);
    }
}

#[test]
fn degenerate_report_uses_nan() {
    let cfg = small_config();
    unsafe {
        dccc_config_set(cfg, c("pk_p").as_ptr(), c("50").as_ptr());
        dccc_config_set(cfg, c("epochs").as_ptr(), c("1").as_ptr());
        let mut run = ptr::null_mut();
        assert_eq!(dccc_train(cfg, &mut run), DcccStatus::Ok);
        let mut r: DcccEpochReport = std::mem::zeroed();
        dccc_run_report(run, 0, &mut r);
        assert!(r.loss.is_nan());
        dccc_run_free(run);
        dccc_config_free(cfg);
    }
}

#[test]
fn cluster_raw_features() {
    // two tight groups of five on orthogonal axes plus a lone point
    let mut f = Vec::new();
    for i in 0..5 {
        f.extend([1.0, 0.01 * i as f64, 0.0]);
    }
    for i in 0..5 {
        f.extend([0.0, 1.0, 0.01 * i as f64]);
    }
    f.extend([0.0, 0.0, 1.0]);
    let mut labels = [0i64; 11];
    let mut clusters = 0;
    unsafe {
        let s = dccc_cluster_features(f.as_ptr(), 11, 3, 4, 0.5, 3, labels.as_mut_ptr(), &mut clusters);
        assert_eq!(s, DcccStatus::Ok, "{}", last_error());
    }
    assert_eq!(clusters, 2);
    assert!(labels[..5].iter().all(|&l| l == labels[0]));
    assert!(labels[5..10].iter().all(|&l| l == labels[5]));
    assert_ne!(labels[0], labels[5]);
    assert!((-1..2).contains(&labels[10]));
}

#[test]
fn cluster_rejects_bad_input() {
    let f = [0.0, 0.0, 1.0, 0.0];
    let mut labels = [0i64; 2];
    unsafe {
        assert_eq!(
            dccc_cluster_features(f.as_ptr(), 2, 2, 1, 0.5, 1, labels.as_mut_ptr(), ptr::null_mut()),
            DcccStatus::InvalidArgument
        );
        assert!(last_error().contains("row 0"));
        assert_eq!(
            dccc_cluster_features(ptr::null(), 2, 2, 1, 0.5, 1, labels.as_mut_ptr(), ptr::null_mut()),
            DcccStatus::NullPointer
        );
        let ok = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(
            dccc_cluster_features(ok.as_ptr(), 2, 2, 1, 0.0, 1, labels.as_mut_ptr(), ptr::null_mut()),
            DcccStatus::Config
        );
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(dccc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/dccc.h")).unwrap();
    for name in [
        "dccc_last_error_message",
        "dccc_version",
        "dccc_config_default",
        "dccc_config_from_file",
        "dccc_config_set",
        "dccc_config_get",
        "dccc_config_eps_at",
        "dccc_config_free",
        "dccc_train",
        "dccc_train_to_dir",
        "dccc_run_num_epochs",
        "dccc_run_report",
        "dccc_run_reports_csv",
        "dccc_run_free",
        "dccc_cluster_features",
        "typedef struct DcccConfig DcccConfig",
        "typedef struct DcccRun DcccRun",
        "DCCC_STATUS_OK = 0",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"dccc.h\"\nint main(void) {\n  DcccConfig *cfg = 0;\n  if (dccc_config_default(&cfg) != DCCC_STATUS_OK) return 1;\n  double eps;\n  dccc_config_eps_at(cfg, 3, &eps);\n  dccc_config_free(cfg);\n  return 0;\n}\n",
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status();
    match status {
        Ok(s) => assert!(s.success(), "header failed to compile"),
        Err(e) => eprintln!("skipping: no C compiler ({e})"),
    }
}
