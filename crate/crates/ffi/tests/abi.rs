use std::ffi::{c_char, CStr};
use std::path::PathBuf;
use std::ptr;

use operad_cells_ffi::*;

fn text(mut f: impl FnMut(*mut c_char, usize, *mut usize) -> i32) -> (i32, String) {
    let mut buf = vec![0 as c_char; 4096];
    let mut len = 0usize;
    let code = f(buf.as_mut_ptr(), buf.len(), &mut len);
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_string();
    (code, s)
}

fn last_error() -> String {
    text(|b, c, l| unsafe { oc_last_error_message(b, c, l) }).1
}

#[test]
fn catalog_handles() {
    let mut cat = ptr::null_mut();
    assert_eq!(unsafe { oc_catalog_enumerate(OC_KIND_BAR, 3, 1_000_000, &mut cat) }, OC_OK);
    let mut n = 0;
    assert_eq!(unsafe { oc_catalog_len(cat, &mut n) }, OC_OK);
    assert_eq!(n, 84);
    let counts: Vec<u64> = (0..5)
        .map(|d| {
            let mut c = 0;
            unsafe { oc_catalog_count(cat, d, &mut c) };
            c
        })
        .collect();
    assert_eq!(counts, [6, 30, 36, 12, 0]);
    let mut dim = 9;
    let (code, first) = text(|b, c, l| unsafe { oc_catalog_record(cat, 0, b, c, l, &mut dim) });
    assert_eq!(code, OC_OK);
    assert_eq!(dim, 0);
    assert!(first.contains("root="));

    let dir = std::env::temp_dir().join(format!("oc-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = std::ffi::CString::new(dir.join("bar3.catalog").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { oc_catalog_write(cat, path.as_ptr()) }, OC_OK);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { oc_catalog_read(path.as_ptr(), &mut back) }, OC_OK);
    let h1 = text(|b, c, l| unsafe { oc_catalog_hash(cat, b, c, l) }).1;
    let h2 = text(|b, c, l| unsafe { oc_catalog_hash(back, b, c, l) }).1;
    assert_eq!(h1, h2);
    assert_eq!(h1.len(), 64);
    unsafe {
        oc_catalog_free(cat);
        oc_catalog_free(back);
    }
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn error_codes() {
    let mut cat = ptr::null_mut();
    assert_eq!(unsafe { oc_catalog_enumerate(OC_KIND_FM, 5, 10, &mut cat) }, OC_RESOURCE);
    assert!(last_error().contains("limit"));
    assert_eq!(unsafe { oc_catalog_enumerate(7, 3, 10, &mut cat) }, OC_VALIDATION);
    assert_eq!(unsafe { oc_catalog_len(ptr::null(), ptr::null_mut()) }, OC_NULL);
    let bad = c"1212";
    let (code, _) = text(|b, c, l| unsafe { oc_cell_boundary(OC_KIND_CACTI, bad.as_ptr(), b, c, l) });
    assert_eq!(code, OC_VALIDATION);
    assert!(last_error().contains("complexity"));
}

#[test]
fn small_buffers_report_required_length() {
    let mut buf = [0 as c_char; 4];
    let mut len = 0;
    let code = unsafe { oc_series_coefficient(OC_SERIES_P, 5, 3, buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(code, OC_BUFFER);
    assert_eq!(len, "1 + 3t + 2t^2".len());
}

#[test]
fn series_boundary_and_homology() {
    let (_, p) = text(|b, c, l| unsafe { oc_series_coefficient(OC_SERIES_P, 5, 3, b, c, l) });
    assert_eq!(p, "1 + 3t + 2t^2");
    let (_, f) = text(|b, c, l| unsafe { oc_series_coefficient(OC_SERIES_F, 5, 3, b, c, l) });
    assert_eq!(f, "3 + 9t + 8t^2 + 2t^3");
    let cell = c"121";
    let (code, d) = text(|b, c, l| unsafe { oc_cell_boundary(OC_KIND_CACTI, cell.as_ptr(), b, c, l) });
    assert_eq!(code, OC_OK);
    assert_eq!(d.lines().count(), 2);
    let mut betti = [0u64; 8];
    let (mut n, mut tf) = (0usize, false);
    let code = unsafe { oc_homology(OC_KIND_FM, 3, 1_000_000, betti.as_mut_ptr(), betti.len(), &mut n, &mut tf) };
    assert_eq!(code, OC_OK);
    assert!(tf);
    assert_eq!(&betti[..3], &[1, 3, 2]);
}

#[test]
fn trace_handle() {
    let xy = [0.0, 0.0, 1.0, 0.0, 2.0, 0.0];
    let w = [1.0, 1.0, 1.0];
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { oc_trace(xy.as_ptr(), w.as_ptr(), 3, &mut t) }, OC_OK);
    let (_, cactus) = text(|b, c, l| unsafe { oc_trace_cactus(t, b, c, l) });
    assert_eq!(cactus, "32123 (1/2,1/2,1,1/2,1/2)");
    let mut n = 0;
    unsafe { oc_trace_critical_count(t, &mut n) };
    assert_eq!(n, 2);
    unsafe { oc_trace_free(t) };
    let same = [0.0, 0.0, 0.0, 0.0];
    assert_eq!(unsafe { oc_trace(same.as_ptr(), w.as_ptr(), 2, &mut t) }, OC_VALIDATION);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/operad_cells.h")).unwrap();
    for name in [
        "OC_OK",
        "OC_BUFFER",
        "typedef struct OcCatalog OcCatalog",
        "typedef struct OcTrace OcTrace",
        "oc_last_error_message",
        "oc_catalog_enumerate",
        "oc_trace_cactus",
        "oc_homology",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

/// Compiles a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    let lib = [deps.join("liboperad_cells_ffi.a"), deps.parent().unwrap().join("liboperad_cells_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
        .expect("static library built next to the test binary");
    let out = std::env::temp_dir().join(format!("oc-smoke-{}", std::process::id()));
    let status = std::process::Command::new(cc)
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let run = std::process::Command::new(&out).output().unwrap();
    std::fs::remove_file(&out).ok();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert_eq!(stdout, "36 1,2,3\n212 (1/2,1,1/2)\n");
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}
