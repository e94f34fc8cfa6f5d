use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include "barcode_grad.h"

int main(void) {
    BgFilter *f = NULL;
    BgBarcode *b = NULL;
    size_t nf = 0, ni = 0;
    double birth = 0, death = 0;
    if (bg_filter_from_json("{\"simplices\": [[0,1],[0,2],[1,2]], \"values\": [0,0,0,1,1,2]}", &f) != BG_STATUS_OK) return 1;
    if (bg_diagram(f, 0, &b) != BG_STATUS_OK) return 2;
    if (bg_barcode_len(b, &nf, &ni) != BG_STATUS_OK || nf != 2 || ni != 1) return 3;
    if (bg_barcode_finite(b, 0, &birth, &death) != BG_STATUS_OK || birth != 0.0 || death != 1.0) return 4;
    bg_barcode_free(b);
    if (bg_diagram(f, 1, &b) != BG_STATUS_OK) return 5;
    if (bg_barcode_len(b, &nf, &ni) != BG_STATUS_OK || nf != 0 || ni != 1) return 6;
    if (bg_barcode_infinite(b, 0, &birth) != BG_STATUS_OK || birth != 2.0) return 8;
    bg_barcode_free(b);
    if (bg_diagram(f, 9, &b) != BG_STATUS_BAD_DEGREE) return 7;
    printf("%s\n", bg_last_error_message());
    bg_filter_free(f);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_static_library() {
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler on PATH");
        return;
    }
    let lib = target_dir().join("libbarcode_grad_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    let bin = tmp.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).contains("degree 9"));
}
