//! Compiles `tests/c/smoke.c` against the generated header and the static
//! library, then runs it on the miniature fixture.

use std::path::{Path, PathBuf};
use std::process::Command;

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

fn static_lib() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    profile_dir.join("libpopaudit_ffi.a")
}

#[test]
fn header_declares_every_exported_function() {
    let header = std::fs::read_to_string(manifest_dir().join("include/popaudit.h")).unwrap();
    let source = std::fs::read_to_string(manifest_dir().join("src/lib.rs")).unwrap();
    let exported: Vec<&str> = source
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 15, "found only {exported:?}");
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from popaudit.h");
    }
    assert!(header.contains("typedef struct PopauditReport PopauditReport;"));
}

#[test]
fn c_program_links_and_runs() {
    if !have_cc() {
        eprintln!("SKIP: no C compiler on PATH");
        return;
    }
    let lib = static_lib();
    assert!(lib.exists(), "{} not built", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest_dir().join("include"))
        .arg(manifest_dir().join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");

    let fixtures = manifest_dir().join("../core/tests/fixtures/mini");
    let out = Command::new(&exe)
        .arg(fixtures.join("ratings.dat"))
        .arg(fixtures.join("movies.dat"))
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("users=100 items=150"), "{stdout}");
    assert!(stdout.contains("jsd=0.500000"), "{stdout}");
}
