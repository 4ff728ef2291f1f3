//! The generated header must compile as C and as C++.

use std::path::Path;
use std::process::Command;

fn check(compiler: &str, extra: &[&str]) {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let status = Command::new(compiler)
        .args(["-fsyntax-only", "-Wall", "-Wextra", "-Werror"])
        .args(extra)
        .arg("-I")
        .arg(root.join("include"))
        .arg(root.join("tests/c/smoke.c"))
        .status();
    match status {
        Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
        Err(e) => panic!("cannot run {compiler}: {e}"),
    }
}

#[test]
fn compiles_as_c() {
    check("cc", &["-std=c99"]);
}

#[test]
fn compiles_as_cxx() {
    check("c++", &["-x", "c++", "-std=c++11"]);
}
