use std::env;
use std::path::PathBuf;
use std::process::Command;

fn main() {
    let manifest = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    let runtime_src = manifest.join("../runtime/src");
    println!("cargo:rerun-if-changed={}", runtime_src.display());
    println!("cargo:rerun-if-env-changed=LAMINA_RUNTIME");
    let out = PathBuf::from(env::var("OUT_DIR").unwrap());
    let rustc = env::var("RUSTC").unwrap_or_else(|_| "rustc".into());
    let status = Command::new(rustc)
        .args(["--crate-type", "staticlib", "--crate-name", "lamina_rt", "--edition", "2021"])
        .args(["-C", "panic=abort", "-C", "opt-level=2", "-C", "debug-assertions=off", "--cfg", "native_runtime"])
        .arg("--out-dir")
        .arg(&out)
        .arg(runtime_src.join("lib.rs"))
        .status()
        .expect("failed to run rustc");
    assert!(status.success(), "building the native runtime failed");
    println!("cargo:rustc-env=LAMINA_RT_ARCHIVE={}", out.join("liblamina_rt.a").display());
}
