use std::process::Command;

fn main() {
    let describe = Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string());
    println!("cargo:rustc-env=IBPBMF_GIT_DESCRIBE={describe}");
    println!("cargo:rerun-if-changed=build.rs");
    if let Ok(head) = Command::new("git").args(["rev-parse", "--git-path", "HEAD"]).output() {
        if let Ok(p) = String::from_utf8(head.stdout) {
            if !p.trim().is_empty() {
                println!("cargo:rerun-if-changed={}", p.trim());
            }
        }
    }
}
