//! Embeds a content hash of the library sources as the code version recorded
//! in run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

fn collect(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(entries) = fs::read_dir(dir) else { return };
    for entry in entries.flatten() {
        let path = entry.path();
        if path.is_dir() {
            collect(&path, out);
        } else if path.extension().is_some_and(|e| e == "rs") {
            out.push(path);
        }
    }
}

fn main() {
    let manifest_dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").unwrap());
    let roots = [manifest_dir.join("../core/src"), manifest_dir.join("src")];
    let mut files = Vec::new();
    for root in &roots {
        println!("cargo:rerun-if-changed={}", root.display());
        collect(root, &mut files);
    }
    let base = manifest_dir.join("..");
    let mut rel: Vec<(String, PathBuf)> = files
        .into_iter()
        .map(|p| {
            let name = p.strip_prefix(&base).unwrap_or(&p).to_string_lossy().replace('\\', "/");
            (name, p)
        })
        .collect();
    rel.sort();
    let mut hasher = Sha256::new();
    for (name, path) in &rel {
        hasher.update(name.as_bytes());
        hasher.update([0]);
        hasher.update(fs::read(path).unwrap_or_default());
        hasher.update([0]);
    }
    let hex: String = hasher.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect();
    println!("cargo:rustc-env=HSR_CODE_VERSION={hex}");
}
