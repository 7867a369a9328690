//! sha256 listing of every file written by a run.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.txt";

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// `<sha256>  <path relative to root>` lines, sorted by path. The manifest itself is skipped.
pub fn manifest(root: &Path, files: &[PathBuf]) -> std::io::Result<String> {
    let mut lines = Vec::with_capacity(files.len());
    for f in files {
        let rel = f.strip_prefix(root).unwrap_or(f);
        if rel == Path::new(MANIFEST_NAME) {
            continue;
        }
        let rel = rel.to_string_lossy().replace('\\', "/");
        lines.push((rel, sha256_file(f)?));
    }
    lines.sort();
    lines.dedup();
    Ok(lines.into_iter().map(|(p, h)| format!("{h}  {p}\n")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("b.txt");
        let b = dir.path().join("a.txt");
        std::fs::write(&a, "abc").unwrap();
        std::fs::write(&b, "").unwrap();
        let m = manifest(dir.path(), &[a, b, dir.path().join(MANIFEST_NAME)]).unwrap();
        let lines: Vec<&str> = m.lines().collect();
        assert_eq!(lines[0], "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855  a.txt");
        assert_eq!(lines[1], "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad  b.txt");
        assert_eq!(lines.len(), 2);
    }
}
