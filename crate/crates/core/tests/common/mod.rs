#![allow(dead_code)]

use std::path::PathBuf;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn blessing() -> bool {
    std::env::var_os("CRITEVAL_BLESS").is_some_and(|v| v == "1")
}

/// Compares `actual` with the committed file, or rewrites the file when
/// `CRITEVAL_BLESS=1`.
pub fn check_golden(rel: &str, actual: &str) -> Result<(), String> {
    let path = fixture(rel);
    if blessing() {
        std::fs::create_dir_all(path.parent().unwrap()).map_err(|e| e.to_string())?;
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path)
        .map_err(|e| format!("{}: {e} (run with CRITEVAL_BLESS=1 to create it)", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        let line = expected
            .lines()
            .zip(actual.lines())
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| expected.lines().count().min(actual.lines().count()));
        Err(format!("{} differs from the generated output near line {}", path.display(), line + 1))
    }
}
