#![allow(dead_code)]

use std::path::{Path, PathBuf};

use cranial_service::project::PROJECT_FILE;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic_shell")
}

/// Copy of the committed synthetic project without any cached outputs.
pub fn fresh_fixture(into: &Path) -> PathBuf {
    std::fs::create_dir_all(into).unwrap();
    let dst = into.join(PROJECT_FILE);
    std::fs::copy(fixture_dir().join(PROJECT_FILE), &dst).unwrap();
    dst
}
