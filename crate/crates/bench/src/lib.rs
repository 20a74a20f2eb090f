//! Shared inputs for the benchmarks in `benches/`.

use std::path::{Path, PathBuf};

use movesmith_core::model::{build_index, ProjectIndex};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

pub fn fixture_index(name: &str) -> ProjectIndex {
    build_index(&[fixture(name)]).expect("fixture parses")
}
