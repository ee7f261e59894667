//! Write the bundled fixture corpus to a directory.
//!
//! cargo run -p sqlforge-core --example build_fixtures -- /tmp/fixtures

use std::path::PathBuf;

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).expect("usage: build_fixtures <dir>"));
    let fx = sqlforge_core::fixtures::build_fixture_corpus(&root).expect("fixture corpus");
    println!("{} samples written to {}", fx.samples.len(), fx.samples_path.display());
}
