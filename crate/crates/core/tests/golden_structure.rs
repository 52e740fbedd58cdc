//! Golden-file tests: fixture documents must parse to the expected
//! element trees byte-exactly. Regenerate with UPDATE_GOLDEN=1 after an
//! intentional parser change and review the diff.

use std::fs;
use std::path::PathBuf;

use adrtag::structure::{parse_structure, structure_to_json};

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn check(name: &str) {
    let dir = golden_dir();
    let text = fs::read_to_string(dir.join(format!("{name}.txt"))).unwrap();
    let json = structure_to_json(&parse_structure(&text));
    let expected_path = dir.join(format!("{name}.expected.json"));
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&expected_path, &json).unwrap();
    }
    let expected = fs::read_to_string(&expected_path)
        .unwrap_or_else(|_| panic!("missing golden file {}", expected_path.display()));
    assert_eq!(json, expected, "golden mismatch for {name}");
}

#[test]
fn heading_fixture() {
    check("heading");
}

#[test]
fn table_fixture() {
    check("table");
}

#[test]
fn list_fixture() {
    check("list");
}

#[test]
fn single_asterisk_nonlist_fixture() {
    check("nonlist");
}
