//! Guards the committed fixture corpus against drift: the deterministic
//! generator must reproduce every committed file byte for byte, and the
//! committed directory must contain nothing the generator does not produce.
//! A failure here means either the generator changed (regenerate and commit)
//! or a fixture file was edited by hand (revert it).

use std::collections::BTreeMap;
use std::path::Path;

use radguard::fixtures::{fixtures_dir, generate_all};

/// Maps file name -> content for every regular file directly inside `dir`.
fn dir_contents(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut map = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            map.insert(name, std::fs::read(&path).unwrap());
        }
    }
    map
}

#[test]
fn regenerating_fixtures_reproduces_committed_files_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    generate_all(tmp.path()).unwrap();

    let generated = dir_contents(tmp.path());
    let committed = dir_contents(&fixtures_dir());

    let generated_names: Vec<&String> = generated.keys().collect();
    let committed_names: Vec<&String> = committed.keys().collect();
    assert_eq!(
        generated_names, committed_names,
        "file sets differ between the generator output and the committed fixtures"
    );

    for (name, bytes) in &generated {
        let committed_bytes = &committed[name];
        assert_eq!(
            bytes, committed_bytes,
            "fixture {name} differs from the generator output; \
             regenerate the fixtures or revert the manual edit"
        );
    }
}
