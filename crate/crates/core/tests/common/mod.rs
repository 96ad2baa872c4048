#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use league_core::latex::{parse_bundle, BundleFile, LatexBundle, ParsedPaper};
use serde_json::Value;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn read_json(path: &Path) -> Value {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Every file under `dir`, keyed by its `/`-separated relative path.
pub fn files_under(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn copy_dir(from: &Path, to: &Path) {
    for (rel, bytes) in files_under(from) {
        let dest = to.join(&rel);
        fs::create_dir_all(dest.parent().unwrap()).unwrap();
        fs::write(dest, bytes).unwrap();
    }
}

/// One paper of the parser corpus as a source bundle.
pub fn corpus_bundle(paper: &str) -> LatexBundle {
    let files = files_under(&fixtures().join("parser").join(paper))
        .into_iter()
        .map(|(name, bytes)| BundleFile {
            name,
            content: String::from_utf8(bytes).unwrap(),
        })
        .collect();
    LatexBundle { files }
}

pub fn parsed_corpus() -> BTreeMap<String, ParsedPaper> {
    let manifest = read_json(&fixtures().join("parser/manifest.json"));
    manifest
        .as_array()
        .unwrap()
        .iter()
        .map(|p| {
            let id = p["paper"].as_str().unwrap().to_string();
            let parsed = parse_bundle(&corpus_bundle(&id)).unwrap();
            (id, parsed)
        })
        .collect()
}
