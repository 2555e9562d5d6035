//! The deterministic content of an experiment output directory: every file
//! except the wall-clock ones, with time fields and columns removed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

const CLOCK_FILES: [&str; 3] = ["timings.json", "models/training_times.json", "evaluation.json"];
const CLOCK_KEYS: [&str; 3] = ["training_time", "time_efficiency_pct", "identification_latency"];

fn strip(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.retain(|k, _| !CLOCK_KEYS.contains(&k.as_str()));
            m.values_mut().for_each(strip);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip),
        _ => {}
    }
}

fn normalize(rel: &str, bytes: Vec<u8>) -> Vec<u8> {
    if rel == "comparison.csv" {
        let text = String::from_utf8(bytes).unwrap();
        return text
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
            .collect::<String>()
            .into_bytes();
    }
    if rel.ends_with(".json") {
        let mut v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        strip(&mut v);
        return serde_json::to_vec_pretty(&v).unwrap();
    }
    bytes
}

fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            walk(root, &path, out);
            continue;
        }
        let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
        if !CLOCK_FILES.contains(&rel.as_str()) {
            let bytes = normalize(&rel, fs::read(&path).unwrap());
            out.insert(rel, bytes);
        }
    }
}

pub fn deterministic_outputs(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Names of files that differ or exist on one side only.
pub fn differences(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    a.keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect()
}
