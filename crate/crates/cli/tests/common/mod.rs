#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsonschema::{Registry, Resource, Validator};
use serde_json::Value;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stationing"))
}

/// Runs the binary and returns the exit code and output.
pub fn run(args: &[&str]) -> (i32, Output) {
    let out = bin().args(args).output().expect("binary runs");
    (out.status.code().expect("exit code"), out)
}

/// Runs the binary, panicking with stderr unless it exits 0.
pub fn ok(args: &[&str]) {
    let (code, out) = run(args);
    assert_eq!(
        code,
        0,
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn read_json(path: &Path) -> Value {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

pub fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// The shipped schemas, keyed by the output file name they describe.
pub struct Schemas {
    by_file: BTreeMap<String, Validator>,
}

impl Schemas {
    pub fn load() -> Self {
        let dir = workspace_root().join("docs/schemas");
        let index: BTreeMap<String, String> =
            serde_json::from_value(read_json(&dir.join("index.json"))).unwrap();
        let mut docs = BTreeMap::new();
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_str().unwrap().to_string();
            if name.ends_with(".schema.json") {
                docs.insert(name, read_json(&path));
            }
        }
        let registry = Registry::new()
            .extend(docs.values().map(|d| {
                let id = d["$id"].as_str().expect("schema $id").to_string();
                (id, Resource::from_contents(d.clone()))
            }))
            .unwrap()
            .prepare()
            .unwrap();
        let by_file = index
            .into_iter()
            .map(|(file, schema)| {
                let doc = docs
                    .get(&schema)
                    .unwrap_or_else(|| panic!("missing {schema}"));
                let v = jsonschema::options()
                    .with_registry(&registry)
                    .build(doc)
                    .unwrap();
                (file, v)
            })
            .collect();
        Self { by_file }
    }

    fn check(&self, key: &str, path: &Path, value: &Value) -> Result<(), String> {
        let v = self
            .by_file
            .get(key)
            .ok_or_else(|| format!("{}: no schema", path.display()))?;
        let errors: Vec<String> = v
            .iter_errors(value)
            .take(3)
            .map(|e| format!("{} at {}", e, e.instance_path()))
            .collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(format!("{}: {}", path.display(), errors.join("; ")))
        }
    }

    /// Validates every JSON and trace file under `dir`; returns the number
    /// of documents checked.
    pub fn validate_dir(&self, dir: &Path) -> Result<usize, String> {
        let mut n = 0;
        let mut stack = vec![dir.to_path_buf()];
        while let Some(d) = stack.pop() {
            for entry in fs::read_dir(&d).map_err(|e| e.to_string())? {
                let path = entry.map_err(|e| e.to_string())?.path();
                if path.is_dir() {
                    stack.push(path);
                    continue;
                }
                let name = path.file_name().unwrap().to_str().unwrap().to_string();
                if name.ends_with(".json") {
                    self.check(&name, &path, &read_json(&path))?;
                    n += 1;
                } else if name.ends_with(".jsonl") {
                    for line in fs::read_to_string(&path).unwrap().lines() {
                        let value: Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
                        self.check("traces/*.jsonl", &path, &value)?;
                        n += 1;
                    }
                }
            }
        }
        Ok(n)
    }
}
