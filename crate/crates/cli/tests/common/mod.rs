#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsonschema::{Registry, Validator};
use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn qcase(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcase"))
        .args(args)
        .output()
        .expect("qcase runs")
}

/// Runs `qcase <cmd> <fixture> <rest..>`.
pub fn on_fixture(cmd: &str, name: &str, rest: &[&str]) -> Output {
    let path = fixture(name);
    let mut args = vec![cmd, path.to_str().expect("utf-8 path")];
    args.extend_from_slice(rest);
    qcase(&args)
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn load(path: &Path) -> Value {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Validator for `schemas/<name>.schema.json`, with every schema in the
/// directory registered under its `$id` so cross-references resolve offline.
pub fn validator(name: &str) -> Validator {
    let mut docs = Vec::new();
    for entry in fs::read_dir(schema_dir()).expect("schemas directory") {
        let path = entry.expect("dir entry").path();
        let doc = load(&path);
        let id = doc["$id"].as_str().expect("schema has $id").to_string();
        docs.push((id, doc));
    }
    let registry = Registry::new()
        .extend(docs)
        .expect("schema ids are valid URIs")
        .prepare()
        .expect("schemas resolve");
    let root = load(&schema_dir().join(format!("{name}.schema.json")));
    jsonschema::options()
        .with_registry(&registry)
        .build(&root)
        .unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Validation errors of `json` against schema `name`, one per line.
pub fn schema_errors(name: &str, json: &str) -> Vec<String> {
    let value: Value = serde_json::from_str(json).expect("output is JSON");
    validator(name)
        .iter_errors(&value)
        .map(|e| format!("{}: {e}", e.instance_path()))
        .collect()
}
