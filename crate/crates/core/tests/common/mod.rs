#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use indexmap::IndexMap;
use nomos_core::models::{load_dataset_inferred, load_model, DataSource, ModelBackend};
use nomos_core::sema::{check_with_schemas, schema_env, TypedSpec};
use nomos_core::stdlib::FunctionRegistry;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(name: &str) -> PathBuf {
    repo_root().join("fixtures").join(name)
}

pub fn spec_path(name: &str) -> PathBuf {
    repo_root().join("specs").join(format!("{name}.nomos"))
}

pub fn corpus_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(repo_root().join("specs"))
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "nomos").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
}

pub fn source(file: &str) -> Arc<DataSource> {
    Arc::new(load_dataset_inferred(&fixture(file), Some("label")).unwrap())
}

/// Data file each corpus spec draws its inputs from.
pub fn data_file_for(spec: &str) -> &'static str {
    match spec.split('_').next().unwrap() {
        "compas" => "compas.csv",
        "mnist" => "mnist_grid.csv",
        "speech" => "speech_grid.csv",
        "hotel" => "hotel.csv",
        "lunar" => "lander_states.csv",
        other => panic!("no fixture for `{other}`"),
    }
}

pub fn read_spec(name: &str) -> String {
    std::fs::read_to_string(spec_path(name)).unwrap()
}

/// Binds every input of `spec_src` to `data`.
pub fn bind_all(spec_src: &str, data: &Arc<DataSource>) -> IndexMap<String, Arc<DataSource>> {
    let spec = nomos_core::parse(spec_src).unwrap();
    spec.inputs.iter().map(|i| (i.name.clone(), Arc::clone(data))).collect()
}

pub fn typed_from_src(src: &str, sources: &IndexMap<String, Arc<DataSource>>) -> Arc<TypedSpec> {
    let spec = nomos_core::parse(src).unwrap();
    let typed = check_with_schemas(&spec, &FunctionRegistry::core(), &schema_env(sources.iter()))
        .unwrap_or_else(|d| panic!("{d:?}"));
    Arc::new(typed)
}

/// A corpus spec, checked against its fixture data.
pub fn corpus_spec(name: &str) -> (Arc<TypedSpec>, IndexMap<String, Arc<DataSource>>) {
    let src = read_spec(name);
    let sources = bind_all(&src, &source(data_file_for(name)));
    (typed_from_src(&src, &sources), sources)
}

pub fn model(file: &str) -> Arc<dyn ModelBackend> {
    load_model(&fixture(file)).unwrap()
}
