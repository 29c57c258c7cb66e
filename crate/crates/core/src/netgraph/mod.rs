//! Declarative model graphs: the JSON config format, shape inference, exact
//! cost accounting, weight (de)serialization and whole-network execution.

mod config;
mod cost;
mod model;
mod weights;

pub use config::{
    builtin, builtin_configs, parse_config, LayerSpec, ModelGraph, Source, BUILTIN_NAMES,
    DEFAULT_INPUT_SIZE,
};
pub use cost::{count_costs, CostReport, LayerCost};
pub use model::{check_input, infer_shapes, LayerShape, Model};
pub use weights::{
    blob_path, export_weights, load_weights, manifest, read_weights, save_weights, ManifestEntry,
};

/// Golden JSON schema of the config format.
pub const CONFIG_SCHEMA: &str = include_str!("../../schema/model_config.schema.json");

/// Resolves `builtin:NAME` or a config file path.
pub fn load_config(spec: &str) -> crate::Result<ModelGraph> {
    match spec.strip_prefix("builtin:") {
        Some(name) => builtin(name),
        None => {
            let text = std::fs::read_to_string(spec).map_err(|e| crate::Error::io(spec, e))?;
            parse_config(&text)
        }
    }
}

/// Resolves `random:SEED` or a weight manifest path (blob alongside, `.bin`).
pub fn load_model(graph: ModelGraph, weights: &str) -> crate::Result<Model> {
    match weights.strip_prefix("random:") {
        Some(seed) => {
            let seed = seed.parse().map_err(|_| {
                crate::Error::config("load_model", format!("`{seed}` is not a valid u64 seed"))
            })?;
            Model::random(graph, seed)
        }
        None => read_weights(&graph, std::path::Path::new(weights)),
    }
}
