use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::blocks::{Block, ConvUnits};
use crate::error::{Error, Result, WeightIssue};

use super::config::ModelGraph;
use super::model::Model;

/// Location of one tensor inside the weight blob; `offset` counts f32 elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ManifestEntry {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Weight,
    Scale,
    Bias,
}

struct Expected {
    name: String,
    shape: Vec<usize>,
    layer: usize,
    unit: usize,
    slot: Slot,
}

fn expected(blocks: &[Block]) -> Vec<Expected> {
    let mut out = Vec::new();
    for (layer, b) in blocks.iter().enumerate() {
        for (unit, (name, c)) in b.convs().into_iter().enumerate() {
            let oc = c.out_channels();
            let prefix = format!("layer{layer}.{name}");
            out.push(Expected {
                name: format!("{prefix}.weight"),
                shape: c.attrs().weight_shape().to_vec(),
                layer,
                unit,
                slot: Slot::Weight,
            });
            if c.norm {
                out.push(Expected {
                    name: format!("{prefix}.scale"),
                    shape: vec![oc],
                    layer,
                    unit,
                    slot: Slot::Scale,
                });
            }
            out.push(Expected {
                name: format!("{prefix}.bias"),
                shape: vec![oc],
                layer,
                unit,
                slot: Slot::Bias,
            });
        }
    }
    out
}

/// Manifest describing every tensor of `model`, packed back to back.
pub fn manifest(model: &Model) -> Vec<ManifestEntry> {
    let mut offset = 0;
    expected(model.blocks())
        .into_iter()
        .map(|e| {
            let entry = ManifestEntry {
                offset,
                name: e.name,
                shape: e.shape,
            };
            offset += entry.numel();
            entry
        })
        .collect()
}

/// Manifest plus little-endian f32 blob for `model`.
pub fn export_weights(model: &Model) -> (Vec<ManifestEntry>, Vec<u8>) {
    let entries = manifest(model);
    let mut blob = Vec::with_capacity(entries.iter().map(|e| e.numel() * 4).sum());
    for b in model.blocks() {
        for (_, c) in b.convs() {
            let p = &c.params;
            let mut tensors = vec![&p.weights];
            if c.norm {
                tensors.push(&p.scale);
            }
            tensors.push(&p.bias);
            for t in tensors {
                for v in t {
                    blob.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    (entries, blob)
}

/// Binds `manifest` + `blob` to a fresh model of `graph`.
///
/// Every entry is checked before anything is copied; all problems are
/// reported together and no model is produced unless the binding is complete.
pub fn load_weights(graph: &ModelGraph, manifest: &[ManifestEntry], blob: &[u8]) -> Result<Model> {
    let mut model = Model::zeros(graph.clone())?;
    let want = expected(model.blocks());
    let by_name: HashMap<&str, usize> = want
        .iter()
        .enumerate()
        .map(|(i, e)| (e.name.as_str(), i))
        .collect();

    let mut issues = Vec::new();
    if !blob.len().is_multiple_of(4) {
        issues.push(WeightIssue {
            name: "<blob>".into(),
            expected: None,
            found: None,
            detail: format!("length {} is not a whole number of f32 values", blob.len()),
        });
    }
    let elems = blob.len() / 4;
    let mut bound: Vec<Option<&ManifestEntry>> = vec![None; want.len()];
    for entry in manifest {
        let Some(&i) = by_name.get(entry.name.as_str()) else {
            issues.push(WeightIssue {
                name: entry.name.clone(),
                expected: None,
                found: Some(entry.shape.clone()),
                detail: "not a parameter of this graph".into(),
            });
            continue;
        };
        if bound[i].is_some() {
            issues.push(WeightIssue {
                name: entry.name.clone(),
                expected: None,
                found: None,
                detail: "listed more than once".into(),
            });
            continue;
        }
        if entry.shape != want[i].shape {
            issues.push(WeightIssue {
                name: entry.name.clone(),
                expected: Some(want[i].shape.clone()),
                found: Some(entry.shape.clone()),
                detail: "shape mismatch".into(),
            });
        } else if entry
            .offset
            .checked_add(entry.numel())
            .is_none_or(|end| end > elems)
        {
            issues.push(WeightIssue {
                name: entry.name.clone(),
                expected: None,
                found: None,
                detail: format!(
                    "elements [{}, {}) lie outside the blob of {elems} values",
                    entry.offset,
                    entry.offset.saturating_add(entry.numel())
                ),
            });
        }
        bound[i] = Some(entry);
    }
    for (e, b) in want.iter().zip(&bound) {
        if b.is_none() {
            issues.push(WeightIssue {
                name: e.name.clone(),
                expected: Some(e.shape.clone()),
                found: None,
                detail: "missing from manifest".into(),
            });
        }
    }
    if !issues.is_empty() {
        return Err(Error::Weights(issues));
    }

    let read = |entry: &ManifestEntry| -> Vec<f32> {
        blob[entry.offset * 4..(entry.offset + entry.numel()) * 4]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect()
    };
    let blocks = model.blocks_mut();
    for (e, entry) in want.iter().zip(bound) {
        let entry = entry.expect("all entries bound");
        let mut units = blocks[e.layer].convs_mut();
        let p = &mut units[e.unit].1.params;
        let dst = match e.slot {
            Slot::Weight => &mut p.weights,
            Slot::Scale => &mut p.scale,
            Slot::Bias => &mut p.bias,
        };
        *dst = read(entry);
    }
    Ok(model)
}

/// Sibling blob path for a manifest: `model.json` → `model.bin`.
pub fn blob_path(manifest_path: &Path) -> PathBuf {
    manifest_path.with_extension("bin")
}

/// Writes the manifest to `manifest_path` and the blob next to it.
pub fn save_weights(model: &Model, manifest_path: &Path) -> Result<()> {
    let (entries, blob) = export_weights(model);
    let text = serde_json::to_string_pretty(&entries)?;
    std::fs::write(manifest_path, text + "\n").map_err(|e| Error::io(manifest_path, e))?;
    let bin = blob_path(manifest_path);
    std::fs::write(&bin, blob).map_err(|e| Error::io(&bin, e))
}

/// Reads a manifest and its sibling blob and binds them to `graph`.
pub fn read_weights(graph: &ModelGraph, manifest_path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let entries: Vec<ManifestEntry> = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    let bin = blob_path(manifest_path);
    let blob = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    load_weights(graph, &entries, &blob)
}
