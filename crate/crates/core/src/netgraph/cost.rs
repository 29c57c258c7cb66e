use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::blocks::ConvUnits;
use crate::error::Result;
use crate::tensor::Shape4;

use super::config::ModelGraph;
use super::model::Model;
use super::weights::manifest;

/// Cost of one layer at the report's input size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCost {
    pub index: usize,
    pub from: Vec<i64>,
    pub kind: String,
    pub repeats: usize,
    pub params: u64,
    pub macs: u64,
    pub output: Vec<Shape4>,
}

/// Exact analytic costs of a graph at `input_size`×`input_size`, batch 1.
///
/// `size_bytes` is what [`super::save_weights`] writes: four bytes per
/// parameter plus the compact manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub input_size: usize,
    pub params: u64,
    pub macs: u64,
    pub flops: u64,
    pub size_bytes: u64,
    pub per_layer: Vec<LayerCost>,
}

impl CostReport {
    pub fn gflops(&self) -> f64 {
        self.flops as f64 / 1e9
    }

    /// Size in megabytes (10⁶ bytes).
    pub fn size_mb(&self) -> f64 {
        self.size_bytes as f64 / 1e6
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cost report serializes")
    }

    /// Aligned per-layer table followed by a totals line.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>5}  {:<12}  {:<12}  {:>3}  {:>10}  {:>14}  output",
            "layer", "from", "kind", "n", "params", "MACs"
        );
        for r in &self.per_layer {
            let from = r
                .from
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join(",");
            let out = r
                .output
                .iter()
                .map(|o| o.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(
                s,
                "{:>5}  {:<12}  {:<12}  {:>3}  {:>10}  {:>14}  {}",
                r.index, from, r.kind, r.repeats, r.params, r.macs, out
            );
        }
        let _ = writeln!(
            s,
            "total: params={} macs={} GFLOPs={:.3} size={:.3} MB (input {}x{})",
            self.params,
            self.macs,
            self.gflops(),
            self.size_mb(),
            self.input_size,
            self.input_size
        );
        s
    }
}

impl Model {
    pub fn cost_report(&self, input_size: usize) -> Result<CostReport> {
        let table = self.trace(Shape4::new(1, 3, input_size, input_size))?;
        let per_layer: Vec<LayerCost> = self
            .graph()
            .layers()
            .iter()
            .zip(self.blocks())
            .zip(table)
            .map(|((l, b), t)| LayerCost {
                index: l.index,
                from: l.from.clone(),
                kind: l.kind().to_string(),
                repeats: l.repeats,
                params: b.param_count(),
                macs: t.macs,
                output: t.outputs,
            })
            .collect();
        let params: u64 = per_layer.iter().map(|r| r.params).sum();
        let macs: u64 = per_layer.iter().map(|r| r.macs).sum();
        let manifest_len = serde_json::to_string(&manifest(self))?.len() as u64;
        Ok(CostReport {
            input_size,
            params,
            macs,
            flops: 2 * macs,
            size_bytes: params * 4 + manifest_len,
            per_layer,
        })
    }
}

/// Costs of `graph` at `input_size` without any weights.
pub fn count_costs(graph: &ModelGraph, input_size: usize) -> Result<CostReport> {
    Model::zeros(graph.clone())?.cost_report(input_size)
}
