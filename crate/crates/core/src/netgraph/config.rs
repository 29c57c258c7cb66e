use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::blocks::{Block, BlockKind, BlockSpec, Init};
use crate::error::{Error, Result};

pub const DEFAULT_INPUT_SIZE: usize = 640;
pub const BUILTIN_NAMES: [&str; 2] = ["baseline", "phantom"];

const BASELINE_JSON: &str = include_str!("../../configs/baseline.json");
const PHANTOM_JSON: &str = include_str!("../../configs/phantom.json");

/// Where a layer reads one of its inputs from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Input,
    Layer(usize),
}

/// One node of the graph: a block fed by earlier layers.
///
/// `from` keeps the indices as written (negative values are relative to
/// `index`, so `-1` is the previous layer); [`LayerSpec::sources`] resolves them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub index: usize,
    pub from: Vec<i64>,
    pub repeats: usize,
    pub block: BlockSpec,
    sources: Vec<Source>,
}

impl LayerSpec {
    pub fn new(index: usize, from: Vec<i64>, repeats: usize, block: BlockSpec) -> Result<Self> {
        let sources = resolve(index, &from)?;
        Ok(Self {
            index,
            from,
            repeats,
            block,
            sources,
        })
    }

    pub fn kind(&self) -> BlockKind {
        self.block.kind()
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }
}

fn resolve(index: usize, from: &[i64]) -> Result<Vec<Source>> {
    if from.is_empty() {
        return Err(Error::layer(index, "`from` lists no sources"));
    }
    from.iter()
        .map(|&f| {
            let abs = if f < 0 { index as i64 + f } else { f };
            if index == 0 {
                return if f == -1 {
                    Ok(Source::Input)
                } else {
                    Err(Error::layer(
                        0,
                        format!("layer 0 must read the network input (from = -1), got {f}"),
                    ))
                };
            }
            if abs < 0 || abs >= index as i64 {
                return Err(Error::layer(
                    index,
                    format!("source {f} does not refer to an earlier layer"),
                ));
            }
            Ok(Source::Layer(abs as usize))
        })
        .collect()
}

/// A validated network description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelGraph {
    num_classes: usize,
    input_size: usize,
    layers: Vec<LayerSpec>,
    save_set: BTreeSet<usize>,
}

impl ModelGraph {
    /// Validates the wiring, the single trailing Detect layer and every block's
    /// channel contract.
    pub fn new(num_classes: usize, input_size: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::config(
                "model_graph",
                "num_classes must be at least 1",
            ));
        }
        if input_size == 0 || !input_size.is_multiple_of(32) {
            return Err(Error::config(
                "model_graph",
                format!("input_size must be a positive multiple of 32, got {input_size}"),
            ));
        }
        let detects = layers
            .iter()
            .filter(|l| l.kind() == BlockKind::Detect)
            .count();
        if detects != 1 || layers.last().map(|l| l.kind()) != Some(BlockKind::Detect) {
            return Err(Error::config(
                "model_graph",
                format!(
                    "graph must contain exactly one Detect layer, placed last (found {detects})"
                ),
            ));
        }
        let mut save_set = BTreeSet::new();
        for (pos, l) in layers.iter().enumerate() {
            if l.index != pos {
                return Err(Error::layer(
                    pos,
                    format!("index field is {}, expected {pos}", l.index),
                ));
            }
            if l.sources != resolve(l.index, &l.from)? {
                return Err(Error::layer(pos, "resolved sources disagree with `from`"));
            }
            let n = l.sources.len();
            match l.kind() {
                BlockKind::Concat if n < 2 => {
                    return Err(Error::layer(
                        pos,
                        format!("Concat needs at least 2 sources, got {n}"),
                    ))
                }
                BlockKind::Detect if n != 3 => {
                    return Err(Error::layer(
                        pos,
                        format!("Detect needs exactly 3 sources, got {n}"),
                    ))
                }
                BlockKind::Concat | BlockKind::Detect => {}
                k if n != 1 => {
                    return Err(Error::layer(
                        pos,
                        format!("{k} takes exactly 1 source, got {n}"),
                    ))
                }
                _ => {}
            }
            if l.repeats == 0 {
                return Err(Error::layer(pos, "repeats must be at least 1"));
            }
            if l.repeats != 1 && !l.block.repeats_are_depth() {
                return Err(Error::layer(
                    pos,
                    format!("{} does not support repeats (got {})", l.kind(), l.repeats),
                ));
            }
            for s in &l.sources {
                if let Source::Layer(j) = *s {
                    if j + 1 != pos {
                        save_set.insert(j);
                    }
                }
            }
        }
        let g = Self {
            num_classes,
            input_size,
            layers,
            save_set,
        };
        g.out_channels()?;
        Ok(g)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Layers whose output is read by a layer other than the next one.
    pub fn save_set(&self) -> &BTreeSet<usize> {
        &self.save_set
    }

    /// Same graph with a different class count or nominal input size.
    pub fn with_overrides(
        &self,
        num_classes: Option<usize>,
        input_size: Option<usize>,
    ) -> Result<Self> {
        Self::new(
            num_classes.unwrap_or(self.num_classes),
            input_size.unwrap_or(self.input_size),
            self.layers.clone(),
        )
    }

    /// Channel count of every layer's (first) output, checking each block's
    /// constraints along the way.
    pub fn out_channels(&self) -> Result<Vec<usize>> {
        let blocks = self.build_blocks(&mut Init::zeros())?;
        Ok(self
            .layers
            .iter()
            .zip(&blocks)
            .scan(Vec::<usize>::new(), |acc, (l, b)| {
                let c = block_out_channels(b, &self.input_channels(l, acc));
                acc.push(c);
                Some(c)
            })
            .collect())
    }

    pub(crate) fn input_channels(&self, l: &LayerSpec, done: &[usize]) -> Vec<usize> {
        l.sources
            .iter()
            .map(|s| match *s {
                Source::Input => 3,
                Source::Layer(j) => done[j],
            })
            .collect()
    }

    pub(crate) fn build_blocks(&self, init: &mut Init) -> Result<Vec<Block>> {
        let mut channels: Vec<usize> = Vec::with_capacity(self.layers.len());
        let mut blocks = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let inputs = self.input_channels(l, &channels);
            let b = Block::build(&l.block, l.repeats, &inputs, self.num_classes, init)
                .map_err(|e| Error::layer(l.index, format!("{}: {e}", l.kind())))?;
            channels.push(block_out_channels(&b, &inputs));
            blocks.push(b);
        }
        Ok(blocks)
    }

    /// Pretty-printed config text in the on-disk format.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.raw()).expect("config serializes");
        s.push('\n');
        s
    }

    fn raw(&self) -> RawGraph {
        RawGraph {
            num_classes: self.num_classes,
            input_size: self.input_size,
            layers: self
                .layers
                .iter()
                .map(|l| {
                    let mut v = serde_json::to_value(l.block).expect("block spec serializes");
                    let args = v
                        .get_mut("args")
                        .map(Value::take)
                        .unwrap_or_else(|| Value::Object(Default::default()));
                    RawLayer {
                        index: l.index,
                        from: match l.from.as_slice() {
                            [one] => From::One(*one),
                            many => From::Many(many.to_vec()),
                        },
                        repeats: l.repeats,
                        kind: l.kind().as_str().to_string(),
                        args,
                    }
                })
                .collect(),
        }
    }
}

fn block_out_channels(b: &Block, inputs: &[usize]) -> usize {
    use crate::blocks::ConvUnits;
    match b {
        Block::Upsample(_) => inputs[0],
        Block::Concat => inputs.iter().sum(),
        Block::Detect(h) => h.channels(),
        Block::Ghost(_) | Block::Phantom(_) => {
            let convs = b.convs();
            convs[0].1.out_channels() + convs.last().expect("two branches").1.out_channels()
        }
        _ => b
            .convs()
            .last()
            .map_or(inputs[0], |(_, c)| c.out_channels()),
    }
}

fn default_input_size() -> usize {
    DEFAULT_INPUT_SIZE
}

fn one() -> usize {
    1
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    num_classes: usize,
    #[serde(default = "default_input_size")]
    input_size: usize,
    layers: Vec<RawLayer>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum From {
    One(i64),
    Many(Vec<i64>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    index: usize,
    from: From,
    #[serde(default = "one")]
    repeats: usize,
    kind: String,
    #[serde(default)]
    args: Value,
}

/// Parses and validates config text.
///
/// Syntax and structural errors carry a line and column; semantic errors
/// (wiring, channel contracts, block arguments) carry the layer index.
pub fn parse_config(text: &str) -> Result<ModelGraph> {
    let raw: RawGraph = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    let layers = raw
        .layers
        .into_iter()
        .enumerate()
        .map(|(pos, l)| {
            let args = if l.args.is_null() {
                Value::Object(Default::default())
            } else {
                l.args
            };
            let block: BlockSpec =
                serde_json::from_value(serde_json::json!({ "kind": l.kind, "args": args }))
                    .map_err(|e| Error::layer(pos, format!("invalid block `{}`: {e}", l.kind)))?;
            let from = match l.from {
                From::One(f) => vec![f],
                From::Many(v) => v,
            };
            LayerSpec::new(l.index, from, l.repeats, block)
        })
        .collect::<Result<Vec<_>>>()?;
    ModelGraph::new(raw.num_classes, raw.input_size, layers)
}

/// The shipped configurations by name.
pub fn builtin(name: &str) -> Result<ModelGraph> {
    let text = match name {
        "baseline" => BASELINE_JSON,
        "phantom" => PHANTOM_JSON,
        _ => {
            return Err(Error::config(
                "builtin",
                format!(
                    "unknown built-in config `{name}` (available: {})",
                    BUILTIN_NAMES.join(", ")
                ),
            ))
        }
    };
    parse_config(text)
}

/// Both shipped configurations, baseline first.
pub fn builtin_configs() -> Vec<(&'static str, ModelGraph)> {
    BUILTIN_NAMES
        .iter()
        .map(|&n| (n, builtin(n).expect("shipped configs are valid")))
        .collect()
}
