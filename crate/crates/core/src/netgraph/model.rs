use crate::blocks::{Block, BlockKind, ConvUnits, DetectOutput, Init, DETECT_STRIDES};
use crate::error::{Error, Result};
use crate::tensor::{ConvExec, FastExec, Shape4, Tensor4};

use super::config::{ModelGraph, Source};

/// Input and output shapes of one layer, plus its multiply-accumulates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerShape {
    pub index: usize,
    pub kind: BlockKind,
    pub inputs: Vec<Shape4>,
    pub outputs: Vec<Shape4>,
    pub macs: u64,
}

/// A graph bound to concrete weights. Immutable once built and safe to share
/// across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    graph: ModelGraph,
    blocks: Vec<Block>,
}

impl Model {
    pub fn new(graph: ModelGraph, init: &mut Init) -> Result<Self> {
        let blocks = graph.build_blocks(init)?;
        Ok(Self { graph, blocks })
    }

    pub fn zeros(graph: ModelGraph) -> Result<Self> {
        Self::new(graph, &mut Init::zeros())
    }

    /// Deterministic random weights, `uniform(±1/√fan_in)`.
    pub fn random(graph: ModelGraph, seed: u64) -> Result<Self> {
        Self::new(graph, &mut Init::seeded(seed))
    }

    pub fn graph(&self) -> &ModelGraph {
        &self.graph
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    pub fn param_count(&self) -> u64 {
        self.blocks.iter().map(|b| b.param_count()).sum()
    }

    /// Runs the network with the multithreaded fast convolution path.
    pub fn forward(&self, x: &Tensor4) -> Result<DetectOutput> {
        self.forward_with(x, &FastExec { parallel: true })
    }

    pub fn forward_with(&self, x: &Tensor4, exec: &dyn ConvExec) -> Result<DetectOutput> {
        check_input(x.shape())?;
        let layers = self.graph.layers();
        let mut saved: Vec<Option<Tensor4>> = vec![None; layers.len()];
        let mut prev: Option<Tensor4> = None;
        for (l, b) in layers.iter().zip(&self.blocks) {
            let inputs: Vec<&Tensor4> = l
                .sources()
                .iter()
                .map(|s| match *s {
                    Source::Input => x,
                    Source::Layer(j) if j + 1 == l.index => {
                        prev.as_ref().expect("previous layer ran")
                    }
                    Source::Layer(j) => saved[j].as_ref().expect("saved layers are kept"),
                })
                .collect();
            if let Block::Detect(head) = b {
                return head
                    .forward(&inputs, exec)
                    .map_err(|e| Error::layer(l.index, e.to_string()));
            }
            let y = b
                .forward(&inputs, exec)
                .map_err(|e| Error::layer(l.index, format!("{}: {e}", l.kind())))?;
            if self.graph.save_set().contains(&l.index) {
                saved[l.index] = Some(y.clone());
            }
            prev = Some(y);
        }
        Err(Error::config("forward", "graph has no Detect layer"))
    }

    /// Shape and MAC table for an input of shape `input`.
    pub fn trace(&self, input: Shape4) -> Result<Vec<LayerShape>> {
        check_input(input)?;
        let layers = self.graph.layers();
        let mut table: Vec<LayerShape> = Vec::with_capacity(layers.len());
        for (l, b) in layers.iter().zip(&self.blocks) {
            let inputs: Vec<Shape4> = l
                .sources()
                .iter()
                .map(|s| match *s {
                    Source::Input => input,
                    Source::Layer(j) => table[j].outputs[0],
                })
                .collect();
            let name = |s: &Source| match *s {
                Source::Input => "input".to_string(),
                Source::Layer(j) => format!("layer {j}"),
            };
            if inputs.len() > 1 {
                let (s0, a) = (l.sources()[0], inputs[0]);
                for (s, b) in l.sources().iter().zip(&inputs).skip(1) {
                    if l.kind() == BlockKind::Concat && (a.n, a.h, a.w) != (b.n, b.h, b.w) {
                        return Err(Error::layer(
                            l.index,
                            format!(
                                "Concat inputs from {} ({a}) and {} ({b}) differ in spatial size",
                                name(&s0),
                                name(s)
                            ),
                        ));
                    }
                }
            }
            if l.kind() == BlockKind::Detect {
                for ((s, shape), stride) in l.sources().iter().zip(&inputs).zip(DETECT_STRIDES) {
                    if shape.h * stride != input.h || shape.w * stride != input.w {
                        return Err(Error::layer(
                            l.index,
                            format!(
                                "Detect input from {} is {}x{}, expected stride {stride} of the {}x{} input",
                                name(s),
                                shape.h,
                                shape.w,
                                input.h,
                                input.w
                            ),
                        ));
                    }
                }
            }
            let (outputs, macs) = b.trace(&inputs).map_err(|e| {
                let from: Vec<String> = l.sources().iter().map(name).collect();
                Error::layer(
                    l.index,
                    format!("{} fed by {}: {e}", l.kind(), from.join(", ")),
                )
            })?;
            table.push(LayerShape {
                index: l.index,
                kind: l.kind(),
                inputs,
                outputs,
                macs,
            });
        }
        Ok(table)
    }
}

/// Network inputs are 3-channel with spatial dims divisible by the largest stride.
pub fn check_input(s: Shape4) -> Result<()> {
    if s.c != 3 {
        return Err(Error::config(
            "forward",
            format!("input must have 3 channels, got {}", s.c),
        ));
    }
    if s.n == 0 || s.h == 0 || s.w == 0 || !s.h.is_multiple_of(32) || !s.w.is_multiple_of(32) {
        return Err(Error::config(
            "forward",
            format!(
                "input spatial size {}x{} must be a positive multiple of 32",
                s.h, s.w
            ),
        ));
    }
    Ok(())
}

/// Per-layer shapes for a network input of shape `input`.
pub fn infer_shapes(graph: &ModelGraph, input: Shape4) -> Result<Vec<LayerShape>> {
    Model::zeros(graph.clone())?.trace(input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::builtin;

    #[test]
    fn detect_scales_at_640_and_320() {
        for (size, want) in [(640, [80, 40, 20]), (320, [40, 20, 10])] {
            let t =
                infer_shapes(&builtin("phantom").unwrap(), Shape4::new(1, 3, size, size)).unwrap();
            let outs: Vec<usize> = t.last().unwrap().outputs.iter().map(|s| s.h).collect();
            assert_eq!(outs, want);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let g = builtin("baseline").unwrap();
        assert!(infer_shapes(&g, Shape4::new(1, 1, 64, 64)).is_err());
        assert!(infer_shapes(&g, Shape4::new(1, 3, 65, 64)).is_err());
    }

    #[test]
    fn concat_sums_match_consumers() {
        for name in ["baseline", "phantom"] {
            let g = builtin(name).unwrap();
            let t = infer_shapes(&g, Shape4::new(1, 3, 128, 128)).unwrap();
            for (l, row) in g.layers().iter().zip(&t) {
                if l.kind() == BlockKind::Concat {
                    assert_eq!(
                        row.outputs[0].c,
                        row.inputs.iter().map(|s| s.c).sum::<usize>()
                    );
                    assert_eq!(t[l.index + 1].inputs[0], row.outputs[0]);
                }
            }
        }
    }

    #[test]
    fn small_forward_shapes() {
        let m = Model::random(builtin("phantom").unwrap(), 1).unwrap();
        let x = Tensor4::random(Shape4::new(1, 3, 64, 64), 2, 0.0, 1.0).unwrap();
        let out = m.forward(&x).unwrap();
        let hw: Vec<_> = out.scales.iter().map(|s| (s.c(), s.h())).collect();
        assert_eq!(hw, [(68, 8), (68, 4), (68, 2)]);
    }
}
