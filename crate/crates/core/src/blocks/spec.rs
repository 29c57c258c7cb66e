use std::fmt;

use serde::{Deserialize, Serialize};

/// Block kinds recognised in model configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Conv,
    DWSeparable,
    GhostConv,
    PhantomConv,
    C2f,
    C2fi,
    SPPF,
    Upsample,
    Concat,
    Detect,
}

impl BlockKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlockKind::Conv => "Conv",
            BlockKind::DWSeparable => "DWSeparable",
            BlockKind::GhostConv => "GhostConv",
            BlockKind::PhantomConv => "PhantomConv",
            BlockKind::C2f => "C2f",
            BlockKind::C2fi => "C2fi",
            BlockKind::SPPF => "SPPF",
            BlockKind::Upsample => "Upsample",
            BlockKind::Concat => "Concat",
            BlockKind::Detect => "Detect",
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn one() -> usize {
    1
}
fn four() -> usize {
    4
}
fn five() -> usize {
    5
}
fn two() -> usize {
    2
}
fn sixteen() -> usize {
    16
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvArgs {
    pub out_c: usize,
    pub k: usize,
    #[serde(default = "one")]
    pub s: usize,
    #[serde(default = "one")]
    pub groups: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwSeparableArgs {
    pub out_c: usize,
    pub k: usize,
    #[serde(default = "one")]
    pub s: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhostArgs {
    pub out_c: usize,
    pub k: usize,
    #[serde(default = "one")]
    pub s: usize,
}

/// Phantom block: grouped `k×k` primary (default 4 groups, 5×5) plus a
/// depthwise-separable cheap branch with a `cheap_k` depthwise kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomArgs {
    pub out_c: usize,
    #[serde(default = "one")]
    pub s: usize,
    #[serde(default = "four")]
    pub groups: usize,
    #[serde(default = "five")]
    pub k: usize,
    #[serde(default = "five")]
    pub cheap_k: usize,
}

impl PhantomArgs {
    pub fn new(out_c: usize, s: usize) -> Self {
        Self {
            out_c,
            s,
            groups: 4,
            k: 5,
            cheap_k: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct C2fArgs {
    pub out_c: usize,
    pub shortcut: bool,
    /// Width of each split half and of the bottlenecks; `out_c / 2` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
}

/// C2f with the residual shortcut disabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct C2fiArgs {
    pub out_c: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SppfArgs {
    pub out_c: usize,
    #[serde(default = "five")]
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpsampleArgs {
    #[serde(default = "two")]
    pub factor: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcatArgs {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectArgs {
    #[serde(default = "sixteen")]
    pub reg_max: usize,
}

/// A block kind together with its kind-specific attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "args")]
#[allow(clippy::upper_case_acronyms)]
pub enum BlockSpec {
    Conv(ConvArgs),
    DWSeparable(DwSeparableArgs),
    GhostConv(GhostArgs),
    PhantomConv(PhantomArgs),
    C2f(C2fArgs),
    C2fi(C2fiArgs),
    SPPF(SppfArgs),
    Upsample(UpsampleArgs),
    Concat(ConcatArgs),
    Detect(DetectArgs),
}

impl BlockSpec {
    pub fn kind(&self) -> BlockKind {
        match self {
            BlockSpec::Conv(_) => BlockKind::Conv,
            BlockSpec::DWSeparable(_) => BlockKind::DWSeparable,
            BlockSpec::GhostConv(_) => BlockKind::GhostConv,
            BlockSpec::PhantomConv(_) => BlockKind::PhantomConv,
            BlockSpec::C2f(_) => BlockKind::C2f,
            BlockSpec::C2fi(_) => BlockKind::C2fi,
            BlockSpec::SPPF(_) => BlockKind::SPPF,
            BlockSpec::Upsample(_) => BlockKind::Upsample,
            BlockSpec::Concat(_) => BlockKind::Concat,
            BlockSpec::Detect(_) => BlockKind::Detect,
        }
    }

    /// Whether `repeats` means a bottleneck count (C2f family) rather than a plain count that must be 1.
    pub fn repeats_are_depth(&self) -> bool {
        matches!(self, BlockSpec::C2f(_) | BlockSpec::C2fi(_))
    }
}
