//! Class-level semantic channels and their fusion into one prototype per
//! class.
//!
//! Three channels are supported: the class label (LB), an action description
//! (AD) and a motion description (MD). Fusion concatenates the active
//! channels per class, always in LB, AD, MD order.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MsfError, Result};
use crate::tensor::{l2_norm, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Label,
    Action,
    Motion,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Label, Channel::Action, Channel::Motion];

    pub fn short_name(self) -> &'static str {
        match self {
            Channel::Label => "lb",
            Channel::Action => "ad",
            Channel::Motion => "md",
        }
    }
}

/// Which channels take part in fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SemanticMode {
    Lb,
    Ad,
    Md,
    AdMd,
    LbAdMd,
}

impl SemanticMode {
    pub const ALL: [SemanticMode; 5] = [
        SemanticMode::Lb,
        SemanticMode::Ad,
        SemanticMode::Md,
        SemanticMode::AdMd,
        SemanticMode::LbAdMd,
    ];

    /// Active channels in concatenation order.
    pub fn channels(self) -> &'static [Channel] {
        match self {
            SemanticMode::Lb => &[Channel::Label],
            SemanticMode::Ad => &[Channel::Action],
            SemanticMode::Md => &[Channel::Motion],
            SemanticMode::AdMd => &[Channel::Action, Channel::Motion],
            SemanticMode::LbAdMd => &[Channel::Label, Channel::Action, Channel::Motion],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SemanticMode::Lb => "LB",
            SemanticMode::Ad => "AD",
            SemanticMode::Md => "MD",
            SemanticMode::AdMd => "AD+MD",
            SemanticMode::LbAdMd => "LB+AD+MD",
        }
    }
}

impl Default for SemanticMode {
    fn default() -> Self {
        SemanticMode::LbAdMd
    }
}

impl fmt::Display for SemanticMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SemanticMode {
    type Err = MsfError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(' ', "");
        SemanticMode::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| {
                MsfError::Config(format!(
                    "unknown semantic mode `{s}` (expected LB, AD, MD, AD+MD or LB+AD+MD)"
                ))
            })
    }
}

impl TryFrom<String> for SemanticMode {
    type Error = MsfError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SemanticMode> for String {
    fn from(m: SemanticMode) -> String {
        m.as_str().to_string()
    }
}

/// Per-class semantic channels. Row `i` of every channel belongs to
/// `class_ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticBundle {
    class_ids: Vec<u32>,
    label: Option<Matrix>,
    action: Option<Matrix>,
    motion: Option<Matrix>,
}

impl SemanticBundle {
    pub fn new(
        class_ids: Vec<u32>,
        label: Option<Matrix>,
        action: Option<Matrix>,
        motion: Option<Matrix>,
    ) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = class_ids.iter().find(|id| !seen.insert(**id)) {
            return Err(MsfError::Config(format!("class id {dup} appears twice")));
        }
        for (ch, m) in Channel::ALL.iter().zip([&label, &action, &motion]) {
            if let Some(m) = m {
                if m.rows() != class_ids.len() {
                    return Err(MsfError::Shape(format!(
                        "channel {} has {} rows for {} classes",
                        ch.short_name(),
                        m.rows(),
                        class_ids.len()
                    )));
                }
                m.ensure_finite(ch.short_name())?;
            }
        }
        Ok(SemanticBundle {
            class_ids,
            label,
            action,
            motion,
        })
    }

    pub fn class_ids(&self) -> &[u32] {
        &self.class_ids
    }

    pub fn channel(&self, ch: Channel) -> Option<&Matrix> {
        match ch {
            Channel::Label => self.label.as_ref(),
            Channel::Action => self.action.as_ref(),
            Channel::Motion => self.motion.as_ref(),
        }
    }

    /// Width the fused prototypes will have under `mode`.
    pub fn fused_dim(&self, mode: SemanticMode) -> Result<usize> {
        mode.channels()
            .iter()
            .map(|&ch| self.require(ch, mode).map(Matrix::cols))
            .sum()
    }

    fn require(&self, ch: Channel, mode: SemanticMode) -> Result<&Matrix> {
        self.channel(ch).ok_or_else(|| {
            MsfError::Config(format!(
                "semantic mode {mode} needs the `{}` channel, which was not loaded",
                ch.short_name()
            ))
        })
    }
}

/// Fused prototypes keyed by class id.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedSemantics {
    class_ids: Vec<u32>,
    rows: Matrix,
    index: HashMap<u32, usize>,
}

impl FusedSemantics {
    pub fn new(class_ids: Vec<u32>, rows: Matrix) -> Result<Self> {
        if class_ids.len() != rows.rows() {
            return Err(MsfError::Shape(format!(
                "{} class ids for {} prototype rows",
                class_ids.len(),
                rows.rows()
            )));
        }
        let index: HashMap<u32, usize> = class_ids.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        if index.len() != class_ids.len() {
            return Err(MsfError::Config("duplicate class id in prototypes".into()));
        }
        Ok(FusedSemantics {
            class_ids,
            rows,
            index,
        })
    }

    pub fn class_ids(&self) -> &[u32] {
        &self.class_ids
    }

    pub fn matrix(&self) -> &Matrix {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.rows.cols()
    }

    pub fn contains(&self, class_id: u32) -> bool {
        self.index.contains_key(&class_id)
    }

    /// The fused prototype of `class_id`.
    pub fn prototype_for(&self, class_id: u32) -> Result<&[f64]> {
        self.index
            .get(&class_id)
            .map(|&i| self.rows.row(i))
            .ok_or_else(|| MsfError::Lookup(format!("no semantic prototype for class {class_id}")))
    }

    /// Prototype rows for a list of class ids, one output row per entry.
    pub fn gather(&self, class_ids: &[u32]) -> Result<Matrix> {
        let idx = class_ids
            .iter()
            .map(|c| {
                self.index
                    .get(c)
                    .copied()
                    .ok_or_else(|| MsfError::Lookup(format!("no semantic prototype for class {c}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.rows.select_rows(&idx))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionOptions {
    /// Scale every channel row to unit L2 norm before concatenation.
    #[serde(default)]
    pub l2_normalize: bool,
}

/// Concatenates the active channels of every class in LB, AD, MD order.
pub fn fuse_semantics(bundle: &SemanticBundle, mode: SemanticMode) -> Result<FusedSemantics> {
    fuse_semantics_with(bundle, mode, FusionOptions::default())
}

pub fn fuse_semantics_with(
    bundle: &SemanticBundle,
    mode: SemanticMode,
    opts: FusionOptions,
) -> Result<FusedSemantics> {
    let parts = mode
        .channels()
        .iter()
        .map(|&ch| {
            let m = bundle.require(ch, mode)?;
            Ok(if opts.l2_normalize {
                normalize_rows(m)
            } else {
                m.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Matrix> = parts.iter().collect();
    let fused = Matrix::hconcat(&refs)?;
    FusedSemantics::new(bundle.class_ids.clone(), fused)
}

fn normalize_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let n = l2_norm(row);
        if n > 0.0 {
            for v in row {
                *v /= n;
            }
        }
    }
    out
}
