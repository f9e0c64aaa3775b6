//! Instruction questions at three levels of detail and the three dialogue
//! shapes used for training, with grasp token streams embedded in answers.

mod polish;
mod sample;
mod templates;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::codec::CodecError;

pub use polish::{polish_hook, IdentityPolisher, Polisher};
pub use sample::{
    build_sample, question_variants, ConversationSample, GraspItem, GraspMeta, ObjectCaption, Role, SampleMeta, Turn,
};
pub use templates::{fill_template, fill_template_at, placeholders, substitute, LevelTemplates, TemplateSet, TEMPLATE_SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstructionLevel {
    /// Object and hand only.
    Low,
    /// Names the part to grasp.
    Mid,
    /// Embeds the full contact description.
    High,
}

impl InstructionLevel {
    pub const ALL: [InstructionLevel; 3] = [InstructionLevel::Low, InstructionLevel::Mid, InstructionLevel::High];
}

impl fmt::Display for InstructionLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InstructionLevel::Low => "low",
            InstructionLevel::Mid => "mid",
            InstructionLevel::High => "high",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DialogueKind {
    SingleGrasp,
    MultiMix,
    MultiGrasp,
}

impl DialogueKind {
    pub const ALL: [DialogueKind; 3] = [DialogueKind::SingleGrasp, DialogueKind::MultiMix, DialogueKind::MultiGrasp];

    pub fn default_stage(self) -> Stage {
        match self {
            DialogueKind::SingleGrasp => Stage::Alignment,
            _ => Stage::Instruction,
        }
    }
}

impl fmt::Display for DialogueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DialogueKind::SingleGrasp => "single_grasp",
            DialogueKind::MultiMix => "multi_mix",
            DialogueKind::MultiGrasp => "multi_grasp",
        })
    }
}

impl std::str::FromStr for DialogueKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DialogueKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| format!("unknown dialogue kind '{s}'"))
    }
}

/// Training stage tag. Proportions between stages are not enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Alignment,
    Instruction,
}

#[derive(Debug, thiserror::Error)]
pub enum ConversationError {
    #[error("template error: {0}")]
    Template(String),
    #[error("{level}-level question needs {field}")]
    MissingField { level: InstructionLevel, field: &'static str },
    #[error("{kind}: {reason}")]
    Arity { kind: DialogueKind, reason: String },
    #[error(transparent)]
    Codec(#[from] CodecError),
}
