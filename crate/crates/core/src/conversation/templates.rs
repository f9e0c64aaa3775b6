use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ConversationError, InstructionLevel};
use crate::contact::ContactSummary;

pub const TEMPLATE_SCHEMA_VERSION: u32 = 1;
const BUNDLED: &str = include_str!("../../assets/templates/default.json");

pub const OBJECT: &str = "object";
pub const HAND: &str = "hand type";
pub const PART: &str = "part";
pub const CONTACT: &str = "contact info";
pub const GRASP: &str = "grasp";
pub const CLASS: &str = "class";
pub const DESCRIPTION: &str = "description";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTemplates {
    pub low: Vec<String>,
    pub mid: Vec<String>,
    pub high: Vec<String>,
}

/// Question, answer and caption templates. Placeholders are `{name}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub schema_version: u32,
    pub questions: LevelTemplates,
    pub answers: Vec<String>,
    pub caption_questions: Vec<String>,
    pub caption_answers: Vec<String>,
}

impl InstructionLevel {
    /// Placeholders a question of this level may use.
    pub fn allowed_placeholders(self) -> &'static [&'static str] {
        match self {
            InstructionLevel::Low => &[OBJECT, HAND],
            InstructionLevel::Mid => &[OBJECT, HAND, PART],
            InstructionLevel::High => &[OBJECT, HAND, CONTACT],
        }
    }
}

impl TemplateSet {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED).expect("bundled templates are valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ConversationError> {
        let set: TemplateSet = serde_json::from_str(text).map_err(|e| ConversationError::Template(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, ConversationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConversationError::Template(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn questions(&self, level: InstructionLevel) -> &[String] {
        match level {
            InstructionLevel::Low => &self.questions.low,
            InstructionLevel::Mid => &self.questions.mid,
            InstructionLevel::High => &self.questions.high,
        }
    }

    /// Checks placeholder sets per template kind. High-level questions must
    /// end their contact text with a period so the full summary sentence
    /// appears verbatim.
    pub fn validate(&self) -> Result<(), ConversationError> {
        if self.schema_version != TEMPLATE_SCHEMA_VERSION {
            return Err(ConversationError::Template(format!("unsupported schema_version {}", self.schema_version)));
        }
        for level in InstructionLevel::ALL {
            check_list(&format!("{level} questions"), self.questions(level), level.allowed_placeholders(), &[])?;
        }
        for t in &self.questions.high {
            if !t.contains("{contact info}.") {
                return Err(ConversationError::Template(format!("high-level template must contain '{{contact info}}.': {t}")));
            }
        }
        check_list("answers", &self.answers, &[GRASP, CONTACT], &[GRASP])?;
        for t in &self.answers {
            if t.matches("{grasp}").count() != 1 {
                return Err(ConversationError::Template(format!("answer must contain {{grasp}} exactly once: {t}")));
            }
        }
        check_list("caption questions", &self.caption_questions, &[], &[])?;
        check_list("caption answers", &self.caption_answers, &[CLASS, DESCRIPTION], &[])?;
        Ok(())
    }
}

fn check_list(what: &str, list: &[String], allowed: &[&str], required: &[&str]) -> Result<(), ConversationError> {
    if list.is_empty() {
        return Err(ConversationError::Template(format!("no {what} templates")));
    }
    for t in list {
        let names = placeholders(t).map_err(|e| ConversationError::Template(format!("{what}: {e}: {t}")))?;
        if let Some(bad) = names.iter().find(|n| !allowed.contains(&n.as_str())) {
            return Err(ConversationError::Template(format!("{what}: placeholder {{{bad}}} not allowed: {t}")));
        }
        if let Some(missing) = required.iter().find(|r| !names.iter().any(|n| n == *r)) {
            return Err(ConversationError::Template(format!("{what}: missing {{{missing}}}: {t}")));
        }
    }
    Ok(())
}

/// Placeholder names in order of appearance.
pub fn placeholders(template: &str) -> Result<Vec<String>, String> {
    let mut names = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find(['{', '}']) {
        if rest.as_bytes()[open] == b'}' {
            return Err("unbalanced '}'".into());
        }
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or("unclosed '{'")?;
        let name = &after[..close];
        if name.is_empty() || name.contains('{') {
            return Err("malformed placeholder".into());
        }
        names.push(name.to_string());
        rest = &after[close + 1..];
    }
    Ok(names)
}

/// Substitutes every placeholder in one pass, so braces inside values are
/// never reinterpreted.
pub fn substitute(template: &str, values: &BTreeMap<&str, String>) -> Result<String, ConversationError> {
    let mut out = String::with_capacity(template.len() + 64);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| ConversationError::Template(format!("unclosed placeholder in '{template}'")))?;
        let name = &after[..close];
        let value = values
            .get(name)
            .ok_or_else(|| ConversationError::Template(format!("no value for {{{name}}} in '{template}'")))?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Values a question of `level` needs. Mid-level names the summary's
/// dominant part; high-level embeds the summary sentence.
pub(crate) fn question_values(
    level: InstructionLevel,
    object: &str,
    hand: &str,
    summary: Option<&ContactSummary>,
) -> Result<BTreeMap<&'static str, String>, ConversationError> {
    let mut values = BTreeMap::from([(OBJECT, object.to_string()), (HAND, hand.to_string())]);
    let need = |field: &'static str| ConversationError::MissingField { level, field };
    match level {
        InstructionLevel::Low => {}
        InstructionLevel::Mid => {
            let s = summary.ok_or_else(|| need("summary"))?;
            values.insert(PART, s.dominant_part().to_string());
        }
        InstructionLevel::High => {
            let s = summary.ok_or_else(|| need("summary"))?;
            values.insert(CONTACT, s.clause().to_string());
        }
    }
    Ok(values)
}

/// Fills the `index`-th question template of `level`.
pub fn fill_template_at(
    level: InstructionLevel,
    index: usize,
    object: &str,
    hand: &str,
    summary: Option<&ContactSummary>,
    templates: &TemplateSet,
) -> Result<String, ConversationError> {
    let list = templates.questions(level);
    let t = list
        .get(index)
        .ok_or_else(|| ConversationError::Template(format!("{level} template {index} does not exist")))?;
    substitute(t, &question_values(level, object, hand, summary)?)
}

/// Fills a question template of `level` chosen uniformly by `seed`.
pub fn fill_template(
    level: InstructionLevel,
    object: &str,
    hand: &str,
    summary: Option<&ContactSummary>,
    templates: &TemplateSet,
    seed: u64,
) -> Result<String, ConversationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index = rng.gen_range(0..templates.questions(level).len());
    fill_template_at(level, index, object, hand, summary, templates)
}
