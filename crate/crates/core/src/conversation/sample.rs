use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::polish::{embedded_streams, polish_hook, Polisher};
use super::templates::{question_values, substitute, TemplateSet, CLASS, CONTACT, DESCRIPTION, GRASP};
use super::{ConversationError, DialogueKind, InstructionLevel, Stage};
use crate::codec::{tokenize, BinVector, TokenVocabulary};
use crate::contact::ContactSummary;

/// One grasp to be embedded in a conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspItem {
    pub grasp_id: String,
    /// Object name as it appears in text.
    pub object: String,
    /// Hand name as it appears in text, e.g. "Shadow Hand".
    pub hand_display: String,
    pub summary: Option<ContactSummary>,
    pub bins: BinVector,
    /// Object bounding-sphere diameter in meters.
    pub scale: f64,
    pub spec_hash: String,
    pub level: InstructionLevel,
    /// Fixed question template; drawn from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_index: Option<usize>,
}

/// Object class name and a one-line description, used for caption turns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectCaption {
    pub class_name: String,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraspMeta {
    pub grasp_id: String,
    pub hand: String,
    pub level: InstructionLevel,
    pub n_bins: u32,
    pub bins: Vec<u32>,
    pub spec_hash: String,
}

/// Flattened fields describe the first grasp; `grasps` lists all of them
/// when a sample carries more than one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub object: String,
    #[serde(flatten)]
    pub first: GraspMeta,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub grasps: Vec<GraspMeta>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationSample {
    pub id: String,
    pub kind: DialogueKind,
    pub stage: Stage,
    pub turns: Vec<Turn>,
    pub meta: SampleMeta,
}

impl ConversationSample {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("sample serializes")
    }
}

/// Assembles a dialogue of `kind` from `items`. Deterministic in `seed`.
#[allow(clippy::too_many_arguments)]
pub fn build_sample(
    id: impl Into<String>,
    kind: DialogueKind,
    items: &[GraspItem],
    caption: Option<&ObjectCaption>,
    templates: &TemplateSet,
    vocab: &TokenVocabulary,
    polisher: &dyn Polisher,
    seed: u64,
) -> Result<ConversationSample, ConversationError> {
    check_arity(kind, items, caption)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut turns = Vec::with_capacity(2 * items.len() + 2);

    if kind == DialogueKind::MultiMix {
        let caption = caption.expect("arity checked");
        let q = templates.caption_questions.choose(&mut rng).expect("validated non-empty");
        let a = templates.caption_answers.choose(&mut rng).expect("validated non-empty");
        let values = BTreeMap::from([(CLASS, caption.class_name.clone()), (DESCRIPTION, caption.description.clone())]);
        let answer = substitute(a, &values)?;
        if !embedded_streams(&answer).is_empty() {
            return Err(ConversationError::Arity { kind, reason: "caption text contains a token stream".into() });
        }
        turns.push(Turn { role: Role::User, text: polish_hook(polisher, q, &[]) });
        turns.push(Turn {
            role: Role::Assistant,
            text: polish_hook(polisher, &answer, &[&caption.class_name]),
        });
    }

    for item in items {
        let (question, protected) = question_text(item, templates, &mut rng)?;
        let protected: Vec<&str> = protected.iter().map(String::as_str).collect();
        turns.push(Turn { role: Role::User, text: polish_hook(polisher, &question, &protected) });

        let stream = tokenize(&item.bins, item.scale, vocab)?.to_string();
        let answer = answer_text(item, &stream, templates, &mut rng)?;
        let answer = polish_hook(polisher, &answer, &[&stream]);
        if embedded_streams(&answer) != [stream.as_str()] {
            return Err(ConversationError::Arity { kind, reason: "answer must embed exactly one token stream".into() });
        }
        turns.push(Turn { role: Role::Assistant, text: answer });
    }

    let metas: Vec<GraspMeta> = items
        .iter()
        .map(|i| GraspMeta {
            grasp_id: i.grasp_id.clone(),
            hand: i.bins.hand.clone(),
            level: i.level,
            n_bins: i.bins.n_bins,
            bins: i.bins.bins.clone(),
            spec_hash: i.spec_hash.clone(),
        })
        .collect();
    Ok(ConversationSample {
        id: id.into(),
        kind,
        stage: kind.default_stage(),
        turns,
        meta: SampleMeta {
            object: items[0].object.clone(),
            first: metas[0].clone(),
            grasps: if metas.len() > 1 { metas } else { Vec::new() },
        },
    })
}

fn check_arity(kind: DialogueKind, items: &[GraspItem], caption: Option<&ObjectCaption>) -> Result<(), ConversationError> {
    let fail = |reason: &str| Err(ConversationError::Arity { kind, reason: reason.into() });
    match kind {
        DialogueKind::SingleGrasp if items.len() != 1 => return fail("needs exactly one grasp"),
        DialogueKind::MultiGrasp if items.len() < 2 => return fail("needs at least two grasps"),
        DialogueKind::MultiMix if items.is_empty() => return fail("needs at least one grasp"),
        DialogueKind::MultiMix if caption.is_none() => return fail("needs an object caption"),
        _ => {}
    }
    if items.iter().any(|i| i.object != items[0].object) {
        return fail("all grasps must share one object");
    }
    Ok(())
}

/// The question for `item` plus the substituted values a polisher must keep.
fn question_text(
    item: &GraspItem,
    templates: &TemplateSet,
    rng: &mut ChaCha8Rng,
) -> Result<(String, Vec<String>), ConversationError> {
    let list = templates.questions(item.level);
    let index = match item.template_index {
        Some(i) => i,
        None => rng.gen_range(0..list.len()),
    };
    let template = list
        .get(index)
        .ok_or_else(|| ConversationError::Template(format!("{} template {index} does not exist", item.level)))?;
    let values = question_values(item.level, &item.object, &item.hand_display, item.summary.as_ref())?;
    let text = substitute(template, &values)?;
    Ok((text, values.into_values().collect()))
}

fn answer_text(
    item: &GraspItem,
    stream: &str,
    templates: &TemplateSet,
    rng: &mut ChaCha8Rng,
) -> Result<String, ConversationError> {
    let usable: Vec<&String> = templates
        .answers
        .iter()
        .filter(|t| item.summary.is_some() || !t.contains("{contact info}"))
        .collect();
    let template = usable
        .choose(rng)
        .ok_or_else(|| ConversationError::Template("no answer template usable without a contact summary".into()))?;
    let mut values = BTreeMap::from([(GRASP, stream.to_string())]);
    if let Some(s) = &item.summary {
        values.insert(CONTACT, s.text.clone());
    }
    substitute(template, &values)
}

/// `k` distinct (level, template index, question) triples for one grasp,
/// cycling low, mid, high and drawing templates without replacement.
/// Without a summary only low-level questions are available.
pub fn question_variants(
    object: &str,
    hand_display: &str,
    summary: Option<&ContactSummary>,
    templates: &TemplateSet,
    k: usize,
    seed: u64,
) -> Result<Vec<(InstructionLevel, usize, String)>, ConversationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels: Vec<InstructionLevel> = if summary.is_some() {
        InstructionLevel::ALL.to_vec()
    } else {
        vec![InstructionLevel::Low]
    };
    let mut pools: Vec<Vec<usize>> = levels
        .iter()
        .map(|&l| {
            let mut idx: Vec<usize> = (0..templates.questions(l).len()).collect();
            idx.shuffle(&mut rng);
            idx.reverse();
            idx
        })
        .collect();
    let mut out: Vec<(InstructionLevel, usize, String)> = Vec::with_capacity(k);
    let mut li = 0;
    while out.len() < k {
        if pools.iter().all(Vec::is_empty) {
            return Err(ConversationError::Template(format!(
                "only {} distinct questions available, {k} requested",
                out.len()
            )));
        }
        let slot = li % levels.len();
        li += 1;
        let Some(index) = pools[slot].pop() else { continue };
        let level = levels[slot];
        let text = substitute(&templates.questions(level)[index], &question_values(level, object, hand_display, summary)?)?;
        if !out.iter().any(|(_, _, t)| *t == text) {
            out.push((level, index, text));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{find_stream, parse_stream};
    use crate::contact::FingerPart;
    use crate::conversation::IdentityPolisher;

    fn summary(object: &str) -> ContactSummary {
        ContactSummary::from_finger_parts(
            object,
            [("thumb", "rim"), ("index", "body")].map(|(f, p)| FingerPart { finger: f.into(), part: p.into() }),
        )
        .unwrap()
    }

    fn item(id: &str, hand: &str, display: &str, level: InstructionLevel) -> GraspItem {
        GraspItem {
            grasp_id: id.into(),
            object: "glass".into(),
            hand_display: display.into(),
            summary: Some(summary("glass")),
            bins: BinVector { hand: hand.into(), n_bins: 256, bins: (0..10).map(|i| i * 20).collect() },
            scale: 0.12,
            spec_hash: "abc".into(),
            level,
            template_index: None,
        }
    }

    fn vocab() -> TokenVocabulary {
        TokenVocabulary::new(["allegro", "shadow"], 512)
    }

    fn build(kind: DialogueKind, items: &[GraspItem], caption: Option<&ObjectCaption>, seed: u64) -> Result<ConversationSample, ConversationError> {
        build_sample("s0", kind, items, caption, &TemplateSet::bundled(), &vocab(), &IdentityPolisher, seed)
    }

    fn stream_bins(text: &str) -> Vec<u32> {
        let at = find_stream(text).unwrap();
        parse_stream(&text[at..], &vocab()).unwrap().bins
    }

    #[test]
    fn single_grasp_has_two_turns_and_one_stream() {
        let it = item("g1", "allegro", "Allegro Hand", InstructionLevel::Low);
        let s = build(DialogueKind::SingleGrasp, &[it.clone()], None, 3).unwrap();
        assert_eq!(s.turns.len(), 2);
        assert_eq!(s.turns[0].role, Role::User);
        assert_eq!(embedded_streams(&s.turns[1].text).len(), 1);
        assert_eq!(stream_bins(&s.turns[1].text), it.bins.bins);
        assert_eq!(s.meta.first.bins, it.bins.bins);
        assert!(s.meta.grasps.is_empty());
    }

    #[test]
    fn multi_grasp_uses_both_hands() {
        let items = [
            item("g1", "allegro", "Allegro Hand", InstructionLevel::Mid),
            item("g2", "shadow", "Shadow Hand", InstructionLevel::High),
        ];
        let s = build(DialogueKind::MultiGrasp, &items, None, 5).unwrap();
        assert_eq!(s.turns.len(), 4);
        assert!(s.turns[1].text.contains("<hand:allegro>"));
        assert!(s.turns[3].text.contains("<hand:shadow>"));
        assert_eq!(s.meta.grasps.len(), 2);
        assert!(build(DialogueKind::MultiGrasp, &items[..1], None, 5).is_err());
    }

    #[test]
    fn multi_mix_opens_with_caption() {
        let cap = ObjectCaption { class_name: "glass".into(), description: "A clear drinking glass.".into() };
        let items = [item("g1", "allegro", "Allegro Hand", InstructionLevel::Low)];
        let s = build(DialogueKind::MultiMix, &items, Some(&cap), 1).unwrap();
        assert_eq!(s.turns.len(), 4);
        assert!(embedded_streams(&s.turns[1].text).is_empty());
        assert!(s.turns[1].text.contains("A clear drinking glass."));
        assert_eq!(embedded_streams(&s.turns[3].text).len(), 1);
        assert!(build(DialogueKind::MultiMix, &items, None, 1).is_err());
    }

    #[test]
    fn same_seed_same_bytes() {
        let items = [item("g1", "allegro", "Allegro Hand", InstructionLevel::High)];
        let a = build(DialogueKind::SingleGrasp, &items, None, 9).unwrap().to_json_line();
        assert_eq!(a, build(DialogueKind::SingleGrasp, &items, None, 9).unwrap().to_json_line());
    }

    #[test]
    fn low_questions_carry_no_contact_text() {
        for seed in 0..40 {
            let it = item("g1", "allegro", "Allegro Hand", InstructionLevel::Low);
            let s = build(DialogueKind::SingleGrasp, &[it], None, seed).unwrap();
            let q = &s.turns[0].text;
            assert!(!q.contains("rim") && !q.contains("body") && !q.contains("contacts"), "{q}");
        }
    }

    #[test]
    fn question_variants_are_distinct() {
        let t = TemplateSet::bundled();
        let s = summary("glass");
        for k in 5..=10 {
            let v = question_variants("glass", "Shadow Hand", Some(&s), &t, k, k as u64).unwrap();
            assert_eq!(v.len(), k);
            let mut texts: Vec<_> = v.iter().map(|x| &x.2).collect();
            texts.sort();
            texts.dedup();
            assert_eq!(texts.len(), k);
        }
        assert!(question_variants("glass", "Shadow Hand", None, &t, 10, 0).is_err());
    }

    #[test]
    fn answers_round_trip_meta_json() {
        let s = build(DialogueKind::SingleGrasp, &[item("g1", "allegro", "Allegro Hand", InstructionLevel::Mid)], None, 2).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s.to_json_line()).unwrap();
        assert_eq!(v["meta"]["hand"], "allegro");
        assert_eq!(v["meta"]["level"], "mid");
        assert_eq!(v["kind"], "single_grasp");
        let back: ConversationSample = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }
}
