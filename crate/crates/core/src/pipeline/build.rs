use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::annotate::{AnnotationRecord, GraspStatus};
use super::bounds::load_bounds;
use super::{derive_seed, load_hands, OutputLayout, PipelineConfig, PipelineError};
use crate::codec::{discretize, TokenVocabulary};
use crate::contact::{select_grasps_per_pattern, ContactRecord};
use crate::conversation::{
    build_sample, question_variants, ConversationSample, DialogueKind, GraspItem, IdentityPolisher, InstructionLevel,
    ObjectCaption, Polisher, TemplateSet,
};
use crate::dataset::{load_objects, read_jsonl, write_atomic, write_jsonl_atomic, GraspInputRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedGrasp {
    pub grasp_id: String,
    pub object_id: String,
    pub hand: String,
    pub pattern: String,
    pub n_bins: u32,
    pub bins: Vec<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub selected: usize,
    pub samples: usize,
    pub per_kind: BTreeMap<String, usize>,
    /// Hands whose grasps were skipped for lack of bounds.
    pub skipped_hands: Vec<String>,
}

#[derive(Serialize)]
struct VocabFile<'a> {
    hands: &'a [String],
    n_bins: u32,
    tokens: Vec<String>,
}

struct Job {
    id: String,
    kind: DialogueKind,
    items: Vec<GraspItem>,
    caption: Option<ObjectCaption>,
}

/// Selects grasps per contact pattern and emits conversation samples with
/// the identity polisher.
pub fn cmd_build(config: &PipelineConfig) -> Result<BuildSummary, PipelineError> {
    cmd_build_with(config, &IdentityPolisher)
}

/// Selects up to `per_pattern` grasps per (object, hand, contact pattern)
/// and emits the configured dialogue kinds for them. Output is sorted by
/// sample id and depends only on inputs and seed.
pub fn cmd_build_with(config: &PipelineConfig, polisher: &dyn Polisher) -> Result<BuildSummary, PipelineError> {
    let layout = OutputLayout::new(&config.paths.output);
    for p in [layout.contacts(), layout.kept()] {
        if !p.exists() {
            return Err(PipelineError::Missing(format!("{} (run annotate first)", p.display())));
        }
    }
    let specs = load_bounds(&layout)?;
    let hands = load_hands(config.paths.hands.as_deref())?;
    let objects = load_objects(&config.paths.meshes, config.paths.labels.as_deref())?;
    let templates = match &config.paths.templates {
        Some(p) => TemplateSet::load(p)?,
        None => TemplateSet::bundled(),
    };
    let vocab = TokenVocabulary::new(hands.keys().cloned(), config.build.vocab_bins);

    let contacts_path = layout.contacts();
    let (annotations, _) =
        read_jsonl::<AnnotationRecord>(&contacts_path).map_err(|e| PipelineError::io(&contacts_path, e))?;
    let kept_path = layout.kept();
    let (kept, _) = read_jsonl::<GraspInputRecord>(&kept_path).map_err(|e| PipelineError::io(&kept_path, e))?;
    let poses: BTreeMap<&str, &GraspInputRecord> = kept.iter().map(|r| (r.grasp_id.as_str(), r)).collect();

    let mut groups: BTreeMap<(&str, &str), Vec<&AnnotationRecord>> = BTreeMap::new();
    for a in annotations.iter().filter(|a| a.status == GraspStatus::Kept && poses.contains_key(a.grasp_id.as_str())) {
        groups.entry((&a.object_id, &a.hand)).or_default().push(a);
    }

    let mut summary = BuildSummary::default();
    let mut selected: Vec<SelectedGrasp> = Vec::new();
    let mut items_by_object: BTreeMap<&str, Vec<GraspItem>> = BTreeMap::new();
    for ((object_id, hand), records) in &groups {
        let (Some(model), Some(spec)) = (hands.get(*hand), specs.get(*hand)) else {
            if !summary.skipped_hands.iter().any(|h| h == hand) {
                log::warn!("hand '{hand}' has no hand spec or bounds; its grasps are skipped");
                summary.skipped_hands.push(hand.to_string());
            }
            continue;
        };
        let Some(object) = objects.get(*object_id) else {
            log::warn!("object '{object_id}' has no mesh; its grasps are skipped");
            continue;
        };
        let contact_records: Vec<ContactRecord> = records.iter().map(|a| a.contacts.clone()).collect();
        let per_pattern = config.per_pattern.for_class(model.class());
        let seed = derive_seed(config.seed, &format!("select/{object_id}/{hand}"));
        let ids = select_grasps_per_pattern(&contact_records, per_pattern, seed).expect("per_pattern validated positive");
        for id in ids {
            let a = records.iter().find(|a| a.grasp_id == id).expect("selected from these records");
            let d = discretize(&poses[id.as_str()].pose(), spec)?;
            if d.out_of_range > 0 {
                log::warn!("grasp {id}: {} dimensions outside the bin range were clamped", d.out_of_range);
            }
            selected.push(SelectedGrasp {
                grasp_id: id.clone(),
                object_id: object_id.to_string(),
                hand: hand.to_string(),
                pattern: a.contacts.pattern().key(),
                n_bins: d.bins.n_bins,
                bins: d.bins.bins.clone(),
            });
            items_by_object.entry(object_id).or_default().push(GraspItem {
                grasp_id: id,
                object: object.name.clone(),
                hand_display: model.display_name().to_string(),
                summary: a.summary.clone(),
                bins: d.bins,
                scale: object.diameter,
                spec_hash: spec.corpus_hash.clone(),
                level: InstructionLevel::Low,
                template_index: None,
            });
        }
    }
    selected.sort_by(|a, b| a.grasp_id.cmp(&b.grasp_id));
    for items in items_by_object.values_mut() {
        items.sort_by(|a, b| a.grasp_id.cmp(&b.grasp_id));
    }

    let mut jobs = Vec::new();
    for (object_id, items) in &items_by_object {
        let caption = objects[*object_id].caption.clone();
        plan_jobs(config, &templates, items, caption, &mut jobs)?;
    }

    let mut samples: Vec<ConversationSample> = jobs
        .par_iter()
        .map(|j| {
            let seed = derive_seed(config.seed, &j.id);
            build_sample(&j.id, j.kind, &j.items, j.caption.as_ref(), &templates, &vocab, polisher, seed)
        })
        .collect::<Result<_, _>>()?;
    samples.sort_by(|a, b| a.id.cmp(&b.id));

    for s in &samples {
        *summary.per_kind.entry(s.kind.to_string()).or_default() += 1;
    }
    summary.selected = selected.len();
    summary.samples = samples.len();

    let io = |p: std::path::PathBuf, r: std::io::Result<()>| r.map_err(|e| PipelineError::io(&p, e));
    io(layout.conversations(), write_jsonl_atomic(&layout.conversations(), &samples))?;
    io(layout.selected(), write_jsonl_atomic(&layout.selected(), &selected))?;
    let vocab_file = VocabFile {
        hands: vocab.hands(),
        n_bins: vocab.n_bins(),
        tokens: vocab.tokens().iter().map(ToString::to_string).collect(),
    };
    let text = serde_json::to_string_pretty(&vocab_file).expect("vocab serializes") + "\n";
    io(layout.vocab(), write_atomic(&layout.vocab(), text.as_bytes()))?;
    log::info!("build: {} grasps selected, {} samples", summary.selected, summary.samples);
    Ok(summary)
}

fn pick_level(config: &PipelineConfig, key: &str) -> InstructionLevel {
    let levels = &config.build.levels;
    levels[(derive_seed(config.seed, key) % levels.len() as u64) as usize]
}

/// Sample jobs for one object's selected grasps, in a fixed order.
fn plan_jobs(
    config: &PipelineConfig,
    templates: &TemplateSet,
    items: &[GraspItem],
    caption: Option<ObjectCaption>,
    jobs: &mut Vec<Job>,
) -> Result<(), PipelineError> {
    for &kind in &config.build.kinds {
        match kind {
            DialogueKind::SingleGrasp => {
                for item in items {
                    match config.build.questions_per_grasp {
                        Some(k) => {
                            let seed = derive_seed(config.seed, &format!("variants/{}", item.grasp_id));
                            let variants =
                                question_variants(&item.object, &item.hand_display, item.summary.as_ref(), templates, k, seed)?;
                            for (i, (level, index, _)) in variants.into_iter().enumerate() {
                                let it = GraspItem { level, template_index: Some(index), ..item.clone() };
                                jobs.push(Job {
                                    id: format!("single_grasp/{}/q{i:02}", item.grasp_id),
                                    kind,
                                    items: vec![it],
                                    caption: None,
                                });
                            }
                        }
                        None => {
                            for &level in &config.build.levels {
                                jobs.push(Job {
                                    id: format!("single_grasp/{}/{level}", item.grasp_id),
                                    kind,
                                    items: vec![GraspItem { level, ..item.clone() }],
                                    caption: None,
                                });
                            }
                        }
                    }
                }
            }
            DialogueKind::MultiMix => {
                let Some(caption) = &caption else {
                    if let Some(first) = items.first() {
                        log::warn!("object '{}' has no caption; multi_mix samples skipped", first.object);
                    }
                    continue;
                };
                for item in items {
                    let level = pick_level(config, &format!("level/multi_mix/{}", item.grasp_id));
                    jobs.push(Job {
                        id: format!("multi_mix/{}", item.grasp_id),
                        kind,
                        items: vec![GraspItem { level, ..item.clone() }],
                        caption: Some(caption.clone()),
                    });
                }
            }
            DialogueKind::MultiGrasp => {
                for group in interleave_by_hand(items).chunks(config.build.group_size) {
                    if group.len() < 2 {
                        continue;
                    }
                    let group: Vec<GraspItem> = group
                        .iter()
                        .map(|it| GraspItem {
                            level: pick_level(config, &format!("level/multi_grasp/{}", it.grasp_id)),
                            ..(*it).clone()
                        })
                        .collect();
                    let id = format!(
                        "multi_grasp/{}",
                        group.iter().map(|g| g.grasp_id.as_str()).collect::<Vec<_>>().join("+")
                    );
                    jobs.push(Job { id, kind, items: group, caption: None });
                }
            }
        }
    }
    Ok(())
}

/// Round-robin over hands (sorted by name), so consecutive grasps come
/// from different hands whenever possible.
fn interleave_by_hand(items: &[GraspItem]) -> Vec<&GraspItem> {
    let mut by_hand: BTreeMap<&str, Vec<&GraspItem>> = BTreeMap::new();
    for it in items {
        by_hand.entry(&it.bins.hand).or_default().push(it);
    }
    let mut queues: Vec<std::vec::IntoIter<&GraspItem>> = by_hand.into_values().map(Vec::into_iter).collect();
    let mut out = Vec::with_capacity(items.len());
    while out.len() < items.len() {
        for q in queues.iter_mut() {
            if let Some(it) = q.next() {
                out.push(it);
            }
        }
    }
    out
}
