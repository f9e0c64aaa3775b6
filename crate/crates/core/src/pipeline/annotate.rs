use std::collections::BTreeMap;
use std::fs;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{load_hands, OutputLayout, PipelineConfig, PipelineError, OUTPUT_SCHEMA_VERSION};
use crate::contact::{detect_contacts, filter_by_penetration, summarize_contacts, ContactRecord, ContactSummary};
use crate::dataset::{load_objects, parse_jsonl, read_jsonl, write_jsonl_atomic, GraspInputRecord, ObjectAsset};
use crate::kinematics::HandModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraspStatus {
    Kept,
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Deeper than the penetration threshold.
    Penetration,
    /// No link within the contact threshold.
    NoContact,
}

/// Contact annotation of one grasp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub schema_version: u32,
    pub grasp_id: String,
    pub object_id: String,
    pub hand: String,
    /// Digest of the input record and thresholds; a rerun recomputes the
    /// grasp only when this changes.
    pub input_hash: String,
    pub status: GraspStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<DropReason>,
    /// Meters.
    pub max_penetration: f64,
    pub sign_reliable: bool,
    pub contacts: ContactRecord,
    pub summary: Option<ContactSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRecord {
    pub grasp_id: String,
    pub object_id: String,
    pub hand: String,
    pub reason: DropReason,
    pub max_penetration: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub schema_version: u32,
    /// Grasp id, or `line:N` for an unparseable input line.
    pub grasp_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_hash: Option<String>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
enum Outcome {
    Annotated(AnnotationRecord),
    Failed(FailureRecord),
}

impl Outcome {
    fn id_and_hash(&self) -> (&str, Option<&str>) {
        match self {
            Outcome::Annotated(a) => (&a.grasp_id, Some(&a.input_hash)),
            Outcome::Failed(f) => (&f.grasp_id, f.input_hash.as_deref()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotateSummary {
    pub total: usize,
    pub kept: usize,
    pub dropped: usize,
    pub failed: usize,
    /// Grasps annotated in this run.
    pub computed: usize,
    /// Grasps taken from a previous run's outputs.
    pub reused: usize,
}

impl AnnotateSummary {
    /// More than 10% of input grasps failed.
    pub fn failure_rate_exceeded(&self) -> bool {
        self.failed * 10 > self.total
    }
}

/// Annotates every input grasp: forward kinematics, contact detection,
/// penetration filter, contact summary. Work is journaled per chunk so an
/// interrupted run resumes where it stopped; grasps whose inputs are
/// unchanged since the last run are not recomputed unless `fresh`.
pub fn cmd_annotate(config: &PipelineConfig, fresh: bool) -> Result<AnnotateSummary, PipelineError> {
    cmd_annotate_limited(config, fresh, None)
}

/// Like [`cmd_annotate`], but stops with [`PipelineError::Interrupted`]
/// after journaling `max_chunks` chunks, leaving the run resumable.
pub fn cmd_annotate_limited(
    config: &PipelineConfig,
    fresh: bool,
    max_chunks: Option<usize>,
) -> Result<AnnotateSummary, PipelineError> {
    config.validate()?;
    let layout = OutputLayout::new(&config.paths.output);
    let hands = load_hands(config.paths.hands.as_deref())?;
    let objects = load_objects(&config.paths.meshes, config.paths.labels.as_deref())?;

    let (mut records, bad_lines) =
        read_jsonl::<GraspInputRecord>(&config.paths.grasps).map_err(|e| PipelineError::io(&config.paths.grasps, e))?;
    if records.is_empty() && bad_lines.is_empty() {
        log::warn!("{}: no grasps", config.paths.grasps.display());
    }
    records.sort_by(|a, b| a.grasp_id.cmp(&b.grasp_id));

    let mut failures: Vec<FailureRecord> = bad_lines
        .into_iter()
        .map(|b| FailureRecord {
            schema_version: OUTPUT_SCHEMA_VERSION,
            grasp_id: format!("line:{}", b.line),
            input_hash: None,
            error: b.error,
        })
        .collect();
    let mut unique: Vec<(&GraspInputRecord, String)> = Vec::with_capacity(records.len());
    for r in &records {
        if unique.last().is_some_and(|(u, _)| u.grasp_id == r.grasp_id) {
            failures.push(FailureRecord {
                schema_version: OUTPUT_SCHEMA_VERSION,
                grasp_id: r.grasp_id.clone(),
                input_hash: None,
                error: "duplicate grasp_id; first occurrence kept".into(),
            });
            continue;
        }
        unique.push((r, input_hash(r, config)));
    }

    let journal = layout.journal();
    let mut done: BTreeMap<String, Outcome> = BTreeMap::new();
    if fresh {
        if journal.exists() {
            fs::remove_dir_all(&journal).map_err(|e| PipelineError::io(&journal, e))?;
        }
    } else {
        load_previous(&layout, &mut done)?;
    }

    let pending: Vec<&(&GraspInputRecord, String)> = unique
        .iter()
        .filter(|(r, h)| done.get(&r.grasp_id).and_then(|o| o.id_and_hash().1) != Some(h.as_str()))
        .collect();
    let reused = unique.len() - pending.len();
    let mut part = next_part_index(&journal)?;
    for (n, chunk) in pending.chunks(config.chunk_size).enumerate() {
        if max_chunks.is_some_and(|m| n >= m) {
            return Err(PipelineError::Interrupted { chunks: n });
        }
        let outcomes: Vec<Outcome> = chunk
            .par_iter()
            .map(|(r, h)| annotate_one(r, h, &hands, &objects, config))
            .collect();
        let path = journal.join(format!("part-{part:06}.jsonl"));
        write_jsonl_atomic(&path, &outcomes).map_err(|e| PipelineError::io(&path, e))?;
        part += 1;
        for o in outcomes {
            done.insert(o.id_and_hash().0.to_string(), o);
        }
    }

    let mut annotated = Vec::new();
    for (r, _) in &unique {
        match done.remove(&r.grasp_id).expect("every grasp has an outcome") {
            Outcome::Annotated(a) => annotated.push(a),
            Outcome::Failed(f) => failures.push(f),
        }
    }
    failures.sort_by(|a, b| a.grasp_id.cmp(&b.grasp_id));
    for f in &failures {
        log::warn!("grasp {} failed: {}", f.grasp_id, f.error);
    }

    let kept_ids: Vec<&str> = annotated.iter().filter(|a| a.status == GraspStatus::Kept).map(|a| a.grasp_id.as_str()).collect();
    let kept: Vec<&GraspInputRecord> = unique
        .iter()
        .map(|(r, _)| *r)
        .filter(|r| kept_ids.binary_search(&r.grasp_id.as_str()).is_ok())
        .collect();
    let dropped: Vec<DroppedRecord> = annotated
        .iter()
        .filter_map(|a| {
            a.reason.map(|reason| DroppedRecord {
                grasp_id: a.grasp_id.clone(),
                object_id: a.object_id.clone(),
                hand: a.hand.clone(),
                reason,
                max_penetration: a.max_penetration,
            })
        })
        .collect();

    let write = |path: std::path::PathBuf, res: std::io::Result<()>| res.map_err(|e| PipelineError::io(&path, e));
    write(layout.contacts(), write_jsonl_atomic(&layout.contacts(), &annotated))?;
    write(layout.kept(), write_jsonl_atomic(&layout.kept(), &kept))?;
    write(layout.dropped(), write_jsonl_atomic(&layout.dropped(), &dropped))?;
    write(layout.failed(), write_jsonl_atomic(&layout.failed(), &failures))?;
    if journal.exists() {
        fs::remove_dir_all(&journal).map_err(|e| PipelineError::io(&journal, e))?;
    }

    let summary = AnnotateSummary {
        total: records.len() + failures.iter().filter(|f| f.grasp_id.starts_with("line:")).count(),
        kept: kept.len(),
        dropped: dropped.len(),
        failed: failures.len(),
        computed: pending.len(),
        reused,
    };
    log::info!(
        "annotate: {} grasps, {} kept, {} dropped, {} failed ({} computed, {} reused)",
        summary.total,
        summary.kept,
        summary.dropped,
        summary.failed,
        summary.computed,
        summary.reused
    );
    Ok(summary)
}

fn input_hash(record: &GraspInputRecord, config: &PipelineConfig) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(record).expect("record serializes"));
    h.update(config.epsilon.to_le_bytes());
    h.update(config.penetration_threshold.to_le_bytes());
    hex::encode(h.finalize())
}

/// Outcomes from the last completed run and from any journal left by an
/// interrupted one. Journal entries win since they are newer.
fn load_previous(layout: &OutputLayout, done: &mut BTreeMap<String, Outcome>) -> Result<(), PipelineError> {
    let read = |path: &std::path::Path| -> Result<String, PipelineError> {
        if path.exists() {
            fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))
        } else {
            Ok(String::new())
        }
    };
    for a in parse_jsonl::<AnnotationRecord>(&read(&layout.contacts())?).0 {
        done.insert(a.grasp_id.clone(), Outcome::Annotated(a));
    }
    for f in parse_jsonl::<FailureRecord>(&read(&layout.failed())?).0 {
        if f.input_hash.is_some() {
            done.insert(f.grasp_id.clone(), Outcome::Failed(f));
        }
    }
    let journal = layout.journal();
    if journal.is_dir() {
        let mut parts: Vec<_> = fs::read_dir(&journal)
            .map_err(|e| PipelineError::io(&journal, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        parts.sort();
        for p in parts {
            for o in parse_jsonl::<Outcome>(&read(&p)?).0 {
                done.insert(o.id_and_hash().0.to_string(), o);
            }
        }
    }
    Ok(())
}

fn next_part_index(journal: &std::path::Path) -> Result<usize, PipelineError> {
    if !journal.is_dir() {
        return Ok(0);
    }
    let max = fs::read_dir(journal)
        .map_err(|e| PipelineError::io(journal, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_prefix("part-")?.strip_suffix(".jsonl")?.parse::<usize>().ok()
        })
        .max();
    Ok(max.map_or(0, |m| m + 1))
}

fn annotate_one(
    record: &GraspInputRecord,
    hash: &str,
    hands: &BTreeMap<String, HandModel>,
    objects: &BTreeMap<String, ObjectAsset>,
    config: &PipelineConfig,
) -> Outcome {
    let fail = |error: String| {
        Outcome::Failed(FailureRecord {
            schema_version: OUTPUT_SCHEMA_VERSION,
            grasp_id: record.grasp_id.clone(),
            input_hash: Some(hash.to_string()),
            error,
        })
    };
    let Some(hand) = hands.get(&record.hand) else {
        return fail(format!("unknown hand '{}'", record.hand));
    };
    let Some(object) = objects.get(&record.object_id) else {
        return fail(format!("unknown object '{}'", record.object_id));
    };
    let cloud = match hand.link_points_world(&record.pose()) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    let contacts = match detect_contacts(&record.grasp_id, &cloud, &object.index, config.epsilon) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    let points = cloud.to_vec();
    let verdict = match filter_by_penetration(&points, &object.index, config.penetration_threshold) {
        Ok(v) => v,
        Err(e) => return fail(e.to_string()),
    };
    let summary = summarize_contacts(&contacts, &object.name, object.index.mesh().part_names()).ok();
    let reason = if !verdict.keep {
        Some(DropReason::Penetration)
    } else if summary.is_none() {
        Some(DropReason::NoContact)
    } else {
        None
    };
    Outcome::Annotated(AnnotationRecord {
        schema_version: OUTPUT_SCHEMA_VERSION,
        grasp_id: record.grasp_id.clone(),
        object_id: record.object_id.clone(),
        hand: record.hand.clone(),
        input_hash: hash.to_string(),
        status: if reason.is_some() { GraspStatus::Dropped } else { GraspStatus::Kept },
        reason,
        max_penetration: verdict.max_penetration,
        sign_reliable: verdict.sign_reliable,
        contacts,
        summary,
    })
}
