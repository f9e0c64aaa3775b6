use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{chamfer_distance, max_penetration, part_match, MetricsError};
use crate::contact::{detect_contacts, summarize_contacts, ContactSummary};
use crate::dataset::{GraspInputRecord, ObjectAsset};
use crate::geometry::Point;
use crate::kinematics::{GraspPose, HandModel};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const CHAMFER_DEFINITION: &str =
    "CD = 0.5 * (mean_a min_b |a-b| + mean_b min_a |a-b|), Euclidean, non-squared, in cm";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspEval {
    pub grasp_id: String,
    pub hand: String,
    pub object_id: String,
    pub cd_cm: f64,
    pub pen_cm: f64,
    pub pen_sign_reliable: bool,
    /// Dominant contact part of the reference grasp.
    pub instructed_part: Option<String>,
    /// None when the reference has no contact to compare against.
    pub part_match: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandAggregate {
    pub hand: String,
    pub count: usize,
    pub mean_cd_cm: f64,
    pub mean_pen_cm: f64,
    pub part_evaluated: usize,
    pub part_accuracy: Option<f64>,
    /// Simulator success rate; never computed.
    pub suc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailedRow {
    pub grasp_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub cd_definition: String,
    pub rows: Vec<GraspEval>,
    pub per_hand: Vec<HandAggregate>,
    pub overall: HandAggregate,
    /// Reference ids with no prediction.
    pub missing: Vec<String>,
    /// Prediction ids with no reference.
    pub unmatched: Vec<String>,
    pub failed: Vec<FailedRow>,
}

/// Scores each prediction against the reference with the same id.
/// Rows are ordered by id; ids present on only one side are listed and
/// excluded from the aggregates.
pub fn evaluate_corpus(
    predictions: &[GraspInputRecord],
    references: &[GraspInputRecord],
    objects: &BTreeMap<String, ObjectAsset>,
    hands: &BTreeMap<String, HandModel>,
    epsilon: f64,
) -> Result<EvalReport, MetricsError> {
    let mut failed = Vec::new();
    let preds = index_by_id(predictions, &mut failed);
    let refs = index_by_id(references, &mut failed);
    for r in preds.values().chain(refs.values()) {
        if !hands.contains_key(&r.hand) {
            return Err(MetricsError::UnknownHand(r.hand.clone()));
        }
    }
    for r in refs.values() {
        if !objects.contains_key(&r.object_id) {
            return Err(MetricsError::UnknownObject(r.object_id.clone()));
        }
    }
    let missing: Vec<String> = refs.keys().filter(|k| !preds.contains_key(*k)).cloned().collect();
    let unmatched: Vec<String> = preds.keys().filter(|k| !refs.contains_key(*k)).cloned().collect();
    let pairs: Vec<(&GraspInputRecord, &GraspInputRecord)> =
        refs.iter().filter_map(|(id, r)| preds.get(id).map(|p| (*p, *r))).collect();

    let results: Vec<Result<GraspEval, FailedRow>> = pairs
        .par_iter()
        .map(|(p, r)| evaluate_one(p, r, &objects[&r.object_id], hands, epsilon))
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    for res in results {
        match res {
            Ok(row) => rows.push(row),
            Err(f) => failed.push(f),
        }
    }
    failed.sort_by(|a, b| a.grasp_id.cmp(&b.grasp_id));

    let mut by_hand: BTreeMap<&str, Vec<&GraspEval>> = BTreeMap::new();
    for row in &rows {
        by_hand.entry(&row.hand).or_default().push(row);
    }
    let per_hand = by_hand.iter().map(|(h, rs)| aggregate(h, rs)).collect();
    let overall = aggregate("all", &rows.iter().collect::<Vec<_>>());
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        cd_definition: CHAMFER_DEFINITION.to_string(),
        rows,
        per_hand,
        overall,
        missing,
        unmatched,
        failed,
    })
}

fn index_by_id<'a>(records: &'a [GraspInputRecord], failed: &mut Vec<FailedRow>) -> BTreeMap<String, &'a GraspInputRecord> {
    let mut map = BTreeMap::new();
    for r in records {
        match map.entry(r.grasp_id.clone()) {
            Entry::Vacant(e) => {
                e.insert(r);
            }
            Entry::Occupied(_) => failed.push(FailedRow {
                grasp_id: r.grasp_id.clone(),
                reason: "duplicate id; first occurrence used".into(),
            }),
        }
    }
    map
}

fn hand_points(model: &HandModel, pose: &GraspPose) -> Result<crate::kinematics::HandPointCloud, String> {
    // Predictions may leave the joint limits slightly; only shape is checked.
    model.validate_pose(pose, f64::INFINITY).map_err(|e| e.to_string())?;
    Ok(model.place_points(&model.forward_kinematics_from(pose.wrist(), &pose.theta)))
}

fn summary_of(
    id: &str,
    cloud: &crate::kinematics::HandPointCloud,
    object: &ObjectAsset,
    epsilon: f64,
) -> Result<Option<ContactSummary>, String> {
    let rec = detect_contacts(id, cloud, &object.index, epsilon).map_err(|e| e.to_string())?;
    Ok(summarize_contacts(&rec, &object.name, object.index.mesh().part_names()).ok())
}

fn evaluate_one(
    pred: &GraspInputRecord,
    reference: &GraspInputRecord,
    object: &ObjectAsset,
    hands: &BTreeMap<String, HandModel>,
    epsilon: f64,
) -> Result<GraspEval, FailedRow> {
    let fail = |reason: String| FailedRow { grasp_id: reference.grasp_id.clone(), reason };
    if pred.hand != reference.hand {
        return Err(fail(format!("prediction hand '{}' differs from reference '{}'", pred.hand, reference.hand)));
    }
    let model = &hands[&reference.hand];
    let ref_cloud = hand_points(model, &reference.pose()).map_err(|e| fail(format!("reference: {e}")))?;
    let pred_cloud = hand_points(model, &pred.pose()).map_err(|e| fail(format!("prediction: {e}")))?;
    let ref_pts: Vec<Point> = ref_cloud.to_vec();
    let pred_pts: Vec<Point> = pred_cloud.to_vec();
    let cd_cm = chamfer_distance(&pred_pts, &ref_pts).map_err(|e| fail(e.to_string()))?;
    let pen = max_penetration(&pred_pts, &object.index);
    let instructed = summary_of(&reference.grasp_id, &ref_cloud, object, epsilon)
        .map_err(fail)?
        .map(|s| s.dominant_part().to_string());
    let predicted = summary_of(&pred.grasp_id, &pred_cloud, object, epsilon).map_err(fail)?;
    Ok(GraspEval {
        grasp_id: reference.grasp_id.clone(),
        hand: reference.hand.clone(),
        object_id: reference.object_id.clone(),
        cd_cm,
        pen_cm: pen.pen_cm,
        pen_sign_reliable: pen.sign_reliable,
        part_match: instructed.as_deref().map(|part| part_match(predicted.as_ref(), part)),
        instructed_part: instructed,
    })
}

fn aggregate(hand: &str, rows: &[&GraspEval]) -> HandAggregate {
    let n = rows.len();
    let mean = |f: fn(&GraspEval) -> f64| if n == 0 { 0.0 } else { rows.iter().map(|r| f(r)).sum::<f64>() / n as f64 };
    let judged: Vec<bool> = rows.iter().filter_map(|r| r.part_match).collect();
    HandAggregate {
        hand: hand.to_string(),
        count: n,
        mean_cd_cm: mean(|r| r.cd_cm),
        mean_pen_cm: mean(|r| r.pen_cm),
        part_evaluated: judged.len(),
        part_accuracy: (!judged.is_empty()).then(|| judged.iter().filter(|m| **m).count() as f64 / judged.len() as f64),
        suc: None,
    }
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned table with CD / Pen / Suc columns per hand and an overall
    /// row. Suc is always "n/a".
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.cd_definition);
        let _ = writeln!(out, "{:<12} {:>6} {:>9} {:>9} {:>6} {:>6}", "Hand", "N", "CD (cm)", "Pen (cm)", "Suc", "Acc");
        for agg in self.per_hand.iter().chain(std::iter::once(&self.overall)) {
            let name = if agg.hand == "all" { "Avg" } else { &agg.hand };
            let acc = agg.part_accuracy.map_or("n/a".to_string(), |a| format!("{a:.2}"));
            let _ = writeln!(
                out,
                "{:<12} {:>6} {:>9.2} {:>9.2} {:>6} {:>6}",
                name, agg.count, agg.mean_cd_cm, agg.mean_pen_cm, "n/a", acc
            );
        }
        if !self.missing.is_empty() {
            let _ = writeln!(out, "missing predictions: {}", self.missing.join(", "));
        }
        if !self.unmatched.is_empty() {
            let _ = writeln!(out, "predictions without reference: {}", self.unmatched.join(", "));
        }
        if !self.failed.is_empty() {
            let _ = writeln!(out, "failed rows: {}", self.failed.len());
        }
        out
    }
}
