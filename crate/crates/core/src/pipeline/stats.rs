use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::annotate::{AnnotationRecord, GraspStatus};
use super::{OutputLayout, PipelineConfig, PipelineError};
use crate::dataset::{read_jsonl, write_atomic, GraspInputRecord};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandStats {
    pub hand: String,
    pub objects: usize,
    pub grasps: usize,
    /// Kept grasps per contact pattern key.
    pub patterns: BTreeMap<String, usize>,
}

/// Dataset size in the shape Hand / Object / Grasp / Con.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub hands: usize,
    pub objects: usize,
    pub grasps: usize,
    pub conversations: usize,
    pub per_hand: Vec<HandStats>,
}

impl StatsReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>6} {:>8} {:>8} {:>8}", "Hand", "Object", "Grasp", "Con.");
        let _ = writeln!(out, "{:>6} {:>8} {:>8} {:>8}", self.hands, self.objects, self.grasps, self.conversations);
        for h in &self.per_hand {
            let _ = writeln!(out, "\n{}: {} grasps over {} objects, {} contact patterns", h.hand, h.grasps, h.objects, h.patterns.len());
            for (pattern, n) in &h.patterns {
                let _ = writeln!(out, "  {n:>5}  {pattern}");
            }
        }
        out
    }
}

/// Counts hands, objects and kept grasps from the annotation outputs and
/// conversations from the build output. Missing outputs count as empty.
pub fn cmd_stats(config: &PipelineConfig) -> Result<StatsReport, PipelineError> {
    let layout = OutputLayout::new(&config.paths.output);
    let read_or_empty = |path: std::path::PathBuf| -> Result<String, PipelineError> {
        if path.exists() {
            std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))
        } else {
            Ok(String::new())
        }
    };
    let kept_path = layout.kept();
    let kept: Vec<GraspInputRecord> = if kept_path.exists() {
        read_jsonl(&kept_path).map_err(|e| PipelineError::io(&kept_path, e))?.0
    } else {
        Vec::new()
    };
    let annotations: Vec<AnnotationRecord> = crate::dataset::parse_jsonl(&read_or_empty(layout.contacts())?).0;
    let conversations = read_or_empty(layout.conversations())?.lines().filter(|l| !l.trim().is_empty()).count();

    let patterns: BTreeMap<&str, String> = annotations
        .iter()
        .filter(|a| a.status == GraspStatus::Kept)
        .map(|a| (a.grasp_id.as_str(), a.contacts.pattern().key()))
        .collect();
    let mut per_hand: BTreeMap<&str, (BTreeSet<&str>, HandStats)> = BTreeMap::new();
    for r in &kept {
        let (objs, stats) = per_hand.entry(&r.hand).or_default();
        objs.insert(&r.object_id);
        stats.grasps += 1;
        if let Some(p) = patterns.get(r.grasp_id.as_str()) {
            *stats.patterns.entry(p.clone()).or_default() += 1;
        }
    }
    let report = StatsReport {
        hands: per_hand.len(),
        objects: kept.iter().map(|r| r.object_id.as_str()).collect::<BTreeSet<_>>().len(),
        grasps: kept.len(),
        conversations,
        per_hand: per_hand
            .into_iter()
            .map(|(hand, (objs, s))| HandStats { hand: hand.to_string(), objects: objs.len(), ..s })
            .collect(),
    };
    let json = layout.stats_json();
    let text = serde_json::to_string_pretty(&report).expect("stats serialize") + "\n";
    write_atomic(&json, text.as_bytes()).map_err(|e| PipelineError::io(&json, e))?;
    let table = layout.stats_table();
    write_atomic(&table, report.to_table().as_bytes()).map_err(|e| PipelineError::io(&table, e))?;
    Ok(report)
}
