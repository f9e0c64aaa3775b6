use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{load_hands, OutputLayout, PipelineConfig, PipelineError};
use crate::codec::{compute_bounds, BinSpec};
use crate::dataset::{read_jsonl, write_atomic, GraspInputRecord};
use crate::kinematics::GraspPose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionRange {
    pub dim: String,
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsSummary {
    pub hand: String,
    pub grasps: usize,
    pub n_bins: u32,
    pub corpus_hash: String,
    pub ranges: Vec<DimensionRange>,
}

/// Computes one bin spec per hand present among the kept grasps and
/// writes it to `bounds/<hand>.json`. Specs do not depend on corpus order.
pub fn cmd_bounds(config: &PipelineConfig) -> Result<Vec<BoundsSummary>, PipelineError> {
    let layout = OutputLayout::new(&config.paths.output);
    let kept_path = layout.kept();
    if !kept_path.exists() {
        return Err(PipelineError::Missing(format!("{} (run annotate first)", kept_path.display())));
    }
    let hands = load_hands(config.paths.hands.as_deref())?;
    let (kept, bad) = read_jsonl::<GraspInputRecord>(&kept_path).map_err(|e| PipelineError::io(&kept_path, e))?;
    if !bad.is_empty() {
        log::warn!("{}: {} unreadable lines ignored", kept_path.display(), bad.len());
    }
    let mut by_hand: BTreeMap<&str, Vec<GraspPose>> = BTreeMap::new();
    for r in &kept {
        by_hand.entry(&r.hand).or_default().push(r.pose());
    }
    for name in hands.keys().filter(|h| !by_hand.contains_key(h.as_str())) {
        log::info!("hand '{name}' has no kept grasps; no bounds written");
    }

    clear_bounds(&layout)?;
    let mut summaries = Vec::new();
    for (hand, poses) in by_hand {
        let dims = hands.get(hand).map(|m| m.dimension_names());
        if dims.is_none() {
            log::warn!("hand '{hand}' has no spec; dimensions named generically");
        }
        let spec: BinSpec = compute_bounds(&poses, config.n_bins, dims)?;
        let path = layout.bounds(hand);
        write_atomic(&path, (spec.to_json() + "\n").as_bytes()).map_err(|e| PipelineError::io(&path, e))?;
        summaries.push(BoundsSummary {
            hand: hand.to_string(),
            grasps: poses.len(),
            n_bins: spec.n_bins,
            corpus_hash: spec.corpus_hash.clone(),
            ranges: (0..spec.dim())
                .map(|i| DimensionRange {
                    dim: spec.dims[i].clone(),
                    lower: spec.lower[i],
                    upper: spec.upper[i],
                    width: spec.width[i],
                })
                .collect(),
        });
    }
    Ok(summaries)
}

/// Removes specs from an earlier run so hands that left the corpus do not
/// keep stale bounds.
fn clear_bounds(layout: &OutputLayout) -> Result<(), PipelineError> {
    for p in spec_paths(layout)? {
        std::fs::remove_file(&p).map_err(|e| PipelineError::io(&p, e))?;
    }
    Ok(())
}

fn spec_paths(layout: &OutputLayout) -> Result<Vec<std::path::PathBuf>, PipelineError> {
    let dir = layout.bounds_dir();
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<_> = std::fs::read_dir(&dir)
        .map_err(|e| PipelineError::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Bin specs previously written by [`cmd_bounds`], keyed by hand.
pub(crate) fn load_bounds(layout: &OutputLayout) -> Result<BTreeMap<String, BinSpec>, PipelineError> {
    let mut specs = BTreeMap::new();
    for p in spec_paths(layout)? {
        let text = std::fs::read_to_string(&p).map_err(|e| PipelineError::io(&p, e))?;
        let spec = BinSpec::from_json(&text)?;
        specs.insert(spec.hand.clone(), spec);
    }
    Ok(specs)
}
