use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bounds::load_bounds;
use super::{load_hands, OutputLayout, PipelineConfig, PipelineError};
use crate::codec::{detokenize, find_stream, TokenVocabulary};
use crate::dataset::{read_jsonl, write_atomic, GraspInputRecord};
use crate::metrics::{evaluate_corpus, EvalReport, FailedRow};

/// A prediction given as a token stream, optionally with surrounding text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenPrediction {
    pub grasp_id: String,
    #[serde(default)]
    pub object_id: Option<String>,
    pub text: String,
    /// Corpus hash of the bin spec the stream was encoded with.
    #[serde(default)]
    pub spec_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredictionLine {
    Numeric(GraspInputRecord),
    Tokens(TokenPrediction),
}

/// Scores predictions (numeric poses or token streams) against the kept
/// grasps and writes `eval/report.json` and `eval/report.txt`. Token
/// streams are decoded with the stored bin specs; a spec whose corpus hash
/// differs from the one a prediction names is refused unless `force`.
pub fn cmd_eval(config: &PipelineConfig, predictions: &Path, force: bool) -> Result<EvalReport, PipelineError> {
    let layout = OutputLayout::new(&config.paths.output);
    let kept_path = layout.kept();
    if !kept_path.exists() {
        return Err(PipelineError::Missing(format!("{} (run annotate first)", kept_path.display())));
    }
    let hands = load_hands(config.paths.hands.as_deref())?;
    let objects = crate::dataset::load_objects(&config.paths.meshes, config.paths.labels.as_deref())?;
    let (references, _) = read_jsonl::<GraspInputRecord>(&kept_path).map_err(|e| PipelineError::io(&kept_path, e))?;
    let ref_objects: BTreeMap<&str, &str> =
        references.iter().map(|r| (r.grasp_id.as_str(), r.object_id.as_str())).collect();

    let (lines, bad) = read_jsonl::<PredictionLine>(predictions).map_err(|e| PipelineError::io(predictions, e))?;
    let mut failed: Vec<FailedRow> = bad
        .into_iter()
        .map(|b| FailedRow { grasp_id: format!("line:{}", b.line), reason: b.error })
        .collect();

    let needs_specs = lines.iter().any(|l| matches!(l, PredictionLine::Tokens(_)));
    let specs = if needs_specs { load_bounds(&layout)? } else { BTreeMap::new() };
    let vocab = TokenVocabulary::new(hands.keys().cloned(), config.build.vocab_bins);

    let mut preds = Vec::with_capacity(lines.len());
    for line in lines {
        match line {
            PredictionLine::Numeric(r) => preds.push(r),
            PredictionLine::Tokens(t) => {
                let Some(at) = find_stream(&t.text) else {
                    failed.push(FailedRow { grasp_id: t.grasp_id, reason: "no token stream in text".into() });
                    continue;
                };
                let decoded = match detokenize(&t.text[at..], &vocab, &specs, config.dediscretize) {
                    Ok(d) => d,
                    Err(e) => {
                        failed.push(FailedRow { grasp_id: t.grasp_id, reason: e.to_string() });
                        continue;
                    }
                };
                specs[&decoded.pose.hand].check_hash(t.spec_hash.as_deref(), force)?;
                let object_id = t
                    .object_id
                    .clone()
                    .or_else(|| ref_objects.get(t.grasp_id.as_str()).map(|s| s.to_string()))
                    .unwrap_or_default();
                preds.push(GraspInputRecord::from_pose(&t.grasp_id, object_id, &decoded.pose, "tokens"));
            }
        }
    }

    let mut report = evaluate_corpus(&preds, &references, &objects, &hands, config.epsilon)?;
    report.failed.extend(failed);
    report.failed.sort_by(|a, b| a.grasp_id.cmp(&b.grasp_id));

    let json = layout.eval_json();
    write_atomic(&json, (report.to_json() + "\n").as_bytes()).map_err(|e| PipelineError::io(&json, e))?;
    let table = layout.eval_table();
    write_atomic(&table, report.to_table().as_bytes()).map_err(|e| PipelineError::io(&table, e))?;
    Ok(report)
}
