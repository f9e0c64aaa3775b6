use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::codec::{DediscretizeMode, DEFAULT_VOCAB_BINS};
use crate::contact::{
    DEFAULT_EPSILON, DEFAULT_PENETRATION_THRESHOLD, DEFAULT_PER_PATTERN_DEXTEROUS, DEFAULT_PER_PATTERN_GRIPPER,
};
use crate::conversation::{DialogueKind, InstructionLevel};
use crate::kinematics::HandClass;

/// Environment variables that override configured paths.
pub const ENV_OVERRIDES: [(&str, PathField); 5] = [
    ("GRASPSET_MESHES", PathField::Meshes),
    ("GRASPSET_LABELS", PathField::Labels),
    ("GRASPSET_HANDS", PathField::Hands),
    ("GRASPSET_GRASPS", PathField::Grasps),
    ("GRASPSET_OUTPUT", PathField::Output),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathField {
    Meshes,
    Labels,
    Hands,
    Grasps,
    Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// Directory of `<object>.obj` meshes and optional `<object>.meta.json`.
    pub meshes: PathBuf,
    /// Directory of `<object>.json` part labels.
    #[serde(default)]
    pub labels: Option<PathBuf>,
    /// Directory of hand-spec JSON files; bundled hands when absent.
    #[serde(default)]
    pub hands: Option<PathBuf>,
    /// Grasp pose JSONL.
    pub grasps: PathBuf,
    pub output: PathBuf,
    /// Question/answer templates; bundled set when absent.
    #[serde(default)]
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerPattern {
    pub dexterous: usize,
    pub gripper: usize,
}

impl Default for PerPattern {
    fn default() -> Self {
        PerPattern { dexterous: DEFAULT_PER_PATTERN_DEXTEROUS, gripper: DEFAULT_PER_PATTERN_GRIPPER }
    }
}

impl PerPattern {
    pub fn for_class(&self, class: HandClass) -> usize {
        match class {
            HandClass::Dexterous => self.dexterous,
            HandClass::Gripper => self.gripper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BuildConfig {
    pub kinds: Vec<DialogueKind>,
    pub levels: Vec<InstructionLevel>,
    /// Distinct single-grasp questions per grasp (5..=10). When absent, one
    /// single-grasp sample is emitted per configured level.
    pub questions_per_grasp: Option<usize>,
    /// Grasps per multi-grasp dialogue.
    pub group_size: usize,
    /// Bin tokens in the shared vocabulary.
    pub vocab_bins: u32,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            kinds: DialogueKind::ALL.to_vec(),
            levels: InstructionLevel::ALL.to_vec(),
            questions_per_grasp: None,
            group_size: 2,
            vocab_bins: DEFAULT_VOCAB_BINS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_threshold")]
    pub penetration_threshold: f64,
    #[serde(default = "default_bins")]
    pub n_bins: u32,
    #[serde(default)]
    pub dediscretize: DediscretizeMode,
    #[serde(default)]
    pub per_pattern: PerPattern,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses every core. Never affects outputs.
    #[serde(default)]
    pub workers: usize,
    /// Grasps per journal chunk during annotation.
    #[serde(default = "default_chunk")]
    pub chunk_size: usize,
    #[serde(default)]
    pub build: BuildConfig,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_threshold() -> f64 {
    DEFAULT_PENETRATION_THRESHOLD
}
fn default_bins() -> u32 {
    DEFAULT_VOCAB_BINS
}
fn default_chunk() -> usize {
    64
}

impl PipelineConfig {
    /// Config with default numeric settings for the given paths.
    pub fn with_paths(paths: Paths) -> Self {
        PipelineConfig {
            paths,
            epsilon: DEFAULT_EPSILON,
            penetration_threshold: DEFAULT_PENETRATION_THRESHOLD,
            n_bins: DEFAULT_VOCAB_BINS,
            dediscretize: DediscretizeMode::default(),
            per_pattern: PerPattern::default(),
            seed: 0,
            workers: 0,
            chunk_size: default_chunk(),
            build: BuildConfig::default(),
        }
    }

    /// Reads TOML or JSON (by extension), resolves relative paths against
    /// the config file's directory, then applies environment overrides.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let mut config: PipelineConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?,
            _ => toml::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?,
        };
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_relative(base);
        config.apply_env(|k| std::env::var_os(k).map(PathBuf::from));
        Ok(config)
    }

    pub fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        fix(&mut paths.meshes);
        fix(&mut paths.grasps);
        fix(&mut paths.output);
        for p in [&mut paths.labels, &mut paths.hands, &mut paths.templates].into_iter().flatten() {
            fix(p);
        }
    }

    /// Applies path overrides from `lookup` (the process environment in
    /// production).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<PathBuf>) {
        for (var, field) in ENV_OVERRIDES {
            if let Some(v) = lookup(var) {
                match field {
                    PathField::Meshes => self.paths.meshes = v,
                    PathField::Labels => self.paths.labels = Some(v),
                    PathField::Hands => self.paths.hands = Some(v),
                    PathField::Grasps => self.paths.grasps = v,
                    PathField::Output => self.paths.output = v,
                }
            }
        }
    }

    /// Range checks on numeric fields and existence checks on inputs.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.penetration_threshold > 0.0 && self.penetration_threshold.is_finite()) {
            return bad(format!("penetration_threshold must be positive, got {}", self.penetration_threshold));
        }
        if self.n_bins < 2 || self.n_bins > self.build.vocab_bins {
            return bad(format!("n_bins must be in [2, {}], got {}", self.build.vocab_bins, self.n_bins));
        }
        if self.per_pattern.dexterous == 0 || self.per_pattern.gripper == 0 {
            return bad("per_pattern counts must be positive".into());
        }
        if self.chunk_size == 0 {
            return bad("chunk_size must be positive".into());
        }
        if let Some(k) = self.build.questions_per_grasp {
            if !(5..=10).contains(&k) {
                return bad(format!("build.questions_per_grasp must be in 5..=10, got {k}"));
            }
        }
        if self.build.group_size < 2 {
            return bad("build.group_size must be at least 2".into());
        }
        if self.build.levels.is_empty() {
            return bad("build.levels is empty".into());
        }
        let dirs = [Some(&self.paths.meshes), self.paths.labels.as_ref(), self.paths.hands.as_ref()];
        for dir in dirs.into_iter().flatten() {
            if !dir.is_dir() {
                return bad(format!("directory not found: {}", dir.display()));
            }
        }
        for file in [Some(&self.paths.grasps), self.paths.templates.as_ref()].into_iter().flatten() {
            if !file.is_file() {
                return bad(format!("file not found: {}", file.display()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML: &str = r#"
        seed = 7
        n_bins = 384
        [paths]
        meshes = "meshes"
        grasps = "grasps.jsonl"
        output = "/abs/out"
        [build]
        kinds = ["single_grasp"]
        questions_per_grasp = 6
    "#;

    #[test]
    fn toml_defaults_and_relative_paths() {
        let mut c: PipelineConfig = toml::from_str(TOML).unwrap();
        c.resolve_relative(Path::new("/data"));
        assert_eq!(c.paths.meshes, PathBuf::from("/data/meshes"));
        assert_eq!(c.paths.output, PathBuf::from("/abs/out"));
        assert_eq!(c.epsilon, DEFAULT_EPSILON);
        assert_eq!(c.n_bins, 384);
        assert_eq!(c.dediscretize, DediscretizeMode::Center);
        assert_eq!(c.build.kinds, vec![DialogueKind::SingleGrasp]);
        assert_eq!(c.build.levels.len(), 3);
        assert_eq!(c.per_pattern.for_class(HandClass::Gripper), 4);
    }

    #[test]
    fn env_overrides_paths_only() {
        let mut c: PipelineConfig = toml::from_str(TOML).unwrap();
        c.apply_env(|k| (k == "GRASPSET_OUTPUT").then(|| PathBuf::from("/tmp/o")));
        assert_eq!(c.paths.output, PathBuf::from("/tmp/o"));
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn out_of_range_values_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("meshes")).unwrap();
        std::fs::write(dir.path().join("grasps.jsonl"), "").unwrap();
        let mut c: PipelineConfig = toml::from_str(TOML).unwrap();
        c.resolve_relative(dir.path());
        assert!(c.validate().is_ok());
        c.build.questions_per_grasp = Some(11);
        assert!(c.validate().is_err());
        c.build.questions_per_grasp = None;
        c.epsilon = 0.0;
        assert!(c.validate().is_err());
        c.epsilon = 0.005;
        c.n_bins = 1000;
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<PipelineConfig>(&format!("{TOML}\nbogus = 1")).is_err());
    }
}
