use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CodecError;
use crate::kinematics::GraspPose;

/// Half-width given to a dimension whose corpus values are all equal.
pub const DEGENERATE_HALF_WIDTH: f64 = 1e-6;
pub const BIN_SPEC_SCHEMA_VERSION: u32 = 1;

/// Per-hand, per-dimension uniform quantizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub schema_version: u32,
    pub hand: String,
    pub n_bins: u32,
    pub dims: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub width: Vec<f64>,
    pub corpus_size: usize,
    /// SHA-256 over the sorted pose vectors; independent of corpus order.
    pub corpus_hash: String,
}

/// Quantized grasp: one bin index per pose dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinVector {
    pub hand: String,
    pub n_bins: u32,
    pub bins: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discretized {
    pub bins: BinVector,
    /// Dimensions whose value fell outside [lower, upper] and was clamped.
    pub out_of_range: usize,
}

/// How a bin index maps back to a continuous value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DediscretizeMode {
    /// Lower bin edge: `L + b * W`.
    Edge,
    /// Bin center: `L + (b + 0.5) * W`.
    #[default]
    Center,
}

impl std::str::FromStr for DediscretizeMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edge" => Ok(Self::Edge),
            "center" => Ok(Self::Center),
            other => Err(format!("unknown dediscretize mode '{other}' (expected edge|center)")),
        }
    }
}

impl BinSpec {
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bin spec serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CodecError> {
        let spec: BinSpec = serde_json::from_str(text).map_err(|e| CodecError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let d = self.dims.len();
        if self.lower.len() != d || self.upper.len() != d || self.width.len() != d {
            return Err(CodecError::Spec("dimension arrays differ in length".into()));
        }
        if self.n_bins == 0 {
            return Err(CodecError::Spec("n_bins must be positive".into()));
        }
        for i in 0..d {
            if !(self.lower[i] < self.upper[i]) || !(self.width[i] > 0.0) {
                return Err(CodecError::Spec(format!("dimension '{}' has an empty range", self.dims[i])));
            }
        }
        Ok(())
    }

    /// Refuses a spec whose corpus hash differs from the one recorded at
    /// encode time, unless `force` is set.
    pub fn check_hash(&self, expected: Option<&str>, force: bool) -> Result<(), CodecError> {
        match expected {
            Some(h) if h != self.corpus_hash && !force => Err(CodecError::HashMismatch {
                hand: self.hand.clone(),
                expected: h.to_string(),
                found: self.corpus_hash.clone(),
            }),
            _ => Ok(()),
        }
    }
}

/// Per-dimension min/max over the corpus, split into `n_bins` bins.
pub fn compute_bounds(poses: &[GraspPose], n_bins: u32, dim_names: Option<Vec<String>>) -> Result<BinSpec, CodecError> {
    let first = poses.first().ok_or(CodecError::EmptyCorpus)?;
    if n_bins == 0 {
        return Err(CodecError::Spec("n_bins must be positive".into()));
    }
    let d = 6 + first.theta.len();
    let dims = match dim_names {
        Some(names) if names.len() == d => names,
        Some(names) => return Err(CodecError::Arity { expected: d, found: names.len() }),
        None => ["tx", "ty", "tz", "rx", "ry", "rz"]
            .iter()
            .map(|s| s.to_string())
            .chain((0..first.theta.len()).map(|i| format!("theta_{i}")))
            .collect(),
    };

    let mut lower = vec![f64::INFINITY; d];
    let mut upper = vec![f64::NEG_INFINITY; d];
    let mut encoded: Vec<Vec<u8>> = Vec::with_capacity(poses.len());
    for pose in poses {
        if pose.hand != first.hand {
            return Err(CodecError::HandMismatch { expected: first.hand.clone(), found: pose.hand.clone() });
        }
        let v = pose.to_vector();
        if v.len() != d {
            return Err(CodecError::Arity { expected: d, found: v.len() });
        }
        for (i, x) in v.iter().enumerate() {
            lower[i] = lower[i].min(*x);
            upper[i] = upper[i].max(*x);
        }
        encoded.push(v.iter().flat_map(|x| x.to_bits().to_be_bytes()).collect());
    }
    for i in 0..d {
        if lower[i] == upper[i] {
            lower[i] -= DEGENERATE_HALF_WIDTH;
            upper[i] += DEGENERATE_HALF_WIDTH;
        }
    }
    let width = lower.iter().zip(&upper).map(|(l, u)| (u - l) / n_bins as f64).collect();

    encoded.sort_unstable();
    let mut hasher = Sha256::new();
    hasher.update(first.hand.as_bytes());
    hasher.update((d as u64).to_be_bytes());
    for e in &encoded {
        hasher.update(e);
    }

    Ok(BinSpec {
        schema_version: BIN_SPEC_SCHEMA_VERSION,
        hand: first.hand.clone(),
        n_bins,
        dims,
        lower,
        upper,
        width,
        corpus_size: poses.len(),
        corpus_hash: hex::encode(hasher.finalize()),
    })
}

/// Bin index of `p`: the largest `b` with `L + b * W <= p`, clamped to
/// `[0, n - 1]`. Returns the bin and whether clamping applied.
pub fn quantize(p: f64, lower: f64, upper: f64, width: f64, n: u32) -> (u32, bool) {
    let last = n as i64 - 1;
    if p.is_nan() {
        return (0, true);
    }
    let out_of_range = p < lower || p > upper;
    let mut b = ((p - lower) / width).floor();
    if !b.is_finite() {
        b = if p > lower { last as f64 } else { 0.0 };
    }
    let mut b = (b as i64).clamp(0, last);
    // the division may land one bin off; settle on the edges as computed
    if b > 0 && lower + b as f64 * width > p {
        b -= 1;
    } else if b < last && lower + (b + 1) as f64 * width <= p {
        b += 1;
    }
    (b as u32, out_of_range)
}

pub fn dequantize(bin: u32, lower: f64, width: f64, mode: DediscretizeMode) -> f64 {
    match mode {
        DediscretizeMode::Edge => lower + bin as f64 * width,
        DediscretizeMode::Center => lower + (bin as f64 + 0.5) * width,
    }
}

pub fn discretize(pose: &GraspPose, spec: &BinSpec) -> Result<Discretized, CodecError> {
    if pose.hand != spec.hand {
        return Err(CodecError::HandMismatch { expected: spec.hand.clone(), found: pose.hand.clone() });
    }
    let v = pose.to_vector();
    if v.len() != spec.dim() {
        return Err(CodecError::Arity { expected: spec.dim(), found: v.len() });
    }
    let mut out_of_range = 0;
    let bins = v
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let (b, clamped) = quantize(p, spec.lower[i], spec.upper[i], spec.width[i], spec.n_bins);
            out_of_range += clamped as usize;
            b
        })
        .collect();
    Ok(Discretized {
        bins: BinVector { hand: spec.hand.clone(), n_bins: spec.n_bins, bins },
        out_of_range,
    })
}

pub fn dediscretize(bins: &BinVector, spec: &BinSpec, mode: DediscretizeMode) -> Result<GraspPose, CodecError> {
    if bins.hand != spec.hand {
        return Err(CodecError::HandMismatch { expected: spec.hand.clone(), found: bins.hand.clone() });
    }
    if bins.bins.len() != spec.dim() {
        return Err(CodecError::Arity { expected: spec.dim(), found: bins.bins.len() });
    }
    let values: Vec<f64> = bins
        .bins
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            if b >= spec.n_bins {
                Err(CodecError::BinOutOfRange { bin: b, n_bins: spec.n_bins })
            } else {
                Ok(dequantize(b, spec.lower[i], spec.width[i], mode))
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(GraspPose::from_vector(spec.hand.clone(), &values).expect("spec has at least six dimensions"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(hand: &str, v: &[f64]) -> GraspPose {
        GraspPose::from_vector(hand, v).unwrap()
    }

    fn two_pose_spec(n: u32) -> BinSpec {
        compute_bounds(
            &[
                pose("toy", &[-0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2]),
                pose("toy", &[0.3, 1.0, 1.0, 1.0, 1.0, 1.0, 0.2]),
            ],
            n,
            None,
        )
        .unwrap()
    }

    #[test]
    fn bounds_are_min_max() {
        let spec = two_pose_spec(256);
        assert_eq!(spec.lower[0], -0.1);
        assert_eq!(spec.upper[0], 0.3);
        assert!((spec.width[0] - 0.4 / 256.0).abs() < 1e-15);
        assert_eq!(spec.dims[6], "theta_0");
    }

    #[test]
    fn constant_dimension_gets_synthetic_width() {
        let spec = two_pose_spec(256);
        assert_eq!(spec.lower[6], 0.2 - 1e-6);
        assert_eq!(spec.upper[6], 0.2 + 1e-6);
        assert!(spec.width[6] > 0.0);
    }

    #[test]
    fn width_times_n_is_range() {
        let spec = two_pose_spec(384);
        for i in 0..spec.dim() {
            assert!((spec.width[i] * 384.0 - (spec.upper[i] - spec.lower[i])).abs() <= 1e-12);
        }
    }

    #[test]
    fn edges_and_clamping() {
        let spec = two_pose_spec(384);
        let at_lower = discretize(&pose("toy", &spec.lower), &spec).unwrap();
        assert!(at_lower.bins.bins.iter().all(|&b| b == 0));
        assert_eq!(at_lower.out_of_range, 0);
        let at_upper = discretize(&pose("toy", &spec.upper), &spec).unwrap();
        assert!(at_upper.bins.bins.iter().all(|&b| b == 383));
        let mut beyond = spec.upper.clone();
        beyond[0] += 1.0;
        beyond[1] = spec.lower[1] - 1.0;
        let d = discretize(&pose("toy", &beyond), &spec).unwrap();
        assert_eq!(d.out_of_range, 2);
        assert_eq!(d.bins.bins[0], 383);
        assert_eq!(d.bins.bins[1], 0);
    }

    #[test]
    fn one_and_a_half_widths_is_bin_one() {
        let spec = two_pose_spec(384);
        let mut v = spec.lower.clone();
        for i in 0..v.len() {
            v[i] += 1.5 * spec.width[i];
        }
        let d = discretize(&pose("toy", &v), &spec).unwrap();
        assert!(d.bins.bins.iter().all(|&b| b == 1), "{:?}", d.bins.bins);
    }

    #[test]
    fn zero_bins_edge_mode_gives_lower() {
        let spec = two_pose_spec(512);
        let bins = BinVector { hand: "toy".into(), n_bins: 512, bins: vec![0; 7] };
        let p = dediscretize(&bins, &spec, DediscretizeMode::Edge).unwrap();
        assert_eq!(p.to_vector(), spec.lower);
    }

    #[test]
    fn dediscretize_rejects_bad_bin() {
        let spec = two_pose_spec(256);
        let bins = BinVector { hand: "toy".into(), n_bins: 256, bins: vec![256; 7] };
        assert!(matches!(
            dediscretize(&bins, &spec, DediscretizeMode::Center),
            Err(CodecError::BinOutOfRange { .. })
        ));
    }

    #[test]
    fn hash_guard() {
        let spec = two_pose_spec(256);
        assert!(spec.check_hash(Some(&spec.corpus_hash), false).is_ok());
        assert!(spec.check_hash(Some("deadbeef"), false).is_err());
        assert!(spec.check_hash(Some("deadbeef"), true).is_ok());
        assert!(spec.check_hash(None, false).is_ok());
    }

    #[test]
    fn json_round_trip_validates() {
        let spec = two_pose_spec(256);
        assert_eq!(BinSpec::from_json(&spec.to_json()).unwrap(), spec);
        let mut broken = spec.clone();
        broken.upper[0] = broken.lower[0];
        assert!(BinSpec::from_json(&broken.to_json()).is_err());
    }

    #[test]
    fn empty_and_mixed_corpus_errors() {
        assert!(matches!(compute_bounds(&[], 8, None), Err(CodecError::EmptyCorpus)));
        let mixed = [pose("a", &[0.0; 6]), pose("b", &[0.0; 6])];
        assert!(matches!(compute_bounds(&mixed, 8, None), Err(CodecError::HandMismatch { .. })));
    }
}
