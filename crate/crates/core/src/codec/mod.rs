//! Per-hand grasp quantization and the special-token stream format.

mod bins;
mod tokens;

pub use bins::{
    compute_bounds, dediscretize, dequantize, discretize, quantize, BinSpec, BinVector, DediscretizeMode, Discretized,
    BIN_SPEC_SCHEMA_VERSION, DEGENERATE_HALF_WIDTH,
};
pub use tokens::{
    dequantize_scale, detokenize, find_stream, parse_stream, quantize_scale, tokenize, tokenize_with_scale_bin,
    DecodedGrasp, ParsedStream, StreamError, StreamErrorKind, Token, TokenStream, TokenVocabulary, DEFAULT_VOCAB_BINS,
    SCALE_RANGE,
};

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("grasp corpus is empty")]
    EmptyCorpus,
    #[error("expected hand '{expected}', found '{found}'")]
    HandMismatch { expected: String, found: String },
    #[error("expected {expected} dimensions, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("bin {bin} outside [0, {n_bins})")]
    BinOutOfRange { bin: u32, n_bins: u32 },
    #[error("hand '{0}' is not in the vocabulary")]
    UnknownHand(String),
    #[error("invalid bin spec: {0}")]
    Spec(String),
    #[error("bin spec for '{hand}' has corpus hash {found}, stream was encoded with {expected} (use --force to override)")]
    HashMismatch { hand: String, expected: String, found: String },
}
