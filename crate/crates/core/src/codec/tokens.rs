use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::bins::{dediscretize, dequantize, quantize, BinSpec, BinVector, DediscretizeMode};
use super::CodecError;
use crate::kinematics::GraspPose;

/// Largest bin count any experiment uses; one vocabulary serves all.
pub const DEFAULT_VOCAB_BINS: u32 = 512;
pub const SCALE_RANGE: (f64, f64) = (0.01, 1.0);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Token {
    Hand(String),
    Scale(u32),
    GraspBegin,
    GraspEnd,
    Bin(u32),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Hand(name) => write!(f, "<hand:{name}>"),
            Token::Scale(k) => write!(f, "<scale:{k}>"),
            Token::GraspBegin => f.write_str("<grasp>"),
            Token::GraspEnd => f.write_str("</grasp>"),
            Token::Bin(k) => write!(f, "<bin:{k}>"),
        }
    }
}

/// Special tokens added to a language model's vocabulary: one per hand, a
/// scale token per bin, grasp delimiters, and one token per grasp bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenVocabulary {
    hands: Vec<String>,
    n_bins: u32,
}

impl TokenVocabulary {
    pub fn new(hands: impl IntoIterator<Item = impl Into<String>>, n_bins: u32) -> Self {
        let mut hands: Vec<String> = hands.into_iter().map(Into::into).collect();
        hands.sort();
        hands.dedup();
        TokenVocabulary { hands, n_bins }
    }

    pub fn hands(&self) -> &[String] {
        &self.hands
    }

    pub fn n_bins(&self) -> u32 {
        self.n_bins
    }

    pub fn has_hand(&self, name: &str) -> bool {
        self.hands.binary_search_by(|h| h.as_str().cmp(name)).is_ok()
    }

    pub fn len(&self) -> usize {
        self.hands.len() + 2 + 2 * self.n_bins as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Ids: hands, `<grasp>`, `</grasp>`, scale tokens, bin tokens.
    pub fn id_of(&self, token: &Token) -> Option<u32> {
        let h = self.hands.len() as u32;
        match token {
            Token::Hand(name) => self.hands.binary_search(name).ok().map(|i| i as u32),
            Token::GraspBegin => Some(h),
            Token::GraspEnd => Some(h + 1),
            Token::Scale(k) if *k < self.n_bins => Some(h + 2 + k),
            Token::Bin(k) if *k < self.n_bins => Some(h + 2 + self.n_bins + k),
            _ => None,
        }
    }

    pub fn token_of(&self, id: u32) -> Option<Token> {
        let h = self.hands.len() as u32;
        let n = self.n_bins;
        Some(match id {
            i if i < h => Token::Hand(self.hands[i as usize].clone()),
            i if i == h => Token::GraspBegin,
            i if i == h + 1 => Token::GraspEnd,
            i if i < h + 2 + n => Token::Scale(i - h - 2),
            i if i < h + 2 + 2 * n => Token::Bin(i - h - 2 - n),
            _ => return None,
        })
    }

    /// Every token in id order.
    pub fn tokens(&self) -> Vec<Token> {
        (0..self.len() as u32).filter_map(|i| self.token_of(i)).collect()
    }
}

/// Maps an object's bounding-sphere diameter onto a bin index over
/// [`SCALE_RANGE`].
pub fn quantize_scale(diameter: f64, n_bins: u32) -> u32 {
    let (lo, hi) = SCALE_RANGE;
    quantize(diameter, lo, hi, (hi - lo) / n_bins as f64, n_bins).0
}

pub fn dequantize_scale(bin: u32, n_bins: u32) -> f64 {
    let (lo, hi) = SCALE_RANGE;
    dequantize(bin, lo, (hi - lo) / n_bins as f64, DediscretizeMode::Center)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
}

impl fmt::Display for TokenStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

impl TokenStream {
    pub fn ids(&self, vocab: &TokenVocabulary) -> Option<Vec<u32>> {
        self.tokens.iter().map(|t| vocab.id_of(t)).collect()
    }
}

/// `[hand, scale, <grasp>, bins..., </grasp>]` with the scale quantized
/// using the bin vector's own bin count.
pub fn tokenize(bins: &BinVector, scale: f64, vocab: &TokenVocabulary) -> Result<TokenStream, CodecError> {
    tokenize_with_scale_bin(bins, quantize_scale(scale, bins.n_bins), vocab)
}

pub fn tokenize_with_scale_bin(bins: &BinVector, scale_bin: u32, vocab: &TokenVocabulary) -> Result<TokenStream, CodecError> {
    if !vocab.has_hand(&bins.hand) {
        return Err(CodecError::UnknownHand(bins.hand.clone()));
    }
    if bins.n_bins > vocab.n_bins() {
        return Err(CodecError::Spec(format!(
            "bin count {} exceeds vocabulary size {}",
            bins.n_bins,
            vocab.n_bins()
        )));
    }
    if scale_bin >= bins.n_bins {
        return Err(CodecError::BinOutOfRange { bin: scale_bin, n_bins: bins.n_bins });
    }
    if let Some(&b) = bins.bins.iter().find(|&&b| b >= bins.n_bins) {
        return Err(CodecError::BinOutOfRange { bin: b, n_bins: bins.n_bins });
    }
    let mut tokens = Vec::with_capacity(bins.bins.len() + 4);
    tokens.push(Token::Hand(bins.hand.clone()));
    tokens.push(Token::Scale(scale_bin));
    tokens.push(Token::GraspBegin);
    tokens.extend(bins.bins.iter().map(|&b| Token::Bin(b)));
    tokens.push(Token::GraspEnd);
    Ok(TokenStream { tokens })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StreamErrorKind {
    Empty,
    MissingHandToken,
    UnknownHand(String),
    MissingScaleToken,
    MissingGraspOpen,
    MalformedToken(String),
    UnexpectedToken(String),
    InterleavedText(String),
    BinOutOfRange { bin: u32, n_bins: u32 },
    ScaleOutOfRange { bin: u32, n_bins: u32 },
    MissingGraspClose,
    ArityMismatch { expected: usize, found: usize },
    NoSpecForHand(String),
}

impl fmt::Display for StreamErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Empty => f.write_str("empty stream"),
            Self::MissingHandToken => f.write_str("missing hand token"),
            Self::UnknownHand(h) => write!(f, "unknown hand '{h}'"),
            Self::MissingScaleToken => f.write_str("missing scale token"),
            Self::MissingGraspOpen => f.write_str("missing <grasp>"),
            Self::MalformedToken(t) => write!(f, "malformed token '{t}'"),
            Self::UnexpectedToken(t) => write!(f, "unexpected token '{t}'"),
            Self::InterleavedText(t) => write!(f, "text inside grasp block: '{t}'"),
            Self::BinOutOfRange { bin, n_bins } => write!(f, "bin {bin} outside [0, {n_bins})"),
            Self::ScaleOutOfRange { bin, n_bins } => write!(f, "scale {bin} outside [0, {n_bins})"),
            Self::MissingGraspClose => f.write_str("missing </grasp>"),
            Self::ArityMismatch { expected, found } => write!(f, "arity mismatch: expected {expected} bins, found {found}"),
            Self::NoSpecForHand(h) => write!(f, "no bin spec for hand '{h}'"),
        }
    }
}

/// Grammar violation at a byte offset of the input text.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("token stream error at byte {position}: {kind}")]
pub struct StreamError {
    pub position: usize,
    pub kind: StreamErrorKind,
}

/// Syntactically valid stream before bin-count checks against a hand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedStream {
    pub hand: String,
    pub scale_bin: u32,
    pub bins: Vec<u32>,
    /// Free text following `</grasp>`, trimmed.
    pub commentary: String,
    /// Byte offset of `</grasp>`.
    pub close_position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedGrasp {
    pub pose: GraspPose,
    pub bins: BinVector,
    pub scale_bin: u32,
    pub commentary: String,
}

/// Byte offset of the first hand token in free text, if any.
pub fn find_stream(text: &str) -> Option<usize> {
    text.find("<hand:")
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
}

enum Lexeme<'a> {
    Token(Token),
    Text(&'a str),
    End,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    /// Next lexeme after whitespace, with its start offset.
    fn next(&mut self, vocab: &TokenVocabulary) -> Result<(usize, Lexeme<'a>), StreamError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.text[start..];
        if rest.is_empty() {
            return Ok((start, Lexeme::End));
        }
        if !rest.starts_with('<') {
            let end = rest.find(|c: char| c == '<' || c.is_whitespace()).unwrap_or(rest.len());
            let word = &rest[..end.max(1)];
            self.pos += word.len();
            return Ok((start, Lexeme::Text(word)));
        }
        let Some(close) = rest.find('>') else {
            return Err(StreamError { position: start, kind: StreamErrorKind::MalformedToken(rest.to_string()) });
        };
        let raw = &rest[..=close];
        let body = &rest[1..close];
        self.pos += raw.len();
        let malformed = || StreamError { position: start, kind: StreamErrorKind::MalformedToken(raw.to_string()) };
        let number = |s: &str| -> Result<u32, StreamError> {
            if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
                return Err(malformed());
            }
            s.parse().map_err(|_| malformed())
        };
        let token = match body.split_once(':') {
            None if body == "grasp" => Token::GraspBegin,
            None if body == "/grasp" => Token::GraspEnd,
            Some(("hand", name)) if !name.is_empty() && !name.contains(char::is_whitespace) => Token::Hand(name.to_string()),
            Some(("scale", k)) => {
                let k = number(k)?;
                if k >= vocab.n_bins() {
                    return Err(StreamError { position: start, kind: StreamErrorKind::ScaleOutOfRange { bin: k, n_bins: vocab.n_bins() } });
                }
                Token::Scale(k)
            }
            Some(("bin", k)) => {
                let k = number(k)?;
                if k >= vocab.n_bins() {
                    return Err(StreamError { position: start, kind: StreamErrorKind::BinOutOfRange { bin: k, n_bins: vocab.n_bins() } });
                }
                Token::Bin(k)
            }
            _ => return Err(malformed()),
        };
        Ok((start, Lexeme::Token(token)))
    }
}

/// Parses `<hand:NAME> <scale:K> <grasp> <bin:K>... </grasp> [text]`.
/// Leading text is rejected; trailing text is returned as commentary.
pub fn parse_stream(text: &str, vocab: &TokenVocabulary) -> Result<ParsedStream, StreamError> {
    let mut lx = Lexer { text, pos: 0 };
    let err = |position, kind| StreamError { position, kind };

    let hand = match lx.next(vocab)? {
        (p, Lexeme::End) => return Err(err(p, StreamErrorKind::Empty)),
        (p, Lexeme::Token(Token::Hand(h))) => {
            if !vocab.has_hand(&h) {
                return Err(err(p, StreamErrorKind::UnknownHand(h)));
            }
            h
        }
        (p, _) => return Err(err(p, StreamErrorKind::MissingHandToken)),
    };
    let scale_bin = match lx.next(vocab)? {
        (_, Lexeme::Token(Token::Scale(k))) => k,
        (p, _) => return Err(err(p, StreamErrorKind::MissingScaleToken)),
    };
    match lx.next(vocab)? {
        (_, Lexeme::Token(Token::GraspBegin)) => {}
        (p, _) => return Err(err(p, StreamErrorKind::MissingGraspOpen)),
    }
    let mut bins = Vec::new();
    let close_position = loop {
        match lx.next(vocab)? {
            (_, Lexeme::Token(Token::Bin(k))) => bins.push(k),
            (p, Lexeme::Token(Token::GraspEnd)) => break p,
            (p, Lexeme::Token(t)) => return Err(err(p, StreamErrorKind::UnexpectedToken(t.to_string()))),
            (p, Lexeme::Text(w)) => return Err(err(p, StreamErrorKind::InterleavedText(w.to_string()))),
            (p, Lexeme::End) => return Err(err(p, StreamErrorKind::MissingGraspClose)),
        }
    };
    Ok(ParsedStream {
        hand,
        scale_bin,
        bins,
        commentary: text[lx.pos..].trim().to_string(),
        close_position,
    })
}

/// Parses a stream, checks its bin count against the hand's spec, and
/// reconstructs the pose.
pub fn detokenize(
    text: &str,
    vocab: &TokenVocabulary,
    specs: &BTreeMap<String, BinSpec>,
    mode: DediscretizeMode,
) -> Result<DecodedGrasp, StreamError> {
    let parsed = parse_stream(text, vocab)?;
    let Some(spec) = specs.get(&parsed.hand) else {
        return Err(StreamError { position: 0, kind: StreamErrorKind::NoSpecForHand(parsed.hand) });
    };
    if parsed.bins.len() != spec.dim() {
        return Err(StreamError {
            position: parsed.close_position,
            kind: StreamErrorKind::ArityMismatch { expected: spec.dim(), found: parsed.bins.len() },
        });
    }
    if let Some(&b) = parsed.bins.iter().find(|&&b| b >= spec.n_bins) {
        return Err(StreamError {
            position: parsed.close_position,
            kind: StreamErrorKind::BinOutOfRange { bin: b, n_bins: spec.n_bins },
        });
    }
    let bins = BinVector { hand: parsed.hand.clone(), n_bins: spec.n_bins, bins: parsed.bins };
    let pose = dediscretize(&bins, spec, mode).expect("bins validated against spec");
    Ok(DecodedGrasp { pose, bins, scale_bin: parsed.scale_bin, commentary: parsed.commentary })
}
