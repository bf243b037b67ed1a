use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImageError {
    #[error("sample buffer holds {actual} values, dimensions require {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("NonFiniteSample: sample {index} is NaN or infinite")]
    NonFiniteSample { index: usize },
    #[error("NegativeSample: sample {index} is negative")]
    NegativeSample { index: usize },
    #[error("BadColorSpace: {0}")]
    BadColorSpace(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodingError {
    #[error("NegativeInRgbe: shared-exponent encodings cannot hold negative samples")]
    NegativeInRgbe,
    #[error("Overflow: component exceeds 2^127")]
    Overflow,
    #[error("NonFiniteSample: input is NaN or infinite")]
    NonFiniteSample,
}

/// Codec errors. Every variant names the byte offset where decoding stopped.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("NotRadiance: missing #?RADIANCE signature (offset {offset})")]
    NotRadiance { offset: usize },
    #[error("NotPfm: magic is not PF or Pf (offset {offset})")]
    NotPfm { offset: usize },
    #[error("BadScale: PFM scale must be a nonzero number (offset {offset})")]
    BadScale { offset: usize },
    #[error("TruncatedFile: input ends early (offset {offset})")]
    TruncatedFile { offset: usize },
    #[error("CorruptRle: run overruns the scanline (offset {offset})")]
    CorruptRle { offset: usize },
    #[error("BadHeader: {reason} (offset {offset})")]
    BadHeader { offset: usize, reason: String },
    #[error("UnsupportedMaxval: only maxval 255 is supported (offset {offset})")]
    UnsupportedMaxval { offset: usize },
    #[error("UnsupportedVariant: {variant} (offset {offset})")]
    UnsupportedVariant { offset: usize, variant: String },
    #[error("BadImage: {reason} (offset {offset})")]
    BadImage { offset: usize, reason: String },
    #[error("NegativeInRgbe: RGBE output cannot hold negative samples, write XYZE instead (offset {offset})")]
    NegativeInRgbe { offset: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransferError {
    #[error("CodeOutOfRange: code {0} outside [0, 1]")]
    CodeOutOfRange(f64),
    #[error("NegativeLuminance: {0}")]
    NegativeLuminance(f64),
    #[error("BadParameter: {0}")]
    BadParameter(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MergeError {
    #[error("AlignmentUnreliable: {0}")]
    AlignmentUnreliable(String),
    #[error("InsufficientSamples: {0}")]
    InsufficientSamples(String),
    #[error("BadStack: {0}")]
    BadStack(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ToneMapError {
    #[error("BadParameter: {0}")]
    BadParameter(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpandError {
    #[error("CurveNotInvertible: {0}")]
    CurveNotInvertible(String),
    #[error("BadParameter: {0}")]
    BadParameter(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QualityError {
    #[error("ShapeMismatch: reference is {ref_dims:?}, test is {test_dims:?}")]
    ShapeMismatch { ref_dims: (usize, usize), test_dims: (usize, usize) },
    #[error("NeedsAbsoluteCalibration: perceptually uniform metrics need nit-calibrated input")]
    NeedsAbsoluteCalibration,
    #[error("BadParameter: {0}")]
    BadParameter(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayeredError {
    #[error("MissingExtension: extension layer is absent or truncated")]
    MissingExtension,
    #[error("CorruptStream: {0}")]
    CorruptStream(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Umbrella error for callers that mix stages.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Encoding(#[from] EncodingError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Transfer(#[from] TransferError),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error(transparent)]
    ToneMap(#[from] ToneMapError),
    #[error(transparent)]
    Expand(#[from] ExpandError),
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error(transparent)]
    Layered(#[from] LayeredError),
}
