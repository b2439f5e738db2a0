use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-wide error type.
///
/// Every variant maps to a stable machine-readable code via [`Error::code`],
/// which the command-line driver prints alongside the message.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input value {0}")]
    NonFinite(f64),

    #[error("code width {got} does not match element width {expected}")]
    WidthMismatch { expected: u32, got: u32 },

    #[error("block has {got} values, format expects {expected}")]
    BlockLength { expected: usize, got: usize },

    #[error("invalid format configuration: {0}")]
    InvalidConfig(String),

    #[error("scale code {0:#04x} encodes NaN")]
    NanScale(u8),

    #[error("scale value must be positive and finite, got {0}")]
    InvalidScale(f64),

    #[error("operation requires {expected}, got {got}")]
    VariantMismatch { expected: &'static str, got: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("tensor is empty")]
    EmptyTensor,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown format name `{0}`")]
    UnknownFormatName(String),

    #[error("file is truncated")]
    Truncated,

    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported file version {0}")]
    UnsupportedVersion(u16),

    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),

    #[error("unknown format id {id} (variant {variant}, block size {block_size})")]
    UnknownFormatId { id: u8, variant: u8, block_size: u8 },

    #[error("malformed file: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFinite(_) => "non-finite-input",
            Error::WidthMismatch { .. } => "width-mismatch",
            Error::BlockLength { .. } => "block-length",
            Error::InvalidConfig(_) => "invalid-config",
            Error::NanScale(_) => "nan-scale",
            Error::InvalidScale(_) => "invalid-scale",
            Error::VariantMismatch { .. } => "variant-mismatch",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::EmptyTensor => "empty-tensor",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::UnknownFormatName(_) => "unknown-format",
            Error::Truncated => "truncated",
            Error::BadMagic(_) => "bad-magic",
            Error::UnsupportedVersion(_) => "unsupported-version",
            Error::UnknownDtype(_) => "unknown-dtype",
            Error::UnknownFormatId { .. } => "unknown-format-id",
            Error::Malformed(_) => "malformed",
            Error::Io(_) => "io",
        }
    }
}
