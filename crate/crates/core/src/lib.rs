//! Reference codecs for microscaling block formats (MX, MX+, MX++, MXINT,
//! NVFP4, MSFP, SMX) with emulated matmul paths and error analytics.

pub mod analysis;
pub mod blockcodec;
pub mod error;
mod exact;
pub mod format;
pub mod formats;
pub mod legacy;
pub mod linalg;
pub mod tensor;
pub mod tensorio;
pub mod wire;

pub use blockcodec::{
    decode_block, decode_tensor, encode_block, encode_tensor, split_bm, BmSplit, EncodedBlock, EncodedTensor,
    MxFormatConfig, ScaleKind, Variant,
};
pub use error::{Error, Result};
pub use format::Format;
pub use formats::ElementFormat;
pub use tensor::Tensor;
