//! Non-attention sequence encoders: the vanilla recurrent cell, multi-scale
//! convolutional banks, and the dependency-driven encoders (major/surrounding
//! segmentation and structural relation blocks).

mod blocks;
mod cnn;
mod dependency;
mod ms;
mod rnn;

pub use blocks::{block_relation_repr, BlockRelationParams};
pub use cnn::{cnn_feature_map, multi_scale_cnn_encode, CnnFilterBank, KernelGroup};
pub use dependency::{
    extract_blocks, parse_conll, read_conll_file, segment_sentence, BlockSet, DependencyTree,
    MsSegmentation, Span, DEFAULT_CORE_ROLES,
};
pub use ms::{ms_encode, MsEncoderParams};
pub use rnn::{rnn_encode, rnn_step, RnnCell};
