//! End-to-end segmentation: preprocessing, patching, solving, decoding,
//! polarity resolution, stitching and the multi-class extension.

mod mask;
mod multiclass;
mod patch;
mod preprocess;
mod segment;

pub use mask::{SegmentationMask, UNCERTAIN, UNCERTAIN_GRAY};
pub use multiclass::{segment_multiclass, ClassTask, MultiClassSegmentation};
pub use patch::{segment_patched, segment_patched_with, PatchPlan, PatchRect, PatchResult, PatchedSegmentation};
pub use preprocess::{downscale, median_blur3, preprocess_flood, preprocess_forest, rgb_to_hsv, HsvChannel};
pub use segment::{
    resolve_polarity, resolve_polarity_with_decision, segment, segment_graph, PolarityDecision, Segmentation,
    POLARITY_RULE,
};
