use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{image_to_grid, GridGraph, WeightConfig};
use crate::qubo::mincut_to_qubo;
use crate::raster::RasterImage;
use crate::solvers::{solve, SampleSet, SolverConfig};

use super::mask::SegmentationMask;

/// How a binary mask was relabeled to canonical polarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityDecision {
    pub rule: String,
    /// Mean reference value over the pixels labeled 0 / 1 before relabeling.
    pub mean_label0: Option<f64>,
    pub mean_label1: Option<f64>,
    pub flipped: bool,
}

pub const POLARITY_RULE: &str =
    "class 1 = side with higher mean reference; equal means -> pixel (0,0) is class 0; single side -> all class 0";

/// Relabel a binary mask so class 1 is the side with the higher mean reference value.
pub fn resolve_polarity(mask: &SegmentationMask, reference: &RasterImage) -> Result<SegmentationMask> {
    resolve_polarity_with_decision(mask, reference).map(|(m, _)| m)
}

pub fn resolve_polarity_with_decision(
    mask: &SegmentationMask,
    reference: &RasterImage,
) -> Result<(SegmentationMask, PolarityDecision)> {
    if reference.bands() != 1 {
        return Err(Error::BandMismatch {
            expected: 1,
            found: reference.bands(),
        });
    }
    if (reference.width(), reference.height()) != (mask.width(), mask.height()) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", mask.width(), mask.height()),
            found: format!("{}x{}", reference.width(), reference.height()),
        });
    }
    if !mask.is_binary() {
        return Err(Error::InvalidInput("polarity resolution needs a binary mask".into()));
    }
    let mut sums = [0.0f64; 2];
    let mut counts = [0usize; 2];
    for (&label, &v) in mask.labels().iter().zip(reference.band(0)) {
        sums[label as usize] += v;
        counts[label as usize] += 1;
    }
    let mean = |k: usize| (counts[k] > 0).then(|| sums[k] / counts[k] as f64);
    let (m0, m1) = (mean(0), mean(1));
    let decision = |flipped| PolarityDecision {
        rule: POLARITY_RULE.to_string(),
        mean_label0: m0,
        mean_label1: m1,
        flipped,
    };
    match (m0, m1) {
        (Some(a), Some(b)) => {
            let flip = a > b || (a == b && mask.labels()[0] == 1);
            let out = if flip { mask.complement() } else { mask.clone() };
            Ok((out, decision(flip)))
        }
        _ => {
            let flip = mask.labels()[0] == 1;
            Ok((
                SegmentationMask::filled(mask.width(), mask.height(), 0)?,
                decision(flip),
            ))
        }
    }
}

/// Result of segmenting one image (or one patch).
#[derive(Debug, Clone, Serialize)]
pub struct Segmentation {
    #[serde(skip)]
    pub mask: SegmentationMask,
    /// Raw decoded mask before polarity resolution.
    #[serde(skip)]
    pub raw_mask: SegmentationMask,
    pub energy: f64,
    pub polarity: PolarityDecision,
    pub samples: SampleSet,
}

/// Solve the min-cut QUBO of `graph` and decode the best sample, with
/// polarity resolved against `reference`.
pub fn segment_graph(graph: &GridGraph, reference: &RasterImage, solver: &SolverConfig) -> Result<Segmentation> {
    let problem = mincut_to_qubo(graph);
    let samples = solve(&problem, solver)?;
    let best = samples.best();
    let raw_mask = SegmentationMask::from_assignment(graph.width(), graph.height(), &best.assignment)?;
    let energy = best.energy;
    let (mask, polarity) = resolve_polarity_with_decision(&raw_mask, reference)?;
    Ok(Segmentation {
        mask,
        raw_mask,
        energy,
        polarity,
        samples,
    })
}

/// Image to lattice graph, min-cut QUBO, solve, decode the lowest-energy
/// sample pixel by pixel, then canonicalize polarity against the image.
pub fn segment(img: &RasterImage, cfg: &WeightConfig, solver: &SolverConfig) -> Result<Segmentation> {
    let graph = image_to_grid(img, cfg)?;
    segment_graph(&graph, img, solver)
}
