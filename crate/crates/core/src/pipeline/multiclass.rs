//! One-vs-rest multi-class segmentation built from binary min-cut tasks.
//!
//! Task `k` cuts the shared image with its own edge weights; after polarity
//! resolution against the task's affinity band, the class-1 side is the set
//! of pixels claimed by class `k`. A pixel's score in task `k` is the mean
//! normalized weight of its uncut incident edges (negative infinity when
//! every incident edge is cut). Pixels claimed by no task get class 0;
//! contested pixels go to the highest score, lowest class index on ties.

use crate::error::{Error, Result};
use crate::graph::{image_to_grid, GridGraph, WeightConfig};
use crate::raster::RasterImage;
use crate::solvers::SolverConfig;

use super::mask::SegmentationMask;
use super::segment::{segment_graph, Segmentation};

/// Edge weights and claim reference for one class.
#[derive(Debug, Clone)]
pub struct ClassTask {
    pub weights: WeightConfig,
    /// Single-band cue; the task claims the side where it is higher on average.
    pub affinity: RasterImage,
}

#[derive(Debug, Clone)]
pub struct MultiClassSegmentation {
    pub mask: SegmentationMask,
    pub tasks: Vec<Segmentation>,
}

fn support_score(graph: &GridGraph, raw: &SegmentationMask, node: usize) -> f64 {
    let labels = raw.labels();
    let uncut: Vec<f64> = graph
        .incident(node)
        .into_iter()
        .filter(|&(nb, _)| labels[nb] == labels[node])
        .map(|(_, w)| w)
        .collect();
    if uncut.is_empty() {
        f64::NEG_INFINITY
    } else {
        uncut.iter().sum::<f64>() / uncut.len() as f64
    }
}

pub fn segment_multiclass(
    img: &RasterImage,
    tasks: &[ClassTask],
    solver: &SolverConfig,
) -> Result<MultiClassSegmentation> {
    if tasks.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "multi-class segmentation needs at least 2 classes, got {}",
            tasks.len()
        )));
    }
    let n = img.pixels();
    let mut best: Vec<Option<(usize, f64)>> = vec![None; n];
    let mut results = Vec::with_capacity(tasks.len());
    for (k, task) in tasks.iter().enumerate() {
        let graph = image_to_grid(img, &task.weights)?;
        let seg = segment_graph(&graph, &task.affinity, solver)?;
        for (node, slot) in best.iter_mut().enumerate() {
            if seg.mask.labels()[node] != 1 {
                continue;
            }
            let score = support_score(&graph, &seg.raw_mask, node);
            if slot.is_none_or(|(_, s)| score > s) {
                *slot = Some((k, score));
            }
        }
        results.push(seg);
    }
    let labels = best.into_iter().map(|b| b.map_or(0, |(k, _)| k as i32)).collect();
    Ok(MultiClassSegmentation {
        mask: SegmentationMask::new(img.width(), img.height(), labels)?,
        tasks: results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::segment;

    fn two_tone() -> RasterImage {
        RasterImage::from_fn(4, 3, |r, c| if c + r < 3 { 0.1 } else { 0.9 }).unwrap()
    }

    #[test]
    fn needs_two_classes() {
        let img = two_tone();
        let task = ClassTask {
            weights: WeightConfig::default(),
            affinity: img.clone(),
        };
        assert!(segment_multiclass(&img, &[task], &SolverConfig::exhaustive()).is_err());
    }

    #[test]
    fn two_identical_configs_reproduce_binary_segmentation() {
        let img = two_tone();
        let solver = SolverConfig::exhaustive();
        let tasks = [
            ClassTask {
                weights: WeightConfig::default(),
                affinity: img.map(|v| 1.0 - v).unwrap(),
            },
            ClassTask {
                weights: WeightConfig::default(),
                affinity: img.clone(),
            },
        ];
        let multi = segment_multiclass(&img, &tasks, &solver).unwrap();
        let binary = segment(&img, &WeightConfig::default(), &solver).unwrap();
        assert_eq!(multi.mask, binary.mask);
        assert!(multi.mask.labels().contains(&0) && multi.mask.labels().contains(&1));
    }

    #[test]
    fn contested_and_unclaimed_pixels() {
        let img = two_tone();
        let solver = SolverConfig::exhaustive();
        let task = |affinity: RasterImage| ClassTask {
            weights: WeightConfig::default(),
            affinity,
        };
        let dark = img.map(|v| 1.0 - v).unwrap();
        let binary = segment(&img, &WeightConfig::default(), &solver).unwrap().mask;

        // Classes 1 and 2 both claim the bright side with equal margins: the lower index wins.
        let multi = segment_multiclass(&img, &[task(dark), task(img.clone()), task(img.clone())], &solver).unwrap();
        assert_eq!(multi.mask, binary);
        assert_eq!(multi.tasks.len(), 3);

        // Unnormalized weights are all non-negative, so task 0 never cuts and claims nothing;
        // the dark side is unclaimed and falls back to class 0.
        let silent = ClassTask {
            weights: WeightConfig {
                normalize: false,
                ..WeightConfig::default()
            },
            affinity: img.clone(),
        };
        let multi = segment_multiclass(&img, &[silent, task(img.clone())], &solver).unwrap();
        assert!(multi.tasks[0].mask.labels().iter().all(|&l| l == 0));
        assert_eq!(multi.mask, binary);
    }

    #[test]
    fn support_score_averages_uncut_edges() {
        let g = GridGraph::new(3, 1, vec![0.5, -0.25], vec![]).unwrap();
        let raw = SegmentationMask::new(3, 1, vec![0, 0, 1]).unwrap();
        assert_eq!(support_score(&g, &raw, 0), 0.5);
        assert_eq!(support_score(&g, &raw, 1), 0.5);
        assert_eq!(support_score(&g, &raw, 2), f64::NEG_INFINITY);
        let joined = SegmentationMask::new(3, 1, vec![1, 1, 1]).unwrap();
        assert_eq!(support_score(&g, &joined, 1), 0.125);
    }
}
