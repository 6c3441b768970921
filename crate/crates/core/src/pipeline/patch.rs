use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightConfig;
use crate::raster::RasterImage;
use crate::solvers::SolverConfig;

use super::mask::SegmentationMask;
use super::segment::{segment, Segmentation};

/// Non-overlapping tiling; patches on the right and bottom edges may be smaller.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchPlan {
    pub patch_size: usize,
    pub width: usize,
    pub height: usize,
    /// Top-left `(row, col)` of each patch, row-major.
    pub origins: Vec<(usize, usize)>,
}

/// One tile of a [`PatchPlan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchRect {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl PatchPlan {
    pub const DEFAULT_PATCH_SIZE: usize = 32;

    pub fn new(width: usize, height: usize, patch_size: usize) -> Result<Self> {
        if patch_size == 0 || width == 0 || height == 0 {
            return Err(Error::InvalidParameter(
                "patch size and image dimensions must be positive".into(),
            ));
        }
        let origins = (0..height)
            .step_by(patch_size)
            .flat_map(|r| (0..width).step_by(patch_size).map(move |c| (r, c)))
            .collect();
        Ok(Self {
            patch_size,
            width,
            height,
            origins,
        })
    }

    pub fn for_image(img: &RasterImage, patch_size: usize) -> Result<Self> {
        Self::new(img.width(), img.height(), patch_size)
    }

    pub fn rects(&self) -> impl Iterator<Item = PatchRect> + '_ {
        self.origins.iter().map(|&(row, col)| PatchRect {
            row,
            col,
            height: self.patch_size.min(self.height - row),
            width: self.patch_size.min(self.width - col),
        })
    }

    /// Sum of patch areas; equals the image area for a valid plan.
    pub fn coverage(&self) -> usize {
        self.rects().map(|r| r.width * r.height).sum()
    }

    pub fn check_covers(&self, img: &RasterImage) -> Result<()> {
        if (self.width, self.height) != (img.width(), img.height()) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} plan", img.width(), img.height()),
                found: format!("{}x{}", self.width, self.height),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PatchResult {
    pub rect: PatchRect,
    pub segmentation: Segmentation,
}

#[derive(Debug, Clone)]
pub struct PatchedSegmentation {
    pub mask: SegmentationMask,
    pub patches: Vec<PatchResult>,
}

/// Segment every patch independently (in parallel), resolve each patch's
/// polarity against its own pixels, and stitch by patch origin.
pub fn segment_patched(
    img: &RasterImage,
    plan: &PatchPlan,
    cfg: &WeightConfig,
    solver: &SolverConfig,
) -> Result<PatchedSegmentation> {
    segment_patched_with(img, plan, |tile| segment(tile, cfg, solver))
}

/// [`segment_patched`] with a caller-supplied per-tile segmenter.
pub fn segment_patched_with<F>(img: &RasterImage, plan: &PatchPlan, segment_tile: F) -> Result<PatchedSegmentation>
where
    F: Fn(&RasterImage) -> Result<Segmentation> + Sync,
{
    plan.check_covers(img)?;
    if img.bands() != 1 {
        return Err(Error::BandMismatch {
            expected: 1,
            found: img.bands(),
        });
    }
    let rects: Vec<PatchRect> = plan.rects().collect();
    let patches = rects
        .par_iter()
        .map(|&rect| {
            let tile = img.crop(rect.row, rect.col, rect.height, rect.width)?;
            Ok(PatchResult {
                rect,
                segmentation: segment_tile(&tile)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut mask = SegmentationMask::filled(img.width(), img.height(), 0)?;
    for p in &patches {
        mask.paste(p.rect.row, p.rect.col, &p.segmentation.mask)?;
    }
    Ok(PatchedSegmentation { mask, patches })
}
