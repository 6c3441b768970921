use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::qubo::Assignment;
use crate::raster::write_pnm;

/// Label reserved for "uncertain" ground-truth pixels.
pub const UNCERTAIN: i32 = -1;

/// Gray level that encodes [`UNCERTAIN`] in mask files.
pub const UNCERTAIN_GRAY: u8 = 255;

/// Per-pixel labels: classes `0..`, or [`UNCERTAIN`] in ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationMask {
    width: usize,
    height: usize,
    labels: Vec<i32>,
}

impl SegmentationMask {
    pub fn new(width: usize, height: usize, labels: Vec<i32>) -> Result<Self> {
        if width * height != labels.len() || width == 0 || height == 0 {
            return Err(Error::DimensionMismatch {
                expected: format!("{} labels for {width}x{height}", width * height),
                found: format!("{}", labels.len()),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l < UNCERTAIN) {
            return Err(Error::InvalidInput(format!("label {bad} is below -1")));
        }
        Ok(Self { width, height, labels })
    }

    pub fn filled(width: usize, height: usize, label: i32) -> Result<Self> {
        Self::new(width, height, vec![label; width * height])
    }

    /// Label of pixel `i` is bit `i` of the assignment.
    pub fn from_assignment(width: usize, height: usize, a: &Assignment) -> Result<Self> {
        Self::new(width, height, a.bits().iter().map(|&b| b as i32).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> i32 {
        self.labels[row * self.width + col]
    }

    pub fn same_shape(&self, other: &SegmentationMask) -> Result<()> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.width, self.height),
                found: format!("{}x{}", other.width, other.height),
            });
        }
        Ok(())
    }

    /// True when every label is 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.labels.iter().all(|&l| l == 0 || l == 1)
    }

    /// Swap labels 0 and 1 (other labels untouched).
    pub fn complement(&self) -> SegmentationMask {
        let labels = self
            .labels
            .iter()
            .map(|&l| match l {
                0 => 1,
                1 => 0,
                other => other,
            })
            .collect();
        Self { labels, ..*self }
    }

    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<SegmentationMask> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::InvalidParameter("crop exceeds mask bounds".into()));
        }
        let labels = (row..row + height)
            .flat_map(|r| {
                self.labels[r * self.width + col..r * self.width + col + width]
                    .iter()
                    .copied()
            })
            .collect();
        Self::new(width, height, labels)
    }

    /// Copy `patch` into this mask with its top-left corner at `(row, col)`.
    pub fn paste(&mut self, row: usize, col: usize, patch: &SegmentationMask) -> Result<()> {
        if row + patch.height > self.height || col + patch.width > self.width {
            return Err(Error::InvalidParameter("patch exceeds mask bounds".into()));
        }
        for r in 0..patch.height {
            let dst = (row + r) * self.width + col;
            self.labels[dst..dst + patch.width].copy_from_slice(&patch.labels[r * patch.width..(r + 1) * patch.width]);
        }
        Ok(())
    }

    /// 8-bit PGM whose gray levels are the labels; uncertain pixels are written as 255.
    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self
            .labels
            .iter()
            .map(|&l| match l {
                UNCERTAIN => Ok(UNCERTAIN_GRAY),
                0..=254 => Ok(l as u8),
                _ => Err(Error::InvalidInput(format!("label {l} does not fit a mask PGM"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        write_pnm(path.as_ref(), b"P5", self.width, self.height, &bytes)
    }

    pub fn load_pgm(path: impl AsRef<Path>) -> Result<SegmentationMask> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Pnm)
            .map_err(|e| Error::format(path, e.to_string()))?;
        let gray = match img {
            image::DynamicImage::ImageLuma8(g) => g,
            other => {
                return Err(Error::format(
                    path,
                    format!("mask must be 8-bit grayscale, got {:?}", other.color()),
                ))
            }
        };
        let (w, h) = (gray.width() as usize, gray.height() as usize);
        let labels = gray
            .into_raw()
            .into_iter()
            .map(|g| if g == UNCERTAIN_GRAY { UNCERTAIN } else { g as i32 })
            .collect();
        Self::new(w, h, labels)
    }
}
