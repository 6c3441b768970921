//! Raster images and the on-disk formats the pipeline reads.
//!
//! Supported inputs: binary/ASCII PGM (one band), PPM (three bands) and a
//! planar float format: an ASCII header line `bands <w> <h> <b>` followed by
//! `b` row-major planes of little-endian `f32`.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::DynamicImage;

use crate::error::{Error, Result};

/// Band-planar raster of finite reals: `data[(band * height + row) * width + col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    bands: usize,
    data: Vec<f64>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || bands == 0 {
            return Err(Error::InvalidInput(format!(
                "raster dimensions must be positive, got {width}x{height}x{bands}"
            )));
        }
        if width * height * bands != data.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values for {width}x{height}x{bands}", width * height * bands),
                found: format!("{} values", data.len()),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite intensity at index {pos}")));
        }
        Ok(Self {
            width,
            height,
            bands,
            data,
        })
    }

    /// Single-band image from row-major values.
    pub fn single(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..height)
            .flat_map(|r| (0..width).map(move |c| (r, c)))
            .map(|(r, c)| f(r, c))
            .collect();
        Self::single(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f64 {
        self.data[(band * self.height + row) * self.width + col]
    }

    pub fn band(&self, band: usize) -> &[f64] {
        let n = self.pixels();
        &self.data[band * n..(band + 1) * n]
    }

    /// Copy one band out as a single-band image.
    pub fn extract_band(&self, band: usize) -> Result<RasterImage> {
        if band >= self.bands {
            return Err(Error::InvalidParameter(format!(
                "band index {band} out of range for {} band(s)",
                self.bands
            )));
        }
        Self::single(self.width, self.height, self.band(band).to_vec())
    }

    /// Rectangular window of every band.
    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<RasterImage> {
        if row + height > self.height || col + width > self.width {
            return Err(Error::InvalidParameter(format!(
                "crop {height}x{width} at ({row},{col}) exceeds {}x{}",
                self.height, self.width
            )));
        }
        let mut data = Vec::with_capacity(width * height * self.bands);
        for b in 0..self.bands {
            for r in row..row + height {
                let start = (b * self.height + r) * self.width + col;
                data.extend_from_slice(&self.data[start..start + width]);
            }
        }
        Self::new(width, height, self.bands, data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<RasterImage> {
        Self::new(
            self.width,
            self.height,
            self.bands,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Read PGM, PPM or the planar multi-band format, chosen by magic bytes.
    /// 8- and 16-bit PNM samples are scaled to [0, 1].
    pub fn load(path: impl AsRef<Path>) -> Result<RasterImage> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.starts_with(b"bands") {
            return Self::decode_multiband(path, &bytes);
        }
        let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Pnm)
            .map_err(|e| Error::format(path, e.to_string()))?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let interleaved: (usize, Vec<f64>) = match img {
            DynamicImage::ImageLuma8(b) => (1, b.into_raw().into_iter().map(|v| v as f64 / 255.0).collect()),
            DynamicImage::ImageLuma16(b) => (1, b.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect()),
            DynamicImage::ImageRgb8(b) => (3, b.into_raw().into_iter().map(|v| v as f64 / 255.0).collect()),
            DynamicImage::ImageRgb16(b) => (3, b.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect()),
            other => {
                return Err(Error::format(
                    path,
                    format!("unsupported PNM color type {:?}", other.color()),
                ))
            }
        };
        let (bands, values) = interleaved;
        let n = w * h;
        let mut data = vec![0.0; n * bands];
        for (i, v) in values.into_iter().enumerate() {
            data[(i % bands) * n + i / bands] = v;
        }
        Self::new(w, h, bands, data)
    }

    fn decode_multiband(path: &Path, bytes: &[u8]) -> Result<RasterImage> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::format(path, "missing header line"))?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::format(path, "header is not UTF-8"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let dims: Vec<usize> = match fields.as_slice() {
            ["bands", w, h, b] => [w, h, b]
                .iter()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(path, format!("bad header `{header}`: {e}")))?,
            _ => return Err(Error::format(path, format!("bad header `{header}`"))),
        };
        let (w, h, b) = (dims[0], dims[1], dims[2]);
        let body = &bytes[nl + 1..];
        if body.len() != w * h * b * 4 {
            return Err(Error::format(
                path,
                format!("expected {} payload bytes, found {}", w * h * b * 4, body.len()),
            ));
        }
        let data = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Self::new(w, h, b, data).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Write the planar multi-band format (values narrowed to `f32`).
    pub fn save_multiband(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = format!("bands {} {} {}\n", self.width, self.height, self.bands).into_bytes();
        for v in &self.data {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Write a single-band image as 8-bit PGM, clamping to [0, 1].
    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        if self.bands != 1 {
            return Err(Error::BandMismatch {
                expected: 1,
                found: self.bands,
            });
        }
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        write_pnm(path.as_ref(), b"P5", self.width, self.height, &bytes)
    }

    /// Write a three-band image as 8-bit PPM, clamping to [0, 1].
    pub fn save_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        if self.bands != 3 {
            return Err(Error::BandMismatch {
                expected: 3,
                found: self.bands,
            });
        }
        let n = self.pixels();
        let bytes: Vec<u8> = (0..n * 3)
            .map(|i| (self.data[(i % 3) * n + i / 3].clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        write_pnm(path.as_ref(), b"P6", self.width, self.height, &bytes)
    }
}

pub(crate) fn write_pnm(path: &Path, magic: &[u8], width: usize, height: usize, payload: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(payload.len() + 32);
    out.extend_from_slice(magic);
    write!(out, "\n{width} {height}\n255\n").expect("write to Vec");
    out.extend_from_slice(payload);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
