//! Weighted 4-connected lattice graphs and the edge-weight math behind them.
//!
//! Node `r * width + c` is the pixel at row `r`, column `c`. Edges are stored
//! as two dense row-major arrays; the canonical edge order is every
//! horizontal edge (row-major) followed by every vertical edge (row-major).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::rng::Stream;

/// Dissimilarity of two intensities: `1 - exp(-(i1 - i2)^2 / (2 sigma^2))`.
pub fn gaussian_similarity(i1: f64, i2: f64, sigma: f64) -> Result<f64> {
    if !i1.is_finite() || !i2.is_finite() {
        return Err(Error::InvalidParameter("intensities must be finite".into()));
    }
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
    }
    let d = i1 - i2;
    Ok(-(-(d * d) / (2.0 * sigma * sigma)).exp_m1())
}

/// Affine map of raw weights onto `[a, b]`, then negated: the raw minimum
/// lands on `-a` and the raw maximum on `-b`. When every raw weight is equal
/// there is no dissimilarity signal and every output is `-a` (+1 for the
/// default range), i.e. all pairs are treated as maximally similar.
pub fn normalize_weights(raw: &[f64], range: (f64, f64)) -> Result<Vec<f64>> {
    let (a, b) = range;
    if raw.is_empty() {
        return Err(Error::InvalidInput("cannot normalize an empty weight list".into()));
    }
    if !a.is_finite() || !b.is_finite() || a >= b {
        return Err(Error::InvalidParameter(format!(
            "target range [{a}, {b}] must satisfy a < b"
        )));
    }
    if raw.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidInput("weights must be finite".into()));
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![-a; raw.len()]);
    }
    let span = max - min;
    Ok(raw
        .iter()
        .map(|&w| {
            if w == min {
                -a
            } else if w == max {
                -b
            } else {
                -((b - a) * (w - min) / span + a) + 0.0
            }
        })
        .collect())
}

/// Edge-weight settings for image graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub sigma: f64,
    pub normalize: bool,
    pub target_range: (f64, f64),
}

impl Default for WeightConfig {
    fn default() -> Self {
        Self {
            sigma: 0.5,
            normalize: true,
            target_range: (-1.0, 1.0),
        }
    }
}

impl WeightConfig {
    pub fn with_sigma(sigma: f64) -> Self {
        Self {
            sigma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        let (a, b) = self.target_range;
        if a.is_nan() || b.is_nan() || a >= b {
            return Err(Error::InvalidParameter(format!(
                "target range [{a}, {b}] must satisfy a < b"
            )));
        }
        Ok(())
    }
}

/// One lattice edge in canonical order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridGraph {
    width: usize,
    height: usize,
    horizontal: Vec<f64>,
    vertical: Vec<f64>,
}

impl GridGraph {
    /// `horizontal` is `height x (width - 1)`, `vertical` is `(height - 1) x width`, both row-major.
    pub fn new(width: usize, height: usize, horizontal: Vec<f64>, vertical: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "grid must be non-empty, got {width}x{height}"
            )));
        }
        let (nh, nv) = (height * (width - 1), (height - 1) * width);
        if horizontal.len() != nh || vertical.len() != nv {
            return Err(Error::DimensionMismatch {
                expected: format!("{nh} horizontal and {nv} vertical weights"),
                found: format!("{} and {}", horizontal.len(), vertical.len()),
            });
        }
        if horizontal.iter().chain(&vertical).any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("edge weights must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            horizontal,
            vertical,
        })
    }

    /// Build from weights listed in canonical edge order.
    pub fn from_canonical(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        let nh = height * width.saturating_sub(1);
        if weights.len() < nh {
            return Err(Error::DimensionMismatch {
                expected: format!("{} weights", 2 * width * height - width - height),
                found: format!("{}", weights.len()),
            });
        }
        let mut horizontal = weights;
        let vertical = horizontal.split_off(nh);
        Self::new(width, height, horizontal, vertical)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_nodes(&self) -> usize {
        self.width * self.height
    }

    pub fn num_edges(&self) -> usize {
        self.horizontal.len() + self.vertical.len()
    }

    pub fn horizontal(&self) -> &[f64] {
        &self.horizontal
    }

    pub fn vertical(&self) -> &[f64] {
        &self.vertical
    }

    /// All weights in canonical order.
    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.horizontal.iter().chain(&self.vertical).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        let w = self.width;
        let horiz = self.horizontal.iter().enumerate().map(move |(k, &weight)| {
            let (r, c) = (k / (w - 1), k % (w - 1));
            Edge {
                u: r * w + c,
                v: r * w + c + 1,
                weight,
            }
        });
        let vert = self
            .vertical
            .iter()
            .enumerate()
            .map(move |(k, &weight)| Edge { u: k, v: k + w, weight });
        horiz.chain(vert)
    }

    pub fn degree(&self, node: usize) -> usize {
        let (r, c) = (node / self.width, node % self.width);
        usize::from(c > 0) + usize::from(c + 1 < self.width) + usize::from(r > 0) + usize::from(r + 1 < self.height)
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes()).map(|n| self.degree(n)).max().unwrap_or(0)
    }

    /// `(neighbor, weight)` pairs incident to `node`.
    pub fn incident(&self, node: usize) -> Vec<(usize, f64)> {
        let w = self.width;
        let (r, c) = (node / w, node % w);
        let mut out = Vec::with_capacity(4);
        if c > 0 {
            out.push((node - 1, self.horizontal[r * (w - 1) + c - 1]));
        }
        if c + 1 < w {
            out.push((node + 1, self.horizontal[r * (w - 1) + c]));
        }
        if r > 0 {
            out.push((node - w, self.vertical[node - w]));
        }
        if r + 1 < self.height {
            out.push((node + w, self.vertical[node]));
        }
        out
    }

    /// Text edge list: `grid <w> <h> <seed>` then `u v weight` per edge in
    /// canonical order, weights with 17 significant digits.
    pub fn to_edge_list(&self, seed: u64) -> String {
        let mut out = format!("grid {} {} {}\n", self.width, self.height, seed);
        for e in self.edges() {
            writeln!(out, "{} {} {}", e.u, e.v, fmt_real(e.weight)).expect("write to String");
        }
        out
    }

    pub fn write_edge_list(&self, seed: u64, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_edge_list(seed)).map_err(|e| Error::io(path, e))
    }

    /// Parse an edge list; returns the graph and the seed from its header.
    pub fn parse_edge_list(text: &str, path: &Path) -> Result<(GridGraph, u64)> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::format(path, "empty edge list"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let (w, h, seed) = match fields.as_slice() {
            ["grid", w, h, s] => (
                w.parse::<usize>()
                    .map_err(|e| Error::format(path, format!("width: {e}")))?,
                h.parse::<usize>()
                    .map_err(|e| Error::format(path, format!("height: {e}")))?,
                s.parse::<u64>()
                    .map_err(|e| Error::format(path, format!("seed: {e}")))?,
            ),
            _ => return Err(Error::format(path, format!("bad header `{header}`"))),
        };
        if w == 0 || h == 0 {
            return Err(Error::format(path, "grid dimensions must be positive"));
        }
        let shape = GridGraph::new(w, h, vec![0.0; h * (w - 1)], vec![0.0; (h - 1) * w])?;
        let expected: Vec<(usize, usize)> = shape.edges().map(|e| (e.u, e.v)).collect();
        let mut weights = Vec::with_capacity(expected.len());
        for (lineno, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = |m: String| Error::format(path, format!("line {}: {m}", lineno + 2));
            if parts.len() != 3 {
                return Err(bad(format!("expected `u v weight`, got `{line}`")));
            }
            let u: usize = parts[0].parse().map_err(|e| bad(format!("{e}")))?;
            let v: usize = parts[1].parse().map_err(|e| bad(format!("{e}")))?;
            let wt: f64 = parts[2].parse().map_err(|e| bad(format!("{e}")))?;
            match expected.get(weights.len()) {
                Some(&(eu, ev)) if (eu, ev) == (u, v) => weights.push(wt),
                Some(&(eu, ev)) => return Err(bad(format!("expected edge {eu} {ev}, got {u} {v}"))),
                None => return Err(bad("more edges than the grid has".into())),
            }
        }
        if weights.len() != expected.len() {
            return Err(Error::format(
                path,
                format!("expected {} edges, found {}", expected.len(), weights.len()),
            ));
        }
        Ok((GridGraph::from_canonical(w, h, weights)?, seed))
    }

    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<(GridGraph, u64)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(&text, path)
    }
}

/// Real number with 17 significant digits (round-trips every `f64`).
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Raw (pre-normalization) dissimilarities of a single-band image in canonical edge order.
pub fn raw_edge_weights(img: &RasterImage, sigma: f64) -> Result<Vec<f64>> {
    if img.bands() != 1 {
        return Err(Error::BandMismatch {
            expected: 1,
            found: img.bands(),
        });
    }
    let (w, h) = (img.width(), img.height());
    let px = img.band(0);
    let mut raw = Vec::with_capacity(2 * w * h - w - h);
    for r in 0..h {
        for c in 0..w - 1 {
            raw.push(gaussian_similarity(px[r * w + c], px[r * w + c + 1], sigma)?);
        }
    }
    for k in 0..(h - 1) * w {
        raw.push(gaussian_similarity(px[k], px[k + w], sigma)?);
    }
    Ok(raw)
}

/// One node per pixel, Gaussian dissimilarity per 4-neighbor pair,
/// normalized over the whole edge set when `cfg.normalize` is set.
pub fn image_to_grid(img: &RasterImage, cfg: &WeightConfig) -> Result<GridGraph> {
    cfg.validate()?;
    let raw = raw_edge_weights(img, cfg.sigma)?;
    let weights = if cfg.normalize && !raw.is_empty() {
        normalize_weights(&raw, cfg.target_range)?
    } else {
        raw
    };
    GridGraph::from_canonical(img.width(), img.height(), weights)
}

/// Square `size x size` grid with i.i.d. weights uniform on [-1, 1), drawn
/// in canonical edge order from the ChaCha8 stream of `seed`.
pub fn synthetic_grid(size: usize, seed: u64) -> Result<GridGraph> {
    if size < 2 {
        return Err(Error::InvalidParameter(format!(
            "synthetic grid size must be at least 2, got {size}"
        )));
    }
    let mut rng = Stream::new(seed);
    let weights = (0..2 * size * (size - 1)).map(|_| rng.uniform(-1.0, 1.0)).collect();
    GridGraph::from_canonical(size, size, weights)
}
