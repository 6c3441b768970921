//! Use-case preprocessing: median blur and HSV for forest cover, NDWI for
//! flood mapping, and box-filter downscaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Which HSV channel the forest preprocessing keeps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HsvChannel {
    #[default]
    Hue,
    Saturation,
    Value,
}

impl std::str::FromStr for HsvChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" | "hue" => Ok(HsvChannel::Hue),
            "s" | "saturation" => Ok(HsvChannel::Saturation),
            "v" | "value" => Ok(HsvChannel::Value),
            other => Err(Error::InvalidParameter(format!("unknown HSV channel `{other}`"))),
        }
    }
}

/// 3x3 median per band with replicated edges.
pub fn median_blur3(img: &RasterImage) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    let mut out = Vec::with_capacity(img.data().len());
    let mut window = [0.0f64; 9];
    for b in 0..img.bands() {
        for r in 0..h {
            for c in 0..w {
                let mut k = 0;
                for dr in [-1isize, 0, 1] {
                    for dc in [-1isize, 0, 1] {
                        let rr = (r as isize + dr).clamp(0, h as isize - 1) as usize;
                        let cc = (c as isize + dc).clamp(0, w as isize - 1) as usize;
                        window[k] = img.get(b, rr, cc);
                        k += 1;
                    }
                }
                window.sort_unstable_by(f64::total_cmp);
                out.push(window[4]);
            }
        }
    }
    RasterImage::new(w, h, img.bands(), out).expect("same shape as input")
}

/// RGB in [0, 1] to (hue, saturation, value), hue as a fraction of a turn in [0, 1).
pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let sector = if delta == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    let hue = sector / 6.0;
    let saturation = if max == 0.0 { 0.0 } else { delta / max };
    (hue.rem_euclid(1.0), saturation, max)
}

/// Median blur then one HSV channel. Inputs whose maximum exceeds 1 are
/// taken to be 0..255 and rescaled first.
pub fn preprocess_forest(img: &RasterImage, channel: HsvChannel) -> Result<RasterImage> {
    if img.bands() != 3 {
        return Err(Error::BandMismatch {
            expected: 3,
            found: img.bands(),
        });
    }
    let max = img.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled = if max > 1.0 {
        img.map(|v| v / 255.0)?
    } else {
        img.clone()
    };
    let blurred = median_blur3(&scaled);
    let (red, green, blue) = (blurred.band(0), blurred.band(1), blurred.band(2));
    let data = (0..img.pixels())
        .map(|i| {
            let (h, s, v) = rgb_to_hsv(red[i], green[i], blue[i]);
            match channel {
                HsvChannel::Hue => h,
                HsvChannel::Saturation => s,
                HsvChannel::Value => v,
            }
        })
        .collect();
    RasterImage::single(img.width(), img.height(), data)
}

/// `(G - NIR) / (G + NIR)` per pixel, with `0 / 0` taken as 0.
pub fn preprocess_flood(img: &RasterImage, green_band: usize, nir_band: usize) -> Result<RasterImage> {
    for (name, band) in [("green", green_band), ("nir", nir_band)] {
        if band >= img.bands() {
            return Err(Error::InvalidParameter(format!(
                "{name} band {band} out of range for {} band(s)",
                img.bands()
            )));
        }
    }
    let data = img
        .band(green_band)
        .iter()
        .zip(img.band(nir_band))
        .map(|(&g, &n)| {
            let sum = g + n;
            if sum == 0.0 {
                0.0
            } else {
                ((g - n) / sum).clamp(-1.0, 1.0)
            }
        })
        .collect();
    RasterImage::single(img.width(), img.height(), data)
}

/// Mean pooling to `target_width x target_height`. Output pixel `(R, C)`
/// averages source rows `floor(R h / H) .. floor((R + 1) h / H)` and the
/// analogous columns, so non-divisible sizes are handled with uneven bins.
pub fn downscale(img: &RasterImage, target_width: usize, target_height: usize) -> Result<RasterImage> {
    let (w, h) = (img.width(), img.height());
    if target_width == 0 || target_height == 0 || target_width > w || target_height > h {
        return Err(Error::InvalidParameter(format!(
            "cannot downscale {w}x{h} to {target_width}x{target_height}"
        )));
    }
    let bin = |k: usize, src: usize, dst: usize| (k * src / dst, (k + 1) * src / dst);
    let mut data = Vec::with_capacity(target_width * target_height * img.bands());
    for b in 0..img.bands() {
        for tr in 0..target_height {
            let (r0, r1) = bin(tr, h, target_height);
            for tc in 0..target_width {
                let (c0, c1) = bin(tc, w, target_width);
                let mut sum = 0.0;
                for r in r0..r1 {
                    for c in c0..c1 {
                        sum += img.get(b, r, c);
                    }
                }
                data.push(sum / ((r1 - r0) * (c1 - c0)) as f64);
            }
        }
    }
    RasterImage::new(target_width, target_height, img.bands(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(w: usize, h: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> RasterImage {
        let mut data = vec![0.0; w * h * 3];
        for r in 0..h {
            for c in 0..w {
                let px = f(r, c);
                for b in 0..3 {
                    data[(b * h + r) * w + c] = px[b];
                }
            }
        }
        RasterImage::new(w, h, 3, data).unwrap()
    }

    #[test]
    fn constant_color_gives_constant_band() {
        let img = rgb(5, 4, |_, _| [0.2, 0.6, 0.3]);
        let out = preprocess_forest(&img, HsvChannel::Hue).unwrap();
        assert_eq!(out.bands(), 1);
        assert!(out.data().iter().all(|&v| v == out.data()[0]));
    }

    #[test]
    fn red_green_halves_give_two_hues() {
        let img = rgb(6, 4, |_, c| if c < 3 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] });
        let out = preprocess_forest(&img, HsvChannel::Hue).unwrap();
        for r in 0..4 {
            for c in 0..6 {
                let want = if c < 3 { 0.0 } else { 1.0 / 3.0 };
                assert!((out.get(0, r, c) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn byte_range_input_is_rescaled() {
        let img = rgb(3, 3, |_, _| [0.0, 0.0, 255.0]);
        let v = preprocess_forest(&img, HsvChannel::Value).unwrap();
        assert!(v.data().iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let hue = preprocess_forest(&img, HsvChannel::Hue).unwrap();
        assert!(hue.data().iter().all(|&x| (x - 2.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn median_removes_salt_noise() {
        let mut data = vec![0.25; 25];
        data[12] = 1.0;
        let img = RasterImage::single(5, 5, data).unwrap();
        assert!(median_blur3(&img).data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn forest_requires_three_bands() {
        let img = RasterImage::single(2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(
            preprocess_forest(&img, HsvChannel::Hue),
            Err(Error::BandMismatch { .. })
        ));
    }

    #[test]
    fn ndwi_examples() {
        let img = RasterImage::new(2, 1, 2, vec![0.8, 0.0, 0.2, 0.0]).unwrap();
        let out = preprocess_flood(&img, 0, 1).unwrap();
        assert!((out.data()[0] - 0.6).abs() < 1e-15);
        assert_eq!(out.data()[1], 0.0);
        let same = RasterImage::new(2, 1, 2, vec![0.3, 0.5, 0.3, 0.5]).unwrap();
        assert!(preprocess_flood(&same, 0, 1).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(preprocess_flood(&same, 0, 2).is_err());
    }

    #[test]
    fn downscale_examples() {
        let flat = RasterImage::single(256, 256, vec![0.37; 256 * 256]).unwrap();
        let small = downscale(&flat, 32, 32).unwrap();
        assert_eq!((small.width(), small.height()), (32, 32));
        assert!(small.data().iter().all(|&v| (v - 0.37).abs() < 1e-12));

        let two = RasterImage::single(2, 2, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        assert_eq!(downscale(&two, 1, 1).unwrap().data(), &[0.5]);

        let checker = RasterImage::from_fn(4, 4, |r, c| ((r + c) % 2) as f64).unwrap();
        assert_eq!(downscale(&checker, 2, 2).unwrap().data(), &[0.5; 4]);

        assert!(downscale(&two, 3, 2).is_err());
    }

    #[test]
    fn downscale_handles_uneven_bins() {
        let img = RasterImage::from_fn(5, 1, |_, c| c as f64).unwrap();
        let out = downscale(&img, 2, 1).unwrap();
        assert_eq!(out.data(), &[0.5, 3.0]);
    }
}
