//! Learning edge weights from annotated masks.
//!
//! Each 4-neighbor pixel pair gets a fixed feature vector and a target of -1
//! (the mask changes across the pair) or +1 (it does not). A linear-sigmoid
//! scorer `f(x) = sigmoid(theta . x + bias)` is fit by full-batch gradient
//! descent on the per-image-averaged log loss, with targets remapped
//! -1 -> 0 and +1 -> 1. Learned graphs use `2 f(x) - 1` as the edge weight.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GridGraph;
use crate::pipeline::SegmentationMask;
use crate::raster::RasterImage;
use crate::rng::Stream;

/// Feature order produced by [`extract_pairs`].
pub const FEATURE_SPEC: [&str; 4] = [
    "signed_difference",
    "absolute_difference",
    "mean_gradient_magnitude",
    "mean_local_variance",
];

pub const MODEL_FORMAT: u32 = 1;

/// Largest double below 1; learned weights saturate here so they stay inside (-1, 1).
const WEIGHT_LIMIT: f64 = 1.0 - f64::EPSILON / 2.0;

/// Gradient components smaller than this are compared absolutely in [`grad_check`].
const GRAD_CHECK_FLOOR: f64 = 1e-3;

const GRAD_CHECK_PAIRS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub features: Vec<f64>,
    /// -1 across a mask boundary, +1 otherwise.
    pub target: i8,
}

impl PairRecord {
    fn label(&self) -> f64 {
        if self.target > 0 {
            1.0
        } else {
            0.0
        }
    }
}

fn replicate(v: isize, len: usize) -> usize {
    v.clamp(0, len as isize - 1) as usize
}

fn gradient_magnitudes(img: &RasterImage) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let px = img.band(0);
    let at = |r: isize, c: isize| px[replicate(r, h) * w + replicate(c, w)];
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h as isize {
        for c in 0..w as isize {
            let gx = (at(r, c + 1) - at(r, c - 1)) / 2.0;
            let gy = (at(r + 1, c) - at(r - 1, c)) / 2.0;
            out.push(gx.hypot(gy));
        }
    }
    out
}

fn local_variances(img: &RasterImage) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let px = img.band(0);
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h as isize {
        for c in 0..w as isize {
            let window: Vec<f64> = (-1..=1)
                .flat_map(|dr| (-1..=1).map(move |dc| (dr, dc)))
                .map(|(dr, dc)| px[replicate(r + dr, h) * w + replicate(c + dc, w)])
                .collect();
            let mean = window.iter().sum::<f64>() / 9.0;
            out.push(window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 9.0);
        }
    }
    out
}

/// Feature vectors for every 4-neighbor pair, in canonical edge order.
fn pair_features(img: &RasterImage) -> Result<Vec<Vec<f64>>> {
    if img.bands() != 1 {
        return Err(Error::BandMismatch {
            expected: 1,
            found: img.bands(),
        });
    }
    let (w, h) = (img.width(), img.height());
    let grads = gradient_magnitudes(img);
    let vars = local_variances(img);
    let px = img.band(0);
    let shape = GridGraph::new(w, h, vec![0.0; h * (w - 1)], vec![0.0; (h - 1) * w])?;
    Ok(shape
        .edges()
        .map(|e| {
            let d = px[e.v] - px[e.u];
            vec![
                d,
                d.abs(),
                (grads[e.u] + grads[e.v]) / 2.0,
                (vars[e.u] + vars[e.v]) / 2.0,
            ]
        })
        .collect())
}

/// One record per 4-neighbor pair: features in [`FEATURE_SPEC`] order and the boundary target.
pub fn extract_pairs(img: &RasterImage, mask: &SegmentationMask) -> Result<Vec<PairRecord>> {
    if (img.width(), img.height()) != (mask.width(), mask.height()) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", img.width(), img.height()),
            found: format!("{}x{} mask", mask.width(), mask.height()),
        });
    }
    if !mask.is_binary() {
        return Err(Error::InvalidInput("training masks must be binary".into()));
    }
    let labels = mask.labels();
    let (w, h) = (img.width(), img.height());
    let shape = GridGraph::new(w, h, vec![0.0; h * (w - 1)], vec![0.0; (h - 1) * w])?;
    Ok(pair_features(img)?
        .into_iter()
        .zip(shape.edges())
        .map(|(features, e)| PairRecord {
            features,
            target: if labels[e.u] != labels[e.v] { -1 } else { 1 },
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 500,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub hyper: TrainHyper,
    pub num_images: usize,
    pub num_pairs: usize,
    /// Loss before each update, then the loss of the returned parameters.
    pub loss_curve: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Fraction of training pairs whose boundary/no-boundary call matches the target.
    pub training_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightModel {
    pub format: u32,
    pub feature_spec: Vec<String>,
    pub theta: Vec<f64>,
    pub bias: f64,
    pub metadata: Option<TrainingMetadata>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln sigmoid(z) + (1 - y) ln(1 - sigmoid(z))]` without overflow.
fn log_loss(z: f64, y: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z
}

impl WeightModel {
    /// All-zero parameters over `feature_spec`.
    pub fn zeros(feature_spec: Vec<String>) -> Self {
        let d = feature_spec.len();
        Self {
            format: MODEL_FORMAT,
            feature_spec,
            theta: vec![0.0; d],
            bias: 0.0,
            metadata: None,
        }
    }

    pub fn standard_spec() -> Vec<String> {
        FEATURE_SPEC.iter().map(|s| s.to_string()).collect()
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.bias + self.theta.iter().zip(x).map(|(t, v)| t * v).sum::<f64>()
    }

    /// `f(x)`: probability that the pair is not a boundary.
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }

    /// Edge weight `2 f(x) - 1`, kept strictly inside (-1, 1).
    pub fn edge_weight(&self, x: &[f64]) -> f64 {
        (self.logit(x) / 2.0).tanh().clamp(-WEIGHT_LIMIT, WEIGHT_LIMIT)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("models always serialize");
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<WeightModel> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: WeightModel = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if model.format != MODEL_FORMAT {
            return Err(Error::format(
                path,
                format!("unsupported model format {}", model.format),
            ));
        }
        if model.theta.len() != model.feature_spec.len() {
            return Err(Error::format(path, "theta length does not match feature_spec"));
        }
        Ok(model)
    }
}

/// Loss and gradient `(d/dtheta..., d/dbias)` averaged per group, then over groups.
pub fn loss_and_gradient(model: &WeightModel, groups: &[Vec<PairRecord>]) -> (f64, Vec<f64>) {
    let d = model.theta.len();
    let mut loss = 0.0;
    let mut grad = vec![0.0; d + 1];
    for group in groups {
        let mut g_loss = 0.0;
        let mut g_grad = vec![0.0; d + 1];
        for rec in group {
            let z = model.logit(&rec.features);
            let y = rec.label();
            g_loss += log_loss(z, y);
            let residual = sigmoid(z) - y;
            for (g, x) in g_grad.iter_mut().zip(&rec.features) {
                *g += residual * x;
            }
            g_grad[d] += residual;
        }
        let n = group.len() as f64;
        loss += g_loss / n;
        for (g, gg) in grad.iter_mut().zip(g_grad) {
            *g += gg / n;
        }
    }
    let groups_n = groups.len() as f64;
    (loss / groups_n, grad.into_iter().map(|g| g / groups_n).collect())
}

fn validate_groups(groups: &[Vec<PairRecord>], d: usize) -> Result<()> {
    if groups.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    for (k, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(Error::InvalidInput(format!("training item {k} has no neighbor pairs")));
        }
        if let Some(rec) = g.iter().find(|r| r.features.len() != d) {
            return Err(Error::FeatureMismatch(format!(
                "item {k} has {} features, expected {d}",
                rec.features.len()
            )));
        }
        if g.iter().flat_map(|r| &r.features).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("item {k} has non-finite features")));
        }
    }
    Ok(())
}

fn accuracy(model: &WeightModel, groups: &[Vec<PairRecord>]) -> f64 {
    let (mut hits, mut total) = (0usize, 0usize);
    for rec in groups.iter().flatten() {
        let no_boundary = model.logit(&rec.features) > 0.0;
        hits += usize::from(no_boundary == (rec.target > 0));
        total += 1;
    }
    hits as f64 / total as f64
}

/// Gradient descent from zero parameters on pre-extracted pair groups (one group per image).
/// Returns the lowest-loss parameters visited, so the final loss never exceeds the initial one.
pub fn train_groups(groups: &[Vec<PairRecord>], feature_spec: Vec<String>, hyper: &TrainHyper) -> Result<WeightModel> {
    if !hyper.learning_rate.is_finite() || hyper.learning_rate <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "learning rate must be positive, got {}",
            hyper.learning_rate
        )));
    }
    let d = feature_spec.len();
    validate_groups(groups, d)?;
    let mut model = WeightModel::zeros(feature_spec);
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut curve = Vec::with_capacity(hyper.epochs + 1);
    for epoch in 0..=hyper.epochs {
        let (loss, grad) = loss_and_gradient(&model, groups);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        curve.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best = model.clone();
        }
        if epoch == hyper.epochs {
            break;
        }
        for (t, g) in model.theta.iter_mut().zip(&grad) {
            *t -= hyper.learning_rate * g;
        }
        model.bias -= hyper.learning_rate * grad[d];
    }
    let final_loss = loss_and_gradient(&best, groups).0;
    curve.push(final_loss);
    best.metadata = Some(TrainingMetadata {
        hyper: *hyper,
        num_images: groups.len(),
        num_pairs: groups.iter().map(Vec::len).sum(),
        initial_loss: curve[0],
        final_loss,
        loss_curve: curve,
        training_accuracy: accuracy(&best, groups),
    });
    Ok(best)
}

/// Pair groups for a dataset of images and their masks.
pub fn dataset_pairs(dataset: &[(RasterImage, SegmentationMask)]) -> Result<Vec<Vec<PairRecord>>> {
    dataset.iter().map(|(img, mask)| extract_pairs(img, mask)).collect()
}

/// Fit the standard-feature model to images and masks.
pub fn train(dataset: &[(RasterImage, SegmentationMask)], hyper: &TrainHyper) -> Result<WeightModel> {
    if dataset.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    train_groups(&dataset_pairs(dataset)?, WeightModel::standard_spec(), hyper)
}

/// Lattice graph of `img` with learned edge weights.
pub fn apply_model(model: &WeightModel, img: &RasterImage) -> Result<GridGraph> {
    if model.feature_spec != WeightModel::standard_spec() {
        return Err(Error::FeatureMismatch(format!(
            "model expects features {:?}, images provide {:?}",
            model.feature_spec, FEATURE_SPEC
        )));
    }
    if model.theta.len() != FEATURE_SPEC.len() {
        return Err(Error::FeatureMismatch(format!(
            "model has {} parameters for {} features",
            model.theta.len(),
            FEATURE_SPEC.len()
        )));
    }
    let weights = pair_features(img)?.iter().map(|x| model.edge_weight(x)).collect();
    GridGraph::from_canonical(img.width(), img.height(), weights)
}

/// Largest relative gap between the analytic gradient and central finite
/// differences, on at most 100 pairs drawn with `seed`. Each component is
/// compared relative to `max(|analytic|, |numeric|, 1e-3)`.
pub fn grad_check(model: &WeightModel, groups: &[Vec<PairRecord>], epsilon: f64, seed: u64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be in (0, 1e-3], got {epsilon}"
        )));
    }
    validate_groups(groups, model.theta.len())?;
    let mut pool: Vec<&PairRecord> = groups.iter().flatten().collect();
    let mut rng = Stream::new(seed);
    let take = pool.len().min(GRAD_CHECK_PAIRS);
    for i in 0..take {
        let j = i + rng.index(pool.len() - i);
        pool.swap(i, j);
    }
    let subset = vec![pool[..take].iter().map(|r| (*r).clone()).collect::<Vec<_>>()];

    let (_, analytic) = loss_and_gradient(model, &subset);
    let d = model.theta.len();
    let mut worst: f64 = 0.0;
    for (k, &exact) in analytic.iter().enumerate() {
        let shifted = |delta: f64| {
            let mut m = model.clone();
            if k < d {
                m.theta[k] += delta;
            } else {
                m.bias += delta;
            }
            loss_and_gradient(&m, &subset).0
        };
        let numeric = (shifted(epsilon) - shifted(-epsilon)) / (2.0 * epsilon);
        let scale = exact.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
        worst = worst.max((exact - numeric).abs() / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split_mask(w: usize, h: usize, split: usize) -> SegmentationMask {
        SegmentationMask::new(w, h, (0..w * h).map(|i| i32::from(i % w >= split)).collect()).unwrap()
    }

    #[test]
    fn constant_image_constant_mask() {
        let img = RasterImage::single(3, 3, vec![0.5; 9]).unwrap();
        let mask = SegmentationMask::filled(3, 3, 1).unwrap();
        let pairs = extract_pairs(&img, &mask).unwrap();
        assert_eq!(pairs.len(), 12);
        assert!(pairs
            .iter()
            .all(|p| p.target == 1 && p.features.iter().all(|&f| f == 0.0)));
    }

    #[test]
    fn single_pair_across_boundary() {
        let img = RasterImage::single(2, 1, vec![0.2, 0.9]).unwrap();
        let mask = SegmentationMask::new(2, 1, vec![0, 1]).unwrap();
        let pairs = extract_pairs(&img, &mask).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].target, -1);
        assert!((pairs[0].features[0] - 0.7).abs() < 1e-15);
        assert!((pairs[0].features[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn left_right_split_targets() {
        let img = RasterImage::from_fn(2, 2, |_, c| c as f64).unwrap();
        let pairs = extract_pairs(&img, &split_mask(2, 2, 1)).unwrap();
        // Canonical order: two horizontal pairs, then two vertical pairs.
        let targets: Vec<i8> = pairs.iter().map(|p| p.target).collect();
        assert_eq!(targets, vec![-1, -1, 1, 1]);
    }

    #[test]
    fn targets_ignore_label_names() {
        let img = RasterImage::from_fn(4, 3, |r, c| (r * c) as f64 / 6.0).unwrap();
        let mask = split_mask(4, 3, 2);
        let a = extract_pairs(&img, &mask).unwrap();
        let b = extract_pairs(&img, &mask.complement()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn extraction_checks_inputs() {
        let img = RasterImage::single(2, 2, vec![0.0; 4]).unwrap();
        assert!(extract_pairs(&img, &split_mask(3, 2, 1)).is_err());
        let multi = SegmentationMask::new(2, 2, vec![0, 2, 0, 0]).unwrap();
        assert!(extract_pairs(&img, &multi).is_err());
    }

    fn separable(n: usize) -> Vec<Vec<PairRecord>> {
        let mut rng = Stream::new(4);
        (0..3)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        let mut x = rng.uniform(-1.0, 1.0);
                        if x.abs() < 1e-3 {
                            x = 0.5;
                        }
                        PairRecord {
                            features: vec![x],
                            target: if x > 0.0 { 1 } else { -1 },
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let groups = separable(20);
        let hyper = TrainHyper {
            epochs: 0,
            ..TrainHyper::default()
        };
        let m = train_groups(&groups, vec!["x".into()], &hyper).unwrap();
        assert_eq!(m.theta, vec![0.0]);
        assert_eq!(m.bias, 0.0);
        assert!((m.metadata.unwrap().initial_loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn separable_data_is_learned() {
        let groups = separable(200);
        let m = train_groups(&groups, vec!["x".into()], &TrainHyper::default()).unwrap();
        let meta = m.metadata.clone().unwrap();
        assert!(meta.training_accuracy >= 0.99, "accuracy {}", meta.training_accuracy);
        assert!(meta.final_loss <= meta.initial_loss);
        assert_eq!(meta.loss_curve.len(), TrainHyper::default().epochs + 2);
    }

    #[test]
    fn duplicated_dataset_gives_the_same_model() {
        let groups = separable(50);
        let doubled: Vec<Vec<PairRecord>> = groups.iter().flat_map(|g| [g.clone(), g.clone()]).collect();
        let hyper = TrainHyper {
            epochs: 100,
            ..TrainHyper::default()
        };
        let a = train_groups(&groups, vec!["x".into()], &hyper).unwrap();
        let b = train_groups(&doubled, vec!["x".into()], &hyper).unwrap();
        assert!((a.theta[0] - b.theta[0]).abs() < 1e-12);
        assert!((a.bias - b.bias).abs() < 1e-12);
    }

    #[test]
    fn divergence_names_the_epoch() {
        let groups = vec![vec![PairRecord {
            features: vec![1e300],
            target: 1,
        }]];
        let hyper = TrainHyper {
            learning_rate: 1e300,
            epochs: 5,
            seed: 0,
        };
        match train_groups(&groups, vec!["x".into()], &hyper) {
            Err(Error::Divergence { epoch }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
        assert!(train_groups(&[], vec!["x".into()], &TrainHyper::default()).is_err());
    }

    #[test]
    fn apply_model_examples() {
        let img = RasterImage::from_fn(4, 4, |r, c| ((r + 2 * c) % 5) as f64 / 4.0).unwrap();
        let zero = WeightModel::zeros(WeightModel::standard_spec());
        let g = apply_model(&zero, &img).unwrap();
        assert!(g.weights().all(|w| w == 0.0));

        let mut saturated = zero.clone();
        saturated.bias = 1e6;
        let g = apply_model(&saturated, &img).unwrap();
        assert!(g.weights().all(|w| w < 1.0 && w > 1.0 - 1e-15));

        let odd = WeightModel::zeros(vec!["x".into()]);
        assert!(matches!(apply_model(&odd, &img), Err(Error::FeatureMismatch(_))));
    }

    #[test]
    fn balanced_zero_model_has_zero_bias_gradient() {
        let groups = vec![vec![
            PairRecord {
                features: vec![0.3],
                target: 1,
            },
            PairRecord {
                features: vec![-0.3],
                target: -1,
            },
        ]];
        let (_, grad) = loss_and_gradient(&WeightModel::zeros(vec!["x".into()]), &groups);
        assert_eq!(grad[1], 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let groups = separable(80);
        let mut model = WeightModel::zeros(vec!["x".into()]);
        model.theta[0] = 0.7;
        model.bias = -0.2;
        let dev = grad_check(&model, &groups, 1e-6, 3).unwrap();
        assert!((0.0..1e-5).contains(&dev), "deviation {dev}");
        assert!(grad_check(&model, &groups, 0.1, 3).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let m = train_groups(
            &separable(10),
            vec!["x".into()],
            &TrainHyper {
                epochs: 3,
                ..Default::default()
            },
        )
        .unwrap();
        m.save(&p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.contains("\"format\": 1"));
        assert_eq!(WeightModel::load(&p).unwrap(), m);
    }
}
