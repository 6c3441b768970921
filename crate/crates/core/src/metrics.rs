//! Binary segmentation scores with uncertain ground-truth pixels excluded.
//!
//! A metric whose denominator is zero is `None` and serializes as the
//! string `"undefined"`, never as a number.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{SegmentationMask, UNCERTAIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(with = "maybe_metric")]
    pub iou: Option<f64>,
    #[serde(with = "maybe_metric")]
    pub accuracy: Option<f64>,
    #[serde(with = "maybe_metric")]
    pub recall: Option<f64>,
    #[serde(with = "maybe_metric")]
    pub precision: Option<f64>,
    #[serde(with = "maybe_metric")]
    pub f1: Option<f64>,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub ignored: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl MetricsReport {
    pub fn from_counts(tp: u64, fp: u64, tn: u64, fn_: u64, ignored: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        // 2PR / (P + R), written on counts so that P = R = 0 gives 0 rather than 0/0.
        let f1 = match (precision, recall) {
            (Some(_), Some(_)) => ratio(2 * tp, 2 * tp + fp + fn_),
            _ => None,
        };
        Self {
            iou: ratio(tp, tp + fp + fn_),
            accuracy: ratio(tp + tn, tp + tn + fp + fn_),
            recall,
            precision,
            f1,
            tp,
            fp,
            tn,
            fn_,
            ignored,
        }
    }

    pub fn pixels(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_ + self.ignored
    }

    /// Rows in the order IoU, Accuracy, Recall, Precision, F1-score.
    pub fn rows(&self) -> [(&'static str, Option<f64>); 5] {
        [
            ("IoU", self.iou),
            ("Accuracy", self.accuracy),
            ("Recall", self.recall),
            ("Precision", self.precision),
            ("F1-score", self.f1),
        ]
    }

    /// Fixed-width text table.
    pub fn table(&self) -> String {
        let mut out = format!("{:<12}{:>12}\n", "Metric", "Value");
        for (name, v) in self.rows() {
            let cell = v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.3}"));
            writeln!(out, "{name:<12}{cell:>12}").expect("write to String");
        }
        writeln!(
            out,
            "tp={} fp={} tn={} fn={} ignored={}",
            self.tp, self.fp, self.tn, self.fn_, self.ignored
        )
        .expect("write to String");
        out
    }
}

/// Confusion counts of a binary prediction against ground truth; truth pixels
/// labeled -1 are counted as ignored and excluded from every metric.
pub fn score(pred: &SegmentationMask, truth: &SegmentationMask) -> Result<MetricsReport> {
    pred.same_shape(truth)?;
    if !pred.is_binary() {
        return Err(Error::InvalidInput("predictions must be binary (0/1) masks".into()));
    }
    if let Some(bad) = truth.labels().iter().find(|&&l| !(l == 0 || l == 1 || l == UNCERTAIN)) {
        return Err(Error::InvalidInput(format!(
            "ground-truth label {bad} is not 0, 1 or -1"
        )));
    }
    let (mut tp, mut fp, mut tn, mut fn_, mut ignored) = (0, 0, 0, 0, 0);
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        match (p, t) {
            (_, UNCERTAIN) => ignored += 1,
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 0) => tn += 1,
            _ => fn_ += 1,
        }
    }
    Ok(MetricsReport::from_counts(tp, fp, tn, fn_, ignored))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    /// Always `"micro"`: counts are pooled over items before computing metrics.
    pub aggregation: String,
    pub aggregate: MetricsReport,
    pub items: Vec<MetricsReport>,
}

/// Score every pair and pool the confusion counts.
pub fn score_batch(pairs: &[(SegmentationMask, SegmentationMask)]) -> Result<BatchReport> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no prediction/truth pairs to score".into()));
    }
    let items = pairs.iter().map(|(p, t)| score(p, t)).collect::<Result<Vec<_>>>()?;
    let sum = |f: fn(&MetricsReport) -> u64| items.iter().map(f).sum::<u64>();
    let aggregate = MetricsReport::from_counts(
        sum(|r| r.tp),
        sum(|r| r.fp),
        sum(|r| r.tn),
        sum(|r| r.fn_),
        sum(|r| r.ignored),
    );
    Ok(BatchReport {
        aggregation: "micro".to_string(),
        aggregate,
        items,
    })
}

mod maybe_metric {
    use serde::{Deserialize, Deserializer, Serializer};

    const UNDEFINED: &str = "undefined";

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_str(UNDEFINED),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Value(f64),
        Marker(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Value(x) => Ok(Some(x)),
            Repr::Marker(m) if m == UNDEFINED => Ok(None),
            Repr::Marker(m) => Err(serde::de::Error::custom(format!("unexpected metric marker `{m}`"))),
        }
    }
}
