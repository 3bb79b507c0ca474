use serde::Serialize;

use crate::domain::{FeatureSet, StateFeature};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    /// Number of gold occurrences.
    pub fn support(&self) -> usize {
        self.tp + self.fn_
    }

    /// Precision, recall and F1. A 0/0 ratio is 1.0 when the label never
    /// occurs in gold nor prediction, otherwise 0.0.
    pub fn scores(&self) -> Scores {
        let empty = self.tp + self.fp + self.fn_ == 0;
        let ratio = |num: usize, den: usize| match den {
            0 if empty => 1.0,
            0 => 0.0,
            _ => num as f64 / den as f64,
        };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Scores { precision, recall, f1 }
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, rhs: Counts) {
        self.tp += rhs.tp;
        self.fp += rhs.fp;
        self.fn_ += rhs.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelReport {
    pub feature: StateFeature,
    pub counts: Counts,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub instances: usize,
    /// One entry per feature, in letter order.
    pub per_label: Vec<LabelReport>,
    /// Scores over counts pooled across labels.
    pub micro: Scores,
    /// Per-label scores averaged with weights proportional to gold support.
    /// Equals `micro` when no label has any support.
    pub weighted_macro: Scores,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("gold has {gold} instances but prediction has {pred}")]
pub struct LengthMismatch {
    pub gold: usize,
    pub pred: usize,
}

pub fn classification_metrics(gold: &[FeatureSet], pred: &[FeatureSet]) -> Result<MetricsReport, LengthMismatch> {
    if gold.len() != pred.len() {
        return Err(LengthMismatch { gold: gold.len(), pred: pred.len() });
    }
    let mut counts = [Counts::default(); 13];
    for (g, p) in gold.iter().zip(pred) {
        for (slot, feature) in counts.iter_mut().zip(StateFeature::ALL) {
            match (g.contains(&feature), p.contains(&feature)) {
                (true, true) => slot.tp += 1,
                (false, true) => slot.fp += 1,
                (true, false) => slot.fn_ += 1,
                (false, false) => {}
            }
        }
    }

    let mut pooled = Counts::default();
    let per_label: Vec<LabelReport> = StateFeature::ALL
        .iter()
        .zip(counts)
        .map(|(&feature, c)| {
            pooled += c;
            LabelReport { feature, counts: c, scores: c.scores() }
        })
        .collect();
    let micro = pooled.scores();

    let total: usize = counts.iter().map(Counts::support).sum();
    let weighted_macro = if total == 0 {
        micro
    } else {
        let avg = |pick: fn(&Scores) -> f64| {
            per_label
                .iter()
                .map(|l| pick(&l.scores) * l.counts.support() as f64)
                .sum::<f64>()
                / total as f64
        };
        Scores { precision: avg(|s| s.precision), recall: avg(|s| s.recall), f1: avg(|s| s.f1) }
    };
    Ok(MetricsReport { instances: gold.len(), per_label, micro, weighted_macro })
}

impl MetricsReport {
    pub fn render(&self) -> String {
        let mut out = format!("instances: {}\n", self.instances);
        out.push_str("label     tp    fp    fn  precision  recall      f1\n");
        for l in &self.per_label {
            let c = l.counts;
            out.push_str(&format!(
                "{:<5} {:>5} {:>5} {:>5}  {:>9.3} {:>7.3} {:>7.3}\n",
                l.feature.code(),
                c.tp,
                c.fp,
                c.fn_,
                l.scores.precision,
                l.scores.recall,
                l.scores.f1
            ));
        }
        for (name, s) in [("micro", self.micro), ("weighted", self.weighted_macro)] {
            out.push_str(&format!(
                "{name:<23}  {:>9.3} {:>7.3} {:>7.3}\n",
                s.precision, s.recall, s.f1
            ));
        }
        out
    }
}
