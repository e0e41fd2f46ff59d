//! Classification metrics: confusion matrix, per-class precision/recall/F1
//! with the 0/0 -> 0 convention, macro averages, and overall accuracy.

use serde::{Deserialize, Serialize};

use crate::model::{forward, Mode, ModelConfig, ViTParams};
use crate::tensor::{cross_entropy, Tensor};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub class_names: Vec<String>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Build the report from label/prediction pairs. Predictions and truths must
/// be valid class indices.
pub fn classification_report(
    truth: &[usize],
    predictions: &[usize],
    class_names: &[String],
) -> ClassificationReport {
    assert_eq!(truth.len(), predictions.len());
    let c = class_names.len();
    let mut confusion = vec![vec![0u64; c]; c];
    for (&t, &p) in truth.iter().zip(predictions) {
        confusion[t][p] += 1;
    }
    let mut per_class = Vec::with_capacity(c);
    let mut correct = 0u64;
    for i in 0..c {
        let tp = confusion[i][i];
        correct += tp;
        let support: u64 = confusion[i].iter().sum();
        let predicted: u64 = (0..c).map(|r| confusion[r][i]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            class: class_names[i].clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    let total = truth.len() as u64;
    let mean = |f: fn(&ClassMetrics) -> f64| -> f64 {
        if per_class.is_empty() {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / per_class.len() as f64
        }
    };
    ClassificationReport {
        class_names: class_names.to_vec(),
        confusion,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        accuracy: ratio(correct, total),
        total,
        per_class,
    }
}

impl ClassificationReport {
    /// Aligned text table with per-class rows, macro averages, and accuracy.
    pub fn render_text(&self) -> String {
        let name_width = self
            .per_class
            .iter()
            .map(|m| m.class.len())
            .chain(["macro avg".len()])
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = String::new();
        out.push_str(&format!(
            "{:<name_width$}  {:>9}  {:>9}  {:>9}  {:>8}\n",
            "class", "precision", "recall", "f1", "support"
        ));
        for m in &self.per_class {
            out.push_str(&format!(
                "{:<name_width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>8}\n",
                m.class, m.precision, m.recall, m.f1, m.support
            ));
        }
        out.push_str(&format!(
            "{:<name_width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>8}\n",
            "macro avg", self.macro_precision, self.macro_recall, self.macro_f1, self.total
        ));
        out.push_str(&format!(
            "accuracy {:.4} over {} samples\n",
            self.accuracy, self.total
        ));
        out
    }

    /// Confusion matrix as CSV, rows = true class, columns = predicted.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\pred");
        for name in &self.class_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            out.push_str(&self.class_names[i]);
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Accuracy recomputed from the stored confusion matrix.
    pub fn accuracy_from_confusion(&self) -> f64 {
        let trace: u64 = (0..self.confusion.len())
            .map(|i| self.confusion[i][i])
            .sum();
        ratio(trace, self.total)
    }
}

/// Eval-mode predictions and mean cross-entropy over flattened
/// `[3, S, S]` inputs, processed in batches. Argmax ties break toward the
/// lowest class index.
pub fn predict_and_loss(
    params: &ViTParams,
    cfg: &ModelConfig,
    inputs: &[Vec<f32>],
    labels: &[usize],
    batch_size: usize,
) -> Result<(Vec<usize>, f64), EvalError> {
    if inputs.is_empty() {
        return Err(EvalError::EmptySampleSet);
    }
    assert_eq!(inputs.len(), labels.len());
    let per = 3 * cfg.image_size * cfg.image_size;
    let mut predictions = Vec::with_capacity(inputs.len());
    let mut loss_sum = 0.0f64;
    for (chunk, label_chunk) in inputs
        .chunks(batch_size.max(1))
        .zip(labels.chunks(batch_size.max(1)))
    {
        let mut data = Vec::with_capacity(chunk.len() * per);
        for sample in chunk {
            debug_assert_eq!(sample.len(), per);
            data.extend_from_slice(sample);
        }
        let batch = Tensor::from_vec(
            &[chunk.len(), 3, cfg.image_size, cfg.image_size],
            data,
        )?;
        let out = forward(params, cfg, &batch, Mode::Eval, None, false)?;
        predictions.extend(out.logits.argmax_rows());
        let loss = cross_entropy(&out.logits, label_chunk)?;
        loss_sum += f64::from(loss.item()) * chunk.len() as f64;
    }
    Ok((predictions, loss_sum / inputs.len() as f64))
}

/// Full evaluation: predictions plus the classification report.
pub fn evaluate(
    params: &ViTParams,
    cfg: &ModelConfig,
    inputs: &[Vec<f32>],
    labels: &[usize],
    class_names: &[String],
    batch_size: usize,
) -> Result<(ClassificationReport, f64), EvalError> {
    let (predictions, loss) = predict_and_loss(params, cfg, inputs, labels, batch_size)?;
    Ok((
        classification_report(labels, &predictions, class_names),
        loss,
    ))
}
