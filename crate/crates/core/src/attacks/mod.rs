//! Modeling attacks on simulated instances and the training-size harness.

mod adam;
mod es;
mod features;
mod harness;
mod lr;
mod mlp;

use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use es::{attack_reliability_es, EsConfig, EsOutcome};
pub use features::{build_features, FeatureMatrix};
pub use harness::{harness_min_crps, HarnessConfig, HarnessOutcome, HarnessRow};
pub use lr::{attack_lr, LrConfig, LrModel};
pub use mlp::{attack_nn, MlpConfig, MlpModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Lr,
    Nn,
    Es,
}

impl std::fmt::Display for AttackKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AttackKind::Lr => "lr",
            AttackKind::Nn => "nn",
            AttackKind::Es => "es",
        })
    }
}

/// Accuracy above which an attack counts as a break.
pub const SUCCESS_ACCURACY: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttackResult {
    pub attack: AttackKind,
    pub training_size: u64,
    pub test_accuracy: f64,
    pub epochs: u32,
    /// Wall-clock seconds; the only field that varies between reruns.
    pub wall_time_s: f64,
    pub success: bool,
    /// Per learned component: best absolute cosine against any true
    /// component weight vector.
    pub weight_correlation: Option<Vec<f64>>,
}

impl AttackResult {
    pub(crate) fn new(attack: AttackKind, training_size: u64, test_accuracy: f64, epochs: u32, wall_time_s: f64) -> Self {
        Self {
            attack,
            training_size,
            test_accuracy,
            epochs,
            wall_time_s,
            success: test_accuracy > SUCCESS_ACCURACY,
            weight_correlation: None,
        }
    }
}

/// `|cos|` between two equal-length vectors; 0 if either is zero.
pub fn abs_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).abs()
    }
}

/// For each learned vector, the best `|cos|` against the true component
/// weight vectors `(w_1..w_n, v)`.
pub fn weight_correlation(learned: &[Vec<f64>], truth: &crate::compose::PufModel) -> Vec<f64> {
    let true_w: Vec<Vec<f64>> = truth.components().iter().map(|c| c.weight_vector()).collect();
    learned
        .iter()
        .map(|w| true_w.iter().map(|t| abs_cosine(w, t)).fold(0.0, f64::max))
        .collect()
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of logit `h` against label `y`, stable for large |h|.
#[inline]
pub(crate) fn bce_logit(h: f64, y: f64) -> f64 {
    h.max(0.0) - h * y + (-h.abs()).exp().ln_1p()
}
