use std::time::Instant;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use super::{bce_logit, sigmoid, Adam, AttackKind, AttackResult, FeatureMatrix};
use crate::error::{PufError, Result};
use crate::rng::{domain, RngContext};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrConfig {
    pub learning_rate: f64,
    /// `None` uses `10^(k-1)`.
    pub batch_size: Option<usize>,
    /// Validation evaluations without improvement before stopping.
    pub patience: u32,
    pub max_epochs: u32,
    pub init_sigma: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, batch_size: None, patience: 5, max_epochs: 1000, init_sigma: 0.5, val_fraction: 0.1, seed: 0 }
    }
}

/// `10^(k-1)`, saturating.
pub(crate) fn default_batch(k: usize) -> usize {
    10usize.checked_pow(k.saturating_sub(1) as u32).unwrap_or(usize::MAX)
}

/// Product-of-linear-models hypothesis `h = prod_j (w_j . Phi_j)`,
/// `P(r = 1) = sigmoid(h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LrModel {
    weights: Vec<Vec<f64>>,
    /// All components read the same feature block (XOR and APUF data).
    shared: bool,
}

impl LrModel {
    pub fn new(weights: Vec<Vec<f64>>, shared: bool) -> Result<Self> {
        let w = weights.first().map_or(0, Vec::len);
        if w == 0 || weights.iter().any(|v| v.len() != w) {
            return Err(PufError::input("LR model needs equal, non-empty weight vectors"));
        }
        if weights.iter().flatten().any(|x| !x.is_finite()) {
            return Err(PufError::input("LR weights must be finite"));
        }
        Ok(Self { weights, shared })
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// Copy with the listed components' weights negated.
    pub fn negated(&self, components: &[usize]) -> Self {
        let mut out = self.clone();
        for &j in components {
            out.weights[j].iter_mut().for_each(|x| *x = -*x);
        }
        out
    }

    #[inline]
    fn dot(w: &[f64], phi: &[i8]) -> f64 {
        w.iter().zip(phi).map(|(a, &b)| a * b as f64).sum()
    }

    fn check(&self, fm: &FeatureMatrix) -> Result<()> {
        let blocks_needed = if self.shared { 1 } else { self.k() };
        if fm.block_width() != self.weights[0].len() || fm.blocks() < blocks_needed || (self.shared && fm.blocks() != 1) {
            return Err(PufError::input("features do not match the model shape"));
        }
        Ok(())
    }

    #[inline]
    fn block<'a>(&self, fm: &'a FeatureMatrix, i: usize, j: usize) -> &'a [i8] {
        fm.block(i, if self.shared { 0 } else { j })
    }

    pub fn hypothesis(&self, fm: &FeatureMatrix, i: usize) -> f64 {
        self.weights.iter().enumerate().map(|(j, w)| Self::dot(w, self.block(fm, i, j))).product()
    }

    pub fn predict(&self, fm: &FeatureMatrix, i: usize) -> u8 {
        u8::from(self.hypothesis(fm, i) > 0.0)
    }

    pub fn accuracy(&self, fm: &FeatureMatrix) -> Result<f64> {
        self.check(fm)?;
        if fm.is_empty() {
            return Err(PufError::input("accuracy of an empty set"));
        }
        let hits = (0..fm.rows()).filter(|&i| self.predict(fm, i) == fm.labels()[i]).count();
        Ok(hits as f64 / fm.rows() as f64)
    }

    fn mean_loss(&self, fm: &FeatureMatrix) -> f64 {
        let total: f64 = (0..fm.rows()).map(|i| bce_logit(self.hypothesis(fm, i), fm.labels()[i] as f64)).sum();
        total / fm.rows() as f64
    }
}

/// Mini-batch ADAM on binary cross-entropy. The trailing `val_fraction` of
/// `train` drives early stopping; accuracy is reported on `test`.
pub fn attack_lr(train: &FeatureMatrix, test: &FeatureMatrix, k: usize, cfg: &LrConfig) -> Result<(LrModel, AttackResult)> {
    let started = Instant::now();
    if k == 0 || k > train.k() {
        return Err(PufError::config(format!("LR with k = {k} on data from a {}-component design", train.k())));
    }
    if train.rows() < 2 || test.is_empty() {
        return Err(PufError::input("LR needs at least 2 training and 1 test CRP"));
    }
    if test.width() != train.width() {
        return Err(PufError::input("training and test features differ in width"));
    }
    let shared = train.blocks() == 1;
    let w = train.block_width();
    let (tr, val) = train.split(cfg.val_fraction);

    let mut rng = RngContext::new(cfg.seed).derive(domain::ATTACK).rng();
    let init = Normal::new(0.0, cfg.init_sigma).map_err(|e| PufError::config(format!("init_sigma: {e}")))?;
    let mut params: Vec<f64> = (0..k * w).map(|_| init.sample(&mut rng)).collect();
    let mut opt = Adam::new(params.len(), cfg.learning_rate);
    let batch = cfg.batch_size.unwrap_or_else(|| default_batch(k)).clamp(1, tr.rows());
    let block = |i: usize, j: usize| tr.block(i, if shared { 0 } else { j });

    let model_of = |p: &[f64]| LrModel { weights: p.chunks(w).map(<[f64]>::to_vec).collect(), shared };
    let mut best = (f64::INFINITY, params.clone());
    let mut since = 0;
    let mut order: Vec<usize> = (0..tr.rows()).collect();
    let mut grad = vec![0.0; params.len()];
    let mut z = vec![0.0; k];
    let mut epochs = 0;
    while epochs < cfg.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                for j in 0..k {
                    z[j] = LrModel::dot(&params[j * w..(j + 1) * w], block(i, j));
                }
                let h: f64 = z.iter().product();
                let g = (sigmoid(h) - tr.labels()[i] as f64) / chunk.len() as f64;
                for j in 0..k {
                    let others: f64 = z.iter().enumerate().filter(|&(m, _)| m != j).map(|(_, v)| v).product();
                    let scale = g * others;
                    for (gr, &phi) in grad[j * w..(j + 1) * w].iter_mut().zip(block(i, j)) {
                        *gr += scale * phi as f64;
                    }
                }
            }
            opt.step(&mut params, &grad);
        }
        let loss = model_of(&params).mean_loss(&val);
        if !loss.is_finite() {
            return Err(PufError::Divergence(format!("LR validation loss became {loss} at epoch {epochs}")));
        }
        if loss < best.0 {
            best = (loss, params.clone());
            since = 0;
        } else {
            since += 1;
            if since >= cfg.patience {
                break;
            }
        }
    }
    let model = model_of(&best.1);
    let acc = model.accuracy(test)?;
    let result = AttackResult::new(AttackKind::Lr, train.rows() as u64, acc, epochs, started.elapsed().as_secs_f64());
    Ok((model, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::build_features;
    use crate::compose::{sample_puf, DesignSpec, PufKind};
    use crate::crpgen::{generate_dataset, GenOptions};
    use crate::delay::DelayModuleSpec;

    fn data(kind: PufKind, k: usize, n: usize, count: u64, purpose: u64) -> (FeatureMatrix, crate::compose::PufModel) {
        let d = DesignSpec::bare(kind, k, n).unwrap();
        let m = sample_puf(&d, 1.0, 0.0, 11).unwrap();
        let opts = GenOptions { purpose, ..GenOptions::new(count, 5) };
        (build_features(&generate_dataset(&m, &DelayModuleSpec::none(), &opts).unwrap()).unwrap(), m)
    }

    #[test]
    fn breaks_a_noiseless_apuf() {
        let (train, _) = data(PufKind::Apuf, 1, 32, 5000, 0);
        let (test, _) = data(PufKind::Apuf, 1, 32, 10_000, 1);
        let (_, r) = attack_lr(&train, &test, 1, &LrConfig::default()).unwrap();
        assert!(r.test_accuracy > 0.95, "{r:?}");
        assert!(r.success);
    }

    #[test]
    fn true_weights_scaled_predict_identically() {
        let (fm, m) = data(PufKind::Apuf, 1, 16, 500, 0);
        let w = m.components()[0].weight_vector();
        let a = LrModel::new(vec![w.clone()], true).unwrap();
        let b = LrModel::new(vec![w.iter().map(|x| x * 3.7).collect()], true).unwrap();
        for i in 0..fm.rows() {
            assert_eq!(a.predict(&fm, i), b.predict(&fm, i));
        }
        // the true model predicts the complement of the response (r = 1 iff delay < 0)
        assert_eq!(a.negated(&[0]).accuracy(&fm).unwrap(), 1.0);
    }

    #[test]
    fn even_sign_flips_leave_predictions_unchanged() {
        let (train, _) = data(PufKind::Xor, 3, 16, 400, 0);
        let (test, _) = data(PufKind::Xor, 3, 16, 400, 1);
        let cfg = LrConfig { max_epochs: 3, ..LrConfig::default() };
        let (model, _) = attack_lr(&train, &test, 3, &cfg).unwrap();
        for flips in [vec![0, 1], vec![1, 2], vec![0, 2]] {
            let f = model.negated(&flips);
            for i in 0..test.rows() {
                assert_eq!(f.predict(&test, i), model.predict(&test, i));
            }
        }
    }

    #[test]
    fn k_above_design_is_a_config_error() {
        let (fm, _) = data(PufKind::Xor, 2, 8, 100, 0);
        assert!(matches!(attack_lr(&fm, &fm, 3, &LrConfig::default()), Err(PufError::InvalidConfig(_))));
    }

    #[test]
    fn runs_are_deterministic() {
        let (train, _) = data(PufKind::Cdc, 2, 16, 2000, 0);
        let (test, _) = data(PufKind::Cdc, 2, 16, 1000, 1);
        let cfg = LrConfig { max_epochs: 20, seed: 3, ..LrConfig::default() };
        let (a, ra) = attack_lr(&train, &test, 2, &cfg).unwrap();
        let (b, rb) = attack_lr(&train, &test, 2, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra.test_accuracy, rb.test_accuracy);
    }
}
