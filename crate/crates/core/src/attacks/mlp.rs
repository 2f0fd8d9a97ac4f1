use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::lr::default_batch;
use super::{bce_logit, sigmoid, Adam, AttackKind, AttackResult, FeatureMatrix};
use crate::error::{PufError, Result};
use crate::rng::{domain, RngContext};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlpConfig {
    pub initial_lr: f64,
    pub lr_floor: f64,
    /// Validation evaluations without loss improvement before halving.
    pub plateau: u32,
    pub max_epochs: u32,
    pub target_val_accuracy: f64,
    pub init_sigma: f64,
    /// `None` uses `10^(k-1)`.
    pub batch_size: Option<usize>,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            initial_lr: 1e-3,
            lr_floor: 1e-5,
            plateau: 3,
            max_epochs: 300,
            target_val_accuracy: 0.98,
            init_sigma: 0.05,
            batch_size: None,
            val_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Dense network, tanh hidden layers, one sigmoid output.
#[derive(Clone, Debug)]
pub struct MlpModel {
    sizes: Vec<usize>,
    /// `in x out` per layer.
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    opt_w: Vec<Adam>,
    opt_b: Vec<Adam>,
}

struct Gradients {
    w: Vec<Array2<f64>>,
    b: Vec<Array1<f64>>,
}

impl MlpModel {
    /// Layer sizes `[input, kn, kn/2, kn/2, kn, 1]`.
    pub fn design_sizes(input: usize, k: usize, n: usize) -> Vec<usize> {
        let kn = (k * n).max(1);
        vec![input, kn, (kn / 2).max(1), (kn / 2).max(1), kn, 1]
    }

    /// Gaussian weights with standard deviation `sigma`, zero biases.
    pub fn with_sizes<R: Rng>(sizes: &[usize], sigma: f64, rng: &mut R) -> Result<Self> {
        let mut m = Self::zeroed(sizes)?;
        let dist = Normal::new(0.0, sigma).map_err(|e| PufError::config(format!("init_sigma: {e}")))?;
        for w in &mut m.weights {
            w.iter_mut().for_each(|x| *x = dist.sample(rng));
        }
        Ok(m)
    }

    pub fn zeroed(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) || sizes[sizes.len() - 1] != 1 {
            return Err(PufError::input(format!("bad layer sizes {sizes:?}")));
        }
        let weights: Vec<Array2<f64>> = sizes.windows(2).map(|p| Array2::zeros((p[0], p[1]))).collect();
        let biases: Vec<Array1<f64>> = sizes[1..].iter().map(|&s| Array1::zeros(s)).collect();
        let opt_w = weights.iter().map(|w| Adam::new(w.len(), 1e-3)).collect();
        let opt_b = biases.iter().map(|b| Adam::new(b.len(), 1e-3)).collect();
        Ok(Self { sizes: sizes.to_vec(), weights, biases, opt_w, opt_b })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Flat copy of every parameter, layer by layer, weights then biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    pub fn set_parameters(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(PufError::input("parameter vector has the wrong length"));
        }
        let mut it = flat.iter();
        for (w, b) in self.weights.iter_mut().zip(&mut self.biases) {
            w.iter_mut().chain(b.iter_mut()).for_each(|x| *x = *it.next().expect("length checked"));
        }
        Ok(())
    }

    /// Output logits (pre-sigmoid) and every layer's activation.
    fn forward_all(&self, x: ArrayView2<f64>) -> (Vec<Array2<f64>>, Array1<f64>) {
        let last = self.weights.len() - 1;
        let mut acts = vec![x.to_owned()];
        let mut logits = Array1::zeros(x.nrows());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = acts[l].dot(w) + b;
            if l == last {
                logits = z.column(0).to_owned();
                acts.push(z.mapv(sigmoid));
            } else {
                acts.push(z.mapv(f64::tanh));
            }
        }
        (acts, logits)
    }

    /// `P(r = 1)` per input row.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.forward_all(x).1.mapv(sigmoid)
    }

    /// Mean binary cross-entropy and its gradient.
    fn loss_and_grad(&self, x: ArrayView2<f64>, y: &Array1<f64>) -> (f64, Gradients) {
        let (acts, logits) = self.forward_all(x);
        let b = x.nrows() as f64;
        let loss = logits.iter().zip(y).map(|(&h, &t)| bce_logit(h, t)).sum::<f64>() / b;
        let mut delta: Array2<f64> = ((&logits.mapv(sigmoid) - y) / b).insert_axis(Axis(1));
        let layers = self.weights.len();
        let mut gw = Vec::with_capacity(layers);
        let mut gb = Vec::with_capacity(layers);
        for l in (0..layers).rev() {
            gw.push(acts[l].t().dot(&delta).as_standard_layout().into_owned());
            gb.push(delta.sum_axis(Axis(0)));
            if l > 0 {
                delta = delta.dot(&self.weights[l].t()) * acts[l].mapv(|a| 1.0 - a * a);
            }
        }
        gw.reverse();
        gb.reverse();
        (loss, Gradients { w: gw, b: gb })
    }

    /// Mean loss and flat gradient (same order as [`Self::parameters`]).
    pub fn loss_gradient(&self, x: ArrayView2<f64>, y: &[u8]) -> (f64, Vec<f64>) {
        let yv = Array1::from_iter(y.iter().map(|&v| v as f64));
        let (loss, g) = self.loss_and_grad(x, &yv);
        let mut flat = Vec::with_capacity(self.parameter_count());
        for (w, b) in g.w.iter().zip(&g.b) {
            flat.extend(w.iter());
            flat.extend(b.iter());
        }
        (loss, flat)
    }

    fn apply(&mut self, g: &Gradients, lr: f64) {
        for l in 0..self.weights.len() {
            self.opt_w[l].lr = lr;
            self.opt_b[l].lr = lr;
            let w = self.weights[l].as_slice_mut().expect("standard layout");
            self.opt_w[l].step(w, g.w[l].as_slice().expect("standard layout"));
            let b = self.biases[l].as_slice_mut().expect("standard layout");
            self.opt_b[l].step(b, g.b[l].as_slice().expect("standard layout"));
        }
    }

    fn evaluate(&self, fm: &FeatureMatrix) -> (f64, f64) {
        let (mut loss, mut hits) = (0.0, 0usize);
        let rows: Vec<usize> = (0..fm.rows()).collect();
        for chunk in rows.chunks(4096) {
            let x = to_array(fm, chunk);
            let (_, logits) = self.forward_all(x.view());
            for (&h, &i) in logits.iter().zip(chunk) {
                let y = fm.labels()[i];
                loss += bce_logit(h, y as f64);
                hits += usize::from(u8::from(h > 0.0) == y);
            }
        }
        (loss / fm.rows() as f64, hits as f64 / fm.rows() as f64)
    }

    pub fn accuracy(&self, fm: &FeatureMatrix) -> Result<f64> {
        if fm.width() != self.sizes[0] || fm.is_empty() {
            return Err(PufError::input("features do not match the network input"));
        }
        Ok(self.evaluate(fm).1)
    }
}

fn to_array(fm: &FeatureMatrix, rows: &[usize]) -> Array2<f64> {
    let w = fm.width();
    let mut x = Array2::zeros((rows.len(), w));
    for (r, &i) in rows.iter().enumerate() {
        for (dst, &src) in x.row_mut(r).iter_mut().zip(fm.row(i)) {
            *dst = src as f64;
        }
    }
    x
}

/// Trains the design-sized network. Stops when validation accuracy reaches
/// the target, at the epoch cap, or when the loss plateaus with the learning
/// rate already at its floor.
pub fn attack_nn(train: &FeatureMatrix, test: &FeatureMatrix, k: usize, n: usize, cfg: &MlpConfig) -> Result<(MlpModel, AttackResult)> {
    let started = Instant::now();
    if k == 0 || k > train.k() {
        return Err(PufError::config(format!("NN with k = {k} on data from a {}-component design", train.k())));
    }
    if train.rows() < 2 || test.is_empty() || test.width() != train.width() {
        return Err(PufError::input("NN needs >= 2 training CRPs and a test set of the same width"));
    }
    let (tr, val) = train.split(cfg.val_fraction);
    let mut rng = RngContext::new(cfg.seed).derive(domain::ATTACK).rng();
    let mut model = MlpModel::with_sizes(&MlpModel::design_sizes(train.width(), k, n), cfg.init_sigma, &mut rng)?;
    let batch = cfg.batch_size.unwrap_or_else(|| default_batch(k)).clamp(1, tr.rows());

    let mut lr = cfg.initial_lr;
    let mut best_loss = f64::INFINITY;
    let mut stalled = 0;
    let mut best = (f64::NEG_INFINITY, model.clone());
    let mut order: Vec<usize> = (0..tr.rows()).collect();
    let mut epochs = 0;
    while epochs < cfg.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let x = to_array(&tr, chunk);
            let y = Array1::from_iter(chunk.iter().map(|&i| tr.labels()[i] as f64));
            let (_, g) = model.loss_and_grad(x.view(), &y);
            model.apply(&g, lr);
        }
        let (loss, acc) = model.evaluate(&val);
        if !loss.is_finite() {
            return Err(PufError::Divergence(format!("NN validation loss became {loss} at epoch {epochs}")));
        }
        if acc > best.0 {
            best = (acc, model.clone());
        }
        if acc >= cfg.target_val_accuracy {
            break;
        }
        if loss < best_loss {
            best_loss = loss;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= cfg.plateau {
                if lr <= cfg.lr_floor {
                    break;
                }
                lr = (lr / 2.0).max(cfg.lr_floor);
                stalled = 0;
            }
        }
    }
    let model = best.1;
    let acc = model.accuracy(test)?;
    let result = AttackResult::new(AttackKind::Nn, train.rows() as u64, acc, epochs, started.elapsed().as_secs_f64());
    Ok((model, result))
}
