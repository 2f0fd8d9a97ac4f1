use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{abs_cosine, AttackKind, AttackResult};
use crate::compose::PufModel;
use crate::crpgen::CrpDataset;
use crate::delay::{reliability, transform_challenge};
use crate::error::{PufError, Result};
use crate::rng::{domain, RngContext};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EsConfig {
    /// Offspring per generation.
    pub lambda: usize,
    /// Parents recombined into the next mean.
    pub mu: usize,
    pub restarts: u32,
    pub max_generations: u32,
    pub initial_step: f64,
    /// A restart ends once the step size falls below this.
    pub min_step: f64,
    /// A restart also ends after this many generations without a new best.
    pub stall_generations: u32,
    /// Which challenge of a CDC record feeds the hypothesis.
    pub block: usize,
    pub seed: u64,
}

impl Default for EsConfig {
    fn default() -> Self {
        Self {
            lambda: 24,
            mu: 6,
            restarts: 10,
            max_generations: 600,
            initial_step: 0.3,
            min_step: 1e-3,
            stall_generations: 60,
            block: 0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EsOutcome {
    pub result: AttackResult,
    /// Best hypothesis found (unit norm); `None` when degenerate.
    pub weights: Option<Vec<f64>>,
    /// Best Pearson correlation reached.
    pub fitness: Option<f64>,
    /// Measured reliability had zero variance, so there was nothing to fit.
    pub degenerate: bool,
}

/// Pearson correlation of each column of `pred` with `target` (already
/// centred, with norm `target_norm`).
fn correlations(pred: &Array2<f64>, target: &Array1<f64>, target_norm: f64) -> Vec<f64> {
    pred.axis_iter(Axis(1))
        .map(|col| {
            let mean = col.mean().unwrap_or(0.0);
            let (mut cov, mut var) = (0.0, 0.0);
            for (&p, &t) in col.iter().zip(target) {
                let c = p - mean;
                cov += c * t;
                var += c * c;
            }
            if var == 0.0 {
                0.0
            } else {
                cov / (var.sqrt() * target_norm)
            }
        })
        .collect()
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Reliability-based attack: fits `w` so that `|w . Phi|` tracks the
/// measured reliability `|R/2 - sum r|` of each CRP, using a
/// `(mu/mu, lambda)` evolution strategy with 1/5-success step control.
///
/// `truth`, when given, is used only to score the result.
pub fn attack_reliability_es(d: &CrpDataset, cfg: &EsConfig, truth: Option<&PufModel>) -> Result<EsOutcome> {
    let started = Instant::now();
    if !d.has_repeats() || d.repeats() < 11 {
        return Err(PufError::input(format!("reliability attack needs >= 11 repeats per CRP, dataset has {}", d.repeats())));
    }
    if cfg.mu == 0 || cfg.mu > cfg.lambda {
        return Err(PufError::config(format!("ES needs 1 <= mu <= lambda, got mu = {}, lambda = {}", cfg.mu, cfg.lambda)));
    }
    let blocks = d.kind().challenges_per_record(d.k());
    if cfg.block >= blocks {
        return Err(PufError::config(format!("block {} out of range for {blocks} challenges per record", cfg.block)));
    }
    let rows = d.len();
    let w = d.n() + 1;
    let mut x = Array2::<f64>::zeros((rows, w));
    let mut h = Array1::<f64>::zeros(rows);
    for (i, r) in d.records().iter().enumerate() {
        let phi = transform_challenge(&r.challenges[cfg.block]);
        for (dst, &p) in x.row_mut(i).iter_mut().zip(phi.phi()) {
            *dst = p as f64;
        }
        x[[i, w - 1]] = 1.0;
        let reps = r.repeats.as_ref().expect("dataset has repeats");
        let ones = reps.iter().map(|&b| b as u32).sum();
        h[i] = reliability(d.repeats(), ones);
    }
    let mean_h = h.mean().unwrap_or(0.0);
    let centred = h.mapv(|v| v - mean_h);
    let h_norm = centred.iter().map(|v| v * v).sum::<f64>().sqrt();

    if h_norm == 0.0 {
        let result = AttackResult::new(AttackKind::Es, rows as u64, 0.5, 0, started.elapsed().as_secs_f64());
        return Ok(EsOutcome { result, weights: None, fitness: None, degenerate: true });
    }

    let fitness_of = |cands: &Array2<f64>| -> Vec<f64> {
        let pred = x.dot(cands).mapv(f64::abs);
        correlations(&pred, &centred, h_norm)
    };

    let mut rng = RngContext::new(cfg.seed).derive(domain::ATTACK).rng();
    let mut best: (f64, Vec<f64>) = (f64::NEG_INFINITY, vec![0.0; w]);
    let mut generations = 0u32;
    for _ in 0..cfg.restarts {
        let mut mean: Vec<f64> = (0..w).map(|_| rng.sample(StandardNormal)).collect();
        normalize(&mut mean);
        let mut step = cfg.initial_step;
        let mut parent_fit = fitness_of(&Array2::from_shape_vec((w, 1), mean.clone()).expect("shape"))[0];
        let mut local_best = parent_fit;
        let mut since_best = 0;
        for _ in 0..cfg.max_generations {
            generations += 1;
            let mut cands = Array2::<f64>::zeros((w, cfg.lambda));
            for c in 0..cfg.lambda {
                for r in 0..w {
                    let z: f64 = rng.sample(StandardNormal);
                    cands[[r, c]] = mean[r] + step * z;
                }
            }
            let fit = fitness_of(&cands);
            let mut ranked: Vec<usize> = (0..cfg.lambda).collect();
            ranked.sort_by(|&a, &b| fit[b].total_cmp(&fit[a]));
            let successes = fit.iter().filter(|&&f| f > parent_fit).count();
            let mut next = vec![0.0; w];
            for &c in &ranked[..cfg.mu] {
                for r in 0..w {
                    next[r] += cands[[r, c]] / cfg.mu as f64;
                }
            }
            normalize(&mut next);
            mean = next;
            parent_fit = fitness_of(&Array2::from_shape_vec((w, 1), mean.clone()).expect("shape"))[0];
            let ps = successes as f64 / cfg.lambda as f64;
            step = (step * ((ps - 0.2) / 0.8).exp()).min(1.0);
            if parent_fit > local_best + 1e-9 {
                local_best = parent_fit;
                since_best = 0;
            } else {
                since_best += 1;
            }
            if parent_fit > best.0 {
                best = (parent_fit, mean.clone());
            }
            if step < cfg.min_step || since_best >= cfg.stall_generations {
                break;
            }
        }
    }

    // sign of w is unidentifiable from reliability; score both orientations
    let wv = Array1::from(best.1.clone());
    let delays = x.dot(&wv);
    let hits = d.records().iter().zip(&delays).filter(|(r, &dd)| u8::from(dd < 0.0) == r.response).count();
    let acc = hits.max(rows - hits) as f64 / rows as f64;
    let mut result = AttackResult::new(AttackKind::Es, rows as u64, acc, generations, started.elapsed().as_secs_f64());
    if let Some(t) = truth {
        let corr = t.components().iter().map(|c| abs_cosine(&best.1, &c.weight_vector())).fold(0.0, f64::max);
        result.weight_correlation = Some(vec![corr]);
    }
    Ok(EsOutcome { result, weights: Some(best.1), fitness: Some(best.0), degenerate: false })
}
