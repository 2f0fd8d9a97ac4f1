use serde::{Deserialize, Serialize};

use super::{attack_lr, attack_nn, build_features, AttackKind, AttackResult, LrConfig, MlpConfig};
use crate::compose::{sample_puf, DesignSpec, PufModel};
use crate::crpgen::{generate_dataset, GenOptions};
use crate::error::{PufError, Result};
use crate::par;
use crate::rng::{domain, mix64, RngContext};

#[derive(Clone, Debug, PartialEq)]
pub struct HarnessConfig {
    pub attack: AttackKind,
    pub instances: usize,
    /// Strictly increasing training sizes.
    pub schedule: Vec<u64>,
    /// Largest size attempted; later schedule entries are dropped.
    pub cap: u64,
    pub test_size: u64,
    pub seed: u64,
    pub weight_sigma: f64,
    pub noise_sigma: f64,
    /// Fraction of broken instances that ends the sweep.
    pub success_fraction: f64,
    pub lr: LrConfig,
    pub nn: MlpConfig,
}

impl HarnessConfig {
    pub fn new(attack: AttackKind, schedule: Vec<u64>, cap: u64, seed: u64) -> Self {
        Self {
            attack,
            instances: 20,
            schedule,
            cap,
            test_size: 10_000,
            seed,
            weight_sigma: 1.0,
            noise_sigma: 0.0,
            success_fraction: 0.9,
            lr: LrConfig::default(),
            nn: MlpConfig::default(),
        }
    }
}

/// Outcome at one training size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessRow {
    pub size: u64,
    pub instances: u64,
    pub broken: u64,
    pub diverged: u64,
    pub success_rate: f64,
    pub mean_accuracy: f64,
    /// Per-instance test accuracy (diverged runs count as 0.5).
    pub accuracies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarnessOutcome {
    pub rows: Vec<HarnessRow>,
    /// First size at which the success fraction was reached.
    pub min_size: Option<u64>,
    /// The cap was reached without breaking enough instances.
    pub failed_at_cap: bool,
}

fn instance_seed(seed: u64, i: usize) -> u64 {
    RngContext::new(seed).derive(domain::ATTACK).derive(i as u64).key()
}

fn run_one(design: &DesignSpec, model: &PufModel, cfg: &HarnessConfig, i: usize, size: u64) -> Result<AttackResult> {
    let data_seed = instance_seed(cfg.seed, i);
    let train = generate_dataset(model, &design.module, &GenOptions { purpose: 0, ..GenOptions::new(size, data_seed) })?;
    let test = generate_dataset(model, &design.module, &GenOptions { purpose: 1, ..GenOptions::new(cfg.test_size, data_seed) })?;
    let (train, test) = (build_features(&train)?, build_features(&test)?);
    let train_seed = mix64(data_seed ^ size);
    match cfg.attack {
        AttackKind::Lr => attack_lr(&train, &test, design.k, &LrConfig { seed: train_seed, ..cfg.lr }).map(|r| r.1),
        AttackKind::Nn => attack_nn(&train, &test, design.k, design.n, &MlpConfig { seed: train_seed, ..cfg.nn }).map(|r| r.1),
        AttackKind::Es => Err(PufError::config("the size harness runs the lr and nn attacks only")),
    }
}

/// Train on growing CRP counts until `success_fraction` of the instances
/// are broken or the cap is reached. Rows in `completed` are taken as
/// already done; each new row is passed to `on_row` as it finishes.
/// Instances are sampled once and reused at every size; each size draws a
/// fresh training prefix and a disjoint test set.
pub fn harness_min_crps(
    design: &DesignSpec,
    cfg: &HarnessConfig,
    completed: &[HarnessRow],
    on_row: &mut dyn FnMut(&HarnessRow),
) -> Result<HarnessOutcome> {
    design.validate()?;
    if cfg.schedule.is_empty() || cfg.schedule.windows(2).any(|w| w[0] >= w[1]) || cfg.schedule[0] < 2 {
        return Err(PufError::config("schedule must be strictly increasing sizes >= 2"));
    }
    if cfg.instances == 0 || cfg.test_size == 0 {
        return Err(PufError::config("harness needs at least one instance and a non-empty test set"));
    }
    let models: Vec<PufModel> = (0..cfg.instances)
        .map(|i| sample_puf(design, cfg.weight_sigma, cfg.noise_sigma, instance_seed(cfg.seed, i)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for &size in cfg.schedule.iter().filter(|&&s| s <= cfg.cap) {
        let row = if let Some(done) = completed.iter().find(|r| r.size == size) {
            done.clone()
        } else {
            let results = par::map_range(0..cfg.instances as u64, |i| run_one(design, &models[i as usize], cfg, i as usize, size));
            let mut accuracies = Vec::with_capacity(cfg.instances);
            let (mut broken, mut diverged) = (0, 0);
            for r in results {
                match r {
                    Ok(res) => {
                        broken += u64::from(res.success);
                        accuracies.push(res.test_accuracy);
                    }
                    Err(PufError::Divergence(_)) => {
                        diverged += 1;
                        accuracies.push(0.5);
                    }
                    Err(e) => return Err(e),
                }
            }
            let n = cfg.instances as u64;
            let row = HarnessRow {
                size,
                instances: n,
                broken,
                diverged,
                success_rate: broken as f64 / n as f64,
                mean_accuracy: accuracies.iter().sum::<f64>() / n as f64,
                accuracies,
            };
            on_row(&row);
            row
        };
        let done = row.success_rate >= cfg.success_fraction;
        rows.push(row);
        if done {
            return Ok(HarnessOutcome { rows, min_size: Some(size), failed_at_cap: false });
        }
    }
    Ok(HarnessOutcome { rows, min_size: None, failed_at_cap: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose::PufKind;

    fn apuf() -> DesignSpec {
        DesignSpec::bare(PufKind::Apuf, 1, 32).unwrap()
    }

    #[test]
    fn noiseless_apuf_breaks_every_instance() {
        let cfg = HarnessConfig { instances: 4, test_size: 2000, ..HarnessConfig::new(AttackKind::Lr, vec![50, 2000], 10_000, 1) };
        let mut streamed = Vec::new();
        let out = harness_min_crps(&apuf(), &cfg, &[], &mut |r| streamed.push(r.size)).unwrap();
        assert_eq!(out.min_size, Some(2000));
        assert_eq!(out.rows.last().unwrap().broken, 4);
        assert_eq!(streamed, vec![50, 2000]);
        assert!(!out.failed_at_cap);
    }

    #[test]
    fn cap_reached_is_a_flagged_result() {
        let d = DesignSpec::bare(PufKind::Xor, 4, 64).unwrap();
        let cfg = HarnessConfig {
            instances: 2,
            test_size: 500,
            lr: LrConfig { max_epochs: 2, ..LrConfig::default() },
            ..HarnessConfig::new(AttackKind::Lr, vec![20, 40, 1_000_000], 100, 1)
        };
        let out = harness_min_crps(&d, &cfg, &[], &mut |_| {}).unwrap();
        assert!(out.failed_at_cap);
        assert_eq!(out.min_size, None);
        assert_eq!(out.rows.len(), 2);
    }

    #[test]
    fn resume_skips_completed_sizes_and_matches_a_fresh_run() {
        let cfg = HarnessConfig { instances: 3, test_size: 1000, ..HarnessConfig::new(AttackKind::Lr, vec![20, 60, 3000], 10_000, 5) };
        let fresh = harness_min_crps(&apuf(), &cfg, &[], &mut |_| {}).unwrap();
        let mut recomputed = Vec::new();
        let resumed = harness_min_crps(&apuf(), &cfg, &fresh.rows[..2], &mut |r| recomputed.push(r.size)).unwrap();
        assert_eq!(recomputed, vec![3000]);
        assert_eq!(resumed, fresh);
    }

    #[test]
    fn bad_schedules_rejected() {
        for s in [vec![], vec![100, 100], vec![200, 100]] {
            let cfg = HarnessConfig::new(AttackKind::Lr, s, 1000, 1);
            assert!(matches!(harness_min_crps(&apuf(), &cfg, &[], &mut |_| {}), Err(PufError::InvalidConfig(_))));
        }
    }
}
