//! Bit error rate, Hori uniqueness, response randomness, and the repeated
//! evaluation protocol that produces them.
//!
//! All counts are integers, so parallel aggregation is exact and the
//! reported values never depend on the worker count.

use serde::Serialize;

use crate::compose::PufModel;
use crate::crpgen::{generate_dataset, ChallengeStream, CrpDataset, GenOptions, LcgOverrides};
use crate::delay::{Challenge, DelayModuleSpec};
use crate::error::{PufError, Result};
use crate::par;
use crate::rng::{domain, RngContext};

/// Fraction of bits in `responses` (one row per repeat) that differ from
/// `reference`.
pub fn ber(responses: &[Vec<u8>], reference: &[u8]) -> Result<f64> {
    if responses.is_empty() || reference.is_empty() {
        return Err(PufError::input("BER needs at least one repeat of a non-empty response"));
    }
    let mut wrong = 0u64;
    for row in responses {
        if row.len() != reference.len() {
            return Err(PufError::input(format!(
                "repeat has {} bits, reference has {}",
                row.len(),
                reference.len()
            )));
        }
        wrong += row.iter().zip(reference).filter(|(a, b)| a != b).count() as u64;
    }
    Ok(wrong as f64 / (responses.len() * reference.len()) as f64)
}

/// Per-position ones counts across instances; rows must share a length.
fn column_ones(responses: &[Vec<u8>]) -> Result<Vec<u64>> {
    if responses.len() < 2 {
        return Err(PufError::input(format!("uniqueness needs at least 2 instances, got {}", responses.len())));
    }
    let nr = responses[0].len();
    if nr == 0 || responses.iter().any(|r| r.len() != nr) {
        return Err(PufError::input("instances must have the same non-zero number of response bits"));
    }
    let mut ones = vec![0u64; nr];
    for row in responses {
        for (o, &b) in ones.iter_mut().zip(row) {
            *o += b as u64;
        }
    }
    Ok(ones)
}

/// Hori uniqueness over `N` instances (rows) of `N_r` bits, summing over
/// ordered pairs: `HU = 4 / (N_r N^2) * sum_i sum_{j != m} b_ji xor b_mi`.
/// Range [0, 2]; independent random instances give 1.
pub fn uniqueness(responses: &[Vec<u8>]) -> Result<f64> {
    let ones = column_ones(responses)?;
    let n = responses.len() as u64;
    // ordered pairs that differ at a position with c ones: 2 c (N - c)
    let diff: u64 = ones.iter().map(|&c| 2 * c * (n - c)).sum();
    Ok(4.0 * diff as f64 / (ones.len() as f64 * (n * n) as f64))
}

/// Mean fractional Hamming distance over unordered instance pairs, in [0, 1].
pub fn mean_pairwise_hd(responses: &[Vec<u8>]) -> Result<f64> {
    let ones = column_ones(responses)?;
    let n = responses.len() as u64;
    let diff: u64 = ones.iter().map(|&c| c * (n - c)).sum();
    Ok(diff as f64 / (ones.len() as f64 * (n * (n - 1) / 2) as f64))
}

/// `(p, H)`: fraction of ones and min-entropy `-log2 max(p, 1 - p)`.
pub fn randomness(bits: &[u8]) -> Result<(f64, f64)> {
    if bits.is_empty() {
        return Err(PufError::input("randomness needs at least one bit"));
    }
    let ones = bits.iter().filter(|&&b| b != 0).count();
    let n = bits.len() as f64;
    let majority = ones.max(bits.len() - ones) as f64 / n;
    // -log2(1) is -0.0
    Ok((ones as f64 / n, (-majority.log2()).max(0.0)))
}

/// Errors against the majority bit of `ones` out of `repeats`; a tie costs
/// half the repeats either way.
fn majority_errors(ones: u64, repeats: u64) -> u64 {
    ones.min(repeats - ones)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MetricsReport {
    pub ber: Option<f64>,
    /// Repeat evaluations behind `ber`.
    pub ber_evaluations: u64,
    pub uniqueness_hu: Option<f64>,
    pub uniqueness_hd: Option<f64>,
    pub uniqueness_instances: u64,
    pub uniqueness_bits: u64,
    pub randomness_p: Option<f64>,
    pub randomness_h: Option<f64>,
    pub randomness_bits: u64,
    pub selection_rate: Option<f64>,
    pub selection_generated: u64,
}

impl MetricsReport {
    fn set_randomness(&mut self, bits: &[u8]) -> Result<()> {
        let (p, h) = randomness(bits)?;
        self.randomness_p = Some(p);
        self.randomness_h = Some(h);
        self.randomness_bits = bits.len() as u64;
        Ok(())
    }

    fn set_uniqueness(&mut self, rows: &[Vec<u8>]) -> Result<()> {
        self.uniqueness_hu = Some(uniqueness(rows)?);
        self.uniqueness_hd = Some(mean_pairwise_hd(rows)?);
        self.uniqueness_instances = rows.len() as u64;
        self.uniqueness_bits = rows[0].len() as u64;
        Ok(())
    }
}

/// BER (majority reference per record) and randomness of a stored dataset.
pub fn dataset_metrics(d: &CrpDataset) -> Result<MetricsReport> {
    if d.is_empty() {
        return Err(PufError::input("dataset has no records"));
    }
    let mut report = MetricsReport::default();
    report.set_randomness(&d.responses())?;
    if d.has_repeats() {
        let r = d.repeats() as u64;
        let wrong: u64 = d
            .records()
            .iter()
            .map(|rec| {
                let ones = rec.repeats.as_ref().map_or(0, |v| v.iter().map(|&b| b as u64).sum());
                majority_errors(ones, r)
            })
            .sum();
        report.ber_evaluations = r * d.len() as u64;
        report.ber = Some(wrong as f64 / report.ber_evaluations as f64);
    }
    Ok(report)
}

/// Noiseless responses of every instance to the same `count` challenges.
/// Noise is left out so that identical instances compare as identical.
pub fn instance_responses(models: &[PufModel], count: u64, seed: u64) -> Result<Vec<Vec<u8>>> {
    let first = models.first().ok_or_else(|| PufError::input("no instances supplied"))?;
    if models.iter().any(|m| m.kind() != first.kind() || m.k() != first.k() || m.n() != first.n()) {
        return Err(PufError::input("instances must share kind, k and n"));
    }
    let streams = (0..first.challenges_per_record())
        .map(|j| ChallengeStream::derived(seed, domain::PROBE, first.kind(), j, first.n(), LcgOverrides::default()))
        .collect::<Result<Vec<_>>>()?;
    let records: Vec<Vec<Challenge>> = par::map_chunks(count, |range| {
        let cols: Vec<Vec<Challenge>> = streams
            .iter()
            .map(|s| {
                let mut v = Vec::new();
                s.visit(range.clone(), &mut |_, c| v.push(c.clone()));
                v
            })
            .collect();
        (0..cols[0].len()).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();
    Ok(models
        .iter()
        .map(|m| par::map_slice(&records, |r| m.respond_noiseless(r).expect("records built for this shape")))
        .collect())
}

/// Uniqueness report for a set of instances.
pub fn instance_uniqueness(models: &[PufModel], count: u64, seed: u64) -> Result<MetricsReport> {
    let rows = instance_responses(models, count, seed)?;
    let mut report = MetricsReport::default();
    report.set_uniqueness(&rows)?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolConfig {
    pub challenge_count: u64,
    pub repeats: u32,
    pub seed: u64,
    /// Keep only CRPs that pass pre-selection (enrolled at the model's own
    /// noise level).
    pub preselect: bool,
    /// Noise sigma used for the repeated evaluations; the model's own when
    /// `None`.
    pub eval_noise: Option<f64>,
}

impl ProtocolConfig {
    pub fn new(challenge_count: u64, seed: u64) -> Self {
        Self { challenge_count, repeats: 10_000, seed, preselect: false, eval_noise: None }
    }
}

/// Draw `challenge_count` challenges (optionally pre-selected), evaluate each
/// `repeats` times and report BER against the per-challenge majority,
/// randomness of the single-shot responses, and uniqueness when `peers`
/// are given.
pub fn reliability_protocol(
    model: &PufModel,
    module: &DelayModuleSpec,
    cfg: &ProtocolConfig,
    peers: &[PufModel],
) -> Result<MetricsReport> {
    if cfg.challenge_count == 0 {
        return Err(PufError::input("challenge_count must be at least 1"));
    }
    if cfg.repeats == 0 {
        return Err(PufError::input("repeats must be at least 1"));
    }
    let opts = GenOptions { preselect: cfg.preselect, purpose: domain::PROBE, ..GenOptions::new(cfg.challenge_count, cfg.seed) };
    let enrolled = generate_dataset(model, module, &opts)?;
    let mut report = MetricsReport::default();
    if cfg.preselect {
        report.selection_generated = cfg.challenge_count;
        report.selection_rate = Some(enrolled.len() as f64 / cfg.challenge_count as f64);
        if enrolled.is_empty() {
            return Err(PufError::EmptyDataset {
                diagnostics: vec![format!("0 of {} challenges selected", cfg.challenge_count)],
            });
        }
    }
    report.set_randomness(&enrolled.responses())?;

    let eval = match cfg.eval_noise {
        Some(s) => model.with_noise(s)?,
        None => model.clone(),
    };
    let probe = RngContext::new(cfg.seed).derive(domain::PROBE);
    let k = eval.k();
    let repeats = cfg.repeats as u64;
    let records = enrolled.records();
    let wrong: u64 = par::map_chunks(records.len() as u64, |range| {
        range
            .map(|pos| {
                let rec = &records[pos as usize];
                let idx = vec![pos; k];
                let ones: u64 = (0..repeats)
                    .map(|r| eval.respond_unchecked(&rec.challenges, probe, &idx, domain::REPEAT, r) as u64)
                    .sum();
                majority_errors(ones, repeats)
            })
            .sum::<u64>()
    })
    .into_iter()
    .sum();
    report.ber_evaluations = repeats * records.len() as u64;
    report.ber = Some(wrong as f64 / report.ber_evaluations as f64);

    if !peers.is_empty() {
        let mut rows = vec![par::map_slice(records, |r| model.respond_noiseless(&r.challenges).expect("own records"))];
        for p in peers {
            let row = records
                .iter()
                .map(|r| p.respond_noiseless(&r.challenges))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        report.set_uniqueness(&rows)?;
    }
    Ok(report)
}
