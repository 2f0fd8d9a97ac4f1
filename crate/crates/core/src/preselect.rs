//! Triple-response pre-selection.
//!
//! A challenge is kept when the plain, `+D` and `-D` evaluations of a chain
//! agree, which (noise aside) means `|delta| > D`. XOR designs keep a
//! challenge only if every component agrees; CDC designs select each
//! component's stream independently and zip the survivors.

use serde::{Deserialize, Serialize};

use crate::compose::{PufKind, PufModel};
use crate::crpgen::{ChallengeSource, CrpDataset, CrpRecord};
use crate::delay::{self, ArbiterModel, Challenge, DelayModuleSpec, TripleResponse};
use crate::error::{PufError, Result};
use crate::par;
use crate::rng::{normal_sf, RngContext};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub generated: u64,
    pub selected: u64,
    pub rate: f64,
}

impl SelectionReport {
    pub fn new(generated: u64, selected: u64) -> Self {
        let rate = if generated == 0 { 0.0 } else { selected as f64 / generated as f64 };
        Self { generated, selected, rate }
    }

    /// Binomial standard error of `rate`.
    pub fn std_error(&self) -> f64 {
        if self.generated == 0 {
            return 0.0;
        }
        (self.rate * (1.0 - self.rate) / self.generated as f64).sqrt()
    }

    pub fn merge(self, other: Self) -> Self {
        Self::new(self.generated + other.generated, self.selected + other.selected)
    }
}

/// A surviving challenge and the position it held in its source stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Selected {
    pub index: u64,
    pub challenge: Challenge,
    pub response: u8,
    pub triple: TripleResponse,
}

pub fn is_selected(t: &TripleResponse) -> bool {
    t.is_uniform()
}

fn check_module(module: &DelayModuleSpec) -> Result<f64> {
    let d = module.total_delay();
    if !(d > 0.0) {
        return Err(PufError::config("pre-selection needs a delay module with D > 0"));
    }
    Ok(d)
}

fn check_source<S: ChallengeSource + ?Sized>(src: &S, n: usize) -> Result<()> {
    if src.count() > 0 && src.stages() != n {
        return Err(PufError::input(format!(
            "challenge source has {} stages, model has {n}",
            src.stages()
        )));
    }
    Ok(())
}

/// XOR of the per-position bits of several triples.
fn combine(a: TripleResponse, b: TripleResponse) -> TripleResponse {
    TripleResponse::new(a.r1 ^ b.r1, a.r2 ^ b.r2, a.r3 ^ b.r3)
}

pub fn select_apuf<S: ChallengeSource + ?Sized>(
    m: &ArbiterModel,
    src: &S,
    module: &DelayModuleSpec,
    instance: RngContext,
) -> Result<(Vec<Selected>, SelectionReport)> {
    select_component(m, 0, src, module, instance)
}

/// Selection on one chain, with its noise addressed as component `j` of
/// `instance`.
pub fn select_component<S: ChallengeSource + ?Sized>(
    m: &ArbiterModel,
    j: usize,
    src: &S,
    module: &DelayModuleSpec,
    instance: RngContext,
) -> Result<(Vec<Selected>, SelectionReport)> {
    let d = check_module(module)?;
    check_source(src, m.stages())?;
    let chunks = par::map_chunks(src.count(), |range| {
        let mut kept = Vec::new();
        src.visit(range, &mut |i, c| {
            let delta = m.delay_unchecked(c.bits());
            let t = m.triple_from_delay(delta, d, delay::site(instance, j as u64, i));
            if is_selected(&t) {
                kept.push(Selected { index: i, challenge: c.clone(), response: t.r1, triple: t });
            }
        });
        kept
    });
    let kept: Vec<Selected> = chunks.into_iter().flatten().collect();
    let report = SelectionReport::new(src.count(), kept.len() as u64);
    Ok((kept, report))
}

/// Keep a challenge iff every component's triple is uniform on it.
pub fn select_xor<S: ChallengeSource + ?Sized>(
    x: &PufModel,
    src: &S,
    module: &DelayModuleSpec,
    instance: RngContext,
) -> Result<(Vec<Selected>, SelectionReport)> {
    let d = check_module(module)?;
    check_source(src, x.n())?;
    let chunks = par::map_chunks(src.count(), |range| {
        let mut kept = Vec::new();
        src.visit(range, &mut |i, c| {
            let mut acc = TripleResponse::new(0, 0, 0);
            for (j, m) in x.components().iter().enumerate() {
                let delta = m.delay_unchecked(c.bits());
                let t = m.triple_from_delay(delta, d, delay::site(instance, j as u64, i));
                if !is_selected(&t) {
                    return;
                }
                acc = combine(acc, t);
            }
            kept.push(Selected { index: i, challenge: c.clone(), response: acc.r1, triple: acc });
        });
        kept
    });
    let kept: Vec<Selected> = chunks.into_iter().flatten().collect();
    let report = SelectionReport::new(src.count(), kept.len() as u64);
    Ok((kept, report))
}

/// CDC records assembled from independently selected component streams,
/// plus the stream position each component challenge came from.
pub(crate) struct CdcSelection {
    pub records: Vec<CrpRecord>,
    pub indices: Vec<Vec<u64>>,
    pub reports: Vec<SelectionReport>,
}

pub(crate) fn select_cdc<S: ChallengeSource>(
    x: &PufModel,
    sources: &[S],
    module: &DelayModuleSpec,
    instance: RngContext,
    target_count: Option<u64>,
) -> Result<CdcSelection> {
    check_module(module)?;
    if sources.len() != x.k() {
        return Err(PufError::input(format!(
            "CDC with {} components needs as many challenge streams, got {}",
            x.k(),
            sources.len()
        )));
    }
    let mut per_component = Vec::with_capacity(x.k());
    let mut reports = Vec::with_capacity(x.k());
    for (j, (m, src)) in x.components().iter().zip(sources).enumerate() {
        let (kept, report) = select_component(m, j, src, module, instance)?;
        per_component.push(kept);
        reports.push(report);
    }
    if per_component.iter().any(Vec::is_empty) {
        let diagnostics = reports
            .iter()
            .enumerate()
            .map(|(j, r)| format!("component {j}: {} of {} selected", r.selected, r.generated))
            .collect();
        return Err(PufError::EmptyDataset { diagnostics });
    }
    let mut len = per_component.iter().map(Vec::len).min().unwrap_or(0) as u64;
    if let Some(t) = target_count {
        len = len.min(t);
    }
    let mut records = Vec::with_capacity(len as usize);
    let mut indices = Vec::with_capacity(len as usize);
    for i in 0..len as usize {
        let mut triple = TripleResponse::new(0, 0, 0);
        let mut challenges = Vec::with_capacity(x.k());
        let mut idx = Vec::with_capacity(x.k());
        for comp in &per_component {
            triple = combine(triple, comp[i].triple);
            challenges.push(comp[i].challenge.clone());
            idx.push(comp[i].index);
        }
        records.push(CrpRecord { challenges, response: triple.r1, repeats: None, triple: Some(triple) });
        indices.push(idx);
    }
    Ok(CdcSelection { records, indices, reports })
}

/// Select each component's stream, then zip the i-th survivors of every
/// component into the i-th CDC record. Stops at `target_count` or when the
/// shortest component list runs out.
pub fn build_cdc_dataset<S: ChallengeSource>(
    x: &PufModel,
    sources: &[S],
    module: &DelayModuleSpec,
    instance: RngContext,
    target_count: Option<u64>,
) -> Result<(CrpDataset, Vec<SelectionReport>)> {
    let sel = select_cdc(x, sources, module, instance, target_count)?;
    let dataset = CrpDataset::new(PufKind::Cdc, x.k(), x.n(), 0, true, sel.records)?;
    Ok((dataset, sel.reports))
}

/// `2 Q(D / sigma_delta)`: chance that a Gaussian delay difference clears
/// the module on both sides.
pub fn analytic_selection_rate(sigma_delta: f64, d: f64) -> Result<f64> {
    if !(sigma_delta > 0.0) {
        return Err(PufError::input(format!("sigma_delta must be > 0, got {sigma_delta}")));
    }
    if !(d >= 0.0) {
        return Err(PufError::input(format!("D must be >= 0, got {d}")));
    }
    Ok(2.0 * normal_sf(d / sigma_delta))
}

/// Selection rate over a population of freshly sampled chains, one stream
/// challenge each. Across instances the delay difference is exactly
/// Gaussian with spread `sigma_delta(n, weight_sigma)`, so this is the
/// quantity `analytic_selection_rate` predicts.
pub fn population_selection_rate(
    n: usize,
    weight_sigma: f64,
    noise_sigma: f64,
    module: &DelayModuleSpec,
    instances: u64,
    seed: u64,
) -> Result<SelectionReport> {
    check_module(module)?;
    let root = RngContext::new(seed);
    let hits = par::map_chunks(instances, |range| -> Result<u64> {
        let mut hits = 0;
        for i in range {
            let inst_seed = root.derive(i).key();
            let m = delay::sample_instance(n, weight_sigma, noise_sigma, inst_seed)?;
            let stream = crate::crpgen::ChallengeStream::derived(
                inst_seed,
                0,
                PufKind::Apuf,
                0,
                n,
                Default::default(),
            )?;
            let src = crate::crpgen::StreamSource::new(stream, 1);
            let (_, report) = select_apuf(&m, &src, module, RngContext::new(inst_seed))?;
            hits += report.selected;
        }
        Ok(hits)
    });
    let selected = hits.into_iter().sum::<Result<u64>>()?;
    Ok(SelectionReport::new(instances, selected))
}
