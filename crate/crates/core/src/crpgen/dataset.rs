use crate::compose::{PufKind, PufModel};
use crate::crpgen::lcg::{ChallengeStream, LcgOverrides};
use crate::crpgen::{ChallengeSource, StreamSource};
use crate::delay::{Challenge, DelayModuleSpec, TripleResponse};
use crate::error::{PufError, Result};
use crate::par;
use crate::preselect::{self, SelectionReport};
use crate::rng::{domain, RngContext};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrpRecord {
    /// One challenge for APUF/XOR records, `k` for CDC.
    pub challenges: Vec<Challenge>,
    pub response: u8,
    pub repeats: Option<Vec<u8>>,
    pub triple: Option<TripleResponse>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrpDataset {
    kind: PufKind,
    k: usize,
    n: usize,
    repeats: u32,
    has_triple: bool,
    records: Vec<CrpRecord>,
}

impl CrpDataset {
    /// Checks every record against the header fields.
    pub fn new(
        kind: PufKind,
        k: usize,
        n: usize,
        repeats: u32,
        has_triple: bool,
        records: Vec<CrpRecord>,
    ) -> Result<Self> {
        if k == 0 || k > u8::MAX as usize || n == 0 || n > u16::MAX as usize {
            return Err(PufError::input(format!("unsupported shape k = {k}, n = {n}")));
        }
        if kind == PufKind::Apuf && k != 1 {
            return Err(PufError::input("APUF datasets have k = 1"));
        }
        let per_record = kind.challenges_per_record(k);
        for (i, r) in records.iter().enumerate() {
            if r.challenges.len() != per_record || r.challenges.iter().any(|c| c.len() != n) {
                return Err(PufError::input(format!("record {i} does not match {per_record} x {n} challenge bits")));
            }
            if r.response > 1 {
                return Err(PufError::input(format!("record {i} has response {}", r.response)));
            }
            match (&r.repeats, repeats) {
                (None, 0) => {}
                (Some(bits), want) if want > 0 && bits.len() == want as usize && bits.iter().all(|&b| b <= 1) => {}
                _ => return Err(PufError::input(format!("record {i} repeat bits do not match header ({repeats})"))),
            }
            if r.triple.is_some() != has_triple {
                return Err(PufError::input(format!("record {i} triple presence does not match header")));
            }
        }
        Ok(Self { kind, k, n, repeats, has_triple, records })
    }

    pub fn kind(&self) -> PufKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn repeats(&self) -> u32 {
        self.repeats
    }

    pub fn has_repeats(&self) -> bool {
        self.repeats > 0
    }

    pub fn has_triple(&self) -> bool {
        self.has_triple
    }

    pub fn records(&self) -> &[CrpRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<CrpRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn responses(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.response).collect()
    }

    /// First `len` records, same header.
    pub fn truncated(&self, len: usize) -> Self {
        Self { records: self.records[..len.min(self.records.len())].to_vec(), ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenOptions {
    /// Challenges drawn per stream (before any pre-selection).
    pub count: u64,
    pub seed: u64,
    /// Repeated evaluations stored per record; 0 stores none.
    pub repeats: u32,
    pub preselect: bool,
    pub lcg: LcgOverrides,
    /// Stream purpose, so that e.g. training and test sets never overlap.
    pub purpose: u64,
    /// Noise sigma for the stored repeats; the model's own when `None`.
    /// Enrollment (responses and pre-selection) always uses the model's.
    pub eval_noise: Option<f64>,
}

impl GenOptions {
    pub fn new(count: u64, seed: u64) -> Self {
        Self { count, seed, repeats: 0, preselect: false, lcg: LcgOverrides::default(), purpose: 0, eval_noise: None }
    }
}

fn streams(model: &PufModel, opts: &GenOptions) -> Result<Vec<ChallengeStream>> {
    (0..model.challenges_per_record())
        .map(|j| ChallengeStream::derived(opts.seed, opts.purpose, model.kind(), j, model.n(), opts.lcg))
        .collect()
}

/// LCG-driven CRP dataset for `model`, deterministic under `opts.seed`.
///
/// Noise for stream position `i` of component `j` is addressed by
/// `(seed, j, i)`, so pre-selecting while generating and selecting an
/// unfiltered dataset afterwards give identical records.
pub fn generate_dataset(model: &PufModel, module: &DelayModuleSpec, opts: &GenOptions) -> Result<CrpDataset> {
    generate_dataset_sharded(model, module, opts, None)
}

/// As [`generate_dataset`], also returning the selection reports (one per
/// component for CDC, one otherwise; empty without pre-selection).
pub fn generate_dataset_reported(
    model: &PufModel,
    module: &DelayModuleSpec,
    opts: &GenOptions,
) -> Result<(CrpDataset, Vec<SelectionReport>)> {
    generate_inner(model, module, opts, None)
}

/// As [`generate_dataset`], with the unfiltered record range split into
/// `shards` contiguous pieces (each jumping its LCG ahead to its start).
pub fn generate_dataset_sharded(
    model: &PufModel,
    module: &DelayModuleSpec,
    opts: &GenOptions,
    shards: Option<u64>,
) -> Result<CrpDataset> {
    generate_inner(model, module, opts, shards).map(|r| r.0)
}

fn eval_model(model: &PufModel, eval_noise: Option<f64>) -> Result<PufModel> {
    match eval_noise {
        Some(sigma) => model.with_noise(sigma),
        None => Ok(model.clone()),
    }
}

/// Pre-select records whose component `j` challenge at position `i` is
/// `sources[j][i]`, then attach repeats.
fn preselect_sources<S: ChallengeSource>(
    model: &PufModel,
    module: &DelayModuleSpec,
    sources: &[S],
    instance: RngContext,
    repeats: u32,
    eval_noise: Option<f64>,
) -> Result<(CrpDataset, Vec<SelectionReport>)> {
    let k = model.k();
    let (records, indices, reports): (Vec<CrpRecord>, Vec<Vec<u64>>, _) = if model.kind() == PufKind::Cdc {
        let sel = preselect::select_cdc(model, sources, module, instance, None)?;
        (sel.records, sel.indices, sel.reports)
    } else {
        let (kept, report) = preselect::select_xor(model, &sources[0], module, instance)?;
        let (records, indices) = kept
            .into_iter()
            .map(|s| {
                let rec = CrpRecord { challenges: vec![s.challenge], response: s.response, repeats: None, triple: Some(s.triple) };
                (rec, vec![s.index; k])
            })
            .unzip();
        (records, indices, vec![report])
    };
    let eval = eval_model(model, eval_noise)?;
    let records = attach_repeats(&eval, instance, records, &indices, repeats);
    Ok((CrpDataset::new(model.kind(), k, model.n(), repeats, true, records)?, reports))
}

/// Pre-select an unfiltered dataset produced by [`generate_dataset`] with
/// the same `seed`. Record `i` is taken to sit at stream position `i`, so
/// the result equals generating with pre-selection switched on.
pub fn select_dataset(
    model: &PufModel,
    module: &DelayModuleSpec,
    d: &CrpDataset,
    seed: u64,
    repeats: u32,
    eval_noise: Option<f64>,
) -> Result<(CrpDataset, Vec<SelectionReport>)> {
    if d.kind() != model.kind() || d.k() != model.k() || d.n() != model.n() {
        return Err(PufError::input(format!(
            "dataset is {} k={} n={}, model is {} k={} n={}",
            d.kind(),
            d.k(),
            d.n(),
            model.kind(),
            model.k(),
            model.n()
        )));
    }
    if d.has_triple() {
        return Err(PufError::input("dataset is already pre-selected"));
    }
    let sources: Vec<Vec<Challenge>> = (0..model.challenges_per_record())
        .map(|j| d.records().iter().map(|r| r.challenges[j].clone()).collect())
        .collect();
    preselect_sources(model, module, &sources, RngContext::new(seed), repeats, eval_noise)
}

fn generate_inner(
    model: &PufModel,
    module: &DelayModuleSpec,
    opts: &GenOptions,
    shards: Option<u64>,
) -> Result<(CrpDataset, Vec<SelectionReport>)> {
    if opts.count == 0 {
        return Err(PufError::input("count must be at least 1"));
    }
    let instance = RngContext::new(opts.seed);
    let streams = streams(model, opts)?;
    let k = model.k();

    if opts.preselect {
        let sources: Vec<StreamSource> = streams.into_iter().map(|s| StreamSource::new(s, opts.count)).collect();
        return preselect_sources(model, module, &sources, instance, opts.repeats, opts.eval_noise);
    }
    let eval = eval_model(model, opts.eval_noise)?;

    let build = |range: std::ops::Range<u64>| -> Vec<CrpRecord> {
        let mut per_stream: Vec<Vec<Challenge>> = streams
            .iter()
            .map(|s| {
                let mut v = Vec::with_capacity((range.end - range.start) as usize);
                s.visit(range.clone(), &mut |_, c| v.push(c.clone()));
                v
            })
            .collect();
        let mut out = Vec::with_capacity(per_stream[0].len());
        for (offset, i) in range.clone().enumerate() {
            let challenges: Vec<Challenge> =
                per_stream.iter_mut().map(|v| std::mem::replace(&mut v[offset], placeholder())).collect();
            let idx = vec![i; k];
            let response = model.respond_unchecked(&challenges, instance, &idx, domain::RESPONSE, 0);
            let repeats = repeat_bits(&eval, instance, &challenges, &idx, opts.repeats);
            out.push(CrpRecord { challenges, response, repeats, triple: None });
        }
        out
    };
    let records: Vec<CrpRecord> = match shards {
        Some(s) => {
            let s = s.max(1);
            let per = opts.count.div_ceil(s);
            par::map_range(0..s, |b| build(b * per..((b + 1) * per).min(opts.count))).into_iter().flatten().collect()
        }
        None => par::map_chunks(opts.count, build).into_iter().flatten().collect(),
    };
    Ok((CrpDataset::new(model.kind(), k, model.n(), opts.repeats, false, records)?, Vec::new()))
}

fn placeholder() -> Challenge {
    Challenge::new(vec![0]).expect("one-stage challenge")
}

fn repeat_bits(model: &PufModel, instance: RngContext, challenges: &[Challenge], idx: &[u64], repeats: u32) -> Option<Vec<u8>> {
    (repeats > 0).then(|| {
        (0..repeats as u64)
            .map(|r| model.respond_unchecked(challenges, instance, idx, domain::REPEAT, r))
            .collect()
    })
}

pub(crate) fn attach_repeats(
    model: &PufModel,
    instance: RngContext,
    records: Vec<CrpRecord>,
    indices: &[Vec<u64>],
    repeats: u32,
) -> Vec<CrpRecord> {
    if repeats == 0 {
        return records;
    }
    let pairs: Vec<(CrpRecord, &Vec<u64>)> = records.into_iter().zip(indices).collect();
    par::map_slice(&pairs, |(rec, idx)| CrpRecord {
        repeats: repeat_bits(model, instance, &rec.challenges, idx, repeats),
        ..rec.clone()
    })
}
