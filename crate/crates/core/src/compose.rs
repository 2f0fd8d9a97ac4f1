//! XOR and CDC compositions of arbiter chains.

use serde::{Deserialize, Serialize};

use crate::delay::{self, sign_bit, ArbiterModel, Challenge, DelayModuleSpec};
use crate::error::{PufError, Result};
use crate::rng::{domain, mix64, RngContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PufKind {
    Apuf,
    Xor,
    Cdc,
}

impl PufKind {
    pub fn code(self) -> u8 {
        match self {
            PufKind::Apuf => 0,
            PufKind::Xor => 1,
            PufKind::Cdc => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(PufKind::Apuf),
            1 => Some(PufKind::Xor),
            2 => Some(PufKind::Cdc),
            _ => None,
        }
    }

    /// Challenges carried by one CRP record.
    pub fn challenges_per_record(self, k: usize) -> usize {
        match self {
            PufKind::Cdc => k,
            _ => 1,
        }
    }
}

impl std::fmt::Display for PufKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PufKind::Apuf => "APUF",
            PufKind::Xor => "XOR-PUF",
            PufKind::Cdc => "CDC-XPUF",
        })
    }
}

/// One PUF configuration: architecture, component count, stage count and
/// the pre-selection delay module.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kind: PufKind,
    pub k: usize,
    pub n: usize,
    pub module: DelayModuleSpec,
}

impl DesignSpec {
    pub fn new(kind: PufKind, k: usize, n: usize, module: DelayModuleSpec) -> Result<Self> {
        let d = Self { kind, k, n, module };
        d.validate()?;
        Ok(d)
    }

    /// Design with no delay module fitted.
    pub fn bare(kind: PufKind, k: usize, n: usize) -> Result<Self> {
        Self::new(kind, k, n, DelayModuleSpec::none())
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > u8::MAX as usize {
            return Err(PufError::config(format!("k must be in 1..=255, got {}", self.k)));
        }
        if self.n == 0 || self.n > u16::MAX as usize {
            return Err(PufError::config(format!("n must be in 1..=65535, got {}", self.n)));
        }
        if self.kind == PufKind::Apuf && self.k != 1 {
            return Err(PufError::config(format!("an APUF has exactly one component, got k = {}", self.k)));
        }
        Ok(())
    }

    pub fn challenges_per_record(&self) -> usize {
        self.kind.challenges_per_record(self.k)
    }
}

/// Log2 of the number of distinct challenges the design accepts.
pub fn crp_space_log2(d: &DesignSpec) -> u64 {
    match d.kind {
        PufKind::Apuf | PufKind::Xor => d.n as u64,
        PufKind::Cdc => (d.k * d.n) as u64,
    }
}

/// A simulated PUF instance: `k` arbiter chains and how they are wired.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PufModel {
    kind: PufKind,
    components: Vec<ArbiterModel>,
}

pub type XorModel = PufModel;
pub type CdcModel = PufModel;

impl PufModel {
    pub fn new(kind: PufKind, components: Vec<ArbiterModel>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(PufError::input("at least one component required"));
        };
        let n = first.stages();
        if components.iter().any(|c| c.stages() != n) {
            return Err(PufError::input("all components must have the same stage count"));
        }
        if kind == PufKind::Apuf && components.len() != 1 {
            return Err(PufError::input("an APUF has exactly one component"));
        }
        Ok(Self { kind, components })
    }

    pub fn apuf(m: ArbiterModel) -> Self {
        Self { kind: PufKind::Apuf, components: vec![m] }
    }

    pub fn xor(components: Vec<ArbiterModel>) -> Result<Self> {
        Self::new(PufKind::Xor, components)
    }

    pub fn cdc(components: Vec<ArbiterModel>) -> Result<Self> {
        Self::new(PufKind::Cdc, components)
    }

    pub fn kind(&self) -> PufKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn n(&self) -> usize {
        self.components[0].stages()
    }

    pub fn components(&self) -> &[ArbiterModel] {
        &self.components
    }

    pub fn challenges_per_record(&self) -> usize {
        self.kind.challenges_per_record(self.k())
    }

    /// Same delays with every component's noise replaced.
    pub fn with_noise(&self, noise_sigma: f64) -> Result<Self> {
        Ok(Self {
            kind: self.kind,
            components: self
                .components
                .iter()
                .map(|c| c.with_noise(noise_sigma))
                .collect::<Result<_>>()?,
        })
    }

    /// Same components rewired as another architecture.
    pub fn rewired(&self, kind: PufKind) -> Result<Self> {
        Self::new(kind, self.components.clone())
    }

    /// Challenge bits seen by component `j` of a record.
    #[inline]
    pub(crate) fn component_bits<'a>(&self, record: &'a [Challenge], j: usize) -> &'a [u8] {
        match self.kind {
            PufKind::Cdc => record[j].bits(),
            _ => record[0].bits(),
        }
    }

    pub fn check_record(&self, record: &[Challenge]) -> Result<()> {
        let want = self.challenges_per_record();
        if record.len() != want {
            return Err(PufError::input(format!(
                "{} expects {want} challenge(s) per record, got {}",
                self.kind,
                record.len()
            )));
        }
        if let Some(c) = record.iter().find(|c| c.len() != self.n()) {
            return Err(PufError::input(format!(
                "challenge has {} stages, model has {}",
                c.len(),
                self.n()
            )));
        }
        Ok(())
    }

    /// Noiseless per-component delay differences.
    pub fn delays(&self, record: &[Challenge]) -> Result<Vec<f64>> {
        self.check_record(record)?;
        Ok((0..self.k())
            .map(|j| self.components[j].delay_unchecked(self.component_bits(record, j)))
            .collect())
    }

    /// Noiseless composed response.
    pub fn respond_noiseless(&self, record: &[Challenge]) -> Result<u8> {
        Ok(self.delays(record)?.into_iter().fold(0, |acc, d| acc ^ sign_bit(d)))
    }

    /// Composed response with component noise addressed by
    /// `(instance, component j, indices[j], stream, eval)`.
    pub fn respond_indexed(
        &self,
        record: &[Challenge],
        instance: RngContext,
        indices: &[u64],
        stream: u64,
        eval: u64,
    ) -> Result<u8> {
        self.check_record(record)?;
        if indices.len() != self.k() {
            return Err(PufError::input("one challenge index per component required"));
        }
        Ok(self.respond_unchecked(record, instance, indices, stream, eval))
    }

    #[inline]
    pub(crate) fn respond_unchecked(
        &self,
        record: &[Challenge],
        instance: RngContext,
        indices: &[u64],
        stream: u64,
        eval: u64,
    ) -> u8 {
        let mut out = 0;
        for (j, m) in self.components.iter().enumerate() {
            let delta = m.delay_unchecked(self.component_bits(record, j));
            let site = delay::site(instance, j as u64, indices[j]);
            out ^= sign_bit(delta + m.noise(site, stream, eval));
        }
        out
    }

    /// Composed response for a record sitting at `index` of every component
    /// stream; `eval` selects an independent noise realization.
    pub fn respond(&self, record: &[Challenge], instance: RngContext, index: u64, eval: u64) -> Result<u8> {
        let indices = vec![index; self.k()];
        self.respond_indexed(record, instance, &indices, domain::RESPONSE, eval)
    }
}

/// All components see the same challenge.
pub fn xor_respond(x: &PufModel, c: &Challenge, instance: RngContext, index: u64, eval: u64) -> Result<u8> {
    let as_xor = if x.kind == PufKind::Cdc { x.rewired(PufKind::Xor)? } else { x.clone() };
    as_xor.respond(std::slice::from_ref(c), instance, index, eval)
}

/// Component `j` sees `cs[j]`.
pub fn cdc_respond(x: &PufModel, cs: &[Challenge], instance: RngContext, index: u64, eval: u64) -> Result<u8> {
    if cs.len() != x.k() {
        return Err(PufError::input(format!("CDC needs {} challenges, got {}", x.k(), cs.len())));
    }
    let as_cdc = if x.kind == PufKind::Cdc { x.clone() } else { PufModel::cdc(x.components.clone())? };
    as_cdc.respond(cs, instance, index, eval)
}

/// Majority of `votes` fresh evaluations of the composed output bit.
/// `trial` separates independent voting rounds on the same record.
pub fn majority_vote_respond(
    p: &PufModel,
    record: &[Challenge],
    votes: u32,
    instance: RngContext,
    index: u64,
    trial: u64,
) -> Result<u8> {
    if votes == 0 || votes % 2 == 0 {
        return Err(PufError::input(format!("votes must be odd and positive, got {votes}")));
    }
    p.check_record(record)?;
    let indices = vec![index; p.k()];
    Ok(majority_unchecked(p, record, votes, instance, &indices, trial))
}

#[inline]
pub(crate) fn majority_unchecked(
    p: &PufModel,
    record: &[Challenge],
    votes: u32,
    instance: RngContext,
    indices: &[u64],
    trial: u64,
) -> u8 {
    let stream = mix64(domain::VOTE.wrapping_add(trial));
    let ones: u32 = (0..votes)
        .map(|v| p.respond_unchecked(record, instance, indices, stream, v as u64) as u32)
        .sum();
    u8::from(2 * ones > votes)
}

/// `k` independent components, deterministic under `seed`. Component 0 is
/// the instance `delay::sample_instance` would draw for the same seed.
pub fn sample_puf(design: &DesignSpec, weight_sigma: f64, noise_sigma: f64, seed: u64) -> Result<PufModel> {
    design.validate()?;
    let components = (0..design.k)
        .map(|j| delay::sample_component(design.n, weight_sigma, noise_sigma, delay::component_context(seed, j as u64)))
        .collect::<Result<Vec<_>>>()?;
    PufModel::new(design.kind, components)
}

pub fn sample_xor(k: usize, n: usize, weight_sigma: f64, noise_sigma: f64, seed: u64) -> Result<PufModel> {
    sample_puf(&DesignSpec::bare(PufKind::Xor, k, n)?, weight_sigma, noise_sigma, seed)
}

pub fn sample_cdc(k: usize, n: usize, weight_sigma: f64, noise_sigma: f64, seed: u64) -> Result<PufModel> {
    sample_puf(&DesignSpec::bare(PufKind::Cdc, k, n)?, weight_sigma, noise_sigma, seed)
}
