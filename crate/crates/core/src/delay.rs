//! Additive delay model of a single arbiter chain.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{PufError, Result};
use crate::rng::{domain, RngContext};

/// Default per-evaluation noise as a fraction of the delay-difference spread.
/// Unconditional flip rate is `atan(0.021)/pi`, about 0.67%.
pub const NOISE_RATIO: f64 = 0.021;

/// Default delay of one module gate as a fraction of the delay-difference
/// spread. Two gates give a selection rate of `2 Q(1.88)`, about 6.0%.
pub const GATE_DELAY_RATIO: f64 = 0.94;

/// Standard deviation of the delay difference over random challenges and
/// instances: `weight_sigma * sqrt(n + 1)` (n stage weights plus the bias).
pub fn sigma_delta(stages: usize, weight_sigma: f64) -> f64 {
    weight_sigma * ((stages + 1) as f64).sqrt()
}

/// Challenge bits, stage 1 first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Challenge {
    bits: Vec<u8>,
}

impl Challenge {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(PufError::input("challenge must have at least one stage"));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(PufError::input(format!(
                "challenge bit {} is {}, expected 0 or 1",
                pos + 1,
                bits[pos]
            )));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Copy with stage `stage` (0-based) inverted.
    pub fn flipped(&self, stage: usize) -> Self {
        let mut bits = self.bits.clone();
        bits[stage] ^= 1;
        Self { bits }
    }
}

/// Transformed challenge: `phi[i] = prod_{j >= i} (2 c_j - 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParityVector {
    phi: Vec<i8>,
}

impl ParityVector {
    pub fn phi(&self) -> &[i8] {
        &self.phi
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// Suffix-product transform, right to left in O(n).
pub fn transform_challenge(c: &Challenge) -> ParityVector {
    let mut phi = vec![0i8; c.len()];
    let mut acc = 1i8;
    for (slot, &bit) in phi.iter_mut().zip(c.bits()).rev() {
        acc *= 2 * bit as i8 - 1;
        *slot = acc;
    }
    ParityVector { phi }
}

/// Response bit of a (noisy) delay difference: 1 iff strictly negative.
#[inline]
pub fn sign_bit(delta: f64) -> u8 {
    u8::from(delta < 0.0)
}

/// One simulated arbiter chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArbiterModel {
    weights: Vec<f64>,
    bias: f64,
    noise_sigma: f64,
}

impl ArbiterModel {
    pub fn new(weights: Vec<f64>, bias: f64, noise_sigma: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(PufError::input("arbiter needs at least one stage"));
        }
        if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
            return Err(PufError::input(format!("noise_sigma must be >= 0, got {noise_sigma}")));
        }
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(PufError::input("delay weights must be finite"));
        }
        Ok(Self { weights, bias, noise_sigma })
    }

    pub fn stages(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    /// Same delays, different noise level.
    pub fn with_noise(&self, noise_sigma: f64) -> Result<Self> {
        Self::new(self.weights.clone(), self.bias, noise_sigma)
    }

    /// `(w_1, ..., w_n, v)`, the layout used by attack feature rows.
    pub fn weight_vector(&self) -> Vec<f64> {
        let mut v = self.weights.clone();
        v.push(self.bias);
        v
    }

    /// Model with every weight and the bias negated.
    pub fn negated(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|w| -w).collect(),
            bias: -self.bias,
            noise_sigma: self.noise_sigma,
        }
    }

    /// `v + sum_i w_i phi_i`, i.e. `d_upper - d_lower`.
    pub fn delay_difference(&self, phi: &ParityVector) -> Result<f64> {
        self.check_len(phi.len())?;
        Ok(self.bias
            + self
                .weights
                .iter()
                .zip(phi.phi())
                .map(|(w, &p)| w * p as f64)
                .sum::<f64>())
    }

    /// Delay difference straight from challenge bits, without materializing
    /// the parity vector.
    pub fn delay_for(&self, c: &Challenge) -> Result<f64> {
        self.check_len(c.len())?;
        Ok(self.delay_unchecked(c.bits()))
    }

    #[inline]
    pub(crate) fn delay_unchecked(&self, bits: &[u8]) -> f64 {
        let mut acc = self.bias;
        let mut parity = 1.0f64;
        for (w, &b) in self.weights.iter().zip(bits).rev() {
            if b == 0 {
                parity = -parity;
            }
            acc += w * parity;
        }
        acc
    }

    /// Response for one caller-supplied noise realization (already scaled).
    pub fn respond(&self, c: &Challenge, noise_draw: f64) -> Result<u8> {
        Ok(sign_bit(self.delay_for(c)? + noise_draw))
    }

    /// `repeats` noisy evaluations at `site` plus Becker-style reliability
    /// `h = |repeats/2 - sum r|`.
    pub fn respond_repeated(
        &self,
        c: &Challenge,
        repeats: u32,
        site: RngContext,
    ) -> Result<(Vec<u8>, f64)> {
        if repeats == 0 {
            return Err(PufError::input("repeats must be at least 1"));
        }
        let delta = self.delay_for(c)?;
        let bits: Vec<u8> = (0..repeats)
            .map(|r| sign_bit(delta + self.noise(site, domain::REPEAT, r as u64)))
            .collect();
        let ones: u32 = bits.iter().map(|&b| b as u32).sum();
        Ok((bits, reliability(repeats, ones)))
    }

    /// Plain, `+D` and `-D` evaluations with independent noise.
    pub fn triple_respond(
        &self,
        c: &Challenge,
        module: &DelayModuleSpec,
        site: RngContext,
    ) -> Result<TripleResponse> {
        Ok(self.triple_from_delay(self.delay_for(c)?, module.total_delay(), site))
    }

    #[inline]
    pub(crate) fn triple_from_delay(&self, delta: f64, d: f64, site: RngContext) -> TripleResponse {
        TripleResponse {
            r1: sign_bit(delta + self.noise(site, domain::TRIPLE, 0)),
            r2: sign_bit(delta + d + self.noise(site, domain::TRIPLE, 1)),
            r3: sign_bit(delta - d + self.noise(site, domain::TRIPLE, 2)),
        }
    }

    /// Scaled noise draw; exactly zero for a noiseless model.
    #[inline]
    pub(crate) fn noise(&self, site: RngContext, domain: u64, index: u64) -> f64 {
        if self.noise_sigma == 0.0 {
            0.0
        } else {
            self.noise_sigma * site.derive(domain).normal(index)
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.weights.len() {
            return Err(PufError::input(format!(
                "challenge has {len} stages, model has {}",
                self.weights.len()
            )));
        }
        Ok(())
    }
}

/// `|repeats/2 - ones|`
pub fn reliability(repeats: u32, ones: u32) -> f64 {
    (repeats as f64 / 2.0 - ones as f64).abs()
}

/// Noise site for one (component, challenge index) of an instance context.
#[inline]
pub fn site(instance: RngContext, component: u64, challenge_index: u64) -> RngContext {
    instance.derive(component).derive(challenge_index)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    Not,
    And,
}

/// Extra gates that shift one path by a fixed delay `D` during pre-selection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayModuleSpec {
    pub gate_kind: GateKind,
    pub gate_count: u32,
    pub gate_delay: f64,
}

impl DelayModuleSpec {
    pub fn new(gate_kind: GateKind, gate_count: u32, gate_delay: f64) -> Result<Self> {
        if !(gate_delay > 0.0) || !gate_delay.is_finite() {
            return Err(PufError::input(format!("gate_delay must be > 0, got {gate_delay}")));
        }
        Ok(Self { gate_kind, gate_count, gate_delay })
    }

    /// Module whose gates are sized against an `stages`-stage chain's spread.
    pub fn calibrated(gate_kind: GateKind, gate_count: u32, stages: usize, weight_sigma: f64) -> Self {
        Self {
            gate_kind,
            gate_count,
            gate_delay: GATE_DELAY_RATIO * sigma_delta(stages, weight_sigma),
        }
    }

    /// No module fitted.
    pub fn none() -> Self {
        Self { gate_kind: GateKind::Not, gate_count: 0, gate_delay: 1.0 }
    }

    pub fn total_delay(&self) -> f64 {
        self.gate_count as f64 * self.gate_delay
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TripleResponse {
    pub r1: u8,
    pub r2: u8,
    pub r3: u8,
}

impl TripleResponse {
    pub fn new(r1: u8, r2: u8, r3: u8) -> Self {
        Self { r1, r2, r3 }
    }

    pub fn is_uniform(&self) -> bool {
        self.r1 == self.r2 && self.r2 == self.r3
    }

    /// Bits 0..3 as `r1 | r2 << 1 | r3 << 2`.
    pub fn pack(&self) -> u8 {
        self.r1 | self.r2 << 1 | self.r3 << 2
    }

    pub fn unpack(bits: u8) -> Self {
        Self { r1: bits & 1, r2: (bits >> 1) & 1, r3: (bits >> 2) & 1 }
    }
}

/// Instance with weights and bias drawn i.i.d. `N(0, weight_sigma^2)`.
pub fn sample_instance(n: usize, weight_sigma: f64, noise_sigma: f64, seed: u64) -> Result<ArbiterModel> {
    sample_component(n, weight_sigma, noise_sigma, component_context(seed, 0))
}

/// Sampling context of component `j` of the instance seeded by `seed`.
pub(crate) fn component_context(seed: u64, j: u64) -> RngContext {
    RngContext::new(seed).derive(domain::INSTANCE).derive(j)
}

pub(crate) fn sample_component(
    n: usize,
    weight_sigma: f64,
    noise_sigma: f64,
    ctx: RngContext,
) -> Result<ArbiterModel> {
    if n == 0 {
        return Err(PufError::input("stage count must be at least 1"));
    }
    if !(weight_sigma > 0.0) || !weight_sigma.is_finite() {
        return Err(PufError::input(format!("weight_sigma must be > 0, got {weight_sigma}")));
    }
    let normal = Normal::new(0.0, weight_sigma).map_err(|e| PufError::input(e.to_string()))?;
    let mut rng = ctx.rng();
    let weights: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let bias = normal.sample(&mut rng);
    ArbiterModel::new(weights, bias, noise_sigma)
}
