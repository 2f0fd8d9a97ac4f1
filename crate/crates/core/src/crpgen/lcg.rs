use std::ops::Range;

use crate::compose::PufKind;
use crate::delay::Challenge;
use crate::error::{PufError, Result};
use crate::rng::{domain, mix64, RngContext};

/// Knuth's MMIX multiplier and increment, reduced mod 2^K. Both satisfy the
/// Hull-Dobell conditions for every K (a = 1 mod 4, g odd).
pub const DEFAULT_MULTIPLIER: u64 = 6_364_136_223_846_793_005;
pub const DEFAULT_INCREMENT: u64 = 1_442_695_040_888_963_407;

/// `C_{t+1} = (a C_t + g) mod 2^K`, `1 <= K <= 64`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LcgState {
    a: u64,
    g: u64,
    bits: u32,
    current: u64,
}

impl LcgState {
    pub fn new(a: u64, g: u64, bits: u32, current: u64) -> Result<Self> {
        if bits == 0 || bits > 64 {
            return Err(PufError::input(format!("LCG modulus exponent must be in 1..=64, got {bits}")));
        }
        let mask = mask(bits);
        let a = a & mask;
        if a == 0 {
            return Err(PufError::input("LCG multiplier reduces to 0"));
        }
        Ok(Self { a, g: g & mask, bits, current: current & mask })
    }

    /// Default constants with the given start value.
    pub fn with_defaults(bits: u32, start: u64) -> Result<Self> {
        Self::new(DEFAULT_MULTIPLIER, DEFAULT_INCREMENT, bits, start)
    }

    pub fn multiplier(&self) -> u64 {
        self.a
    }

    pub fn increment(&self) -> u64 {
        self.g
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn current(&self) -> u64 {
        self.current
    }

    /// Hull-Dobell for m = 2^K: g odd and a = 1 (mod 4); for m = 2, a odd.
    pub fn has_full_period(&self) -> bool {
        let g_odd = self.g & 1 == 1;
        if self.bits == 1 {
            g_odd && self.a & 1 == 1
        } else {
            g_odd && self.a & 3 == 1
        }
    }

    #[inline]
    pub fn advance(&mut self) -> u64 {
        self.current = self.a.wrapping_mul(self.current).wrapping_add(self.g) & mask(self.bits);
        self.current
    }

    /// State after `steps` further draws, in O(log steps).
    pub fn jumped(&self, mut steps: u64) -> Self {
        let m = mask(self.bits);
        let (mut acc_a, mut acc_g) = (1u64, 0u64);
        let (mut cur_a, mut cur_g) = (self.a, self.g);
        while steps > 0 {
            if steps & 1 == 1 {
                acc_a = acc_a.wrapping_mul(cur_a) & m;
                acc_g = acc_g.wrapping_mul(cur_a).wrapping_add(cur_g) & m;
            }
            cur_g = cur_a.wrapping_add(1).wrapping_mul(cur_g) & m;
            cur_a = cur_a.wrapping_mul(cur_a) & m;
            steps >>= 1;
        }
        Self { current: acc_a.wrapping_mul(self.current).wrapping_add(acc_g) & m, ..*self }
    }
}

/// One step: `(value, state holding value)`.
pub fn lcg_next(s: LcgState) -> (u64, LcgState) {
    let mut next = s;
    let v = next.advance();
    (v, next)
}

#[inline]
fn mask(bits: u32) -> u64 {
    if bits == 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Stage `i` gets bit `i - 1` of `value` (LSB is stage 1).
pub fn challenge_from_word(value: u64, n: usize) -> Result<Challenge> {
    if n == 0 || n > 64 {
        return Err(PufError::input(format!("word challenges need 1..=64 stages, got {n}")));
    }
    if n < 64 && value >> n != 0 {
        return Err(PufError::input(format!("value {value} does not fit in {n} bits")));
    }
    Challenge::new((0..n).map(|i| ((value >> i) & 1) as u8).collect())
}

/// Caller overrides for the LCG constants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LcgOverrides {
    pub a: Option<u64>,
    pub g: Option<u64>,
}

/// A challenge sequence driven by one LCG.
///
/// Challenges of up to 64 stages use `K = n` so one period enumerates every
/// challenge exactly once. Longer challenges use `K = 64` and consume
/// `ceil(n / 64)` consecutive draws, stage 1 taken from the first draw's LSB.
#[derive(Clone, Debug)]
pub struct ChallengeStream {
    start: LcgState,
    n: usize,
    words: u64,
}

impl ChallengeStream {
    pub fn new(start: LcgState, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(PufError::input("stage count must be at least 1"));
        }
        let want = n.min(64) as u32;
        if start.bits() != want {
            return Err(PufError::input(format!("LCG for {n} stages must use K = {want}, got {}", start.bits())));
        }
        Ok(Self { start, n, words: n.div_ceil(64) as u64 })
    }

    /// Stream `purpose` of component `component` for the given master seed.
    ///
    /// APUF and XOR streams use the default constants. CDC components get
    /// their own multiplier, increment and start, mixed from the seed, so
    /// the per-component sequences are unrelated.
    pub fn derived(seed: u64, purpose: u64, kind: PufKind, component: usize, n: usize, ov: LcgOverrides) -> Result<Self> {
        let bits = n.min(64) as u32;
        let node = RngContext::new(seed).derive(domain::LCG).derive(purpose).derive(component as u64);
        let start = node.derive(0).key();
        let (mut a, mut g) = (DEFAULT_MULTIPLIER, DEFAULT_INCREMENT);
        if kind == PufKind::Cdc {
            a = (mix64(node.derive(1).key()) & !7) | 5;
            g = mix64(node.derive(2).key()) | 1;
        }
        let lcg = LcgState::new(ov.a.unwrap_or(a), ov.g.unwrap_or(g), bits, start)?;
        if !lcg.has_full_period() {
            return Err(PufError::config(format!(
                "LCG constants a = {}, g = {} violate Hull-Dobell for m = 2^{bits}",
                lcg.multiplier(),
                lcg.increment()
            )));
        }
        Self::new(lcg, n)
    }

    pub fn stages(&self) -> usize {
        self.n
    }

    /// Challenge at position `index` (0-based).
    pub fn at(&self, index: u64) -> Challenge {
        let mut s = self.start.jumped(index * self.words);
        self.draw(&mut s)
    }

    /// Visit positions `range` in order with a single jump.
    pub fn visit(&self, range: Range<u64>, f: &mut dyn FnMut(u64, &Challenge)) {
        let mut s = self.start.jumped(range.start * self.words);
        for i in range {
            let c = self.draw(&mut s);
            f(i, &c);
        }
    }

    pub fn take(&self, count: u64) -> Vec<Challenge> {
        let mut out = Vec::with_capacity(count as usize);
        self.visit(0..count, &mut |_, c| out.push(c.clone()));
        out
    }

    fn draw(&self, s: &mut LcgState) -> Challenge {
        let mut bits = Vec::with_capacity(self.n);
        for w in 0..self.words as usize {
            let v = s.advance();
            let take = (self.n - 64 * w).min(64);
            bits.extend((0..take).map(|i| ((v >> i) & 1) as u8));
        }
        Challenge::new(bits).expect("stream produces valid challenges")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn next_examples() {
        let s = LcgState::new(5, 3, 4, 1).unwrap();
        let (v, s) = lcg_next(s);
        assert_eq!(v, 8);
        assert_eq!(s.current(), 8);
        let (v, _) = lcg_next(s);
        assert_eq!(v, 11);
        let id = LcgState::new(1, 0, 8, 77).unwrap();
        assert_eq!(lcg_next(id).0, 77);
    }

    #[test]
    fn word_examples() {
        assert_eq!(challenge_from_word(0, 4).unwrap().bits(), &[0, 0, 0, 0]);
        assert_eq!(challenge_from_word(15, 4).unwrap().bits(), &[1, 1, 1, 1]);
        assert_eq!(challenge_from_word(5, 4).unwrap().bits(), &[1, 0, 1, 0]);
        assert_eq!(challenge_from_word(u64::MAX, 64).unwrap().bits(), &[1; 64][..]);
        assert!(matches!(challenge_from_word(16, 4), Err(PufError::InvalidInput(_))));
    }

    fn period(s: LcgState) -> u64 {
        let start = s.current();
        let mut s = s;
        let limit = 1u64 << s.bits();
        for t in 1..=limit {
            if s.advance() == start {
                return t;
            }
        }
        u64::MAX
    }

    #[test]
    fn hull_dobell_is_exact_for_small_moduli() {
        for bits in 1..=6u32 {
            let m = 1u64 << bits;
            for a in 1..m {
                for g in 0..m {
                    let s = LcgState::new(a, g, bits, 0).unwrap();
                    assert_eq!(period(s) == m, s.has_full_period(), "a={a} g={g} K={bits}");
                }
            }
        }
    }

    #[test]
    fn defaults_have_full_period() {
        for bits in 1..=16u32 {
            let s = LcgState::with_defaults(bits, 3).unwrap();
            assert!(s.has_full_period());
            assert_eq!(period(s), 1u64 << bits, "K={bits}");
        }
    }

    #[test]
    fn bits_balance_over_one_period() {
        for bits in 1..=12u32 {
            let mut s = LcgState::with_defaults(bits, 0).unwrap();
            let m = 1u64 << bits;
            let mut zeros = vec![0u64; bits as usize];
            for _ in 0..m {
                let v = s.advance();
                for (i, z) in zeros.iter_mut().enumerate() {
                    *z += 1 - ((v >> i) & 1);
                }
            }
            assert!(zeros.iter().all(|&z| z == m / 2), "K={bits}");
        }
    }

    #[test]
    fn jump_matches_stepping() {
        let s = LcgState::with_defaults(64, 99).unwrap();
        let mut t = s;
        for steps in 0..300u64 {
            assert_eq!(s.jumped(steps), t);
            t.advance();
        }
        let small = LcgState::new(5, 3, 4, 1).unwrap();
        assert_eq!(small.jumped(16), small);
    }

    #[test]
    fn streams_are_random_access() {
        for n in [8, 64, 100] {
            let st = ChallengeStream::derived(4, 0, PufKind::Cdc, 2, n, LcgOverrides::default()).unwrap();
            let seq = st.take(50);
            for (i, c) in seq.iter().enumerate() {
                assert_eq!(c, &st.at(i as u64));
                assert_eq!(c.len(), n);
            }
        }
    }

    #[test]
    fn overrides_checked() {
        let bad = LcgOverrides { a: Some(3), g: None };
        assert!(matches!(
            ChallengeStream::derived(1, 0, PufKind::Xor, 0, 16, bad),
            Err(PufError::InvalidConfig(_))
        ));
        let ok = LcgOverrides { a: Some(5), g: Some(1) };
        assert!(ChallengeStream::derived(1, 0, PufKind::Xor, 0, 16, ok).is_ok());
    }

    #[test]
    fn cdc_components_draw_distinct_sequences() {
        let a = ChallengeStream::derived(1, 0, PufKind::Cdc, 0, 32, LcgOverrides::default()).unwrap();
        let b = ChallengeStream::derived(1, 0, PufKind::Cdc, 1, 32, LcgOverrides::default()).unwrap();
        assert_ne!(a.take(20), b.take(20));
    }
}
