//! Deterministic random number generation.
//!
//! All randomness comes from [`SplitMix64`]: a 64-bit counter advanced by the
//! golden-ratio increment `0x9E3779B97F4A7C15`, finalised with
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! (wrapping arithmetic). The derived distributions below consume exactly
//! one raw draw each, so every logical draw maps to one 64-bit value.

/// Source of raw 64-bit draws.
pub trait DrawSource: Send {
    fn next_u64(&mut self) -> u64;
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }
}

impl DrawSource for SplitMix64 {
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Returns the same value forever. Useful for forcing identical tests.
#[derive(Debug, Clone)]
pub struct ConstantSource(pub u64);

impl DrawSource for ConstantSource {
    fn next_u64(&mut self) -> u64 {
        self.0
    }
}

/// Replays a recorded sequence, then continues with a fallback source.
#[derive(Debug, Clone)]
pub struct ScriptedSource {
    script: std::collections::VecDeque<u64>,
    fallback: SplitMix64,
}

impl ScriptedSource {
    pub fn new(script: impl IntoIterator<Item = u64>) -> Self {
        Self { script: script.into_iter().collect(), fallback: SplitMix64::new(0) }
    }

    pub fn remaining(&self) -> usize {
        self.script.len()
    }
}

impl DrawSource for ScriptedSource {
    fn next_u64(&mut self) -> u64 {
        self.script.pop_front().unwrap_or_else(|| self.fallback.next_u64())
    }
}

/// Maps a raw draw to `[0, n)` by multiply-shift. One draw, no rejection;
/// the bias is at most `n / 2^64`.
pub fn bounded(raw: u64, n: u64) -> u64 {
    ((raw as u128 * n as u128) >> 64) as u64
}

/// Maps a raw draw to the inclusive range `[lo, hi]`. Caller ensures `lo <= hi`.
pub fn in_range(raw: u64, lo: i64, hi: i64) -> i64 {
    debug_assert!(lo <= hi);
    let span = (hi as i128 - lo as i128 + 1) as u128;
    let offset = (raw as u128 * span) >> 64;
    (lo as i128 + offset as i128) as i64
}

/// Uniform float in `[0, 1)` from the top 53 bits.
pub fn unit_f64(raw: u64) -> f64 {
    (raw >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// The per-run generator for test generation. Every raw draw is appended to
/// the active trace, whose hash identifies the test.
pub struct RngHandle {
    source: Box<dyn DrawSource>,
    trace: Vec<u64>,
}

impl RngHandle {
    pub fn new(source: Box<dyn DrawSource>) -> Self {
        Self { source, trace: Vec::new() }
    }

    pub fn seeded(seed: u64) -> Self {
        Self::new(Box::new(SplitMix64::new(seed)))
    }

    pub fn draw(&mut self) -> u64 {
        let v = self.source.next_u64();
        self.trace.push(v);
        v
    }

    /// Uniform index in `[0, n)`; `n` must be positive.
    pub fn draw_index(&mut self, n: usize) -> usize {
        bounded(self.draw(), n as u64) as usize
    }

    pub fn draw_range(&mut self, lo: i64, hi: i64) -> i64 {
        in_range(self.draw(), lo, hi)
    }

    pub fn draw_unit(&mut self) -> f64 {
        unit_f64(self.draw())
    }

    pub fn trace(&self) -> &[u64] {
        &self.trace
    }

    /// Starts a fresh trace, returning the old one.
    pub fn take_trace(&mut self) -> Vec<u64> {
        std::mem::take(&mut self.trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_vector_seed_zero() {
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn reference_vector_seed_1234567() {
        let mut r = SplitMix64::new(1234567);
        let got: Vec<u64> = (0..5).map(|_| r.next_u64()).collect();
        assert_eq!(
            got,
            vec![
                6457827717110365317,
                3203168211198807973,
                9817491932198370423,
                4593380528125082431,
                16408922859458223821,
            ]
        );
    }

    #[test]
    fn range_edges() {
        assert_eq!(in_range(0, 1, 10), 1);
        assert_eq!(in_range(u64::MAX, 1, 10), 10);
        assert_eq!(in_range(12345, 5, 5), 5);
        assert_eq!(in_range(u64::MAX, i64::MIN, i64::MAX), i64::MAX);
        assert_eq!(in_range(0, i64::MIN, i64::MAX), i64::MIN);
        assert_eq!(bounded(u64::MAX, 7), 6);
        assert!(unit_f64(u64::MAX) < 1.0);
    }
}
