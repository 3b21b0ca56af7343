//! Deterministic, splittable randomness and exact binomial machinery.
//!
//! `RngStream` wraps a counter-based ChaCha8 generator: (master seed, stream
//! index, position) fully determines the output, and distinct stream indices
//! give statistically independent streams. Every replica of every experiment
//! owns its own stream, so runs are reproducible at any parallelism level.
//!
//! Binomial draws are exact (no Poisson or normal approximation):
//! below `SKIP_THRESHOLD` expected successes we count successes through
//! geometric gaps, which costs O(1 + Np) per draw and keeps the exploration
//! loop at O(1) expected work per step when Np ~ 1; above the threshold we
//! invert the exact pmf outward from the mode.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::special::ln_choose;

/// Expected-successes cutoff between geometric-skip counting and
/// pmf inversion. Tunable; not a correctness concern.
pub const SKIP_THRESHOLD: f64 = 10.0;

/// A deterministic random stream identified by (master_seed, stream_index).
#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    inner: ChaCha8Rng,
}

/// Deterministically derive the stream with the given index from a master seed.
pub fn derive_stream(master_seed: u64, index: u64) -> RngStream {
    let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
    inner.set_stream(index);
    RngStream {
        master_seed,
        stream_index: index,
        inner,
    }
}

impl RngStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform f64 in [0, 1), 53-bit mantissa.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform f64 in (0, 1]; safe to pass to ln().
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Parameters of a Binomial(trials, success_prob) distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinomialSpec {
    trials: u64,
    success_prob: f64,
}

impl BinomialSpec {
    pub fn new(trials: u64, success_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&success_prob) {
            return Err(Error::InvalidProbability(success_prob));
        }
        Ok(Self {
            trials,
            success_prob,
        })
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn success_prob(&self) -> f64 {
        self.success_prob
    }
}

/// Exact Binomial(N, p) draw.
pub fn sample_binomial(stream: &mut RngStream, spec: &BinomialSpec) -> u64 {
    BinomialSampler::new(spec.success_prob).sample(stream, spec.trials)
}

/// Reusable Binomial(·, p) sampler with the per-p logarithms precomputed,
/// for hot loops that draw at a fixed p with varying trial counts.
#[derive(Clone, Debug)]
pub struct BinomialSampler {
    p: f64,
    // ln(1 - p_eff) for the geometric gaps, where p_eff = min(p, 1-p)
    ln_q_eff: f64,
    flipped: bool,
}

impl BinomialSampler {
    pub fn new(p: f64) -> Self {
        assert!((0.0..=1.0).contains(&p), "p must be in [0,1], got {p}");
        let flipped = p > 0.5;
        let p_eff = if flipped { 1.0 - p } else { p };
        Self {
            p,
            ln_q_eff: (-p_eff).ln_1p(),
            flipped,
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Draw from Binomial(n, p).
    #[inline]
    pub fn sample(&self, stream: &mut RngStream, n: u64) -> u64 {
        if n == 0 {
            return 0;
        }
        let p_eff = if self.flipped { 1.0 - self.p } else { self.p };
        if p_eff == 0.0 {
            return if self.flipped { n } else { 0 };
        }
        let k = if n as f64 * p_eff <= SKIP_THRESHOLD {
            geometric_skip_count(stream, n, self.ln_q_eff)
        } else {
            invert_from_mode(stream, n, p_eff)
        };
        if self.flipped {
            n - k
        } else {
            k
        }
    }
}

/// Geometric gap (failures before a success) for success probability p,
/// where ln_q = ln(1 - p) < 0. Returns f64 so callers can compare against a
/// remaining-trials budget without overflow.
#[inline]
fn geometric_gap(stream: &mut RngStream, ln_q: f64) -> f64 {
    (stream.next_open01().ln() / ln_q).floor()
}

/// Count Binomial(n, p) successes by skipping over geometric gaps.
#[inline]
fn geometric_skip_count(stream: &mut RngStream, n: u64, ln_q: f64) -> u64 {
    let mut remaining = n;
    let mut successes = 0u64;
    loop {
        let gap = geometric_gap(stream, ln_q);
        if gap >= remaining as f64 {
            return successes;
        }
        successes += 1;
        remaining -= gap as u64 + 1;
        if remaining == 0 {
            return successes;
        }
    }
}

/// Exact inversion of the binomial CDF, searching outward from the mode.
///
/// The mode mass is at least 1/(n+1), so anchoring the search there keeps the
/// pmf recurrences away from underflow for any n; the search nevertheless
/// stays an exact inversion of the distribution up to float rounding.
fn invert_from_mode(stream: &mut RngStream, n: u64, p: f64) -> u64 {
    let u = stream.next_f64();
    let q = 1.0 - p;
    let mode = (((n + 1) as f64) * p).floor().min(n as f64) as u64;
    let ln_pm = ln_choose(n, mode) + mode as f64 * p.ln() + (n - mode) as f64 * q.ln();
    let pm = ln_pm.exp();

    // cdf(mode) by downward accumulation; terms decay geometrically away
    // from the mode, so this is O(sqrt(n p q)) work.
    let mut cdf = pm;
    {
        let mut term = pm;
        let mut k = mode;
        while k > 0 && term > cdf * 1e-18 {
            // pmf(k-1) = pmf(k) * k q / ((n-k+1) p)
            term *= (k as f64 * q) / (((n - k + 1) as f64) * p);
            cdf += term;
            k -= 1;
        }
    }

    if u <= cdf {
        // walk down: find smallest k with cdf(k) >= u
        let mut k = mode;
        let mut term = pm;
        let mut acc = cdf;
        while k > 0 {
            let below = acc - term;
            if below < u {
                break;
            }
            acc = below;
            term *= (k as f64 * q) / (((n - k + 1) as f64) * p);
            k -= 1;
        }
        k
    } else {
        // walk up: accumulate until cdf >= u
        let mut k = mode;
        let mut term = pm;
        let mut acc = cdf;
        while k < n && acc < u {
            // pmf(k+1) = pmf(k) * (n-k) p / ((k+1) q)
            term *= ((n - k) as f64 * p) / ((k + 1) as f64 * q);
            acc += term;
            k += 1;
            if term == 0.0 {
                break;
            }
        }
        k
    }
}

/// ln P[Binomial(N, p) = k], computed stably in log space for N up to 1e9.
///
/// Total on all inputs: impossible events (k > N, and the off-atom cases for
/// p in {0, 1}) return -inf.
pub fn log_binom_pmf(k: u64, spec: &BinomialSpec) -> f64 {
    let n = spec.trials;
    let p = spec.success_prob;
    if k > n {
        return f64::NEG_INFINITY;
    }
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p == 1.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_same_sequence() {
        let mut a = derive_stream(42, 0);
        let mut b = derive_stream(42, 0);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = derive_stream(42, 0);
        let mut b = derive_stream(42, 1);
        let xs: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn degenerate_binomials() {
        let mut s = derive_stream(7, 0);
        let zero = BinomialSpec::new(5, 0.0).unwrap();
        let one = BinomialSpec::new(5, 1.0).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_binomial(&mut s, &zero), 0);
            assert_eq!(sample_binomial(&mut s, &one), 5);
        }
    }

    #[test]
    fn sample_stays_in_support() {
        let mut s = derive_stream(3, 9);
        for &(n, p) in &[(1u64, 0.5), (20, 0.1), (500, 0.9), (1000, 0.03)] {
            let spec = BinomialSpec::new(n, p).unwrap();
            for _ in 0..2000 {
                assert!(sample_binomial(&mut s, &spec) <= n);
            }
        }
    }

    #[test]
    fn log_pmf_small_cases() {
        // k=0, N=5, p=0.5 -> ln(1/32)
        let s = BinomialSpec::new(5, 0.5).unwrap();
        assert!((log_binom_pmf(0, &s) - (1.0f64 / 32.0).ln()).abs() < 1e-14);
        // k=1, N=4, p=0.25 -> ln(4 * 0.25 * 0.75^3) = ln(0.421875)
        let s = BinomialSpec::new(4, 0.25).unwrap();
        assert!((log_binom_pmf(1, &s) - 0.421875f64.ln()).abs() < 1e-14);
        // impossible event
        let s = BinomialSpec::new(5, 0.3).unwrap();
        assert_eq!(log_binom_pmf(6, &s), f64::NEG_INFINITY);
    }

    #[test]
    fn spec_rejects_bad_probability() {
        assert!(BinomialSpec::new(5, -0.1).is_err());
        assert!(BinomialSpec::new(5, 1.1).is_err());
        assert!(BinomialSpec::new(5, f64::NAN).is_err());
    }
}
