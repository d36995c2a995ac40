//! Gaussian statistics of the received count under intersymbol interference.
//!
//! For a bit history `b_1..b_i` (oldest first, `b_i` the current bit) and `M`
//! molecules per emitted 1, the count `C_i` is modelled as `N(μ, σ²)` with
//!
//! ```text
//! μ  = M · Σ_{k=1}^{i} p_k · b_{i−k+1}
//! σ² = σ_c² + M · Σ_{k=1}^{i} p_k (1 − p_k) · b_{i−k+1}
//! ```
//!
//! Candidate histories of length `i − 1` are indexed by
//! `j = Σ_{m=1}^{i−1} b_m · 2^{m−1}`, so the oldest bit is the least
//! significant one.

use crate::channel::HittingProfile;
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};

/// Largest symbol index for which candidate histories are enumerated.
pub const ENUMERATION_CAP: usize = 21;

/// Prior probability `P[b = 1]`, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prior(f64);

impl Prior {
    pub fn new(p1: f64) -> Result<Self> {
        if !(p1 > 0.0 && p1 < 1.0) {
            return Err(Error::invalid("p1", format!("{p1} is not in (0, 1)")));
        }
        Ok(Self(p1))
    }

    pub fn uniform() -> Self {
        Self(0.5)
    }

    /// `P[b = 1]`.
    pub fn one(&self) -> f64 {
        self.0
    }

    /// `P[b = 0]`.
    pub fn zero(&self) -> f64 {
        1.0 - self.0
    }

    pub fn of(&self, bit: bool) -> f64 {
        if bit {
            self.one()
        } else {
            self.zero()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianStats {
    pub mean: f64,
    pub var: f64,
}

impl GaussianStats {
    pub fn new(mean: f64, var: f64) -> Self {
        Self { mean, var }
    }

    pub fn std_dev(&self) -> f64 {
        self.var.sqrt()
    }
}

/// Additive counting noise, independent of the bit history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    sigma_c2: f64,
}

impl NoiseParams {
    pub fn new(sigma_c2: f64) -> Result<Self> {
        if !(sigma_c2 >= 0.0 && sigma_c2.is_finite()) {
            return Err(Error::invalid(
                "sigma_c2",
                format!("{sigma_c2} must be >= 0"),
            ));
        }
        Ok(Self { sigma_c2 })
    }

    pub fn reference() -> Self {
        Self { sigma_c2: 1.0 }
    }

    pub fn sigma_c2(&self) -> f64 {
        self.sigma_c2
    }
}

/// Stats of `C_i` for `history = b_1..b_i`.
pub fn received_stats(
    history: &[bool],
    m: f64,
    profile: &HittingProfile,
    noise: NoiseParams,
) -> Result<GaussianStats> {
    let i = history.len();
    if i > profile.len() {
        return Err(Error::InsufficientMemory {
            needed: i,
            available: profile.len(),
        });
    }
    let Some((&current, past)) = history.split_last() else {
        return Ok(GaussianStats::new(0.0, noise.sigma_c2));
    };
    let (mut mean, mut var) = isi_sums(past, m, profile);
    var += noise.sigma_c2;
    if current {
        let p1 = profile.p()[0];
        mean += m * p1;
        var += m * p1 * (1.0 - p1);
    }
    Ok(GaussianStats::new(mean, var))
}

/// Mean and variance contributed by `past` (oldest first) to the slot that
/// follows it, accumulated from `k = 2` upward.
pub(crate) fn isi_sums(past: &[bool], m: f64, profile: &HittingProfile) -> (f64, f64) {
    let p = profile.p();
    let (mut mean, mut var) = (0.0, 0.0);
    for (k, &b) in past.iter().rev().enumerate() {
        if b {
            let pk = p[k + 1];
            mean += m * pk;
            var += m * pk * (1.0 - pk);
        }
    }
    (mean, var)
}

/// One hypothesized history `d` with its conditioning bit.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSeq {
    /// `b_1..b_{i−1}`, oldest first.
    pub history: Vec<bool>,
    pub bit: bool,
    /// Prior probability of `history ‖ bit`.
    pub prob: f64,
    pub stats: GaussianStats,
}

impl CandidateSeq {
    /// `history ‖ bit`.
    pub fn bits(&self) -> Vec<bool> {
        let mut bits = self.history.clone();
        bits.push(self.bit);
        bits
    }
}

/// History bits of candidate `j` at symbol index `i`, oldest first.
pub fn history_of(j: usize, i: usize) -> Vec<bool> {
    (0..i.saturating_sub(1))
        .map(|m| (j >> m) & 1 == 1)
        .collect()
}

/// All `2^{i−1}` candidates for symbol `i` conditioned on `bit`, ordered by `j`.
pub fn enumerate_candidates(
    i: usize,
    bit: bool,
    prior: Prior,
    m: f64,
    profile: &HittingProfile,
    noise: NoiseParams,
) -> Result<Vec<CandidateSeq>> {
    let level = IsiLevel::build(i, m, profile, prior)?;
    Ok((0..level.len())
        .map(|j| CandidateSeq {
            history: history_of(j, i),
            bit,
            prob: level.prob[j] * prior.of(bit),
            stats: level.stats(j, bit, m, profile, noise),
        })
        .collect())
}

/// ISI contributions and history probabilities of every candidate at one
/// symbol index, built incrementally from the previous index.
///
/// Moving from `i − 1` to `i` prepends one older bit: candidate `j` at `i`
/// extends candidate `j >> 1` at `i − 1` with `b_1 = j & 1`, which sees `p_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsiLevel {
    i: usize,
    mean: Vec<f64>,
    var: Vec<f64>,
    prob: Vec<f64>,
}

impl IsiLevel {
    /// Level `i = 1`: the empty history.
    pub fn first() -> Self {
        Self {
            i: 1,
            mean: vec![0.0],
            var: vec![0.0],
            prob: vec![1.0],
        }
    }

    pub fn build(i: usize, m: f64, profile: &HittingProfile, prior: Prior) -> Result<Self> {
        if i == 0 {
            return Err(Error::invalid("i", "symbol indices start at 1"));
        }
        check_index(i, profile)?;
        let mut level = Self::first();
        while level.i < i {
            level = level.next(m, profile, prior)?;
        }
        Ok(level)
    }

    pub fn next(&self, m: f64, profile: &HittingProfile, prior: Prior) -> Result<Self> {
        let i = self.i + 1;
        check_index(i, profile)?;
        let pi = profile.p()[i - 1];
        let (dm, dv) = (m * pi, m * pi * (1.0 - pi));
        let n = 1usize << (i - 1);
        let mut mean = Vec::with_capacity(n);
        let mut var = Vec::with_capacity(n);
        let mut prob = Vec::with_capacity(n);
        for j in 0..n {
            let parent = j >> 1;
            if j & 1 == 1 {
                mean.push(self.mean[parent] + dm);
                var.push(self.var[parent] + dv);
                prob.push(self.prob[parent] * prior.one());
            } else {
                mean.push(self.mean[parent]);
                var.push(self.var[parent]);
                prob.push(self.prob[parent] * prior.zero());
            }
        }
        Ok(Self { i, mean, var, prob })
    }

    pub fn index(&self) -> usize {
        self.i
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    /// ISI mean of candidate `j`, excluding the current bit.
    pub fn isi_mean(&self, j: usize) -> f64 {
        self.mean[j]
    }

    /// ISI variance of candidate `j`, excluding noise and the current bit.
    pub fn isi_var(&self, j: usize) -> f64 {
        self.var[j]
    }

    pub fn prob(&self, j: usize) -> f64 {
        self.prob[j]
    }

    pub fn stats(
        &self,
        j: usize,
        bit: bool,
        m: f64,
        profile: &HittingProfile,
        noise: NoiseParams,
    ) -> GaussianStats {
        let mut mean = self.mean[j];
        let mut var = self.var[j] + noise.sigma_c2;
        if bit {
            let p1 = profile.p()[0];
            mean += m * p1;
            var += m * p1 * (1.0 - p1);
        }
        GaussianStats::new(mean, var)
    }
}

fn check_index(i: usize, profile: &HittingProfile) -> Result<()> {
    if i > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            index: i,
            cap: ENUMERATION_CAP,
        });
    }
    if i > profile.len() {
        return Err(Error::InsufficientMemory {
            needed: i,
            available: profile.len(),
        });
    }
    Ok(())
}

/// One draw of `N(mean, var)`, clamped at 0.
pub fn sample_received_count<R: Rng + ?Sized>(stats: GaussianStats, rng: &mut R) -> f64 {
    if stats.var <= 0.0 {
        return stats.mean.max(0.0);
    }
    let z: f64 = rng.sample(StandardNormal);
    (stats.mean + stats.var.sqrt() * z).max(0.0)
}

/// Slot-wise mean and variance of the count induced by arbitrary emitted
/// counts `emitted[0..n]` (one molecule type), without counting noise.
/// Contributions from slots beyond the profile are dropped.
pub fn expected_counts(emitted: &[f64], profile: &HittingProfile) -> (Vec<f64>, Vec<f64>) {
    let p = profile.p();
    let k = p.len().min(emitted.len());
    let q: Vec<f64> = p[..k].iter().map(|&x| x * (1.0 - x)).collect();
    if emitted.len().saturating_mul(k) <= DIRECT_LIMIT {
        (
            convolve_direct(emitted, &p[..k]),
            convolve_direct(emitted, &q),
        )
    } else {
        convolve_fft_pair(emitted, &p[..k], &q)
    }
}

/// Draws received counts for one molecule type given its emitted counts.
pub fn synthesize_counts<R: Rng + ?Sized>(
    emitted: &[f64],
    profile: &HittingProfile,
    noise: NoiseParams,
    rng: &mut R,
) -> Vec<f64> {
    let (mean, var) = expected_counts(emitted, profile);
    mean.iter()
        .zip(&var)
        .map(|(&mu, &v)| sample_received_count(GaussianStats::new(mu, v + noise.sigma_c2), rng))
        .collect()
}

const DIRECT_LIMIT: usize = 1 << 21;

fn convolve_direct(x: &[f64], h: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut acc = 0.0;
            for (k, &hk) in h.iter().enumerate().take(i + 1) {
                let xi = x[i - k];
                if xi != 0.0 {
                    acc += hk * xi;
                }
            }
            acc
        })
        .collect()
}

/// Truncated causal convolutions `x * h1` and `x * h2` via one real-pair FFT.
fn convolve_fft_pair(x: &[f64], h1: &[f64], h2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let size = (n + h1.len().max(h2.len())).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    let mut xs: Vec<Complex<f64>> = (0..size)
        .map(|i| Complex::new(x.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    // Pack both kernels into one complex sequence h1 + i·h2.
    let mut hs: Vec<Complex<f64>> = (0..size)
        .map(|i| {
            Complex::new(
                h1.get(i).copied().unwrap_or(0.0),
                h2.get(i).copied().unwrap_or(0.0),
            )
        })
        .collect();
    fwd.process(&mut xs);
    fwd.process(&mut hs);
    // x is real, so X·(H1 + iH2) inverts to (x*h1) + i(x*h2).
    for (a, b) in xs.iter_mut().zip(&hs) {
        *a *= *b;
    }
    inv.process(&mut xs);
    let scale = 1.0 / size as f64;
    xs[..n]
        .iter()
        .map(|c| ((c.re * scale).max(0.0), (c.im * scale).max(0.0)))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example_profile() -> HittingProfile {
        HittingProfile::from_probabilities(vec![0.1875, 0.0777], 0.2).unwrap()
    }

    fn stats(bits: &[bool]) -> GaussianStats {
        received_stats(bits, 100.0, &example_profile(), NoiseParams::reference()).unwrap()
    }

    #[test]
    fn example_histories() {
        let s = stats(&[false, false]);
        assert_eq!((s.mean, s.var), (0.0, 1.0));
        let s = stats(&[true, true]);
        assert!((s.mean - 26.52).abs() < 1e-10);
        assert!((s.var - 23.40).abs() < 5e-3);
        let s = stats(&[false, true]);
        assert!((s.mean - 18.75).abs() < 1e-12);
        assert!((s.var - 16.234375).abs() < 1e-12);
        let s = stats(&[true, false]);
        assert!((s.mean - 7.77).abs() < 1e-12);
    }

    #[test]
    fn history_longer_than_profile_is_rejected() {
        let err = received_stats(
            &[true; 3],
            100.0,
            &example_profile(),
            NoiseParams::reference(),
        );
        assert_eq!(
            err,
            Err(Error::InsufficientMemory {
                needed: 3,
                available: 2
            })
        );
    }

    #[test]
    fn parameter_validation() {
        assert!(Prior::new(0.0).is_err());
        assert!(Prior::new(1.0).is_err());
        assert!(NoiseParams::new(-1.0).is_err());
        assert_eq!(NoiseParams::new(0.0).unwrap().sigma_c2(), 0.0);
    }

    #[test]
    fn candidate_indexing() {
        assert_eq!(history_of(1, 3), vec![true, false]);
        let profile = ChannelParams::reference().hitting_probabilities(10);
        let noise = NoiseParams::reference();
        let c = enumerate_candidates(1, true, Prior::uniform(), 100.0, &profile, noise).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].prob, 0.5);
        assert!(c[0].history.is_empty());

        let c = enumerate_candidates(3, false, Prior::uniform(), 100.0, &profile, noise).unwrap();
        assert_eq!(c[1].bits(), vec![true, false, false]);

        let c0 = enumerate_candidates(2, false, Prior::uniform(), 100.0, &profile, noise).unwrap();
        let c1 = enumerate_candidates(2, true, Prior::uniform(), 100.0, &profile, noise).unwrap();
        for c in c0.iter().chain(&c1) {
            assert_eq!(c.prob, 0.25);
        }
    }

    #[test]
    fn enumeration_cap() {
        let profile = ChannelParams::reference().hitting_probabilities(30);
        let r = enumerate_candidates(
            22,
            false,
            Prior::uniform(),
            1.0,
            &profile,
            NoiseParams::reference(),
        );
        assert_eq!(r, Err(Error::EnumerationCap { index: 22, cap: 21 }));
    }

    #[test]
    fn memoized_level_matches_direct_stats() {
        let profile = ChannelParams::reference().hitting_probabilities(12);
        let noise = NoiseParams::reference();
        let prior = Prior::new(0.3).unwrap();
        let level = IsiLevel::build(9, 250.0, &profile, prior).unwrap();
        for j in 0..level.len() {
            for bit in [false, true] {
                let mut bits = history_of(j, 9);
                bits.push(bit);
                let direct = received_stats(&bits, 250.0, &profile, noise).unwrap();
                let memo = level.stats(j, bit, 250.0, &profile, noise);
                assert!((direct.mean - memo.mean).abs() < 1e-12);
                assert!((direct.var - memo.var).abs() < 1e-12);
            }
            let ones = history_of(j, 9).iter().filter(|&&b| b).count() as i32;
            let want = 0.3f64.powi(ones) * 0.7f64.powi(8 - ones);
            assert!((level.prob(j) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn clamped_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            sample_received_count(GaussianStats::new(0.0, 0.0), &mut rng),
            0.0
        );
        let s = GaussianStats::new(0.0, 4.0);
        assert!((0..1000).all(|_| sample_received_count(s, &mut rng) >= 0.0));
    }

    #[test]
    fn fft_and_direct_convolution_agree() {
        let profile = ChannelParams::reference().hitting_probabilities(3000);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..3000)
            .map(|_| if rng.random::<bool>() { 500.0 } else { 0.0 })
            .collect();
        let (m_fft, v_fft) = convolve_fft_pair(
            &x,
            profile.p(),
            &profile
                .p()
                .iter()
                .map(|p| p * (1.0 - p))
                .collect::<Vec<_>>(),
        );
        let m_dir = convolve_direct(&x, profile.p());
        for (a, b) in m_fft.iter().zip(&m_dir) {
            assert!((a - b).abs() < 1e-8, "{a} {b}");
        }
        let (m, v) = expected_counts(&x, &profile);
        assert_eq!(m.len(), 3000);
        assert!((m[2999] - m_fft[2999]).abs() < 1e-8);
        assert!((v[2999] - v_fft[2999]).abs() < 1e-8);
    }

    #[test]
    fn expected_counts_match_received_stats() {
        let profile = ChannelParams::reference().hitting_probabilities(6);
        let bits = [true, false, true, true, false, true];
        let emitted: Vec<f64> = bits.iter().map(|&b| if b { 40.0 } else { 0.0 }).collect();
        let (mean, var) = expected_counts(&emitted, &profile);
        for i in 1..=bits.len() {
            let s =
                received_stats(&bits[..i], 40.0, &profile, NoiseParams::new(0.0).unwrap()).unwrap();
            assert!((mean[i - 1] - s.mean).abs() < 1e-12);
            assert!((var[i - 1] - s.var).abs() < 1e-12);
        }
    }
}
