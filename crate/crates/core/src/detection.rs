//! Receive-side decoders.
//!
//! Every rule decides 0 on exact equality with its threshold.

use crate::channel::HittingProfile;
use crate::error::{Error, Result};
use crate::isi::{isi_sums, GaussianStats, NoiseParams, Prior};
use crate::threshold::{pairwise_threshold, ThresholdSchedule};
use std::collections::VecDeque;
use std::io::{self, Write};

/// Per-slot counts of both molecule types.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedFrame {
    counts_a: Vec<f64>,
    counts_b: Vec<f64>,
}

impl ReceivedFrame {
    pub fn new(counts_a: Vec<f64>, counts_b: Vec<f64>) -> Result<Self> {
        if counts_a.len() != counts_b.len() {
            return Err(Error::LengthMismatch(counts_a.len(), counts_b.len()));
        }
        if let Some(bad) = counts_a.iter().chain(&counts_b).find(|c| !(**c >= 0.0)) {
            return Err(Error::invalid(
                "counts",
                format!("{bad} is not a valid count"),
            ));
        }
        Ok(Self { counts_a, counts_b })
    }

    /// Frame with type-A counts only.
    pub fn single(counts: Vec<f64>) -> Result<Self> {
        let zeros = vec![0.0; counts.len()];
        Self::new(counts, zeros)
    }

    pub fn counts_a(&self) -> &[f64] {
        &self.counts_a
    }

    pub fn counts_b(&self) -> &[f64] {
        &self.counts_b
    }

    pub fn len(&self) -> usize {
        self.counts_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts_a.is_empty()
    }
}

/// `count > γ` slot by slot.
pub fn decide(counts: &[f64], thresholds: &[f64]) -> Vec<bool> {
    counts.iter().zip(thresholds).map(|(c, g)| c > g).collect()
}

/// Type-A counts against a per-index schedule.
pub fn decode_threshold(frame: &ReceivedFrame, schedule: &ThresholdSchedule) -> Result<Vec<bool>> {
    let gammas = schedule.materialize(frame.len())?;
    Ok(decide(&frame.counts_a, &gammas))
}

/// 1 wherever more B than A molecules arrived.
pub fn decode_bmosk(frame: &ReceivedFrame) -> Vec<bool> {
    frame
        .counts_a
        .iter()
        .zip(&frame.counts_b)
        .map(|(a, b)| b > a)
        .collect()
}

/// 1 wherever either stream exceeds its own threshold.
pub fn decode_mtsk(
    frame: &ReceivedFrame,
    schedule_a: &ThresholdSchedule,
    schedule_b: &ThresholdSchedule,
) -> Result<Vec<bool>> {
    let ga = schedule_a.materialize(frame.len())?;
    let gb = schedule_b.materialize(frame.len())?;
    Ok(frame
        .counts_a
        .iter()
        .zip(&frame.counts_b)
        .zip(ga.iter().zip(&gb))
        .map(|((a, b), (ta, tb))| a > ta || b > tb)
        .collect())
}

/// Decision feedback state: the last `S − 1` decided bits, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct DffState {
    memory: VecDeque<bool>,
    s: usize,
}

impl DffState {
    /// Cold start: the channel holds no molecules, so the memory is all zeros.
    pub fn new(s: usize) -> Result<Self> {
        if s < 2 {
            return Err(Error::invalid("S", format!("{s} must be >= 2")));
        }
        Ok(Self {
            memory: std::iter::repeat_n(false, s - 1).collect(),
            s,
        })
    }

    /// State remembering `bits` (oldest first), zero-padded or truncated to
    /// the last `S − 1`.
    pub fn with_memory(s: usize, bits: &[bool]) -> Result<Self> {
        let mut state = Self::new(s)?;
        for &b in bits {
            state.push(b);
        }
        Ok(state)
    }

    pub fn memory_length(&self) -> usize {
        self.s
    }

    pub fn memory(&self) -> Vec<bool> {
        self.memory.iter().copied().collect()
    }

    /// Stats of the current count given the remembered bits, for a current
    /// bit of 0 and 1.
    pub fn stats(
        &self,
        m: f64,
        profile: &HittingProfile,
        noise: NoiseParams,
    ) -> (GaussianStats, GaussianStats) {
        let past = self.memory();
        let (mean, isi_var) = isi_sums(&past, m, profile);
        let var0 = isi_var + noise.sigma_c2();
        let p1 = profile.p()[0];
        (
            GaussianStats::new(mean, var0),
            GaussianStats::new(mean + m * p1, var0 + m * p1 * (1.0 - p1)),
        )
    }

    pub fn threshold(
        &self,
        m: f64,
        profile: &HittingProfile,
        noise: NoiseParams,
        prior: Prior,
    ) -> Result<f64> {
        let (s0, s1) = self.stats(m, profile, noise);
        pairwise_threshold(s0, s1, prior.zero(), prior.one())
    }

    pub fn push(&mut self, bit: bool) {
        self.memory.pop_front();
        self.memory.push_back(bit);
    }
}

/// Decision feedback decoding with receiver memory `S`. Returns the decided
/// bits and the threshold used at each slot.
pub fn dff_decode_with_thresholds(
    counts: &[f64],
    m: f64,
    profile: &HittingProfile,
    noise: NoiseParams,
    s: usize,
    prior: Prior,
) -> Result<(Vec<bool>, Vec<f64>)> {
    if s > profile.len() {
        return Err(Error::MemoryTooLong {
            k: s,
            available: profile.len(),
        });
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::invalid("M", format!("{m} must be > 0")));
    }
    let mut state = DffState::new(s)?;
    let mut bits = Vec::with_capacity(counts.len());
    let mut gammas = Vec::with_capacity(counts.len());
    for &c in counts {
        let g = state.threshold(m, profile, noise, prior)?;
        let b = c > g;
        state.push(b);
        bits.push(b);
        gammas.push(g);
    }
    Ok((bits, gammas))
}

pub fn dff_decode(
    counts: &[f64],
    m: f64,
    profile: &HittingProfile,
    noise: NoiseParams,
    s: usize,
    prior: Prior,
) -> Result<Vec<bool>> {
    dff_decode_with_thresholds(counts, m, profile, noise, s, prior).map(|(bits, _)| bits)
}

/// Constant threshold with the fewest decoding errors against `truth`.
///
/// Candidates are one below the smallest count, the midpoints between
/// consecutive distinct counts, and the largest count; ties go to the
/// smallest candidate.
pub fn empirical_threshold(counts: &[f64], truth: &[bool]) -> Result<f64> {
    if counts.len() != truth.len() {
        return Err(Error::LengthMismatch(counts.len(), truth.len()));
    }
    if counts.is_empty() {
        return Err(Error::invalid("counts", "at least one count is required"));
    }
    if let Some(bad) = counts.iter().find(|c| !c.is_finite()) {
        return Err(Error::invalid("counts", format!("{bad} is not finite")));
    }
    let mut pairs: Vec<(f64, bool)> = counts.iter().copied().zip(truth.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Below every count all slots decide 1, so each 0 is an error.
    let mut errors = truth.iter().filter(|&&t| !t).count() as i64;
    let mut best = (errors, pairs[0].0 - 1.0);
    let mut k = 0;
    while k < pairs.len() {
        let value = pairs[k].0;
        while k < pairs.len() && pairs[k].0 == value {
            errors += if pairs[k].1 { 1 } else { -1 };
            k += 1;
        }
        let gamma = match pairs.get(k) {
            Some(&(next, _)) => 0.5 * (value + next),
            None => value,
        };
        if errors < best.0 {
            best = (errors, gamma);
        }
    }
    Ok(best.1)
}

/// Number of positions where `a` and `b` differ.
pub fn hamming(a: &[bool], b: &[bool]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// `index,bit` rows, 1-based.
pub fn write_bits_csv<W: Write>(mut out: W, bits: &[bool]) -> io::Result<()> {
    writeln!(out, "index,bit")?;
    for (i, &b) in bits.iter().enumerate() {
        writeln!(out, "{},{}", i + 1, u8::from(b))?;
    }
    Ok(())
}
