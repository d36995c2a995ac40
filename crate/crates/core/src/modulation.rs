//! Transmit-side encoders and power adjustment.
//!
//! - BCSK: a 1 emits `M` molecules of type A, a 0 emits nothing.
//! - BMoSK: a 1 emits `M` of type B, a 0 emits `M` of type A.
//! - MTSK: a 0 emits nothing; a 1 emits type A if the next bit is also 1 and
//!   type B otherwise, so every run of ones ends in exactly one B. The type
//!   of slot `i` depends on bit `i + 1`, so frames carry a one-slot latency.

use crate::channel::HittingProfile;
use crate::error::{Error, Result};
use crate::isi::Prior;
use std::fmt;
use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Molecule {
    A,
    B,
}

impl fmt::Display for Molecule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Molecule::A => "A",
            Molecule::B => "B",
        })
    }
}

/// What one slot emits. `count` is zero exactly when `molecule` is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub molecule: Option<Molecule>,
    pub count: f64,
}

impl Emission {
    pub const NONE: Emission = Emission {
        molecule: None,
        count: 0.0,
    };

    pub fn of(molecule: Molecule, count: f64) -> Self {
        if count > 0.0 {
            Self {
                molecule: Some(molecule),
                count,
            }
        } else {
            Self::NONE
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionFrame {
    slots: Vec<Emission>,
    latency: usize,
}

impl EmissionFrame {
    pub fn new(slots: Vec<Emission>, latency: usize) -> Result<Self> {
        for (i, e) in slots.iter().enumerate() {
            let ok =
                e.count.is_finite() && e.count >= 0.0 && (e.count == 0.0) == e.molecule.is_none();
            if !ok {
                return Err(Error::invalid(
                    "slots",
                    format!(
                        "slot {} has type {:?} with count {}",
                        i + 1,
                        e.molecule,
                        e.count
                    ),
                ));
            }
        }
        Ok(Self { slots, latency })
    }

    pub fn slots(&self) -> &[Emission] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Slots between a bit entering the encoder and its emission.
    pub fn latency(&self) -> usize {
        self.latency
    }

    pub fn types(&self) -> Vec<Option<Molecule>> {
        self.slots.iter().map(|e| e.molecule).collect()
    }

    /// Per-slot emitted count of one molecule type.
    pub fn emitted(&self, molecule: Molecule) -> Vec<f64> {
        self.slots
            .iter()
            .map(|e| {
                if e.molecule == Some(molecule) {
                    e.count
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn total_emitted(&self) -> f64 {
        self.slots.iter().map(|e| e.count).sum()
    }

    /// Mean emitted molecules per slot.
    pub fn average_power(&self) -> f64 {
        if self.slots.is_empty() {
            0.0
        } else {
            self.total_emitted() / self.slots.len() as f64
        }
    }

    /// `slot,type,count` rows with type `A`, `B` or `-`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "slot,type,count")?;
        for (i, e) in self.slots.iter().enumerate() {
            let t = e.molecule.map_or("-".to_string(), |m| m.to_string());
            writeln!(out, "{},{},{}", i + 1, t, e.count)?;
        }
        Ok(())
    }
}

fn check_m(m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("M", format!("{m} must be > 0")))
    }
}

pub fn encode_bcsk(bits: &[bool], m: f64) -> Result<EmissionFrame> {
    check_m(m)?;
    let slots = bits
        .iter()
        .map(|&b| {
            if b {
                Emission::of(Molecule::A, m)
            } else {
                Emission::NONE
            }
        })
        .collect();
    EmissionFrame::new(slots, 0)
}

pub fn encode_bmosk(bits: &[bool], m: f64) -> Result<EmissionFrame> {
    check_m(m)?;
    let slots = bits
        .iter()
        .map(|&b| Emission::of(if b { Molecule::B } else { Molecule::A }, m))
        .collect();
    EmissionFrame::new(slots, 0)
}

/// Molecule type MTSK assigns to each slot.
pub fn mtsk_types(bits: &[bool]) -> Vec<Option<Molecule>> {
    (0..bits.len())
        .map(|i| match (bits[i], bits.get(i + 1)) {
            (false, _) => None,
            (true, Some(true)) => Some(Molecule::A),
            (true, _) => Some(Molecule::B),
        })
        .collect()
}

pub fn encode_mtsk(bits: &[bool], m: f64) -> Result<EmissionFrame> {
    check_m(m)?;
    let slots = mtsk_types(bits)
        .into_iter()
        .map(|t| t.map_or(Emission::NONE, |t| Emission::of(t, m)))
        .collect();
    EmissionFrame::new(slots, 1)
}

/// MTSK per-type indicator streams `(A, B)`.
pub fn split_streams(bits: &[bool]) -> (Vec<bool>, Vec<bool>) {
    mtsk_types(bits)
        .into_iter()
        .map(|t| (t == Some(Molecule::A), t == Some(Molecule::B)))
        .unzip()
}

/// Priors of a 1 on the MTSK `(A, B)` streams: `(p1², p1·(1 − p1))`.
pub fn stream_priors(prior: Prior) -> Result<(Prior, Prior)> {
    let p1 = prior.one();
    Ok((Prior::new(p1 * p1)?, Prior::new(p1 * (1.0 - p1))?))
}

/// Power-adjustment settings: residual memory `K` and nominal count `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaConfig {
    k: usize,
    m: f64,
}

impl PaConfig {
    pub fn new(k: usize, m: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("K", format!("{k} must be >= 2")));
        }
        check_m(m)?;
        Ok(Self { k, m })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> f64 {
        self.m
    }
}

/// How the adjusted count is derived from the residual estimate `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PaRule {
    /// `M_i = max(0, (p_1·M − R) / p_1)`, so `p_1·M_i + R = p_1·M`.
    #[default]
    Normalized,
    /// `M_i = max(0, p_1·M − R)` whenever `R > 0`, `M` otherwise.
    Literal,
}

/// Lowers each emission by the residual molecules of the previous `K − 1`
/// emissions of the same type, so the expected count induced in the
/// current slot stays at `p_1·M`.
pub fn power_adjust(
    frame: &EmissionFrame,
    profile: &HittingProfile,
    pa: PaConfig,
    rule: PaRule,
) -> Result<EmissionFrame> {
    if pa.k > profile.len() {
        return Err(Error::MemoryTooLong {
            k: pa.k,
            available: profile.len(),
        });
    }
    let p = profile.p();
    let p1 = p[0];
    let target = p1 * pa.m;
    let mut slots = frame.slots.clone();
    for molecule in [Molecule::A, Molecule::B] {
        let mut sent = vec![0.0; slots.len()];
        for i in 0..slots.len() {
            if slots[i].molecule != Some(molecule) {
                continue;
            }
            let residual: f64 = (2..=pa.k)
                .take_while(|&j| j <= i + 1)
                .map(|j| p[j - 1] * sent[i + 1 - j])
                .sum();
            let count = match rule {
                PaRule::Normalized => ((target - residual) / p1).max(0.0),
                PaRule::Literal if residual == 0.0 => pa.m,
                PaRule::Literal => (target - residual).max(0.0),
            };
            sent[i] = count;
            slots[i] = Emission::of(molecule, count);
        }
    }
    EmissionFrame::new(slots, frame.latency)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;

    fn bits(s: &str) -> Vec<bool> {
        s.bytes().map(|c| c == b'1').collect()
    }

    #[test]
    fn bcsk_and_bmosk() {
        let f = encode_bcsk(&bits("101"), 50.0).unwrap();
        assert_eq!(
            f.slots(),
            &[
                Emission::of(Molecule::A, 50.0),
                Emission::NONE,
                Emission::of(Molecule::A, 50.0)
            ]
        );
        assert!(encode_bcsk(&bits("0000"), 5.0)
            .unwrap()
            .slots()
            .iter()
            .all(|e| *e == Emission::NONE));
        assert!(encode_bcsk(&bits("1"), 0.0).is_err());

        let f = encode_bmosk(&bits("10"), 7.0).unwrap();
        assert_eq!(f.types(), vec![Some(Molecule::B), Some(Molecule::A)]);
        assert_eq!(f.total_emitted(), 14.0);
        assert_eq!(f.emitted(Molecule::B), vec![7.0, 0.0]);
    }

    #[test]
    fn mtsk_reference_sequence() {
        let b = bits("0111010110100110");
        let f = encode_mtsk(&b, 10.0).unwrap();
        let want: String = f
            .types()
            .iter()
            .map(|t| t.map_or('x', |m| if m == Molecule::A { 'A' } else { 'B' }))
            .collect();
        assert_eq!(want, "xAABxBxABxBxxABx");
        assert_eq!(f.latency(), 1);
        let (a, bb) = split_streams(&b);
        assert_eq!(a, bits("0110000100000100"));
        assert_eq!(bb, bits("0001010010100010"));
    }

    #[test]
    fn mtsk_trailing_one_is_b() {
        assert_eq!(
            mtsk_types(&bits("011")),
            vec![None, Some(Molecule::A), Some(Molecule::B)]
        );
    }

    #[test]
    fn stream_prior_values() {
        let (a, b) = stream_priors(Prior::new(0.5).unwrap()).unwrap();
        assert_eq!((a.one(), b.one()), (0.25, 0.25));
        let (a, b) = stream_priors(Prior::new(0.3).unwrap()).unwrap();
        assert!((a.one() - 0.09).abs() < 1e-15 && (b.one() - 0.21).abs() < 1e-15);
    }

    #[test]
    fn frame_validation() {
        let bad = Emission {
            molecule: Some(Molecule::A),
            count: 0.0,
        };
        assert!(EmissionFrame::new(vec![bad], 0).is_err());
        let bad = Emission {
            molecule: None,
            count: 1.0,
        };
        assert!(EmissionFrame::new(vec![bad], 0).is_err());
    }

    #[test]
    fn pa_two_ones() {
        let profile = ChannelParams::reference().hitting_probabilities(10);
        let (p1, p2) = (profile.p()[0], profile.p()[1]);
        let m = 100.0;
        let frame = encode_bcsk(&bits("0110"), m).unwrap();
        let pa = PaConfig::new(2, m).unwrap();
        let adj = power_adjust(&frame, &profile, pa, PaRule::Normalized).unwrap();
        let sent = adj.emitted(Molecule::A);
        assert_eq!(sent[1], m);
        assert!((sent[2] - m * (1.0 - p2 / p1)).abs() < 1e-12);
        assert!((sent[2] / m - 0.5856).abs() < 1e-3);
        assert!((p1 * sent[2] + p2 * sent[1] - p1 * m).abs() < 1e-12);

        let lit = power_adjust(&frame, &profile, pa, PaRule::Literal).unwrap();
        let sent = lit.emitted(Molecule::A);
        assert_eq!(sent[1], m);
        assert!((sent[2] - (p1 * m - p2 * m)).abs() < 1e-12);
    }

    #[test]
    fn pa_isolated_one_unchanged() {
        let profile = ChannelParams::reference().hitting_probabilities(10);
        let frame = encode_bcsk(&bits("00100"), 30.0).unwrap();
        let adj = power_adjust(
            &frame,
            &profile,
            PaConfig::new(4, 30.0).unwrap(),
            PaRule::Normalized,
        )
        .unwrap();
        assert_eq!(adj, frame);
    }

    #[test]
    fn pa_long_run_fixed_point() {
        let profile = ChannelParams::reference().hitting_probabilities(10);
        let (p1, p2) = (profile.p()[0], profile.p()[1]);
        let m = 1.0;
        let frame = encode_bcsk(&[true; 200], m).unwrap();
        let adj = power_adjust(
            &frame,
            &profile,
            PaConfig::new(2, m).unwrap(),
            PaRule::Normalized,
        )
        .unwrap();
        let sent = adj.emitted(Molecule::A);
        assert!((sent[199] - m / (1.0 + p2 / p1)).abs() < 1e-12);
        for i in 1..200 {
            assert!((p1 * sent[i] + p2 * sent[i - 1] - p1 * m).abs() < 1e-9);
        }
    }

    #[test]
    fn pa_rejects_memory_beyond_profile() {
        let profile = ChannelParams::reference().hitting_probabilities(3);
        let frame = encode_bcsk(&bits("11"), 1.0).unwrap();
        let r = power_adjust(
            &frame,
            &profile,
            PaConfig::new(4, 1.0).unwrap(),
            PaRule::Normalized,
        );
        assert_eq!(r, Err(Error::MemoryTooLong { k: 4, available: 3 }));
        assert!(PaConfig::new(1, 1.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let f = encode_mtsk(&bits("110"), 2.5).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "slot,type,count\n1,A,2.5\n2,B,2.5\n3,-,0\n"
        );
    }
}
