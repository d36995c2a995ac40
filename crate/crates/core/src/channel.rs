//! Diffusion channel between a point source and a perfectly absorbing sphere.
//!
//! For a receiver of radius `r_r` centred at distance `r_0` from the source,
//! the first-passage density and its integral are
//!
//! ```text
//! f_hit(t) = (r_r / r_0) · 1/√(4πDt) · (r_0 − r_r)/t · exp(−(r_0 − r_r)² / 4Dt)
//! F_hit(t) = (r_r / r_0) · erfc((r_0 − r_r) / √(4Dt))
//! ```
//!
//! Slotting time into symbols of length `t_s` gives the hitting probabilities
//! `p_1 = F_hit(t_s)` and `p_k = F_hit(k·t_s) − F_hit((k−1)·t_s)`, which are
//! all the detector ever needs to know about the physics.

use crate::error::{Error, Result};
use crate::special::erfc;
use std::f64::consts::PI;

/// Physical description of the link. Lengths in µm, time in s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    receiver_radius: f64,
    distance: f64,
    diffusion: f64,
    symbol_duration: f64,
}

impl ChannelParams {
    /// Validates `r_r > 0`, `r_0 > r_r`, `D > 0`, `t_s > 0`.
    pub fn new(
        receiver_radius: f64,
        distance: f64,
        diffusion: f64,
        symbol_duration: f64,
    ) -> Result<Self> {
        if !(receiver_radius > 0.0 && receiver_radius.is_finite()) {
            return Err(Error::invalid(
                "r_r",
                format!("{receiver_radius} must be > 0"),
            ));
        }
        if !(distance > receiver_radius && distance.is_finite()) {
            return Err(Error::invalid(
                "r_0",
                format!("{distance} must exceed the receiver radius {receiver_radius}"),
            ));
        }
        if !(diffusion > 0.0 && diffusion.is_finite()) {
            return Err(Error::invalid("D", format!("{diffusion} must be > 0")));
        }
        if !(symbol_duration > 0.0 && symbol_duration.is_finite()) {
            return Err(Error::invalid(
                "t_s",
                format!("{symbol_duration} must be > 0"),
            ));
        }
        Ok(Self {
            receiver_radius,
            distance,
            diffusion,
            symbol_duration,
        })
    }

    /// The reference link: r_r = 5 µm, r_0 = 10 µm, D = 79.4 µm²/s, t_s = 200 ms.
    pub fn reference() -> Self {
        Self::new(5.0, 10.0, 79.4, 0.2).expect("reference parameters are valid")
    }

    pub fn receiver_radius(&self) -> f64 {
        self.receiver_radius
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn diffusion(&self) -> f64 {
        self.diffusion
    }

    pub fn symbol_duration(&self) -> f64 {
        self.symbol_duration
    }

    pub fn with_symbol_duration(&self, symbol_duration: f64) -> Result<Self> {
        Self::new(
            self.receiver_radius,
            self.distance,
            self.diffusion,
            symbol_duration,
        )
    }

    /// Gap between the source and the receiver surface.
    pub fn gap(&self) -> f64 {
        self.distance - self.receiver_radius
    }

    /// Fraction of all released molecules that are eventually absorbed.
    pub fn absorbed_limit(&self) -> f64 {
        self.receiver_radius / self.distance
    }

    /// `F_hit(t)`: fraction absorbed by time `t`. Zero for `t <= 0`.
    pub fn cumulative_hit_fraction(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.absorbed_limit() * erfc(self.gap() / (4.0 * self.diffusion * t).sqrt())
    }

    /// `f_hit(t)` in 1/s.
    pub fn hitting_rate(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(t));
        }
        let d = self.gap();
        let four_dt = 4.0 * self.diffusion * t;
        Ok(self.absorbed_limit() / (PI * four_dt).sqrt() * (d / t) * (-d * d / four_dt).exp())
    }

    /// Time at which `f_hit` peaks, `d² / 6D` with `d = r_0 − r_r`.
    pub fn peak_time(&self) -> f64 {
        let d = self.gap();
        d * d / (6.0 * self.diffusion)
    }

    /// Slot hitting probabilities `p_1..p_{k_max}` for the configured `t_s`.
    pub fn hitting_probabilities(&self, k_max: usize) -> HittingProfile {
        let ts = self.symbol_duration;
        let cumulative: Vec<f64> = (1..=k_max)
            .map(|k| self.cumulative_hit_fraction(k as f64 * ts))
            .collect();
        let p = cumulative
            .iter()
            .scan(0.0, |prev, &c| {
                let pk = c - *prev;
                *prev = c;
                Some(pk)
            })
            .collect();
        HittingProfile {
            p,
            cumulative,
            symbol_duration: ts,
        }
    }

    /// True iff `p_1 > p_2 > … > p_{k_max}`.
    pub fn validate_symbol_duration(&self, k_max: usize) -> bool {
        self.hitting_probabilities(k_max).is_descending()
    }
}

/// Per-slot hitting probabilities of one molecule released at the start of
/// slot 1.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingProfile {
    p: Vec<f64>,
    cumulative: Vec<f64>,
    symbol_duration: f64,
}

impl HittingProfile {
    /// Builds a profile from explicit probabilities, e.g. rounded values
    /// quoted in a worked example.
    pub fn from_probabilities(p: Vec<f64>, symbol_duration: f64) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::invalid("p", "profile must be nonempty"));
        }
        if let Some(bad) = p.iter().find(|&&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::invalid("p", format!("{bad} is not in (0, 1)")));
        }
        let total: f64 = p.iter().sum();
        if total > 1.0 {
            return Err(Error::invalid(
                "p",
                format!("probabilities sum to {total} > 1"),
            ));
        }
        let cumulative = p
            .iter()
            .scan(0.0, |acc, &x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            p,
            cumulative,
            symbol_duration,
        })
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn symbol_duration(&self) -> f64 {
        self.symbol_duration
    }

    /// `Σ_{j<=k} p_j`, i.e. `F_hit(k·t_s)` for a profile built from a channel.
    /// `k` is 1-based.
    pub fn partial_sum(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1]
        }
    }

    pub fn is_descending(&self) -> bool {
        self.first_non_descending().is_none()
    }

    /// 1-based index `k` of the first pair with `p_k <= p_{k+1}`.
    pub fn first_non_descending(&self) -> Option<usize> {
        self.p.windows(2).position(|w| w[0] <= w[1]).map(|i| i + 1)
    }

    pub fn ensure_descending(&self) -> Result<()> {
        match self.first_non_descending() {
            Some(index) => Err(Error::NotDescending { index }),
            None => Ok(()),
        }
    }

    /// Profile restricted to its first `k` slots.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.len());
        Self {
            p: self.p[..k].to_vec(),
            cumulative: self.cumulative[..k].to_vec(),
            symbol_duration: self.symbol_duration,
        }
    }
}
