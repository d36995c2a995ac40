//! Brownian-motion Monte Carlo of point-source release into an absorbing sphere.
//!
//! Molecules start at distance `r_0` from the receiver centre (the origin) and
//! take independent Gaussian steps `Δx_i ~ N(0, 2D·dt)` per dimension.
//! Collisions between molecules are ignored. This module is deliberately
//! independent of the closed forms in [`crate::channel`], which it validates.
//!
//! Molecules are simulated in fixed blocks of [`BLOCK`]; block `b` draws from
//! a ChaCha8 stream `b` keyed by the run seed, so the record is identical no
//! matter how blocks are spread over threads.

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::io::{self, Write};

/// Molecules per RNG stream.
pub const BLOCK: usize = 1024;

/// How absorption is detected inside a time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AbsorptionCheck {
    /// Absorbed only if the end-of-step position lies inside the sphere.
    StepBoundary,
    /// Additionally absorbs with the Brownian-bridge probability
    /// `exp(−(r_a − r_r)(r_b − r_r) / (D·dt))` that the path touched the
    /// surface between two outside positions (planar approximation).
    #[default]
    Bridge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub n_molecules: usize,
    pub t_max: f64,
    pub seed: u64,
    pub check: AbsorptionCheck,
}

impl SimConfig {
    pub fn new(dt: f64, n_molecules: usize, t_max: f64, seed: u64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", format!("{dt} must be > 0")));
        }
        if n_molecules == 0 {
            return Err(Error::invalid(
                "n_molecules",
                "at least one molecule is required",
            ));
        }
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::invalid("t_max", format!("{t_max} must be > 0")));
        }
        Ok(Self {
            dt,
            n_molecules,
            t_max,
            seed,
            check: AbsorptionCheck::default(),
        })
    }

    pub fn with_check(mut self, check: AbsorptionCheck) -> Self {
        self.check = check;
        self
    }

    /// Slotted statistics need at least 100 steps per symbol.
    pub fn validate_for_slots(&self, symbol_duration: f64) -> Result<()> {
        if self.dt > symbol_duration / 100.0 * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "dt",
                format!("{} exceeds t_s/100 = {}", self.dt, symbol_duration / 100.0),
            ));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_max / self.dt + 1e-9).floor() as usize
    }
}

/// Absorption times of one release, in molecule order.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionRecord {
    pub absorption_times: Vec<f64>,
    pub n_released: usize,
}

impl AbsorptionRecord {
    pub fn empty(n_released: usize) -> Self {
        Self {
            absorption_times: Vec::new(),
            n_released,
        }
    }

    pub fn n_absorbed(&self) -> usize {
        self.absorption_times.len()
    }

    /// Fraction of released molecules absorbed by time `t`.
    pub fn absorbed_fraction(&self, t: f64) -> f64 {
        let hits = self.absorption_times.iter().filter(|&&x| x <= t).count();
        hits as f64 / self.n_released as f64
    }

    /// Kolmogorov–Smirnov distance between the empirical (defective) CDF of
    /// absorption times and `cdf`, over `[0, t_max]`.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64, t_max: f64) -> f64 {
        let mut times: Vec<f64> = self
            .absorption_times
            .iter()
            .copied()
            .filter(|&t| t <= t_max)
            .collect();
        times.sort_by(f64::total_cmp);
        let n = self.n_released as f64;
        let mut d: f64 = 0.0;
        let mut i = 0;
        while i < times.len() {
            let t = times[i];
            let before = i as f64 / n;
            while i < times.len() && times[i] == t {
                i += 1;
            }
            let after = i as f64 / n;
            let f = cdf(t);
            d = d.max((f - before).abs()).max((f - after).abs());
        }
        let last = times.len() as f64 / n;
        d.max((cdf(t_max) - last).abs())
    }

    /// One time per row under an `absorption_time_s` header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "absorption_time_s")?;
        for t in &self.absorption_times {
            writeln!(out, "{t}")?;
        }
        Ok(())
    }
}

/// Walks one molecule for at most `n_steps` steps of length `dt` and returns
/// the 1-based step at which it was absorbed.
pub fn first_passage_step<R: Rng + ?Sized>(
    params: &ChannelParams,
    dt: f64,
    n_steps: usize,
    check: AbsorptionCheck,
    rng: &mut R,
) -> Option<usize> {
    let rr = params.receiver_radius();
    let sigma = (2.0 * params.diffusion() * dt).sqrt();
    let bridge_scale = 1.0 / (params.diffusion() * dt);
    let (mut x, mut y, mut z) = (params.distance(), 0.0_f64, 0.0_f64);
    let mut gap = params.gap();
    for step in 1..=n_steps {
        x += sigma * rng.sample::<f64, _>(StandardNormal);
        y += sigma * rng.sample::<f64, _>(StandardNormal);
        z += sigma * rng.sample::<f64, _>(StandardNormal);
        let new_gap = (x * x + y * y + z * z).sqrt() - rr;
        if new_gap <= 0.0 {
            return Some(step);
        }
        if check == AbsorptionCheck::Bridge {
            let exponent = gap * new_gap * bridge_scale;
            // exp(-40) is far below the resolution of the uniform draw.
            if exponent < 40.0 && rng.random::<f64>() < (-exponent).exp() {
                return Some(step);
            }
        }
        gap = new_gap;
    }
    None
}

/// Releases `config.n_molecules` molecules at `t = 0` and records when each
/// is absorbed, up to `config.t_max`.
pub fn simulate_release(params: &ChannelParams, config: &SimConfig) -> AbsorptionRecord {
    let n_steps = config.n_steps();
    let n_blocks = config.n_molecules.div_ceil(BLOCK);
    let blocks: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(b as u64);
            let count = BLOCK.min(config.n_molecules - b * BLOCK);
            (0..count)
                .filter_map(|_| {
                    first_passage_step(params, config.dt, n_steps, config.check, &mut rng)
                })
                .map(|step| step as f64 * config.dt)
                .collect()
        })
        .collect();
    AbsorptionRecord {
        absorption_times: blocks.concat(),
        n_released: config.n_molecules,
    }
}

struct Walker {
    pos: [f64; 3],
    gap: f64,
    absorbed: bool,
}

impl Walker {
    fn start(params: &ChannelParams) -> Self {
        Self {
            pos: [params.distance(), 0.0, 0.0],
            gap: params.gap(),
            absorbed: false,
        }
    }

    fn advance<R: Rng + ?Sized>(
        &mut self,
        d: [f64; 3],
        rr: f64,
        bridge_scale: Option<f64>,
        rng: &mut R,
    ) {
        if self.absorbed {
            return;
        }
        for (p, di) in self.pos.iter_mut().zip(d) {
            *p += di;
        }
        let new_gap = self.pos.iter().map(|p| p * p).sum::<f64>().sqrt() - rr;
        self.absorbed = new_gap <= 0.0
            || bridge_scale.is_some_and(|s| {
                let exponent = self.gap * new_gap * s;
                exponent < 40.0 && rng.random::<f64>() < (-exponent).exp()
            });
        self.gap = new_gap;
    }
}

/// Fractions absorbed by `t_max` at step `dt` and at `dt/2`, with each coarse
/// step the sum of two fine steps of the same molecule. The shared increments
/// cancel most of the sampling noise from the difference.
pub fn coupled_halving(params: &ChannelParams, config: &SimConfig) -> (f64, f64) {
    let rr = params.receiver_radius();
    let n_steps = config.n_steps();
    let half = config.dt / 2.0;
    let sigma = (2.0 * params.diffusion() * half).sqrt();
    let bridge = config.check == AbsorptionCheck::Bridge;
    let coarse_scale = bridge.then(|| 1.0 / (params.diffusion() * config.dt));
    let fine_scale = bridge.then(|| 1.0 / (params.diffusion() * half));
    let n_blocks = config.n_molecules.div_ceil(BLOCK);
    let (coarse, fine) = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(b as u64);
            let count = BLOCK.min(config.n_molecules - b * BLOCK);
            let mut hits = (0usize, 0usize);
            for _ in 0..count {
                let mut c = Walker::start(params);
                let mut f = Walker::start(params);
                for _ in 0..n_steps {
                    let mut total = [0.0; 3];
                    for _ in 0..2 {
                        let d: [f64; 3] =
                            std::array::from_fn(|_| sigma * rng.sample::<f64, _>(StandardNormal));
                        for (t, di) in total.iter_mut().zip(d) {
                            *t += di;
                        }
                        f.advance(d, rr, fine_scale, &mut rng);
                    }
                    c.advance(total, rr, coarse_scale, &mut rng);
                    if c.absorbed && f.absorbed {
                        break;
                    }
                }
                hits.0 += c.absorbed as usize;
                hits.1 += f.absorbed as usize;
            }
            hits
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = config.n_molecules as f64;
    (coarse as f64 / n, fine as f64 / n)
}

/// Bins absorption times into symbol slots: slot `k` (1-based) counts times
/// in `((k−1)·t_s, k·t_s]`. Times beyond `n_slots·t_s` are dropped.
pub fn slot_counts(
    record: &AbsorptionRecord,
    symbol_duration: f64,
    n_slots: usize,
) -> Result<Vec<u64>> {
    if !(symbol_duration > 0.0) {
        return Err(Error::invalid(
            "t_s",
            format!("{symbol_duration} must be > 0"),
        ));
    }
    let mut counts = vec![0u64; n_slots];
    for &t in &record.absorption_times {
        // Absorption times are multiples of dt; the tolerance keeps an exact
        // multiple of t_s in the slot it closes.
        let k = ((t / symbol_duration) * (1.0 - 1e-12)).ceil() as usize;
        if (1..=n_slots).contains(&k) {
            counts[k - 1] += 1;
        }
    }
    Ok(counts)
}
