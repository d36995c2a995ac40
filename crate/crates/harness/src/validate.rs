//! Cross-checks of the analytical channel against the particle simulator.

use crate::ber::{random_bits, rng_for, Link};
use crate::config::{Detector, ExperimentConfig, Physics, Power, Scheme};
use crate::error::Result;
use mcvd_core::channel::ChannelParams;
use mcvd_core::isi::{received_stats, NoiseParams};
use mcvd_core::modulation::{encode_bcsk, Molecule};
use mcvd_core::particle::{coupled_halving, simulate_release, SimConfig};
use rayon::prelude::*;
use std::fmt;

const MESSAGE_STREAM: u64 = 1 << 60;

/// One named comparison: passes when `|value − target| < tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            target,
            tol,
            pass: (value - target).abs() < tol,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: value={:.6} target={:.6} tol={:.6}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.target,
            self.tol
        )
    }
}

/// Binomial standard error of a fraction `p` over `n` draws.
fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Absorbed fraction by one symbol duration (3 binomial σ) and the KS
/// distance of the absorption times to the closed-form CDF over that window.
pub fn particle_checks(params: &ChannelParams, config: &SimConfig) -> Vec<Check> {
    let ts = config.t_max;
    let record = simulate_release(params, config);
    let f = params.cumulative_hit_fraction(ts);
    vec![
        Check::new(
            "particle F_hit(t_s)",
            record.absorbed_fraction(ts),
            f,
            3.0 * binomial_se(f, config.n_molecules),
        ),
        Check::new(
            "particle KS distance",
            record.ks_distance(|t| params.cumulative_hit_fraction(t), ts),
            0.0,
            0.01,
        ),
    ]
}

/// Change of the absorbed fraction when `dt` is halved, against one binomial
/// standard error.
pub fn halving_check(params: &ChannelParams, config: &SimConfig) -> Check {
    let (coarse, fine) = coupled_halving(params, config);
    Check::new(
        "dt halving shift",
        coarse - fine,
        0.0,
        binomial_se(
            params.cumulative_hit_fraction(config.t_max),
            config.n_molecules,
        ),
    )
}

/// Largest per-slot z-score between particle-simulated BCSK absorption counts,
/// averaged over `reps` runs of one fixed message, and the model means.
/// Passes below 3.
pub fn model_cross_check(
    channel: &ChannelParams,
    m: f64,
    n_bits: usize,
    reps: usize,
    seed: u64,
) -> Result<Check> {
    let cfg = ExperimentConfig {
        channel: *channel,
        scheme: Scheme::Bcsk,
        power: Power::M(m),
        n_bits,
        i_exact: 2,
        detector: Some(Detector::Empirical),
        training_bits: 1,
        physics: Physics::Particle,
        dt: channel.symbol_duration() / 100.0,
        seed,
        ..ExperimentConfig::default()
    };
    let link = Link::prepare(&cfg)?;
    let bits = random_bits(n_bits, cfg.prior, &mut rng_for(seed, MESSAGE_STREAM));
    let emitted = encode_bcsk(&bits, m)?.emitted(Molecule::A);
    let sums = (0..reps as u64)
        .into_par_iter()
        .map(|r| link.particle_absorptions(&emitted, &mut rng_for(seed, r)))
        .reduce(
            || vec![0.0; n_bits],
            |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect(),
        );
    let noiseless = NoiseParams::new(0.0)?;
    let mut worst: f64 = 0.0;
    for (i, sum) in sums.iter().enumerate() {
        let model = received_stats(&bits[..=i], m, link.profile(), noiseless)?;
        let mean = sum / reps as f64;
        let z = if model.var > 0.0 {
            (mean - model.mean).abs() / (model.var / reps as f64).sqrt()
        } else if mean == model.mean {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
    }
    Ok(Check::new(
        "particle vs model slot means (max |z|)",
        worst,
        0.0,
        3.0,
    ))
}
