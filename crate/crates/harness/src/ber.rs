//! Seeded Monte Carlo bit-error-rate runs.
//!
//! Trial `t` draws everything (message bits, then channel noise) from the
//! ChaCha8 stream `t` of the run seed, so the aggregate does not depend on
//! how trials are spread over threads or batches. Threshold training and
//! power calibration use streams far above any trial index.

use crate::config::{Detector, ExperimentConfig, Physics, Power, Scheme};
use crate::error::{HarnessError, Result};
use mcvd_core::channel::HittingProfile;
use mcvd_core::detection::{decide, decode_bmosk, dff_decode, empirical_threshold};
use mcvd_core::isi::{sample_received_count, synthesize_counts, GaussianStats, Prior};
use mcvd_core::modulation::{
    encode_bcsk, encode_bmosk, encode_mtsk, power_adjust, split_streams, stream_priors,
    EmissionFrame, Molecule, PaConfig,
};
use mcvd_core::particle::{first_passage_step, AbsorptionCheck};
use mcvd_core::threshold::threshold_schedule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const TRAINING_STREAM: u64 = 1 << 48;
const CALIBRATION_STREAM: u64 = 1 << 56;
/// Bits used to measure the average power of power-adjusted messages.
pub const CALIBRATION_BITS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct BerResult {
    pub scheme: Scheme,
    pub pa: Option<usize>,
    /// DFF memory, when the DFF detector was used.
    pub s_mem: Option<usize>,
    pub pbar: f64,
    /// Nominal molecules per symbol.
    pub m: f64,
    pub ber: f64,
    pub n_errors: u64,
    pub n_bits_total: u64,
    pub trials: usize,
    pub seed: u64,
    /// Half-width of the normal-approximation 95% interval.
    pub ci_halfwidth: f64,
}

impl BerResult {
    pub fn ci(&self) -> (f64, f64) {
        (self.ber - self.ci_halfwidth, self.ber + self.ci_halfwidth)
    }

    /// True when the two 95% intervals are disjoint and `self` is lower.
    pub fn clearly_below(&self, other: &BerResult) -> bool {
        self.ci().1 < other.ci().0
    }
}

pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

enum Decoder {
    Threshold(Vec<f64>),
    Dff,
    Compare,
    Dual(Vec<f64>, Vec<f64>),
}

/// A configuration with its profile, nominal power and detector prepared.
pub struct Link {
    cfg: ExperimentConfig,
    profile: HittingProfile,
    m: f64,
    pbar: f64,
    decoder: Decoder,
}

/// Bits and decisions of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub bits: Vec<bool>,
    pub decoded: Vec<bool>,
    pub counts_a: Vec<f64>,
    pub counts_b: Vec<f64>,
}

impl TrialOutcome {
    pub fn errors(&self) -> u64 {
        mcvd_core::detection::hamming(&self.bits, &self.decoded) as u64
    }
}

impl Link {
    pub fn prepare(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let k_len = cfg
            .n_bits
            .max(cfg.i_exact)
            .max(cfg.s_mem)
            .max(cfg.pa.unwrap_or(2));
        // ISI is never truncated: every earlier slot of the message contributes.
        let profile = cfg.channel.hitting_probabilities(k_len);
        let mut link = Self {
            cfg: cfg.clone(),
            profile,
            m: 1.0,
            pbar: 0.0,
            decoder: Decoder::Compare,
        };
        let (m, pbar) = match cfg.power {
            Power::M(m) => (m, link.measure_power(m)),
            Power::Pbar(pbar) => (link.calibrate(pbar), pbar),
        };
        link.m = m;
        link.pbar = pbar;
        link.decoder = link.build_decoder()?;
        Ok(link)
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn profile(&self) -> &HittingProfile {
        &self.profile
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn pbar(&self) -> f64 {
        self.pbar
    }

    /// Nominal `M` giving average power `pbar`. Power adjustment is linear in
    /// `M`, so one calibration run at `M = 1` fixes the ratio.
    fn calibrate(&self, pbar: f64) -> f64 {
        if self.cfg.pa.is_none() {
            return self.cfg.scheme.nominal_m(pbar, self.cfg.prior);
        }
        pbar / self.measure_power(1.0)
    }

    /// Average emitted molecules per slot at nominal `m`: by definition
    /// without PA, measured on calibration messages with PA.
    fn measure_power(&self, m: f64) -> f64 {
        if self.cfg.pa.is_none() {
            return self.cfg.scheme.average_power(m, self.cfg.prior);
        }
        let n = self.cfg.n_bits;
        let messages = CALIBRATION_BITS.div_ceil(n);
        let total: f64 = (0..messages)
            .map(|k| {
                let mut rng = rng_for(self.cfg.seed, CALIBRATION_STREAM + k as u64);
                let bits = random_bits(n, self.cfg.prior, &mut rng);
                self.emit(&bits, m)
                    .expect("validated configuration")
                    .total_emitted()
            })
            .sum();
        total / (messages * n) as f64
    }

    pub fn emit(&self, bits: &[bool], m: f64) -> Result<EmissionFrame> {
        let frame = match self.cfg.scheme {
            Scheme::Bcsk => encode_bcsk(bits, m)?,
            Scheme::Bmosk => encode_bmosk(bits, m)?,
            Scheme::Mtsk => encode_mtsk(bits, m)?,
        };
        Ok(match self.cfg.pa {
            Some(k) => power_adjust(
                &frame,
                &self.profile,
                PaConfig::new(k, m)?,
                self.cfg.pa_rule,
            )?,
            None => frame,
        })
    }

    fn build_decoder(&self) -> Result<Decoder> {
        let cfg = &self.cfg;
        let n = cfg.n_bits;
        if cfg.scheme == Scheme::Bmosk {
            return Ok(Decoder::Compare);
        }
        Ok(match cfg.detector() {
            Detector::Dff => Decoder::Dff,
            Detector::Schedule => {
                let schedule = |prior: Prior| -> Result<Vec<f64>> {
                    let s = threshold_schedule(
                        &self.profile,
                        self.m,
                        prior,
                        cfg.noise,
                        cfg.i_exact,
                        cfg.strategy,
                    )?;
                    Ok(s.materialize(n)?)
                };
                match cfg.scheme {
                    Scheme::Mtsk => {
                        let (pa, pb) = stream_priors(cfg.prior)?;
                        Decoder::Dual(schedule(pa)?, schedule(pb)?)
                    }
                    _ => Decoder::Threshold(schedule(cfg.prior)?),
                }
            }
            Detector::Empirical => self.train()?,
        })
    }

    /// Constant thresholds minimizing errors on separate training messages.
    fn train(&self) -> Result<Decoder> {
        let n = self.cfg.n_bits;
        let messages = self.cfg.training_bits.div_ceil(n).max(1);
        let runs: Vec<(Vec<bool>, Vec<f64>, Vec<f64>)> = (0..messages)
            .into_par_iter()
            .map(|k| {
                let mut rng = rng_for(self.cfg.seed, TRAINING_STREAM + k as u64);
                let (bits, a, b) = self.transmit(&mut rng)?;
                Ok((bits, a, b))
            })
            .collect::<Result<_>>()?;
        let mut bits = Vec::with_capacity(messages * n);
        let mut ca = Vec::with_capacity(messages * n);
        let mut cb = Vec::with_capacity(messages * n);
        for (b, a, c) in runs {
            bits.extend(b);
            ca.extend(a);
            cb.extend(c);
        }
        Ok(match self.cfg.scheme {
            Scheme::Mtsk => {
                let (sa, sb) = split_streams_concat(&bits, n);
                Decoder::Dual(
                    vec![empirical_threshold(&ca, &sa)?; n],
                    vec![empirical_threshold(&cb, &sb)?; n],
                )
            }
            _ => Decoder::Threshold(vec![empirical_threshold(&ca, &bits)?; n]),
        })
    }

    /// Draws a message and its received counts.
    fn transmit(&self, rng: &mut ChaCha8Rng) -> Result<(Vec<bool>, Vec<f64>, Vec<f64>)> {
        let bits = random_bits(self.cfg.n_bits, self.cfg.prior, rng);
        let frame = self.emit(&bits, self.m)?;
        let counts_a = self.receive(&frame.emitted(Molecule::A), rng);
        let counts_b = if self.cfg.scheme == Scheme::Bcsk {
            vec![0.0; bits.len()]
        } else {
            self.receive(&frame.emitted(Molecule::B), rng)
        };
        Ok((bits, counts_a, counts_b))
    }

    /// Received counts of one molecule type.
    pub fn receive(&self, emitted: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self.cfg.physics {
            Physics::Gaussian => synthesize_counts(emitted, &self.profile, self.cfg.noise, rng),
            Physics::Particle => self.particle_counts(emitted, rng),
        }
    }

    /// Brownian walkers for every emitted molecule, plus counting noise.
    fn particle_counts(&self, emitted: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.particle_absorptions(emitted, rng)
            .into_iter()
            .map(|a| sample_received_count(GaussianStats::new(a, self.cfg.noise.sigma_c2()), rng))
            .collect()
    }

    /// Molecules absorbed per slot when every emission (rounded to whole
    /// molecules) is simulated as Brownian walkers over the rest of the frame.
    pub fn particle_absorptions(&self, emitted: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = emitted.len();
        let ts = self.cfg.channel.symbol_duration();
        let steps_per_slot = (ts / self.cfg.dt).round().max(1.0) as usize;
        let dt = ts / steps_per_slot as f64;
        let mut absorbed = vec![0.0; n];
        for (i, &c) in emitted.iter().enumerate() {
            let molecules = c.round() as usize;
            let horizon = (n - i) * steps_per_slot;
            for _ in 0..molecules {
                if let Some(step) =
                    first_passage_step(&self.cfg.channel, dt, horizon, AbsorptionCheck::Bridge, rng)
                {
                    absorbed[i + (step - 1) / steps_per_slot] += 1.0;
                }
            }
        }
        absorbed
    }

    pub fn trial(&self, t: u64) -> Result<TrialOutcome> {
        let mut rng = rng_for(self.cfg.seed, t);
        let (bits, counts_a, counts_b) = self.transmit(&mut rng)?;
        let decoded = match &self.decoder {
            Decoder::Threshold(g) => decide(&counts_a, g),
            Decoder::Dff => dff_decode(
                &counts_a,
                self.m,
                &self.profile,
                self.cfg.noise,
                self.cfg.s_mem,
                self.cfg.prior,
            )?,
            Decoder::Compare => {
                let frame =
                    mcvd_core::detection::ReceivedFrame::new(counts_a.clone(), counts_b.clone())?;
                decode_bmosk(&frame)
            }
            Decoder::Dual(ga, gb) => decide(&counts_a, ga)
                .into_iter()
                .zip(decide(&counts_b, gb))
                .map(|(a, b)| a || b)
                .collect(),
        };
        Ok(TrialOutcome {
            bits,
            decoded,
            counts_a,
            counts_b,
        })
    }

    fn errors_in(&self, range: std::ops::Range<u64>) -> Result<u64> {
        range
            .into_par_iter()
            .map(|t| self.trial(t).map(|o| o.errors()))
            .try_reduce(|| 0, |a, b| Ok(a + b))
    }

    /// Runs `n_trials`, then keeps doubling until `min_errors` errors or
    /// `max_trials` trials.
    pub fn run(&self) -> Result<BerResult> {
        let cfg = &self.cfg;
        let mut done = 0usize;
        let mut errors = 0u64;
        let mut batch = cfg.n_trials;
        loop {
            errors += self.errors_in(done as u64..(done + batch) as u64)?;
            done += batch;
            if errors >= cfg.min_errors || done >= cfg.max_trials {
                break;
            }
            batch = done.min(cfg.max_trials - done);
        }
        let n_bits_total = (done * cfg.n_bits) as u64;
        let ber = errors as f64 / n_bits_total as f64;
        Ok(BerResult {
            scheme: cfg.scheme,
            pa: cfg.pa,
            s_mem: (cfg.detector() == Detector::Dff).then_some(cfg.s_mem),
            pbar: self.pbar,
            m: self.m,
            ber,
            n_errors: errors,
            n_bits_total,
            trials: done,
            seed: cfg.seed,
            ci_halfwidth: 1.96 * (ber * (1.0 - ber) / n_bits_total as f64).sqrt(),
        })
    }
}

pub fn random_bits<R: Rng + ?Sized>(n: usize, prior: Prior, rng: &mut R) -> Vec<bool> {
    (0..n).map(|_| rng.random::<f64>() < prior.one()).collect()
}

/// MTSK streams of back-to-back messages of length `n`, split per message.
fn split_streams_concat(bits: &[bool], n: usize) -> (Vec<bool>, Vec<bool>) {
    let mut a = Vec::with_capacity(bits.len());
    let mut b = Vec::with_capacity(bits.len());
    for chunk in bits.chunks(n) {
        let (x, y) = split_streams(chunk);
        a.extend(x);
        b.extend(y);
    }
    (a, b)
}

pub fn run_ber(cfg: &ExperimentConfig) -> Result<BerResult> {
    Link::prepare(cfg)?.run()
}

/// Runs every configuration in order.
pub fn run_sweep(cfgs: &[ExperimentConfig]) -> Result<Vec<BerResult>> {
    if cfgs.is_empty() {
        return Err(HarnessError::config("empty sweep"));
    }
    cfgs.iter().map(run_ber).collect()
}
