//! Harness-level properties: power accounting, detector comparisons and
//! determinism.

use mcvd_core::channel::ChannelParams;
use mcvd_core::detection::{decide, empirical_threshold, hamming};
use mcvd_core::isi::{synthesize_counts, NoiseParams, Prior};
use mcvd_core::modulation::{encode_bcsk, Molecule};
use mcvd_core::threshold::{threshold_schedule, Strategy};
use mcvd_harness::ber::{random_bits, rng_for, Link};
use mcvd_harness::config::{ExperimentConfig, Power, Scheme};
use mcvd_harness::run_ber;
use rayon::prelude::*;

#[test]
fn measured_power_matches_target() {
    let slots = 100_000;
    for scheme in Scheme::ALL {
        for pa in [None, Some(2), Some(4)] {
            let cfg = ExperimentConfig {
                scheme,
                pa,
                power: Power::Pbar(200.0),
                n_bits: 100,
                training_bits: 1000,
                seed: 17,
                ..ExperimentConfig::default()
            };
            let link = Link::prepare(&cfg).unwrap();
            let total: f64 = (0..(slots / cfg.n_bits) as u64)
                .map(|t| {
                    let bits = random_bits(cfg.n_bits, cfg.prior, &mut rng_for(99, t));
                    link.emit(&bits, link.m()).unwrap().total_emitted()
                })
                .sum();
            let measured = total / slots as f64;
            assert!(
                (measured / 200.0 - 1.0).abs() < 0.01,
                "{scheme} pa={pa:?}: {measured}"
            );
        }
    }
}

#[test]
fn empirical_threshold_beats_schedule_on_long_message() {
    let n = 100_000;
    let m = 500.0;
    let prior = Prior::uniform();
    let noise = NoiseParams::reference();
    let profile = ChannelParams::reference().hitting_probabilities(n);
    let bits = random_bits(n, prior, &mut rng_for(5, 0));
    let emitted = encode_bcsk(&bits, m).unwrap().emitted(Molecule::A);
    let counts = synthesize_counts(&emitted, &profile, noise, &mut rng_for(5, 1));
    let schedule = threshold_schedule(&profile, m, prior, noise, 20, Strategy::PerIndex)
        .unwrap()
        .materialize(n)
        .unwrap();
    let gamma = empirical_threshold(&counts, &bits).unwrap();
    let errors_schedule = hamming(&bits, &decide(&counts, &schedule));
    let errors_empirical = hamming(&bits, &decide(&counts, &vec![gamma; n]));
    assert!(
        errors_empirical <= errors_schedule,
        "{errors_empirical} > {errors_schedule}"
    );
}

#[test]
fn parallel_trials_match_sequential() {
    let cfg = ExperimentConfig {
        scheme: Scheme::Mtsk,
        n_bits: 64,
        n_trials: 40,
        max_trials: 40,
        ..ExperimentConfig::default()
    };
    let link = Link::prepare(&cfg).unwrap();
    let sequential: u64 = (0..40).map(|t| link.trial(t).unwrap().errors()).sum();
    let parallel: u64 = (0..40u64)
        .into_par_iter()
        .map(|t| link.trial(t).unwrap().errors())
        .sum();
    let r = run_ber(&cfg).unwrap();
    assert_eq!(sequential, parallel);
    assert_eq!(r.n_errors, sequential);
}

#[test]
fn seeds_change_results() {
    let cfg = ExperimentConfig {
        n_bits: 100,
        n_trials: 200,
        max_trials: 200,
        power: Power::Pbar(60.0),
        ..ExperimentConfig::default()
    };
    let a = run_ber(&cfg).unwrap();
    let b = run_ber(&ExperimentConfig {
        seed: 2,
        ..cfg.clone()
    })
    .unwrap();
    assert_ne!(a.n_errors, b.n_errors);
}

#[test]
fn high_power_bcsk_with_short_memory_is_clean() {
    // Isolated bits: long symbol duration leaves almost no ISI.
    let channel = ChannelParams::new(5.0, 10.0, 79.4, 2.0).unwrap();
    let cfg = ExperimentConfig {
        channel,
        power: Power::Pbar(400.0),
        n_bits: 50,
        n_trials: 200,
        max_trials: 200,
        ..ExperimentConfig::default()
    };
    assert!(run_ber(&cfg).unwrap().ber < 1e-3);
}

#[test]
fn particle_slot_means_agree_with_model() {
    let check =
        mcvd_harness::validate::model_cross_check(&ChannelParams::reference(), 10.0, 100, 200, 3)
            .unwrap();
    assert!(check.pass, "{check}");
}
