//! Acceptance criteria 1 to 10. Each test prints one PASS/FAIL line.
//!
//! Run with `cargo test -p mcvd-harness --test acceptance -- --test-threads=1`
//! to keep the lines in order.

use mcvd_core::channel::{ChannelParams, HittingProfile};
use mcvd_core::detection::empirical_threshold;
use mcvd_core::isi::{enumerate_candidates, received_stats, synthesize_counts, NoiseParams, Prior};
use mcvd_core::modulation::{encode_bcsk, encode_bmosk, encode_mtsk, Molecule};
use mcvd_core::particle::{simulate_release, SimConfig};
use mcvd_core::threshold::{
    error_objective, fit_threshold_curve, optimal_thresholds, pairwise_threshold,
};
use mcvd_harness::analytic::analytic_short_error;
use mcvd_harness::ber::{random_bits, rng_for};
use mcvd_harness::config::{Detector, ExperimentConfig, Power, Scheme};
use mcvd_harness::report::csv_string;
use mcvd_harness::{emit_report, run_ber, run_sweep, BerResult};
use std::io::Write;

// Pinned tolerances.
const P_TOL: f64 = 1e-4;
const PAIRWISE_TOL: f64 = 1e-3;
const GAMMA2_TOL: f64 = 1e-3;
const GAMMA3_TOL: f64 = 1e-2;
const GRID_STEP: f64 = 1e-3;
const GRID_TOL: f64 = 2e-3;
const ANALYTIC_TOL: f64 = 5e-4;
const MC_TRIALS: usize = 1_000_000;
const MC_SIGMAS: f64 = 3.0;
const F_HIT_TOL: f64 = 0.004;
const KS_TOL: f64 = 0.01;
const DFF_BAND: (f64, f64) = (3e-4, 3e-3);
const FIT_RMSE_FRACTION: f64 = 0.02;
const HISTOGRAM_BIN: f64 = 1.0;

/// Collects sub-checks of one criterion and prints a single line.
struct Verdict {
    id: u32,
    parts: Vec<(String, bool)>,
}

impl Verdict {
    fn new(id: u32) -> Self {
        Self {
            id,
            parts: Vec::new(),
        }
    }

    fn check(&mut self, pass: bool, detail: String) {
        self.parts.push((detail, pass));
    }

    fn near(&mut self, name: &str, value: f64, target: f64, tol: f64) {
        let pass = (value - target).abs() <= tol;
        self.check(
            pass,
            format!("{name}={value:.6} (target {target:.6} ± {tol:.6})"),
        );
    }

    fn finish(self) {
        let pass = self.parts.iter().all(|(_, p)| *p);
        let details: Vec<String> = self
            .parts
            .iter()
            .map(|(d, p)| format!("{}{d}", if *p { "" } else { "[x] " }))
            .collect();
        let line = format!(
            "criterion {:>2} {}: {}\n",
            self.id,
            if pass { "PASS" } else { "FAIL" },
            details.join("; ")
        );
        // Written past the test harness capture so passing criteria are listed too.
        let _ = std::io::stderr().lock().write_all(line.as_bytes());
        assert!(pass, "{}", line.trim_end());
    }
}

fn reference_profile(k: usize) -> HittingProfile {
    ChannelParams::reference().hitting_probabilities(k)
}

const EXAMPLE_M: f64 = 100.0;

#[test]
fn criterion_01_hitting_probabilities() {
    let mut v = Verdict::new(1);
    let p = reference_profile(2);
    v.near("p1", p.p()[0], 0.1875, P_TOL);
    v.near("p2", p.p()[1], 0.0777, P_TOL);
    v.finish();
}

#[test]
fn criterion_02_threshold_exactness() {
    let mut v = Verdict::new(2);
    let profile = reference_profile(3);
    let noise = NoiseParams::reference();
    let stats = |h: &[bool]| received_stats(h, EXAMPLE_M, &profile, noise).unwrap();
    let g20 = pairwise_threshold(stats(&[false, false]), stats(&[false, true]), 0.5, 0.5).unwrap();
    let g21 = pairwise_threshold(stats(&[true, false]), stats(&[true, true]), 0.5, 0.5).unwrap();
    v.near("gamma{2,0}", g20, 4.0189, PAIRWISE_TOL);
    v.near("gamma{2,1}", g21, 15.1198, PAIRWISE_TOL);
    let gammas = optimal_thresholds(3, EXAMPLE_M, &profile, Prior::uniform(), noise).unwrap();
    v.near("gamma{2}", gammas[1], 12.7882, GAMMA2_TOL);
    v.near("gamma{3}", gammas[2], 14.64, GAMMA3_TOL);
    v.finish();
}

#[test]
fn criterion_03_grid_oracle() {
    let mut v = Verdict::new(3);
    let n = 10;
    let profile = reference_profile(n);
    let noise = NoiseParams::reference();
    let prior = Prior::uniform();
    let gammas = optimal_thresholds(n, EXAMPLE_M, &profile, prior, noise).unwrap();
    let hi = EXAMPLE_M * profile.partial_sum(n) + 10.0;
    let steps = (hi / GRID_STEP).round() as usize;
    let mut worst: f64 = 0.0;
    for i in 1..=n {
        let c0 = enumerate_candidates(i, false, prior, EXAMPLE_M, &profile, noise).unwrap();
        let c1 = enumerate_candidates(i, true, prior, EXAMPLE_M, &profile, noise).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        for s in 0..=steps {
            let g = s as f64 * GRID_STEP;
            let j = error_objective(g, &c0, &c1);
            if j < best.0 {
                best = (j, g);
            }
        }
        worst = worst.max((gammas[i - 1] - best.1).abs());
    }
    v.near("max |search - grid argmin| over i<=10", worst, 0.0, GRID_TOL);
    v.finish();
}

/// Monte Carlo error rate of the last bit of `bits`.
fn short_message_error_rate(scheme: Scheme, bits: &[bool], thresholds: &[f64], seed: u64) -> f64 {
    let profile = reference_profile(bits.len());
    let noise = NoiseParams::reference();
    let frame = match scheme {
        Scheme::Bcsk => encode_bcsk(bits, EXAMPLE_M),
        Scheme::Bmosk => encode_bmosk(bits, EXAMPLE_M),
        Scheme::Mtsk => encode_mtsk(bits, EXAMPLE_M),
    }
    .unwrap();
    let (ea, eb) = (frame.emitted(Molecule::A), frame.emitted(Molecule::B));
    let last = bits.len() - 1;
    let truth = bits[last];
    let mut rng = rng_for(seed, 0);
    let mut errors = 0usize;
    for _ in 0..MC_TRIALS {
        let a = synthesize_counts(&ea, &profile, noise, &mut rng)[last];
        let b = synthesize_counts(&eb, &profile, noise, &mut rng)[last];
        let decided = match scheme {
            Scheme::Bcsk => a > thresholds[0],
            Scheme::Bmosk => b > a,
            Scheme::Mtsk => a > thresholds[0] || b > thresholds[1],
        };
        errors += (decided != truth) as usize;
    }
    errors as f64 / MC_TRIALS as f64
}

#[test]
fn criterion_04_example_closed_forms() {
    let mut v = Verdict::new(4);
    let bits = [true, true, false];
    let profile = reference_profile(3);
    let noise = NoiseParams::reference();
    let cases: [(Scheme, &[f64], f64); 3] = [
        (Scheme::Bcsk, &[14.64], 0.1950),
        (Scheme::Bmosk, &[], 0.0913),
        (Scheme::Mtsk, &[13.76, 13.76], 0.0181),
    ];
    for (k, (scheme, thresholds, target)) in cases.into_iter().enumerate() {
        let analytic =
            analytic_short_error(scheme, &bits, EXAMPLE_M, &profile, noise, thresholds).unwrap();
        v.near(
            &format!("{scheme} analytic"),
            analytic,
            target,
            ANALYTIC_TOL,
        );
        let mc = short_message_error_rate(scheme, &bits, thresholds, 40 + k as u64);
        let sigma = (target * (1.0 - target) / MC_TRIALS as f64).sqrt();
        v.near(
            &format!("{scheme} monte carlo"),
            mc,
            target,
            MC_SIGMAS * sigma,
        );
    }
    v.finish();
}

#[test]
fn criterion_05_particle_oracle() {
    let mut v = Verdict::new(5);
    let params = ChannelParams::reference();
    let config = SimConfig::new(1e-4, 100_000, 0.2, 2024).unwrap();
    let record = simulate_release(&params, &config);
    v.near(
        "F_hit(0.2)",
        record.absorbed_fraction(0.2),
        0.1875,
        F_HIT_TOL,
    );
    let ks = record.ks_distance(|t| params.cumulative_hit_fraction(t), 0.2);
    v.check(ks < KS_TOL, format!("KS={ks:.5} (< {KS_TOL})"));
    v.finish();
}

fn sweep_point(scheme: Scheme, pbar: f64, pa: Option<usize>, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        scheme,
        pa,
        power: Power::Pbar(pbar),
        n_bits: 100,
        n_trials: 5000,
        max_trials: 5000,
        seed,
        ..ExperimentConfig::default()
    }
}

fn describe(r: &BerResult) -> String {
    format!("{:.2e}±{:.1e}", r.ber, r.ci_halfwidth)
}

#[test]
fn criterion_06_scheme_ordering() {
    let mut v = Verdict::new(6);
    let powers = [100.0, 320.0, 1280.0];
    let mut worst_low: f64 = 0.0;
    let mut best_high: f64 = 1.0;
    for (k, &pbar) in powers.iter().enumerate() {
        let r = |s| run_ber(&sweep_point(s, pbar, None, 600 + k as u64)).unwrap();
        let (bcsk, bmosk, mtsk) = (r(Scheme::Bcsk), r(Scheme::Bmosk), r(Scheme::Mtsk));
        worst_low = worst_low.max(bcsk.ber);
        best_high = best_high.min(mtsk.ber);
        v.check(
            mtsk.clearly_below(&bmosk) && bmosk.clearly_below(&bcsk),
            format!(
                "pbar={pbar}: MTSK {} < BMoSK {} < BCSK {}",
                describe(&mtsk),
                describe(&bmosk),
                describe(&bcsk)
            ),
        );
    }
    v.check(
        worst_low < 1e-1 && best_high < 5e-3,
        format!("span: max BER {worst_low:.2e} < 1e-1, min BER {best_high:.2e} < 5e-3"),
    );
    v.finish();
}

#[test]
fn criterion_07_power_adjustment() {
    let mut v = Verdict::new(7);
    for scheme in Scheme::ALL {
        let mut separated = false;
        let mut ordered = true;
        let mut detail = Vec::new();
        for (k, pbar) in [160.0, 320.0].into_iter().enumerate() {
            let seed = 700 + k as u64;
            let none = run_ber(&sweep_point(scheme, pbar, None, seed)).unwrap();
            let k2 = run_ber(&sweep_point(scheme, pbar, Some(2), seed)).unwrap();
            let k4 = run_ber(&sweep_point(scheme, pbar, Some(4), seed)).unwrap();
            ordered &= k4.ber < k2.ber && k2.ber < none.ber;
            separated |= k4.clearly_below(&k2) && k2.clearly_below(&none);
            detail.push(format!(
                "pbar={pbar} K4 {} K2 {} none {}",
                describe(&k4),
                describe(&k2),
                describe(&none)
            ));
        }
        v.check(
            ordered && separated,
            format!("{scheme}: {}", detail.join(", ")),
        );
    }
    v.finish();
}

#[test]
fn criterion_08_dff() {
    let mut v = Verdict::new(8);
    let results: Vec<BerResult> = [5, 15, 25, 35]
        .into_iter()
        .map(|s| {
            run_ber(&ExperimentConfig {
                scheme: Scheme::Bcsk,
                detector: Some(Detector::Dff),
                power: Power::M(500.0),
                s_mem: s,
                n_bits: 10_000,
                n_trials: 20,
                max_trials: 20,
                seed: 800,
                ..ExperimentConfig::default()
            })
            .unwrap()
        })
        .collect();
    let s35 = &results[3];
    v.check(
        (DFF_BAND.0..=DFF_BAND.1).contains(&s35.ber),
        format!(
            "S=35 BER {} in [{:e}, {:e}]",
            describe(s35),
            DFF_BAND.0,
            DFF_BAND.1
        ),
    );
    let non_increasing = results
        .windows(2)
        .all(|w| w[1].ber <= w[0].ber + w[0].ci_halfwidth + w[1].ci_halfwidth);
    let curve: Vec<String> = results.iter().map(describe).collect();
    v.check(
        non_increasing,
        format!("S=5,15,25,35: {}", curve.join(", ")),
    );
    v.finish();
}

#[test]
fn criterion_09_threshold_convergence() {
    let mut v = Verdict::new(9);
    let m = 500.0;
    let prior = Prior::uniform();
    let noise = NoiseParams::reference();
    let n_hist = 100_000;
    let profile = reference_profile(n_hist);
    let gammas = optimal_thresholds(20, m, &profile, prior, noise).unwrap();
    let increasing = gammas.windows(2).all(|w| w[1] > w[0]);
    v.check(
        increasing,
        format!(
            "gamma{{1..20}} = {:.2} .. {:.2} increasing",
            gammas[0], gammas[19]
        ),
    );
    let points: Vec<(usize, f64)> = gammas
        .iter()
        .enumerate()
        .map(|(k, &g)| (k + 1, g))
        .collect();
    let fit = fit_threshold_curve(&points).unwrap();
    v.check(
        fit.rmse < FIT_RMSE_FRACTION * fit.kappa,
        format!(
            "rmse={:.4} < {:.4}",
            fit.rmse,
            FIT_RMSE_FRACTION * fit.kappa
        ),
    );
    let bits = random_bits(n_hist, prior, &mut rng_for(900, 0));
    let emitted = encode_bcsk(&bits, m).unwrap().emitted(Molecule::A);
    let counts = synthesize_counts(&emitted, &profile, noise, &mut rng_for(900, 1));
    let crossing = empirical_threshold(&counts, &bits).unwrap();
    v.near(
        "kappa vs histogram crossing",
        fit.kappa,
        crossing,
        HISTOGRAM_BIN,
    );
    v.finish();
}

#[test]
fn criterion_10_determinism() {
    let mut v = Verdict::new(10);
    let configs: Vec<ExperimentConfig> = Scheme::ALL
        .into_iter()
        .flat_map(|s| {
            [None, Some(4)].into_iter().map(move |pa| ExperimentConfig {
                n_trials: 50,
                max_trials: 50,
                training_bits: 10_000,
                ..sweep_point(s, 200.0, pa, 1000)
            })
        })
        .collect();
    let first = run_sweep(&configs).unwrap();
    let second = run_sweep(&configs).unwrap();
    v.check(
        csv_string(&first) == csv_string(&second),
        "sweep CSV identical".into(),
    );
    let base = std::env::temp_dir().join(format!("mcvd-acceptance-{}", std::process::id()));
    let (csv_a, svg_a) = emit_report(&first, &base.join("a")).unwrap();
    let (csv_b, svg_b) = emit_report(&second, &base.join("b")).unwrap();
    let same = |a: &std::path::Path, b: &std::path::Path| {
        std::fs::read(a).unwrap() == std::fs::read(b).unwrap()
    };
    v.check(
        same(&csv_a, &csv_b) && same(&svg_a, &svg_b),
        "report files byte-identical".into(),
    );
    let _ = std::fs::remove_dir_all(&base);
    v.finish();
}
