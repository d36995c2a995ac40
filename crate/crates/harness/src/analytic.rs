//! Closed-form error probability of the last bit of a short message.

use crate::config::Scheme;
use crate::error::{HarnessError, Result};
use mcvd_core::channel::HittingProfile;
use mcvd_core::isi::{received_stats, GaussianStats, NoiseParams};
use mcvd_core::modulation::{mtsk_types, Molecule};
use mcvd_core::special::{phi, q_function};

/// Longest message handled in closed form.
pub const MAX_BITS: usize = 3;

fn stats_of(
    stream: &[bool],
    m: f64,
    profile: &HittingProfile,
    noise: NoiseParams,
) -> Result<GaussianStats> {
    Ok(received_stats(stream, m, profile, noise)?)
}

/// Probability that the last bit of `bits` is decoded wrongly.
///
/// `thresholds` holds the BCSK threshold `[γ]`, the MTSK stream thresholds
/// `[γ_A, γ_B]`, or nothing for BMoSK.
pub fn analytic_short_error(
    scheme: Scheme,
    bits: &[bool],
    m: f64,
    profile: &HittingProfile,
    noise: NoiseParams,
    thresholds: &[f64],
) -> Result<f64> {
    if bits.is_empty() || bits.len() > MAX_BITS {
        return Err(HarnessError::config(format!(
            "closed forms cover 1 to {MAX_BITS} bits, got {}",
            bits.len()
        )));
    }
    let want = match scheme {
        Scheme::Bcsk => 1,
        Scheme::Bmosk => 0,
        Scheme::Mtsk => 2,
    };
    if thresholds.len() != want {
        return Err(HarnessError::config(format!(
            "{scheme} needs {want} threshold(s), got {}",
            thresholds.len()
        )));
    }
    let last = *bits.last().expect("nonempty");
    Ok(match scheme {
        Scheme::Bcsk => {
            let s = stats_of(bits, m, profile, noise)?;
            let z = (thresholds[0] - s.mean) / s.std_dev();
            if last {
                phi(z)
            } else {
                q_function(z)
            }
        }
        Scheme::Bmosk => {
            let ones: Vec<bool> = bits.to_vec();
            let zeros: Vec<bool> = bits.iter().map(|b| !b).collect();
            let b = stats_of(&ones, m, profile, noise)?;
            let a = stats_of(&zeros, m, profile, noise)?;
            let spread = (a.var + b.var).sqrt();
            if last {
                // Wrong when C(A) >= C(B).
                q_function((b.mean - a.mean) / spread)
            } else {
                q_function((a.mean - b.mean) / spread)
            }
        }
        Scheme::Mtsk => {
            let types = mtsk_types(bits);
            let stream =
                |t: Molecule| -> Vec<bool> { types.iter().map(|&x| x == Some(t)).collect() };
            let a = stats_of(&stream(Molecule::A), m, profile, noise)?;
            let b = stats_of(&stream(Molecule::B), m, profile, noise)?;
            let below = phi((thresholds[0] - a.mean) / a.std_dev())
                * phi((thresholds[1] - b.mean) / b.std_dev());
            if last {
                below
            } else {
                1.0 - below
            }
        }
    })
}
