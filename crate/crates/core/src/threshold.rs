//! MAP decision thresholds for threshold-detected BCSK.
//!
//! Three layers:
//!
//! - [`pairwise_threshold`]: the crossing of two prior-weighted Gaussians,
//!   i.e. the positive root of `a·γ² + b·γ + c = 0`.
//! - [`optimal_thresholds`]: the threshold minimizing the total error
//!   probability over every candidate history at index `i`, found by a
//!   shrinking grid between `γ*{i−1}` and the all-ones sibling threshold.
//! - [`fit_threshold_curve`]: a power law `γ = α·i^β + κ` through the exact
//!   thresholds, used to extend the schedule past the enumeration cap.

use crate::channel::HittingProfile;
use crate::error::{Error, Result};
use crate::isi::{CandidateSeq, GaussianStats, IsiLevel, NoiseParams, Prior};
use crate::special::{normal_pdf, q_function};
use crate::sum::{chunked_sum, Compensated};
use std::io::{self, Write};

/// Initial grid step of the threshold search, in molecules.
pub const COARSE_STEP: f64 = 0.1;
/// Step below which the search stops once the likelihoods balance.
pub const FINE_STEP: f64 = 1e-4;
/// Relative likelihood imbalance accepted at the returned threshold.
pub const RESIDUAL_TOL: f64 = 1e-9;
const MIN_STEP: f64 = 1e-10;

/// Threshold `γ` at which `prior0·N(γ; s0)` and `prior1·N(γ; s1)` are equal,
/// taken between the two means.
pub fn pairwise_threshold(
    s0: GaussianStats,
    s1: GaussianStats,
    prior0: f64,
    prior1: f64,
) -> Result<f64> {
    if !(s1.mean > s0.mean) {
        return Err(Error::invalid(
            "stats1",
            format!("mean {} must exceed mean {}", s1.mean, s0.mean),
        ));
    }
    if !(prior0 > 0.0 && prior1 > 0.0) {
        return Err(Error::invalid("prior", "priors must be positive"));
    }
    if !(s1.var > 0.0) {
        return Err(Error::invalid("stats1", "variance must be positive"));
    }
    let (v0, v1, mu0, mu1) = (s0.var, s1.var, s0.mean, s1.mean);
    if v0 <= 0.0 {
        // A point mass at mu0 loses to any density just above it.
        return Ok(mu0);
    }
    let a = v1 - v0;
    let b = 2.0 * (v0 * mu1 - v1 * mu0);
    let c = v1 * mu0 * mu0
        - v0 * mu1 * mu1
        - 2.0 * v1 * v0 * ((prior0 * v1.sqrt()) / (prior1 * v0.sqrt())).ln();
    if a == 0.0 {
        return Ok(-c / b);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::NoCrossing(disc));
    }
    let root = disc.sqrt();
    // Same root as (−b + √Δ)/2a, without cancellation when b > 0.
    Ok(if b > 0.0 {
        2.0 * c / (-b - root)
    } else {
        (-b + root) / (2.0 * a)
    })
}

/// Total error probability `J(γ)` of deciding with threshold `γ`, where each
/// candidate is weighted by its `prob`.
pub fn error_objective(
    gamma: f64,
    candidates0: &[CandidateSeq],
    candidates1: &[CandidateSeq],
) -> f64 {
    let mut acc = Compensated::default();
    for c in candidates0 {
        acc.add(c.prob * q_function((gamma - c.stats.mean) / c.stats.std_dev()));
    }
    for c in candidates1 {
        acc.add(c.prob * q_function((c.stats.mean - gamma) / c.stats.std_dev()));
    }
    acc.value()
}

/// Threshold between the two children of history `j`: the pairwise
/// threshold of `j ‖ 0` against `j ‖ 1`.
pub fn sibling_threshold(
    level: &IsiLevel,
    j: usize,
    m: f64,
    profile: &HittingProfile,
    prior: Prior,
    noise: NoiseParams,
) -> Result<f64> {
    pairwise_threshold(
        level.stats(j, false, m, profile, noise),
        level.stats(j, true, m, profile, noise),
        prior.zero(),
        prior.one(),
    )
}

/// Candidate-weighted likelihoods of one symbol index.
struct Likelihood<'a> {
    level: &'a IsiLevel,
    m: f64,
    profile: &'a HittingProfile,
    prior: Prior,
    noise: NoiseParams,
}

impl Likelihood<'_> {
    fn term(&self, j: usize, bit: bool, gamma: f64) -> f64 {
        let s = self.level.stats(j, bit, self.m, self.profile, self.noise);
        let w = self.level.prob(j) * self.prior.of(bit);
        w * density(gamma, s)
    }

    /// `L_1(γ) − L_0(γ)`; negative below the optimal threshold.
    fn balance(&self, gamma: f64) -> f64 {
        chunked_sum(self.level.len(), |j| {
            self.term(j, true, gamma) - self.term(j, false, gamma)
        })
    }

    fn both(&self, gamma: f64) -> (f64, f64) {
        let n = self.level.len();
        (
            chunked_sum(n, |j| self.term(j, false, gamma)),
            chunked_sum(n, |j| self.term(j, true, gamma)),
        )
    }
}

fn density(x: f64, s: GaussianStats) -> f64 {
    if s.var > 0.0 {
        normal_pdf(x, s.mean, s.var)
    } else {
        0.0
    }
}

/// `γ*{1..=n}` by the shrinking-grid search, reusing each level's stats for
/// the next.
pub fn optimal_thresholds(
    n: usize,
    m: f64,
    profile: &HittingProfile,
    prior: Prior,
    noise: NoiseParams,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::invalid("M", format!("{m} must be > 0")));
    }
    profile.truncated(n).ensure_descending()?;
    let mut level = IsiLevel::first();
    let mut gammas = vec![sibling_threshold(&level, 0, m, profile, prior, noise)?];
    for _ in 2..=n {
        level = level.next(m, profile, prior)?;
        let hi = sibling_threshold(&level, level.len() - 1, m, profile, prior, noise)?;
        let lo = *gammas.last().expect("nonempty");
        let lik = Likelihood {
            level: &level,
            m,
            profile,
            prior,
            noise,
        };
        gammas.push(search(&lik, lo, hi)?);
    }
    Ok(gammas)
}

/// `γ*{i}` alone.
pub fn optimal_threshold(
    i: usize,
    m: f64,
    profile: &HittingProfile,
    prior: Prior,
    noise: NoiseParams,
) -> Result<f64> {
    if i == 0 {
        return Err(Error::invalid("i", "symbol indices start at 1"));
    }
    Ok(*optimal_thresholds(i, m, profile, prior, noise)?
        .last()
        .expect("i >= 1"))
}

/// Relative imbalance `|L_1 − L_0| / L_0` of the likelihood sums at `gamma`.
pub fn stationarity_residual(
    gamma: f64,
    i: usize,
    m: f64,
    profile: &HittingProfile,
    prior: Prior,
    noise: NoiseParams,
) -> Result<f64> {
    let level = IsiLevel::build(i, m, profile, prior)?;
    let lik = Likelihood {
        level: &level,
        m,
        profile,
        prior,
        noise,
    };
    let (l0, l1) = lik.both(gamma);
    Ok((l1 - l0).abs() / l0)
}

fn search(lik: &Likelihood<'_>, lo: f64, hi: f64) -> Result<f64> {
    if !(lik.balance(lo) < 0.0) {
        return Err(Error::BracketViolation { lo, hi });
    }
    let mut step = COARSE_STEP;
    let mut k = 1usize;
    let (mut left, mut right) = loop {
        let x = lo + k as f64 * step;
        if x > hi + step {
            return Err(Error::BracketViolation { lo, hi });
        }
        if lik.balance(x) >= 0.0 {
            break (lo + (k - 1) as f64 * step, x);
        }
        k += 1;
    };
    loop {
        if step <= FINE_STEP * (1.0 + 1e-9) {
            let mid = 0.5 * (left + right);
            let (l0, l1) = lik.both(mid);
            if (l1 - l0).abs() <= RESIDUAL_TOL * l0 || step <= MIN_STEP {
                return Ok(mid);
            }
        }
        step /= 10.0;
        let base = left;
        let mut k = 1;
        loop {
            if k == 10 {
                left = base + 9.0 * step;
                break;
            }
            let x = base + k as f64 * step;
            if lik.balance(x) >= 0.0 {
                left = base + (k - 1) as f64 * step;
                right = x;
                break;
            }
            k += 1;
        }
    }
}

/// Power law `γ(i) = α·i^β + κ` and its RMSE over the fitted points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveFit {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub rmse: f64,
}

impl CurveFit {
    pub fn eval(&self, i: usize) -> f64 {
        if self.alpha == 0.0 {
            return self.kappa;
        }
        self.alpha * (i as f64).powf(self.beta) + self.kappa
    }

    /// Smallest index from which `|γ(i) − κ| < rel_tol·|κ|`.
    pub fn convergence_index(&self, rel_tol: f64) -> usize {
        if self.alpha == 0.0 {
            return 1;
        }
        let bound = rel_tol * self.kappa.abs() / self.alpha.abs();
        let x = bound.powf(1.0 / self.beta);
        let mut i = (x.floor() as usize).max(1);
        while (self.eval(i) - self.kappa).abs() >= rel_tol * self.kappa.abs() {
            i += 1;
        }
        i
    }
}

const BETA_MIN: f64 = -1.0 + 1e-9;
const BETA_MAX: f64 = -1e-9;

/// Least-squares fit of `γ = α·i^β + κ` with `−1 < β < 0`, by damped
/// Gauss–Newton with `β` projected into its box.
pub fn fit_threshold_curve(points: &[(usize, f64)]) -> Result<CurveFit> {
    const MIN_POINTS: usize = 5;
    if points.len() < MIN_POINTS {
        return Err(Error::TooFewPoints {
            needed: MIN_POINTS,
            got: points.len(),
        });
    }
    for w in points.windows(2) {
        if !(w[1].1 > w[0].1) || w[1].0 <= w[0].0 {
            return Err(Error::NonMonotone(w[1].0));
        }
    }
    let xs: Vec<f64> = points.iter().map(|&(i, _)| i as f64).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, g)| g).collect();

    let cost = |t: &[f64; 3]| -> f64 {
        xs.iter()
            .zip(&ys)
            .map(|(&x, &y)| {
                let r = t[0] * x.powf(t[1]) + t[2] - y;
                r * r
            })
            .collect::<Compensated>()
            .value()
    };

    let kappa0 = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let beta0 = -0.5;
    let alpha0 = (ys[0] - kappa0) / xs[0].powf(beta0);
    let mut theta = [alpha0, beta0, kappa0];
    let mut current = cost(&theta);
    let mut lambda = 1e-3;

    for _ in 0..2000 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&x, &y) in xs.iter().zip(&ys) {
            let xb = x.powf(theta[1]);
            let r = theta[0] * xb + theta[2] - y;
            let jac = [xb, theta[0] * xb * x.ln(), 1.0];
            for a in 0..3 {
                jtr[a] += jac[a] * r;
                for b in 0..3 {
                    jtj[a][b] += jac[a] * jac[b];
                }
            }
        }
        let scale = (0..3).map(|a| jtj[a][a]).fold(0.0, f64::max);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut lhs = jtj;
            for (a, row) in lhs.iter_mut().enumerate() {
                row[a] += lambda * (jtj[a][a] + 1e-12 * scale);
            }
            let Some(delta) = solve3(lhs, [-jtr[0], -jtr[1], -jtr[2]]) else {
                lambda *= 4.0;
                continue;
            };
            let candidate = [
                theta[0] + delta[0],
                (theta[1] + delta[1]).clamp(BETA_MIN, BETA_MAX),
                theta[2] + delta[2],
            ];
            let c = cost(&candidate);
            if c < current {
                let gain = current - c;
                theta = candidate;
                current = c;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = gain > 1e-30 + 1e-15 * current;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            break;
        }
    }

    Ok(CurveFit {
        alpha: theta[0],
        beta: theta[1],
        kappa: theta[2],
        rmse: (current / xs.len() as f64).sqrt(),
    })
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (x, p) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// How thresholds beyond the exactly computed ones are materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Fitted curve value at every index.
    #[default]
    PerIndex,
    /// Fitted curve up to `burn_in`, then `κ`.
    ConstantKappa { burn_in: usize },
    /// One value per block of `width` indices, taken at the block midpoint.
    Binned { width: usize },
}

/// Per-index thresholds `γ*{1..}` plus an optional fitted extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSchedule {
    gammas: Vec<f64>,
    fit: Option<CurveFit>,
    strategy: Strategy,
}

impl ThresholdSchedule {
    pub fn new(gammas: Vec<f64>, fit: Option<CurveFit>, strategy: Strategy) -> Result<Self> {
        if let Strategy::Binned { width: 0 } = strategy {
            return Err(Error::invalid("width", "bin width must be >= 1"));
        }
        Ok(Self {
            gammas,
            fit,
            strategy,
        })
    }

    /// The same threshold at every index.
    pub fn constant(gamma: f64) -> Self {
        Self {
            gammas: Vec::new(),
            fit: Some(CurveFit {
                alpha: 0.0,
                beta: -0.5,
                kappa: gamma,
                rmse: 0.0,
            }),
            strategy: Strategy::PerIndex,
        }
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn fit(&self) -> Option<&CurveFit> {
        self.fit.as_ref()
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    /// Threshold for 1-based index `i`, or `None` if the schedule has no
    /// exact value and no fit there.
    pub fn threshold(&self, i: usize) -> Option<f64> {
        let point = |i: usize| -> Option<f64> {
            match self.gammas.get(i.wrapping_sub(1)) {
                Some(&g) => Some(g),
                None => self.fit.map(|f| f.eval(i)),
            }
        };
        match self.strategy {
            Strategy::PerIndex => point(i),
            Strategy::ConstantKappa { burn_in } => {
                if i > burn_in.max(self.gammas.len()) {
                    self.fit.map(|f| f.kappa)
                } else {
                    point(i)
                }
            }
            Strategy::Binned { width } => {
                if i <= self.gammas.len() {
                    return point(i);
                }
                let start = (i - 1) / width * width + 1;
                point((start + (width - 1) / 2).max(self.gammas.len() + 1))
            }
        }
    }

    /// Thresholds for indices `1..=n`.
    pub fn materialize(&self, n: usize) -> Result<Vec<f64>> {
        (1..=n)
            .map(|i| {
                self.threshold(i).ok_or(Error::ScheduleTooShort {
                    needed: n,
                    available: self.gammas.len(),
                })
            })
            .collect()
    }

    /// `i,gamma` rows for `1..=n` under a `# alpha=..,beta=..,kappa=..,rmse=..`
    /// comment line.
    pub fn write_csv<W: Write>(&self, mut out: W, n: usize) -> io::Result<()> {
        let values = self
            .materialize(n)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        match &self.fit {
            Some(f) => writeln!(
                out,
                "# alpha={},beta={},kappa={},rmse={}",
                f.alpha, f.beta, f.kappa, f.rmse
            )?,
            None => writeln!(out, "# alpha=,beta=,kappa=,rmse=")?,
        }
        writeln!(out, "i,gamma")?;
        for (i, g) in values.iter().enumerate() {
            writeln!(out, "{},{}", i + 1, g)?;
        }
        Ok(())
    }
}

/// Exact thresholds up to `i_exact` and a fitted curve beyond.
pub fn threshold_schedule(
    profile: &HittingProfile,
    m: f64,
    prior: Prior,
    noise: NoiseParams,
    i_exact: usize,
    strategy: Strategy,
) -> Result<ThresholdSchedule> {
    let gammas = optimal_thresholds(i_exact, m, profile, prior, noise)?;
    let points: Vec<(usize, f64)> = gammas
        .iter()
        .enumerate()
        .map(|(k, &g)| (k + 1, g))
        .collect();
    let fit = fit_threshold_curve(&points)?;
    ThresholdSchedule::new(gammas, Some(fit), strategy)
}
