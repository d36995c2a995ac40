//! Order-stable floating point reductions.

use rayon::prelude::*;

/// Neumaier-compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for Compensated {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Compensated::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Chunk size for parallel reductions. Results depend on this constant only,
/// never on the number of worker threads.
pub const CHUNK: usize = 1 << 14;

/// Compensated sum of `f(i)` for `i in 0..n`, evaluated in fixed-size chunks
/// (in parallel when large) and combined in index order.
pub fn chunked_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    if n <= CHUNK {
        return (0..n).map(&f).collect::<Compensated>().value();
    }
    let partials: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            (lo..hi).map(&f).collect::<Compensated>().value()
        })
        .collect();
    partials.into_iter().collect::<Compensated>().value()
}
