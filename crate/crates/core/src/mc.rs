//! Seeded random streams and Monte Carlo estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// A Monte Carlo (or deterministic, with zero error) estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
        }
    }

    /// True when `other` lies within `k` combined standard errors plus `slack`.
    pub fn agrees_with(&self, other: f64, k: f64, slack: f64) -> bool {
        (self.value - other).abs() <= k * self.std_error + slack
    }
}

/// Deterministic generator for `(seed, stream)`; distinct streams are
/// independent, so per-point or per-index work can draw in any order.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on the half-open interval (0, 1].
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Uniform direction on the unit sphere in dimension `n`, written into `out`.
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    if out.len() == 1 {
        out[0] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        return;
    }
    loop {
        let mut norm2 = 0.0;
        for v in out.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *v = g;
            norm2 += g * g;
        }
        if norm2 > 1e-300 {
            let inv = norm2.sqrt().recip();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

/// Uniform point in the unit ball in dimension `n`, written into `out`.
pub fn unit_ball_point<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    unit_direction(rng, out);
    let r = rng.random::<f64>().powf(1.0 / out.len() as f64);
    out.iter_mut().for_each(|v| *v *= r);
}

/// Welford accumulator for sample mean and standard error.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn estimate(&self) -> Estimate {
        let n = self.count as f64;
        let var = if self.count > 1 { self.m2 / (n - 1.0) } else { 0.0 };
        Estimate {
            value: self.mean,
            std_error: (var / n).sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| stream_rng(7, 1).random()).collect();
        let mut r1 = stream_rng(7, 1);
        let mut r2 = stream_rng(7, 2);
        let x: u64 = r1.random();
        let y: u64 = r2.random();
        assert_eq!(a[0], x);
        assert_ne!(x, y);
    }

    #[test]
    fn accumulator_matches_closed_form() {
        let mut acc = MeanAccumulator::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            acc.push(x);
        }
        let e = acc.estimate();
        assert!((e.value - 2.5).abs() < 1e-15);
        // sample variance 5/3, se = sqrt(5/12)
        assert!((e.std_error - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ball_points_stay_inside() {
        let mut rng = stream_rng(1, 0);
        let mut p = [0.0; 3];
        for _ in 0..1000 {
            unit_ball_point(&mut rng, &mut p);
            assert!(p.iter().map(|v| v * v).sum::<f64>() <= 1.0 + 1e-12);
        }
    }
}
