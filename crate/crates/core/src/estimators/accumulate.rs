//! Streaming per-time-index moments with an associative merge.

use serde::{Deserialize, Serialize};

/// Running mean and centered second moment for a vector of equal length
/// samples (Welford update, Chan merge).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl SeriesStats {
    pub fn new(len: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, sample: &[f64]) {
        assert_eq!(sample.len(), self.mean.len(), "sample length mismatch");
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(sample) {
            let delta = x - *m;
            *m += delta / n;
            *s += delta * (x - *m);
        }
    }

    pub fn merge(&mut self, other: &SeriesStats) {
        assert_eq!(other.len(), self.len(), "series length mismatch");
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![0.0; self.len()];
        }
        let d = (self.count - 1) as f64;
        self.m2.iter().map(|s| (s / d).max(0.0)).collect()
    }

    /// `sqrt(variance / K)`.
    pub fn stderr(&self) -> Vec<f64> {
        let k = self.count.max(1) as f64;
        self.variance().into_iter().map(|v| (v / k).sqrt()).collect()
    }
}

/// Accumulates instantaneous samples together with their running trapezoid
/// integrals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveAccumulator {
    dt: f64,
    instantaneous: SeriesStats,
    integrated: SeriesStats,
    weight: SeriesStats,
    #[serde(skip)]
    scratch: Vec<f64>,
}

impl CurveAccumulator {
    /// `len` samples on a grid of spacing `dt`.
    pub fn new(len: usize, dt: f64) -> Self {
        Self {
            dt,
            instantaneous: SeriesStats::new(len),
            integrated: SeriesStats::new(len),
            weight: SeriesStats::new(1),
            scratch: vec![0.0; len],
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.instantaneous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instantaneous.is_empty()
    }

    pub fn count(&self) -> u64 {
        self.instantaneous.count()
    }

    /// Adds one realization's integrand.
    pub fn push(&mut self, samples: &[f64]) {
        self.push_weighted(samples, 0.0);
    }

    /// Adds one realization and records a scalar weight (e.g. `S(X₀)`)
    /// whose mean is needed for error propagation.
    pub fn push_weighted(&mut self, samples: &[f64], weight: f64) {
        self.scratch.resize(samples.len(), 0.0);
        integrate_into(samples, self.dt, &mut self.scratch);
        self.instantaneous.push(samples);
        self.integrated.push(&self.scratch);
        self.weight.push(&[weight]);
    }

    pub fn merge(&mut self, other: &CurveAccumulator) {
        self.instantaneous.merge(&other.instantaneous);
        self.integrated.merge(&other.integrated);
        self.weight.merge(&other.weight);
    }

    pub fn instantaneous(&self) -> &SeriesStats {
        &self.instantaneous
    }

    pub fn integrated(&self) -> &SeriesStats {
        &self.integrated
    }

    pub fn mean_weight(&self) -> f64 {
        self.weight.mean()[0]
    }
}

pub(crate) fn integrate_into(samples: &[f64], dt: f64, out: &mut [f64]) {
    if samples.is_empty() {
        return;
    }
    out[0] = 0.0;
    let h = 0.5 * dt;
    for n in 1..samples.len() {
        out[n] = out[n - 1] + h * (samples[n - 1] + samples[n]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, -2.0, 7.5, 0.25];
        let mut s = SeriesStats::new(1);
        for x in xs {
            s.push(&[x]);
        }
        let m = xs.iter().sum::<f64>() / 5.0;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 4.0;
        assert!((s.mean()[0] - m).abs() < 1e-14);
        assert!((s.variance()[0] - v).abs() < 1e-12);
    }

    #[test]
    fn merge_with_empty() {
        let mut a = SeriesStats::new(2);
        let mut b = SeriesStats::new(2);
        b.push(&[1.0, 2.0]);
        a.merge(&b);
        assert_eq!(a, b);
        a.merge(&SeriesStats::new(2));
        assert_eq!(a, b);
    }

    #[test]
    fn single_sample_has_zero_variance() {
        let mut s = SeriesStats::new(1);
        s.push(&[3.0]);
        assert_eq!(s.variance(), vec![0.0]);
    }
}
