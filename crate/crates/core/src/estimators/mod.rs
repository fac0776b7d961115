//! Transport-coefficient estimators and their statistics.
//!
//! Every estimator reduces to averaging a per-realization integrand over `K`
//! realizations and integrating it in time with the trapezoid rule. The
//! batch functions below take stored samples; long runs stream through
//! [`CurveAccumulator`] directly and call [`EstimatorResult::from_accumulator`].

mod accumulate;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use accumulate::{CurveAccumulator, SeriesStats};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Naive,
    Subtraction,
    GreenKubo,
    Ttcf,
    TtcfRecentered,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Naive => "naive",
            EstimatorKind::Subtraction => "subtraction",
            EstimatorKind::GreenKubo => "green_kubo",
            EstimatorKind::Ttcf => "ttcf",
            EstimatorKind::TtcfRecentered => "ttcf_recentered",
        }
    }
}

/// Averaged curves for one estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub kind: EstimatorKind,
    pub eta: f64,
    pub dt: f64,
    pub realizations: u64,
    /// Final value of `mean_curve`.
    pub estimate: f64,
    pub stderr: f64,
    pub mean_instantaneous: Vec<f64>,
    pub stderr_instantaneous: Vec<f64>,
    /// Mean running integral.
    pub mean_curve: Vec<f64>,
    pub stderr_curve: Vec<f64>,
    /// Per-realization sample variance of the running integral.
    pub variance_curve: Vec<f64>,
}

impl EstimatorResult {
    pub fn from_accumulator(kind: EstimatorKind, eta: f64, acc: &CurveAccumulator) -> Self {
        let mean_curve = acc.integrated().mean().to_vec();
        let stderr_curve = acc.integrated().stderr();
        Self {
            kind,
            eta,
            dt: acc.dt(),
            realizations: acc.count(),
            estimate: mean_curve.last().copied().unwrap_or(0.0),
            stderr: stderr_curve.last().copied().unwrap_or(0.0),
            mean_instantaneous: acc.instantaneous().mean().to_vec(),
            stderr_instantaneous: acc.instantaneous().stderr(),
            mean_curve,
            stderr_curve,
            variance_curve: acc.integrated().variance(),
        }
    }

    pub fn len(&self) -> usize {
        self.mean_curve.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_curve.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }

    /// Grid index closest to `t`, if `t` lies on the grid span.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        if !(t >= 0.0) || self.is_empty() {
            return None;
        }
        let n = (t / self.dt).round() as usize;
        (n < self.len()).then_some(n)
    }

    /// Per-realization variance of the integrated estimator at time `t`.
    pub fn variance_at(&self, t: f64) -> Option<f64> {
        self.index_of(t).map(|n| self.variance_curve[n])
    }

    pub fn mean_at(&self, t: f64) -> Option<f64> {
        self.index_of(t).map(|n| self.mean_curve[n])
    }

    pub fn stderr_at(&self, t: f64) -> Option<f64> {
        self.index_of(t).map(|n| self.stderr_curve[n])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mean_instantaneous_response/eta,stderr,mean_integrated,stderr_integrated\n");
        for n in 0..self.len() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.time(n),
                self.mean_instantaneous[n],
                self.stderr_instantaneous[n],
                self.mean_curve[n],
                self.stderr_curve[n]
            );
        }
        out
    }
}

/// Running trapezoid integral; `curve[0] = 0`.
pub fn integrate_series(samples: &[f64], dt: f64) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::invalid("samples", "need at least two samples"));
    }
    let mut out = vec![0.0; samples.len()];
    accumulate::integrate_into(samples, dt, &mut out);
    Ok(out)
}

fn check_eta(eta: f64) -> Result<()> {
    if eta == 0.0 {
        Err(Error::ZeroForcing)
    } else {
        Ok(())
    }
}

fn grid_len<T: AsRef<[f64]>>(runs: &[T]) -> Result<usize> {
    let len = runs.first().map(|r| r.as_ref().len()).unwrap_or(0);
    if len < 2 {
        return Err(Error::invalid("runs", "need at least one run with two samples"));
    }
    if let Some(bad) = runs.iter().find(|r| r.as_ref().len() != len) {
        return Err(Error::DimensionMismatch {
            expected: len,
            actual: bad.as_ref().len(),
        });
    }
    Ok(len)
}

/// `(1/η)∫R(X^η)` averaged over runs.
pub fn naive_transient_estimate<T: AsRef<[f64]>>(runs: &[T], eta: f64, dt: f64) -> Result<EstimatorResult> {
    check_eta(eta)?;
    let len = grid_len(runs)?;
    let mut acc = CurveAccumulator::new(len, dt);
    let mut buf = vec![0.0; len];
    for r in runs {
        for (b, x) in buf.iter_mut().zip(r.as_ref()) {
            *b = x / eta;
        }
        acc.push(&buf);
    }
    Ok(EstimatorResult::from_accumulator(EstimatorKind::Naive, eta, &acc))
}

/// `(1/η)∫(R(X^η) − R(Y⁰))` over synchronously coupled pairs.
pub fn subtraction_estimate<T: AsRef<[f64]>>(
    transient: &[T],
    equilibrium: &[T],
    eta: f64,
    dt: f64,
) -> Result<EstimatorResult> {
    check_eta(eta)?;
    let len = grid_len(transient)?;
    if equilibrium.len() != transient.len() {
        return Err(Error::DimensionMismatch {
            expected: transient.len(),
            actual: equilibrium.len(),
        });
    }
    if grid_len(equilibrium)? != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            actual: equilibrium[0].as_ref().len(),
        });
    }
    let mut acc = CurveAccumulator::new(len, dt);
    let mut buf = vec![0.0; len];
    for (x, y) in transient.iter().zip(equilibrium) {
        for ((b, a), c) in buf.iter_mut().zip(x.as_ref()).zip(y.as_ref()) {
            *b = (a - c) / eta;
        }
        acc.push(&buf);
    }
    Ok(EstimatorResult::from_accumulator(EstimatorKind::Subtraction, eta, &acc))
}

/// `S(X₀)∫R(X)` over equilibrium runs.
pub fn green_kubo_estimate<T: AsRef<[f64]>>(runs: &[T], conjugate: &[f64], dt: f64) -> Result<EstimatorResult> {
    let len = grid_len(runs)?;
    weighted(runs, conjugate, len, dt, 0.0)
        .map(|acc| EstimatorResult::from_accumulator(EstimatorKind::GreenKubo, 0.0, &acc))
}

/// Mean of `R` under the forced steady state with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyMean {
    pub mean: f64,
    pub stderr: f64,
}

/// `∫R(Y^η)S(Y₀)` over forced runs from equilibrium initial conditions.
///
/// With `recenter`, `R` is replaced by `R − m` where `m` is the supplied
/// steady-state mean; the uncertainty of `m` is folded into the error bars.
pub fn ttcf_estimate<T: AsRef<[f64]>>(
    runs: &[T],
    conjugate: &[f64],
    eta: f64,
    dt: f64,
    recenter: bool,
    steady_mean: Option<SteadyMean>,
) -> Result<EstimatorResult> {
    let len = grid_len(runs)?;
    let shift = match (recenter, steady_mean) {
        (false, _) => None,
        (true, None) => return Err(Error::MissingSteadyMean),
        (true, Some(m)) => Some(m),
    };
    let acc = weighted(runs, conjugate, len, dt, shift.map_or(0.0, |m| m.mean))?;
    let kind = if recenter {
        EstimatorKind::TtcfRecentered
    } else {
        EstimatorKind::Ttcf
    };
    let mut result = EstimatorResult::from_accumulator(kind, eta, &acc);
    if let Some(m) = shift {
        propagate_steady_mean_error(&mut result, m.stderr, acc.mean_weight());
    }
    Ok(result)
}

fn weighted<T: AsRef<[f64]>>(runs: &[T], conjugate: &[f64], len: usize, dt: f64, shift: f64) -> Result<CurveAccumulator> {
    if conjugate.len() != runs.len() {
        return Err(Error::DimensionMismatch {
            expected: runs.len(),
            actual: conjugate.len(),
        });
    }
    let mut acc = CurveAccumulator::new(len, dt);
    let mut buf = vec![0.0; len];
    for (r, &s) in runs.iter().zip(conjugate) {
        for (b, x) in buf.iter_mut().zip(r.as_ref()) {
            *b = (x - shift) * s;
        }
        acc.push_weighted(&buf, s);
    }
    Ok(acc)
}

/// Adds the contribution `t·|S̄|·σ_m` of an uncertain recentering constant
/// to the integrated error bars (and `|S̄|·σ_m` to the instantaneous ones).
pub fn propagate_steady_mean_error(result: &mut EstimatorResult, mean_stderr: f64, mean_conjugate: f64) {
    let a = mean_stderr * mean_conjugate.abs();
    for n in 0..result.len() {
        let t = result.time(n);
        result.stderr_curve[n] = result.stderr_curve[n].hypot(a * t);
        result.stderr_instantaneous[n] = result.stderr_instantaneous[n].hypot(a);
    }
    result.stderr = result.stderr_curve.last().copied().unwrap_or(0.0);
}

/// Long-time average of a single forced trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NemdResult {
    /// `⟨R⟩/η`.
    pub estimate: f64,
    pub stderr: f64,
    /// Undivided time average, an estimate of the steady mean of `R`.
    pub steady: SteadyMean,
}

/// Time average of `R` after `burn_in`, divided by `η`; error bars from
/// `n_batches` batch means.
pub fn nemd_estimate(samples: &[f64], eta: f64, dt: f64, burn_in: f64, n_batches: usize) -> Result<NemdResult> {
    check_eta(eta)?;
    let length = dt * (samples.len().saturating_sub(1)) as f64;
    if burn_in >= length {
        return Err(Error::BurnIn { burn_in, length });
    }
    let start = (burn_in / dt).ceil() as usize;
    let kept = &samples[start..];
    if kept.len() < 2 {
        return Err(Error::BurnIn { burn_in, length });
    }
    let span = dt * (kept.len() - 1) as f64;
    let integral = integrate_series(kept, dt)?;
    let mean = integral[integral.len() - 1] / span;
    let n_batches = n_batches.clamp(2, kept.len());
    let batch = kept.len() / n_batches;
    let mut stats = SeriesStats::new(1);
    for b in 0..n_batches {
        let chunk = &kept[b * batch..(b + 1) * batch];
        stats.push(&[chunk.iter().sum::<f64>() / chunk.len() as f64]);
    }
    let stderr = stats.stderr()[0];
    Ok(NemdResult {
        estimate: mean / eta,
        stderr: stderr / eta.abs(),
        steady: SteadyMean { mean, stderr },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub eta: f64,
    pub t: f64,
    pub var_naive: f64,
    pub var_sub: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VarianceTable {
    pub rows: Vec<VarianceRow>,
}

impl VarianceTable {
    pub fn extend(&mut self, other: VarianceTable) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("eta,T,var_naive,var_sub,ratio\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.eta, r.t, r.var_naive, r.var_sub, r.ratio
            );
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{:>10} {:>8} {:>14} {:>14} {:>14}\n",
            "eta", "T", "var_naive", "var_sub", "ratio"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:>10} {:>8} {:>14.4e} {:>14.4e} {:>14.4e}",
                r.eta, r.t, r.var_naive, r.var_sub, r.ratio
            );
        }
        out
    }
}

/// Rows `(η, T, var_naive, var_sub, var_naive/var_sub)` for the requested times.
pub fn variance_report(naive: &EstimatorResult, sub: &EstimatorResult, times: &[f64]) -> Result<VarianceTable> {
    if naive.len() != sub.len() || naive.dt != sub.dt {
        return Err(Error::invalid("variance_report", "results must share a time grid"));
    }
    let mut rows = Vec::with_capacity(times.len());
    for &t in times {
        let (Some(vn), Some(vs)) = (naive.variance_at(t), sub.variance_at(t)) else {
            return Err(Error::invalid("times", format!("t = {t} lies outside the time grid")));
        };
        rows.push(VarianceRow {
            eta: naive.eta,
            t,
            var_naive: vn,
            var_sub: vs,
            ratio: vn / vs,
        });
    }
    Ok(VarianceTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trapezoid_basics() {
        assert_eq!(integrate_series(&[0.0, 1.0], 1.0).unwrap(), vec![0.0, 0.5]);
        let c = integrate_series(&[2.0; 11], 0.1).unwrap();
        assert!((c[10] - 2.0).abs() < 1e-15);
        let lin: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        assert!((integrate_series(&lin, 0.1).unwrap()[10] - 0.5).abs() < 1e-15);
        assert!(integrate_series(&[1.0], 0.1).is_err());
    }

    #[test]
    fn naive_arithmetic() {
        // per-run integrals a = 1, b = 3 on [0, 1]
        let runs = vec![vec![1.0, 1.0], vec![3.0, 3.0]];
        let r = naive_transient_estimate(&runs, 0.5, 1.0).unwrap();
        assert!((r.estimate - 4.0).abs() < 1e-15);
        let zero = naive_transient_estimate(&[vec![0.0; 5], vec![0.0; 5]], 0.1, 0.1).unwrap();
        assert_eq!(zero.estimate, 0.0);
        assert_eq!(zero.variance_at(0.4), Some(0.0));
        assert!(matches!(naive_transient_estimate(&runs, 0.0, 1.0), Err(Error::ZeroForcing)));
    }

    #[test]
    fn subtraction_of_identical_paths_is_zero() {
        let runs = vec![vec![0.3, -1.0, 2.0], vec![1.5, 0.1, 0.2]];
        let r = subtraction_estimate(&runs, &runs, 1.0, 0.1).unwrap();
        assert_eq!(r.estimate, 0.0);
        assert!(r.variance_curve.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn green_kubo_with_zero_weights() {
        let runs = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        assert_eq!(green_kubo_estimate(&runs, &[0.0, 0.0], 0.1).unwrap().estimate, 0.0);
    }

    #[test]
    fn ttcf_recentering() {
        let runs = vec![vec![0.1, -0.2, 0.3], vec![-0.5, 0.4, 0.0]];
        let s = [0.7, -1.1];
        let plain = ttcf_estimate(&runs, &s, 0.1, 0.1, false, None).unwrap();
        let zero = SteadyMean { mean: 0.0, stderr: 0.0 };
        let rec = ttcf_estimate(&runs, &s, 0.1, 0.1, true, Some(zero)).unwrap();
        assert_eq!(plain.mean_curve, rec.mean_curve);
        assert_eq!(plain.stderr_curve, rec.stderr_curve);
        assert!(matches!(
            ttcf_estimate(&runs, &s, 0.1, 0.1, true, None),
            Err(Error::MissingSteadyMean)
        ));
    }

    #[test]
    fn nemd_constant_and_guards() {
        let r = nemd_estimate(&[2.0; 101], 0.5, 0.1, 1.0, 10).unwrap();
        assert!((r.estimate - 4.0).abs() < 1e-12);
        assert_eq!(r.stderr, 0.0);
        assert!(matches!(nemd_estimate(&[2.0; 101], 0.5, 0.1, 10.0, 10), Err(Error::BurnIn { .. })));
        assert!(matches!(nemd_estimate(&[2.0; 101], 0.0, 0.1, 1.0, 10), Err(Error::ZeroForcing)));
    }

    #[test]
    fn report_ratio_and_csv() {
        let runs = vec![vec![0.0, 1.0, 2.0], vec![0.0, -1.0, 0.5], vec![1.0, 1.0, 1.0]];
        let a = naive_transient_estimate(&runs, 1.0, 0.5).unwrap();
        let table = variance_report(&a, &a, &[0.5, 1.0]).unwrap();
        assert!(table.rows.iter().all(|r| r.ratio == 1.0));
        assert_eq!(table.to_csv().lines().count(), 3);
        assert!(variance_report(&a, &a, &[5.0]).is_err());
        let csv = a.to_csv();
        assert!(csv.starts_with("t,mean_instantaneous_response/eta"));
        assert_eq!(csv.lines().count(), 4);
    }

    fn runs_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..8, 2usize..12).prop_flat_map(|(len, k)| prop::collection::vec(prop::collection::vec(-10.0f64..10.0, len), k))
    }

    proptest! {
        #[test]
        fn scaling(runs in runs_strategy(), c in -5.0f64..5.0) {
            let base = naive_transient_estimate(&runs, 0.1, 0.01).unwrap();
            let scaled_runs: Vec<Vec<f64>> = runs.iter().map(|r| r.iter().map(|x| c * x).collect()).collect();
            let scaled = naive_transient_estimate(&scaled_runs, 0.1, 0.01).unwrap();
            let scale = base.estimate.abs().max(1e-300);
            prop_assert!((scaled.estimate - c * base.estimate).abs() <= 1e-10 * scale.max(1.0) * c.abs().max(1.0));
            for (v, w) in base.variance_curve.iter().zip(&scaled.variance_curve) {
                prop_assert!((w - c * c * v).abs() <= 1e-10 * (1.0 + c * c * v));
            }
        }

        #[test]
        fn merge_is_schedule_independent(runs in runs_strategy(), split in 0usize..12) {
            let len = runs[0].len();
            let mut whole = CurveAccumulator::new(len, 0.1);
            for r in &runs { whole.push(r); }
            let split = split.min(runs.len());
            let mut a = CurveAccumulator::new(len, 0.1);
            let mut b = CurveAccumulator::new(len, 0.1);
            for r in &runs[..split] { a.push(r); }
            for r in &runs[split..] { b.push(r); }
            b.merge(&a);
            prop_assert_eq!(whole.count(), b.count());
            for (x, y) in whole.integrated().mean().iter().zip(b.integrated().mean()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
            for (x, y) in whole.integrated().variance().iter().zip(b.integrated().variance()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }
}
