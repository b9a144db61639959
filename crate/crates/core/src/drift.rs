//! Behaviour-cloning regret and frame-level vs segment-level drift.
//!
//! Autoregressive generation is treated as an imitation-learning rollout: at
//! every step the cloned policy leaves the oracle's state distribution with
//! probability `eps` and, once off-distribution, pays `cost_cap` on every
//! remaining step. The oracle pays nothing, so the regret is the clone's total
//! cost, with expectation `cost_cap * sum_{t=1..T} (1 - (1 - eps)^t)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::layout::MacroLayout;
use crate::toygen::{GenError, GroundTruth, NoiseModel, ToyGenerator};

/// Peaks at or below this are treated as zero when forming drift ratios.
pub const NEGLIGIBLE_DEVIATION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DriftError {
    #[error("per-step error must lie in [0, 1], got {0}")]
    InvalidEpsilon(f64),
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("cost cap must be finite and non-negative, got {0}")]
    InvalidCostCap(f64),
    #[error("at least one trial is required")]
    NoTrials,
    #[error(transparent)]
    Generator(#[from] GenError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImitationModel {
    eps: f64,
    horizon: usize,
    cost_cap: f64,
}

impl ImitationModel {
    pub fn new(eps: f64, horizon: usize) -> Result<Self, DriftError> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(DriftError::InvalidEpsilon(eps));
        }
        if horizon == 0 {
            return Err(DriftError::InvalidHorizon);
        }
        Ok(Self { eps, horizon, cost_cap: 1.0 })
    }

    pub fn with_cost_cap(mut self, cost_cap: f64) -> Result<Self, DriftError> {
        if !cost_cap.is_finite() || cost_cap < 0.0 {
            return Err(DriftError::InvalidCostCap(cost_cap));
        }
        self.cost_cap = cost_cap;
        Ok(self)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn cost_cap(&self) -> f64 {
        self.cost_cap
    }

    /// Closed-form expected regret.
    pub fn expected_regret(&self) -> f64 {
        let stay = 1.0 - self.eps;
        let mut survive = 1.0;
        let mut total = 0.0;
        for _ in 0..self.horizon {
            survive *= stay;
            total += 1.0 - survive;
        }
        self.cost_cap * total
    }

    /// Cost of one rollout; `fails_at(t)` says whether the clone has left the
    /// oracle's states by step `t`.
    fn rollout(&self, mut fails_at: impl FnMut(usize) -> bool) -> f64 {
        let mut off = false;
        let mut cost = 0.0;
        for t in 1..=self.horizon {
            off = off || fails_at(t);
            if off {
                cost += self.cost_cap;
            }
        }
        cost
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretEstimate {
    pub mean_regret: f64,
    pub std_error: f64,
    pub trials: usize,
    pub expected: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

impl RegretEstimate {
    pub fn within_bounds(&self) -> bool {
        self.lower_bound <= self.mean_regret && self.mean_regret <= self.upper_bound
    }

    pub fn relative_error(&self) -> f64 {
        if self.expected == 0.0 {
            self.mean_regret.abs()
        } else {
            (self.mean_regret - self.expected).abs() / self.expected
        }
    }
}

/// How rollouts draw their randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Trial `i` of `n` is driven by one uniform from the stratum `(i/n, (i+1)/n]`
    /// and leaves the oracle at the first step whose cumulative failure
    /// probability reaches it.
    #[default]
    Stratified,
    /// Independent Bernoulli draw at every step of every trial.
    Independent,
}

/// `(T * eps, T^2 * eps)`.
pub fn regret_bounds(horizon: usize, eps: f64) -> Result<(f64, f64), DriftError> {
    let model = ImitationModel::new(eps, horizon)?;
    let t = model.horizon as f64;
    Ok((t * eps, t * t * eps))
}

pub fn simulate_bc_regret(model: &ImitationModel, trials: usize, seed: u64) -> Result<RegretEstimate, DriftError> {
    simulate_bc_regret_with(model, trials, seed, Sampling::default())
}

pub fn simulate_bc_regret_with(
    model: &ImitationModel,
    trials: usize,
    seed: u64,
    sampling: Sampling,
) -> Result<RegretEstimate, DriftError> {
    if trials == 0 {
        return Err(DriftError::NoTrials);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stay = 1.0 - model.eps;
    let n = trials as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for i in 0..trials {
        let cost = match sampling {
            Sampling::Stratified => {
                let u = (i as f64 + 1.0 - rng.random::<f64>()) / n;
                model.rollout(|t| u <= 1.0 - stay.powi(t as i32))
            }
            Sampling::Independent => model.rollout(|_| rng.random::<f64>() < model.eps),
        };
        sum += cost;
        sum_sq += cost * cost;
    }
    let mean = sum / n;
    let variance = if trials > 1 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    let (lower_bound, upper_bound) = regret_bounds(model.horizon, model.eps)?;
    Ok(RegretEstimate {
        mean_regret: mean,
        std_error: (variance / n).sqrt(),
        trials,
        expected: model.expected_regret(),
        lower_bound: lower_bound * model.cost_cap,
        upper_bound: upper_bound * model.cost_cap,
    })
}

/// Per-position deviation curves of the frame-by-frame baseline and the
/// planned generator on the same timeline.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftComparison {
    pub trials: usize,
    pub ar_mean: Vec<f64>,
    pub ar_max: Vec<f64>,
    pub mmpl_mean: Vec<f64>,
    pub mmpl_max: Vec<f64>,
    pub ar_peak: f64,
    pub mmpl_peak: f64,
    /// `ar_peak / mmpl_peak`; `None` when the planned peak is negligible.
    pub ratio: Option<f64>,
}

impl DriftComparison {
    pub fn positions(&self) -> usize {
        self.ar_mean.len()
    }
}

/// Runs both generators `trials` times on the timeline of `layout` with the
/// same error magnitudes. Trial `k` uses a seed derived from `(noise.seed, k)`;
/// without jitter every trial is identical and only one is evaluated.
pub fn compare_drift(layout: &MacroLayout, noise: &NoiseModel, trials: usize) -> Result<DriftComparison, DriftError> {
    compare_drift_with(layout, noise, trials, &GroundTruth::default())
}

pub fn compare_drift_with(
    layout: &MacroLayout,
    noise: &NoiseModel,
    trials: usize,
    truth: &GroundTruth,
) -> Result<DriftComparison, DriftError> {
    if trials == 0 {
        return Err(DriftError::NoTrials);
    }
    let horizon = layout.timeline_len();
    let distinct = if noise.jitter { trials } else { 1 };
    let mut ar_curves = Vec::with_capacity(distinct);
    let mut mmpl_curves = Vec::with_capacity(distinct);
    for k in 0..distinct {
        let trial_noise = noise.with_seed(trial_seed(noise.seed, k));
        let generator = ToyGenerator::new(truth.clone(), trial_noise)?;
        let initial = generator.clean_frame(0);
        let ar: Vec<f64> = std::iter::once(initial.deviation(truth))
            .chain(generator.ar_generate(&initial, horizon)?.iter().map(|f| f.deviation(truth)))
            .collect();
        ar_curves.push(ar);
        mmpl_curves.push(generator.generate_video(layout)?.trace.timeline());
    }
    let (ar_mean, ar_max) = summarize(&ar_curves, horizon);
    let (mmpl_mean, mmpl_max) = summarize(&mmpl_curves, horizon);
    let ar_peak = ar_mean.iter().copied().fold(0.0, f64::max);
    let mmpl_peak = mmpl_mean.iter().copied().fold(0.0, f64::max);
    let ratio = (mmpl_peak > NEGLIGIBLE_DEVIATION).then(|| ar_peak / mmpl_peak);
    Ok(DriftComparison { trials, ar_mean, ar_max, mmpl_mean, mmpl_max, ar_peak, mmpl_peak, ratio })
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    crate::toygen::derive_seed(seed, trial as u64)
}

/// Fixed-order reduction of per-trial curves into mean and max curves.
fn summarize(curves: &[Vec<f64>], len: usize) -> (Vec<f64>, Vec<f64>) {
    let n = curves.len() as f64;
    let mut mean = vec![0.0; len];
    let mut max = vec![0.0f64; len];
    for curve in curves {
        debug_assert_eq!(curve.len(), len);
        for (i, v) in curve.iter().enumerate() {
            mean[i] += v;
            max[i] = max[i].max(*v);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    (mean, max)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::layout::{ChainingMode, SegmentLayout};

    #[test]
    fn bounds_examples() {
        let (lo, hi) = regret_bounds(100, 0.01).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 100.0).abs() < 1e-12);
        assert_eq!(regret_bounds(1, 0.5).unwrap(), (0.5, 0.5));
        assert_eq!(regret_bounds(10, 0.0).unwrap(), (0.0, 0.0));
        assert_eq!(regret_bounds(0, 0.1), Err(DriftError::InvalidHorizon));
        assert_eq!(regret_bounds(5, 1.5), Err(DriftError::InvalidEpsilon(1.5)));
        assert!(regret_bounds(5, f64::NAN).is_err());
    }

    /// Exact expectation by enumerating the first step at which the clone
    /// leaves the oracle's states.
    fn enumerated_expectation(eps: f64, horizon: usize) -> f64 {
        (1..=horizon).map(|tau| (1.0 - eps).powi(tau as i32 - 1) * eps * (horizon - tau + 1) as f64).sum()
    }

    #[test]
    fn closed_form_matches_enumeration() {
        for (eps, t) in [(0.01, 50usize), (0.3, 7), (1.0, 5), (0.0, 10), (0.005, 200)] {
            let model = ImitationModel::new(eps, t).unwrap();
            assert!((model.expected_regret() - enumerated_expectation(eps, t)).abs() < 1e-9);
        }
        let m = ImitationModel::new(0.01, 50).unwrap();
        assert!((m.expected_regret() - 10.895_600_646_616).abs() < 1e-9);
    }

    #[test]
    fn degenerate_rollouts() {
        let zero = simulate_bc_regret(&ImitationModel::new(0.0, 20).unwrap(), 1000, 1).unwrap();
        assert_eq!(zero.mean_regret, 0.0);
        let certain = ImitationModel::new(1.0, 5).unwrap();
        for sampling in [Sampling::Stratified, Sampling::Independent] {
            let est = simulate_bc_regret_with(&certain, 100, 2, sampling).unwrap();
            assert_eq!(est.mean_regret, 5.0);
        }
        assert_eq!(simulate_bc_regret(&certain, 0, 0), Err(DriftError::NoTrials));
    }

    #[test]
    fn documented_example_within_three_percent() {
        let model = ImitationModel::new(0.01, 50).unwrap();
        let est = simulate_bc_regret(&model, 100_000, 7).unwrap();
        assert!(est.relative_error() < 0.03, "{est:?}");
        assert!(est.within_bounds());
        assert_eq!((est.lower_bound, est.upper_bound), (0.5, 25.0));
    }

    #[test]
    fn independent_sampling_agrees_statistically() {
        let model = ImitationModel::new(0.02, 40).unwrap();
        let est = simulate_bc_regret_with(&model, 100_000, 3, Sampling::Independent).unwrap();
        assert!((est.mean_regret - est.expected).abs() < 4.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn cost_cap_scales() {
        let model = ImitationModel::new(0.1, 10).unwrap().with_cost_cap(2.5).unwrap();
        let est = simulate_bc_regret(&model, 50_000, 1).unwrap();
        assert!(
            (model.expected_regret() - 2.5 * ImitationModel::new(0.1, 10).unwrap().expected_regret()).abs() < 1e-12
        );
        assert!(est.relative_error() < 0.01);
        assert!(ImitationModel::new(0.1, 10).unwrap().with_cost_cap(-1.0).is_err());
    }

    #[test]
    fn regret_monotone_on_grid() {
        let eps_grid = [0.0, 0.001, 0.005, 0.01, 0.05, 0.2];
        let t_grid = [1usize, 5, 10, 50, 100];
        for &eps in &eps_grid {
            let mut prev = -1.0;
            for &t in &t_grid {
                let m = simulate_bc_regret(&ImitationModel::new(eps, t).unwrap(), 5_000, 9).unwrap().mean_regret;
                assert!(m >= prev);
                prev = m;
            }
        }
        for &t in &t_grid {
            let mut prev = -1.0;
            for &eps in &eps_grid {
                let m = simulate_bc_regret(&ImitationModel::new(eps, t).unwrap(), 5_000, 9).unwrap().mean_regret;
                assert!(m >= prev);
                prev = m;
            }
        }
    }

    fn reference_layout(s: usize, mode: ChainingMode) -> MacroLayout {
        MacroLayout::new(SegmentLayout::default(), s, mode).unwrap()
    }

    #[test]
    fn zero_noise_comparison() {
        let cmp = compare_drift(&reference_layout(4, ChainingMode::MaxThroughput), &NoiseModel::zero(), 3).unwrap();
        assert!(cmp.ar_mean.iter().all(|v| *v == 0.0));
        assert!(cmp.mmpl_peak <= NEGLIGIBLE_DEVIATION);
        assert_eq!(cmp.ratio, None);
        assert_eq!(cmp.positions(), 1 + 4 * 19);
    }

    #[test]
    fn documented_ten_segment_comparison() {
        let cmp =
            compare_drift(&reference_layout(10, ChainingMode::MaxThroughput), &NoiseModel::uniform(0.01), 5).unwrap();
        assert_eq!(cmp.positions(), 191);
        assert!((cmp.ar_peak - 1.9).abs() < 1e-12);
        // last segment: 10 plan hops + 9 codec hops + one fill
        assert!((cmp.mmpl_peak - 0.20).abs() < 1e-12);
        let ratio = cmp.ratio.unwrap();
        assert!((ratio - 9.5).abs() < 1e-9, "{ratio}");
    }

    #[test]
    fn single_segment_planned_drift_never_worse() {
        for (n, a, b) in [(4usize, 2usize, 3usize), (10, 2, 6), (20, 2, 10), (21, 4, 11)] {
            for eps in [1e-4, 0.01, 0.3] {
                for mode in ChainingMode::ALL {
                    let layout = MacroLayout::new(SegmentLayout::new(n, a, b, n).unwrap(), 1, mode).unwrap();
                    let cmp = compare_drift(&layout, &NoiseModel::uniform(eps), 1).unwrap();
                    assert!(cmp.mmpl_peak <= cmp.ar_peak + 1e-12, "{n} {eps} {mode}");
                }
            }
        }
    }

    #[test]
    fn jittered_comparison_is_reproducible() {
        let noise = NoiseModel::uniform(0.01).with_jitter(true).with_seed(4);
        let layout = reference_layout(3, ChainingMode::MinMemoryPeak);
        let a = compare_drift(&layout, &noise, 20).unwrap();
        let b = compare_drift(&layout, &noise, 20).unwrap();
        assert_eq!(a, b);
        assert!(a.ar_max.iter().zip(&a.ar_mean).all(|(mx, mn)| mx >= mn));
    }

    proptest! {
        #[test]
        fn planned_peak_affine_in_segments(s in 1usize..20, n_pick in 0usize..3, minmem in any::<bool>(), eps in 0.001f64..0.05) {
            let (n, b) = [(10usize, 6usize), (20, 10), (30, 15)][n_pick];
            let mode = if minmem { ChainingMode::MinMemoryPeak } else { ChainingMode::MaxThroughput };
            let layout = MacroLayout::new(SegmentLayout::new(n, 2, b, n).unwrap(), s, mode).unwrap();
            let noise = NoiseModel { eps_plan: eps, eps_codec: 0.5 * eps, eps_fill: 0.25 * eps, eps_step: eps, gamma: 1.0, jitter: false, seed: 0 };
            let cmp = compare_drift(&layout, &noise, 1).unwrap();
            let expected = s as f64 * noise.eps_plan + (s - 1) as f64 * noise.eps_codec + noise.eps_fill;
            prop_assert!((cmp.mmpl_peak - expected).abs() < 1e-10);
            let frames = layout.timeline_len();
            prop_assert!((cmp.ar_peak - eps * (frames - 1) as f64).abs() < 1e-10);
        }
    }
}
