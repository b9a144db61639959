//! Synthetic generation backend with closed-form error behaviour.
//!
//! Every generated frame is `truth(position) + deviation`. Operations only
//! manipulate deviation vectors, so drift is measurable exactly against the
//! [`GroundTruth`] trajectory.

mod codec;
mod noise;
mod truth;
mod video;

pub use codec::{decode_codec, encode_codec, CodecError, Token};
pub use noise::{derive_seed, NoiseModel};
pub use truth::{GroundTruth, Trajectory};
pub use video::{DriftSample, DriftTrace, FrameKey, SegmentContent, VideoOutput};

use thiserror::Error;

use crate::layout::{ChainingMode, GlobalFrameIndex, MacroLayout, SegmentLayout};
use noise::{Stage, StreamKey};
use truth::distance;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("frame has dimensionality {found}, generator expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("frame at position {found} does not match expected position {expected}")]
    PositionMismatch { expected: usize, found: usize },
    #[error("segment {segment} is missing boundary frame {local}")]
    MissingBoundary { segment: usize, local: usize },
    #[error("boundary re-encoding needs the initial and the terminal planning token, got {0} token(s)")]
    MissingTokens(usize),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("task graph cannot be executed: {0}")]
    Execution(String),
}

/// A latent vector pinned to a timeline position.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFrame {
    pub values: Vec<f64>,
    pub position: GlobalFrameIndex,
}

impl LatentFrame {
    pub fn new(values: Vec<f64>, position: usize) -> Self {
        Self { values, position: GlobalFrameIndex(position) }
    }

    pub fn deviation(&self, truth: &GroundTruth) -> f64 {
        distance(&self.values, &truth.at(self.position.0))
    }

    pub(crate) fn deviation_vector(&self, truth: &GroundTruth) -> Vec<f64> {
        self.values.iter().zip(truth.at(self.position.0)).map(|(v, t)| v - t).collect()
    }
}

/// Where a segment sits on the timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentSlot {
    pub segment: usize,
    pub layout: SegmentLayout,
    /// Global position of local frame 1.
    pub origin: usize,
}

impl SegmentSlot {
    pub fn new(segment: usize, layout: SegmentLayout, origin: usize) -> Self {
        Self { segment, layout, origin }
    }

    pub fn of(macro_layout: &MacroLayout, segment: usize) -> Self {
        Self::new(segment, *macro_layout.segment_layout(), macro_layout.segment_origin(segment))
    }

    pub fn position(&self, local: usize) -> usize {
        self.origin + local - 1
    }

    fn local_of(&self, frame: &LatentFrame) -> Option<usize> {
        let p = frame.position.0;
        (p >= self.origin).then(|| p - self.origin + 1)
    }
}

/// Keyframes predicted jointly from one initial frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroPlan {
    pub segment: usize,
    pub source_initial: LatentFrame,
    pub early: LatentFrame,
    pub midpoint: LatentFrame,
    pub terminal: LatentFrame,
}

impl MicroPlan {
    pub fn chain_frame(&self, mode: ChainingMode) -> &LatentFrame {
        match mode {
            ChainingMode::MinMemoryPeak => &self.midpoint,
            ChainingMode::MaxThroughput => &self.terminal,
        }
    }

    /// Token stream `[initial, chain frame]` as the planner emits it: the chain
    /// frame's token follows the initial token causally.
    pub fn chain_tokens(&self, mode: ChainingMode) -> Vec<Token> {
        encode_codec(&[&self.source_initial.values[..], &self.chain_frame(mode).values[..]])
            .expect("plan frames share one dimensionality")
    }
}

/// Toy generator over a fixed ground truth and noise model.
#[derive(Debug, Clone)]
pub struct ToyGenerator {
    truth: GroundTruth,
    noise: NoiseModel,
}

impl ToyGenerator {
    pub fn new(truth: GroundTruth, noise: NoiseModel) -> Result<Self, GenError> {
        noise.validate()?;
        Ok(Self { truth, noise })
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// Frame lying exactly on the ground truth.
    pub fn clean_frame(&self, position: usize) -> LatentFrame {
        LatentFrame::new(self.truth.at(position), position)
    }

    fn check_dim(&self, values: &[f64]) -> Result<(), GenError> {
        if values.len() != self.truth.dim() {
            return Err(GenError::DimensionMismatch { expected: self.truth.dim(), found: values.len() });
        }
        Ok(())
    }

    fn frame_from_deviation(&self, position: usize, deviation: &[f64]) -> LatentFrame {
        let values = self.truth.at(position).iter().zip(deviation).map(|(t, d)| t + d).collect();
        LatentFrame::new(values, position)
    }

    /// Predicts the `t_a`, `t_b` and `t_c` keyframes of `slot` from `initial`
    /// alone. Each keyframe carries `gamma` times the initial frame's deviation
    /// plus an independent perturbation of norm `eps_plan`.
    pub fn micro_plan(&self, slot: SegmentSlot, initial: &LatentFrame) -> Result<MicroPlan, GenError> {
        self.check_dim(&initial.values)?;
        if initial.position.0 != slot.origin {
            return Err(GenError::PositionMismatch { expected: slot.origin, found: initial.position.0 });
        }
        let carried: Vec<f64> = initial.deviation_vector(&self.truth).iter().map(|d| self.noise.gamma * d).collect();
        let keyframe = |local: usize| {
            let fresh = self.noise.perturbation(
                self.truth.dim(),
                StreamKey::new(slot.segment, Stage::Plan, local),
                self.noise.eps_plan,
            );
            let deviation: Vec<f64> = carried.iter().zip(&fresh).map(|(c, f)| c + f).collect();
            self.frame_from_deviation(slot.position(local), &deviation)
        };
        let [a, b, c] = slot.layout.planning_indices();
        Ok(MicroPlan {
            segment: slot.segment,
            source_initial: initial.clone(),
            early: keyframe(a),
            midpoint: keyframe(b),
            terminal: keyframe(c),
        })
    }

    fn find<'a>(
        &self,
        slot: SegmentSlot,
        frames: &'a [LatentFrame],
        local: usize,
    ) -> Result<&'a LatentFrame, GenError> {
        let frame = frames
            .iter()
            .find(|f| slot.local_of(f) == Some(local))
            .ok_or(GenError::MissingBoundary { segment: slot.segment, local })?;
        self.check_dim(&frame.values)?;
        Ok(frame)
    }

    fn expect_at(&self, slot: SegmentSlot, frame: &LatentFrame, local: usize) -> Result<(), GenError> {
        self.check_dim(&frame.values)?;
        match slot.local_of(frame) {
            Some(l) if l == local => Ok(()),
            _ => Err(GenError::MissingBoundary { segment: slot.segment, local }),
        }
    }

    /// Fills the open interval `(lo, hi)` between two boundary frames; each
    /// frame's deviation interpolates the boundary deviations linearly by index
    /// plus a perturbation of norm `eps_fill`.
    fn fill_between(
        &self,
        slot: SegmentSlot,
        stage: Stage,
        lo: (usize, &LatentFrame),
        hi: (usize, &LatentFrame),
    ) -> Vec<LatentFrame> {
        let (lo_local, lo_frame) = lo;
        let (hi_local, hi_frame) = hi;
        let lo_dev = lo_frame.deviation_vector(&self.truth);
        let hi_dev = hi_frame.deviation_vector(&self.truth);
        let span = (hi_local - lo_local) as f64;
        ((lo_local + 1)..hi_local)
            .map(|local| {
                let w = (local - lo_local) as f64 / span;
                let fresh = self.noise.perturbation(
                    self.truth.dim(),
                    StreamKey::new(slot.segment, stage, local),
                    self.noise.eps_fill,
                );
                let deviation: Vec<f64> =
                    lo_dev.iter().zip(&hi_dev).zip(&fresh).map(|((l, h), f)| (1.0 - w) * l + w * h + f).collect();
                self.frame_from_deviation(slot.position(local), &deviation)
            })
            .collect()
    }

    /// First populating stage: frames strictly between `t_a` and `t_b`, plus
    /// any frames strictly between the initial frame and `t_a`.
    ///
    /// `head` must contain local frames 1 and `t_a`; `tail` is frame `t_b`.
    pub fn populate_stage1(
        &self,
        slot: SegmentSlot,
        head: &[LatentFrame],
        tail: &LatentFrame,
    ) -> Result<Vec<LatentFrame>, GenError> {
        let [a, b, _] = slot.layout.planning_indices();
        let first = self.find(slot, head, 1)?;
        let early = self.find(slot, head, a)?;
        self.expect_at(slot, tail, b)?;
        let mut out = self.fill_between(slot, Stage::FillFirst, (1, first), (a, early));
        out.extend(self.fill_between(slot, Stage::FillFirst, (a, early), (b, tail)));
        Ok(out)
    }

    /// Second populating stage: frames strictly between `t_b` and `t_c`.
    ///
    /// `head` must contain local frame `t_b`; `tail` is frame `t_c`.
    pub fn populate_stage2(
        &self,
        slot: SegmentSlot,
        head: &[LatentFrame],
        tail: &LatentFrame,
    ) -> Result<Vec<LatentFrame>, GenError> {
        let [_, b, c] = slot.layout.planning_indices();
        let midpoint = self.find(slot, head, b)?;
        self.expect_at(slot, tail, c)?;
        Ok(self.fill_between(slot, Stage::FillSecond, (b, midpoint), (c, tail)))
    }

    /// Frame-by-frame autoregressive baseline producing frames `2..=horizon`
    /// after `initial`: `dev(t) = gamma * dev(t - 1) + step perturbation`.
    pub fn ar_generate(&self, initial: &LatentFrame, horizon: usize) -> Result<Vec<LatentFrame>, GenError> {
        self.check_dim(&initial.values)?;
        let mut deviation = initial.deviation_vector(&self.truth);
        let mut out = Vec::with_capacity(horizon.saturating_sub(1));
        for t in 2..=horizon {
            let fresh =
                self.noise.perturbation(self.truth.dim(), StreamKey::new(0, Stage::Step, t), self.noise.eps_step);
            for (d, f) in deviation.iter_mut().zip(&fresh) {
                *d = self.noise.gamma * *d + f;
            }
            out.push(self.frame_from_deviation(initial.position.0 + t - 1, &deviation));
        }
        Ok(out)
    }

    /// Builds the next segment's initial frame from the previous segment's
    /// `[initial, terminal]` planning tokens.
    ///
    /// The terminal token is duplicated and inserted between the two, the
    /// sequence `[initial, copy, terminal]` is decoded, and the frame decoded at
    /// the copy's position is re-encoded as a position-1 token. A perturbation
    /// of norm `eps_codec` models the round trip.
    pub fn reencode_boundary(&self, next: SegmentSlot, prev_tokens: &[Token]) -> Result<LatentFrame, GenError> {
        let (initial, terminal) = match prev_tokens {
            [first, .., last] => (first, last),
            _ => return Err(GenError::MissingTokens(prev_tokens.len())),
        };
        self.check_dim(initial.values())?;
        self.check_dim(terminal.values())?;
        let decoded = decode_codec(&[initial.clone(), terminal.clone(), terminal.clone()])?;
        let reencoded = encode_codec(&decoded[1..2])?.remove(0);
        let fresh = self.noise.perturbation(
            self.truth.dim(),
            StreamKey::new(next.segment, Stage::Codec, 1),
            self.noise.eps_codec,
        );
        let values = reencoded.0.iter().zip(&fresh).map(|(v, f)| v + f).collect();
        Ok(LatentFrame::new(values, next.origin))
    }

    /// Reference strategy: reuse the previous segment's tail token directly as
    /// the next segment's position-1 token.
    pub fn naive_splice(&self, next: SegmentSlot, prev_tokens: &[Token]) -> Result<LatentFrame, GenError> {
        let terminal =
            prev_tokens.last().filter(|_| prev_tokens.len() >= 2).ok_or(GenError::MissingTokens(prev_tokens.len()))?;
        self.check_dim(terminal.values())?;
        let frame = decode_codec(std::slice::from_ref(terminal))?.remove(0);
        Ok(LatentFrame::new(frame, next.origin))
    }
}

/// Distance between the frame a segment starts from and the chain frame it
/// was derived from.
pub fn boundary_error(next_initial: &LatentFrame, chain_frame: &LatentFrame) -> f64 {
    distance(&next_initial.values, &chain_frame.values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SegmentLayout {
        SegmentLayout::new(10, 2, 6, 10).unwrap()
    }

    fn reference_layout() -> SegmentLayout {
        SegmentLayout::new(20, 2, 10, 20).unwrap()
    }

    fn generator(noise: NoiseModel) -> ToyGenerator {
        ToyGenerator::new(GroundTruth::default(), noise).unwrap()
    }

    /// Frame whose deviation from the ground truth is `magnitude` along the unit diagonal.
    fn offset_frame(truth: &GroundTruth, position: usize, magnitude: f64) -> LatentFrame {
        let c = magnitude / (truth.dim() as f64).sqrt();
        LatentFrame::new(truth.at(position).into_iter().map(|v| v + c).collect(), position)
    }

    #[test]
    fn zero_noise_plan_is_exact() {
        let g = generator(NoiseModel::zero());
        let slot = SegmentSlot::new(0, small(), 0);
        let plan = g.micro_plan(slot, &g.clean_frame(0)).unwrap();
        for f in [&plan.early, &plan.midpoint, &plan.terminal] {
            assert_eq!(f.deviation(g.truth()), 0.0);
        }
        assert_eq!(plan.early.position, GlobalFrameIndex(1));
        assert_eq!(plan.midpoint.position, GlobalFrameIndex(5));
        assert_eq!(plan.terminal.position, GlobalFrameIndex(9));
    }

    #[test]
    fn plan_carries_initial_deviation() {
        let g = generator(NoiseModel::zero());
        let slot = SegmentSlot::new(2, small(), 40);
        let initial = offset_frame(g.truth(), 40, 0.3);
        let plan = g.micro_plan(slot, &initial).unwrap();
        for f in [&plan.early, &plan.midpoint, &plan.terminal] {
            assert!((f.deviation(g.truth()) - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn plan_keyframes_depend_only_on_initial() {
        // Changing nothing but the initial frame changes every keyframe by the
        // same carried offset; the keyframes never see each other.
        let mut noise = NoiseModel::uniform(0.05).with_jitter(true).with_seed(11);
        noise.gamma = 1.3;
        let g = generator(noise);
        let slot = SegmentSlot::new(1, small(), 9);
        let a = g.micro_plan(slot, &g.clean_frame(9)).unwrap();
        let b = g.micro_plan(slot, &offset_frame(g.truth(), 9, 0.2)).unwrap();
        for (fa, fb) in [(&a.early, &b.early), (&a.midpoint, &b.midpoint), (&a.terminal, &b.terminal)] {
            let shift = distance(&fa.values, &fb.values);
            assert!((shift - 1.3 * 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn plan_monte_carlo_mean_deviation() {
        let eps = 0.01;
        let mut total = 0.0;
        let mut count = 0;
        for seed in 0..1000u64 {
            let g = generator(NoiseModel { eps_plan: eps, ..NoiseModel::zero() }.with_jitter(true).with_seed(seed));
            let plan = g.micro_plan(SegmentSlot::new(0, small(), 0), &g.clean_frame(0)).unwrap();
            for f in [&plan.early, &plan.midpoint, &plan.terminal] {
                total += f.deviation(g.truth());
                count += 1;
            }
        }
        let mean = total / count as f64;
        assert!((mean - eps).abs() <= 0.05 * eps, "mean {mean}");
    }

    #[test]
    fn plan_rejects_bad_initial() {
        let g = generator(NoiseModel::zero());
        let slot = SegmentSlot::new(0, small(), 0);
        assert_eq!(
            g.micro_plan(slot, &LatentFrame::new(vec![0.0; 3], 0)),
            Err(GenError::DimensionMismatch { expected: 8, found: 3 })
        );
        assert_eq!(g.micro_plan(slot, &g.clean_frame(4)), Err(GenError::PositionMismatch { expected: 0, found: 4 }));
    }

    #[test]
    fn stage1_interpolates_boundary_deviation() {
        let g = generator(NoiseModel::zero());
        let slot = SegmentSlot::new(0, small(), 0);
        let head = [g.clean_frame(0), g.clean_frame(1)];
        let tail = offset_frame(g.truth(), 5, 0.2);
        let out = g.populate_stage1(slot, &head, &tail).unwrap();
        let locals: Vec<usize> = out.iter().map(|f| f.position.0 + 1).collect();
        assert_eq!(locals, vec![3, 4, 5]);
        // local 4 sits halfway between t_a = 2 and t_b = 6
        assert!((out[1].deviation(g.truth()) - 0.1).abs() < 1e-12);
        assert!((out[0].deviation(g.truth()) - 0.05).abs() < 1e-12);
        assert!((out[2].deviation(g.truth()) - 0.15).abs() < 1e-12);
    }

    #[test]
    fn stage1_clean_boundaries_zero_noise_exact() {
        let g = generator(NoiseModel::zero());
        let slot = SegmentSlot::new(0, reference_layout(), 0);
        let out = g.populate_stage1(slot, &[g.clean_frame(0), g.clean_frame(1)], &g.clean_frame(9)).unwrap();
        assert_eq!(out.len(), 7);
        assert!(out.iter().all(|f| f.deviation(g.truth()) == 0.0));
    }

    #[test]
    fn stage1_fills_gap_before_late_early_frame() {
        let g = generator(NoiseModel::zero());
        let layout = SegmentLayout::new(20, 4, 10, 20).unwrap();
        let slot = SegmentSlot::new(0, layout, 0);
        let out = g.populate_stage1(slot, &[g.clean_frame(0), g.clean_frame(3)], &g.clean_frame(9)).unwrap();
        let locals: Vec<usize> = out.iter().map(|f| f.position.0 + 1).collect();
        assert_eq!(locals, vec![2, 3, 5, 6, 7, 8, 9]);
    }

    #[test]
    fn stage1_monte_carlo_mean_deviation() {
        let eps = 0.02;
        let mut total = 0.0;
        let mut count = 0;
        for seed in 0..1000u64 {
            let g = generator(NoiseModel { eps_fill: eps, ..NoiseModel::zero() }.with_jitter(true).with_seed(seed));
            let slot = SegmentSlot::new(0, small(), 0);
            for f in g.populate_stage1(slot, &[g.clean_frame(0), g.clean_frame(1)], &g.clean_frame(5)).unwrap() {
                total += f.deviation(g.truth());
                count += 1;
            }
        }
        let mean = total / count as f64;
        assert!((mean - eps).abs() <= 0.05 * eps, "mean {mean}");
    }

    #[test]
    fn stage_missing_boundaries() {
        let g = generator(NoiseModel::zero());
        let slot = SegmentSlot::new(3, small(), 27);
        assert_eq!(
            g.populate_stage1(slot, &[g.clean_frame(27)], &g.clean_frame(32)),
            Err(GenError::MissingBoundary { segment: 3, local: 2 })
        );
        assert_eq!(
            g.populate_stage1(slot, &[g.clean_frame(27), g.clean_frame(28)], &g.clean_frame(33)),
            Err(GenError::MissingBoundary { segment: 3, local: 6 })
        );
        assert_eq!(
            g.populate_stage2(slot, &[g.clean_frame(27)], &g.clean_frame(36)),
            Err(GenError::MissingBoundary { segment: 3, local: 6 })
        );
    }

    #[test]
    fn stage2_examples() {
        let g = generator(NoiseModel::zero());
        let slot = SegmentSlot::new(0, reference_layout(), 0);
        let head: Vec<LatentFrame> = (0..10).map(|p| g.clean_frame(p)).collect();
        let out = g.populate_stage2(slot, &head, &g.clean_frame(19)).unwrap();
        let locals: Vec<usize> = out.iter().map(|f| f.position.0 + 1).collect();
        assert_eq!(locals, (11..=19).collect::<Vec<_>>());
        assert!(out.iter().all(|f| f.deviation(g.truth()) == 0.0));

        let slot = SegmentSlot::new(0, small(), 0);
        let out = g.populate_stage2(slot, &[offset_frame(g.truth(), 5, 0.2)], &g.clean_frame(9)).unwrap();
        // local 8 is halfway between t_b = 6 and t_c = 10
        assert!((out[1].deviation(g.truth()) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn populated_deviation_bounded_by_boundaries() {
        let noise = NoiseModel::uniform(0.03).with_jitter(true);
        for seed in 0..50 {
            let g = generator(noise.with_seed(seed));
            let slot = SegmentSlot::new(0, reference_layout(), 0);
            let head = [offset_frame(g.truth(), 0, 0.0), offset_frame(g.truth(), 1, 0.07)];
            let tail = offset_frame(g.truth(), 9, 0.11);
            for f in g.populate_stage1(slot, &head, &tail).unwrap() {
                assert!(f.deviation(g.truth()) <= 0.11 + 0.03 + 1e-12);
            }
        }
    }

    #[test]
    fn ar_linear_drift() {
        let g = generator(NoiseModel { eps_step: 0.01, ..NoiseModel::zero() });
        let frames = g.ar_generate(&g.clean_frame(0), 100).unwrap();
        assert_eq!(frames.len(), 99);
        for (i, f) in frames.iter().enumerate() {
            let t = i + 2;
            assert!((f.deviation(g.truth()) - 0.01 * (t - 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn ar_zero_step_is_exact() {
        let g = generator(NoiseModel::zero());
        assert!(g.ar_generate(&g.clean_frame(0), 50).unwrap().iter().all(|f| f.deviation(g.truth()) == 0.0));
        assert!(g.ar_generate(&g.clean_frame(0), 1).unwrap().is_empty());
    }

    #[test]
    fn ar_geometric_drift() {
        let g = generator(NoiseModel { eps_step: 0.01, gamma: 1.05, ..NoiseModel::zero() });
        let frames = g.ar_generate(&g.clean_frame(0), 50).unwrap();
        let expected = 0.01 * (1.05f64.powi(49) - 1.0) / 0.05;
        let got = frames.last().unwrap().deviation(g.truth());
        assert!((got - expected).abs() < 1e-12 * expected.max(1.0), "{got} vs {expected}");
    }

    #[test]
    fn reencode_static_scene_is_exact() {
        let g = ToyGenerator::new(GroundTruth::constant(4, 0.7), NoiseModel::zero()).unwrap();
        let slot = SegmentSlot::new(0, small(), 0);
        let plan = g.micro_plan(slot, &g.clean_frame(0)).unwrap();
        let tokens = plan.chain_tokens(ChainingMode::MaxThroughput);
        let next = g.reencode_boundary(SegmentSlot::new(1, small(), 9), &tokens).unwrap();
        assert_eq!(next.values, plan.terminal.values);
        assert_eq!(next.position, GlobalFrameIndex(9));
    }

    #[test]
    fn reencode_moving_scalar_is_exact_naive_is_not() {
        let g = ToyGenerator::new(GroundTruth::linear(1, 1.0), NoiseModel::zero()).unwrap();
        let slot = SegmentSlot::new(0, small(), 0);
        let plan = g.micro_plan(slot, &g.clean_frame(0)).unwrap();
        let tokens = plan.chain_tokens(ChainingMode::MaxThroughput);
        let next_slot = SegmentSlot::new(1, small(), 9);
        let strategy = g.reencode_boundary(next_slot, &tokens).unwrap();
        let naive = g.naive_splice(next_slot, &tokens).unwrap();
        assert_eq!(boundary_error(&strategy, &plan.terminal), 0.0);
        // the spliced tail token averages frames 0 and 9: off by half that motion
        assert_eq!(boundary_error(&naive, &plan.terminal), 4.5);
    }

    #[test]
    fn reencode_missing_tokens() {
        let g = generator(NoiseModel::zero());
        let slot = SegmentSlot::new(1, small(), 9);
        assert_eq!(g.reencode_boundary(slot, &[]), Err(GenError::MissingTokens(0)));
        assert_eq!(g.reencode_boundary(slot, &[Token(vec![0.0; 8])]), Err(GenError::MissingTokens(1)));
        assert_eq!(g.naive_splice(slot, &[Token(vec![0.0; 8])]), Err(GenError::MissingTokens(1)));
    }

    #[test]
    fn reencode_beats_naive_on_moving_trajectory() {
        let layout = reference_layout();
        for seed in 0..100u64 {
            let g = generator(NoiseModel::uniform(0.01).with_jitter(true).with_seed(seed));
            let origin = (seed as usize * 37) % 600;
            let plan = g.micro_plan(SegmentSlot::new(0, layout, origin), &g.clean_frame(origin)).unwrap();
            for mode in ChainingMode::ALL {
                let tokens = plan.chain_tokens(mode);
                let next_slot = SegmentSlot::new(1, layout, plan.chain_frame(mode).position.0);
                let strategy =
                    boundary_error(&g.reencode_boundary(next_slot, &tokens).unwrap(), plan.chain_frame(mode));
                let naive = boundary_error(&g.naive_splice(next_slot, &tokens).unwrap(), plan.chain_frame(mode));
                assert!(strategy < naive, "seed {seed}: {strategy} >= {naive}");
            }
        }
    }
}
