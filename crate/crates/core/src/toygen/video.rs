use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::{Condvar, Mutex};

use super::{GenError, LatentFrame, SegmentSlot, ToyGenerator};
use crate::layout::MacroLayout;
use crate::pipeline::{build_dag, CostModel, TaskGraph, TaskId, TaskKind};

/// `(segment, local frame index)`.
pub type FrameKey = (usize, usize);

/// Every frame a segment actually generated, keyed by local index.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentContent {
    pub segment: usize,
    pub frames: BTreeMap<usize, LatentFrame>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSample {
    pub segment: usize,
    pub local: usize,
    pub position: usize,
    /// False for the shared initial frame of chained segments (its position is
    /// owned by the previous segment) and for frames the chaining mode drops.
    pub on_timeline: bool,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DriftTrace {
    pub samples: Vec<DriftSample>,
}

impl DriftTrace {
    pub fn max_deviation(&self) -> f64 {
        self.samples.iter().map(|s| s.deviation).fold(0.0, f64::max)
    }

    /// Deviation per timeline position, one value per position in order.
    pub fn timeline(&self) -> Vec<f64> {
        let mut by_position: BTreeMap<usize, f64> = BTreeMap::new();
        for s in self.samples.iter().filter(|s| s.on_timeline) {
            by_position.insert(s.position, s.deviation);
        }
        by_position.into_values().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoOutput {
    pub segments: Vec<SegmentContent>,
    pub trace: DriftTrace,
}

impl VideoOutput {
    /// Hash over the exact bit patterns of every generated value.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for seg in &self.segments {
            seg.segment.hash(&mut h);
            for (local, frame) in &seg.frames {
                local.hash(&mut h);
                frame.position.hash(&mut h);
                for v in &frame.values {
                    v.to_bits().hash(&mut h);
                }
            }
        }
        h.finish()
    }

    pub fn bitwise_eq(&self, other: &Self) -> bool {
        let flat = |o: &Self| -> Vec<(usize, usize, usize, Vec<u64>)> {
            o.segments
                .iter()
                .flat_map(|s| {
                    s.frames.iter().map(move |(l, f)| {
                        (s.segment, *l, f.position.0, f.values.iter().map(|v| v.to_bits()).collect())
                    })
                })
                .collect()
        };
        flat(self) == flat(other)
    }

    /// Number of distinct on-timeline positions covered by generated frames.
    pub fn timeline_len(&self) -> usize {
        self.trace.samples.iter().filter(|s| s.on_timeline).map(|s| s.position).collect::<BTreeSet<_>>().len()
    }
}

impl ToyGenerator {
    /// Runs one task, reading its inputs through `lookup`, and returns the
    /// frames it produced.
    pub fn run_task(
        &self,
        layout: &MacroLayout,
        kind: TaskKind,
        lookup: &dyn Fn(FrameKey) -> Option<LatentFrame>,
    ) -> Result<Vec<(FrameKey, LatentFrame)>, GenError> {
        let get =
            |segment: usize, local: usize| lookup((segment, local)).ok_or(GenError::MissingBoundary { segment, local });
        let seg = layout.segment_layout();
        match kind {
            TaskKind::MicroPlan { segment } => {
                let slot = SegmentSlot::of(layout, segment);
                let plan = self.micro_plan(slot, &get(segment, 1)?)?;
                Ok(vec![
                    ((segment, seg.t_a()), plan.early),
                    ((segment, seg.t_b()), plan.midpoint),
                    ((segment, seg.t_c()), plan.terminal),
                ])
            }
            TaskKind::ReEncode { from } => {
                let initial = get(from, 1)?;
                let chain = get(from, layout.chain_index())?;
                let tokens = super::encode_codec(&[&initial.values[..], &chain.values[..]])?;
                let next = self.reencode_boundary(SegmentSlot::of(layout, from + 1), &tokens)?;
                Ok(vec![((from + 1, 1), next)])
            }
            TaskKind::Populate1 { segment } => {
                let slot = SegmentSlot::of(layout, segment);
                let head = [get(segment, 1)?, get(segment, seg.t_a())?];
                let out = self.populate_stage1(slot, &head, &get(segment, seg.t_b())?)?;
                Ok(keyed(slot, out))
            }
            TaskKind::Populate2 { segment } => {
                let slot = SegmentSlot::of(layout, segment);
                let head = [get(segment, seg.t_b())?];
                let out = self.populate_stage2(slot, &head, &get(segment, seg.t_c())?)?;
                Ok(keyed(slot, out))
            }
        }
    }

    /// Full planning-then-populating run in canonical task order.
    pub fn generate_video(&self, layout: &MacroLayout) -> Result<VideoOutput, GenError> {
        let graph = build_dag(layout, &CostModel::default());
        let order = graph.topological_order().map_err(|e| GenError::Execution(e.to_string()))?;
        self.generate_video_in_order(&graph, &order)
    }

    /// Executes the graph's tasks in `order`, which must list every task once
    /// and respect dependencies.
    pub fn generate_video_in_order(&self, graph: &TaskGraph, order: &[TaskId]) -> Result<VideoOutput, GenError> {
        let layout = graph.layout().ok_or_else(|| GenError::Execution("graph has no layout".into()))?;
        check_order(graph, order)?;
        let mut store = self.initial_store();
        for id in order {
            let kind = graph.node(*id).expect("checked").kind;
            let produced = self.run_task(layout, kind, &|k| store.get(&k).cloned())?;
            store.extend(produced);
        }
        Ok(self.assemble(layout, store))
    }

    /// Executes the graph on `per_worker.len()` threads; thread `w` runs the
    /// tasks of `per_worker[w]` in order, blocking until their dependencies
    /// have completed on any thread.
    pub fn generate_video_threaded(
        &self,
        graph: &TaskGraph,
        per_worker: &[Vec<TaskId>],
    ) -> Result<VideoOutput, GenError> {
        let layout = graph.layout().ok_or_else(|| GenError::Execution("graph has no layout".into()))?;
        let all: Vec<TaskId> = per_worker.iter().flatten().copied().collect();
        let mut sorted = all.clone();
        sorted.sort_unstable();
        let mut expected: Vec<TaskId> = graph.nodes().iter().map(|n| n.id).collect();
        expected.sort_unstable();
        if sorted != expected {
            return Err(GenError::Execution("worker lists must cover every task exactly once".into()));
        }

        struct Shared {
            store: HashMap<FrameKey, LatentFrame>,
            done: BTreeSet<TaskId>,
            failed: Option<GenError>,
        }
        let shared = Mutex::new(Shared { store: self.initial_store(), done: BTreeSet::new(), failed: None });
        let wake = Condvar::new();

        std::thread::scope(|scope| {
            for tasks in per_worker {
                let shared = &shared;
                let wake = &wake;
                scope.spawn(move || {
                    for id in tasks {
                        let node = graph.node(*id).expect("checked");
                        {
                            let mut state = shared.lock().expect("executor lock");
                            while state.failed.is_none() && !node.deps.iter().all(|d| state.done.contains(d)) {
                                state = wake.wait(state).expect("executor lock");
                            }
                            if state.failed.is_some() {
                                return;
                            }
                        }
                        let result = self.run_task(layout, node.kind, &|k| {
                            shared.lock().expect("executor lock").store.get(&k).cloned()
                        });
                        let mut state = shared.lock().expect("executor lock");
                        match result {
                            Ok(frames) => {
                                state.store.extend(frames);
                                state.done.insert(*id);
                            }
                            Err(e) => {
                                state.failed.get_or_insert(e);
                            }
                        }
                        wake.notify_all();
                    }
                });
            }
        });

        let state = shared.into_inner().expect("executor lock");
        if let Some(e) = state.failed {
            return Err(e);
        }
        if state.done.len() != graph.len() {
            return Err(GenError::Execution("worker lists deadlock on their dependencies".into()));
        }
        Ok(self.assemble(layout, state.store))
    }

    fn initial_store(&self) -> HashMap<FrameKey, LatentFrame> {
        HashMap::from([((0, 1), self.clean_frame(0))])
    }

    fn assemble(&self, layout: &MacroLayout, store: HashMap<FrameKey, LatentFrame>) -> VideoOutput {
        let ordered: BTreeMap<FrameKey, LatentFrame> = store.into_iter().collect();
        let mut segments: Vec<SegmentContent> =
            (0..layout.n_segments()).map(|segment| SegmentContent { segment, frames: BTreeMap::new() }).collect();
        let mut samples = Vec::with_capacity(ordered.len());
        for ((segment, local), frame) in ordered {
            let shared_start = segment > 0 && local == 1;
            samples.push(DriftSample {
                segment,
                local,
                position: frame.position.0,
                on_timeline: layout.is_on_timeline(segment, local) && !shared_start,
                deviation: frame.deviation(self.truth()),
            });
            if let Some(content) = segments.get_mut(segment) {
                content.frames.insert(local, frame);
            }
        }
        VideoOutput { segments, trace: DriftTrace { samples } }
    }
}

fn keyed(slot: SegmentSlot, frames: Vec<LatentFrame>) -> Vec<(FrameKey, LatentFrame)> {
    frames.into_iter().map(|f| ((slot.segment, f.position.0 - slot.origin + 1), f)).collect()
}

fn check_order(graph: &TaskGraph, order: &[TaskId]) -> Result<(), GenError> {
    let mut done = BTreeSet::new();
    for id in order {
        let node = graph.node(*id).ok_or_else(|| GenError::Execution(format!("unknown task {id}")))?;
        if let Some(d) = node.deps.iter().find(|d| !done.contains(*d)) {
            return Err(GenError::Execution(format!("task {id} scheduled before its dependency {d}")));
        }
        if !done.insert(*id) {
            return Err(GenError::Execution(format!("task {id} listed twice")));
        }
    }
    if done.len() != graph.len() {
        return Err(GenError::Execution("execution order omits tasks".into()));
    }
    Ok(())
}
