//! Task graph for chained planning and segment-parallel populating.
//!
//! Per segment `s` the graph holds `MicroPlan(s)`, `Populate1(s)`, `Populate2(s)`
//! (throughput mode only) and, for every chained boundary, `ReEncode(s)` which
//! turns the chain frame of `s` into the initial frame of `s + 1`. The planning
//! chain never depends on any populate task.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::layout::{ChainingMode, MacroLayout};

pub type TaskId = usize;

/// `(segment, local frame index)`.
pub type FrameRef = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskKind {
    MicroPlan {
        segment: usize,
    },
    /// Boundary from `from` to `from + 1`.
    ReEncode {
        from: usize,
    },
    Populate1 {
        segment: usize,
    },
    Populate2 {
        segment: usize,
    },
}

impl TaskKind {
    pub fn segment(&self) -> usize {
        match *self {
            TaskKind::MicroPlan { segment } | TaskKind::Populate1 { segment } | TaskKind::Populate2 { segment } => {
                segment
            }
            TaskKind::ReEncode { from } => from,
        }
    }

    /// Lower runs first among ready tasks.
    pub fn priority_rank(&self) -> u8 {
        match self {
            TaskKind::MicroPlan { .. } => 0,
            TaskKind::ReEncode { .. } => 1,
            TaskKind::Populate1 { .. } => 2,
            TaskKind::Populate2 { .. } => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::MicroPlan { .. } => "micro_plan",
            TaskKind::ReEncode { .. } => "reencode",
            TaskKind::Populate1 { .. } => "populate1",
            TaskKind::Populate2 { .. } => "populate2",
        }
    }

    pub fn is_plan(&self) -> bool {
        matches!(self, TaskKind::MicroPlan { .. })
    }

    pub fn is_populate(&self) -> bool {
        matches!(self, TaskKind::Populate1 { .. } | TaskKind::Populate2 { .. })
    }

    /// Frames read and frames written by this task.
    pub fn frame_io(&self, layout: &MacroLayout) -> (Vec<FrameRef>, Vec<FrameRef>) {
        let seg = layout.segment_layout();
        let (a, b, c) = (seg.t_a(), seg.t_b(), seg.t_c());
        match *self {
            TaskKind::MicroPlan { segment } => (vec![(segment, 1)], vec![(segment, a), (segment, b), (segment, c)]),
            TaskKind::ReEncode { from } => (vec![(from, 1), (from, layout.chain_index())], vec![(from + 1, 1)]),
            TaskKind::Populate1 { segment } => {
                let produced = (2..a).chain(a + 1..b).map(|l| (segment, l)).collect();
                (vec![(segment, 1), (segment, a), (segment, b)], produced)
            }
            TaskKind::Populate2 { segment } => {
                let mut consumed: Vec<FrameRef> = (1..=b).map(|l| (segment, l)).collect();
                consumed.push((segment, c));
                (consumed, (b + 1..c).map(|l| (segment, l)).collect())
            }
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskKind::ReEncode { from } => write!(f, "reencode[{}->{}]", from, from + 1),
            other => write!(f, "{}[{}]", other.name(), other.segment()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskNode {
    pub id: TaskId,
    pub kind: TaskKind,
    pub cost: f64,
    pub memory: f64,
    pub deps: Vec<TaskId>,
}

/// Cost and memory of a task as a function of the frames it reads (context)
/// and writes (generated).
///
/// `cost = task_base_cost + plan_overhead * [plan] + cost_per_frame * generated + context_factor * context`
/// for generating tasks; boundary re-encoding always costs `reencode_cost`.
/// `memory = memory_per_context_frame * context + memory_per_generated_frame * generated`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub task_base_cost: f64,
    pub plan_overhead: f64,
    pub cost_per_frame: f64,
    pub context_factor: f64,
    pub reencode_cost: f64,
    pub memory_per_context_frame: f64,
    pub memory_per_generated_frame: f64,
}

impl CostModel {
    /// Every generating task costs 1 regardless of frame count; re-encoding is free.
    pub fn unit() -> Self {
        Self { task_base_cost: 1.0, cost_per_frame: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        let named = [
            ("task_base_cost", self.task_base_cost),
            ("plan_overhead", self.plan_overhead),
            ("cost_per_frame", self.cost_per_frame),
            ("context_factor", self.context_factor),
            ("reencode_cost", self.reencode_cost),
            ("memory_per_context_frame", self.memory_per_context_frame),
            ("memory_per_generated_frame", self.memory_per_generated_frame),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }

    pub fn cost(&self, kind: &TaskKind, context: usize, generated: usize) -> f64 {
        match kind {
            TaskKind::ReEncode { .. } => self.reencode_cost,
            _ => {
                let plan = if kind.is_plan() { self.plan_overhead } else { 0.0 };
                self.task_base_cost
                    + plan
                    + self.cost_per_frame * generated as f64
                    + self.context_factor * context as f64
            }
        }
    }

    pub fn memory(&self, context: usize, generated: usize) -> f64 {
        self.memory_per_context_frame * context as f64 + self.memory_per_generated_frame * generated as f64
    }
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            task_base_cost: 0.0,
            plan_overhead: 0.0,
            cost_per_frame: 1.0,
            context_factor: 0.0,
            reencode_cost: 0.0,
            memory_per_context_frame: 1.0,
            memory_per_generated_frame: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("task graph contains a cycle through tasks {0:?}")]
    Cyclic(Vec<TaskId>),
    #[error("task graph is invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    DuplicateId(TaskId),
    DanglingDependency { task: TaskId, dep: TaskId },
    Cycle(Vec<TaskId>),
    MissingProducer { task: TaskId, frame: FrameRef },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId(id) => write!(f, "task id {id} appears more than once"),
            Violation::DanglingDependency { task, dep } => write!(f, "task {task} depends on unknown task {dep}"),
            Violation::Cycle(ids) => write!(f, "cycle through tasks {ids:?}"),
            Violation::MissingProducer { task, frame } => {
                write!(f, "task {task} reads frame {} of segment {} but no ancestor produces it", frame.1, frame.0)
            }
        }
    }
}

/// Immutable DAG of tasks. Graphs built by [`build_dag`] carry their
/// [`MacroLayout`]; hand-made graphs ([`TaskGraph::from_nodes`]) do not and
/// skip frame-completeness checks.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraph {
    nodes: Vec<TaskNode>,
    layout: Option<MacroLayout>,
    index: BTreeMap<TaskId, usize>,
}

impl TaskGraph {
    pub fn from_nodes(nodes: Vec<TaskNode>) -> Self {
        Self::with_layout(nodes, None)
    }

    fn with_layout(mut nodes: Vec<TaskNode>, layout: Option<MacroLayout>) -> Self {
        for node in &mut nodes {
            node.deps.sort_unstable();
            node.deps.dedup();
        }
        let mut index = BTreeMap::new();
        for (i, node) in nodes.iter().enumerate() {
            index.entry(node.id).or_insert(i);
        }
        Self { nodes, layout, index }
    }

    pub fn nodes(&self) -> &[TaskNode] {
        &self.nodes
    }

    pub fn layout(&self) -> Option<&MacroLayout> {
        self.layout.as_ref()
    }

    pub fn mode(&self) -> Option<ChainingMode> {
        self.layout.map(|l| l.mode())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: TaskId) -> Option<&TaskNode> {
        self.index.get(&id).map(|&i| &self.nodes[i])
    }

    pub fn find(&self, kind: TaskKind) -> Option<&TaskNode> {
        self.nodes.iter().find(|n| n.kind == kind)
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.deps.len()).sum()
    }

    pub fn total_work(&self) -> f64 {
        self.nodes.iter().map(|n| n.cost).sum()
    }

    /// Copy of the graph with `id` removed; edges into it are kept so the
    /// removal shows up as a violation.
    pub fn without_task(&self, id: TaskId) -> Self {
        let nodes = self.nodes.iter().filter(|n| n.id != id).cloned().collect();
        Self::with_layout(nodes, self.layout)
    }

    /// Copy of the graph with an extra edge `from -> to` (`to` depends on `from`).
    pub fn with_edge(&self, from: TaskId, to: TaskId) -> Self {
        let mut nodes = self.nodes.clone();
        if let Some(node) = nodes.iter_mut().find(|n| n.id == to) {
            node.deps.push(from);
        }
        Self::with_layout(nodes, self.layout)
    }

    /// Copy of the graph with `f` applied to every node.
    pub fn map_nodes(&self, f: impl FnMut(&mut TaskNode)) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.iter_mut().for_each(f);
        Self::with_layout(nodes, self.layout)
    }

    /// Topological order (ties broken by ascending id); error on cycles or
    /// unknown dependencies.
    pub fn topological_order(&self) -> Result<Vec<TaskId>, GraphError> {
        let mut indegree: BTreeMap<TaskId, usize> = BTreeMap::new();
        let mut children: BTreeMap<TaskId, Vec<TaskId>> = BTreeMap::new();
        for node in &self.nodes {
            indegree.entry(node.id).or_insert(0);
            for &d in &node.deps {
                if !self.index.contains_key(&d) {
                    return Err(GraphError::Invalid(format!("task {} depends on unknown task {d}", node.id)));
                }
                *indegree.entry(node.id).or_insert(0) += 1;
                children.entry(d).or_default().push(node.id);
            }
        }
        let mut ready: BTreeSet<TaskId> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| id).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(id) = ready.pop_first() {
            order.push(id);
            for &c in children.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
                let d = indegree.get_mut(&c).expect("child registered");
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() < indegree.len() {
            let stuck = indegree.iter().filter(|(_, &d)| d > 0).map(|(&id, _)| id).collect();
            return Err(GraphError::Cyclic(stuck));
        }
        Ok(order)
    }

    /// All transitive dependencies of `id`.
    pub fn ancestors(&self, id: TaskId) -> BTreeSet<TaskId> {
        let mut seen = BTreeSet::new();
        let mut queue: VecDeque<TaskId> = self.node(id).map(|n| n.deps.iter().copied().collect()).unwrap_or_default();
        while let Some(d) = queue.pop_front() {
            if seen.insert(d) {
                if let Some(n) = self.node(d) {
                    queue.extend(n.deps.iter().copied());
                }
            }
        }
        seen
    }

    /// Line-oriented text export:
    ///
    /// ```text
    /// # mmpl task graph
    /// graph tasks=<count> edges=<count> [segments=<S> mode=<minmem|maxthr> layout=<N>,<t_a>,<t_b>,<t_c>]
    /// node <id> <kind> <segment> <cost> <memory>
    /// edge <from> <to>
    /// ```
    ///
    /// Nodes appear in id order, edges sorted by `(from, to)`; numbers use six
    /// decimals.
    pub fn export_text(&self) -> String {
        let mut out = String::from("# mmpl task graph\n");
        let _ = write!(out, "graph tasks={} edges={}", self.len(), self.edge_count());
        if let Some(l) = &self.layout {
            let s = l.segment_layout();
            let _ = write!(
                out,
                " segments={} mode={} layout={},{},{},{}",
                l.n_segments(),
                l.mode(),
                s.n_frames(),
                s.t_a(),
                s.t_b(),
                s.t_c()
            );
        }
        out.push('\n');
        let mut nodes: Vec<&TaskNode> = self.nodes.iter().collect();
        nodes.sort_by_key(|n| n.id);
        for n in &nodes {
            let _ = writeln!(out, "node {} {} {} {:.6} {:.6}", n.id, n.kind.name(), n.kind.segment(), n.cost, n.memory);
        }
        let mut edges: Vec<(TaskId, TaskId)> =
            nodes.iter().flat_map(|n| n.deps.iter().map(move |&d| (d, n.id))).collect();
        edges.sort_unstable();
        for (from, to) in edges {
            let _ = writeln!(out, "edge {from} {to}");
        }
        out
    }
}

pub fn build_dag(layout: &MacroLayout, costs: &CostModel) -> TaskGraph {
    let mut nodes: Vec<TaskNode> = Vec::new();
    let mut push = |kind: TaskKind, deps: Vec<TaskId>| -> TaskId {
        let (consumed, produced) = kind.frame_io(layout);
        let id = nodes.len();
        nodes.push(TaskNode {
            id,
            kind,
            cost: costs.cost(&kind, consumed.len(), produced.len()),
            memory: costs.memory(consumed.len(), produced.len()),
            deps,
        });
        id
    };
    let last = layout.n_segments() - 1;
    let mut incoming: Option<TaskId> = None;
    for segment in 0..=last {
        let plan = push(TaskKind::MicroPlan { segment }, incoming.into_iter().collect());
        incoming = (segment < last).then(|| push(TaskKind::ReEncode { from: segment }, vec![plan]));
        let first = push(TaskKind::Populate1 { segment }, vec![plan]);
        if layout.mode() == ChainingMode::MaxThroughput {
            push(TaskKind::Populate2 { segment }, vec![first, plan]);
        }
    }
    TaskGraph::with_layout(nodes, Some(*layout))
}

/// Structural checks: unique ids, known dependencies, acyclicity and, for
/// graphs that carry a layout, that every frame a task reads is produced by
/// one of its ancestors (or is the global initial frame).
pub fn validate_dag(graph: &TaskGraph) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for n in graph.nodes() {
        if !seen.insert(n.id) {
            violations.push(Violation::DuplicateId(n.id));
        }
    }
    for n in graph.nodes() {
        for &d in &n.deps {
            if graph.node(d).is_none() {
                violations.push(Violation::DanglingDependency { task: n.id, dep: d });
            }
        }
    }
    let pruned = TaskGraph::from_nodes(
        graph
            .nodes()
            .iter()
            .map(|n| TaskNode {
                deps: n.deps.iter().copied().filter(|d| graph.node(*d).is_some()).collect(),
                ..n.clone()
            })
            .collect(),
    );
    if let Err(GraphError::Cyclic(ids)) = pruned.topological_order() {
        violations.push(Violation::Cycle(ids));
    }
    if let Some(layout) = graph.layout() {
        for n in graph.nodes() {
            let (consumed, _) = n.kind.frame_io(layout);
            let ancestors = graph.ancestors(n.id);
            let available: BTreeSet<FrameRef> = ancestors
                .iter()
                .filter(|&&a| a != n.id)
                .filter_map(|&a| graph.node(a))
                .flat_map(|a| a.kind.frame_io(layout).1)
                .chain(std::iter::once((0, 1)))
                .collect();
            for frame in consumed {
                if !available.contains(&frame) {
                    violations.push(Violation::MissingProducer { task: n.id, frame });
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Longest cost-weighted path: its length is the makespan with unbounded workers.
pub fn critical_path(graph: &TaskGraph) -> Result<(f64, Vec<TaskId>), GraphError> {
    let order = graph.topological_order()?;
    let mut finish: BTreeMap<TaskId, (f64, Option<TaskId>)> = BTreeMap::new();
    for id in &order {
        let node = graph.node(*id).expect("ordered ids exist");
        let mut best: (f64, Option<TaskId>) = (0.0, None);
        for d in &node.deps {
            let f = finish[d].0;
            if f > best.0 || best.1.is_none() && f >= best.0 {
                best = (f, Some(*d));
            }
        }
        finish.insert(*id, (best.0 + node.cost, best.1));
    }
    let Some((&end, &(length, _))) = finish.iter().max_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(b.0.cmp(a.0))) else {
        return Ok((0.0, Vec::new()));
    };
    let mut path = vec![end];
    let mut cursor = finish[&end].1;
    while let Some(id) = cursor {
        path.push(id);
        cursor = finish[&id].1;
    }
    path.reverse();
    Ok((length, path))
}
