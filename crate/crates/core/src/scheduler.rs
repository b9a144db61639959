//! Discrete-event list scheduling of a [`TaskGraph`] on identical workers.
//!
//! Workers are non-preemptive. A task with zero cost does not occupy a worker:
//! it completes the instant its dependencies do and is recorded on the worker
//! that finished its latest dependency.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::pipeline::{validate_dag, TaskGraph, TaskId, TaskKind, TaskNode, Violation};

/// Largest instance [`brute_force_schedule`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 10;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("at least one worker is required")]
    NoWorkers,
    #[error("invalid task graph: {}", join_violations(.0))]
    InvalidGraph(Vec<Violation>),
    #[error("exhaustive search is limited to {limit} tasks, graph has {tasks}")]
    TooLarge { tasks: usize, limit: usize },
    #[error("schedule is inconsistent with its graph: {0}")]
    Inconsistent(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Tie-break among ready tasks. Both orders end in the task id, so they are total.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SchedulerPolicy {
    /// `(segment, kind priority, id)`: earlier segments go first, and within a
    /// segment planning goes before populating.
    #[default]
    SegmentFirst,
    /// `(kind priority, segment, id)`: any ready planning task goes before any
    /// populate task.
    ChainFirst,
}

impl SchedulerPolicy {
    pub const ALL: [SchedulerPolicy; 2] = [SchedulerPolicy::SegmentFirst, SchedulerPolicy::ChainFirst];

    pub fn short_name(&self) -> &'static str {
        match self {
            SchedulerPolicy::ChainFirst => "chain-first",
            SchedulerPolicy::SegmentFirst => "segment-first",
        }
    }

    fn key(&self, node: &TaskNode) -> (usize, usize, TaskId) {
        let rank = node.kind.priority_rank() as usize;
        let segment = node.kind.segment();
        match self {
            SchedulerPolicy::ChainFirst => (rank, segment, node.id),
            SchedulerPolicy::SegmentFirst => (segment, rank, node.id),
        }
    }
}

impl fmt::Display for SchedulerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for SchedulerPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "chain-first" | "ChainFirst" => Ok(SchedulerPolicy::ChainFirst),
            "segment-first" | "SegmentFirst" => Ok(SchedulerPolicy::SegmentFirst),
            other => Err(format!("unknown scheduler policy `{other}` (expected chain-first or segment-first)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub task: TaskId,
    pub kind: TaskKind,
    pub worker: usize,
    pub start: f64,
    pub finish: f64,
    pub memory: f64,
}

impl ScheduleEntry {
    pub fn duration(&self) -> f64 {
        self.finish - self.start
    }
}

/// Entries are sorted by task id.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub workers: usize,
    pub entries: Vec<ScheduleEntry>,
    pub makespan: f64,
    pub peak_memory: f64,
}

impl Schedule {
    fn from_entries(workers: usize, mut entries: Vec<ScheduleEntry>) -> Self {
        entries.sort_by_key(|e| e.task);
        let makespan = entries.iter().map(|e| e.finish).fold(0.0, f64::max);
        let mut schedule = Schedule { workers, entries, makespan, peak_memory: 0.0 };
        schedule.peak_memory = memory_profile(&schedule).peak;
        schedule
    }

    pub fn entry(&self, task: TaskId) -> Option<&ScheduleEntry> {
        self.entries.binary_search_by_key(&task, |e| e.task).ok().map(|i| &self.entries[i])
    }

    /// Task ids per worker in execution order.
    pub fn worker_queues(&self) -> Vec<Vec<TaskId>> {
        let mut lanes: Vec<Vec<&ScheduleEntry>> = vec![Vec::new(); self.workers];
        for e in &self.entries {
            lanes[e.worker].push(e);
        }
        lanes
            .into_iter()
            .map(|mut lane| {
                lane.sort_by(|a, b| {
                    a.start.total_cmp(&b.start).then(a.finish.total_cmp(&b.finish)).then(a.task.cmp(&b.task))
                });
                lane.into_iter().map(|e| e.task).collect()
            })
            .collect()
    }

    /// Replays every schedule invariant against `graph`.
    pub fn verify(&self, graph: &TaskGraph) -> Result<(), ScheduleError> {
        let bad = |msg: String| Err(ScheduleError::Inconsistent(msg));
        if self.entries.len() != graph.len() {
            return bad(format!("{} entries for {} tasks", self.entries.len(), graph.len()));
        }
        for node in graph.nodes() {
            let Some(e) = self.entry(node.id) else {
                return bad(format!("task {} is not scheduled", node.id));
            };
            if e.worker >= self.workers {
                return bad(format!("task {} on worker {} of {}", node.id, e.worker, self.workers));
            }
            if e.kind != node.kind || e.memory != node.memory {
                return bad(format!("task {} entry does not match its node", node.id));
            }
            if e.start < 0.0 || (e.duration() - node.cost).abs() > TIME_EPS {
                return bad(format!("task {} runs {} but costs {}", node.id, e.duration(), node.cost));
            }
            for d in &node.deps {
                let dep = self.entry(*d).expect("all graph tasks checked present");
                if e.start + TIME_EPS < dep.finish {
                    return bad(format!(
                        "task {} starts at {} before dependency {} finishes at {}",
                        node.id, e.start, d, dep.finish
                    ));
                }
            }
        }
        let mut lanes: BTreeMap<usize, Vec<&ScheduleEntry>> = BTreeMap::new();
        for e in self.entries.iter().filter(|e| e.duration() > 0.0) {
            lanes.entry(e.worker).or_default().push(e);
        }
        for (worker, mut lane) in lanes {
            lane.sort_by(|a, b| a.start.total_cmp(&b.start));
            for pair in lane.windows(2) {
                if pair[1].start + TIME_EPS < pair[0].finish {
                    return bad(format!("tasks {} and {} overlap on worker {worker}", pair[0].task, pair[1].task));
                }
            }
        }
        let makespan = self.entries.iter().map(|e| e.finish).fold(0.0, f64::max);
        if makespan != self.makespan {
            return bad(format!("makespan {} but last finish {}", self.makespan, makespan));
        }
        if memory_profile(self).peak != self.peak_memory {
            return bad("peak memory does not match the replayed profile".into());
        }
        Ok(())
    }
}

fn check_inputs(graph: &TaskGraph, workers: usize) -> Result<(), ScheduleError> {
    if workers == 0 {
        return Err(ScheduleError::NoWorkers);
    }
    validate_dag(graph).map_err(ScheduleError::InvalidGraph)
}

/// Event-driven list scheduling: at every completion instant, ready tasks are
/// handed to idle workers (lowest id first) in `policy` order.
pub fn list_schedule(graph: &TaskGraph, workers: usize, policy: SchedulerPolicy) -> Result<Schedule, ScheduleError> {
    check_inputs(graph, workers)?;
    let mut waiting: BTreeMap<TaskId, usize> = graph.nodes().iter().map(|n| (n.id, n.deps.len())).collect();
    let mut dependents: BTreeMap<TaskId, Vec<TaskId>> = BTreeMap::new();
    for n in graph.nodes() {
        for d in &n.deps {
            dependents.entry(*d).or_default().push(n.id);
        }
    }
    let node = |id: TaskId| graph.node(id).expect("validated graph");
    let mut ready: BTreeSet<(usize, usize, TaskId)> =
        graph.nodes().iter().filter(|n| n.deps.is_empty()).map(|n| policy.key(n)).collect();
    let mut idle: BTreeSet<usize> = (0..workers).collect();
    // (finish, task, worker) of tasks occupying a worker
    let mut running: Vec<(f64, TaskId, usize)> = Vec::new();
    let mut entries: BTreeMap<TaskId, ScheduleEntry> = BTreeMap::new();
    let mut now = 0.0;

    let release = |id: TaskId, ready: &mut BTreeSet<_>, waiting: &mut BTreeMap<TaskId, usize>| {
        for &next in dependents.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
            let w = waiting.get_mut(&next).expect("known task");
            *w -= 1;
            if *w == 0 {
                ready.insert(policy.key(node(next)));
            }
        }
    };

    while entries.len() < graph.len() {
        running.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        while let Some(&(finish, id, worker)) = running.first() {
            if finish > now {
                break;
            }
            running.remove(0);
            idle.insert(worker);
            release(id, &mut ready, &mut waiting);
        }
        while let Some(&key) = ready.iter().find(|k| node(k.2).cost == 0.0) {
            ready.remove(&key);
            let n = node(key.2);
            let worker = n
                .deps
                .iter()
                .map(|d| &entries[d])
                .max_by(|a, b| a.finish.total_cmp(&b.finish).then(b.task.cmp(&a.task)))
                .map_or(0, |e| e.worker);
            entries.insert(
                n.id,
                ScheduleEntry { task: n.id, kind: n.kind, worker, start: now, finish: now, memory: n.memory },
            );
            release(n.id, &mut ready, &mut waiting);
        }
        while let (Some(&key), Some(&worker)) = (ready.first(), idle.first()) {
            ready.remove(&key);
            idle.remove(&worker);
            let n = node(key.2);
            let finish = now + n.cost;
            entries
                .insert(n.id, ScheduleEntry { task: n.id, kind: n.kind, worker, start: now, finish, memory: n.memory });
            running.push((finish, n.id, worker));
        }
        if entries.len() == graph.len() {
            break;
        }
        now = running.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        debug_assert!(now.is_finite(), "validated DAG cannot stall");
    }
    Ok(Schedule::from_entries(workers, entries.into_values().collect()))
}

/// Exact minimum makespan by exhaustive search over precedence-feasible task
/// orders, each task appended at its earliest start on the best-fitting worker.
pub fn brute_force_schedule(graph: &TaskGraph, workers: usize) -> Result<f64, ScheduleError> {
    check_inputs(graph, workers)?;
    let n = graph.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(ScheduleError::TooLarge { tasks: n, limit: BRUTE_FORCE_LIMIT });
    }
    if n == 0 {
        return Ok(0.0);
    }
    let pos: BTreeMap<TaskId, usize> = graph.nodes().iter().enumerate().map(|(i, t)| (t.id, i)).collect();
    let cost: Vec<f64> = graph.nodes().iter().map(|t| t.cost).collect();
    let deps: Vec<Vec<usize>> = graph.nodes().iter().map(|t| t.deps.iter().map(|d| pos[d]).collect()).collect();
    let order: Vec<usize> = graph.topological_order().expect("validated").iter().map(|id| pos[id]).collect();
    let mut tail = cost.clone();
    for &i in order.iter().rev() {
        for &d in &deps[i] {
            tail[d] = tail[d].max(cost[d] + tail[i]);
        }
    }
    let mut search = Search {
        cost,
        deps,
        order,
        tail,
        best: list_schedule(graph, workers, SchedulerPolicy::default())?.makespan,
        finish: vec![0.0; n],
    };
    search.run(0, vec![0.0; workers], 0.0);
    Ok(search.best)
}

struct Search {
    cost: Vec<f64>,
    deps: Vec<Vec<usize>>,
    order: Vec<usize>,
    tail: Vec<f64>,
    best: f64,
    finish: Vec<f64>,
}

impl Search {
    fn lower_bound(&self, done: u32, free: &[f64], makespan: f64) -> f64 {
        let mut est = vec![0.0; self.cost.len()];
        let mut remaining = 0.0;
        let mut path: f64 = 0.0;
        for &i in &self.order {
            if done & (1 << i) != 0 {
                continue;
            }
            remaining += self.cost[i];
            est[i] = self.deps[i]
                .iter()
                .map(|&d| if done & (1 << d) != 0 { self.finish[d] } else { est[d] + self.cost[d] })
                .fold(0.0, f64::max);
            path = path.max(est[i] + self.tail[i]);
        }
        let load = (free.iter().sum::<f64>() + remaining) / free.len() as f64;
        makespan.max(path).max(load)
    }

    fn run(&mut self, done: u32, free: Vec<f64>, makespan: f64) {
        let n = self.cost.len();
        if done.count_ones() as usize == n {
            self.best = self.best.min(makespan);
            return;
        }
        if self.lower_bound(done, &free, makespan) >= self.best - TIME_EPS {
            return;
        }
        for i in 0..n {
            if done & (1 << i) != 0 || self.deps[i].iter().any(|&d| done & (1 << d) == 0) {
                continue;
            }
            let ready = self.deps[i].iter().map(|&d| self.finish[d]).fold(0.0, f64::max);
            let mut next_free = free.clone();
            let start = if self.cost[i] == 0.0 {
                ready
            } else {
                // latest worker already free at `ready`, else the earliest to free up
                let w = (0..free.len())
                    .filter(|&w| free[w] <= ready)
                    .max_by(|&a, &b| free[a].total_cmp(&free[b]))
                    .unwrap_or_else(|| (0..free.len()).min_by(|&a, &b| free[a].total_cmp(&free[b])).expect("workers"));
                let start = ready.max(free[w]);
                next_free[w] = start + self.cost[i];
                start
            };
            self.finish[i] = start + self.cost[i];
            next_free.sort_by(f64::total_cmp);
            self.run(done | (1 << i), next_free, makespan.max(self.finish[i]));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedupPoint {
    pub workers: usize,
    pub makespan: f64,
    /// Single-worker makespan over this makespan.
    pub speedup: f64,
    pub peak_memory: f64,
}

pub fn speedup_curve(
    graph: &TaskGraph,
    worker_counts: &[usize],
    policy: SchedulerPolicy,
) -> Result<Vec<SpeedupPoint>, ScheduleError> {
    let base = list_schedule(graph, 1, policy)?.makespan;
    worker_counts
        .iter()
        .map(|&workers| {
            let s = list_schedule(graph, workers, policy)?;
            let speedup = if s.makespan > 0.0 { base / s.makespan } else { 1.0 };
            Ok(SpeedupPoint { workers, makespan: s.makespan, speedup, peak_memory: s.peak_memory })
        })
        .collect()
}

/// Step function of concurrently resident memory. A task is resident on
/// `[start, finish)`, so zero-duration tasks never count.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryProfile {
    pub peak: f64,
    /// `(t, memory)`: memory held on `[t, next t)`.
    pub series: Vec<(f64, f64)>,
}

pub fn memory_profile(schedule: &Schedule) -> MemoryProfile {
    let mut times: Vec<f64> =
        schedule.entries.iter().filter(|e| e.duration() > 0.0).flat_map(|e| [e.start, e.finish]).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let series: Vec<(f64, f64)> = times
        .iter()
        .map(|&t| {
            let held = schedule.entries.iter().filter(|e| e.start <= t && t < e.finish).map(|e| e.memory).sum::<f64>();
            (t, held)
        })
        .collect();
    let peak = series.iter().map(|p| p.1).fold(0.0, f64::max);
    MemoryProfile { peak, series }
}

/// Times measured from the start of the segment's micro plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentLatency {
    pub segment: usize,
    pub plan_start: f64,
    /// Until the first populate stage finishes.
    pub first_populated: f64,
    /// Until every populate stage of the segment finishes.
    pub completed: f64,
}

pub fn segment_latencies(schedule: &Schedule) -> Vec<SegmentLatency> {
    let mut plans: BTreeMap<usize, f64> = BTreeMap::new();
    let mut first: BTreeMap<usize, f64> = BTreeMap::new();
    let mut last: BTreeMap<usize, f64> = BTreeMap::new();
    for e in &schedule.entries {
        let s = e.kind.segment();
        match e.kind {
            TaskKind::MicroPlan { .. } => {
                plans.insert(s, e.start);
            }
            TaskKind::Populate1 { .. } => {
                first.insert(s, e.finish);
            }
            _ => {}
        }
        if e.kind.is_populate() {
            let l = last.entry(s).or_insert(e.finish);
            *l = l.max(e.finish);
        }
    }
    plans
        .into_iter()
        .filter_map(|(segment, plan_start)| {
            Some(SegmentLatency {
                segment,
                plan_start,
                first_populated: first.get(&segment)? - plan_start,
                completed: last.get(&segment)? - plan_start,
            })
        })
        .collect()
}

pub const GANTT_CSV_HEADER: &str = "task_id,kind,segment,worker,start,finish,memory";

/// One row per task in id order, times and memory to six decimals.
pub fn gantt_csv(schedule: &Schedule) -> String {
    let mut out = String::from(GANTT_CSV_HEADER);
    out.push('\n');
    for e in &schedule.entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6}",
            e.task,
            e.kind.name(),
            e.kind.segment(),
            e.worker,
            e.start,
            e.finish,
            e.memory
        );
    }
    out
}

const SVG_WIDTH: f64 = 960.0;
const LANE_LABEL: f64 = 90.0;
const LANE_HEIGHT: f64 = 30.0;
const TOP: f64 = 40.0;

fn kind_colour(kind: &TaskKind) -> &'static str {
    match kind {
        TaskKind::MicroPlan { .. } => "#4C72B0",
        TaskKind::ReEncode { .. } => "#8C8C8C",
        TaskKind::Populate1 { .. } => "#55A868",
        TaskKind::Populate2 { .. } => "#DD8452",
    }
}

/// One lane per worker, one labelled bar per task. Zero-duration tasks are drawn
/// as thin markers.
pub fn gantt_svg(schedule: &Schedule) -> String {
    let lanes = if schedule.entries.is_empty() { 0 } else { schedule.workers };
    let height = TOP + LANE_HEIGHT * lanes as f64 + 30.0;
    let span = if schedule.makespan > 0.0 { schedule.makespan } else { 1.0 };
    let scale = (SVG_WIDTH - LANE_LABEL - 20.0) / span;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH:.0}" height="{height:.0}" viewBox="0 0 {SVG_WIDTH:.0} {height:.0}" font-family="monospace" font-size="11">"#
    );
    let _ = writeln!(
        out,
        r#"<text x="10" y="20" font-size="14">schedule: {} workers, {} tasks, makespan {:.3}, peak memory {:.3}</text>"#,
        schedule.workers,
        schedule.entries.len(),
        schedule.makespan,
        schedule.peak_memory
    );
    for w in 0..lanes {
        let y = TOP + LANE_HEIGHT * w as f64;
        let _ = writeln!(out, r#"<text x="10" y="{:.2}">worker {w}</text>"#, y + LANE_HEIGHT * 0.6);
        let _ = writeln!(
            out,
            r##"<line x1="{LANE_LABEL:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#DDDDDD"/>"##,
            y + LANE_HEIGHT,
            SVG_WIDTH - 20.0,
            y + LANE_HEIGHT
        );
    }
    for e in &schedule.entries {
        let x = LANE_LABEL + e.start * scale;
        let y = TOP + LANE_HEIGHT * e.worker as f64 + 3.0;
        let w = (e.duration() * scale).max(2.0);
        let _ = writeln!(
            out,
            r#"<g><title>{} [{:.3}, {:.3}) mem {:.3}</title><rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{:.2}" fill="{}" stroke="black" stroke-width="0.5"/><text x="{:.2}" y="{:.2}">{}</text></g>"#,
            e.kind,
            e.start,
            e.finish,
            e.memory,
            LANE_HEIGHT - 6.0,
            kind_colour(&e.kind),
            x + 2.0,
            y + LANE_HEIGHT * 0.55,
            e.kind
        );
    }
    if lanes > 0 {
        let axis_y = TOP + LANE_HEIGHT * lanes as f64 + 18.0;
        let _ = writeln!(out, r#"<text x="{LANE_LABEL:.2}" y="{axis_y:.2}">0</text>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{axis_y:.2}" text-anchor="end">{:.3}</text>"#,
            SVG_WIDTH - 20.0,
            schedule.makespan
        );
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GanttFiles {
    pub svg: PathBuf,
    pub csv: PathBuf,
}

/// Writes `<stem>.svg` and `<stem>.csv` into `dir`.
pub fn gantt_export(schedule: &Schedule, dir: &Path, stem: &str) -> std::io::Result<GanttFiles> {
    let files = GanttFiles { svg: dir.join(format!("{stem}.svg")), csv: dir.join(format!("{stem}.csv")) };
    std::fs::write(&files.svg, gantt_svg(schedule))?;
    std::fs::write(&files.csv, gantt_csv(schedule))?;
    Ok(files)
}
