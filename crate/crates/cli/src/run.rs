//! Experiment runners. Each experiment renders its artifacts in memory; the
//! runner then writes them through a staging directory so a failed run leaves
//! no partial outputs behind.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mmpl_core::drift::{compare_drift, simulate_bc_regret, DriftComparison};
use mmpl_core::pipeline::{build_dag, critical_path};
use mmpl_core::scheduler::{gantt_csv, gantt_svg, list_schedule, segment_latencies, speedup_curve};
use mmpl_core::toygen::derive_seed;
use mmpl_core::{GroundTruth, ToyGenerator};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind, ValidatedConfig};
use crate::plot::{line_chart, Series};

const STAGING_DIR: &str = ".mmpl-staging";
const MANIFEST: &str = "manifest.json";
const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{0}")]
    Module(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Invariant(_) => 3,
            RunError::Module(_) | RunError::Io { .. } => 1,
        }
    }
}

fn module<E: std::fmt::Display>(e: E) -> RunError {
    RunError::Module(e.to_string())
}

fn invariant(ok: bool, message: impl FnOnce() -> String) -> Result<(), RunError> {
    if ok {
        Ok(())
    } else {
        Err(RunError::Invariant(message()))
    }
}

/// Files produced by one experiment, in write order.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, String)>,
    pub summary: Vec<String>,
}

impl Artifacts {
    fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: &'a str,
    seed: u64,
    created_unix_seconds: u64,
    files: Vec<&'a str>,
    config: &'a ExperimentConfig,
}

/// Renders every artifact of `kind` without touching the filesystem.
pub fn render(kind: ExperimentKind, cfg: &ValidatedConfig) -> Result<Artifacts, RunError> {
    match kind {
        ExperimentKind::Drift => drift(cfg),
        ExperimentKind::Schedule => schedule(cfg),
        ExperimentKind::Generate => generate(cfg),
        ExperimentKind::Compare => compare(cfg),
    }
}

pub fn run_experiment(kind: ExperimentKind, config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome, RunError> {
    let validated = config.validate()?;
    let artifacts = render(kind, &validated)?;
    let mut echoed = config.clone();
    echoed.experiment = Some(kind);
    let manifest = Manifest {
        tool: "mmpl",
        version: env!("CARGO_PKG_VERSION"),
        experiment: kind.name(),
        seed: validated.seed,
        created_unix_seconds: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        files: artifacts.names().collect(),
        config: &echoed,
    };
    let manifest = serde_json::to_string_pretty(&manifest).map_err(module)? + "\n";
    let files = commit(
        out_dir,
        artifacts.files.iter().map(|(n, c)| (n.as_str(), c.as_str())).chain([(MANIFEST, manifest.as_str())]),
    )?;
    Ok(RunOutcome { out_dir: out_dir.to_path_buf(), files, summary: artifacts.summary })
}

/// Writes everything into a staging directory inside `out_dir`, then moves the
/// files into place. On failure the staging directory is removed.
fn commit<'a>(out_dir: &Path, files: impl Iterator<Item = (&'a str, &'a str)>) -> Result<Vec<PathBuf>, RunError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| RunError::Io { path, source }
    };
    let staging = out_dir.join(STAGING_DIR);
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(io(&staging))?;
    }
    std::fs::create_dir_all(&staging).map_err(io(&staging))?;
    let result = (|| {
        let mut staged = Vec::new();
        for (name, contents) in files {
            let path = staging.join(name);
            std::fs::write(&path, contents).map_err(io(&path))?;
            staged.push(name.to_string());
        }
        let mut placed: Vec<PathBuf> = Vec::new();
        for name in staged {
            let target = out_dir.join(&name);
            if let Err(source) = std::fs::rename(staging.join(&name), &target) {
                for p in &placed {
                    let _ = std::fs::remove_file(p);
                }
                return Err(RunError::Io { path: target, source });
            }
            placed.push(target);
        }
        Ok(placed)
    })();
    let cleanup = std::fs::remove_dir_all(&staging);
    let placed = result?;
    cleanup.map_err(io(&staging))?;
    Ok(placed)
}

fn curves_csv(cmp: &DriftComparison) -> String {
    let mut out = String::from("position,ar_mean,ar_max,mmpl_mean,mmpl_max\n");
    for i in 0..cmp.positions() {
        let _ = writeln!(
            out,
            "{i},{:.6},{:.6},{:.6},{:.6}",
            cmp.ar_mean[i], cmp.ar_max[i], cmp.mmpl_mean[i], cmp.mmpl_max[i]
        );
    }
    out
}

fn curves_svg(title: &str, cmp: &DriftComparison) -> String {
    let pts = |v: &[f64]| v.iter().enumerate().map(|(i, y)| (i as f64, *y)).collect();
    line_chart(
        title,
        "timeline position",
        "deviation from ground truth",
        &[
            Series { name: "autoregressive mean", points: pts(&cmp.ar_mean) },
            Series { name: "planned mean", points: pts(&cmp.mmpl_mean) },
        ],
    )
}

fn run_comparison(cfg: &ValidatedConfig) -> Result<DriftComparison, RunError> {
    let cmp = compare_drift(&cfg.layout, &cfg.noise, cfg.trials).map_err(module)?;
    invariant(cmp.positions() == cfg.layout.timeline_len(), || {
        format!("drift curves span {} positions, timeline has {}", cmp.positions(), cfg.layout.timeline_len())
    })?;
    Ok(cmp)
}

fn drift(cfg: &ValidatedConfig) -> Result<Artifacts, RunError> {
    let mut art = Artifacts::default();
    let mut regret = String::from(
        "horizon,eps,cost_cap,trials,mean_regret,std_error,expected,relative_error,lower_bound,upper_bound,within_bounds\n",
    );
    let mut by_eps: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (i, setting) in cfg.regret.iter().enumerate() {
        let model = &setting.model;
        let est = simulate_bc_regret(model, cfg.trials, derive_seed(cfg.seed, i as u64)).map_err(module)?;
        invariant(est.lower_bound <= est.upper_bound, || {
            format!("regret bounds inverted for T = {}", model.horizon())
        })?;
        let ceiling = model.cost_cap() * model.horizon() as f64;
        invariant((0.0..=ceiling).contains(&est.mean_regret), || {
            format!("mean regret {} outside [0, {ceiling}] at T = {}", est.mean_regret, model.horizon())
        })?;
        let _ = writeln!(
            regret,
            "{},{:.6},{:.6},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            model.horizon(),
            model.eps(),
            model.cost_cap(),
            est.trials,
            est.mean_regret,
            est.std_error,
            est.expected,
            est.relative_error(),
            est.lower_bound,
            est.upper_bound,
            est.within_bounds()
        );
        let point = (model.horizon() as f64, est.mean_regret);
        match by_eps.iter_mut().find(|(l, _)| *l == setting.label) {
            Some((_, pts)) => pts.push(point),
            None => by_eps.push((setting.label.clone(), vec![point])),
        }
    }
    let cmp = run_comparison(cfg)?;
    art.add("regret.csv", regret);
    art.add("drift.csv", curves_csv(&cmp));
    art.add(
        "regret.svg",
        line_chart(
            "simulated behaviour-cloning regret",
            "horizon T",
            "mean regret",
            &by_eps.iter().map(|(l, p)| Series { name: l, points: p.clone() }).collect::<Vec<_>>(),
        ),
    );
    art.add("drift.svg", curves_svg("deviation along the timeline", &cmp));
    art.summary.push(format!("{} regret settings, {} trials each", cfg.regret.len(), cfg.trials));
    art.summary.push(format!("max deviation: autoregressive {:.6}, planned {:.6}", cmp.ar_peak, cmp.mmpl_peak));
    Ok(art)
}

fn compare(cfg: &ValidatedConfig) -> Result<Artifacts, RunError> {
    let cmp = run_comparison(cfg)?;
    let mut art = Artifacts::default();
    let ratio = cmp.ratio.map_or_else(|| "NA".to_string(), |r| format!("{r:.6}"));
    let summary = format!(
        "segments,mode,timeline_len,trials,ar_max_deviation,mmpl_max_deviation,ratio\n{},{},{},{},{:.6},{:.6},{}\n",
        cfg.layout.n_segments(),
        cfg.layout.mode().short_name(),
        cfg.layout.timeline_len(),
        cmp.trials,
        cmp.ar_peak,
        cmp.mmpl_peak,
        ratio
    );
    art.add("curves.csv", curves_csv(&cmp));
    art.add("summary.csv", summary);
    art.add("compare.svg", curves_svg("autoregressive vs planned drift", &cmp));
    art.summary
        .push(format!("max deviation: autoregressive {:.6}, planned {:.6}, ratio {ratio}", cmp.ar_peak, cmp.mmpl_peak));
    Ok(art)
}

fn schedule(cfg: &ValidatedConfig) -> Result<Artifacts, RunError> {
    let graph = build_dag(&cfg.layout, &cfg.costs);
    let (cp, _) = critical_path(&graph).map_err(module)?;
    let work = graph.total_work();
    let curve = speedup_curve(&graph, &cfg.workers, cfg.policy).map_err(module)?;
    let mut art = Artifacts::default();
    art.add("graph.txt", graph.export_text());
    let mut table = String::from("workers,makespan,speedup,peak_memory,critical_path,total_work\n");
    let mut latency = String::from("workers,segment,plan_start,first_populated,completed\n");
    for point in &curve {
        let s = list_schedule(&graph, point.workers, cfg.policy).map_err(module)?;
        s.verify(&graph).map_err(|e| RunError::Invariant(e.to_string()))?;
        invariant(s.makespan == point.makespan, || {
            format!("replayed makespan {} differs from {}", s.makespan, point.makespan)
        })?;
        let bound = cp.max(work / point.workers as f64);
        invariant(s.makespan + BOUND_SLACK >= bound, || {
            format!("makespan {} below lower bound {bound} at {} workers", s.makespan, point.workers)
        })?;
        let _ = writeln!(
            table,
            "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            point.workers, point.makespan, point.speedup, point.peak_memory, cp, work
        );
        for l in segment_latencies(&s) {
            let _ = writeln!(
                latency,
                "{},{},{:.6},{:.6},{:.6}",
                point.workers, l.segment, l.plan_start, l.first_populated, l.completed
            );
        }
        art.add(format!("gantt_w{}.csv", point.workers), gantt_csv(&s));
        art.add(format!("gantt_w{}.svg", point.workers), gantt_svg(&s));
        art.summary.push(format!(
            "{} workers: makespan {:.3}, speedup {:.3}, peak memory {:.3}",
            point.workers, point.makespan, point.speedup, point.peak_memory
        ));
    }
    art.add("schedule.csv", table);
    art.add("latency.csv", latency);
    art.add(
        "speedup.svg",
        line_chart(
            "speedup over one worker",
            "workers",
            "speedup",
            &[Series {
                name: cfg.policy.short_name(),
                points: curve.iter().map(|p| (p.workers as f64, p.speedup)).collect(),
            }],
        ),
    );
    Ok(art)
}

fn generate(cfg: &ValidatedConfig) -> Result<Artifacts, RunError> {
    let generator = ToyGenerator::new(GroundTruth::default(), cfg.noise).map_err(module)?;
    let video = generator.generate_video(&cfg.layout).map_err(module)?;
    invariant(video.timeline_len() == cfg.layout.timeline_len(), || {
        format!("video covers {} timeline positions, layout has {}", video.timeline_len(), cfg.layout.timeline_len())
    })?;

    let graph = build_dag(&cfg.layout, &cfg.costs);
    let workers = cfg.workers.iter().copied().max().expect("validated non-empty");
    let plan = list_schedule(&graph, workers, cfg.policy).map_err(module)?;
    let threaded = generator.generate_video_threaded(&graph, &plan.worker_queues()).map_err(module)?;
    invariant(threaded.bitwise_eq(&video), || format!("{workers}-worker execution differs from sequential execution"))?;

    let mut frames = String::from("segment,local,position,on_timeline,deviation\n");
    for s in &video.trace.samples {
        let _ = writeln!(frames, "{},{},{},{},{:.6}", s.segment, s.local, s.position, s.on_timeline, s.deviation);
    }
    let timeline_dev = video.trace.timeline();
    let mut timeline = String::from("position,deviation\n");
    for (i, d) in timeline_dev.iter().enumerate() {
        let _ = writeln!(timeline, "{i},{d:.6}");
    }
    let frame_count: usize = video.segments.iter().map(|s| s.frames.len()).sum();
    let summary = format!(
        "segments,mode,timeline_len,generated_frames,max_deviation,fingerprint,threaded_workers,threaded_identical\n{},{},{},{},{:.6},{:016x},{},true\n",
        cfg.layout.n_segments(),
        cfg.layout.mode().short_name(),
        cfg.layout.timeline_len(),
        frame_count,
        video.trace.max_deviation(),
        video.fingerprint(),
        workers
    );
    let mut art = Artifacts::default();
    art.add("frames.csv", frames);
    art.add("timeline.csv", timeline);
    art.add("summary.csv", summary);
    art.add(
        "generate.svg",
        line_chart(
            "generated video deviation",
            "timeline position",
            "deviation from ground truth",
            &[Series {
                name: "planned",
                points: timeline_dev.iter().enumerate().map(|(i, d)| (i as f64, *d)).collect(),
            }],
        ),
    );
    art.summary.push(format!(
        "{frame_count} frames over {} positions, max deviation {:.6}, {workers}-worker run identical",
        cfg.layout.timeline_len(),
        video.trace.max_deviation()
    ));
    Ok(art)
}
