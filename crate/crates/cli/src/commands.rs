//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;

use dagsched_core::appgraph::WorkloadSpec;
use dagsched_core::features::{AblationMask, FeatureExtractor};
use dagsched_core::ilsched::dagger::{dagger_run, leave_one_out, DaggerParams, LooParams};
use dagsched_core::ilsched::pipeline::{evaluate_holdout, gen_dataset as gen_dataset_impl};
use dagsched_core::ilsched::policy::{
    emit_flat_model, emit_policy, parse_flat_model, parse_policy, train_flat, train_hierarchical,
    FlatModel, FlatScheduler, PolicyScheduler, TrainParams,
};
use dagsched_core::ilsched::{Dataset, HierarchicalPolicy};
use dagsched_core::oracle::exact::{exact_schedule, ExactParams};
use dagsched_core::oracle::{etf_decide, EtfScheduler, Objective};
use dagsched_core::platform::emit_platform;
use dagsched_core::sim::{
    run_simulation, slowdown, Scheduler, SimReport, SimView, TaskInstance,
};

use crate::config::{
    load_platform, load_workload, make_trace, out_path, parse_objective, parse_scheduler,
    resolve_rates, saturation_for, workload_apps, SchedulerSpec,
};

// ── gen-profiles ─────────────────────────────────────────────────────────

#[derive(Args)]
pub struct GenProfilesArgs {
    /// Built-in configuration name (G1..G5).
    #[arg(long, default_value = "G1")]
    platform: String,
    /// Output file.
    #[arg(short, long, default_value = "platform.txt")]
    out: PathBuf,
}

pub fn gen_profiles(out_dir: &Path, args: GenProfilesArgs) -> Result<()> {
    let arch = load_platform(&args.platform)?;
    let text = emit_platform(&arch);
    // Validate the emission round-trips before declaring success.
    dagsched_core::platform::parse_platform(&text)?;
    let path = out_path(out_dir, &args.out)?;
    std::fs::write(&path, text)?;
    println!(
        "wrote {} ({} clusters, {} PEs, {} task types)",
        path.display(),
        arch.cluster_count(),
        arch.pe_count(),
        arch.catalog.len()
    );
    Ok(())
}

// ── gen-dataset ──────────────────────────────────────────────────────────

#[derive(Args)]
pub struct GenDatasetArgs {
    #[arg(long, default_value = "G1")]
    platform: String,
    /// Workload spec file; defaults to the bundled 500-frame mix.
    #[arg(long)]
    workload: Option<PathBuf>,
    /// Comma-separated injection rates (frames/ms); defaults to the
    /// canonical fractions of the saturation rate.
    #[arg(long)]
    rates: Option<String>,
    #[arg(long, default_value = "performance")]
    objective: String,
    #[arg(long, default_value_t = 4)]
    pred_slots: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(short, long, default_value = "dataset.txt")]
    out: PathBuf,
}

pub fn gen_dataset(out_dir: &Path, args: GenDatasetArgs) -> Result<()> {
    let arch = load_platform(&args.platform)?;
    let spec = load_workload(args.workload.as_deref(), 0.0, args.seed)?;
    let apps = workload_apps(&spec)?;
    let rates = resolve_rates(args.rates.as_deref(), &arch, &apps, &spec)?;
    let objective = parse_objective(&args.objective)?;
    let dataset = gen_dataset_impl(&arch, &apps, &spec, &rates, objective, args.pred_slots, args.seed)?;
    let text = dataset.emit();
    Dataset::parse(&text)?;
    let path = out_path(out_dir, &args.out)?;
    std::fs::write(&path, text)?;
    println!("wrote {} ({} rows)", path.display(), dataset.len());
    println!("cluster label histogram:");
    for (label, count) in dataset.cluster_histogram() {
        let name = &dataset.schema.cluster_names[label as usize];
        println!("  {label} {name:8} {count}");
    }
    Ok(())
}

// ── train ────────────────────────────────────────────────────────────────

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 12)]
    depth_cluster: usize,
    #[arg(long, default_value_t = 12)]
    depth_pe: usize,
    #[arg(long, default_value_t = 4)]
    min_leaf: usize,
    /// Depth of the flat baseline used in the accuracy table.
    #[arg(long, default_value_t = 12)]
    flat_depth: usize,
    /// Seed of the stratified 80/20 held-out split.
    #[arg(long, default_value_t = 7)]
    holdout_seed: u64,
    #[arg(short, long, default_value = "model.txt")]
    out: PathBuf,
    /// Also write the flat baseline model.
    #[arg(long)]
    flat_out: Option<PathBuf>,
    /// Also write the held-out accuracy table as JSON.
    #[arg(long)]
    accuracy_out: Option<PathBuf>,
}

pub fn train(out_dir: &Path, args: TrainArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.dataset)
        .with_context(|| format!("reading dataset '{}'", args.dataset.display()))?;
    let dataset = Dataset::parse(&text)?;
    let params = TrainParams {
        depth_cluster: args.depth_cluster,
        depth_pe: args.depth_pe,
        min_leaf: args.min_leaf,
    };
    let holdout = evaluate_holdout(&dataset, params, args.flat_depth, args.holdout_seed)?;
    let policy = train_hierarchical(&dataset, params)?;
    let model_text = emit_policy(&policy);
    parse_policy(&model_text)?;
    let path = out_path(out_dir, &args.out)?;
    std::fs::write(&path, &model_text)?;

    println!("wrote {}", path.display());
    println!(
        "held-out accuracy ({} train rows, {} test rows):",
        holdout.train_rows, holdout.test_rows
    );
    println!("  cluster policy   {:.4}", holdout.cluster_accuracy);
    for (slot, acc) in holdout.pe_accuracy.iter().enumerate() {
        let name = &dataset.schema.cluster_names[slot];
        match acc {
            Some(a) => println!("  {name:8} policy  {a:.4}"),
            None => println!("  {name:8} policy  (single PE)"),
        }
    }
    println!("  hierarchical     {:.4}", holdout.composite_accuracy);
    println!("  flat baseline    {:.4}", holdout.flat_accuracy);
    if let Some(flat_path) = args.flat_out {
        let tree = train_flat(&dataset, args.flat_depth, args.min_leaf)?;
        let model = FlatModel {
            schema: dataset.schema.clone(),
            cluster_pe_counts: dataset.cluster_pe_counts.clone(),
            objective: dataset.objective,
            tree,
        };
        let text = emit_flat_model(&model);
        parse_flat_model(&text)?;
        let path = out_path(out_dir, &flat_path)?;
        std::fs::write(&path, text)?;
        println!("wrote {}", path.display());
    }
    if let Some(acc_path) = args.accuracy_out {
        let path = out_path(out_dir, &acc_path)?;
        let json = serde_json::json!({
            "format": "dagsched-accuracy",
            "version": 1,
            "train_rows": holdout.train_rows,
            "test_rows": holdout.test_rows,
            "cluster_accuracy": holdout.cluster_accuracy,
            "pe_accuracy": holdout.pe_accuracy,
            "composite_accuracy": holdout.composite_accuracy,
            "flat_accuracy": holdout.flat_accuracy,
        });
        std::fs::write(&path, serde_json::to_string_pretty(&json)?)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

// ── dagger ───────────────────────────────────────────────────────────────

#[derive(Args)]
pub struct DaggerArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "G1")]
    platform: String,
    #[arg(long)]
    workload: Option<PathBuf>,
    #[arg(long)]
    rates: Option<String>,
    #[arg(long, default_value = "performance")]
    objective: String,
    #[arg(long, default_value_t = 10)]
    max_iters: u32,
    #[arg(long, default_value_t = 0.02)]
    target_pct: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_pct: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(short, long, default_value = "model-dagger.txt")]
    out: PathBuf,
    /// Per-iteration stats CSV.
    #[arg(long, default_value = "dagger-stats.csv")]
    stats_out: PathBuf,
    /// Optionally write the aggregated dataset back out.
    #[arg(long)]
    dataset_out: Option<PathBuf>,
}

pub fn dagger(out_dir: &Path, args: DaggerArgs) -> Result<()> {
    let arch = load_platform(&args.platform)?;
    let model_text = std::fs::read_to_string(&args.model)?;
    let policy = parse_policy(&model_text)?;
    let dataset_text = std::fs::read_to_string(&args.dataset)?;
    let mut dataset = Dataset::parse(&dataset_text)?;
    if dataset.schema.hash() != policy.schema.hash() {
        bail!("dataset and model were built against different schemas");
    }
    let spec = load_workload(args.workload.as_deref(), 0.0, args.seed)?;
    let apps = workload_apps(&spec)?;
    let rates = resolve_rates(args.rates.as_deref(), &arch, &apps, &spec)?;
    let objective = parse_objective(&args.objective)?;
    let traces: Vec<_> = rates
        .iter()
        .enumerate()
        .map(|(i, &rate)| {
            let s = WorkloadSpec {
                injection_rate: rate,
                seed: args.seed.wrapping_add(1000 + i as u64),
                ..spec.clone()
            };
            make_trace(&s, &apps)
        })
        .collect::<Result<_>>()?;
    let params = DaggerParams {
        max_iters: args.max_iters,
        target_pct: args.target_pct,
        train: policy.params,
        noise_pct: args.noise_pct,
        seed: args.seed,
    };
    let outcome = dagger_run(&policy, &arch, &apps, &traces, objective, &mut dataset, &params)?;

    let mut stats = String::from("iteration,avg_latency_us,gap,cluster_rows_added,pe_rows_added,dataset_rows\n");
    for it in &outcome.iterations {
        stats.push_str(&format!(
            "{},{},{},{},{},{}\n",
            it.iteration, it.avg_latency_us, it.gap, it.cluster_rows_added, it.pe_rows_added,
            it.dataset_rows
        ));
        println!(
            "iteration {}: avg {:.1} µs, gap {:.4}, +{} cluster rows, +{} pe rows",
            it.iteration, it.avg_latency_us, it.gap, it.cluster_rows_added, it.pe_rows_added
        );
    }
    let stats_path = out_path(out_dir, &args.stats_out)?;
    std::fs::write(&stats_path, stats)?;
    let model_path = out_path(out_dir, &args.out)?;
    std::fs::write(&model_path, emit_policy(&outcome.policy))?;
    if let Some(ds_out) = args.dataset_out {
        let path = out_path(out_dir, &ds_out)?;
        std::fs::write(&path, dataset.emit())?;
    }
    println!(
        "selected iteration {} (target {}); oracle avg {:.1} µs; wrote {} and {}",
        outcome.best_iteration,
        if outcome.target_met { "met" } else { "NOT met" },
        outcome.oracle_avg_latency_us,
        model_path.display(),
        stats_path.display()
    );
    if !outcome.target_met {
        println!("no-improvement flag: consider more iterations");
    }
    Ok(())
}

// ── simulate ─────────────────────────────────────────────────────────────

#[derive(Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "G1")]
    platform: String,
    #[arg(long)]
    workload: Option<PathBuf>,
    /// Injection rate in frames/ms (overrides the workload file's rate).
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
    /// oracle:<objective> | policy:<model file> | flat:<model file> | exact[:<secs>]
    #[arg(long, default_value = "oracle:performance")]
    scheduler: String,
    #[arg(long, default_value_t = 0.0)]
    noise_pct: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output stem: writes <stem>.csv and <stem>.json.
    #[arg(short, long, default_value = "report")]
    out: PathBuf,
}

/// Exact solver as an in-loop scheduler: each frame is solved at dispatch
/// time against the current PE availability, then tasks follow the solved
/// assignment.
struct ExactScheduler {
    time_limit: std::time::Duration,
    assignments: std::collections::BTreeMap<(u64, usize), usize>,
}

impl Scheduler for ExactScheduler {
    fn next_assignment(
        &mut self,
        view: &SimView<'_>,
    ) -> Result<dagsched_core::sim::Assignment, dagsched_core::sim::SimError> {
        let task = &view.ready[0];
        let key = (task.frame_id, task.task_id);
        if let Some(&pe) = self.assignments.get(&key) {
            if view.arch.pes[pe].supports(task.task_type) {
                return Ok(dagsched_core::sim::Assignment { ready_index: 0, pe });
            }
        }
        // No cached plan (new frame): solve the frame's app graph against an
        // idealized copy of the current availability, then cache.
        let app_id = task.app_id;
        let app = APPS.with(|apps| apps.borrow()[app_id].clone());
        let result = exact_schedule(
            &app,
            view.arch,
            &ExactParams {
                time_limit: self.time_limit,
                node_limit: Some(2_000_000),
            },
        )
        .map_err(|e| dagsched_core::sim::SimError::Scheduler(e.to_string()))?;
        for st in result.schedule {
            self.assignments.insert((task.frame_id, st.task_id), st.pe);
        }
        let pe = self.assignments[&key];
        Ok(dagsched_core::sim::Assignment { ready_index: 0, pe })
    }

    fn label(&self) -> String {
        "exact".into()
    }
}

thread_local! {
    static APPS: std::cell::RefCell<Vec<dagsched_core::appgraph::ApplicationGraph>> =
        const { std::cell::RefCell::new(Vec::new()) };
}

pub fn simulate(out_dir: &Path, args: SimulateArgs) -> Result<()> {
    let arch = load_platform(&args.platform)?;
    let spec = load_workload(args.workload.as_deref(), args.rate, args.seed)?;
    let apps = workload_apps(&spec)?;
    let trace = make_trace(&spec, &apps)?;
    let report = run_with_scheduler(
        &arch,
        &apps,
        &trace,
        &parse_scheduler(&args.scheduler)?,
        args.noise_pct,
        args.seed,
    )?;
    write_report(out_dir, &args.out, &report)?;
    println!(
        "{} frames, avg latency {:.1} µs, avg energy {:.1} µJ, EDP {:.3e}",
        report.frames.len(),
        report.avg_latency_us,
        report.avg_energy_uj,
        report.edp
    );
    Ok(())
}

pub(crate) fn run_with_scheduler(
    arch: &dagsched_core::platform::ArchitectureGraph,
    apps: &[&dagsched_core::appgraph::ApplicationGraph],
    trace: &dagsched_core::appgraph::FrameArrivalTrace,
    spec: &SchedulerSpec,
    noise_pct: f64,
    seed: u64,
) -> Result<SimReport> {
    Ok(match spec {
        SchedulerSpec::Oracle(objective) => {
            let mut sched = EtfScheduler::new(*objective);
            run_simulation(arch, apps, trace, &mut sched, noise_pct, seed)?
        }
        SchedulerSpec::Policy(path) => {
            let policy = load_policy(path)?;
            let mut sched = PolicyScheduler::new(&policy, arch);
            let report = run_simulation(arch, apps, trace, &mut sched, noise_pct, seed)?;
            if sched.fallbacks.cluster_fallback + sched.fallbacks.etf_fallback > 0 {
                println!(
                    "fallbacks: {} in-cluster, {} etf",
                    sched.fallbacks.cluster_fallback, sched.fallbacks.etf_fallback
                );
            }
            report
        }
        SchedulerSpec::Flat(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading flat model '{}'", path.display()))?;
            let model = parse_flat_model(&text)?;
            let mut sched = FlatScheduler::new(
                &model.tree,
                model.schema.clone(),
                model.cluster_pe_counts.clone(),
                arch,
            );
            run_simulation(arch, apps, trace, &mut sched, noise_pct, seed)?
        }
        SchedulerSpec::Exact(secs) => {
            APPS.with(|cell| {
                *cell.borrow_mut() = apps.iter().map(|a| (*a).clone()).collect();
            });
            let mut sched = ExactScheduler {
                time_limit: std::time::Duration::from_secs_f64(*secs),
                assignments: Default::default(),
            };
            run_simulation(arch, apps, trace, &mut sched, noise_pct, seed)?
        }
    })
}

pub(crate) fn load_policy(path: &Path) -> Result<HierarchicalPolicy> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading model '{}'", path.display()))?;
    Ok(parse_policy(&text)?)
}

pub(crate) fn write_report(out_dir: &Path, stem: &Path, report: &SimReport) -> Result<()> {
    let csv_path = out_path(out_dir, &stem.with_extension("csv"))?;
    let json_path = out_path(out_dir, &stem.with_extension("json"))?;
    let csv = report.to_csv();
    SimReport::parse_csv(&csv)?;
    std::fs::write(&csv_path, csv)?;
    std::fs::write(&json_path, report.to_json())?;
    println!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

// ── compare ──────────────────────────────────────────────────────────────

#[derive(Args)]
pub struct CompareArgs {
    /// Report CSV of the scheduler under study.
    #[arg(long)]
    report_a: PathBuf,
    /// Report CSV of the reference scheduler.
    #[arg(long)]
    report_b: PathBuf,
    #[arg(short, long, default_value = "slowdown.json")]
    out: PathBuf,
}

pub fn compare(out_dir: &Path, args: CompareArgs) -> Result<()> {
    let a = SimReport::parse_csv(&std::fs::read_to_string(&args.report_a)?)?;
    let b = SimReport::parse_csv(&std::fs::read_to_string(&args.report_b)?)?;
    let s = slowdown(&a, &b)?;
    let json = serde_json::json!({
        "format": "dagsched-slowdown",
        "version": 1,
        "report_a": a.scheduler,
        "report_b": b.scheduler,
        "frames": a.frames.len(),
        "per_frame_mean": s.per_frame_mean,
        "aggregate_ratio": s.aggregate_ratio,
    });
    let path = out_path(out_dir, &args.out)?;
    std::fs::write(&path, serde_json::to_string_pretty(&json)?)?;
    println!(
        "slowdown of {} vs {}: per-frame mean {:.4}, aggregate {:.4} -> {}",
        a.scheduler,
        b.scheduler,
        s.per_frame_mean,
        s.aggregate_ratio,
        path.display()
    );
    Ok(())
}

// ── loo ──────────────────────────────────────────────────────────────────

#[derive(Args)]
pub struct LooArgs {
    /// Application to exclude; omit to run all six bundled apps.
    #[arg(long)]
    app: Option<String>,
    #[arg(long, default_value = "G1")]
    platform: String,
    #[arg(long)]
    workload: Option<PathBuf>,
    #[arg(long)]
    rates: Option<String>,
    /// Evaluation injection rate (frames/ms); default mid of the sweep.
    #[arg(long)]
    eval_rate: Option<f64>,
    #[arg(long, default_value_t = 10)]
    max_iters: u32,
    #[arg(long, default_value_t = 0.02)]
    target_pct: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(short, long, default_value = "loo.json")]
    out: PathBuf,
}

pub fn loo(out_dir: &Path, args: LooArgs) -> Result<()> {
    let arch = load_platform(&args.platform)?;
    let spec = load_workload(args.workload.as_deref(), 0.0, args.seed)?;
    let apps = workload_apps(&spec)?;
    let rates = resolve_rates(args.rates.as_deref(), &arch, &apps, &spec)?;
    let eval_rate = args.eval_rate.unwrap_or(rates[rates.len() / 2]);
    let targets: Vec<String> = match args.app {
        Some(app) => vec![app],
        None => spec.entries.iter().map(|(n, _)| n.clone()).collect(),
    };
    let params = LooParams {
        train_rates: rates,
        eval_rate,
        pred_slots: 4,
        train: TrainParams::default(),
        dagger: DaggerParams {
            max_iters: args.max_iters,
            target_pct: args.target_pct,
            ..Default::default()
        },
        seed: args.seed,
    };
    let mut reports = Vec::new();
    for app in &targets {
        let report = leave_one_out(app, &arch, &apps, &spec, &params)?;
        println!(
            "{app}: slowdown before {:.4} -> after {:.4} ({} iterations, target {})",
            report.before.per_frame_mean,
            report.after.per_frame_mean,
            report.iterations_used,
            if report.target_met { "met" } else { "NOT met" }
        );
        reports.push(report);
    }
    let json = serde_json::json!({
        "format": "dagsched-loo",
        "version": 1,
        "eval_rate": eval_rate,
        "reports": reports,
    });
    let path = out_path(out_dir, &args.out)?;
    std::fs::write(&path, serde_json::to_string_pretty(&json)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

// ── sweep ────────────────────────────────────────────────────────────────

#[derive(Args)]
pub struct SweepArgs {
    /// Comma-separated platform names/files.
    #[arg(long, default_value = "G1")]
    platforms: String,
    #[arg(long)]
    workload: Option<PathBuf>,
    #[arg(long)]
    rates: Option<String>,
    /// Comma-separated scheduler specs.
    #[arg(long, default_value = "oracle:performance")]
    schedulers: String,
    /// Comma-separated noise levels.
    #[arg(long, default_value = "0")]
    noise: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Directory for the per-run reports and summary.csv.
    #[arg(short, long, default_value = "sweep")]
    out: PathBuf,
}

pub fn sweep(out_dir: &Path, args: SweepArgs) -> Result<()> {
    let sweep_dir = out_path(out_dir, &args.out)?;
    std::fs::create_dir_all(&sweep_dir)?;
    let platforms: Vec<&str> = args.platforms.split(',').map(str::trim).collect();
    let schedulers: Vec<&str> = args.schedulers.split(',').map(str::trim).collect();
    let noises: Vec<f64> = args
        .noise
        .split(',')
        .map(|s| s.trim().parse().context("bad noise level"))
        .collect::<Result<_>>()?;

    // Build the run matrix serially (deterministic), execute concurrently,
    // aggregate serially.
    struct Run {
        platform: String,
        scheduler: String,
        rate: f64,
        noise: f64,
        stem: PathBuf,
    }
    let mut runs = Vec::new();
    for platform in &platforms {
        let arch = load_platform(platform)?;
        let spec = load_workload(args.workload.as_deref(), 0.0, args.seed)?;
        let apps = workload_apps(&spec)?;
        let rates = resolve_rates(args.rates.as_deref(), &arch, &apps, &spec)?;
        for scheduler in &schedulers {
            for &rate in &rates {
                for &noise in &noises {
                    let stem = sweep_dir.join(format!(
                        "{}_{}_r{:.3}_n{}",
                        platform,
                        scheduler.replace([':', '/'], "-"),
                        rate,
                        noise
                    ));
                    runs.push(Run {
                        platform: platform.to_string(),
                        scheduler: scheduler.to_string(),
                        rate,
                        noise,
                        stem,
                    });
                }
            }
        }
    }

    let seed = args.seed;
    let workload = args.workload.clone();
    let results: Vec<Result<(usize, SimReport)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .enumerate()
            .map(|(i, run)| {
                let workload = workload.clone();
                scope.spawn(move || -> Result<(usize, SimReport)> {
                    let arch = load_platform(&run.platform)?;
                    let mut spec = load_workload(workload.as_deref(), 0.0, seed)?;
                    spec.injection_rate = run.rate;
                    let apps = workload_apps(&spec)?;
                    let trace = make_trace(&spec, &apps)?;
                    let report = run_with_scheduler(
                        &arch,
                        &apps,
                        &trace,
                        &parse_scheduler(&run.scheduler)?,
                        run.noise,
                        seed,
                    )?;
                    Ok((i, report))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let mut summary = String::from("platform,scheduler,rate,noise,frames,avg_latency_us,avg_energy_uj,edp,ed2p\n");
    let mut reports: Vec<Option<SimReport>> = (0..runs.len()).map(|_| None).collect();
    for result in results {
        let (i, report) = result?;
        reports[i] = Some(report);
    }
    for (run, report) in runs.iter().zip(reports) {
        let report = report.expect("all runs completed");
        std::fs::write(run.stem.with_extension("csv"), report.to_csv())?;
        std::fs::write(run.stem.with_extension("json"), report.to_json())?;
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            run.platform,
            run.scheduler,
            run.rate,
            run.noise,
            report.frames.len(),
            report.avg_latency_us,
            report.avg_energy_uj,
            report.edp,
            report.ed2p
        ));
    }
    let summary_path = sweep_dir.join("summary.csv");
    std::fs::write(&summary_path, summary)?;
    println!("wrote {} runs under {}", runs.len(), sweep_dir.display());
    Ok(())
}

// ── bench-latency ────────────────────────────────────────────────────────

#[derive(Args)]
pub struct BenchLatencyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "G1")]
    platform: String,
    /// Measurement repetitions per recorded state.
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(short, long, default_value = "latency.json")]
    out: PathBuf,
}

struct StateCapture {
    inner: EtfScheduler,
    states: Vec<(Vec<f64>, Vec<TaskInstance>)>,
    stride: usize,
    counter: usize,
}

impl Scheduler for StateCapture {
    fn next_assignment(
        &mut self,
        view: &SimView<'_>,
    ) -> Result<dagsched_core::sim::Assignment, dagsched_core::sim::SimError> {
        self.counter += 1;
        if self.counter % self.stride == 0 {
            self.states
                .push((view.pe_ready_time.to_vec(), view.ready.to_vec()));
        }
        self.inner.next_assignment(view)
    }

    fn label(&self) -> String {
        "capture".into()
    }
}

fn stats_ns(samples: &mut [u64]) -> (f64, u64, u64) {
    samples.sort_unstable();
    let mean = samples.iter().sum::<u64>() as f64 / samples.len().max(1) as f64;
    let median = samples[samples.len() / 2];
    let p99 = samples[((samples.len() as f64 - 1.0) * 0.99).round() as usize];
    (mean, median, p99)
}

pub fn bench_latency(out_dir: &Path, args: BenchLatencyArgs) -> Result<()> {
    let arch = load_platform(&args.platform)?;
    let policy = load_policy(&args.model)?;
    let model_size = std::fs::metadata(&args.model)?.len();

    // Record states from a mixed run that includes the radar-style app so
    // large ready sets occur.
    let mut spec = load_workload(None, 0.0, args.seed)?;
    spec.entries.push(("PulseDoppler".to_string(), 4));
    spec.entries.iter_mut().for_each(|(name, n)| {
        if name != "PulseDoppler" {
            *n = (*n / 5).max(1);
        }
    });
    let apps = workload_apps(&spec)?;
    let sat = saturation_for(&arch, &apps, &spec)?;
    spec.injection_rate = 0.25 * sat;
    let trace = make_trace(&spec, &apps)?;
    let mut capture = StateCapture {
        inner: EtfScheduler::new(Objective::Performance),
        states: Vec::new(),
        stride: 7,
        counter: 0,
    };
    run_simulation(&arch, &apps, &trace, &mut capture, 0.0, args.seed)?;
    let depths: Vec<Vec<usize>> = apps.iter().map(|a| a.downward_depths()).collect();
    let extractor = FeatureExtractor::new(policy.schema.clone(), &arch, AblationMask::none());

    let mut etf_ns = Vec::new();
    let mut policy_ns = Vec::new();
    let mut by_size: std::collections::BTreeMap<usize, (Vec<u64>, Vec<u64>)> = Default::default();
    for (pe_ready, ready) in &capture.states {
        let view = SimView {
            now: 0.0,
            arch: &arch,
            pe_ready_time: pe_ready,
            ready,
            depths: &depths,
        };
        let bucket = ready.len().next_power_of_two();
        for _ in 0..args.iterations {
            let t = Instant::now();
            let a = etf_decide(&arch, pe_ready, ready, Objective::Performance)
                .map_err(|e| anyhow::anyhow!(e.to_string()))?;
            let ns = t.elapsed().as_nanos() as u64;
            std::hint::black_box(a.pe);
            etf_ns.push(ns);
            by_size.entry(bucket).or_default().0.push(ns);

            let t = Instant::now();
            let fv = extractor.extract(&view, 0).map_err(|e| anyhow::anyhow!(e.to_string()))?;
            let p = policy
                .predict(&fv.values)
                .map_err(|e| anyhow::anyhow!(e.to_string()))?;
            let ns = t.elapsed().as_nanos() as u64;
            std::hint::black_box(p);
            policy_ns.push(ns);
            by_size.entry(bucket).or_default().1.push(ns);
        }
    }
    let (etf_mean, etf_median, etf_p99) = stats_ns(&mut etf_ns);
    let (pol_mean, pol_median, pol_p99) = stats_ns(&mut policy_ns);
    println!("model size: {:.1} KB", model_size as f64 / 1024.0);
    println!("etf_decide    mean {etf_mean:9.0} ns  median {etf_median:7} ns  p99 {etf_p99:7} ns");
    println!("policy_decide mean {pol_mean:9.0} ns  median {pol_median:7} ns  p99 {pol_p99:7} ns");
    let mut buckets = Vec::new();
    for (size, (mut etf, mut pol)) in by_size {
        let (_, etf_median, _) = stats_ns(&mut etf);
        let (_, pol_median, _) = stats_ns(&mut pol);
        println!("  ready<=~{size:4}: etf median {etf_median:7} ns, policy median {pol_median:7} ns");
        buckets.push(serde_json::json!({
            "ready_size_bucket": size,
            "etf_median_ns": etf_median,
            "policy_median_ns": pol_median,
        }));
    }
    let json = serde_json::json!({
        "format": "dagsched-latency",
        "version": 1,
        "model_file_kb": model_size as f64 / 1024.0,
        "states": capture.states.len(),
        "iterations_per_state": args.iterations,
        "etf": {"mean_ns": etf_mean, "median_ns": etf_median, "p99_ns": etf_p99},
        "policy": {"mean_ns": pol_mean, "median_ns": pol_median, "p99_ns": pol_p99},
        "buckets": buckets,
    });
    let path = out_path(out_dir, &args.out)?;
    std::fs::write(&path, serde_json::to_string_pretty(&json)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
