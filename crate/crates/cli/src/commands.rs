//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use delome_core::{
    aggregate_metrics, build_stream, condense as condense_task, generate_sbm, io,
    run_stream_observed, sampled_memory, train_on_memory_accuracy, CondenseConfig, Error,
    InitSampler, MetricsSummary, OptimizerConfig, OptimizerKind, ReplayConfig, Result, SbmParams,
    StreamOutcome, TaskStream,
};

use crate::config::RunFile;
use crate::{CondenseArgs, EvalArgs, GenArgs, RunArgs, SplitArgs};

pub fn gen(args: GenArgs) -> Result<()> {
    let params = SbmParams {
        block_sizes: args.blocks,
        intra_prob: args.intra,
        inter_prob: args.inter,
        feature_dim: args.feature_dim,
        feature_center_scale: args.center_scale,
        seed: args.seed,
    };
    let graph = generate_sbm(&params)?;
    io::save_graph(&graph, &args.out)?;
    println!(
        "wrote graph: {} nodes, {} edges, {} classes -> {}",
        graph.num_nodes(),
        graph.num_edges(),
        graph.class_ids().len(),
        args.out.display()
    );
    Ok(())
}

pub fn split(args: SplitArgs) -> Result<()> {
    let graph = io::load_graph(&args.graph)?;
    let stream = build_stream(&graph, args.classes_per_task, args.seed)?;
    io::save_stream(&stream, &args.out)?;
    println!(
        "wrote stream: {} tasks x {} classes (dropped {:?}) -> {}",
        stream.num_tasks(),
        stream.classes_per_task(),
        stream.dropped_classes(),
        args.out.display()
    );
    Ok(())
}

pub fn condense(args: CondenseArgs) -> Result<()> {
    let optimizer = match args.optimizer.as_str() {
        "adam" => OptimizerKind::Adam,
        "sgd" => OptimizerKind::Sgd,
        other => {
            return Err(Error::Invalid(format!(
                "--optimizer must be adam or sgd, got {other}"
            )))
        }
    };
    let (task, task_id) = match (&args.stream, &args.graph) {
        (Some(dir), _) => {
            let stream = io::load_stream(dir)?;
            let task = stream
                .tasks()
                .get(args.task)
                .ok_or_else(|| {
                    Error::Invalid(format!(
                        "--task {} out of range, stream has {} tasks",
                        args.task,
                        stream.num_tasks()
                    ))
                })?
                .clone();
            (task, args.task)
        }
        (None, Some(dir)) => {
            // A raw graph becomes a single task over every class it has.
            let graph = io::load_graph(dir)?;
            let classes = graph.class_ids().len();
            let stream = build_stream(&graph, classes, args.seed)?;
            (stream.tasks()[0].clone(), 0)
        }
        (None, None) => unreachable!("clap enforces stream or graph"),
    };

    let cfg = CondenseConfig {
        budget_per_class: args.budget,
        epochs: args.epochs,
        learning_rate: args.lr,
        init_seed: args.seed,
        batch_size_per_class: args.batch_size,
        fanout: args.fanout,
        hops: args.hops,
        optimizer,
        ..Default::default()
    };
    let memory = delome_core::condense::with_task_id(condense_task(&task, &cfg)?, task_id);
    let json_path = io::save_memory(&memory, &args.out)?;
    println!(
        "wrote memory: {} rows -> {}",
        memory.rows(),
        json_path.display()
    );

    if args.report_expressiveness {
        let opt = OptimizerConfig::default();
        let sampler = InitSampler::new(args.seed);
        let condensed_acc = train_on_memory_accuracy(&memory, &task, args.hops, &opt, &sampler)?;
        let sampled = sampled_memory(&task, args.budget, args.seed)?;
        let sampled_acc = train_on_memory_accuracy(&sampled, &task, args.hops, &opt, &sampler)?;
        println!(
            "expressiveness: condensed={condensed_acc:.4} sampled={sampled_acc:.4} margin={:+.4}",
            condensed_acc - sampled_acc
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool_version: &'static str,
    execution_mode: &'static str,
    config: &'a RunFile,
    seeds: &'a [u64],
    per_seed_seconds: Vec<f64>,
    total_seconds: f64,
    artifacts: Vec<String>,
}

fn read_config(path: &Path) -> Result<RunFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.span().map(|s| s.start).unwrap_or(0),
        msg: e.message().to_string(),
    })
}

/// Execute one multi-seed experiment into `out`, returning the summary.
fn execute(
    stream: &TaskStream,
    base: &ReplayConfig,
    seeds: &[u64],
    out: &Path,
) -> Result<(MetricsSummary, Vec<f64>, Vec<String>)> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut artifacts = Vec::new();

    let results: Vec<Result<(StreamOutcome, f64)>> = delome_core::exec::map_slice(seeds, |&seed| {
        let seed_dir = out.join(format!("seed_{seed}"));
        std::fs::create_dir_all(&seed_dir).map_err(|e| Error::io(&seed_dir, e))?;
        let cfg = base.clone().with_run_seed(seed);
        let started = Instant::now();
        // Persist partial matrices after every task so interrupted runs stay
        // inspectable.
        let outcome = run_stream_observed(stream, &cfg, |_t, cil, til| {
            io::write_matrix_csv(cil, &seed_dir.join("matrix_cil.csv"))?;
            io::write_matrix_csv(til, &seed_dir.join("matrix_til.csv"))?;
            Ok(())
        })?;
        Ok((outcome, started.elapsed().as_secs_f64()))
    });

    let mut outcomes = Vec::with_capacity(seeds.len());
    let mut per_seed_seconds = Vec::with_capacity(seeds.len());
    for (seed, result) in seeds.iter().zip(results) {
        let (outcome, secs) = result?;
        artifacts.push(format!("seed_{seed}/matrix_cil.csv"));
        artifacts.push(format!("seed_{seed}/matrix_til.csv"));
        outcomes.push(outcome);
        per_seed_seconds.push(secs);
    }

    // Top-level matrices mirror the first listed seed's run.
    io::write_matrix_csv(&outcomes[0].cil.matrix, &out.join("matrix_cil.csv"))?;
    io::write_matrix_csv(&outcomes[0].til.matrix, &out.join("matrix_til.csv"))?;
    artifacts.push("matrix_cil.csv".into());
    artifacts.push("matrix_til.csv".into());

    let metrics = aggregate_metrics(seeds, &outcomes);
    io::write_json_atomic(&metrics, &out.join("metrics.json"))?;
    artifacts.push("metrics.json".into());
    Ok((metrics, per_seed_seconds, artifacts))
}

fn sweep_row(metrics: &MetricsSummary) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        metrics.aa_cil.mean,
        metrics.aa_cil.std,
        metrics.af_cil.mean,
        metrics.af_cil.std,
        metrics.aa_til.mean,
        metrics.aa_til.std,
        metrics.af_til.mean,
        metrics.af_til.std
    )
}

/// Mean training-split class size across the stream, for mapping imbalance
/// ratios to budgets.
fn mean_train_class_size(stream: &TaskStream) -> f64 {
    let mut total = 0usize;
    let mut classes = 0usize;
    for task in stream.tasks() {
        for (_, count) in task.train_class_counts() {
            total += count;
            classes += 1;
        }
    }
    total as f64 / classes.max(1) as f64
}

pub fn run(args: RunArgs) -> Result<()> {
    let started = Instant::now();
    let mut file = read_config(&args.config)?;
    if let Some(seeds) = args.seeds {
        file.seeds = seeds;
    }
    if let Some(out) = args.out {
        file.output = out.to_string_lossy().into_owned();
    }
    if file.seeds.is_empty() {
        return Err(Error::Invalid("seeds list must be non-empty".into()));
    }
    let stream = io::load_stream(Path::new(&file.stream))?;
    let base = file.to_replay_config();
    base.validate()?;
    let out = PathBuf::from(&file.output);

    let mut per_seed_seconds = Vec::new();
    let mut artifacts = Vec::new();

    if let Some(budgets) = &args.budget_sweep {
        let mut csv = String::from(
            "budget,aa_cil_mean,aa_cil_std,af_cil_mean,af_cil_std,aa_til_mean,aa_til_std,af_til_mean,af_til_std\n",
        );
        for &b in budgets {
            let mut cfg = base.clone();
            cfg.budget_per_class = b;
            let sub = out.join(format!("budget_{b}"));
            let (metrics, secs, arts) = execute(&stream, &cfg, &file.seeds, &sub)?;
            csv.push_str(&format!("{b},{}\n", sweep_row(&metrics)));
            per_seed_seconds.extend(secs);
            artifacts.extend(arts.into_iter().map(|a| format!("budget_{b}/{a}")));
            println!(
                "budget {b}: aa_cil {:.4} +/- {:.4}",
                metrics.aa_cil.mean, metrics.aa_cil.std
            );
        }
        let path = out.join("budget_sweep.csv");
        std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        artifacts.push("budget_sweep.csv".into());
    } else if let Some(ratios) = &args.imbalance_sweep {
        let class_size = mean_train_class_size(&stream);
        let mut csv = String::from(
            "imbalance_ratio,budget,aa_cil_mean,aa_cil_std,af_cil_mean,af_cil_std,aa_til_mean,aa_til_std,af_til_mean,af_til_std\n",
        );
        for &ratio in ratios {
            if !(ratio > 0.0) {
                return Err(Error::Invalid(format!(
                    "imbalance ratio must be > 0, got {ratio}"
                )));
            }
            let b = ((class_size / ratio).round() as usize).max(1);
            let mut cfg = base.clone();
            cfg.budget_per_class = b;
            let sub = out.join(format!("imbalance_{ratio}"));
            let (metrics, secs, arts) = execute(&stream, &cfg, &file.seeds, &sub)?;
            csv.push_str(&format!("{ratio},{b},{}\n", sweep_row(&metrics)));
            per_seed_seconds.extend(secs);
            artifacts.extend(arts.into_iter().map(|a| format!("imbalance_{ratio}/{a}")));
            println!(
                "imbalance {ratio} (budget {b}): aa_cil {:.4} +/- {:.4}",
                metrics.aa_cil.mean, metrics.aa_cil.std
            );
        }
        let path = out.join("imbalance_sweep.csv");
        std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        artifacts.push("imbalance_sweep.csv".into());
    } else {
        let (metrics, secs, arts) = execute(&stream, &base, &file.seeds, &out)?;
        per_seed_seconds = secs;
        artifacts = arts;
        println!(
            "aa_cil {:.4} +/- {:.4}  af_cil {:+.4}  aa_til {:.4}  af_til {:+.4}",
            metrics.aa_cil.mean,
            metrics.aa_cil.std,
            metrics.af_cil.mean,
            metrics.aa_til.mean,
            metrics.af_til.mean
        );
    }

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        execution_mode: delome_core::exec::mode(),
        config: &file,
        seeds: &file.seeds,
        per_seed_seconds,
        total_seconds: started.elapsed().as_secs_f64(),
        artifacts,
    };
    io::write_json_atomic(&manifest, &out.join("manifest.json"))?;
    println!("results in {}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct EvalReport {
    aa: f64,
    af: f64,
    af_degenerate: bool,
}

pub fn eval(args: EvalArgs) -> Result<()> {
    let matrix = io::read_matrix_csv(&args.matrix)?;
    let aa = delome_core::average_accuracy(&matrix)?;
    let (af, af_degenerate) = delome_core::average_forgetting(&matrix)?;
    let report = EvalReport {
        aa,
        af,
        af_degenerate,
    };
    println!(
        "{}",
        serde_json::to_string(&report).expect("report serializes")
    );
    Ok(())
}
