//! Memory buffer management, label-frequency logit calibration, debiased and
//! vanilla replay objectives, per-task training, and the continual-learning
//! driver with pluggable strategies.

use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::condense::{condense, init_memory, with_task_id, CondenseConfig, SyntheticMemory};
use crate::error::{Error, Result};
use crate::eval::{
    accuracy_on_rows, average_accuracy, average_forgetting, AccuracyMatrix, EvalMode,
};
use crate::exec;
use crate::graph::{normalize_adjacency, propagate};
use crate::model::{
    adjusted_cross_entropy, cross_entropy, fit_terms, InitSampler, LinearSgcModel, Logits,
    LossTerm, OptimizerConfig,
};
use crate::seeds::{domain, split_seed};
use crate::stream::{TaskGraph, TaskStream};

/// Ordered per-task memories; append-only, one entry per completed task.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryBuffer {
    entries: Vec<SyntheticMemory>,
}

impl MemoryBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[SyntheticMemory] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_rows(&self) -> usize {
        self.entries.iter().map(|m| m.rows()).sum()
    }

    /// Distinct classes across all entries, ascending.
    pub fn classes(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self
            .entries
            .iter()
            .flat_map(|m| m.classes().iter().copied())
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn num_classes(&self) -> usize {
        self.classes().len()
    }
}

/// Append a memory; prior entries stay untouched. Rejects duplicate task ids.
pub fn buffer_extend(buffer: &MemoryBuffer, memory: SyntheticMemory) -> Result<MemoryBuffer> {
    if buffer
        .entries
        .iter()
        .any(|m| m.task_id() == memory.task_id())
    {
        return Err(Error::DuplicateTask(memory.task_id()));
    }
    let mut next = buffer.clone();
    next.entries.push(memory);
    Ok(next)
}

/// Per-class logit offsets over the global class space.
///
/// Buffer classes share one magnitude `ln(b / denom)`; each current class c
/// gets `ln(count_c / denom)`, with `denom = |Y_t| + total buffer rows` and
/// `b` the buffer's mean per-class row count (equal to the configured budget
/// whenever no class was capped). Everything is scaled by `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOffsets {
    offsets: Vec<f64>,
    buffer_magnitude: Option<f64>,
    tau: f64,
}

impl CalibrationOffsets {
    /// Offsets indexed by global class id; classes outside buffer and
    /// current task (none, in a well-formed stream) sit at 0.
    pub fn as_slice(&self) -> &[f64] {
        &self.offsets
    }

    /// The shared buffer-class magnitude, absent for an empty buffer.
    pub fn buffer_magnitude(&self) -> Option<f64> {
        self.buffer_magnitude
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Offsets vector widened (zero-padded) to `class_count` columns.
    pub fn padded(&self, class_count: usize) -> Vec<f64> {
        let mut v = self.offsets.clone();
        v.resize(class_count.max(v.len()), 0.0);
        v
    }

    pub fn from_raw(offsets: Vec<f64>, buffer_magnitude: Option<f64>, tau: f64) -> Self {
        Self {
            offsets,
            buffer_magnitude,
            tau,
        }
    }
}

/// Label-frequency calibration magnitudes for one task's training.
///
/// Buffer classes and current classes must be disjoint and every current
/// class needs a positive training count.
pub fn calibration_offsets(
    buffer: &MemoryBuffer,
    current_class_counts: &BTreeMap<usize, usize>,
    tau: f64,
) -> Result<CalibrationOffsets> {
    if !(tau > 0.0) {
        return Err(Error::Invalid(format!("tau must be > 0, got {tau}")));
    }
    if current_class_counts.is_empty() {
        return Err(Error::Invalid("no current classes".into()));
    }
    let buffer_classes = buffer.classes();
    for (&c, &count) in current_class_counts {
        if count == 0 {
            return Err(Error::Invalid(format!(
                "current class {c} has zero training nodes"
            )));
        }
        if buffer_classes.contains(&c) {
            return Err(Error::Invalid(format!(
                "class {c} is in both buffer and current task"
            )));
        }
    }

    let current_total: usize = current_class_counts.values().sum();
    let denom = (current_total + buffer.total_rows()) as f64;
    let max_class = buffer_classes
        .iter()
        .chain(current_class_counts.keys())
        .copied()
        .max()
        .unwrap_or(0);
    let mut offsets = vec![0.0; max_class + 1];

    let buffer_magnitude = if buffer.is_empty() {
        None
    } else {
        let mean_rows = buffer.total_rows() as f64 / buffer.num_classes() as f64;
        let pi_b = tau * (mean_rows / denom).ln();
        for &c in &buffer_classes {
            offsets[c] = pi_b;
        }
        Some(pi_b)
    };
    for (&c, &count) in current_class_counts {
        offsets[c] = tau * (count as f64 / denom).ln();
    }
    Ok(CalibrationOffsets {
        offsets,
        buffer_magnitude,
        tau,
    })
}

/// Debiased replay objective: adjusted cross-entropy on the current rows
/// (per-class offsets column-wise) plus one term per buffer entry with the
/// shared buffer magnitude applied uniformly across its columns. No λ.
pub fn debiased_loss(
    logits_current: &Logits,
    labels_current: &[usize],
    logits_memory: &[Logits],
    labels_memory: &[&[usize]],
    offsets: &CalibrationOffsets,
) -> Result<f64> {
    if logits_memory.len() != labels_memory.len() {
        return Err(Error::Shape("memory logits/labels length mismatch".into()));
    }
    let classes = logits_current.as_array().ncols();
    let mut total =
        adjusted_cross_entropy(logits_current, labels_current, &offsets.padded(classes))?;
    for (h, y) in logits_memory.iter().zip(labels_memory) {
        let uniform = vec![offsets.buffer_magnitude().unwrap_or(0.0); h.as_array().ncols()];
        total += adjusted_cross_entropy(h, y, &uniform)?;
    }
    Ok(total)
}

/// Vanilla replay objective: current cross-entropy plus λ times the summed
/// per-entry memory cross-entropies.
pub fn vanilla_replay_loss(
    logits_current: &Logits,
    labels_current: &[usize],
    logits_memory: &[Logits],
    labels_memory: &[&[usize]],
    lambda: f64,
) -> Result<f64> {
    if logits_memory.len() != labels_memory.len() {
        return Err(Error::Shape("memory logits/labels length mismatch".into()));
    }
    let mut total = cross_entropy(logits_current, labels_current)?;
    for (h, y) in logits_memory.iter().zip(labels_memory) {
        total += lambda * cross_entropy(h, y)?;
    }
    Ok(total)
}

/// Continual-learning strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Condensed memory replayed through the debiased objective.
    Delome,
    /// Condensed memory replayed through the vanilla objective (λ weight).
    VanillaReplay,
    /// Uniformly sampled node memory replayed through the vanilla objective.
    SampledMemoryReplay,
    /// Train on the current task only.
    Finetune,
    /// Oracle: retrain from scratch on all tasks seen so far.
    Joint,
}

impl Strategy {
    pub fn uses_memory(self) -> bool {
        matches!(
            self,
            Strategy::Delome | Strategy::VanillaReplay | Strategy::SampledMemoryReplay
        )
    }

    fn default_memory(self) -> MemoryKind {
        match self {
            Strategy::SampledMemoryReplay => MemoryKind::Sampled,
            _ => MemoryKind::Condensed,
        }
    }
}

/// How replay memories are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    Condensed,
    Sampled,
}

/// How memory rows enter the training objective.
///
/// * `Concatenated` (default): one row-weighted mean over current and buffer
///   rows together; for the debiased strategy this is a single adjusted
///   cross-entropy with the global offsets vector, which makes the
///   calibration the exact log-frequency correction for the row imbalance.
/// * `PooledBuffer`: the current term plus a single mean over all buffer
///   rows pooled (the memory loss as one term over the whole buffer).
/// * `PerEntry`: one mean term per buffer entry; for the debiased strategy
///   each memory term carries the uniform buffer magnitude, which cancels
///   inside its softmax, so debiasing acts through the current term only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayObjective {
    Concatenated,
    PooledBuffer,
    PerEntry,
}

/// Driver configuration for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub strategy: Strategy,
    pub tau: f64,
    pub lambda: f64,
    pub budget_per_class: usize,
    /// Propagation depth K of the backbone.
    pub prop_depth: usize,
    pub optimizer: OptimizerConfig,
    pub condense: CondenseConfig,
    /// Override the strategy's memory source (ablation knob).
    pub memory: Option<MemoryKind>,
    pub objective: ReplayObjective,
    /// Master seed for model initialization and memory construction.
    pub run_seed: u64,
    pub init_scheme: crate::model::InitScheme,
}

impl ReplayConfig {
    pub fn new(strategy: Strategy, budget_per_class: usize) -> Self {
        Self {
            strategy,
            tau: 1.0,
            lambda: 1.0,
            budget_per_class,
            prop_depth: 2,
            optimizer: OptimizerConfig::default(),
            condense: CondenseConfig {
                budget_per_class,
                ..Default::default()
            },
            memory: None,
            objective: ReplayObjective::Concatenated,
            run_seed: 0,
            init_scheme: crate::model::InitScheme::FanInNormal,
        }
    }

    pub fn with_run_seed(mut self, seed: u64) -> Self {
        self.run_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Invalid(format!("tau must be > 0, got {}", self.tau)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Invalid(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.budget_per_class == 0 {
            return Err(Error::Invalid("budget_per_class must be >= 1".into()));
        }
        self.optimizer.validate()?;
        let mut ccfg = self.condense.clone();
        ccfg.budget_per_class = self.budget_per_class;
        ccfg.validate()
    }

    pub fn effective_memory(&self) -> MemoryKind {
        self.memory
            .unwrap_or_else(|| self.strategy.default_memory())
    }

    fn sampler(&self) -> InitSampler {
        InitSampler {
            seed: split_seed(self.run_seed, domain::MODEL_INIT),
            scheme: self.init_scheme,
        }
    }
}

/// Propagated training rows of one task. Only the current task's (and, for
/// the joint oracle, every task's) training rows are held in memory.
struct TrainData {
    features: Array2<f64>,
    labels: Vec<usize>,
    class_counts: BTreeMap<usize, usize>,
}

/// Propagated test rows of one task, cached across the whole run for the
/// repeated re-evaluation of past tasks.
struct EvalData {
    features: Array2<f64>,
    labels: Vec<usize>,
    classes: Vec<usize>,
}

fn gather_rows(
    propagated: &Array2<f64>,
    labels: &[usize],
    nodes: &[usize],
) -> (Array2<f64>, Vec<usize>) {
    let mut features = Array2::zeros((nodes.len(), propagated.ncols()));
    let mut out_labels = Vec::with_capacity(nodes.len());
    for (row, &node) in nodes.iter().enumerate() {
        features.row_mut(row).assign(&propagated.row(node));
        out_labels.push(labels[node]);
    }
    (features, out_labels)
}

/// Propagate a task once and split it into train and test views.
fn build_task_data(task: &TaskGraph, prop_depth: usize) -> Result<(TrainData, EvalData)> {
    let s = normalize_adjacency(task.graph());
    let propagated = propagate(&s, task.graph().features(), prop_depth)?;
    let train_nodes = task.train_nodes();
    if train_nodes.is_empty() {
        return Err(Error::Invalid("task has an empty training split".into()));
    }
    let test_nodes = task.test_nodes();
    if test_nodes.is_empty() {
        return Err(Error::Invalid("task has an empty test split".into()));
    }
    let (train_features, train_labels) = gather_rows(&propagated, task.graph().labels(), &train_nodes);
    let (test_features, test_labels) = gather_rows(&propagated, task.graph().labels(), &test_nodes);
    Ok((
        TrainData {
            features: train_features,
            labels: train_labels,
            class_counts: task.train_class_counts(),
        },
        EvalData {
            features: test_features,
            labels: test_labels,
            classes: task.classes().to_vec(),
        },
    ))
}

fn strategy_terms<'a>(
    data: &'a TrainData,
    buffer: &'a MemoryBuffer,
    cfg: &ReplayConfig,
    class_count: usize,
) -> Result<Vec<LossTerm<'a>>> {
    let n_cur = data.features.nrows() as f64;
    let n_buf = buffer.total_rows() as f64;
    match cfg.strategy {
        Strategy::Finetune | Strategy::Joint => {
            Ok(vec![LossTerm::plain(&data.features, &data.labels)])
        }
        Strategy::VanillaReplay | Strategy::SampledMemoryReplay => {
            // Memory-term weights realize the chosen objective over mean-CE
            // building blocks: a weighted sum of per-entry means equals the
            // pooled or concatenated mean exactly.
            let (w_cur, w_mem): (f64, Box<dyn Fn(usize) -> f64>) = match cfg.objective {
                ReplayObjective::PerEntry => (1.0, Box::new(|_| cfg.lambda)),
                ReplayObjective::PooledBuffer => (
                    1.0,
                    Box::new(move |rows| cfg.lambda * rows as f64 / n_buf.max(1.0)),
                ),
                ReplayObjective::Concatenated => {
                    let total = n_cur + cfg.lambda * n_buf;
                    (
                        n_cur / total,
                        Box::new(move |rows| cfg.lambda * rows as f64 / total),
                    )
                }
            };
            let mut terms = vec![LossTerm {
                features: &data.features,
                labels: &data.labels,
                offsets: None,
                weight: w_cur,
            }];
            for memory in buffer.entries() {
                terms.push(LossTerm {
                    features: memory.features(),
                    labels: memory.labels(),
                    offsets: None,
                    weight: w_mem(memory.rows()),
                });
            }
            Ok(terms)
        }
        Strategy::Delome => {
            let offsets = calibration_offsets(buffer, &data.class_counts, cfg.tau)?;
            let global = offsets.padded(class_count);
            let uniform = vec![offsets.buffer_magnitude().unwrap_or(0.0); class_count];
            // Concatenated: one adjusted cross-entropy over all rows with the
            // global offsets (same offsets in every term makes the weighted
            // sum of means exactly the single-batch loss). Pooled/per-entry:
            // the literal two-part objective, memory terms carrying the
            // uniform buffer magnitude.
            let (w_cur, w_mem, mem_offsets): (f64, Box<dyn Fn(usize) -> f64>, Vec<f64>) =
                match cfg.objective {
                    ReplayObjective::PerEntry => (1.0, Box::new(|_| 1.0), uniform),
                    ReplayObjective::PooledBuffer => (
                        1.0,
                        Box::new(move |rows| rows as f64 / n_buf.max(1.0)),
                        uniform,
                    ),
                    ReplayObjective::Concatenated => {
                        let total = n_cur + n_buf;
                        (
                            n_cur / total,
                            Box::new(move |rows| rows as f64 / total),
                            global.clone(),
                        )
                    }
                };
            let mut terms = vec![LossTerm {
                features: &data.features,
                labels: &data.labels,
                offsets: Some(global),
                weight: w_cur,
            }];
            for memory in buffer.entries() {
                terms.push(LossTerm {
                    features: memory.features(),
                    labels: memory.labels(),
                    offsets: Some(mem_offsets.clone()),
                    weight: w_mem(memory.rows()),
                });
            }
            Ok(terms)
        }
    }
}

/// Train the model on one task under the configured strategy. The buffer is
/// read-only; finetune ignores it entirely.
pub fn train_task(
    model: &LinearSgcModel,
    task: &TaskGraph,
    buffer: &MemoryBuffer,
    cfg: &ReplayConfig,
) -> Result<LinearSgcModel> {
    cfg.validate()?;
    let (data, _) = build_task_data(task, model.prop_depth())?;
    let terms = strategy_terms(&data, buffer, cfg, model.class_count())?;
    fit_terms(model, &terms, &cfg.optimizer)
}

/// Accuracy matrices and headline metrics for one evaluation mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub matrix: AccuracyMatrix,
    pub aa: f64,
    pub af: f64,
    pub af_degenerate: bool,
    pub per_task_seconds: Vec<f64>,
}

/// Result of one full pass over a stream, both evaluation modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamOutcome {
    pub cil: ExperimentResult,
    pub til: ExperimentResult,
    pub config: ReplayConfig,
}

/// Run the continual loop: per task, train under the strategy, evaluate all
/// tasks so far in both CIL and TIL modes, then (for replay strategies)
/// condense or sample this task's memory into the buffer.
pub fn run_stream(stream: &TaskStream, cfg: &ReplayConfig) -> Result<StreamOutcome> {
    run_stream_observed(stream, cfg, |_, _, _| Ok(()))
}

/// [`run_stream`] with a per-task observer, called after each task's
/// evaluation row lands. Lets callers persist partial matrices so an
/// interrupted run stays inspectable.
pub fn run_stream_observed(
    stream: &TaskStream,
    cfg: &ReplayConfig,
    mut observer: impl FnMut(usize, &AccuracyMatrix, &AccuracyMatrix) -> Result<()>,
) -> Result<StreamOutcome> {
    cfg.validate()?;
    let sampler = cfg.sampler();
    let feature_dim = stream.feature_dim();

    let mut buffer = MemoryBuffer::new();
    let mut model = LinearSgcModel::zeros(feature_dim, 0, cfg.prop_depth);
    let mut cil = AccuracyMatrix::new();
    let mut til = AccuracyMatrix::new();
    let mut seconds = Vec::with_capacity(stream.num_tasks());
    let mut eval_cache: Vec<EvalData> = Vec::with_capacity(stream.num_tasks());
    // Training rows of past tasks are only retained for the joint oracle.
    let mut joint_train: Vec<TrainData> = Vec::new();

    for (t, task) in stream.tasks().iter().enumerate() {
        let started = Instant::now();
        let (train, eval_data) = build_task_data(task, cfg.prop_depth)?;
        eval_cache.push(eval_data);

        let max_class = task.classes().iter().copied().max().unwrap_or(0);
        let class_count = (max_class + 1).max(model.class_count());

        if cfg.strategy == Strategy::Joint {
            // Fresh model over all classes seen, trained on the union of
            // training rows of tasks 0..=t.
            joint_train.push(train);
            let mut joint = sampler.sample(
                feature_dim,
                class_count,
                cfg.prop_depth,
                domain::JOINT.wrapping_mul(1 + t as u64),
            );
            let rows: usize = joint_train.iter().map(|d| d.features.nrows()).sum();
            let mut features = Array2::zeros((rows, feature_dim));
            let mut labels = Vec::with_capacity(rows);
            let mut row = 0;
            for data in &joint_train {
                for (r, &y) in data.features.rows().into_iter().zip(&data.labels) {
                    features.row_mut(row).assign(&r);
                    labels.push(y);
                    row += 1;
                }
            }
            let term = LossTerm::plain(&features, &labels);
            joint = fit_terms(&joint, &[term], &cfg.optimizer)?;
            model = joint;
        } else {
            if model.class_count() == 0 {
                model = sampler.sample(feature_dim, class_count, cfg.prop_depth, 0);
            } else {
                model.widen(class_count, &sampler, domain::WIDEN.wrapping_add(t as u64));
            }
            let terms = strategy_terms(&train, &buffer, cfg, model.class_count())?;
            model = fit_terms(&model, &terms, &cfg.optimizer)?;
        }

        // Evaluate every task seen so far against the frozen model.
        let frozen = &model;
        let accs: Vec<Result<(f64, f64)>> = exec::map_indexed(t + 1, |j| {
            let data = &eval_cache[j];
            let logits = crate::model::forward(frozen, &data.features)?;
            let c = accuracy_of(&logits, &data.labels, None)?;
            let l = accuracy_of(&logits, &data.labels, Some(&data.classes))?;
            Ok((c, l))
        });
        let mut cil_row = Vec::with_capacity(t + 1);
        let mut til_row = Vec::with_capacity(t + 1);
        for acc in accs {
            let (c, l) = acc?;
            cil_row.push(c);
            til_row.push(l);
        }
        cil.push_row(cil_row)?;
        til.push_row(til_row)?;
        observer(t, &cil, &til)?;

        if cfg.strategy.uses_memory() {
            let memory = match cfg.effective_memory() {
                MemoryKind::Condensed => {
                    let mut ccfg = cfg.condense.clone();
                    ccfg.budget_per_class = cfg.budget_per_class;
                    ccfg.init_seed =
                        split_seed(split_seed(cfg.run_seed, domain::CONDENSE), t as u64);
                    condense(task, &ccfg)?
                }
                MemoryKind::Sampled => init_memory(
                    task,
                    cfg.budget_per_class,
                    split_seed(split_seed(cfg.run_seed, domain::SAMPLED_MEMORY), t as u64),
                )?,
            };
            buffer = buffer_extend(&buffer, with_task_id(memory, t))?;
        }
        seconds.push(started.elapsed().as_secs_f64());
    }

    let result = |matrix: AccuracyMatrix| -> Result<ExperimentResult> {
        let aa = average_accuracy(&matrix)?;
        let (af, af_degenerate) = average_forgetting(&matrix)?;
        Ok(ExperimentResult {
            matrix,
            aa,
            af,
            af_degenerate,
            per_task_seconds: seconds.clone(),
        })
    };
    Ok(StreamOutcome {
        cil: result(cil)?,
        til: result(til)?,
        config: cfg.clone(),
    })
}

/// Mean / sample-standard-deviation pair over per-seed values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatBlock {
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl StatBlock {
    pub fn from_values(values: Vec<f64>) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            per_seed: values,
            mean,
            std,
        }
    }
}

/// Aggregated metrics across seeds, the schema of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub seeds: Vec<u64>,
    pub aa_cil: StatBlock,
    pub af_cil: StatBlock,
    pub aa_til: StatBlock,
    pub af_til: StatBlock,
    pub af_degenerate: bool,
}

pub fn aggregate_metrics(seeds: &[u64], outcomes: &[StreamOutcome]) -> MetricsSummary {
    MetricsSummary {
        seeds: seeds.to_vec(),
        aa_cil: StatBlock::from_values(outcomes.iter().map(|o| o.cil.aa).collect()),
        af_cil: StatBlock::from_values(outcomes.iter().map(|o| o.cil.af).collect()),
        aa_til: StatBlock::from_values(outcomes.iter().map(|o| o.til.aa).collect()),
        af_til: StatBlock::from_values(outcomes.iter().map(|o| o.til.af).collect()),
        af_degenerate: outcomes.iter().any(|o| o.cil.af_degenerate),
    }
}

/// Run the same configuration across seeds (in parallel when enabled),
/// ordered by seed.
pub fn run_seeds(
    stream: &TaskStream,
    cfg: &ReplayConfig,
    seeds: &[u64],
) -> Result<Vec<StreamOutcome>> {
    let outcomes: Vec<Result<StreamOutcome>> = exec::map_slice(seeds, |&seed| {
        let run_cfg = cfg.clone().with_run_seed(seed);
        run_stream(stream, &run_cfg)
    });
    outcomes.into_iter().collect()
}
