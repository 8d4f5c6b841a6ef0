//! Memory learning by per-class one-step gradient matching.
//!
//! A task's graph is compressed into a few synthetic feature rows per class
//! whose model gradient matches the gradient of the real graph across many
//! random model initializations. The synthetic rows carry identity structure
//! (no edges), so the model sees them without propagation and the gradient of
//! the matching distance w.r.t. the rows has a closed form.

use std::collections::BTreeMap;
use std::ops::Range;

use ndarray::{Array2, Axis};
use rand::seq::index::sample as index_sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{normalize_adjacency, propagate, NeighborSampler};
use crate::model::{
    grad_theta, softmax_residual, Gradient, InitSampler, LinearSgcModel, OptimizerKind,
};
use crate::seeds::{domain, split_seed, stream_rng};
use crate::stream::TaskGraph;

/// Learned memory for one task: synthetic feature rows with fixed labels and
/// implicit identity structure. Rows are grouped by class, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMemory {
    task_id: usize,
    features: Array2<f64>,
    labels: Vec<usize>,
    classes: Vec<usize>,
    counts: Vec<usize>,
}

impl SyntheticMemory {
    pub fn from_parts(task_id: usize, features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(Error::Shape(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.nrows()
            )));
        }
        let mut classes = Vec::new();
        let mut counts = Vec::new();
        for &label in &labels {
            match classes.last() {
                Some(&last) if last == label => *counts.last_mut().unwrap() += 1,
                Some(&last) if last > label => {
                    return Err(Error::Invalid(
                        "memory rows must be grouped by ascending class".into(),
                    ))
                }
                _ => {
                    classes.push(label);
                    counts.push(1);
                }
            }
        }
        Ok(Self {
            task_id,
            features,
            labels,
            classes,
            counts,
        })
    }

    pub fn task_id(&self) -> usize {
        self.task_id
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    /// Global class ids, parallel to feature rows.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Distinct classes, ascending.
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn per_class_budget(&self) -> BTreeMap<usize, usize> {
        self.classes
            .iter()
            .copied()
            .zip(self.counts.iter().copied())
            .collect()
    }

    /// Row range of the `ci`-th class block.
    pub fn class_rows(&self, ci: usize) -> Range<usize> {
        let start: usize = self.counts[..ci].iter().sum();
        start..start + self.counts[ci]
    }
}

/// One step-per-class condensation settings.
///
/// `hops` controls both the sampled neighborhood depth and the propagation
/// depth of the gradient-matching model, which share the backbone's K.
/// A zero learning rate is allowed and leaves the initialization untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondenseConfig {
    pub budget_per_class: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub init_seed: u64,
    pub batch_size_per_class: usize,
    pub fanout: usize,
    pub hops: usize,
    pub distance: DistanceKind,
    pub optimizer: OptimizerKind,
}

impl Default for CondenseConfig {
    fn default() -> Self {
        Self {
            budget_per_class: 1,
            epochs: 800,
            learning_rate: 1e-4,
            init_seed: 0,
            batch_size_per_class: 64,
            fanout: 5,
            hops: 2,
            distance: DistanceKind::MeanSquare,
            optimizer: OptimizerKind::Sgd,
        }
    }
}

impl CondenseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget_per_class == 0 {
            return Err(Error::Invalid("budget_per_class must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::Invalid(format!(
                "learning_rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size_per_class == 0 {
            return Err(Error::Invalid("batch_size_per_class must be >= 1".into()));
        }
        if self.fanout == 0 || self.hops == 0 {
            return Err(Error::Invalid("fanout and hops must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    MeanSquare,
}

/// Initialize memory from real data: for each class, the features of
/// `min(budget, class size)` distinct uniformly chosen training nodes.
pub fn init_memory(
    task: &TaskGraph,
    budget_per_class: usize,
    seed: u64,
) -> Result<SyntheticMemory> {
    if budget_per_class == 0 {
        return Err(Error::Invalid("budget_per_class must be >= 1".into()));
    }
    let by_class = task.train_nodes_by_class();
    let f = task.graph().feature_dim();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (ci, (&class, pool)) in by_class.iter().enumerate() {
        if pool.is_empty() {
            return Err(Error::ClassEmpty { class });
        }
        let take = budget_per_class.min(pool.len());
        let mut rng = stream_rng(seed, domain::MEMORY_INIT, ci as u64);
        let mut picked: Vec<usize> = index_sample(&mut rng, pool.len(), take)
            .into_iter()
            .map(|k| pool[k])
            .collect();
        picked.sort_unstable();
        for node in picked {
            rows.push(task.graph().features().row(node).to_owned());
            labels.push(class);
        }
    }
    let mut features = Array2::zeros((rows.len(), f));
    for (i, row) in rows.into_iter().enumerate() {
        features.row_mut(i).assign(&row);
    }
    // Task ids are assigned by the stream driver via `with_task_id`.
    SyntheticMemory::from_parts(0, features, labels)
}

/// Mean square distance between two parameter gradients, per block:
/// `mean((Wa-Wb)^2) + mean((ba-bb)^2)`. Per-block means keep the bias from
/// being swamped by the much larger weight block.
pub fn matching_distance(grad_real: &Gradient, grad_synth: &Gradient) -> Result<f64> {
    if grad_real.weight.raw_dim() != grad_synth.weight.raw_dim()
        || grad_real.bias.raw_dim() != grad_synth.bias.raw_dim()
    {
        return Err(Error::Shape("gradient blocks differ in shape".into()));
    }
    let dw = (&grad_real.weight - &grad_synth.weight)
        .mapv(|v| v * v)
        .mean()
        .unwrap_or(0.0);
    let db = (&grad_real.bias - &grad_synth.bias)
        .mapv(|v| v * v)
        .mean()
        .unwrap_or(0.0);
    Ok(dw + db)
}

/// Closed-form gradient of the matching distance w.r.t. the synthetic
/// feature rows, holding the model and the real-side gradient fixed.
///
/// With `Z` the synthetic rows, `P = softmax(Z W + b)`, `R = (P - Y)/n`:
/// the synthetic gradient blocks are `Gw = Z^T R`, `gb = colsum(R)`, and
/// differentiating the per-block mean square distance gives
///
/// ```text
/// Dw = 2/(F·C) (Gw - Gw_real)      db = 2/C (gb - gb_real)
/// U  = Z Dw + 1 db^T               V_i = P_i ∘ U_i - (P_i · U_i) P_i
/// dD/dZ = R Dw^T + (1/n) V W^T
/// ```
pub fn grad_matching_wrt_features(
    model: &LinearSgcModel,
    real_batch: (&Array2<f64>, &[usize]),
    synth_class_rows: (&Array2<f64>, &[usize]),
) -> Result<Array2<f64>> {
    let grad_real = grad_theta(model, real_batch.0, real_batch.1, None)?;
    let (grad, _dist) =
        matching_gradient(model, &grad_real, synth_class_rows.0, synth_class_rows.1)?;
    Ok(grad)
}

pub(crate) fn matching_gradient(
    model: &LinearSgcModel,
    grad_real: &Gradient,
    synth_features: &Array2<f64>,
    synth_labels: &[usize],
) -> Result<(Array2<f64>, f64)> {
    let n = synth_features.nrows();
    if n == 0 {
        return Err(Error::Invalid("no synthetic rows".into()));
    }
    let f = model.feature_dim();
    let c = model.class_count();
    let h = crate::model::forward_raw(model, synth_features)?;
    let residual = softmax_residual(&h, synth_labels, None)?; // (P - Y)/n
    let p = {
        let mut p = residual.clone() * n as f64;
        for (mut row, &y) in p.rows_mut().into_iter().zip(synth_labels) {
            row[y] += 1.0;
        }
        p
    };
    let grad_synth = Gradient {
        weight: synth_features.t().dot(&residual),
        bias: residual.sum_axis(Axis(0)),
    };
    let dist = matching_distance(grad_real, &grad_synth)?;

    let dw = (&grad_synth.weight - &grad_real.weight) * (2.0 / (f * c) as f64);
    let db = (&grad_synth.bias - &grad_real.bias) * (2.0 / c as f64);
    let mut u = synth_features.dot(&dw);
    u += &db;
    let pu = &p * &u;
    let row_dot = pu.sum_axis(Axis(1));
    let mut v = pu;
    for ((mut row, &d), p_row) in v.rows_mut().into_iter().zip(row_dot.iter()).zip(p.rows()) {
        row.scaled_add(-d, &p_row);
    }
    let grad = residual.dot(&dw.t()) + v.dot(&model.weight().t()) / n as f64;
    Ok((grad, dist))
}

/// Per-epoch mean matching distance across classes, for trend checks and
/// reporting.
#[derive(Debug, Clone)]
pub struct CondenseTrace {
    pub epoch_mean_distance: Vec<f64>,
}

struct FeatureAdam {
    m: Array2<f64>,
    v: Array2<f64>,
    step: usize,
}

/// Learn a synthetic memory for one task (labels stay fixed; only the
/// feature rows move). Each epoch draws a fresh random model, then every
/// class takes one gradient step against the matching distance between the
/// gradients of a sampled, propagated real batch and its synthetic rows.
/// Class updates within an epoch are independent and run in parallel.
pub fn condense(task: &TaskGraph, cfg: &CondenseConfig) -> Result<SyntheticMemory> {
    condense_traced(task, cfg).map(|(memory, _)| memory)
}

pub fn condense_traced(
    task: &TaskGraph,
    cfg: &CondenseConfig,
) -> Result<(SyntheticMemory, CondenseTrace)> {
    cfg.validate()?;
    let mut memory = init_memory(task, cfg.budget_per_class, cfg.init_seed)?;
    let classes = memory.classes().to_vec();
    let num_classes = classes.len();
    let feature_dim = task.graph().feature_dim();

    let by_class = task.train_nodes_by_class();
    let pools: Vec<&Vec<usize>> = classes.iter().map(|c| &by_class[c]).collect();

    let sampler = InitSampler::new(split_seed(cfg.init_seed, domain::CONDENSE));
    let neighbors = NeighborSampler::new(task.graph());

    let mut adam: Vec<Option<FeatureAdam>> = (0..num_classes).map(|_| None).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let theta = sampler.sample(feature_dim, num_classes, cfg.hops, epoch as u64);
        let snapshot = &memory;
        let per_class: Vec<Result<(Array2<f64>, f64)>> = exec::map_indexed(num_classes, |ci| {
            let mut rng = stream_rng(
                cfg.init_seed,
                domain::CONDENSE_BATCH,
                (epoch as u64) * num_classes as u64 + ci as u64,
            );
            let pool = pools[ci];
            let take = cfg.batch_size_per_class.min(pool.len());
            let seeds: Vec<usize> = index_sample(&mut rng, pool.len(), take)
                .into_iter()
                .map(|k| pool[k])
                .collect();
            let sub = neighbors.sample(&seeds, cfg.fanout, cfg.hops, &mut rng)?;
            let s = normalize_adjacency(&sub.graph);
            let x_prop = propagate(&s, sub.graph.features(), cfg.hops)?;
            let mut x_seed = Array2::zeros((sub.seed_positions.len(), feature_dim));
            for (row, &pos) in sub.seed_positions.iter().enumerate() {
                x_seed.row_mut(row).assign(&x_prop.row(pos));
            }
            let labels_real = vec![ci; x_seed.nrows()];
            let grad_real = grad_theta(&theta, &x_seed, &labels_real, None)?;

            let range = snapshot.class_rows(ci);
            let z = snapshot.features().slice(ndarray::s![range, ..]).to_owned();
            let labels_synth = vec![ci; z.nrows()];
            let (grad, dist) = matching_gradient(&theta, &grad_real, &z, &labels_synth)?;
            if !grad.iter().all(|v| v.is_finite()) || !dist.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    context: format!("class {}", classes[ci]),
                });
            }
            Ok((grad, dist))
        });

        let mut dist_sum = 0.0;
        for (ci, outcome) in per_class.into_iter().enumerate() {
            let (grad, dist) = outcome?;
            dist_sum += dist;
            let range = memory.class_rows(ci);
            let mut rows = memory.features.slice_mut(ndarray::s![range, ..]);
            match cfg.optimizer {
                OptimizerKind::Sgd => rows.scaled_add(-cfg.learning_rate, &grad),
                OptimizerKind::Adam => {
                    let state = adam[ci].get_or_insert_with(|| FeatureAdam {
                        m: Array2::zeros(grad.raw_dim()),
                        v: Array2::zeros(grad.raw_dim()),
                        step: 0,
                    });
                    state.step += 1;
                    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8f64);
                    let bc1 = 1.0 - b1.powi(state.step as i32);
                    let bc2 = 1.0 - b2.powi(state.step as i32);
                    ndarray::Zip::from(&mut rows)
                        .and(&mut state.m)
                        .and(&mut state.v)
                        .and(&grad)
                        .for_each(|z, m, v, &g| {
                            *m = b1 * *m + (1.0 - b1) * g;
                            *v = b2 * *v + (1.0 - b2) * g * g;
                            *z -= cfg.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + eps);
                        });
                }
            }
        }
        trace.push(dist_sum / num_classes as f64);
    }

    Ok((
        memory,
        CondenseTrace {
            epoch_mean_distance: trace,
        },
    ))
}

/// Equal-budget sampling-based memory (the replay baseline): raw features of
/// uniformly chosen training nodes, no learning.
pub fn sampled_memory(
    task: &TaskGraph,
    budget_per_class: usize,
    seed: u64,
) -> Result<SyntheticMemory> {
    init_memory(task, budget_per_class, seed)
}

/// Re-tag a memory with the stream position of its source task.
pub fn with_task_id(memory: SyntheticMemory, task_id: usize) -> SyntheticMemory {
    SyntheticMemory { task_id, ..memory }
}
