//! Per-task accuracy, accuracy-matrix bookkeeping, and the AA/AF metrics.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::condense::SyntheticMemory;
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, propagate};
use crate::model::{fit, forward, predict, InitSampler, LinearSgcModel, OptimizerConfig};
use crate::stream::TaskGraph;

/// Lower-triangular matrix of per-task accuracies: row `t` holds the
/// accuracy on tasks `0..=t` after training on task `t`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = Self::new();
        for row in rows {
            m.push_row(row)?;
        }
        Ok(m)
    }

    /// Append the row produced after training task `rows()`; must hold one
    /// accuracy per task so far, each in [0, 1].
    pub fn push_row(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.rows.len() + 1 {
            return Err(Error::Shape(format!(
                "row {} must have {} entries, got {}",
                self.rows.len(),
                self.rows.len() + 1,
                row.len()
            )));
        }
        if let Some(&bad) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Invalid(format!("accuracy {bad} outside [0,1]")));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn num_tasks(&self) -> usize {
        self.rows.len()
    }

    /// Entry (t, j) for t >= j; `None` above the diagonal or out of range.
    pub fn entry(&self, t: usize, j: usize) -> Option<f64> {
        self.rows.get(t).and_then(|row| row.get(j)).copied()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    fn last_row(&self) -> Result<&[f64]> {
        let t = self.rows.len();
        match self.rows.last() {
            Some(row) if row.len() == t => Ok(row),
            _ => Err(Error::Invalid("matrix final row incomplete".into())),
        }
    }
}

/// Whether the task id is available at test time (TIL restricts the label
/// space to the task's classes; CIL predicts over every learned class).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Cil,
    Til,
}

/// Fraction of test-split nodes predicted correctly, with propagation depth
/// taken from the model.
pub fn task_accuracy(model: &LinearSgcModel, task: &TaskGraph, mode: EvalMode) -> Result<f64> {
    let s = normalize_adjacency(task.graph());
    let x = propagate(&s, task.graph().features(), model.prop_depth())?;
    accuracy_on_rows(model, &x, task, mode)
}

/// Accuracy given already-propagated features for the whole task graph.
pub fn accuracy_on_rows(
    model: &LinearSgcModel,
    propagated: &Array2<f64>,
    task: &TaskGraph,
    mode: EvalMode,
) -> Result<f64> {
    let test = task.test_nodes();
    if test.is_empty() {
        return Err(Error::Invalid("task has an empty test split".into()));
    }
    let mut x = Array2::zeros((test.len(), propagated.ncols()));
    for (row, &node) in test.iter().enumerate() {
        x.row_mut(row).assign(&propagated.row(node));
    }
    let logits = forward(model, &x)?;
    let mask = match mode {
        EvalMode::Cil => None,
        EvalMode::Til => Some(task.classes()),
    };
    let pred = predict(&logits, mask)?;
    let mut correct = 0usize;
    for (p, &node) in pred.iter().zip(test.iter()) {
        if *p == task.graph().labels()[node] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// AA: mean of the final row.
pub fn average_accuracy(m: &AccuracyMatrix) -> Result<f64> {
    let row = m.last_row()?;
    Ok(row.iter().sum::<f64>() / row.len() as f64)
}

/// AF: mean of `M[T-1][j] - M[j][j]` over j < T-1. Negative means
/// forgetting; positive means backward transfer. A single-task matrix has no
/// forgetting to measure and reports 0 with the degenerate flag set.
pub fn average_forgetting(m: &AccuracyMatrix) -> Result<(f64, bool)> {
    let t = m.num_tasks();
    if t == 0 {
        return Err(Error::Invalid("empty accuracy matrix".into()));
    }
    let last = m.last_row()?;
    if t == 1 {
        return Ok((0.0, true));
    }
    let mut sum = 0.0;
    for j in 0..t - 1 {
        let diag = m
            .entry(j, j)
            .ok_or_else(|| Error::Invalid(format!("missing diagonal entry ({j},{j})")))?;
        sum += last[j] - diag;
    }
    Ok((sum / (t - 1) as f64, false))
}

/// Memory expressiveness oracle: train a fresh classifier on the memory rows
/// alone (identity structure, task-local class space) and report its test
/// accuracy on the original task graph.
pub fn train_on_memory_accuracy(
    memory: &SyntheticMemory,
    task: &TaskGraph,
    prop_depth: usize,
    opt: &OptimizerConfig,
    sampler: &InitSampler,
) -> Result<f64> {
    let classes = task.classes();
    let to_local = |global: usize| -> Result<usize> {
        classes
            .binary_search(&global)
            .map_err(|_| Error::Invalid(format!("memory class {global} not in task")))
    };
    let labels: Vec<usize> = memory
        .labels()
        .iter()
        .map(|&c| to_local(c))
        .collect::<Result<_>>()?;
    let model = sampler.sample(task.graph().feature_dim(), classes.len(), prop_depth, 0);
    let trained = fit(&model, memory.features(), &labels, None, opt)?;

    let s = normalize_adjacency(task.graph());
    let x = propagate(&s, task.graph().features(), prop_depth)?;
    let test = task.test_nodes();
    if test.is_empty() {
        return Err(Error::Invalid("task has an empty test split".into()));
    }
    let mut rows = Array2::zeros((test.len(), x.ncols()));
    for (row, &node) in test.iter().enumerate() {
        rows.row_mut(row).assign(&x.row(node));
    }
    let pred = predict(&forward(&trained, &rows)?, None)?;
    let mut correct = 0usize;
    for (p, &node) in pred.iter().zip(test.iter()) {
        if classes[*p] == task.graph().labels()[node] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}
