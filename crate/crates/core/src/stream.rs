//! Class-incremental task streams: class grouping, per-class splits, and
//! per-task subgraph extraction.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::seeds::{domain, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One task's subgraph: nodes of the task classes only, with the source
/// graph's edges restricted to that node set, plus per-node split masks.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraph {
    graph: SparseGraph,
    classes: Vec<usize>,
    masks: Vec<Split>,
}

impl TaskGraph {
    pub fn new(graph: SparseGraph, classes: Vec<usize>, masks: Vec<Split>) -> Result<Self> {
        if masks.len() != graph.num_nodes() {
            return Err(Error::Shape(format!(
                "{} masks for {} nodes",
                masks.len(),
                graph.num_nodes()
            )));
        }
        let mut classes = classes;
        classes.sort_unstable();
        classes.dedup();
        for (i, &label) in graph.labels().iter().enumerate() {
            if !classes.contains(&label) {
                return Err(Error::Invalid(format!(
                    "node {i} has label {label} outside task classes {classes:?}"
                )));
            }
        }
        Ok(Self {
            graph,
            classes,
            masks,
        })
    }

    pub fn graph(&self) -> &SparseGraph {
        &self.graph
    }

    /// Global class ids of this task, ascending.
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn masks(&self) -> &[Split] {
        &self.masks
    }

    pub fn nodes_in_split(&self, split: Split) -> Vec<usize> {
        self.masks
            .iter()
            .enumerate()
            .filter_map(|(i, &s)| (s == split).then_some(i))
            .collect()
    }

    pub fn train_nodes(&self) -> Vec<usize> {
        self.nodes_in_split(Split::Train)
    }

    pub fn test_nodes(&self) -> Vec<usize> {
        self.nodes_in_split(Split::Test)
    }

    /// Training nodes per class, ascending class order.
    pub fn train_nodes_by_class(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut by_class: BTreeMap<usize, Vec<usize>> =
            self.classes.iter().map(|&c| (c, Vec::new())).collect();
        for (i, (&label, &mask)) in self.graph.labels().iter().zip(&self.masks).enumerate() {
            if mask == Split::Train {
                by_class
                    .get_mut(&label)
                    .expect("label within classes")
                    .push(i);
            }
        }
        by_class
    }

    /// Number of training nodes per class (the |Y_t^c| of the calibration).
    pub fn train_class_counts(&self) -> BTreeMap<usize, usize> {
        self.train_nodes_by_class()
            .into_iter()
            .map(|(c, v)| (c, v.len()))
            .collect()
    }
}

/// Ordered sequence of class-disjoint tasks over a shared global class space.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskStream {
    tasks: Vec<TaskGraph>,
    classes_per_task: usize,
    num_classes: usize,
    seed: u64,
    dropped_classes: Vec<usize>,
}

impl TaskStream {
    pub fn from_parts(
        tasks: Vec<TaskGraph>,
        classes_per_task: usize,
        num_classes: usize,
        seed: u64,
        dropped_classes: Vec<usize>,
    ) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::Invalid(
                "stream must contain at least one task".into(),
            ));
        }
        let mut seen = Vec::new();
        for task in &tasks {
            for &c in task.classes() {
                if seen.contains(&c) {
                    return Err(Error::Invalid(format!("class {c} appears in two tasks")));
                }
                seen.push(c);
            }
        }
        Ok(Self {
            tasks,
            classes_per_task,
            num_classes,
            seed,
            dropped_classes,
        })
    }

    pub fn tasks(&self) -> &[TaskGraph] {
        &self.tasks
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn classes_per_task(&self) -> usize {
        self.classes_per_task
    }

    /// Size of the global class space (max label + 1 in the source graph).
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dropped_classes(&self) -> &[usize] {
        &self.dropped_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.tasks[0].graph().feature_dim()
    }
}

/// Per-class 0.6/0.2/0.2 split: floor for val and test, remainder to train,
/// so tiny classes keep at least one training node.
fn split_sizes(n: usize) -> (usize, usize, usize) {
    let val = n / 5;
    let test = n / 5;
    (n - val - test, val, test)
}

/// Group classes (ascending id) into tasks of `classes_per_task`, drop the
/// trailing remainder, extract per-task induced subgraphs, and draw per-class
/// train/val/test splits. Inter-task edges are discarded.
pub fn build_stream(graph: &SparseGraph, classes_per_task: usize, seed: u64) -> Result<TaskStream> {
    if classes_per_task == 0 {
        return Err(Error::Invalid("classes_per_task must be >= 1".into()));
    }
    let class_ids = graph.class_ids();
    if class_ids.len() < classes_per_task {
        return Err(Error::Invalid(format!(
            "graph has {} classes, need at least {classes_per_task} for one task",
            class_ids.len()
        )));
    }
    let num_tasks = class_ids.len() / classes_per_task;
    let dropped: Vec<usize> = class_ids[num_tasks * classes_per_task..].to_vec();

    let mut nodes_by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &label) in graph.labels().iter().enumerate() {
        nodes_by_class.entry(label).or_default().push(i);
    }

    let mut tasks = Vec::with_capacity(num_tasks);
    for t in 0..num_tasks {
        let classes: Vec<usize> =
            class_ids[t * classes_per_task..(t + 1) * classes_per_task].to_vec();
        let mut task_nodes = Vec::new();
        for &c in &classes {
            task_nodes.extend_from_slice(&nodes_by_class[&c]);
        }
        task_nodes.sort_unstable();
        let subgraph = graph.induced(&task_nodes)?;

        // Per-class splits, deterministic per (seed, class).
        let mut masks = vec![Split::Train; subgraph.num_nodes()];
        for &c in &classes {
            let mut members: Vec<usize> = subgraph
                .labels()
                .iter()
                .enumerate()
                .filter_map(|(i, &l)| (l == c).then_some(i))
                .collect();
            let mut rng = stream_rng(seed, domain::SPLIT, c as u64);
            members.shuffle(&mut rng);
            let (n_train, n_val, _n_test) = split_sizes(members.len());
            for (k, &node) in members.iter().enumerate() {
                masks[node] = if k < n_train {
                    Split::Train
                } else if k < n_train + n_val {
                    Split::Val
                } else {
                    Split::Test
                };
            }
        }
        tasks.push(TaskGraph::new(subgraph, classes, masks)?);
    }

    let num_classes = class_ids.last().map_or(0, |&c| c + 1);
    TaskStream::from_parts(tasks, classes_per_task, num_classes, seed, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm, SbmParams};

    fn fixture(blocks: Vec<usize>, seed: u64) -> SparseGraph {
        generate_sbm(&SbmParams {
            block_sizes: blocks,
            intra_prob: 0.3,
            inter_prob: 0.05,
            feature_dim: 4,
            feature_center_scale: 1.5,
            seed,
        })
        .unwrap()
    }

    #[test]
    fn four_classes_two_per_task() {
        let g = fixture(vec![10, 10, 10, 10], 1);
        let stream = build_stream(&g, 2, 7).unwrap();
        assert_eq!(stream.num_tasks(), 2);
        assert_eq!(stream.tasks()[0].classes(), &[0, 1]);
        assert_eq!(stream.tasks()[1].classes(), &[2, 3]);
        assert!(stream.dropped_classes().is_empty());
    }

    #[test]
    fn trailing_class_dropped_and_recorded() {
        let g = fixture(vec![8, 8, 8, 8, 8], 2);
        let stream = build_stream(&g, 2, 7).unwrap();
        assert_eq!(stream.num_tasks(), 2);
        assert_eq!(stream.dropped_classes(), &[4]);
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        assert_eq!(split_sizes(10), (6, 2, 2));
        assert_eq!(split_sizes(11), (7, 2, 2));
        assert_eq!(split_sizes(4), (4, 0, 0));
        assert_eq!(split_sizes(7), (5, 1, 1));
    }

    #[test]
    fn class_of_ten_splits_six_two_two() {
        let g = fixture(vec![10, 10], 3);
        let stream = build_stream(&g, 2, 5).unwrap();
        let task = &stream.tasks()[0];
        for c in [0usize, 1] {
            let members: Vec<usize> = task
                .graph()
                .labels()
                .iter()
                .enumerate()
                .filter_map(|(i, &l)| (l == c).then_some(i))
                .collect();
            let count = |s: Split| members.iter().filter(|&&i| task.masks()[i] == s).count();
            assert_eq!(count(Split::Train), 6);
            assert_eq!(count(Split::Val), 2);
            assert_eq!(count(Split::Test), 2);
        }
    }

    #[test]
    fn tasks_have_disjoint_classes_and_partitioned_masks() {
        let g = fixture(vec![12, 9, 14, 11], 4);
        let stream = build_stream(&g, 2, 9).unwrap();
        let mut seen = Vec::new();
        for task in stream.tasks() {
            for &c in task.classes() {
                assert!(!seen.contains(&c));
                seen.push(c);
            }
            // Vec<Split> structurally partitions; check totals match node count.
            assert_eq!(task.masks().len(), task.graph().num_nodes());
        }
    }

    #[test]
    fn inter_task_edges_are_dropped() {
        let g = fixture(vec![15, 15, 15, 15], 5);
        let stream = build_stream(&g, 2, 3).unwrap();
        for task in stream.tasks() {
            for &(u, v) in task.graph().edges() {
                assert!(task.classes().contains(&task.graph().labels()[u]));
                assert!(task.classes().contains(&task.graph().labels()[v]));
            }
        }
        let total_task_edges: usize = stream.tasks().iter().map(|t| t.graph().num_edges()).sum();
        assert!(
            total_task_edges < g.num_edges(),
            "cross-task edges must disappear"
        );
    }

    #[test]
    fn build_is_deterministic() {
        let g = fixture(vec![10, 10, 10], 6);
        let a = build_stream(&g, 1, 11).unwrap();
        let b = build_stream(&g, 1, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_classes_rejected() {
        let g = fixture(vec![10], 6);
        assert!(matches!(build_stream(&g, 2, 0), Err(Error::Invalid(_))));
    }

    #[test]
    fn train_class_counts_count_training_nodes_only() {
        let g = fixture(vec![10, 10], 8);
        let stream = build_stream(&g, 2, 1).unwrap();
        let counts = stream.tasks()[0].train_class_counts();
        assert_eq!(counts[&0], 6);
        assert_eq!(counts[&1], 6);
    }
}
