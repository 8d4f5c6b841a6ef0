//! Flat experiment config file (TOML) with explicit keys for every
//! hyperparameter, defaulting to the standard settings: 200 training epochs
//! at lr 0.005, 800 condensation epochs at lr 1e-4 with Adam, tau 1, K 2,
//! fanout 5.

use serde::{Deserialize, Serialize};

use delome_core::{
    CondenseConfig, DistanceKind, MemoryKind, OptimizerConfig, OptimizerKind, ReplayConfig,
    ReplayObjective, Strategy,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    /// Stream directory produced by `delome split`.
    pub stream: String,
    /// Output directory for matrices, metrics, and the manifest.
    pub output: String,
    #[serde(default = "d_strategy")]
    pub strategy: Strategy,
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_budget")]
    pub budget_per_class: usize,
    #[serde(default = "d_prop_depth")]
    pub prop_depth: usize,
    #[serde(default = "d_train_epochs")]
    pub train_epochs: usize,
    #[serde(default = "d_train_lr")]
    pub train_lr: f64,
    #[serde(default = "d_adam")]
    pub train_optimizer: OptimizerKind,
    #[serde(default)]
    pub weight_decay: f64,
    #[serde(default = "d_condense_epochs")]
    pub condense_epochs: usize,
    #[serde(default = "d_condense_lr")]
    pub condense_lr: f64,
    #[serde(default = "d_adam")]
    pub condense_optimizer: OptimizerKind,
    #[serde(default = "d_batch")]
    pub batch_size_per_class: usize,
    #[serde(default = "d_fanout")]
    pub fanout: usize,
    #[serde(default = "d_hops")]
    pub hops: usize,
    #[serde(default = "d_objective")]
    pub objective: ReplayObjective,
    /// Optional memory-source override (`condensed` or `sampled`).
    #[serde(default)]
    pub memory: Option<MemoryKind>,
}

fn d_strategy() -> Strategy {
    Strategy::Delome
}
fn d_seeds() -> Vec<u64> {
    vec![0, 1, 2, 3, 4]
}
fn d_tau() -> f64 {
    1.0
}
fn d_lambda() -> f64 {
    1.0
}
fn d_budget() -> usize {
    4
}
fn d_prop_depth() -> usize {
    2
}
fn d_train_epochs() -> usize {
    200
}
fn d_train_lr() -> f64 {
    0.005
}
fn d_condense_epochs() -> usize {
    800
}
fn d_condense_lr() -> f64 {
    1e-4
}
fn d_adam() -> OptimizerKind {
    OptimizerKind::Adam
}
fn d_batch() -> usize {
    64
}
fn d_fanout() -> usize {
    5
}
fn d_hops() -> usize {
    2
}
fn d_objective() -> ReplayObjective {
    ReplayObjective::Concatenated
}

impl RunFile {
    pub fn to_replay_config(&self) -> ReplayConfig {
        ReplayConfig {
            strategy: self.strategy,
            tau: self.tau,
            lambda: self.lambda,
            budget_per_class: self.budget_per_class,
            prop_depth: self.prop_depth,
            optimizer: OptimizerConfig {
                kind: self.train_optimizer,
                learning_rate: self.train_lr,
                epochs: self.train_epochs,
                weight_decay: self.weight_decay,
                ..OptimizerConfig::default()
            },
            condense: CondenseConfig {
                budget_per_class: self.budget_per_class,
                epochs: self.condense_epochs,
                learning_rate: self.condense_lr,
                init_seed: 0,
                batch_size_per_class: self.batch_size_per_class,
                fanout: self.fanout,
                hops: self.hops,
                distance: DistanceKind::MeanSquare,
                optimizer: self.condense_optimizer,
            },
            memory: self.memory,
            objective: self.objective,
            run_seed: 0,
            init_scheme: delome_core::InitScheme::FanInNormal,
        }
    }
}
