//! Linear classifier over propagated features: forward logits, plain and
//! calibrated cross-entropy, analytic parameter gradients, full-batch
//! fitting, and CIL/TIL prediction.
//!
//! The backbone is SGC-style: features are propagated `prop_depth` hops
//! through the normalized adjacency beforehand (see [`crate::graph`]), then a
//! single weight matrix maps them to logits over every class seen so far.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::{domain, stream_rng};

/// Single-weight-matrix classifier over the global class space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSgcModel {
    weight: Array2<f64>, // F x C
    bias: Array1<f64>,   // C
    prop_depth: usize,
}

impl LinearSgcModel {
    pub fn zeros(feature_dim: usize, class_count: usize, prop_depth: usize) -> Self {
        Self {
            weight: Array2::zeros((feature_dim, class_count)),
            bias: Array1::zeros(class_count),
            prop_depth,
        }
    }

    pub fn from_parts(weight: Array2<f64>, bias: Array1<f64>, prop_depth: usize) -> Result<Self> {
        if weight.ncols() != bias.len() {
            return Err(Error::Shape(format!(
                "weight has {} columns but bias has {} entries",
                weight.ncols(),
                bias.len()
            )));
        }
        if weight.iter().any(|v| !v.is_finite()) || bias.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite model parameters".into()));
        }
        Ok(Self {
            weight,
            bias,
            prop_depth,
        })
    }

    pub fn weight(&self) -> &Array2<f64> {
        &self.weight
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn feature_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn class_count(&self) -> usize {
        self.bias.len()
    }

    pub fn prop_depth(&self) -> usize {
        self.prop_depth
    }

    /// Grow the class space to `new_class_count`, keeping existing columns
    /// and drawing fresh ones from `sampler`. No-op if already wide enough.
    pub fn widen(&mut self, new_class_count: usize, sampler: &InitSampler, stream: u64) {
        let old = self.class_count();
        if new_class_count <= old {
            return;
        }
        let fresh = sampler.sample(
            self.feature_dim(),
            new_class_count - old,
            self.prop_depth,
            stream,
        );
        let mut weight = Array2::zeros((self.feature_dim(), new_class_count));
        weight
            .slice_mut(ndarray::s![.., ..old])
            .assign(&self.weight);
        weight
            .slice_mut(ndarray::s![.., old..])
            .assign(&fresh.weight);
        let mut bias = Array1::zeros(new_class_count);
        bias.slice_mut(ndarray::s![..old]).assign(&self.bias);
        self.weight = weight;
        self.bias = bias;
    }
}

/// Weight initialization distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Entries i.i.d. normal with standard deviation sqrt(2/F), bias zero.
    FanInNormal,
    /// Entries i.i.d. standard normal, bias zero.
    StandardNormal,
}

/// Draws random model instantiations; one stream index per draw keeps
/// repeated draws independent yet reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitSampler {
    pub seed: u64,
    pub scheme: InitScheme,
}

impl InitSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            scheme: InitScheme::FanInNormal,
        }
    }

    pub fn sample(
        &self,
        feature_dim: usize,
        class_count: usize,
        prop_depth: usize,
        stream: u64,
    ) -> LinearSgcModel {
        let sd = match self.scheme {
            InitScheme::FanInNormal => (2.0 / feature_dim.max(1) as f64).sqrt(),
            InitScheme::StandardNormal => 1.0,
        };
        let mut rng = stream_rng(self.seed, domain::MODEL_INIT, stream);
        let mut weight = Array2::zeros((feature_dim, class_count));
        for x in weight.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *x = sd * z;
        }
        LinearSgcModel {
            weight,
            bias: Array1::zeros(class_count),
            prop_depth,
        }
    }
}

/// Per-node prediction logits, one row per node. All entries finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits(Array2<f64>);

impl Logits {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite logits".into()));
        }
        Ok(Self(values))
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// `logits = features · W + b`, row-wise.
pub fn forward(model: &LinearSgcModel, propagated_features: &Array2<f64>) -> Result<Logits> {
    Logits::new(forward_raw(model, propagated_features)?)
}

/// Forward pass without the finite check; training loops diagnose divergence
/// themselves so the offending epoch can be reported.
pub(crate) fn forward_raw(
    model: &LinearSgcModel,
    propagated_features: &Array2<f64>,
) -> Result<Array2<f64>> {
    if propagated_features.ncols() != model.feature_dim() {
        return Err(Error::Shape(format!(
            "features have {} columns, model expects {}",
            propagated_features.ncols(),
            model.feature_dim()
        )));
    }
    let mut h = propagated_features.dot(&model.weight);
    h += &model.bias;
    Ok(h)
}

fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::Shape(format!(
            "{} labels for {} rows",
            labels.len(),
            rows
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Invalid(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

fn check_offsets(offsets: &[f64], classes: usize) -> Result<()> {
    if offsets.len() != classes {
        return Err(Error::Shape(format!(
            "{} offsets for {classes} classes",
            offsets.len()
        )));
    }
    if offsets.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite offsets".into()));
    }
    Ok(())
}

/// Mean negative log-softmax of the true class, computed with the usual
/// max-shift for stability. `offsets[c]` is added to column `c` of every row
/// before the softmax when present.
fn mean_ce(h: &Array2<f64>, labels: &[usize], offsets: Option<&[f64]>) -> Result<f64> {
    check_labels(labels, h.nrows(), h.ncols())?;
    if let Some(o) = offsets {
        check_offsets(o, h.ncols())?;
    }
    if h.nrows() == 0 {
        return Err(Error::Invalid("cross-entropy over zero rows".into()));
    }
    let mut total = 0.0;
    for (row, &y) in h.rows().into_iter().zip(labels) {
        let mut max = f64::NEG_INFINITY;
        for (j, &z) in row.iter().enumerate() {
            let z = z + offsets.map_or(0.0, |o| o[j]);
            if z > max {
                max = z;
            }
        }
        let mut sum = 0.0;
        for (j, &z) in row.iter().enumerate() {
            let z = z + offsets.map_or(0.0, |o| o[j]);
            sum += (z - max).exp();
        }
        let zy = row[y] + offsets.map_or(0.0, |o| o[y]);
        total += max + sum.ln() - zy;
    }
    Ok(total / h.nrows() as f64)
}

/// Row-wise softmax of `h + offsets`.
fn softmax_rows(h: &Array2<f64>, offsets: Option<&[f64]>) -> Array2<f64> {
    let mut p = h.clone();
    if let Some(o) = offsets {
        for mut row in p.rows_mut() {
            for (j, z) in row.iter_mut().enumerate() {
                *z += o[j];
            }
        }
    }
    for mut row in p.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for z in row.iter_mut() {
            *z = (*z - max).exp();
            sum += *z;
        }
        for z in row.iter_mut() {
            *z /= sum;
        }
    }
    p
}

/// Mean cross-entropy of `logits` against `labels`.
pub fn cross_entropy(logits: &Logits, labels: &[usize]) -> Result<f64> {
    mean_ce(logits.as_array(), labels, None)
}

/// Cross-entropy with per-class logit offsets added inside the loss
/// (offsets never touch the forward path or prediction).
pub fn adjusted_cross_entropy(logits: &Logits, labels: &[usize], offsets: &[f64]) -> Result<f64> {
    mean_ce(logits.as_array(), labels, Some(offsets))
}

/// Gradient of the (adjusted) cross-entropy w.r.t. weight and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Gradient {
    pub fn zeros_like(model: &LinearSgcModel) -> Self {
        Self {
            weight: Array2::zeros(model.weight.raw_dim()),
            bias: Array1::zeros(model.bias.raw_dim()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weight.iter().all(|v| v.is_finite()) && self.bias.iter().all(|v| v.is_finite())
    }

    pub fn scaled_add(&mut self, factor: f64, other: &Gradient) {
        self.weight.scaled_add(factor, &other.weight);
        self.bias.scaled_add(factor, &other.bias);
    }
}

/// Analytic gradient of the mean (adjusted) cross-entropy:
/// `dW = X^T (P - Y) / n`, `db = mean(P - Y)` with `P` the offset-adjusted
/// softmax and `Y` one-hot labels.
pub fn grad_theta(
    model: &LinearSgcModel,
    propagated_features: &Array2<f64>,
    labels: &[usize],
    offsets: Option<&[f64]>,
) -> Result<Gradient> {
    let h = forward_raw(model, propagated_features)?;
    let residual = softmax_residual(&h, labels, offsets)?;
    Ok(Gradient {
        weight: propagated_features.t().dot(&residual),
        bias: residual.sum_axis(Axis(0)),
    })
}

/// `(P - Y)/n`; shared by the parameter gradient and the matching gradient.
pub(crate) fn softmax_residual(
    h: &Array2<f64>,
    labels: &[usize],
    offsets: Option<&[f64]>,
) -> Result<Array2<f64>> {
    check_labels(labels, h.nrows(), h.ncols())?;
    if let Some(o) = offsets {
        check_offsets(o, h.ncols())?;
    }
    if h.nrows() == 0 {
        return Err(Error::Invalid("gradient over zero rows".into()));
    }
    let n = h.nrows() as f64;
    let mut p = softmax_rows(h, offsets);
    for (mut row, &y) in p.rows_mut().into_iter().zip(labels) {
        row[y] -= 1.0;
    }
    p /= n;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Full-batch optimizer settings for both task training and condensation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 0.005,
            epochs: 200,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Invalid(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be >= 1".into()));
        }
        for (name, b) in [
            ("adam_beta1", self.adam_beta1),
            ("adam_beta2", self.adam_beta2),
        ] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::Invalid(format!("{name} must be in (0,1), got {b}")));
            }
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Invalid("weight_decay must be >= 0".into()));
        }
        Ok(())
    }
}

/// One summand of a training objective: `weight * mean_ce(X·W + b [+ offsets], labels)`.
///
/// Features are already in model input space — propagated for graph rows,
/// raw for identity-structured memory rows.
pub struct LossTerm<'a> {
    pub features: &'a Array2<f64>,
    pub labels: &'a [usize],
    pub offsets: Option<Vec<f64>>,
    pub weight: f64,
}

impl<'a> LossTerm<'a> {
    pub fn plain(features: &'a Array2<f64>, labels: &'a [usize]) -> Self {
        Self {
            features,
            labels,
            offsets: None,
            weight: 1.0,
        }
    }
}

pub fn objective_loss(model: &LinearSgcModel, terms: &[LossTerm<'_>]) -> Result<f64> {
    let mut total = 0.0;
    for term in terms {
        let h = forward_raw(model, term.features)?;
        total += term.weight * mean_ce(&h, term.labels, term.offsets.as_deref())?;
    }
    Ok(total)
}

pub fn objective_grad(model: &LinearSgcModel, terms: &[LossTerm<'_>]) -> Result<Gradient> {
    let mut grad = Gradient::zeros_like(model);
    for term in terms {
        let g = grad_theta(model, term.features, term.labels, term.offsets.as_deref())?;
        grad.scaled_add(term.weight, &g);
    }
    Ok(grad)
}

struct AdamState {
    m_w: Array2<f64>,
    v_w: Array2<f64>,
    m_b: Array1<f64>,
    v_b: Array1<f64>,
    step: usize,
}

impl AdamState {
    fn new(model: &LinearSgcModel) -> Self {
        Self {
            m_w: Array2::zeros(model.weight.raw_dim()),
            v_w: Array2::zeros(model.weight.raw_dim()),
            m_b: Array1::zeros(model.bias.raw_dim()),
            v_b: Array1::zeros(model.bias.raw_dim()),
            step: 0,
        }
    }

    fn update(&mut self, model: &mut LinearSgcModel, grad: &Gradient, opt: &OptimizerConfig) {
        self.step += 1;
        let b1 = opt.adam_beta1;
        let b2 = opt.adam_beta2;
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        let lr = opt.learning_rate;
        let eps = opt.adam_eps;
        ndarray::Zip::from(&mut model.weight)
            .and(&mut self.m_w)
            .and(&mut self.v_w)
            .and(&grad.weight)
            .for_each(|w, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            });
        ndarray::Zip::from(&mut model.bias)
            .and(&mut self.m_b)
            .and(&mut self.v_b)
            .and(&grad.bias)
            .for_each(|w, m, v, &g| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
            });
    }
}

/// Full-batch fit of a multi-term objective. Runs exactly `opt.epochs`
/// gradient steps; errors with the offending epoch if the loss goes
/// non-finite.
pub fn fit_terms(
    model: &LinearSgcModel,
    terms: &[LossTerm<'_>],
    opt: &OptimizerConfig,
) -> Result<LinearSgcModel> {
    opt.validate()?;
    let mut current = model.clone();
    let mut adam = match opt.kind {
        OptimizerKind::Adam => Some(AdamState::new(&current)),
        OptimizerKind::Sgd => None,
    };
    for epoch in 0..opt.epochs {
        let loss = objective_loss(&current, terms)?;
        if !loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                context: format!("loss = {loss}"),
            });
        }
        let mut grad = objective_grad(&current, terms)?;
        if !grad.is_finite() {
            return Err(Error::Divergence {
                epoch,
                context: "non-finite gradient".into(),
            });
        }
        if opt.weight_decay > 0.0 {
            grad.weight.scaled_add(opt.weight_decay, &current.weight);
        }
        match adam.as_mut() {
            Some(state) => state.update(&mut current, &grad, opt),
            None => {
                current.weight.scaled_add(-opt.learning_rate, &grad.weight);
                current.bias.scaled_add(-opt.learning_rate, &grad.bias);
            }
        }
    }
    let final_loss = objective_loss(&current, terms)?;
    if !final_loss.is_finite() {
        return Err(Error::Divergence {
            epoch: opt.epochs,
            context: format!("loss = {final_loss}"),
        });
    }
    Ok(current)
}

/// Single-term convenience wrapper over [`fit_terms`].
pub fn fit(
    model: &LinearSgcModel,
    propagated_features: &Array2<f64>,
    labels: &[usize],
    offsets: Option<&[f64]>,
    opt: &OptimizerConfig,
) -> Result<LinearSgcModel> {
    let term = LossTerm {
        features: propagated_features,
        labels,
        offsets: offsets.map(|o| o.to_vec()),
        weight: 1.0,
    };
    fit_terms(model, &[term], opt)
}

/// Row-wise argmax; `class_mask` restricts the candidate columns (TIL).
/// Ties break toward the lowest class id.
pub fn predict(logits: &Logits, class_mask: Option<&[usize]>) -> Result<Vec<usize>> {
    let h = logits.as_array();
    let candidates: Vec<usize> = match class_mask {
        Some(mask) => {
            if mask.is_empty() {
                return Err(Error::Invalid("empty class mask".into()));
            }
            let mut m = mask.to_vec();
            m.sort_unstable();
            m.dedup();
            if let Some(&bad) = m.iter().find(|&&c| c >= h.ncols()) {
                return Err(Error::Invalid(format!("mask class {bad} out of range")));
            }
            m
        }
        None => (0..h.ncols()).collect(),
    };
    Ok(h.rows()
        .into_iter()
        .map(|row| {
            let mut best = candidates[0];
            for &c in &candidates[1..] {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}
