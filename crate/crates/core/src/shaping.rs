//! The three learning signals: trajectory-level true returns, dense
//! reward prediction with affine return alignment, and
//! prototype-constrained step targets.

use alloc::collections::BTreeSet;
use alloc::sync::Arc;
use alloc::vec::Vec;

use thiserror::Error;

use crate::graph::Graph;
use crate::models::{self, AgentKind, CutterModel, ModelError};
use crate::nn::{ParamSet, Tape, ValueId};
use crate::rl::TrajectoryRecord;
use crate::util::{clamp01, cosine};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShapingError {
    #[error("start graph has zero pairwise connectivity")]
    DegenerateGraph,
    #[error("vital node set is empty")]
    EmptyVital,
    #[error("affine fit needs at least two distinct predicted returns")]
    DegenerateFit,
    #[error("penalty weights must be nonnegative and sum to 1, got ({0}, {1}, {2})")]
    BadWeights(f64, f64, f64),
    #[error("batch of trajectories is empty")]
    EmptyBatch,
    #[error("prototype extraction needs {need} scored trajectories, buffer has {have}")]
    InsufficientBuffer { have: usize, need: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Penalty mix for the redundancy agent's return. The three weights must
/// sum to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyWeights {
    pub conn: f64,
    pub delete: f64,
    pub embed: f64,
}

impl PenaltyWeights {
    pub fn new(conn: f64, delete: f64, embed: f64) -> Result<Self, ShapingError> {
        let ok = conn >= 0.0
            && delete >= 0.0
            && embed >= 0.0
            && (conn + delete + embed - 1.0).abs() < 1e-9;
        if !ok {
            return Err(ShapingError::BadWeights(conn, delete, embed));
        }
        Ok(PenaltyWeights { conn, delete, embed })
    }
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        PenaltyWeights {
            conn: 1.0 / 3.0,
            delete: 1.0 / 3.0,
            embed: 1.0 / 3.0,
        }
    }
}

/// Vital agent's true return: the relative drop in pairwise connectivity
/// between the start and final graphs. Always in [0, 1].
pub fn vda_true_return(start: &Graph, final_g: &Graph) -> Result<f64, ShapingError> {
    let f0 = start.pairwise_connectivity();
    if f0 == 0 {
        return Err(ShapingError::DegenerateGraph);
    }
    let ft = final_g.pairwise_connectivity();
    Ok((f0 - ft) as f64 / f0 as f64)
}

/// Mean task-encoder embedding of the vital nodes still alive in `g`, or
/// `None` when none survive.
pub fn vital_mean_embedding(
    model: &CutterModel,
    params: &ParamSet,
    kind: AgentKind,
    g: &Graph,
    vital: &BTreeSet<u32>,
    conditioning: Option<&BTreeSet<u32>>,
) -> Result<Option<Vec<f64>>, ShapingError> {
    let survivors: Vec<u32> = vital.iter().copied().filter(|&u| g.is_alive(u)).collect();
    if survivors.is_empty() {
        return Ok(None);
    }
    let mut tape = Tape::new();
    let enc = models::encode_state(&mut tape, params, model, kind, g, conditioning)?;
    let nodes = tape.value(enc.nodes);
    Ok(Some(mean_rows(nodes.data(), nodes.cols(), &survivors)))
}

pub(crate) fn mean_rows(data: &[f64], cols: usize, rows: &[u32]) -> Vec<f64> {
    let mut mean = alloc::vec![0.0; cols];
    for &r in rows {
        let row = &data[r as usize * cols..(r as usize + 1) * cols];
        for (m, v) in mean.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= rows.len() as f64;
    }
    mean
}

/// Embedding-distortion penalty between two vital-mean embeddings.
/// Defined as 1 when the vital set did not survive. Clamped to [0, 1].
pub(crate) fn embed_penalty(before: &[f64], after: Option<&[f64]>) -> f64 {
    match after {
        Some(a) => clamp01(1.0 - cosine(before, a)),
        None => 1.0,
    }
}

/// Redundancy agent's true return (penalty-based, in [0, 1]):
/// `1 - (w_conn * P_conn + w_delete * P_delete + w_embed * P_embed)`.
#[allow(clippy::too_many_arguments)]
pub fn rda_true_return(
    start: &Graph,
    final_g: &Graph,
    vital: &BTreeSet<u32>,
    removed: &BTreeSet<u32>,
    weights: &PenaltyWeights,
    model: &CutterModel,
    params: &ParamSet,
    conditioning: Option<&BTreeSet<u32>>,
) -> Result<f64, ShapingError> {
    if vital.is_empty() {
        return Err(ShapingError::EmptyVital);
    }
    let p_conn = vda_true_return(start, final_g)?;
    let hit = vital.intersection(removed).count();
    let p_delete = hit as f64 / vital.len() as f64;
    let before = vital_mean_embedding(model, params, AgentKind::Rda, start, vital, conditioning)?
        .expect("vital nodes are alive in the start graph");
    let after = vital_mean_embedding(model, params, AgentKind::Rda, final_g, vital, conditioning)?;
    let p_embed = embed_penalty(&before, after.as_deref());
    Ok(clamp01(
        1.0 - (weights.conn * p_conn + weights.delete * p_delete + weights.embed * p_embed),
    ))
}

/// Predicted trajectory return: the sum of step rewards over the stored
/// state–action embeddings.
pub fn predicted_return(
    traj: &TrajectoryRecord,
    model: &CutterModel,
    params: &ParamSet,
) -> Result<f64, ShapingError> {
    let mut total = 0.0;
    for e in &traj.embeds {
        total += models::reward_step(model, params, traj.agent, &e.graph, &e.action)?;
    }
    Ok(total)
}

/// The (alpha, beta) pair aligning predicted returns to the true-return
/// scale, fit by ordinary least squares and frozen once stable.
#[derive(Debug, Clone)]
pub struct AffineCalibrator {
    pub alpha: f64,
    pub beta: f64,
    pub frozen: bool,
    pub fit_pairs: Vec<(f64, f64)>,
    last_slope: Option<f64>,
}

impl Default for AffineCalibrator {
    fn default() -> Self {
        Self::new()
    }
}

impl AffineCalibrator {
    pub fn new() -> Self {
        AffineCalibrator {
            alpha: 1.0,
            beta: 0.0,
            frozen: false,
            fit_pairs: Vec::new(),
            last_slope: None,
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        self.alpha * x + self.beta
    }

    pub fn set_pairs(&mut self, pairs: Vec<(f64, f64)>) {
        self.fit_pairs = pairs;
    }

    /// Fits (alpha, beta) by OLS of true on predicted. A non-positive
    /// fitted slope falls back to range matching
    /// (`alpha = (U_true-L_true)/(U_pred-L_pred)`, clamped to at least
    /// 1e-6 so the map stays strictly increasing). Freezes itself when
    /// the slope moved less than 1% between two consecutive fits or once
    /// 100 trajectories have been fitted. A frozen calibrator never
    /// changes.
    pub fn fit(&mut self) -> Result<(f64, f64), ShapingError> {
        if self.frozen {
            return Ok((self.alpha, self.beta));
        }
        let n = self.fit_pairs.len();
        let mut distinct = false;
        for w in self.fit_pairs.windows(2) {
            if w[0].0 != w[1].0 {
                distinct = true;
                break;
            }
        }
        if n < 2 || !distinct {
            return Err(ShapingError::DegenerateFit);
        }
        let mean_p: f64 = self.fit_pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
        let mean_t: f64 = self.fit_pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let mut cov = 0.0;
        let mut var = 0.0;
        for &(p, t) in &self.fit_pairs {
            cov += (p - mean_p) * (t - mean_t);
            var += (p - mean_p) * (p - mean_p);
        }
        if var < 1e-18 {
            return Err(ShapingError::DegenerateFit);
        }
        let slope = cov / var;
        if slope > 0.0 {
            self.alpha = slope;
            self.beta = mean_t - slope * mean_p;
        } else {
            let (mut lo_p, mut hi_p) = (f64::INFINITY, f64::NEG_INFINITY);
            let (mut lo_t, mut hi_t) = (f64::INFINITY, f64::NEG_INFINITY);
            for &(p, t) in &self.fit_pairs {
                lo_p = lo_p.min(p);
                hi_p = hi_p.max(p);
                lo_t = lo_t.min(t);
                hi_t = hi_t.max(t);
            }
            self.alpha = ((hi_t - lo_t) / (hi_p - lo_p)).max(1e-6);
            self.beta = lo_t - self.alpha * lo_p;
        }
        if let Some(prev) = self.last_slope {
            if (self.alpha - prev).abs() <= 0.01 * prev.abs().max(1e-12) {
                self.frozen = true;
            }
        }
        if n >= 100 {
            self.frozen = true;
        }
        self.last_slope = Some(self.alpha);
        Ok((self.alpha, self.beta))
    }
}

/// Mean embeddings of context windows preceding the most critical steps
/// of the top-K (positive) and bottom-K (negative) trajectories.
#[derive(Debug, Clone)]
pub struct PrototypePair {
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
    pub k: usize,
    pub window: usize,
    pub refresh_interval: usize,
}

/// Shaping knobs: the weight of the prototype term.
#[derive(Debug, Clone, Copy)]
pub struct ShapingConfig {
    pub lambda_proto: f64,
}

/// Builds the reward-network regression loss on `tape`:
/// mean over the batch of `(R_true - (alpha * R_pred + beta))^2`.
/// Gradients flow only into the reward network (the stored embeddings
/// are constants, alpha/beta are frozen scalars for this loss).
pub fn reward_net_loss(
    tape: &mut Tape,
    model: &CutterModel,
    params: &ParamSet,
    kind: AgentKind,
    trajs: &[Arc<TrajectoryRecord>],
    cal: &AffineCalibrator,
) -> Result<ValueId, ShapingError> {
    if trajs.is_empty() {
        return Err(ShapingError::EmptyBatch);
    }
    let mut terms: Vec<ValueId> = Vec::with_capacity(trajs.len());
    for traj in trajs {
        let mut pred: Option<ValueId> = None;
        for e in &traj.embeds {
            let hg = tape.constant(crate::nn::Tensor::row_vector(e.graph.clone()));
            let ha = tape.constant(crate::nn::Tensor::row_vector(e.action.clone()));
            let r = models::reward_output(tape, params, model, kind, hg, ha)?;
            pred = Some(match pred {
                Some(acc) => tape.add(acc, r).map_err(ModelError::from)?,
                None => r,
            });
        }
        let pred = pred.unwrap_or_else(|| tape.scalar(0.0));
        let aligned = tape.affine_const(pred, cal.alpha, cal.beta);
        let truth = tape.scalar(traj.true_return);
        let err = tape.sub(truth, aligned).map_err(ModelError::from)?;
        terms.push(tape.square(err));
    }
    Ok(mean_terms(tape, &terms))
}

fn mean_terms(tape: &mut Tape, terms: &[ValueId]) -> ValueId {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = tape.add(acc, t).expect("loss terms are scalars");
    }
    tape.affine_const(acc, 1.0 / terms.len() as f64, 0.0)
}

/// Extracts prototypes from the buffer: rank trajectories by true return,
/// locate each one's most critical step by its per-step true return
/// (argmax for the top-K, argmin for the bottom-K), encode the window of
/// up to `n` state–action pairs preceding that step, and average.
pub fn extract_prototypes(
    buffer: &[Arc<TrajectoryRecord>],
    k: usize,
    n: usize,
    refresh_interval: usize,
    model: &CutterModel,
    params: &ParamSet,
    kind: AgentKind,
) -> Result<PrototypePair, ShapingError> {
    let scored: Vec<&Arc<TrajectoryRecord>> =
        buffer.iter().filter(|t| !t.step_true.is_empty()).collect();
    if scored.len() < 2 * k {
        return Err(ShapingError::InsufficientBuffer {
            have: scored.len(),
            need: 2 * k,
        });
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| {
        scored[b]
            .true_return
            .partial_cmp(&scored[a].true_return)
            .expect("returns are finite")
            .then(a.cmp(&b))
    });
    let encode_critical = |traj: &TrajectoryRecord, top: bool| -> Result<Vec<f64>, ShapingError> {
        let critical = if top {
            argmax(&traj.step_true)
        } else {
            argmin(&traj.step_true)
        };
        let window = window_pairs(traj, critical, n);
        Ok(models::encode_window(model, params, kind, &window)?)
    };
    let mut pos = alloc::vec![0.0; model.dims.embed];
    let mut neg = alloc::vec![0.0; model.dims.embed];
    for i in 0..k {
        let top = encode_critical(scored[order[i]], true)?;
        let bottom = encode_critical(scored[order[scored.len() - 1 - i]], false)?;
        for (p, v) in pos.iter_mut().zip(top.iter()) {
            *p += v / k as f64;
        }
        for (q, v) in neg.iter_mut().zip(bottom.iter()) {
            *q += v / k as f64;
        }
    }
    Ok(PrototypePair {
        pos,
        neg,
        k,
        window: n,
        refresh_interval,
    })
}

/// The up-to-`n` stored pairs preceding step `t` (the pair at `t` itself
/// stands in when there is no history at all).
fn window_pairs(traj: &TrajectoryRecord, t: usize, n: usize) -> Vec<(&[f64], &[f64])> {
    let range = if t == 0 {
        0..1
    } else {
        t.saturating_sub(n)..t
    };
    traj.embeds[range]
        .iter()
        .map(|e| (e.graph.as_slice(), e.action.as_slice()))
        .collect()
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// Contrastive step target: `clip(cos(h, pos) - cos(h, neg), -1, 1)`.
/// Zero vectors have similarity 0 by convention.
pub fn prototype_target(window_embed: &[f64], protos: &PrototypePair) -> f64 {
    let t = cosine(window_embed, &protos.pos) - cosine(window_embed, &protos.neg);
    t.clamp(-1.0, 1.0)
}

/// Value pieces of the combined reward objective, for diagnostics.
pub struct TotalLoss {
    pub loss: ValueId,
    pub reward_term: f64,
    pub proto_term: f64,
}

/// Combined objective: the trajectory-return regression plus
/// `lambda_proto` times the mean squared gap between step rewards and
/// prototype targets. The prototype term covers steps with at least
/// `window - 1` pairs of history; without prototypes it is omitted.
pub fn total_reward_loss(
    tape: &mut Tape,
    model: &CutterModel,
    params: &ParamSet,
    kind: AgentKind,
    trajs: &[Arc<TrajectoryRecord>],
    cal: &AffineCalibrator,
    protos: Option<&PrototypePair>,
    cfg: &ShapingConfig,
) -> Result<TotalLoss, ShapingError> {
    let reward_loss = reward_net_loss(tape, model, params, kind, trajs, cal)?;
    let reward_term = tape.value(reward_loss).get(0, 0);
    let Some(protos) = protos.filter(|_| cfg.lambda_proto > 0.0) else {
        return Ok(TotalLoss {
            loss: reward_loss,
            reward_term,
            proto_term: 0.0,
        });
    };
    let n = protos.window;
    let mut terms: Vec<ValueId> = Vec::new();
    for traj in trajs {
        for t in 0..traj.embeds.len() {
            if t + 1 < n {
                continue; // needs at least n-1 pairs of history
            }
            let window = window_pairs(traj, t, n);
            let h = models::encode_window(model, params, kind, &window)?;
            let target = prototype_target(&h, protos);
            let e = &traj.embeds[t];
            let hg = tape.constant(crate::nn::Tensor::row_vector(e.graph.clone()));
            let ha = tape.constant(crate::nn::Tensor::row_vector(e.action.clone()));
            let r = models::reward_output(tape, params, model, kind, hg, ha)?;
            let target_id = tape.scalar(target);
            let err = tape.sub(r, target_id).map_err(ModelError::from)?;
            terms.push(tape.square(err));
        }
    }
    if terms.is_empty() {
        return Ok(TotalLoss {
            loss: reward_loss,
            reward_term,
            proto_term: 0.0,
        });
    }
    let proto_mean = mean_terms(tape, &terms);
    let proto_term = tape.value(proto_mean).get(0, 0);
    let scaled = tape.affine_const(proto_mean, cfg.lambda_proto, 0.0);
    let loss = tape.add(reward_loss, scaled).map_err(ModelError::from)?;
    Ok(TotalLoss {
        loss,
        reward_term,
        proto_term,
    })
}
