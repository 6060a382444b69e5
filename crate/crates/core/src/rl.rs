//! The node-removal MDP: environment transitions, epsilon-greedy
//! rollouts with embedding capture, trajectory replay, experience
//! buffers, and DQN updates.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::graph::{ConnectivityTracker, Graph, GraphError};
use crate::models::{self, AgentKind, CutterModel, ModelError};
use crate::nn::{Adam, ParamSet, Tape, TensorError, ValueId};
use crate::shaping::{self, PenaltyWeights, ShapingError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RlError {
    #[error("action {node} is not an alive node")]
    DeadAction { node: u32 },
    #[error("episode budget exhausted at step {step}")]
    BudgetExhausted { step: usize },
    #[error("budget {budget} exceeds the {alive} alive nodes")]
    BudgetTooLarge { budget: usize, alive: usize },
    #[error("no alive nodes to act on")]
    NoAliveNodes,
    #[error("transition batch is empty")]
    EmptyBatch,
    #[error("trajectory has no recorded Q values")]
    MissingQValues,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Shaping(#[from] ShapingError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// State of the removal MDP: the residual graph plus episode bookkeeping.
#[derive(Debug, Clone)]
pub struct EnvState {
    pub graph: Graph,
    pub removed: Vec<u32>,
    pub step: usize,
    pub budget: usize,
}

impl EnvState {
    pub fn new(graph: Graph, budget: usize) -> Self {
        EnvState {
            graph,
            removed: Vec::new(),
            step: 0,
            budget,
        }
    }
}

/// Removes `action` from the residual graph, producing the next state.
pub fn env_step(state: &EnvState, action: u32) -> Result<EnvState, RlError> {
    if state.step >= state.budget {
        return Err(RlError::BudgetExhausted { step: state.step });
    }
    if !state.graph.is_alive(action) {
        return Err(RlError::DeadAction { node: action });
    }
    let graph = state.graph.remove_nodes(&[action])?;
    let mut removed = state.removed.clone();
    removed.push(action);
    Ok(EnvState {
        graph,
        removed,
        step: state.step + 1,
        budget: state.budget,
    })
}

/// Epsilon-greedy action selection over the alive nodes. With
/// probability `eps` a uniformly random alive node; otherwise the
/// arg-max of `q_scores` with ties broken toward the lowest node id.
/// `eps = 0` consumes no randomness.
pub fn select_action<R: Rng>(
    state: &EnvState,
    q_scores: &[(u32, f64)],
    eps: f64,
    rng: &mut R,
) -> Result<u32, RlError> {
    if state.graph.alive_count() == 0 || q_scores.is_empty() {
        return Err(RlError::NoAliveNodes);
    }
    if eps > 0.0 && rng.random::<f64>() < eps {
        let alive: Vec<u32> = state.graph.alive_nodes().collect();
        return Ok(alive[rng.random_range(0..alive.len())]);
    }
    let mut best = q_scores[0];
    for &(node, q) in &q_scores[1..] {
        if q > best.1 {
            best = (node, q);
        }
    }
    Ok(best.0)
}

/// Linear epsilon decay from `eps_start` to `eps_end` over
/// `decay_episodes`, constant afterwards.
#[derive(Debug, Clone, Copy)]
pub struct EpsilonSchedule {
    pub eps_start: f64,
    pub eps_end: f64,
    pub decay_episodes: usize,
}

impl EpsilonSchedule {
    pub fn value(&self, episode: usize) -> f64 {
        if self.decay_episodes == 0 {
            return self.eps_end;
        }
        let frac = (episode as f64 / self.decay_episodes as f64).min(1.0);
        self.eps_start - (self.eps_start - self.eps_end) * frac
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectorySource {
    Active,
    Follow,
}

impl TrajectorySource {
    pub fn name(&self) -> &'static str {
        match self {
            TrajectorySource::Active => "active",
            TrajectorySource::Follow => "follow",
        }
    }
}

/// Detached embeddings of one state–action pair, captured at rollout or
/// replay time with the collecting agent's own encoder.
#[derive(Debug, Clone)]
pub struct StepEmbed {
    pub graph: Vec<f64>,
    pub action: Vec<f64>,
}

/// One episode: T+1 graph snapshots, the action sequence, per-step
/// diagnostics, and the trajectory-level true return.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub agent: AgentKind,
    pub source: TrajectorySource,
    pub states: Vec<Graph>,
    pub actions: Vec<u32>,
    /// Q value of each taken action (empty for follow replays).
    pub q_taken: Vec<f64>,
    /// Per-step true-return increments (the agent's own objective).
    pub step_true: Vec<f64>,
    pub embeds: Vec<StepEmbed>,
    pub true_return: f64,
    /// Conditioning / vital set active during the episode (empty for the
    /// vital agent).
    pub vital: Arc<BTreeSet<u32>>,
}

/// Borrowed view of one replayable transition.
#[derive(Debug, Clone, Copy)]
pub struct Transition<'a> {
    pub state: &'a Graph,
    pub action: u32,
    pub next: &'a Graph,
    pub done: bool,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn transition(&self, t: usize) -> Transition<'_> {
        Transition {
            state: &self.states[t],
            action: self.actions[t],
            next: &self.states[t + 1],
            done: t + 1 == self.len(),
        }
    }

    fn conditioning(&self) -> Option<&BTreeSet<u32>> {
        if self.vital.is_empty() {
            None
        } else {
            Some(&self.vital)
        }
    }
}

/// Ring buffer of trajectories with uniform transition sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    cap: usize,
    trajs: VecDeque<Arc<TrajectoryRecord>>,
}

impl ReplayBuffer {
    pub fn new(cap: usize) -> Self {
        ReplayBuffer {
            cap,
            trajs: VecDeque::new(),
        }
    }

    pub fn push(&mut self, traj: Arc<TrajectoryRecord>) {
        if self.trajs.len() == self.cap {
            self.trajs.pop_front();
        }
        self.trajs.push_back(traj);
    }

    pub fn len(&self) -> usize {
        self.trajs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<TrajectoryRecord>> {
        self.trajs.iter()
    }

    pub fn as_slice(&self) -> Vec<Arc<TrajectoryRecord>> {
        self.trajs.iter().cloned().collect()
    }

    /// Uniformly samples `count` transitions (with replacement) across
    /// all stored trajectories.
    pub fn sample_transitions<R: Rng>(
        &self,
        rng: &mut R,
        count: usize,
    ) -> Vec<(Arc<TrajectoryRecord>, usize)> {
        let lens: Vec<usize> = self.trajs.iter().map(|t| t.len()).collect();
        let total: usize = lens.iter().sum();
        if total == 0 {
            return Vec::new();
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let mut idx = rng.random_range(0..total);
            for (ti, &l) in lens.iter().enumerate() {
                if idx < l {
                    out.push((self.trajs[ti].clone(), idx));
                    break;
                }
                idx -= l;
            }
        }
        out
    }

    /// Samples up to `count` distinct trajectories.
    pub fn sample_trajs<R: Rng>(&self, rng: &mut R, count: usize) -> Vec<Arc<TrajectoryRecord>> {
        if self.trajs.len() <= count {
            return self.as_slice();
        }
        let mut idx: Vec<usize> = (0..self.trajs.len()).collect();
        for i in 0..count {
            let j = rng.random_range(i..idx.len());
            idx.swap(i, j);
        }
        idx[..count]
            .iter()
            .map(|&i| self.trajs[i].clone())
            .collect()
    }
}

/// One DQN gradient step on the mean squared TD error of `batch`, using
/// `target` parameters for the bootstrap term
/// (`y = r + gamma * max_a' Q_target(s', a')`, `y = r` at episode end).
/// `shaped_rewards` must align with `batch`. Returns the pre-step loss.
#[allow(clippy::too_many_arguments)]
pub fn dqn_update(
    model: &mut CutterModel,
    target: &ParamSet,
    kind: AgentKind,
    batch: &[(Arc<TrajectoryRecord>, usize)],
    gamma: f64,
    shaped_rewards: &[f64],
    adam: &mut Adam,
    lr: f64,
) -> Result<f64, RlError> {
    if batch.is_empty() {
        return Err(RlError::EmptyBatch);
    }
    debug_assert_eq!(batch.len(), shaped_rewards.len());

    // Bootstrap targets from the frozen network, outside the tape.
    let mut targets = Vec::with_capacity(batch.len());
    for ((traj, t), &r) in batch.iter().zip(shaped_rewards.iter()) {
        let tr = traj.transition(*t);
        let y = if tr.done || tr.next.alive_count() == 0 {
            r
        } else {
            let q_next = models::q_values(model, target, kind, tr.next, traj.conditioning())?;
            let max_q = q_next
                .iter()
                .map(|&(_, q)| q)
                .fold(f64::NEG_INFINITY, f64::max);
            r + gamma * max_q
        };
        targets.push(y);
    }

    let mut tape = Tape::new();
    let mut terms: Vec<ValueId> = Vec::with_capacity(batch.len());
    {
        let m: &CutterModel = model;
        for ((traj, t), &y) in batch.iter().zip(targets.iter()) {
            let tr = traj.transition(*t);
            let enc = models::encode_state(&mut tape, &m.params, m, kind, tr.state, traj.conditioning())?;
            let qcol = models::q_column(&mut tape, &m.params, m, kind, &enc)?;
            let q_sa = tape.row_select(qcol, tr.action as usize)?;
            let y_id = tape.scalar(y);
            let err = tape.sub(q_sa, y_id)?;
            terms.push(tape.square(err));
        }
    }
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = tape.add(acc, t)?;
    }
    let loss = tape.affine_const(acc, 1.0 / terms.len() as f64, 0.0);
    let loss_value = tape.value(loss).get(0, 0);
    tape.backward(loss, &mut model.params)?;
    adam.step(&mut model.params, lr)?;
    Ok(loss_value)
}

/// Per-state capture used while rolling out or replaying an episode.
struct StateCapture {
    q_scores: Vec<(u32, f64)>,
    graph_embed: Vec<f64>,
    node_rows: Vec<f64>,
    cols: usize,
}

fn capture_state(
    model: &CutterModel,
    kind: AgentKind,
    g: &Graph,
    conditioning: Option<&BTreeSet<u32>>,
    with_q: bool,
) -> Result<StateCapture, RlError> {
    let mut tape = Tape::new();
    let enc = models::encode_state(&mut tape, &model.params, model, kind, g, conditioning)?;
    let q_scores = if with_q {
        let col = models::q_column(&mut tape, &model.params, model, kind, &enc)?;
        let values = tape.value(col);
        g.alive_nodes()
            .map(|u| (u, values.get(u as usize, 0)))
            .collect()
    } else {
        Vec::new()
    };
    let nodes = tape.value(enc.nodes);
    Ok(StateCapture {
        q_scores,
        graph_embed: tape.value(enc.graph).data().to_vec(),
        node_rows: nodes.data().to_vec(),
        cols: nodes.cols(),
    })
}

impl StateCapture {
    fn action_embed(&self, node: u32) -> Vec<f64> {
        let c = self.cols;
        self.node_rows[node as usize * c..(node as usize + 1) * c].to_vec()
    }

    fn vital_mean(&self, g: &Graph, vital: &BTreeSet<u32>) -> Option<Vec<f64>> {
        let survivors: Vec<u32> = vital.iter().copied().filter(|&u| g.is_alive(u)).collect();
        if survivors.is_empty() {
            None
        } else {
            Some(shaping::mean_rows(&self.node_rows, self.cols, &survivors))
        }
    }
}

enum Course<'a> {
    Policy { budget: usize, eps: f64 },
    Replay(&'a [u32]),
}

/// Rolls an epsilon-greedy episode with the agent's own policy. The
/// conditioning set doubles as the vital set for the redundancy agent's
/// return; it must be nonempty for RDA episodes.
pub fn run_episode<R: Rng>(
    model: &CutterModel,
    kind: AgentKind,
    start: &Graph,
    budget: usize,
    eps: f64,
    conditioning: Arc<BTreeSet<u32>>,
    weights: &PenaltyWeights,
    rng: &mut R,
) -> Result<TrajectoryRecord, RlError> {
    if budget > start.alive_count() {
        return Err(RlError::BudgetTooLarge {
            budget,
            alive: start.alive_count(),
        });
    }
    drive_episode(
        model,
        kind,
        start,
        Course::Policy { budget, eps },
        conditioning,
        weights,
        TrajectorySource::Active,
        rng,
    )
}

/// Replays a leader's action sequence, re-encoding every state with this
/// agent's own encoder and scoring under its own objective.
pub fn replay_episode(
    model: &CutterModel,
    kind: AgentKind,
    start: &Graph,
    actions: &[u32],
    conditioning: Arc<BTreeSet<u32>>,
    weights: &PenaltyWeights,
) -> Result<TrajectoryRecord, RlError> {
    let mut no_rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    drive_episode(
        model,
        kind,
        start,
        Course::Replay(actions),
        conditioning,
        weights,
        TrajectorySource::Follow,
        &mut no_rng,
    )
}

#[allow(clippy::too_many_arguments)]
fn drive_episode<R: Rng>(
    model: &CutterModel,
    kind: AgentKind,
    start: &Graph,
    course: Course<'_>,
    conditioning: Arc<BTreeSet<u32>>,
    weights: &PenaltyWeights,
    source: TrajectorySource,
    rng: &mut R,
) -> Result<TrajectoryRecord, RlError> {
    let f0 = start.pairwise_connectivity();
    if f0 == 0 {
        return Err(RlError::Shaping(ShapingError::DegenerateGraph));
    }
    if kind == AgentKind::Rda && conditioning.is_empty() {
        return Err(RlError::Shaping(ShapingError::EmptyVital));
    }
    let cond = if conditioning.is_empty() {
        None
    } else {
        Some(conditioning.as_ref())
    };
    let steps = match course {
        Course::Policy { budget, .. } => budget,
        Course::Replay(actions) => actions.len(),
    };

    let mut tracker = ConnectivityTracker::new(start.clone());
    let mut state = EnvState::new(start.clone(), steps);
    let mut states = alloc::vec![start.clone()];
    let mut actions_taken = Vec::with_capacity(steps);
    let mut q_taken = Vec::new();
    let mut embeds = Vec::with_capacity(steps);
    let mut conn = alloc::vec![f0];
    let mut vital_means: Vec<Option<Vec<f64>>> = Vec::new();
    let mut vital_hits = alloc::vec![0usize];

    for t in 0..steps {
        if state.graph.alive_count() == 0 {
            break;
        }
        let with_q = matches!(course, Course::Policy { .. });
        let cap = capture_state(model, kind, &state.graph, cond, with_q)?;
        let action = match course {
            Course::Policy { eps, .. } => select_action(&state, &cap.q_scores, eps, rng)?,
            Course::Replay(actions) => actions[t],
        };
        if with_q {
            let q = cap
                .q_scores
                .iter()
                .find(|(u, _)| *u == action)
                .map(|&(_, q)| q)
                .ok_or(RlError::DeadAction { node: action })?;
            q_taken.push(q);
        }
        if kind == AgentKind::Rda {
            vital_means.push(cap.vital_mean(&state.graph, &conditioning));
        }
        embeds.push(StepEmbed {
            graph: cap.graph_embed.clone(),
            action: cap.action_embed(action),
        });
        tracker.remove(action)?;
        state = env_step(&state, action)?;
        conn.push(tracker.connectivity());
        let hits = vital_hits.last().unwrap()
            + usize::from(kind == AgentKind::Rda && conditioning.contains(&action));
        vital_hits.push(hits);
        states.push(state.graph.clone());
    }

    let taken = embeds.len();
    actions_taken.extend(state.removed.iter().copied());
    debug_assert_eq!(actions_taken.len(), taken);

    // Final-state vital mean for the redundancy objective (one extra
    // encoder pass; the loop only captured pre-removal states).
    if kind == AgentKind::Rda {
        let final_g = states.last().unwrap();
        if final_g.alive_count() == 0 {
            vital_means.push(None);
        } else {
            let cap = capture_state(model, kind, final_g, cond, false)?;
            vital_means.push(cap.vital_mean(final_g, &conditioning));
        }
    }

    let (step_true, true_return) = match kind {
        AgentKind::Vda => {
            let step_true: Vec<f64> = (0..taken)
                .map(|t| (conn[t] - conn[t + 1]) as f64 / f0 as f64)
                .collect();
            let ret = (f0 - *conn.last().unwrap()) as f64 / f0 as f64;
            (step_true, ret)
        }
        AgentKind::Rda => {
            let vm0 = vital_means[0]
                .clone()
                .expect("vital nodes alive at episode start");
            let prefix = |k: usize| -> f64 {
                let p_conn = (f0 - conn[k]) as f64 / f0 as f64;
                let p_delete = vital_hits[k] as f64 / conditioning.len() as f64;
                let p_embed = if k == 0 {
                    0.0
                } else {
                    shaping::embed_penalty(&vm0, vital_means[k].as_deref())
                };
                crate::util::clamp01(
                    1.0 - (weights.conn * p_conn
                        + weights.delete * p_delete
                        + weights.embed * p_embed),
                )
            };
            let mut step_true = Vec::with_capacity(taken);
            let mut prev = prefix(0);
            for k in 1..=taken {
                let cur = prefix(k);
                step_true.push(cur - prev);
                prev = cur;
            }
            (step_true, prefix(taken))
        }
    };

    Ok(TrajectoryRecord {
        agent: kind,
        source,
        states,
        actions: actions_taken,
        q_taken,
        step_true,
        embeds,
        true_return,
        vital: conditioning,
    })
}

