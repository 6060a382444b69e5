//! End-to-end training: alternating active–follow rounds, DQN and
//! reward-network updates, affine calibration, prototype refresh, and
//! the greedy compression rollout used at inference time.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::explore::{phase_rda_lead, phase_vda_lead, ImportanceSet};
use crate::graph::{CompressionSpec, Graph, GraphError};
use crate::models::{self, AgentKind, CutterModel, ModelDims, ModelError};
use crate::nn::{Adam, ParamSet, Tape};
use crate::rl::{
    dqn_update, EpsilonSchedule, ReplayBuffer, RlError, TrajectoryRecord,
};
use crate::rng::{stream, Stream};
use crate::shaping::{
    self, AffineCalibrator, PenaltyWeights, PrototypePair, ShapingConfig, ShapingError,
};
use crate::util::ceil_frac;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid config: {field}: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Shaping(#[from] ShapingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] crate::nn::TensorError),
}

/// Every training hyperparameter, with the defaults used throughout.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Fraction of nodes retained by compression.
    pub rho: f64,
    /// Number of training rounds (each runs both phases).
    pub episodes: usize,
    pub seed: u64,
    /// Removals per episode; defaults to the compression budget
    /// `ceil((1 - rho) * N)`.
    pub budget_override: Option<usize>,
    pub dims: ModelDims,
    pub gamma: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of the episodes over which epsilon decays linearly.
    pub eps_decay_frac: f64,
    /// Prototype count K per side.
    pub proto_k: usize,
    /// Context-window length n.
    pub proto_window: usize,
    pub lambda_proto: f64,
    /// Penalty weights (connectivity, deletion, embedding); must sum to 1.
    pub omega: [f64; 3],
    /// Replay capacity in trajectories, per agent.
    pub buffer_cap: usize,
    /// Transition minibatch size for DQN updates.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Target-network sync interval, in updates.
    pub target_sync: usize,
    /// Prototype refresh interval, in episodes.
    pub proto_refresh: usize,
    /// DQN updates per agent per episode.
    pub updates_per_episode: usize,
    /// Trajectories per reward-network update.
    pub reward_batch: usize,
    /// Reward shaping on/off (off trains from the sparse terminal return).
    pub shaping: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            rho: 0.5,
            episodes: 200,
            seed: 0,
            budget_override: None,
            dims: ModelDims::default(),
            gamma: 0.99,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_frac: 0.6,
            proto_k: 5,
            proto_window: 5,
            lambda_proto: 0.5,
            omega: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            buffer_cap: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            target_sync: 50,
            proto_refresh: 20,
            updates_per_episode: 2,
            reward_batch: 8,
            shaping: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |field: &'static str, reason: String| Err(ConfigError { field, reason });
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return fail("rho", alloc::format!("must be in (0, 1], got {}", self.rho));
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return fail("eps_start/eps_end", String::from("must be in [0, 1]"));
        }
        if self.eps_start < self.eps_end {
            return fail(
                "eps_start",
                alloc::format!("must be >= eps_end ({} < {})", self.eps_start, self.eps_end),
            );
        }
        if !(self.eps_decay_frac > 0.0 && self.eps_decay_frac <= 1.0) {
            return fail("eps_decay_frac", String::from("must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma", alloc::format!("must be in [0, 1], got {}", self.gamma));
        }
        let sum: f64 = self.omega.iter().sum();
        if self.omega.iter().any(|w| *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return fail(
                "omega",
                alloc::format!("weights must be nonnegative and sum to 1, got sum {}", sum),
            );
        }
        if self.proto_k == 0 {
            return fail("proto_k", String::from("must be at least 1"));
        }
        if self.proto_window == 0 {
            return fail("proto_window", String::from("must be at least 1"));
        }
        if self.lambda_proto < 0.0 {
            return fail("lambda_proto", String::from("must be nonnegative"));
        }
        if self.buffer_cap == 0 {
            return fail("buffer_cap", String::from("must be at least 1"));
        }
        if self.batch_size == 0 {
            return fail("batch_size", String::from("must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return fail("learning_rate", String::from("must be positive"));
        }
        if self.target_sync == 0 {
            return fail("target_sync", String::from("must be at least 1"));
        }
        if self.proto_refresh == 0 {
            return fail("proto_refresh", String::from("must be at least 1"));
        }
        if self.reward_batch == 0 {
            return fail("reward_batch", String::from("must be at least 1"));
        }
        if self.dims.embed == 0 {
            return fail("embed", String::from("must be at least 1"));
        }
        Ok(())
    }

    pub fn weights(&self) -> Result<PenaltyWeights, ShapingError> {
        PenaltyWeights::new(self.omega[0], self.omega[1], self.omega[2])
    }
}

/// One row of the training progress log.
#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub episode: usize,
    pub agent: AgentKind,
    pub true_return: f64,
    pub loss: f64,
    pub epsilon: f64,
}

/// One row of the per-agent shaping diagnostics log.
#[derive(Debug, Clone)]
pub struct ShapingLog {
    pub episode: usize,
    pub pred_return: f64,
    pub true_return: f64,
    pub affine_pred: f64,
    pub proto_loss: f64,
}

/// Everything a finished run reports.
pub struct TrainResult {
    pub training_rows: Vec<EpisodeLog>,
    pub shaping_vda: Vec<ShapingLog>,
    pub shaping_rda: Vec<ShapingLog>,
}

struct AgentTrainState {
    buffer: ReplayBuffer,
    target: ParamSet,
    policy_adam: Adam,
    reward_adam: Adam,
    calibrator: AffineCalibrator,
    prototypes: Option<PrototypePair>,
    updates: usize,
}

/// Trains both agents on one graph.
pub struct Trainer {
    pub config: TrainConfig,
    pub model: CutterModel,
    graph: Graph,
    budget: usize,
    weights: PenaltyWeights,
    schedule: EpsilonSchedule,
    env_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    vda: AgentTrainState,
    rda: AgentTrainState,
    current_iset: Option<ImportanceSet>,
}

impl Trainer {
    pub fn new(graph: Graph, config: TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        if graph.pairwise_connectivity() == 0 {
            return Err(TrainError::Graph(GraphError::ZeroBaseline));
        }
        let n = graph.alive_count();
        let budget = match config.budget_override {
            Some(b) => b,
            None => CompressionSpec::removal_budget(config.rho, n)?,
        };
        if budget == 0 || budget > n {
            return Err(TrainError::Config(ConfigError {
                field: "budget",
                reason: alloc::format!("episode budget {budget} must be in 1..={n}"),
            }));
        }
        let weights = config.weights()?;
        let mut init_rng = stream(config.seed, Stream::Init);
        let model = CutterModel::new(config.dims, &mut init_rng);
        let schedule = EpsilonSchedule {
            eps_start: config.eps_start,
            eps_end: config.eps_end,
            decay_episodes: ceil_frac(config.eps_decay_frac, config.episodes).max(1),
        };
        let agent_state = |kind: AgentKind, model: &CutterModel| AgentTrainState {
            buffer: ReplayBuffer::new(config.buffer_cap),
            target: model.params.clone(),
            policy_adam: Adam::new(&model.params, model.policy_slots(kind)),
            reward_adam: Adam::new(&model.params, model.reward_slots(kind)),
            calibrator: AffineCalibrator::new(),
            prototypes: None,
            updates: 0,
        };
        let vda = agent_state(AgentKind::Vda, &model);
        let rda = agent_state(AgentKind::Rda, &model);
        Ok(Trainer {
            env_rng: stream(config.seed, Stream::Env),
            replay_rng: stream(config.seed, Stream::Replay),
            config,
            model,
            graph,
            budget,
            weights,
            schedule,
            vda,
            rda,
            current_iset: None,
        })
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    fn agent_state(&mut self, kind: AgentKind) -> &mut AgentTrainState {
        match kind {
            AgentKind::Vda => &mut self.vda,
            AgentKind::Rda => &mut self.rda,
        }
    }

    /// Runs the configured number of episodes (rounds).
    pub fn run(&mut self) -> Result<TrainResult, TrainError> {
        let mut result = TrainResult {
            training_rows: Vec::new(),
            shaping_vda: Vec::new(),
            shaping_rda: Vec::new(),
        };
        for ep in 0..self.config.episodes {
            self.run_round(ep, &mut result)?;
        }
        Ok(result)
    }

    fn run_round(&mut self, ep: usize, result: &mut TrainResult) -> Result<(), TrainError> {
        let eps = self.schedule.value(ep);

        // Phase I: VDA leads, RDA follows on the identical action list.
        let lead = phase_vda_lead(
            &self.model,
            &self.graph,
            self.budget,
            eps,
            &self.weights,
            ep,
            &mut self.env_rng,
        )?;
        let vda_active = lead.vda_active.clone();
        self.vda.buffer.push(lead.vda_active);
        self.rda.buffer.push(lead.rda_follow);
        self.current_iset = Some(lead.iset);

        // Phase II: RDA leads conditioned on the fresh importance set.
        let iset = self.current_iset.as_ref().expect("set in phase I");
        let follow = phase_rda_lead(
            &self.model,
            &self.graph,
            self.budget,
            eps,
            iset,
            &self.weights,
            &mut self.env_rng,
        )?;
        let rda_active = follow.rda_active.clone();
        self.rda.buffer.push(follow.rda_active);
        self.vda.buffer.push(follow.vda_follow);

        for kind in [AgentKind::Vda, AgentKind::Rda] {
            let active = match kind {
                AgentKind::Vda => &vda_active,
                AgentKind::Rda => &rda_active,
            };
            let loss = self.update_agent(kind, ep, active, result)?;
            result.training_rows.push(EpisodeLog {
                episode: ep,
                agent: kind,
                true_return: active.true_return,
                loss,
                epsilon: eps,
            });
        }
        Ok(())
    }

    /// All per-episode updates for one agent; returns the last TD loss.
    fn update_agent(
        &mut self,
        kind: AgentKind,
        ep: usize,
        active: &Arc<TrajectoryRecord>,
        result: &mut TrainResult,
    ) -> Result<f64, TrainError> {
        let gamma = self.config.gamma;
        let lr = self.config.learning_rate;
        let batch_size = self.config.batch_size;
        let sync = self.config.target_sync;
        let use_shaping = self.config.shaping;

        let mut last_loss = 0.0;
        for _ in 0..self.config.updates_per_episode {
            let batch = {
                let buffer = match kind {
                    AgentKind::Vda => &self.vda.buffer,
                    AgentKind::Rda => &self.rda.buffer,
                };
                buffer.sample_transitions(&mut self.replay_rng, batch_size)
            };
            if batch.is_empty() {
                break;
            }
            let shaped = self.shaped_rewards(kind, &batch, use_shaping)?;
            let state = match kind {
                AgentKind::Vda => &mut self.vda,
                AgentKind::Rda => &mut self.rda,
            };
            last_loss = dqn_update(
                &mut self.model,
                &state.target,
                kind,
                &batch,
                gamma,
                &shaped,
                &mut state.policy_adam,
                lr,
            )?;
            state.updates += 1;
            if state.updates % sync == 0 {
                state.target = self.model.params.clone();
            }
        }

        if use_shaping {
            self.refit_calibrator(kind)?;
            let proto_loss = self.reward_update(kind)?;
            if (ep + 1) % self.config.proto_refresh == 0 {
                self.refresh_prototypes(kind)?;
            }
            let pred = shaping::predicted_return(active, &self.model, &self.model.params)?;
            let cal = &match kind {
                AgentKind::Vda => &self.vda,
                AgentKind::Rda => &self.rda,
            }
            .calibrator;
            let row = ShapingLog {
                episode: ep,
                pred_return: pred,
                true_return: active.true_return,
                affine_pred: cal.apply(pred),
                proto_loss,
            };
            match kind {
                AgentKind::Vda => result.shaping_vda.push(row),
                AgentKind::Rda => result.shaping_rda.push(row),
            }
        }
        Ok(last_loss)
    }

    /// Per-transition rewards for a DQN batch: the reward network's output
    /// on the stored embeddings when shaping is on, otherwise the sparse
    /// terminal return.
    fn shaped_rewards(
        &self,
        kind: AgentKind,
        batch: &[(Arc<TrajectoryRecord>, usize)],
        use_shaping: bool,
    ) -> Result<Vec<f64>, TrainError> {
        let mut out = Vec::with_capacity(batch.len());
        for (traj, t) in batch {
            let r = if use_shaping {
                let e = &traj.embeds[*t];
                models::reward_step(&self.model, &self.model.params, kind, &e.graph, &e.action)?
            } else if *t + 1 == traj.len() {
                traj.true_return
            } else {
                0.0
            };
            out.push(r);
        }
        Ok(out)
    }

    /// Refits (alpha, beta) on the whole buffer with the current reward
    /// network; a still-degenerate fit keeps the previous calibration.
    fn refit_calibrator(&mut self, kind: AgentKind) -> Result<(), TrainError> {
        let trajs = match kind {
            AgentKind::Vda => self.vda.buffer.as_slice(),
            AgentKind::Rda => self.rda.buffer.as_slice(),
        };
        let mut pairs = Vec::with_capacity(trajs.len());
        for traj in &trajs {
            let pred = shaping::predicted_return(traj, &self.model, &self.model.params)?;
            pairs.push((pred, traj.true_return));
        }
        let cal = &mut self.agent_state(kind).calibrator;
        cal.set_pairs(pairs);
        match cal.fit() {
            Ok(_) | Err(ShapingError::DegenerateFit) => Ok(()),
            Err(e) => Err(e.into()),
        }
    }

    /// One Adam step on the combined reward objective; returns the
    /// prototype term for diagnostics.
    fn reward_update(&mut self, kind: AgentKind) -> Result<f64, TrainError> {
        let batch = {
            let count = self.config.reward_batch;
            let state = match kind {
                AgentKind::Vda => &self.vda,
                AgentKind::Rda => &self.rda,
            };
            state.buffer.sample_trajs(&mut self.replay_rng, count)
        };
        if batch.is_empty() {
            return Ok(0.0);
        }
        let cfg = ShapingConfig {
            lambda_proto: self.config.lambda_proto,
        };
        let (cal, protos) = {
            let state = match kind {
                AgentKind::Vda => &self.vda,
                AgentKind::Rda => &self.rda,
            };
            (state.calibrator.clone(), state.prototypes.clone())
        };
        let mut tape = Tape::new();
        let total = shaping::total_reward_loss(
            &mut tape,
            &self.model,
            &self.model.params,
            kind,
            &batch,
            &cal,
            protos.as_ref(),
            &cfg,
        )?;
        let loss = total.loss;
        let proto_term = total.proto_term;
        tape.backward(loss, &mut self.model.params)?;
        let state = match kind {
            AgentKind::Vda => &mut self.vda,
            AgentKind::Rda => &mut self.rda,
        };
        state.reward_adam.step(&mut self.model.params, self.config.learning_rate)?;
        Ok(proto_term)
    }

    fn refresh_prototypes(&mut self, kind: AgentKind) -> Result<(), TrainError> {
        let buffer = match kind {
            AgentKind::Vda => self.vda.buffer.as_slice(),
            AgentKind::Rda => self.rda.buffer.as_slice(),
        };
        match shaping::extract_prototypes(
            &buffer,
            self.config.proto_k,
            self.config.proto_window,
            self.config.proto_refresh,
            &self.model,
            &self.model.params,
            kind,
        ) {
            Ok(pair) => {
                self.agent_state(kind).prototypes = Some(pair);
                Ok(())
            }
            // not enough scored trajectories yet
            Err(ShapingError::InsufficientBuffer { .. }) => Ok(()),
            Err(e) => Err(e.into()),
        }
    }
}

/// Result of a greedy compression rollout.
pub struct CompressOutcome {
    /// Nodes removed, in removal order (compact ids).
    pub removed: Vec<u32>,
    /// The compressed snapshot.
    pub graph: Graph,
    /// The vital prior the rollout was conditioned on.
    pub importance: alloc::collections::BTreeSet<u32>,
}

/// Compression inference, self-contained: a greedy vital-agent rollout
/// first builds the importance set (the redundancy policy was trained
/// conditioned on one, and the deletion penalty only protects marked
/// nodes), then the redundancy agent runs greedily (epsilon = 0) under
/// that prior for `ceil((1 - rho) * N)` removals.
pub fn compress(model: &CutterModel, graph: &Graph, rho: f64) -> Result<CompressOutcome, TrainError> {
    let budget = CompressionSpec::removal_budget(rho, graph.alive_count())?;
    if budget == 0 {
        return Ok(CompressOutcome {
            removed: Vec::new(),
            graph: graph.clone(),
            importance: alloc::collections::BTreeSet::new(),
        });
    }
    let weights = PenaltyWeights::default();
    let mut probe_rng = stream(0, Stream::Env); // never consumed at eps = 0
    let vda_probe = crate::rl::run_episode(
        model,
        AgentKind::Vda,
        graph,
        budget,
        0.0,
        Arc::new(alloc::collections::BTreeSet::new()),
        &weights,
        &mut probe_rng,
    )?;
    let importance = crate::explore::importance_set(&vda_probe, 0)?.nodes;

    let mut current = graph.clone();
    let mut removed = Vec::with_capacity(budget);
    for _ in 0..budget {
        if current.alive_count() == 0 {
            break;
        }
        let q = models::q_values(model, &model.params, AgentKind::Rda, &current, Some(&importance))?;
        let mut best = q[0];
        for &(node, score) in &q[1..] {
            if score > best.1 {
                best = (node, score);
            }
        }
        current = current.remove_nodes(&[best.0])?;
        removed.push(best.0);
    }
    Ok(CompressOutcome {
        removed,
        graph: current,
        importance,
    })
}

/// Uniform-random deletion baseline at the same compression ratio.
pub fn compress_random<R: rand::Rng>(
    graph: &Graph,
    rho: f64,
    rng: &mut R,
) -> Result<CompressOutcome, TrainError> {
    let budget = CompressionSpec::removal_budget(rho, graph.alive_count())?;
    let mut alive: Vec<u32> = graph.alive_nodes().collect();
    let mut removed = Vec::with_capacity(budget);
    for _ in 0..budget.min(alive.len()) {
        let i = rng.random_range(0..alive.len());
        removed.push(alive.swap_remove(i));
    }
    let compressed = graph.remove_nodes(&removed)?;
    Ok(CompressOutcome {
        removed,
        graph: compressed,
        importance: alloc::collections::BTreeSet::new(),
    })
}
