//! The two-phase active–follow protocol coupling the agents.
//!
//! Phase I: the vital agent rolls out, its highest-Q actions form the
//! importance set, and the redundancy agent replays the identical action
//! sequence scored under its own objective. Phase II: the redundancy
//! agent leads conditioned on that importance set while the vital agent
//! follows. Every phase therefore feeds both buffers.

use alloc::collections::BTreeSet;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;

use crate::graph::Graph;
use crate::models::{AgentKind, CutterModel};
use crate::rl::{replay_episode, run_episode, RlError, TrajectoryRecord};
use crate::shaping::PenaltyWeights;

/// The top-15% actions of a vital-agent trajectory, by recorded Q value.
#[derive(Debug, Clone)]
pub struct ImportanceSet {
    pub nodes: BTreeSet<u32>,
    pub source_episode: usize,
}

impl ImportanceSet {
    pub fn shared(self) -> Arc<BTreeSet<u32>> {
        Arc::new(self.nodes)
    }
}

/// `ceil(0.15 * len)` in exact integer arithmetic.
fn top15_count(len: usize) -> usize {
    (15 * len + 99) / 100
}

/// Selects the `ceil(0.15 T)` actions with the highest recorded Q values
/// (ties toward the earlier step).
pub fn importance_set(
    traj: &TrajectoryRecord,
    source_episode: usize,
) -> Result<ImportanceSet, RlError> {
    if traj.is_empty() {
        return Err(RlError::NoAliveNodes);
    }
    if traj.q_taken.len() != traj.len() {
        return Err(RlError::MissingQValues);
    }
    let keep = top15_count(traj.len());
    let mut order: Vec<usize> = (0..traj.len()).collect();
    order.sort_by(|&a, &b| {
        traj.q_taken[b]
            .partial_cmp(&traj.q_taken[a])
            .expect("Q values are finite")
            .then(a.cmp(&b))
    });
    let nodes = order[..keep].iter().map(|&t| traj.actions[t]).collect();
    Ok(ImportanceSet {
        nodes,
        source_episode,
    })
}

/// Output of phase I.
pub struct VdaLead {
    pub vda_active: Arc<TrajectoryRecord>,
    pub iset: ImportanceSet,
    pub rda_follow: Arc<TrajectoryRecord>,
}

/// Phase I: VDA leads, RDA follows the identical action list with its own
/// encoder and objective (the fresh importance set is both its
/// conditioning channel and its vital set).
#[allow(clippy::too_many_arguments)]
pub fn phase_vda_lead<R: Rng>(
    model: &CutterModel,
    start: &Graph,
    budget: usize,
    eps: f64,
    weights: &PenaltyWeights,
    episode: usize,
    rng: &mut R,
) -> Result<VdaLead, RlError> {
    let vda_active = run_episode(
        model,
        AgentKind::Vda,
        start,
        budget,
        eps,
        Arc::new(BTreeSet::new()),
        weights,
        rng,
    )?;
    let iset = importance_set(&vda_active, episode)?;
    let rda_follow = replay_episode(
        model,
        AgentKind::Rda,
        start,
        &vda_active.actions,
        Arc::new(iset.nodes.clone()),
        weights,
    )?;
    Ok(VdaLead {
        vda_active: Arc::new(vda_active),
        iset,
        rda_follow: Arc::new(rda_follow),
    })
}

/// Output of phase II.
pub struct RdaLead {
    pub rda_active: Arc<TrajectoryRecord>,
    pub vda_follow: Arc<TrajectoryRecord>,
}

/// Phase II: RDA leads conditioned on the importance set from the
/// immediately preceding phase I; VDA replays and scores the sequence
/// under the connectivity-drop objective.
pub fn phase_rda_lead<R: Rng>(
    model: &CutterModel,
    start: &Graph,
    budget: usize,
    eps: f64,
    iset: &ImportanceSet,
    weights: &PenaltyWeights,
    rng: &mut R,
) -> Result<RdaLead, RlError> {
    let cond = Arc::new(iset.nodes.clone());
    let rda_active = run_episode(
        model,
        AgentKind::Rda,
        start,
        budget,
        eps,
        cond,
        weights,
        rng,
    )?;
    let vda_follow = replay_episode(
        model,
        AgentKind::Vda,
        start,
        &rda_active.actions,
        Arc::new(BTreeSet::new()),
        weights,
    )?;
    Ok(RdaLead {
        rda_active: Arc::new(rda_active),
        vda_follow: Arc::new(vda_follow),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top15_examples() {
        assert_eq!(top15_count(20), 3);
        assert_eq!(top15_count(1), 1);
        assert_eq!(top15_count(7), 2); // ceil(1.05)
        assert_eq!(top15_count(100), 15);
    }
}
