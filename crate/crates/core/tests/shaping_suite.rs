//! True-return arithmetic, affine alignment, prototype shaping, and the
//! order/affine policy-invariance properties.

use std::collections::BTreeSet;
use std::sync::Arc;

use cutter_core::graph::Graph;
use cutter_core::models::{AgentKind, CutterModel, ModelDims};
use cutter_core::nn::Tape;
use cutter_core::rl::{StepEmbed, TrajectoryRecord, TrajectorySource};
use cutter_core::rng::{stream, Stream};
use cutter_core::shaping::{
    extract_prototypes, predicted_return, prototype_target, rda_true_return, reward_net_loss,
    total_reward_loss, vda_true_return, AffineCalibrator, PenaltyWeights, PrototypePair,
    ShapingConfig, ShapingError,
};

use rand::Rng;

fn complete(n: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for v in u + 1..n as u32 {
            edges.push((u, v));
        }
    }
    Graph::from_edges(n, &edges)
}

fn tiny_model(seed: u64) -> CutterModel {
    let dims = ModelDims {
        embed: 3,
        layers: 1,
        q_hidden: (4, 3),
        reward_hidden: 3,
    };
    CutterModel::new(dims, &mut stream(seed, Stream::Init))
}

/// Bare trajectory carrying only what the shaping losses read.
fn stub_traj(
    agent: AgentKind,
    true_return: f64,
    embeds: Vec<(Vec<f64>, Vec<f64>)>,
    step_true: Vec<f64>,
) -> Arc<TrajectoryRecord> {
    let t = embeds.len();
    Arc::new(TrajectoryRecord {
        agent,
        source: TrajectorySource::Active,
        states: Vec::new(),
        actions: vec![0; t],
        q_taken: Vec::new(),
        step_true,
        embeds: embeds
            .into_iter()
            .map(|(graph, action)| StepEmbed { graph, action })
            .collect(),
        true_return,
        vital: Arc::new(BTreeSet::new()),
    })
}

#[test]
fn vda_true_return_examples() {
    let k4 = complete(4);
    assert_eq!(vda_true_return(&k4, &k4).unwrap(), 0.0);
    let shattered = k4.remove_nodes(&[0, 1, 2]).unwrap();
    assert_eq!(vda_true_return(&k4, &shattered).unwrap(), 1.0);
    let minus_one = k4.remove_nodes(&[3]).unwrap();
    assert_eq!(vda_true_return(&k4, &minus_one).unwrap(), 0.5);
    let edgeless = Graph::from_edges(3, &[]);
    assert!(matches!(
        vda_true_return(&edgeless, &edgeless),
        Err(ShapingError::DegenerateGraph)
    ));
}

#[test]
fn rda_true_return_examples() {
    let m = tiny_model(3);
    let k4 = complete(4);
    let vital: BTreeSet<u32> = [0u32, 1].into_iter().collect();
    let w = PenaltyWeights::default();

    // no removals: every penalty zero
    let r = rda_true_return(&k4, &k4, &vital, &BTreeSet::new(), &w, &m, &m.params, None).unwrap();
    assert_eq!(r, 1.0);

    // vital wiped out and graph fully shattered: all penalties ~1
    let all: BTreeSet<u32> = (0u32..4).collect();
    let empty = k4.remove_nodes(&[0, 1, 2, 3]).unwrap();
    let r = rda_true_return(&k4, &empty, &vital, &all, &w, &m, &m.params, None).unwrap();
    assert!(r < 1e-9, "expected ~0, got {r}");

    // connectivity-only weights reduce to the complement of the drop
    let w_conn = PenaltyWeights::new(1.0, 0.0, 0.0).unwrap();
    let minus_nonvital = k4.remove_nodes(&[3]).unwrap();
    let removed: BTreeSet<u32> = [3u32].into_iter().collect();
    let r = rda_true_return(&k4, &minus_nonvital, &vital, &removed, &w_conn, &m, &m.params, None)
        .unwrap();
    assert_eq!(r, 0.5);

    assert!(matches!(
        rda_true_return(&k4, &k4, &BTreeSet::new(), &BTreeSet::new(), &w, &m, &m.params, None),
        Err(ShapingError::EmptyVital)
    ));
}

#[test]
fn penalty_weights_validation() {
    assert!(PenaltyWeights::new(0.5, 0.3, 0.2).is_ok());
    assert!(PenaltyWeights::new(0.5, 0.6, 0.2).is_err());
    assert!(PenaltyWeights::new(-0.1, 0.9, 0.2).is_err());
    let d = PenaltyWeights::default();
    assert!((d.conn + d.delete + d.embed - 1.0).abs() < 1e-9);
}

#[test]
fn predicted_return_is_sum_of_step_rewards() {
    let m = tiny_model(9);
    // empty trajectory predicts 0
    let empty = stub_traj(AgentKind::Vda, 0.0, vec![], vec![]);
    assert_eq!(predicted_return(&empty, &m, &m.params).unwrap(), 0.0);

    // zero reward weights predict 0 regardless of embeddings
    let mut zeroed = m.clone();
    for slot in 0..zeroed.params.len() {
        if zeroed.params.name(slot).contains(".reward.") {
            zeroed.params.value_mut(slot).fill(0.0);
        }
    }
    let traj = stub_traj(
        AgentKind::Vda,
        0.5,
        vec![
            (vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6]),
            (vec![-0.2, 0.1, 0.0], vec![0.3, -0.4, 0.2]),
            (vec![0.7, -0.1, 0.2], vec![0.0, 0.1, -0.3]),
        ],
        vec![0.1, 0.2, 0.2],
    );
    assert_eq!(predicted_return(&traj, &zeroed, &zeroed.params).unwrap(), 0.0);

    // equals the manual sum of three independent step evaluations
    let manual: f64 = traj
        .embeds
        .iter()
        .map(|e| {
            cutter_core::models::reward_step(&m, &m.params, AgentKind::Vda, &e.graph, &e.action)
                .unwrap()
        })
        .sum();
    let got = predicted_return(&traj, &m, &m.params).unwrap();
    assert!((got - manual).abs() < 1e-15);
}

#[test]
fn affine_fit_identity_and_planted_line() {
    let mut cal = AffineCalibrator::new();
    cal.set_pairs(vec![(0.0, 0.0), (1.0, 1.0)]);
    let (a, b) = cal.fit().unwrap();
    assert!((a - 1.0).abs() < 1e-12);
    assert!(b.abs() < 1e-12);

    // noiseless planted line true = 2*pred + 0.3
    let mut cal = AffineCalibrator::new();
    let pairs: Vec<(f64, f64)> = (0..20)
        .map(|i| {
            let p = -1.0 + i as f64 * 0.1;
            (p, 2.0 * p + 0.3)
        })
        .collect();
    cal.set_pairs(pairs);
    let (a, b) = cal.fit().unwrap();
    assert!((a - 2.0).abs() < 1e-6);
    assert!((b - 0.3).abs() < 1e-6);
}

#[test]
fn affine_fit_range_matching_fallback() {
    // anti-correlated pairs force the OLS slope negative; the fallback
    // maps the pred range [-1, 1] onto the true range [0, 1]
    let mut cal = AffineCalibrator::new();
    cal.set_pairs(vec![(-1.0, 1.0), (0.0, 0.5), (1.0, 0.0)]);
    let (a, b) = cal.fit().unwrap();
    assert_eq!(a, 0.5);
    assert_eq!(b, 0.5);
}

#[test]
fn affine_fit_degenerate_and_frozen() {
    let mut cal = AffineCalibrator::new();
    cal.set_pairs(vec![(0.7, 0.1), (0.7, 0.9)]);
    assert!(matches!(cal.fit(), Err(ShapingError::DegenerateFit)));

    let mut cal = AffineCalibrator::new();
    cal.set_pairs(vec![(0.0, 0.0), (1.0, 2.0)]);
    cal.fit().unwrap();
    cal.frozen = true;
    let (a0, b0) = (cal.alpha, cal.beta);
    cal.set_pairs(vec![(0.0, 5.0), (1.0, -3.0)]);
    let (a, b) = cal.fit().unwrap();
    assert_eq!((a, b), (a0, b0));
}

#[test]
fn affine_freezes_on_stable_slope_or_enough_data() {
    let mut cal = AffineCalibrator::new();
    cal.set_pairs(vec![(0.0, 0.1), (1.0, 0.9)]);
    cal.fit().unwrap();
    assert!(!cal.frozen);
    // same data: slope change 0% -> freezes
    cal.fit().unwrap();
    assert!(cal.frozen);

    let mut cal = AffineCalibrator::new();
    let pairs: Vec<(f64, f64)> = (0..100).map(|i| (i as f64, 3.0 * i as f64)).collect();
    cal.set_pairs(pairs);
    cal.fit().unwrap();
    assert!(cal.frozen, "100 fitted trajectories freeze the calibration");
}

#[test]
fn prototype_target_geometry() {
    let protos = PrototypePair {
        pos: vec![1.0, 0.0, 0.0],
        neg: vec![0.0, 1.0, 0.0],
        k: 1,
        window: 2,
        refresh_interval: 10,
    };
    assert_eq!(prototype_target(&[1.0, 0.0, 0.0], &protos), 1.0);
    assert_eq!(prototype_target(&[0.0, 1.0, 0.0], &protos), -1.0);
    let same = PrototypePair {
        pos: vec![0.5, 0.5, 0.0],
        neg: vec![0.5, 0.5, 0.0],
        k: 1,
        window: 2,
        refresh_interval: 10,
    };
    assert_eq!(prototype_target(&[0.3, -0.8, 0.1], &same), 0.0);
    // zero-vector convention
    assert_eq!(prototype_target(&[0.0, 0.0, 0.0], &protos), 0.0);
}

#[test]
fn extract_prototypes_orders_and_averages() {
    let m = tiny_model(21);
    let e1 = vec![
        (vec![0.5, 0.1, -0.2], vec![0.3, 0.2, 0.1]),
        (vec![0.1, 0.4, 0.2], vec![-0.1, 0.3, 0.5]),
    ];
    let e2 = vec![
        (vec![-0.3, 0.2, 0.4], vec![0.2, -0.5, 0.1]),
        (vec![0.6, 0.0, -0.1], vec![0.4, 0.2, 0.3]),
    ];
    let hi = stub_traj(AgentKind::Vda, 0.9, e1.clone(), vec![0.6, 0.3]);
    let lo = stub_traj(AgentKind::Vda, 0.2, e2.clone(), vec![0.15, 0.05]);
    let buffer = vec![hi, lo];
    let pair = extract_prototypes(&buffer, 1, 2, 10, &m, &m.params, AgentKind::Vda).unwrap();

    // K=1: pos comes from the higher-return trajectory, neg from the lower.
    // hi's critical step is argmax(step_true)=0 with empty history, so the
    // window is the critical pair itself; lo's argmin is step 1, window=[0].
    let enc = |pairs: &[(Vec<f64>, Vec<f64>)], idx: usize| {
        let refs: Vec<(&[f64], &[f64])> =
            vec![(pairs[idx].0.as_slice(), pairs[idx].1.as_slice())];
        cutter_core::models::encode_window(&m, &m.params, AgentKind::Vda, &refs).unwrap()
    };
    assert_eq!(pair.pos, enc(&e1, 0));
    assert_eq!(pair.neg, enc(&e2, 0));

    // insufficient buffer errors
    assert!(matches!(
        extract_prototypes(&buffer, 2, 2, 10, &m, &m.params, AgentKind::Vda),
        Err(ShapingError::InsufficientBuffer { have: 2, need: 4 })
    ));
}

#[test]
fn extract_prototypes_mean_over_k() {
    let m = tiny_model(22);
    let mut rng = stream(5, Stream::Env);
    let mut mk = |ret: f64| {
        let embeds: Vec<(Vec<f64>, Vec<f64>)> = (0..4)
            .map(|_| {
                (
                    (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
                    (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
                )
            })
            .collect();
        let step_true: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..0.3)).collect();
        stub_traj(AgentKind::Rda, ret, embeds, step_true)
    };
    let buffer = vec![mk(0.9), mk(0.8), mk(0.3), mk(0.1)];
    let pair = extract_prototypes(&buffer, 2, 3, 10, &m, &m.params, AgentKind::Rda).unwrap();

    let window_enc = |traj: &TrajectoryRecord, top: bool| {
        let crit = if top {
            traj.step_true
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        } else {
            traj.step_true
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        let lo = if crit == 0 { 0 } else { crit.saturating_sub(3) };
        let hi = if crit == 0 { 1 } else { crit };
        let refs: Vec<(&[f64], &[f64])> = traj.embeds[lo..hi]
            .iter()
            .map(|e| (e.graph.as_slice(), e.action.as_slice()))
            .collect();
        cutter_core::models::encode_window(&m, &m.params, AgentKind::Rda, &refs).unwrap()
    };
    for c in 0..3 {
        let want_pos = (window_enc(&buffer[0], true)[c] + window_enc(&buffer[1], true)[c]) / 2.0;
        let want_neg = (window_enc(&buffer[3], false)[c] + window_enc(&buffer[2], false)[c]) / 2.0;
        assert!((pair.pos[c] - want_pos).abs() < 1e-12);
        assert!((pair.neg[c] - want_neg).abs() < 1e-12);
    }
}

#[test]
fn reward_net_loss_examples() {
    let m = tiny_model(31);
    let cal = AffineCalibrator::new(); // identity

    // pred == 0 (no steps), true == 1 -> loss 1
    let traj = stub_traj(AgentKind::Vda, 1.0, vec![], vec![]);
    let mut tape = Tape::new();
    let loss = reward_net_loss(&mut tape, &m, &m.params, AgentKind::Vda, &[traj], &cal).unwrap();
    assert_eq!(tape.value(loss).get(0, 0), 1.0);

    // hand-computed MSE over a random batch
    let t1 = stub_traj(
        AgentKind::Vda,
        0.8,
        vec![(vec![0.2, -0.1, 0.3], vec![0.1, 0.1, -0.2])],
        vec![0.8],
    );
    let t2 = stub_traj(
        AgentKind::Vda,
        0.4,
        vec![
            (vec![-0.4, 0.2, 0.1], vec![0.5, -0.3, 0.2]),
            (vec![0.3, 0.3, -0.5], vec![-0.2, 0.4, 0.1]),
        ],
        vec![0.1, 0.3],
    );
    let mut want = 0.0;
    for t in [&t1, &t2] {
        let pred = predicted_return(t, &m, &m.params).unwrap();
        let err = t.true_return - cal.apply(pred);
        want += err * err / 2.0;
    }
    let mut tape = Tape::new();
    let loss =
        reward_net_loss(&mut tape, &m, &m.params, AgentKind::Vda, &[t1, t2], &cal).unwrap();
    assert!((tape.value(loss).get(0, 0) - want).abs() < 1e-12);

    // empty batch errors
    let mut tape = Tape::new();
    assert!(matches!(
        reward_net_loss(&mut tape, &m, &m.params, AgentKind::Vda, &[], &cal),
        Err(ShapingError::EmptyBatch)
    ));
}

#[test]
fn total_loss_reduces_to_reward_loss_without_prototypes() {
    let m = tiny_model(33);
    let cal = AffineCalibrator::new();
    let cfg = ShapingConfig { lambda_proto: 0.0 };
    let traj = stub_traj(
        AgentKind::Rda,
        0.6,
        vec![
            (vec![0.2, 0.1, 0.0], vec![0.3, -0.1, 0.2]),
            (vec![0.1, -0.2, 0.4], vec![0.0, 0.2, -0.3]),
        ],
        vec![0.4, 0.2],
    );
    let protos = PrototypePair {
        pos: vec![1.0, 0.0, 0.0],
        neg: vec![0.0, 1.0, 0.0],
        k: 1,
        window: 2,
        refresh_interval: 10,
    };
    let mut tape = Tape::new();
    let total = total_reward_loss(
        &mut tape,
        &m,
        &m.params,
        AgentKind::Rda,
        &[traj.clone()],
        &cal,
        Some(&protos),
        &cfg,
    )
    .unwrap();
    let mut tape2 = Tape::new();
    let plain =
        reward_net_loss(&mut tape2, &m, &m.params, AgentKind::Rda, &[traj], &cal).unwrap();
    assert_eq!(
        tape.value(total.loss).get(0, 0),
        tape2.value(plain).get(0, 0)
    );
    assert_eq!(total.proto_term, 0.0);
}

#[test]
fn total_loss_combines_terms_by_hand() {
    let m = tiny_model(34);
    let cal = AffineCalibrator::new();
    let lambda = 0.5;
    let cfg = ShapingConfig {
        lambda_proto: lambda,
    };
    let n = 2usize;
    let traj = stub_traj(
        AgentKind::Rda,
        0.7,
        vec![
            (vec![0.3, 0.0, -0.1], vec![0.2, 0.2, 0.1]),
            (vec![-0.1, 0.4, 0.2], vec![0.3, -0.2, 0.0]),
            (vec![0.5, 0.1, -0.3], vec![-0.4, 0.1, 0.2]),
        ],
        vec![0.2, 0.3, 0.2],
    );
    let protos = PrototypePair {
        pos: vec![0.6, -0.2, 0.1],
        neg: vec![-0.3, 0.5, 0.2],
        k: 1,
        window: n,
        refresh_interval: 10,
    };
    let mut tape = Tape::new();
    let total = total_reward_loss(
        &mut tape,
        &m,
        &m.params,
        AgentKind::Rda,
        &[traj.clone()],
        &cal,
        Some(&protos),
        &cfg,
    )
    .unwrap();

    // reward term by hand
    let pred = predicted_return(&traj, &m, &m.params).unwrap();
    let reward_term = (traj.true_return - pred) * (traj.true_return - pred);
    // proto term: steps with >= n-1 history, window = pairs [t-n, t)
    let mut proto_sum = 0.0;
    let mut count = 0;
    for t in 0..traj.embeds.len() {
        if t + 1 < n {
            continue;
        }
        let lo = t.saturating_sub(n);
        let refs: Vec<(&[f64], &[f64])> = traj.embeds[lo..t]
            .iter()
            .map(|e| (e.graph.as_slice(), e.action.as_slice()))
            .collect();
        let h = cutter_core::models::encode_window(&m, &m.params, AgentKind::Rda, &refs).unwrap();
        let target = prototype_target(&h, &protos);
        let e = &traj.embeds[t];
        let r = cutter_core::models::reward_step(&m, &m.params, AgentKind::Rda, &e.graph, &e.action)
            .unwrap();
        proto_sum += (r - target) * (r - target);
        count += 1;
    }
    let want = reward_term + lambda * proto_sum / count as f64;
    assert!((tape.value(total.loss).get(0, 0) - want).abs() < 1e-12);
    assert!((total.reward_term - reward_term).abs() < 1e-12);
}

#[test]
fn order_equivalent_returns_preserve_argmax() {
    // Appendix A.1 style: any strictly increasing transform of the
    // returns keeps the argmax trajectory identical.
    let mut rng = stream(0xA1, Stream::Env);
    for trial in 0..1000 {
        let n = rng.random_range(2..10usize);
        let returns: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let c1 = rng.random_range(0.01..2.0);
        let c2 = rng.random_range(0.0..1.5);
        let c3 = rng.random_range(0.0..1.5);
        let transform = |x: f64| c1 * x + c2 * x * x * x + c3 * x.tanh();
        let argmax = |xs: &[f64]| {
            xs.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        let mapped: Vec<f64> = returns.iter().map(|&x| transform(x)).collect();
        assert_eq!(argmax(&returns), argmax(&mapped), "trial {trial}");
    }
}

#[test]
fn affine_map_preserves_policy_ranking() {
    // Appendix A.2 style: for alpha > 0 the full ranking of expected
    // returns over a policy set is invariant.
    let mut rng = stream(0xA2, Stream::Env);
    for trial in 0..1000 {
        let n = rng.random_range(2..8usize);
        // well-separated values so float rounding cannot create ties
        let mut values: Vec<f64> = Vec::new();
        while values.len() < n {
            let v = (rng.random_range(-4000..4000) as f64) * 1e-3;
            if values.iter().all(|&x| (x - v).abs() > 1e-6) {
                values.push(v);
            }
        }
        let alpha = rng.random_range(0.01..10.0);
        let beta = rng.random_range(-5.0..5.0);
        let rank = |xs: &[f64]| {
            let mut idx: Vec<usize> = (0..xs.len()).collect();
            idx.sort_by(|&a, &b| xs[b].partial_cmp(&xs[a]).unwrap().then(a.cmp(&b)));
            idx
        };
        let mapped: Vec<f64> = values.iter().map(|&x| alpha * x + beta).collect();
        assert_eq!(rank(&values), rank(&mapped), "trial {trial}");
    }
}
