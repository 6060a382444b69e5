//! Run configuration: flat `key = value` files, CLI-flag overrides, and
//! the effective-settings dump.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use cutter_core::models::ModelDims;
use cutter_core::trainer::TrainConfig;

/// Hyperparameter flags shared by `train` and `compress`. Every value
/// falls back to the config file, then to the built-in default.
#[derive(Debug, Clone, Args)]
pub struct HyperFlags {
    /// Flat `key = value` config file (`#` comments allowed).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; all randomness derives from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of nodes retained by compression, in (0, 1].
    #[arg(long)]
    pub rho: Option<f64>,
    /// Training rounds (each round runs both active-follow phases).
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Episode budget override (default: the compression budget).
    #[arg(long)]
    pub budget: Option<usize>,
    /// Embedding width d.
    #[arg(long)]
    pub embed: Option<usize>,
    /// Task-encoder depth (layers).
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub eps_start: Option<f64>,
    #[arg(long)]
    pub eps_end: Option<f64>,
    /// Fraction of episodes over which epsilon decays.
    #[arg(long)]
    pub eps_decay_frac: Option<f64>,
    /// Prototype count K per side.
    #[arg(long)]
    pub proto_k: Option<usize>,
    /// Prototype context-window length n.
    #[arg(long)]
    pub proto_window: Option<usize>,
    #[arg(long)]
    pub lambda_proto: Option<f64>,
    #[arg(long)]
    pub omega_conn: Option<f64>,
    #[arg(long)]
    pub omega_delete: Option<f64>,
    #[arg(long)]
    pub omega_embed: Option<f64>,
    /// Replay capacity in trajectories per agent.
    #[arg(long)]
    pub buffer_cap: Option<usize>,
    /// DQN minibatch size in transitions.
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Target-network sync interval in updates.
    #[arg(long)]
    pub target_sync: Option<usize>,
    /// Prototype refresh interval in episodes.
    #[arg(long)]
    pub proto_refresh: Option<usize>,
    #[arg(long)]
    pub updates_per_episode: Option<usize>,
    /// Trajectories per reward-network update.
    #[arg(long)]
    pub reward_batch: Option<usize>,
    /// Reward shaping on/off.
    #[arg(long)]
    pub shaping: Option<bool>,
    #[arg(long)]
    pub q_hidden1: Option<usize>,
    #[arg(long)]
    pub q_hidden2: Option<usize>,
    #[arg(long)]
    pub reward_hidden: Option<usize>,
    /// Print the effective settings and exit.
    #[arg(long)]
    pub dump_config: bool,
}

pub const CONFIG_KEYS: &[&str] = &[
    "seed",
    "rho",
    "episodes",
    "budget",
    "embed",
    "layers",
    "gamma",
    "eps_start",
    "eps_end",
    "eps_decay_frac",
    "proto_k",
    "proto_window",
    "lambda_proto",
    "omega_conn",
    "omega_delete",
    "omega_embed",
    "buffer_cap",
    "batch_size",
    "learning_rate",
    "target_sync",
    "proto_refresh",
    "updates_per_episode",
    "reward_batch",
    "shaping",
    "q_hidden1",
    "q_hidden2",
    "reward_hidden",
];

/// Parses a flat `key = value` file. Unknown keys are rejected.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected 'key = value', got '{raw}'", idx + 1);
        };
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            bail!("config line {}: unknown key '{key}'", idx + 1);
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn lookup<T: std::str::FromStr>(
    file: &BTreeMap<String, String>,
    key: &str,
    flag: Option<T>,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match file.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|_| anyhow::anyhow!("invalid config: {key}: cannot parse '{raw}'")),
        None => Ok(default),
    }
}

/// Resolves the effective configuration: defaults, then file, then flags.
pub fn build_train_config(flags: &HyperFlags) -> Result<TrainConfig> {
    let file = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            parse_config_file(&text)?
        }
        None => BTreeMap::new(),
    };
    let d = TrainConfig::default();
    let dd = ModelDims::default();
    let budget_default = flags.budget;
    let config = TrainConfig {
        seed: lookup(&file, "seed", flags.seed, d.seed)?,
        rho: lookup(&file, "rho", flags.rho, d.rho)?,
        episodes: lookup(&file, "episodes", flags.episodes, d.episodes)?,
        budget_override: match budget_default {
            Some(b) => Some(b),
            None => file
                .get("budget")
                .map(|raw| {
                    raw.parse()
                        .map_err(|_| anyhow::anyhow!("invalid config: budget: cannot parse '{raw}'"))
                })
                .transpose()?,
        },
        dims: ModelDims {
            embed: lookup(&file, "embed", flags.embed, dd.embed)?,
            layers: lookup(&file, "layers", flags.layers, dd.layers)?,
            q_hidden: (
                lookup(&file, "q_hidden1", flags.q_hidden1, dd.q_hidden.0)?,
                lookup(&file, "q_hidden2", flags.q_hidden2, dd.q_hidden.1)?,
            ),
            reward_hidden: lookup(&file, "reward_hidden", flags.reward_hidden, dd.reward_hidden)?,
        },
        gamma: lookup(&file, "gamma", flags.gamma, d.gamma)?,
        eps_start: lookup(&file, "eps_start", flags.eps_start, d.eps_start)?,
        eps_end: lookup(&file, "eps_end", flags.eps_end, d.eps_end)?,
        eps_decay_frac: lookup(&file, "eps_decay_frac", flags.eps_decay_frac, d.eps_decay_frac)?,
        proto_k: lookup(&file, "proto_k", flags.proto_k, d.proto_k)?,
        proto_window: lookup(&file, "proto_window", flags.proto_window, d.proto_window)?,
        lambda_proto: lookup(&file, "lambda_proto", flags.lambda_proto, d.lambda_proto)?,
        omega: [
            lookup(&file, "omega_conn", flags.omega_conn, d.omega[0])?,
            lookup(&file, "omega_delete", flags.omega_delete, d.omega[1])?,
            lookup(&file, "omega_embed", flags.omega_embed, d.omega[2])?,
        ],
        buffer_cap: lookup(&file, "buffer_cap", flags.buffer_cap, d.buffer_cap)?,
        batch_size: lookup(&file, "batch_size", flags.batch_size, d.batch_size)?,
        learning_rate: lookup(&file, "learning_rate", flags.learning_rate, d.learning_rate)?,
        target_sync: lookup(&file, "target_sync", flags.target_sync, d.target_sync)?,
        proto_refresh: lookup(&file, "proto_refresh", flags.proto_refresh, d.proto_refresh)?,
        updates_per_episode: lookup(
            &file,
            "updates_per_episode",
            flags.updates_per_episode,
            d.updates_per_episode,
        )?,
        reward_batch: lookup(&file, "reward_batch", flags.reward_batch, d.reward_batch)?,
        shaping: lookup(&file, "shaping", flags.shaping, d.shaping)?,
    };
    config.validate()?;
    Ok(config)
}

/// Effective settings as `key = value` lines.
pub fn dump_config(c: &TrainConfig) -> String {
    let mut out = String::new();
    let mut push = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    push("seed", c.seed.to_string());
    push("rho", c.rho.to_string());
    push("episodes", c.episodes.to_string());
    push(
        "budget",
        c.budget_override
            .map(|b| b.to_string())
            .unwrap_or_else(|| "auto".to_string()),
    );
    push("embed", c.dims.embed.to_string());
    push("layers", c.dims.layers.to_string());
    push("q_hidden1", c.dims.q_hidden.0.to_string());
    push("q_hidden2", c.dims.q_hidden.1.to_string());
    push("reward_hidden", c.dims.reward_hidden.to_string());
    push("gamma", c.gamma.to_string());
    push("eps_start", c.eps_start.to_string());
    push("eps_end", c.eps_end.to_string());
    push("eps_decay_frac", c.eps_decay_frac.to_string());
    push("proto_k", c.proto_k.to_string());
    push("proto_window", c.proto_window.to_string());
    push("lambda_proto", c.lambda_proto.to_string());
    push("omega_conn", c.omega[0].to_string());
    push("omega_delete", c.omega[1].to_string());
    push("omega_embed", c.omega[2].to_string());
    push("buffer_cap", c.buffer_cap.to_string());
    push("batch_size", c.batch_size.to_string());
    push("learning_rate", c.learning_rate.to_string());
    push("target_sync", c.target_sync.to_string());
    push("proto_refresh", c.proto_refresh.to_string());
    push("updates_per_episode", c.updates_per_episode.to_string());
    push("reward_batch", c.reward_batch.to_string());
    push("shaping", c.shaping.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_flags() -> HyperFlags {
        HyperFlags {
            config: None,
            seed: None,
            rho: None,
            episodes: None,
            budget: None,
            embed: None,
            layers: None,
            gamma: None,
            eps_start: None,
            eps_end: None,
            eps_decay_frac: None,
            proto_k: None,
            proto_window: None,
            lambda_proto: None,
            omega_conn: None,
            omega_delete: None,
            omega_embed: None,
            buffer_cap: None,
            batch_size: None,
            learning_rate: None,
            target_sync: None,
            proto_refresh: None,
            updates_per_episode: None,
            reward_batch: None,
            shaping: None,
            q_hidden1: None,
            q_hidden2: None,
            reward_hidden: None,
            dump_config: false,
        }
    }

    #[test]
    fn defaults_flow_through() {
        let c = build_train_config(&no_flags()).unwrap();
        assert_eq!(c.rho, 0.5);
        assert_eq!(c.dims.embed, 64);
    }

    #[test]
    fn file_values_and_flag_overrides() {
        let file = "rho = 0.7\nepisodes = 42 # comment\n\n# full line comment\nembed = 16\n";
        let map = parse_config_file(file).unwrap();
        assert_eq!(map["rho"], "0.7");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, file).unwrap();
        let mut flags = no_flags();
        flags.config = Some(path);
        flags.episodes = Some(7); // flag wins over file
        let c = build_train_config(&flags).unwrap();
        assert_eq!(c.rho, 0.7);
        assert_eq!(c.episodes, 7);
        assert_eq!(c.dims.embed, 16);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(parse_config_file("nope = 3\n").is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "rho = banana\n").unwrap();
        let mut flags = no_flags();
        flags.config = Some(path);
        let err = build_train_config(&flags).unwrap_err().to_string();
        assert!(err.contains("rho"), "{err}");
    }

    #[test]
    fn validation_errors_name_the_field() {
        let mut flags = no_flags();
        flags.rho = Some(2.0);
        let err = build_train_config(&flags).unwrap_err().to_string();
        assert!(err.contains("rho"), "{err}");
    }

    #[test]
    fn dump_lists_every_documented_key() {
        let dump = dump_config(&TrainConfig::default());
        for key in CONFIG_KEYS {
            assert!(dump.contains(key), "missing {key}");
        }
    }
}
