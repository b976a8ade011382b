//! Flat `key = value` experiment configuration: parsing, validation,
//! defaults, and canonical serialization (round-trip stable).

use crate::agents::LearnerConfig;
use crate::redistribution::{Aggregator, RedistConfig, SeqArch, TimestepLossMode};
use std::fmt;

/// Environment choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    CoinLine,
    MultiRoom,
    DoorKey,
}

/// Policy optimization algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Ipg,
    Iac,
    Coma,
}

/// Reward redistribution choice.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Redistribution {
    None,
    Rudder,
    Ata,
}

/// Wall-clock reporting mode for the metrics `seconds` column.
///
/// `None` writes zeros, keeping metrics files byte-identical across runs
/// with the same seed; `Wall` records elapsed wall-clock time.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimingMode {
    None,
    Wall,
}

/// Fully resolved experiment configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub agents: usize,
    pub rooms: usize,
    /// Reward increments: `p[j-1]` for `j` simultaneous collectors.
    pub p: Vec<f64>,
    pub horizon: usize,
    pub gamma: f64,
    pub algorithm: Algorithm,
    pub redistribution: Redistribution,
    pub arch: SeqArch,
    pub aggregator: Aggregator,
    pub timestep_loss: TimestepLossMode,
    pub lambda: f64,
    pub attribution: bool,
    pub residual: bool,
    pub layer_norm: bool,
    pub latent: usize,
    pub heads: usize,
    pub model_lr: f64,
    pub model_batch: usize,
    pub model_grad_clip: f64,
    pub min_loss: f64,
    pub retrain_interval: usize,
    pub retrain_max_steps: usize,
    pub warmup_episodes: usize,
    pub buffer_capacity: usize,
    pub episodes: usize,
    pub policy_batch: usize,
    pub policy_lr: f64,
    pub critic_lr: f64,
    pub entropy_coef: f64,
    pub grad_clip: f64,
    pub policy_recurrent: bool,
    pub residual_correction: bool,
    pub seeds: Vec<u64>,
    pub eval_interval: usize,
    pub smooth_window: usize,
    pub out_dir: String,
    pub save_models: bool,
    pub timing: TimingMode,
    pub parallel_seeds: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvKind::CoinLine,
            agents: 2,
            rooms: 2,
            p: vec![0.25, 1.0],
            horizon: 200,
            gamma: 0.99,
            algorithm: Algorithm::Ipg,
            redistribution: Redistribution::None,
            arch: SeqArch::Transformer,
            aggregator: Aggregator::Mean,
            timestep_loss: TimestepLossMode::AllTimesteps,
            lambda: 0.0,
            attribution: false,
            residual: false,
            layer_norm: false,
            latent: 16,
            heads: 2,
            model_lr: 1e-3,
            model_batch: 8,
            model_grad_clip: 5.0,
            min_loss: 1e-3,
            retrain_interval: 50,
            retrain_max_steps: 200,
            warmup_episodes: 100,
            buffer_capacity: 2000,
            episodes: 1000,
            policy_batch: 8,
            policy_lr: 1e-3,
            critic_lr: 1e-3,
            entropy_coef: 0.01,
            grad_clip: 5.0,
            policy_recurrent: false,
            residual_correction: false,
            seeds: vec![0, 1, 2, 3, 4, 5],
            eval_interval: 50,
            smooth_window: 10,
            out_dir: "runs/experiment".to_string(),
            save_models: false,
            timing: TimingMode::None,
            parallel_seeds: false,
        }
    }
}

/// Config parse/validation failure, with the offending line when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "config error at line {n}: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    /// Parses flat `key = value` text ('#' starts a comment). Unknown keys
    /// are rejected; missing keys take defaults; the result is validated.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut arch_given = false;
        let mut p_given = false;
        let mut seen: Vec<String> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::at(line_no, format!("expected key = value, got {line:?}"))
            })?;
            let key = key.trim();
            let value = value.trim();
            if seen.iter().any(|k| k == key) {
                return Err(ConfigError::at(line_no, format!("duplicate key {key}")));
            }
            seen.push(key.to_string());

            let parse_err =
                |what: &str| ConfigError::at(line_no, format!("key {key}: invalid {what} {value:?}"));
            macro_rules! num {
                ($ty:ty, $what:expr) => {
                    value.parse::<$ty>().map_err(|_| parse_err($what))?
                };
            }
            match key {
                "env" => {
                    cfg.env = match value {
                        "coinline" => EnvKind::CoinLine,
                        "multiroom" => EnvKind::MultiRoom,
                        "doorkey" => EnvKind::DoorKey,
                        _ => return Err(parse_err("environment")),
                    }
                }
                "agents" => cfg.agents = num!(usize, "integer"),
                "rooms" => cfg.rooms = num!(usize, "integer"),
                "p" => {
                    cfg.p = value
                        .split(',')
                        .map(|s| s.trim().parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| parse_err("number list"))?;
                    p_given = true;
                }
                "horizon" => cfg.horizon = num!(usize, "integer"),
                "gamma" => cfg.gamma = num!(f64, "number"),
                "algorithm" => {
                    cfg.algorithm = match value {
                        "ipg" => Algorithm::Ipg,
                        "iac" => Algorithm::Iac,
                        "coma" => Algorithm::Coma,
                        _ => return Err(parse_err("algorithm")),
                    }
                }
                "redistribution" => {
                    cfg.redistribution = match value {
                        "none" => Redistribution::None,
                        "rudder" => Redistribution::Rudder,
                        "ata" => Redistribution::Ata,
                        _ => return Err(parse_err("redistribution")),
                    }
                }
                "arch" => {
                    cfg.arch = match value {
                        "transformer" => SeqArch::Transformer,
                        "lstm" => SeqArch::Lstm,
                        _ => return Err(parse_err("architecture")),
                    };
                    arch_given = true;
                }
                "aggregator" => {
                    cfg.aggregator = match value {
                        "mean" => Aggregator::Mean,
                        "linear-attention" => Aggregator::LinearAttention,
                        "multi-layer-attention" => Aggregator::MultiLayerAttention,
                        _ => return Err(parse_err("aggregator")),
                    }
                }
                "timestep_loss" => {
                    cfg.timestep_loss = match value {
                        "all" => TimestepLossMode::AllTimesteps,
                        "final" => TimestepLossMode::FinalOnly,
                        _ => return Err(parse_err("timestep loss mode")),
                    }
                }
                "lambda" => cfg.lambda = num!(f64, "number"),
                "attribution" => cfg.attribution = parse_bool(value).ok_or_else(|| parse_err("bool"))?,
                "residual" => cfg.residual = parse_bool(value).ok_or_else(|| parse_err("bool"))?,
                "layer_norm" => cfg.layer_norm = parse_bool(value).ok_or_else(|| parse_err("bool"))?,
                "latent" => cfg.latent = num!(usize, "integer"),
                "heads" => cfg.heads = num!(usize, "integer"),
                "model_lr" => cfg.model_lr = num!(f64, "number"),
                "model_batch" => cfg.model_batch = num!(usize, "integer"),
                "model_grad_clip" => cfg.model_grad_clip = num!(f64, "number"),
                "min_loss" => cfg.min_loss = num!(f64, "number"),
                "retrain_interval" => cfg.retrain_interval = num!(usize, "integer"),
                "retrain_max_steps" => cfg.retrain_max_steps = num!(usize, "integer"),
                "warmup_episodes" => cfg.warmup_episodes = num!(usize, "integer"),
                "buffer_capacity" => cfg.buffer_capacity = num!(usize, "integer"),
                "episodes" => cfg.episodes = num!(usize, "integer"),
                "policy_batch" => cfg.policy_batch = num!(usize, "integer"),
                "policy_lr" => cfg.policy_lr = num!(f64, "number"),
                "critic_lr" => cfg.critic_lr = num!(f64, "number"),
                "entropy_coef" => cfg.entropy_coef = num!(f64, "number"),
                "grad_clip" => cfg.grad_clip = num!(f64, "number"),
                "policy_recurrent" => {
                    cfg.policy_recurrent = parse_bool(value).ok_or_else(|| parse_err("bool"))?
                }
                "residual_correction" => {
                    cfg.residual_correction = parse_bool(value).ok_or_else(|| parse_err("bool"))?
                }
                "seeds" => {
                    cfg.seeds = value
                        .split(',')
                        .map(|s| s.trim().parse::<u64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| parse_err("seed list"))?;
                }
                "eval_interval" => cfg.eval_interval = num!(usize, "integer"),
                "smooth_window" => cfg.smooth_window = num!(usize, "integer"),
                "out_dir" => cfg.out_dir = value.to_string(),
                "save_models" => {
                    cfg.save_models = parse_bool(value).ok_or_else(|| parse_err("bool"))?
                }
                "timing" => {
                    cfg.timing = match value {
                        "none" => TimingMode::None,
                        "wall" => TimingMode::Wall,
                        _ => return Err(parse_err("timing mode")),
                    }
                }
                "parallel_seeds" => {
                    cfg.parallel_seeds = parse_bool(value).ok_or_else(|| parse_err("bool"))?
                }
                _ => return Err(ConfigError::at(line_no, format!("unknown key {key}"))),
            }
        }

        if !arch_given {
            cfg.arch = match cfg.redistribution {
                Redistribution::Rudder => SeqArch::Lstm,
                _ => SeqArch::Transformer,
            };
        }
        if !p_given {
            cfg.p = match cfg.env {
                EnvKind::CoinLine => vec![0.25, 1.0],
                _ => vec![1.0; cfg.agents],
            };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::general("seed list must be non-empty"));
        }
        if self.agents == 0 {
            return Err(ConfigError::general("agents must be positive"));
        }
        if self.env == EnvKind::CoinLine && self.agents + 1 > 13 {
            return Err(ConfigError::general(
                "coinline needs distinct cells for agents and coin on 13 cells",
            ));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(ConfigError::general(format!(
                "gamma must lie in [0, 1), got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(ConfigError::general(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.lambda > 0.0 && !self.attribution {
            return Err(ConfigError::general(
                "lambda > 0 requires attribution = true (no local targets otherwise)",
            ));
        }
        if self.p.len() < self.agents {
            return Err(ConfigError::general(format!(
                "p lists {} increments for {} agents",
                self.p.len(),
                self.agents
            )));
        }
        if self.horizon == 0 || self.episodes == 0 || self.policy_batch == 0 {
            return Err(ConfigError::general(
                "horizon, episodes and policy_batch must be positive",
            ));
        }
        if self.latent == 0 || self.latent % 2 != 0 {
            return Err(ConfigError::general(format!(
                "latent must be positive and even, got {}",
                self.latent
            )));
        }
        if self.heads == 0 || self.latent % self.heads != 0 {
            return Err(ConfigError::general(format!(
                "latent {} must divide evenly into {} heads",
                self.latent, self.heads
            )));
        }
        if self.rooms == 0 {
            return Err(ConfigError::general("rooms must be positive"));
        }
        if self.buffer_capacity == 0 || self.model_batch == 0 {
            return Err(ConfigError::general(
                "buffer_capacity and model_batch must be positive",
            ));
        }
        if self.eval_interval == 0 || self.smooth_window == 0 {
            return Err(ConfigError::general(
                "eval_interval and smooth_window must be positive",
            ));
        }
        Ok(())
    }

    /// Canonical serialization; parsing it back yields an identical config.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("env", match self.env {
            EnvKind::CoinLine => "coinline".into(),
            EnvKind::MultiRoom => "multiroom".into(),
            EnvKind::DoorKey => "doorkey".into(),
        });
        kv("agents", self.agents.to_string());
        kv("rooms", self.rooms.to_string());
        kv("p", join_f64(&self.p));
        kv("horizon", self.horizon.to_string());
        kv("gamma", fmt_f64(self.gamma));
        kv("algorithm", match self.algorithm {
            Algorithm::Ipg => "ipg".into(),
            Algorithm::Iac => "iac".into(),
            Algorithm::Coma => "coma".into(),
        });
        kv("redistribution", match self.redistribution {
            Redistribution::None => "none".into(),
            Redistribution::Rudder => "rudder".into(),
            Redistribution::Ata => "ata".into(),
        });
        kv("arch", match self.arch {
            SeqArch::Transformer => "transformer".into(),
            SeqArch::Lstm => "lstm".into(),
        });
        kv("aggregator", match self.aggregator {
            Aggregator::Mean => "mean".into(),
            Aggregator::LinearAttention => "linear-attention".into(),
            Aggregator::MultiLayerAttention => "multi-layer-attention".into(),
        });
        kv("timestep_loss", match self.timestep_loss {
            TimestepLossMode::AllTimesteps => "all".into(),
            TimestepLossMode::FinalOnly => "final".into(),
        });
        kv("lambda", fmt_f64(self.lambda));
        kv("attribution", self.attribution.to_string());
        kv("residual", self.residual.to_string());
        kv("layer_norm", self.layer_norm.to_string());
        kv("latent", self.latent.to_string());
        kv("heads", self.heads.to_string());
        kv("model_lr", fmt_f64(self.model_lr));
        kv("model_batch", self.model_batch.to_string());
        kv("model_grad_clip", fmt_f64(self.model_grad_clip));
        kv("min_loss", fmt_f64(self.min_loss));
        kv("retrain_interval", self.retrain_interval.to_string());
        kv("retrain_max_steps", self.retrain_max_steps.to_string());
        kv("warmup_episodes", self.warmup_episodes.to_string());
        kv("buffer_capacity", self.buffer_capacity.to_string());
        kv("episodes", self.episodes.to_string());
        kv("policy_batch", self.policy_batch.to_string());
        kv("policy_lr", fmt_f64(self.policy_lr));
        kv("critic_lr", fmt_f64(self.critic_lr));
        kv("entropy_coef", fmt_f64(self.entropy_coef));
        kv("grad_clip", fmt_f64(self.grad_clip));
        kv("policy_recurrent", self.policy_recurrent.to_string());
        kv("residual_correction", self.residual_correction.to_string());
        kv(
            "seeds",
            self.seeds
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv("eval_interval", self.eval_interval.to_string());
        kv("smooth_window", self.smooth_window.to_string());
        kv("out_dir", self.out_dir.clone());
        kv("save_models", self.save_models.to_string());
        kv("timing", match self.timing {
            TimingMode::None => "none".into(),
            TimingMode::Wall => "wall".into(),
        });
        kv("parallel_seeds", self.parallel_seeds.to_string());
        out
    }

    /// Learner hyperparameters view.
    pub fn learner_config(&self) -> LearnerConfig {
        LearnerConfig {
            gamma: self.gamma,
            policy_lr: self.policy_lr,
            critic_lr: self.critic_lr,
            entropy_coef: self.entropy_coef,
            grad_clip: self.grad_clip,
        }
    }

    /// Redistribution loss/limit view.
    pub fn redist_config(&self) -> RedistConfig {
        RedistConfig {
            lambda: self.lambda,
            timestep_mode: self.timestep_loss,
            min_loss: self.min_loss,
            max_steps: self.retrain_max_steps,
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

fn fmt_f64(v: f64) -> String {
    // shortest representation that round-trips
    let s = format!("{v}");
    if s.parse::<f64>() == Ok(v) {
        s
    } else {
        format!("{v:e}")
    }
}

fn join_f64(vs: &[f64]) -> String {
    vs.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.env, EnvKind::CoinLine);
    }

    #[test]
    fn doorkey_with_three_agents() {
        let cfg = ExperimentConfig::parse("env = doorkey\nagents = 3\n").unwrap();
        assert_eq!(cfg.env, EnvKind::DoorKey);
        assert_eq!(cfg.agents, 3);
        assert_eq!(cfg.p, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn coma_rudder_baseline_wiring() {
        let cfg = ExperimentConfig::parse("algorithm=coma\nredistribution=rudder\n").unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Coma);
        assert_eq!(cfg.redistribution, Redistribution::Rudder);
        // baseline architecture defaults to the recurrent network
        assert_eq!(cfg.arch, SeqArch::Lstm);
    }

    #[test]
    fn unknown_key_named_with_line() {
        let err = ExperimentConfig::parse("env = coinline\nbogus = 3\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("bogus"));
    }

    #[test]
    fn type_mismatch_rejected() {
        let err = ExperimentConfig::parse("agents = soon\n").unwrap_err();
        assert!(err.message.contains("agents"));
    }

    #[test]
    fn lambda_without_attribution_rejected() {
        let err = ExperimentConfig::parse("lambda = 0.5\n").unwrap_err();
        assert!(err.message.contains("attribution"));
        assert!(ExperimentConfig::parse("lambda = 0.5\nattribution = true\n").is_ok());
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let cfg = ExperimentConfig::parse("# experiment\n\nenv = multiroom # inline\n").unwrap();
        assert_eq!(cfg.env, EnvKind::MultiRoom);
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = ExperimentConfig::parse("agents = 2\nagents = 3\n").unwrap_err();
        assert!(err.message.contains("duplicate"));
    }

    #[test]
    fn round_trip_identity() {
        let text = "env = doorkey\nagents = 3\nlambda = 0.25\nattribution = true\n\
                    seeds = 5,6,7\npolicy_lr = 0.0005\ntiming = wall\narch = transformer\n";
        let cfg = ExperimentConfig::parse(text).unwrap();
        let reparsed = ExperimentConfig::parse(&cfg.serialize()).unwrap();
        assert_eq!(cfg, reparsed);
    }
}
