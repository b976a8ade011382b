// inspect redistributed reward streams mid-training on the 1-D coin task
use ata_core::config::ExperimentConfig;
use ata_core::trainer::{build_env, build_learner, build_reward_model, collect_one, train_reward_model, EpisodeBuffer, TrainSchedule};
use ata_core::nn::OptimizerState;
use ata_core::rng::{component_rng, Stream};
use ata_core::agents::{discounted_returns, RolloutBatch};

fn main() {
    let text = std::fs::read_to_string(std::env::args().nth(1).expect("config")).unwrap();
    let cfg = ExperimentConfig::parse(&text).unwrap();
    let seed = 0u64;
    let mut env = build_env(&cfg, seed).unwrap();
    let spec = env.spec().clone();
    let mut learner = build_learner(&cfg, spec.obs_len, spec.n_actions(), seed);
    let mut model = build_reward_model(&cfg, spec.obs_len, spec.n_actions(), seed).unwrap().unwrap();
    let mut opt = OptimizerState::new(model.params(), cfg.model_lr);
    let schedule = TrainSchedule::from_config(&cfg);
    let rc = cfg.redist_config();
    let mut buffer = EpisodeBuffer::new(cfg.buffer_capacity);
    let mut srng = component_rng(seed, Stream::Sampling);
    let mut mrng = component_rng(seed, Stream::ModelTraining);

    let mut pending = Vec::new();
    let episodes = 1200usize;
    for ep in 0..episodes {
        let c = collect_one(env.as_mut(), learner.policies(), &mut srng, cfg.attribution).unwrap();
        buffer.push(c.episode.clone());
        pending.push(c.episode);
        if (ep + 1) >= cfg.warmup_episodes && (ep + 1 - cfg.warmup_episodes) % cfg.retrain_interval == 0 {
            let loss = train_reward_model(&mut model, &buffer, &schedule, &rc, cfg.attribution, cfg.model_grad_clip, &mut opt, &mut mrng).unwrap();
            println!("ep {ep}: retrain loss {loss:.4}");
        }
        if pending.len() == cfg.policy_batch {
            let eps = std::mem::take(&mut pending);
            let mut streams = Vec::new();
            for e in &eps {
                streams.push(vec![e.rewards.clone(); e.n_agents()]);
            }
            learner.update(&RolloutBatch { episodes: eps, rewards: streams }).unwrap();
        }
    }
    // probe: redistribute the last collected episode
    let c = collect_one(env.as_mut(), learner.policies(), &mut srng, cfg.attribution).unwrap();
    let ep = c.episode;
    println!("\nepisode return: {:.3}", ep.total_return());
    let batch = model.redistribute_episode(&ep, false).unwrap();
    for (i, stream) in batch.rewards.iter().enumerate() {
        let sum: f64 = stream.iter().sum();
        let min = stream.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = stream.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let abs_mean: f64 = stream.iter().map(|v| v.abs()).sum::<f64>() / stream.len() as f64;
        println!("agent {i}: sum {sum:.3} min {min:.3} max {max:.3} mean|r| {abs_mean:.3} first {:.3}", stream[0]);
        let g = discounted_returns(stream, cfg.gamma);
        let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
        let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("  discounted returns: min {gmin:.3} max {gmax:.3} G0 {:.3}", g[0]);
        print!("  r[0..20]:");
        for v in &stream[0..20] { print!(" {v:.2}"); }
        println!();
    }
}
