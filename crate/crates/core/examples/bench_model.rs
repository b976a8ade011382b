// quick micro-benchmark of the model training step
use ata_core::episode::Episode;
use ata_core::nn::OptimizerState;
use ata_core::redistribution::{Aggregator, ModelConfig, RedistConfig, RewardModel, SeqArch, AtaModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let obs_len = 42;
    let n_actions = 2;
    let t = 200;
    let episodes: Vec<Episode> = (0..8)
        .map(|_| Episode {
            obs: (0..2)
                .map(|_| (0..t * obs_len).map(|_| rng.gen_range(0..2) as u8).collect())
                .collect(),
            actions: (0..2).map(|_| (0..t).map(|_| rng.gen_range(0..n_actions)).collect()).collect(),
            log_probs: vec![vec![0.0; t]; 2],
            rewards: { let mut r = vec![0.0; t]; r[t-1] = 3.0; r },
            attributed: None,
            obs_len,
            n_actions,
        })
        .collect();
    let refs: Vec<&Episode> = episodes.iter().collect();
    let cfg = ModelConfig {
        input_dim: obs_len + n_actions,
        latent: 16,
        heads: 2,
        arch: SeqArch::Transformer,
        aggregator: Aggregator::Mean,
        residual: false,
        layer_norm: false,
    };
    let mut model = RewardModel::Ata(AtaModel::new(cfg, &mut rng).unwrap());
    let mut opt = OptimizerState::new(model.params(), 1e-3);
    let rc = RedistConfig::default();
    // warm up
    model.train_step(&refs, &rc, false, &mut opt, 5.0, 0.0).unwrap();
    let start = Instant::now();
    let iters = 30;
    for _ in 0..iters {
        model.train_step(&refs, &rc, false, &mut opt, 5.0, 0.0).unwrap();
    }
    println!("ata train_step: {:.2} ms", start.elapsed().as_secs_f64() * 1000.0 / iters as f64);

    // single-episode predict (redistribution inference path)
    let start = Instant::now();
    for _ in 0..50 {
        model.redistribute_episode(&episodes[0], false).unwrap();
    }
    println!("ata redistribute: {:.2} ms", start.elapsed().as_secs_f64() * 1000.0 / 50.0);

    let start = Instant::now();
    for _ in 0..30 {
        model.eval_loss(&refs, &rc, false).unwrap();
    }
    println!("ata eval_loss (fwd only): {:.2} ms", start.elapsed().as_secs_f64() * 1000.0 / 30.0);
}
