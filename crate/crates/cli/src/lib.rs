//! Experiment front-end: config-driven runs, seed sweeps with CSV output
//! and aggregation, learning-curve rendering, and environment debugging.

pub mod metrics;
pub mod plot;
pub mod sweep;

use ata_core::config::ExperimentConfig;
use ata_core::envs::Action;
use ata_core::rng::{component_rng, Stream};
use ata_core::trainer::build_env;
use rand::Rng;

/// Renders ASCII snapshots of the configured environment: the reset state
/// plus `steps` random joint actions.
pub fn debug_env(cfg: &ExperimentConfig, steps: usize) -> Result<String, String> {
    let seed = cfg.seeds[0];
    let mut env = build_env(cfg, seed).map_err(|e| e.to_string())?;
    env.reset();
    let mut out = String::new();
    out.push_str(&format!("# reset (seed {seed})\n"));
    out.push_str(&env.render_ascii());
    out.push('\n');
    let mut rng = component_rng(seed, Stream::Eval);
    for step in 0..steps {
        let spec = env.spec().clone();
        let joint: Vec<Action> = (0..spec.n_agents)
            .map(|_| spec.action_set[rng.gen_range(0..spec.action_set.len())])
            .collect();
        let labels: Vec<String> = joint.iter().map(|a| a.to_string()).collect();
        let result = env.step(&joint).map_err(|e| e.to_string())?;
        out.push_str(&format!(
            "\n# step {} actions [{}] reward {:.3} done {}\n",
            step + 1,
            labels.join(", "),
            result.reward,
            result.done
        ));
        out.push_str(&env.render_ascii());
        out.push('\n');
        if result.done {
            break;
        }
    }
    Ok(out)
}
