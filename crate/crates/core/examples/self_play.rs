//! Self-play PPO on one layout, reporting J_SP as training goes.
//!
//! ```text
//! cargo run --release --example self_play -- [layout] [env_steps] [seed]
//! ```

use std::time::Instant;

use hipt_core::approximator::LrSchedule;
use hipt_core::env::{bundled_layout, shaping_factor};
use hipt_core::eval::self_play_return;
use hipt_core::policy::NetworkPolicy;
use hipt_core::population::{PopulationConfig, SelfPlayTrainer};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let layout_name = args.get(1).map(String::as_str).unwrap_or("cramped_room");
    let budget: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(400_000);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);
    let layout = bundled_layout(layout_name).expect("known layout");

    let config = PopulationConfig { env_steps_per_member: budget, ..PopulationConfig::default() };
    let spec = config.network_spec(&layout);
    let updates = config.updates_per_member();
    let schedule =
        LrSchedule { start: config.learning_rate, decay: config.lr_decay, total_updates: config.optimizer_steps() };
    let mut trainer = SelfPlayTrainer::new(spec.clone(), seed, schedule, config.ppo.clone()).expect("trainer");
    let base = config.self_play_shaping(&layout);
    let start = Instant::now();
    for u in 0..updates {
        let progress = u as f64 / updates as f64;
        let shaping = base.with_scale(shaping_factor(progress, config.shaping_anneal_fraction));
        let data = trainer.collect(&layout, config.horizon, &shaping, config.episodes_per_update).expect("rollout");
        let diag = trainer.update(&data, &[], 0.0, progress).expect("update");
        if (u + 1) % 10 == 0 || u + 1 == updates {
            let policy = NetworkPolicy::from_spec(spec.clone(), trainer.params.clone()).unwrap();
            let j = self_play_return(&policy, &layout, config.horizon, 5, u).unwrap();
            println!(
                "update {:>4}  steps {:>8}  {:>6.1}s  train return {:>6.1}  J_SP {:>6.1}  entropy {:.3}",
                u + 1,
                trainer.env_steps,
                start.elapsed().as_secs_f64(),
                data.returns.iter().sum::<f64>() / data.returns.len() as f64,
                j.mean(),
                diag.low.entropy
            );
        }
    }
}
