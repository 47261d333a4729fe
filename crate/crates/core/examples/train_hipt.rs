//! Train a HiPT agent against a saved partner population and evaluate it
//! against a second, held-out population.
//!
//! ```text
//! cargo run --release --example train_hipt -- <train_pop_dir> <heldout_pop_dir> [env_steps] [out_dir]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use hipt_core::env::bundled_layout;
use hipt_core::hipt::{evaluate_vs_full_tier, save_hipt_checkpoint, train_hipt, HiptConfig};
use hipt_core::population::load_population;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().collect();
    if args.len() < 3 {
        eprintln!("usage: train_hipt <train_pop_dir> <heldout_pop_dir> [env_steps] [out_dir]");
        std::process::exit(2);
    }
    let train = load_population(&PathBuf::from(&args[1])).expect("training population");
    let heldout = load_population(&PathBuf::from(&args[2])).expect("held-out population");
    let steps: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1_000_000);
    let out = PathBuf::from(args.get(4).cloned().unwrap_or_else(|| "runs/hipt".into()));
    let layout = bundled_layout(&train.layout).expect("known layout");

    let config = HiptConfig {
        trunk: vec![64, 64],
        recurrent: hipt_core::approximator::RecurrentCell::None,
        eval_every: 25,
        ..HiptConfig::for_layout(&layout.name, steps)
    };
    let start = Instant::now();
    let run = train_hipt(&train, &layout, &config, Some(&train), None).expect("hipt training");
    for p in run.history.iter().filter(|p| p.eval_return.is_some()) {
        println!(
            "update {:>4} steps {:>8} kappa {:>7.1} train {:>6.1} influence {:.4} eval(train pop) {:>6.1}",
            p.update,
            p.env_steps,
            p.kappa,
            p.train_return,
            p.mean_influence,
            p.eval_return.unwrap()
        );
    }
    println!("trained in {:.0}s", start.elapsed().as_secs_f64());
    let held = evaluate_vs_full_tier(&run.agent, &heldout, &layout, config.horizon, 5, 99).expect("eval");
    println!("held-out full-tier mean return: {held:.1}");
    save_hipt_checkpoint(&out, "hipt", &run.agent, &run.sidecar(&config.influence)).expect("checkpoint");
}
