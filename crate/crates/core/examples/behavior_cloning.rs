//! Clone the scripted cook from logged episodes and score it on held-out ones.
//!
//! ```text
//! cargo run --release --example behavior_cloning -- [episodes] [out_dir]
//! ```

use std::path::PathBuf;

use hipt_core::env::bundled_layout;
use hipt_core::eval::{evaluate_pair, record_episodes, split_by_episode, train_bc, BcConfig};
use hipt_core::policy::NoisyPolicy;
use hipt_core::scripted::ScriptedCook;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let episodes: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(24);
    let out = PathBuf::from(args.get(2).cloned().unwrap_or_else(|| "runs/bc".into()));
    let layout = bundled_layout("cramped_room").unwrap();

    // A noisy partner pushes the cook into states a perfect partner never causes.
    let mut partner = NoisyPolicy { inner: ScriptedCook, epsilon: 0.2 };
    let records = record_episodes(&mut ScriptedCook, &mut partner, &layout, 400, episodes, 0).expect("record");
    let (train, heldout) = split_by_episode(&records, 0.25, 1);
    let config = BcConfig { seats: vec![0], ..BcConfig::default() };
    let model = train_bc(&train, &heldout, &layout, &config).expect("train");
    for (epoch, loss) in model.train_loss.iter().enumerate().step_by(5) {
        println!("epoch {epoch:>3} loss {loss:.4}");
    }
    println!(
        "held-out accuracy {:.4} over {} episodes (train {})",
        model.heldout_accuracy,
        model.heldout_episodes.len(),
        model.train_episodes.len()
    );

    let stats = evaluate_pair(&mut model.policy(), &mut ScriptedCook, &layout, 400, 5, 3).expect("eval");
    println!("clone paired with the scripted cook: {:.1} +- {:.1}", stats.mean(), stats.std());
    model.save(&out, "bc").expect("save");
    println!("saved to {}/bc.model", out.display());
}
