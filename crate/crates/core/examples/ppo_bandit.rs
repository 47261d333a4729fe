//! PPO on a two-armed bandit: prints the rewarded arm's probability per update.

use hipt_core::rl_core::train_bandit;

fn main() {
    let report = train_bandit(0, 200, 0.95).expect("bandit training");
    for (i, p) in report.trace.iter().enumerate() {
        println!("update {:>3}  p(arm 1) = {p:.4}", i + 1);
    }
    match report.reached_at {
        Some(n) => println!("reached 0.95 after {n} updates"),
        None => println!("did not reach 0.95"),
    }
}
