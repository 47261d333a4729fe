//! Play one episode, log it as JSONL, and re-simulate the log.
//!
//! ```text
//! cargo run --release --example env_replay -- [layout] [seed] [out.jsonl]
//! ```

use std::fs::File;
use std::io::BufReader;

use hipt_core::env::{bundled_layout, read_jsonl, replay, run_episode, write_jsonl, Event, ShapingConfig};
use hipt_core::policy::NoisyPolicy;
use hipt_core::scripted::ScriptedCook;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let name = args.get(1).map(String::as_str).unwrap_or("cramped_room");
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let out = args.get(3).cloned().unwrap_or_else(|| std::env::temp_dir().join("episode.jsonl").display().to_string());
    let layout = bundled_layout(name).expect("known layout");
    println!("{}", layout.to_text());

    let mut cook = ScriptedCook;
    let mut helper = NoisyPolicy { inner: ScriptedCook, epsilon: 0.3 };
    let ep = run_episode(&mut cook, &mut helper, &layout, 400, &ShapingConfig::default(), seed).expect("episode");
    let delivered = ep.log.iter().flat_map(|r| &r.events).filter(|e| matches!(e, Event::SoupDelivered { .. })).count();
    println!("episode {}: return {} ({delivered} soups delivered)", ep.log[0].episode, ep.episode_return);

    write_jsonl(File::create(&out).expect("create log"), &ep.log).expect("write log");
    let records = read_jsonl(BufReader::new(File::open(&out).expect("open log"))).expect("read log");
    let summary = replay(&records, &layout, 400).expect("replay");
    println!("replayed {} steps from {out}: score {}, every digest matches", summary.steps, summary.score);

    let mut forged = records.clone();
    forged[10].joint_action[0] = hipt_core::env::Action::ALL[(forged[10].joint_action[0].index() + 1) % 6];
    match replay(&forged, &layout, 400) {
        Ok(_) => println!("edited action went unnoticed"),
        Err(e) => println!("edited log rejected: {e}"),
    }
}
