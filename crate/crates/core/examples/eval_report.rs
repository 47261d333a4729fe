//! Score an agent against every skill tier of a held-out population and print
//! the report table.
//!
//! ```text
//! cargo run --release --example eval_report -- <heldout_pop_dir> [hipt_dir/name | scripted] [training_pop_dir]
//! ```

use std::path::{Path, PathBuf};

use hipt_core::env::bundled_layout;
use hipt_core::eval::{emit_report, evaluate_vs_population, EvalSuite, ReportFormat};
use hipt_core::hipt::load_hipt_checkpoint;
use hipt_core::policy::Policy;
use hipt_core::population::load_population;
use hipt_core::scripted::ScriptedCook;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let Some(heldout) = args.get(1).map(PathBuf::from) else {
        eprintln!("usage: eval_report <heldout_pop_dir> [hipt_dir/name | scripted] [training_pop_dir]");
        std::process::exit(2);
    };
    let agent = args.get(2).map(String::as_str).unwrap_or("scripted");
    let pop = load_population(&heldout).expect("held-out population");
    let layout = bundled_layout(&pop.layout).expect("known layout");
    let training_seeds = args.get(3).map(|d| load_population(Path::new(d)).expect("training population").seeds());

    let (method, mut policy): (&str, Box<dyn Policy>) = if agent == "scripted" {
        ("Scripted", Box::new(ScriptedCook))
    } else {
        let path = Path::new(agent);
        let name = path.file_name().and_then(|n| n.to_str()).expect("checkpoint name");
        let (hipt, _) = load_hipt_checkpoint(path.parent().unwrap_or(Path::new(".")), name).expect("checkpoint");
        ("HiPT", Box::new(hipt.policy()))
    };
    let suite = EvalSuite::new(pop, &training_seeds.unwrap_or_default(), 400).expect("suite");
    let outcome = evaluate_vs_population(policy.as_mut(), method, &layout, &suite).expect("evaluation");
    print!("{}", emit_report(&outcome.rows, ReportFormat::Text).unwrap());
    println!();
    print!("{}", emit_report(&outcome.rows, ReportFormat::Csv).unwrap());
}
