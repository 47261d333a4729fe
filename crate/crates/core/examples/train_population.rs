//! Train a diverse partner population, save it, and print its crossplay matrix.
//!
//! ```text
//! cargo run --release --example train_population -- [layout] [size] [steps_per_member] [seed] [out_dir] [jsd_coef]
//! ```

use std::path::PathBuf;
use std::time::Instant;

use hipt_core::env::bundled_layout;
use hipt_core::population::{
    classify_play_styles, crossplay_matrix, save_population, train_population, write_crossplay_csv, write_heatmap_pgm,
    PopulationConfig, Tier,
};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().collect();
    let layout_name = args.get(1).map(String::as_str).unwrap_or("cramped_room");
    let size: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(4);
    let steps: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(400_000);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0);
    let out = PathBuf::from(args.get(5).cloned().unwrap_or_else(|| format!("runs/population-{layout_name}-{seed}")));
    let layout = bundled_layout(layout_name).expect("known layout");
    let defaults = PopulationConfig::default();
    let jsd_coef: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(defaults.jsd_coef);

    let config = PopulationConfig { size, env_steps_per_member: steps, seed, jsd_coef, ..defaults };
    let start = Instant::now();
    let run = train_population(&layout, &config, None).expect("population training");
    println!("trained {size} members in {:.0}s", start.elapsed().as_secs_f64());
    for (i, m) in run.population.members.iter().enumerate() {
        println!(
            "member {i}: seed {} J_SP full {:.1} mid {:.1} (update {}, in band: {})",
            m.seed, m.j_sp_full, m.j_sp_mid, m.mid_update, m.mid_in_band
        );
    }
    save_population(&run.population, &out).expect("save population");

    let agents: Vec<_> = (0..size).map(|i| (format!("m{i}"), run.population.policy(i, Tier::Full))).collect();
    let matrix = crossplay_matrix(&agents, &layout, config.horizon, 5, true, seed).expect("crossplay");
    for (label, row) in matrix.labels.iter().zip(&matrix.mean) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>6.1}")).collect();
        println!("{label:>4} {}", cells.join(" "));
    }
    let styles = classify_play_styles(&matrix, 0.2).expect("classes");
    println!("play styles: {:?}", styles.classes);
    write_crossplay_csv(&matrix, &out.join("crossplay.csv")).expect("csv");
    write_heatmap_pgm(&matrix, &out.join("crossplay.pgm"), 16).expect("pgm");
    println!("saved to {}", out.display());
}
