//! Crossplay matrix and play-style classes for a saved population.
//!
//! ```text
//! cargo run --release --example crossplay -- <population_dir> [tier] [episodes]
//! ```

use std::path::PathBuf;

use hipt_core::env::bundled_layout;
use hipt_core::population::{classify_play_styles, crossplay_matrix, load_population, write_heatmap_pgm, Tier};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let Some(dir) = args.get(1).map(PathBuf::from) else {
        eprintln!("usage: crossplay <population_dir> [full|mid|random] [episodes]");
        std::process::exit(2);
    };
    let tier = args.get(2).map(String::as_str).unwrap_or("full");
    let tier = Tier::ALL.into_iter().find(|t| t.name() == tier).expect("tier is full, mid or random");
    let episodes: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(5);

    let pop = load_population(&dir).expect("population");
    let layout = bundled_layout(&pop.layout).expect("known layout");
    let agents: Vec<_> = (0..pop.len()).map(|i| (format!("m{i}"), pop.policy(i, tier))).collect();
    let matrix = crossplay_matrix(&agents, &layout, 400, episodes, true, 0).expect("crossplay");

    print!("    ");
    for l in &matrix.labels {
        print!("{l:>7}");
    }
    println!();
    for (label, row) in matrix.labels.iter().zip(&matrix.mean) {
        print!("{label:>4}");
        for v in row {
            print!("{v:>7.1}");
        }
        println!();
    }
    let styles = classify_play_styles(&matrix, 0.2).expect("classes");
    println!("{} play styles: {:?}", styles.count(), styles.classes);
    let pgm = dir.join(format!("crossplay_{}.pgm", tier.name()));
    write_heatmap_pgm(&matrix, &pgm, 16).expect("heatmap");
    println!("heatmap written to {}", pgm.display());
}
