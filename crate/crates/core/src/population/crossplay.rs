use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PopulationError;
use crate::env::Layout;
use crate::eval::evaluate_pair_seats;
use crate::policy::NetworkPolicy;

/// Mean pairwise returns; cell `(i, j)` pairs agent `i` with agent `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossplayMatrix {
    pub labels: Vec<String>,
    pub mean: Vec<Vec<f64>>,
    pub std: Vec<Vec<f64>>,
    /// Episodes behind every cell.
    pub episodes: usize,
}

impl CrossplayMatrix {
    pub fn size(&self) -> usize {
        self.mean.len()
    }

    pub fn self_play(&self, i: usize) -> f64 {
        self.mean[i][i]
    }
}

/// Evaluate every ordered pair of `agents`. With `seat_balancing` each cell
/// averages `episodes_per_pair` episodes in each seat assignment, which makes
/// the matrix symmetric, so only the upper triangle is played.
pub fn crossplay_matrix(
    agents: &[(String, NetworkPolicy)],
    layout: &Layout,
    horizon: u32,
    episodes_per_pair: usize,
    seat_balancing: bool,
    seed: u64,
) -> Result<CrossplayMatrix, PopulationError> {
    let m = agents.len();
    if m == 0 {
        return Err(PopulationError::EmptyMatrix);
    }
    let mut mean = vec![vec![0.0; m]; m];
    let mut std = vec![vec![0.0; m]; m];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seats: &[usize] = if seat_balancing { &[0, 1] } else { &[0] };
    for i in 0..m {
        let cols = if seat_balancing { i..m } else { 0..m };
        for j in cols {
            let mut a = agents[i].1.clone();
            let mut b = agents[j].1.clone();
            let stats = evaluate_pair_seats(&mut a, &mut b, layout, horizon, episodes_per_pair, rng.random(), seats)?;
            mean[i][j] = stats.mean();
            std[i][j] = stats.std();
            if seat_balancing {
                mean[j][i] = mean[i][j];
                std[j][i] = std[i][j];
            }
        }
    }
    Ok(CrossplayMatrix {
        labels: agents.iter().map(|(l, _)| l.clone()).collect(),
        mean,
        std,
        episodes: episodes_per_pair * seats.len(),
    })
}

/// Partition of agents into best-response classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayStyles {
    /// Each class lists agent indices in increasing order; classes are
    /// ordered by their smallest member.
    pub classes: Vec<Vec<usize>>,
}

impl PlayStyles {
    pub fn count(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of(&self, agent: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(&agent))
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut root = x;
    while parent[root] != root {
        root = parent[root];
    }
    let mut cur = x;
    while parent[cur] != root {
        let next = parent[cur];
        parent[cur] = root;
        cur = next;
    }
    root
}

/// Agents `i` and `j` share a class when both cross returns and both
/// self-play returns agree within `tolerance · min(J_ii, J_jj)`; classes are
/// the connected components of that relation.
pub fn classify_play_styles(matrix: &CrossplayMatrix, tolerance: f64) -> Result<PlayStyles, PopulationError> {
    let m = matrix.size();
    if m == 0 {
        return Err(PopulationError::EmptyMatrix);
    }
    let mut parent: Vec<usize> = (0..m).collect();
    for i in 0..m {
        for j in i + 1..m {
            let (jii, jjj) = (matrix.mean[i][i], matrix.mean[j][j]);
            let slack = tolerance * jii.min(jjj);
            let close = |a: f64, b: f64| (a - b).abs() <= slack;
            let linked = close(jii, jjj)
                && [matrix.mean[i][j], matrix.mean[j][i]].iter().all(|&x| close(x, jii) && close(x, jjj));
            if linked {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut root_class = vec![usize::MAX; m];
    for i in 0..m {
        let r = find(&mut parent, i);
        if root_class[r] == usize::MAX {
            root_class[r] = classes.len();
            classes.push(Vec::new());
        }
        classes[root_class[r]].push(i);
    }
    Ok(PlayStyles { classes })
}

pub fn write_crossplay_csv(matrix: &CrossplayMatrix, path: &Path) -> Result<(), PopulationError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| PopulationError::Archive(e.to_string()))?;
    let mut header = vec![String::from("agent")];
    header.extend(matrix.labels.iter().cloned());
    w.write_record(&header).map_err(|e| PopulationError::Archive(e.to_string()))?;
    for (label, row) in matrix.labels.iter().zip(&matrix.mean) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| PopulationError::Archive(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Binary grayscale heatmap; brighter cells mean higher returns.
pub fn write_heatmap_pgm(matrix: &CrossplayMatrix, path: &Path, cell_px: usize) -> Result<(), PopulationError> {
    let m = matrix.size();
    let side = m * cell_px;
    let max = matrix.mean.iter().flatten().copied().fold(0.0f64, f64::max);
    let mut out = Vec::with_capacity(side * side + 32);
    write!(out, "P5\n{side} {side}\n255\n")?;
    for y in 0..side {
        for x in 0..side {
            let v = matrix.mean[y / cell_px][x / cell_px];
            let g = if max > 0.0 { (v / max * 255.0).round().clamp(0.0, 255.0) as u8 } else { 0 };
            out.push(g);
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
