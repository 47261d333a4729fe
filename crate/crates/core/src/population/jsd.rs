use super::PopulationError;
use crate::math::entropy;

fn check_row(row: &[f64]) -> Result<(), PopulationError> {
    let sum: f64 = row.iter().sum();
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-6 {
        return Err(PopulationError::InvalidDistribution(row.to_vec()));
    }
    Ok(())
}

/// Unweighted average of the members' distributions.
pub fn mixture<D: AsRef<[f64]>>(members: &[D]) -> Vec<f64> {
    let n = members.len() as f64;
    let mut mix = vec![0.0; members[0].as_ref().len()];
    for m in members {
        for (x, p) in mix.iter_mut().zip(m.as_ref()) {
            *x += p / n;
        }
    }
    mix
}

/// Entropy of the mixture minus the members' mean entropy, at one state.
pub fn jsd_state<D: AsRef<[f64]>>(members: &[D]) -> Result<f64, PopulationError> {
    if members.len() < 2 {
        return Err(PopulationError::TooFewMembers(members.len()));
    }
    let width = members[0].as_ref().len();
    for m in members {
        if m.as_ref().len() != width {
            return Err(PopulationError::InvalidDistribution(m.as_ref().to_vec()));
        }
        check_row(m.as_ref())?;
    }
    let mean_h = members.iter().map(|m| entropy(m.as_ref())).sum::<f64>() / members.len() as f64;
    Ok((entropy(&mixture(members)) - mean_h).max(0.0))
}

/// Mean over a batch of states; `batch[s][n]` is member `n`'s distribution at state `s`.
pub fn jsd_term<D: AsRef<[f64]>>(batch: &[Vec<D>]) -> Result<f64, PopulationError> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for members in batch {
        total += jsd_state(members)?;
    }
    Ok(total / batch.len() as f64)
}

/// Gradient of the single-state JSD with respect to member `own`'s
/// probabilities: `(ln π_own − ln mixture) / N`.
pub fn jsd_grad<D: AsRef<[f64]>>(members: &[D], own: usize) -> Vec<f64> {
    let n = members.len() as f64;
    let mix = mixture(members);
    members[own].as_ref().iter().zip(&mix).map(|(&p, &m)| (p.max(1e-300).ln() - m.max(1e-300).ln()) / n).collect()
}
