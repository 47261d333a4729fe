//! Analytic gradients against central finite differences.

use hipt_core::approximator::{
    Activation, HeadCotangents, Network, NetworkSpec, ParamStore, RecurrentCell, RecurrentState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;

/// Scalar loss: fixed random linear functional of every head output, plus
/// the emitted hidden state.
struct Probe {
    high: Vec<f64>,
    low: Vec<f64>,
    value_high: f64,
    value_low: f64,
    hidden: Vec<f64>,
}

impl Probe {
    fn loss(&self, net: &Network, params: &ParamStore, x: &[f64], h: &RecurrentState, z: usize) -> f64 {
        let (out, new_h, _) = net.forward(params, x, h, Some(z)).unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        dot(&self.high, &out.high_logits)
            + dot(&self.low, out.low_logits.as_ref().unwrap())
            + self.value_high * out.value_high
            + self.value_low * out.value_low
            + dot(&self.hidden, new_h.as_slice())
    }
}

fn random_spec(rng: &mut ChaCha8Rng, i: usize) -> NetworkSpec {
    let depth = rng.random_range(0..3);
    NetworkSpec {
        input_dim: rng.random_range(1..9),
        trunk: (0..depth).map(|_| rng.random_range(1..8)).collect(),
        activation: if i % 3 == 2 { Activation::Relu } else { Activation::Tanh },
        // Every other spec carries the gated cell.
        recurrent: if i.is_multiple_of(2) {
            RecurrentCell::Gated { hidden: rng.random_range(1..6) }
        } else {
            RecurrentCell::None
        },
        num_priors: rng.random_range(1..5),
        num_actions: 6,
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Relative error ‖a − n‖ / max(‖a‖, ‖n‖) between analytic and numeric vectors.
fn relative_error(a: &[f64], n: &[f64]) -> f64 {
    let diff = a.iter().zip(n).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(n.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub fn check_spec(spec: NetworkSpec, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Network::new(spec.clone()).unwrap();
    // Larger weights than the default init so every path carries signal.
    let params = ParamStore::new(uniform(&mut rng, net.param_count(), 0.8));
    let x = uniform(&mut rng, spec.input_dim, 1.0);
    let h = RecurrentState::from_vec(uniform(&mut rng, spec.hidden_dim(), 0.9));
    let z = rng.random_range(0..spec.num_priors);
    let probe = Probe {
        high: uniform(&mut rng, spec.num_priors, 1.0),
        low: uniform(&mut rng, spec.num_actions, 1.0),
        value_high: rng.random_range(-1.0..1.0),
        value_low: rng.random_range(-1.0..1.0),
        hidden: uniform(&mut rng, spec.hidden_dim(), 1.0),
    };

    let (_, _, cache) = net.forward(&params, &x, &h, Some(z)).unwrap();
    let cot = HeadCotangents {
        high_logits: Some(probe.high.clone()),
        low_logits: Some(probe.low.clone()),
        value_high: probe.value_high,
        value_low: probe.value_low,
        hidden_out: if spec.hidden_dim() > 0 { Some(probe.hidden.clone()) } else { None },
    };
    let mut grad = hipt_core::approximator::Gradient::zeros(params.len());
    let d_hidden = net.backward(&params, &cache, &cot, &mut grad).unwrap();

    let mut numeric = vec![0.0; params.len()];
    for i in 0..params.len() {
        let mut plus = params.clone();
        plus.as_mut_slice()[i] += STEP;
        let mut minus = params.clone();
        minus.as_mut_slice()[i] -= STEP;
        numeric[i] = (probe.loss(&net, &plus, &x, &h, z) - probe.loss(&net, &minus, &x, &h, z)) / (2.0 * STEP);
    }

    let mut numeric_h = vec![0.0; spec.hidden_dim()];
    for i in 0..spec.hidden_dim() {
        let mut hp = h.as_slice().to_vec();
        hp[i] += STEP;
        let mut hm = h.as_slice().to_vec();
        hm[i] -= STEP;
        numeric_h[i] = (probe.loss(&net, &params, &x, &RecurrentState::from_vec(hp), z)
            - probe.loss(&net, &params, &x, &RecurrentState::from_vec(hm), z))
            / (2.0 * STEP);
    }
    (relative_error(grad.as_slice(), &numeric), relative_error(&d_hidden, &numeric_h))
}

#[test]
fn ten_random_specs_agree_with_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..10 {
        let spec = random_spec(&mut rng, i);
        let (param_err, hidden_err) = check_spec(spec.clone(), 100 + i as u64);
        assert!(param_err <= 1e-4, "spec {spec:?}: parameter rel err {param_err}");
        assert!(hidden_err <= 1e-4, "spec {spec:?}: hidden rel err {hidden_err}");
    }
}

#[test]
fn standard_spec_agrees_with_finite_differences() {
    let mut spec = NetworkSpec::standard(12, 4);
    spec.trunk = vec![16, 16];
    spec.recurrent = RecurrentCell::Gated { hidden: 8 };
    let (param_err, hidden_err) = check_spec(spec, 7);
    assert!(param_err <= 1e-4 && hidden_err <= 1e-4, "{param_err} {hidden_err}");
}
