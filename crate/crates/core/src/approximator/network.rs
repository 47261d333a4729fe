//! Forward pass with activation cache and exact reverse-mode backward pass.
//!
//! Weight matrices are stored row-major as `[out, in]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{Gradient, ParamStore, RecurrentState};
use super::spec::{Activation, NetworkSpec, ParamLayout, RecurrentCell};
use super::ApproxError;
use crate::math::softmax;

/// Scale applied to the policy heads at initialization.
pub const POLICY_HEAD_INIT_SCALE: f64 = 0.01;

#[derive(Clone, Copy, Debug)]
struct Linear {
    weight: usize,
    bias: usize,
    rows: usize,
    cols: usize,
}

#[derive(Clone, Copy, Debug)]
struct GruOffsets {
    reset: (usize, usize, usize),
    update: (usize, usize, usize),
    candidate: (usize, usize, usize),
    hidden: usize,
    input: usize,
}

/// Head outputs of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadOutputs {
    pub high_logits: Vec<f64>,
    /// Present when a prior was supplied.
    pub low_logits: Option<Vec<f64>>,
    pub value_high: f64,
    pub value_low: f64,
}

impl HeadOutputs {
    pub fn high_probs(&self) -> Vec<f64> {
        softmax(&self.high_logits)
    }

    pub fn low_probs(&self) -> Option<Vec<f64>> {
        self.low_logits.as_deref().map(softmax)
    }
}

/// Everything the backward pass needs.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// `layers[0]` is the input, `layers[i + 1]` the output of trunk layer `i`.
    layers: Vec<Vec<f64>>,
    gru: Option<GruCache>,
    features: Vec<f64>,
    prior: Option<usize>,
}

#[derive(Clone, Debug)]
struct GruCache {
    h_prev: Vec<f64>,
    reset: Vec<f64>,
    update: Vec<f64>,
    candidate: Vec<f64>,
    gated_prev: Vec<f64>,
}

impl ForwardCache {
    /// Trunk (and recurrent cell) output read by the heads.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn prior(&self) -> Option<usize> {
        self.prior
    }
}

/// Cotangents of a scalar loss with respect to the head outputs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HeadCotangents {
    pub high_logits: Option<Vec<f64>>,
    pub low_logits: Option<Vec<f64>>,
    pub value_high: f64,
    pub value_low: f64,
    /// Cotangent on the emitted recurrent state (equal to the features).
    pub hidden_out: Option<Vec<f64>>,
}

/// A [`NetworkSpec`] with resolved parameter offsets.
#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    layout: ParamLayout,
    trunk: Vec<Linear>,
    gru: Option<GruOffsets>,
    high: Linear,
    low: Linear,
    value_high: Linear,
    value_low: Linear,
}

fn matvec_add(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dw += d ⊗ x` and `dx += Wᵀ d`.
fn linear_backward(w: &[f64], x: &[f64], d: &[f64], dw: &mut [f64], dx: Option<&mut [f64]>) {
    let cols = x.len();
    for (&di, row) in d.iter().zip(dw.chunks_exact_mut(cols)) {
        if di != 0.0 {
            for (g, &xi) in row.iter_mut().zip(x) {
                *g += di * xi;
            }
        }
    }
    if let Some(dx) = dx {
        for (&di, row) in d.iter().zip(w.chunks_exact(cols)) {
            if di != 0.0 {
                for (g, &wi) in dx.iter_mut().zip(row) {
                    *g += di * wi;
                }
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self, ApproxError> {
        spec.validate()?;
        let layout = ParamLayout::for_spec(&spec);
        let linear = |w: &str, b: &str| {
            let ws = layout.get(w).expect("slot exists");
            let bs = layout.get(b).expect("slot exists");
            Linear { weight: ws.offset, bias: bs.offset, rows: ws.rows, cols: ws.cols }
        };
        let trunk =
            (0..spec.trunk.len()).map(|i| linear(&format!("trunk.{i}.weight"), &format!("trunk.{i}.bias"))).collect();
        let gru = match spec.recurrent {
            RecurrentCell::None => None,
            RecurrentCell::Gated { hidden } => {
                let gate = |g: &str| {
                    (
                        layout.get(&format!("gru.{g}.input_weight")).unwrap().offset,
                        layout.get(&format!("gru.{g}.hidden_weight")).unwrap().offset,
                        layout.get(&format!("gru.{g}.bias")).unwrap().offset,
                    )
                };
                Some(GruOffsets {
                    reset: gate("reset"),
                    update: gate("update"),
                    candidate: gate("candidate"),
                    hidden,
                    input: spec.trunk_output_dim(),
                })
            }
        };
        let high = linear("high.weight", "high.bias");
        let low = linear("low.weight", "low.bias");
        let value_high = linear("value_high.weight", "value_high.bias");
        let value_low = linear("value_low.weight", "value_low.bias");
        Ok(Self { spec, layout, trunk, gru, high, low, value_high, value_low })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    pub fn initial_state(&self) -> RecurrentState {
        RecurrentState::zeros(self.spec.hidden_dim())
    }

    /// Fan-in scaled uniform weights, zero biases, policy heads shrunk by
    /// [`POLICY_HEAD_INIT_SCALE`].
    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; self.layout.total];
        for slot in &self.layout.slots {
            if slot.name.ends_with("bias") {
                continue;
            }
            let fan_in = slot.cols as f64;
            let mut limit = (3.0 / fan_in).sqrt();
            if slot.name == "high.weight" || slot.name == "low.weight" {
                limit *= POLICY_HEAD_INIT_SCALE;
            }
            for v in &mut values[slot.range()] {
                *v = rng.random_range(-limit..limit);
            }
        }
        ParamStore::new(values)
    }

    fn check_params(&self, params: &ParamStore) -> Result<(), ApproxError> {
        if params.len() != self.layout.total {
            return Err(ApproxError::ParamMismatch { expected: self.layout.total, got: params.len() });
        }
        Ok(())
    }

    pub fn forward(
        &self,
        params: &ParamStore,
        input: &[f64],
        state: &RecurrentState,
        prior: Option<usize>,
    ) -> Result<(HeadOutputs, RecurrentState, ForwardCache), ApproxError> {
        self.check_params(params)?;
        if input.len() != self.spec.input_dim {
            return Err(ApproxError::InputMismatch { expected: self.spec.input_dim, got: input.len() });
        }
        if self.gru.is_some() && state.len() != self.spec.hidden_dim() {
            return Err(ApproxError::HiddenMismatch { expected: self.spec.hidden_dim(), got: state.len() });
        }
        if let Some(z) = prior {
            if z >= self.spec.num_priors {
                return Err(ApproxError::PriorOutOfRange { prior: z, num_priors: self.spec.num_priors });
            }
        }
        let p = params.as_slice();
        let act = self.spec.activation;

        let mut layers = Vec::with_capacity(self.trunk.len() + 1);
        layers.push(input.to_vec());
        for lin in &self.trunk {
            let x = layers.last().unwrap();
            let mut y = p[lin.bias..lin.bias + lin.rows].to_vec();
            matvec_add(&p[lin.weight..lin.weight + lin.rows * lin.cols], x, &mut y);
            for v in &mut y {
                *v = act.apply(*v);
            }
            layers.push(y);
        }

        let (features, gru_cache) = match &self.gru {
            None => (layers.last().unwrap().clone(), None),
            Some(g) => {
                let x = layers.last().unwrap();
                let h_prev = state.as_slice();
                let h = g.hidden;
                let gate = |(wi, wh, b): (usize, usize, usize), hin: &[f64]| {
                    let mut a = p[b..b + h].to_vec();
                    matvec_add(&p[wi..wi + h * g.input], x, &mut a);
                    matvec_add(&p[wh..wh + h * h], hin, &mut a);
                    a
                };
                let reset: Vec<f64> = gate(g.reset, h_prev).into_iter().map(sigmoid).collect();
                let update: Vec<f64> = gate(g.update, h_prev).into_iter().map(sigmoid).collect();
                let gated_prev: Vec<f64> = reset.iter().zip(h_prev).map(|(r, h)| r * h).collect();
                let candidate: Vec<f64> = gate(g.candidate, &gated_prev).into_iter().map(f64::tanh).collect();
                let h_new: Vec<f64> =
                    (0..h).map(|i| (1.0 - update[i]) * h_prev[i] + update[i] * candidate[i]).collect();
                let cache = GruCache { h_prev: h_prev.to_vec(), reset, update, candidate, gated_prev };
                (h_new, Some(cache))
            }
        };

        let head = |lin: &Linear, x: &[f64]| {
            let mut y = p[lin.bias..lin.bias + lin.rows].to_vec();
            matvec_add(&p[lin.weight..lin.weight + lin.rows * lin.cols], x, &mut y);
            y
        };
        let high_logits = head(&self.high, &features);
        let value_high = head(&self.value_high, &features)[0];
        let value_low = head(&self.value_low, &features)[0];
        let low_logits = prior.map(|z| self.low_logits_from(params, &features, z));

        let new_state = match self.gru {
            None => RecurrentState::zeros(0),
            Some(_) => RecurrentState::from_vec(features.clone()),
        };
        let cache = ForwardCache { layers, gru: gru_cache, features, prior };
        Ok((HeadOutputs { high_logits, low_logits, value_high, value_low }, new_state, cache))
    }

    /// Low-level logits for prior `z` given already computed features.
    pub fn low_logits_from(&self, params: &ParamStore, features: &[f64], z: usize) -> Vec<f64> {
        let p = params.as_slice();
        let lin = &self.low;
        let f = features.len();
        let mut y = p[lin.bias..lin.bias + lin.rows].to_vec();
        for (a, out) in y.iter_mut().enumerate() {
            let row = &p[lin.weight + a * lin.cols..lin.weight + (a + 1) * lin.cols];
            *out += row[..f].iter().zip(features).map(|(w, x)| w * x).sum::<f64>() + row[f + z];
        }
        y
    }

    /// Low-level logits for every prior, sharing the feature product.
    pub fn all_low_logits(&self, params: &ParamStore, features: &[f64]) -> Vec<Vec<f64>> {
        let p = params.as_slice();
        let lin = &self.low;
        let f = features.len();
        let base: Vec<f64> = (0..lin.rows)
            .map(|a| {
                let row = &p[lin.weight + a * lin.cols..lin.weight + (a + 1) * lin.cols];
                p[lin.bias + a] + row[..f].iter().zip(features).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect();
        (0..self.spec.num_priors)
            .map(|z| base.iter().enumerate().map(|(a, b)| b + p[lin.weight + a * lin.cols + f + z]).collect())
            .collect()
    }

    /// Accumulate the parameter gradient of the loss whose head cotangents
    /// are `cot` into `grad`. Returns the cotangent on the incoming recurrent
    /// state (empty without a recurrent cell).
    pub fn backward(
        &self,
        params: &ParamStore,
        cache: &ForwardCache,
        cot: &HeadCotangents,
        grad: &mut Gradient,
    ) -> Result<Vec<f64>, ApproxError> {
        self.check_params(params)?;
        if grad.len() != params.len() {
            return Err(ApproxError::ParamMismatch { expected: params.len(), got: grad.len() });
        }
        let p = params.as_slice();
        let g = grad.as_mut_slice();
        let f = cache.features.len();
        let mut d_feat = vec![0.0; f];

        if let Some(d) = &cot.high_logits {
            if d.len() != self.high.rows {
                return Err(ApproxError::CotangentMismatch("high_logits"));
            }
            let lin = &self.high;
            for (i, &di) in d.iter().enumerate() {
                g[lin.bias + i] += di;
            }
            let (w, dw) = (&p[lin.weight..lin.weight + lin.rows * lin.cols], lin.weight);
            linear_backward(w, &cache.features, d, &mut g[dw..dw + lin.rows * lin.cols], Some(&mut d_feat));
        }
        if let Some(d) = &cot.low_logits {
            let Some(z) = cache.prior else {
                return Err(ApproxError::CotangentMismatch("low_logits without a prior"));
            };
            if d.len() != self.low.rows {
                return Err(ApproxError::CotangentMismatch("low_logits"));
            }
            let lin = &self.low;
            for (a, &da) in d.iter().enumerate() {
                if da == 0.0 {
                    continue;
                }
                g[lin.bias + a] += da;
                let row = lin.weight + a * lin.cols;
                for j in 0..f {
                    g[row + j] += da * cache.features[j];
                    d_feat[j] += da * p[row + j];
                }
                g[row + f + z] += da;
            }
        }
        for (lin, d) in [(&self.value_high, cot.value_high), (&self.value_low, cot.value_low)] {
            if d == 0.0 {
                continue;
            }
            g[lin.bias] += d;
            for j in 0..f {
                g[lin.weight + j] += d * cache.features[j];
                d_feat[j] += d * p[lin.weight + j];
            }
        }
        if let Some(d) = &cot.hidden_out {
            if d.len() != f {
                return Err(ApproxError::CotangentMismatch("hidden_out"));
            }
            for (a, b) in d_feat.iter_mut().zip(d) {
                *a += b;
            }
        }

        let mut d_h_prev = Vec::new();
        let mut d_x = match (&self.gru, &cache.gru) {
            (None, _) => d_feat,
            (Some(o), Some(c)) => {
                let h = o.hidden;
                let n_in = o.input;
                let x = cache.layers.last().unwrap();
                let mut dx = vec![0.0; n_in];
                d_h_prev = vec![0.0; h];
                let mut d_cand_pre = vec![0.0; h];
                let mut d_upd_pre = vec![0.0; h];
                for i in 0..h {
                    let dh = d_feat[i];
                    d_h_prev[i] += dh * (1.0 - c.update[i]);
                    let dc = dh * c.update[i];
                    let du = dh * (c.candidate[i] - c.h_prev[i]);
                    d_cand_pre[i] = dc * (1.0 - c.candidate[i] * c.candidate[i]);
                    d_upd_pre[i] = du * c.update[i] * (1.0 - c.update[i]);
                }
                // Candidate gate reads the reset-gated previous state.
                let (wi, wh, b) = o.candidate;
                let mut d_gated = vec![0.0; h];
                for i in 0..h {
                    g[b + i] += d_cand_pre[i];
                }
                linear_backward(&p[wi..wi + h * n_in], x, &d_cand_pre, &mut g[wi..wi + h * n_in], Some(&mut dx));
                linear_backward(
                    &p[wh..wh + h * h],
                    &c.gated_prev,
                    &d_cand_pre,
                    &mut g[wh..wh + h * h],
                    Some(&mut d_gated),
                );
                let mut d_reset_pre = vec![0.0; h];
                for i in 0..h {
                    d_h_prev[i] += d_gated[i] * c.reset[i];
                    let dr = d_gated[i] * c.h_prev[i];
                    d_reset_pre[i] = dr * c.reset[i] * (1.0 - c.reset[i]);
                }
                for ((wi, wh, b), d_pre) in [(o.update, &d_upd_pre), (o.reset, &d_reset_pre)] {
                    for i in 0..h {
                        g[b + i] += d_pre[i];
                    }
                    linear_backward(&p[wi..wi + h * n_in], x, d_pre, &mut g[wi..wi + h * n_in], Some(&mut dx));
                    linear_backward(&p[wh..wh + h * h], &c.h_prev, d_pre, &mut g[wh..wh + h * h], Some(&mut d_h_prev));
                }
                dx
            }
            (Some(_), None) => return Err(ApproxError::CotangentMismatch("cache lacks recurrent activations")),
        };

        let act: Activation = self.spec.activation;
        for (li, lin) in self.trunk.iter().enumerate().rev() {
            let y = &cache.layers[li + 1];
            let x = &cache.layers[li];
            let d_pre: Vec<f64> = d_x.iter().zip(y).map(|(d, &yv)| d * act.derivative_from_output(yv)).collect();
            for i in 0..lin.rows {
                g[lin.bias + i] += d_pre[i];
            }
            let size = lin.rows * lin.cols;
            if li == 0 {
                linear_backward(
                    &p[lin.weight..lin.weight + size],
                    x,
                    &d_pre,
                    &mut g[lin.weight..lin.weight + size],
                    None,
                );
                d_x = Vec::new();
            } else {
                let mut dx = vec![0.0; lin.cols];
                linear_backward(
                    &p[lin.weight..lin.weight + size],
                    x,
                    &d_pre,
                    &mut g[lin.weight..lin.weight + size],
                    Some(&mut dx),
                );
                d_x = dx;
            }
        }
        Ok(d_h_prev)
    }

    /// Convenience wrapper returning a fresh gradient.
    pub fn gradient(
        &self,
        params: &ParamStore,
        cache: &ForwardCache,
        cot: &HeadCotangents,
    ) -> Result<Gradient, ApproxError> {
        let mut grad = Gradient::zeros(params.len());
        self.backward(params, cache, cot, &mut grad)?;
        Ok(grad)
    }
}
