use serde::{Deserialize, Serialize};

use super::ApproxError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrentCell {
    None,
    /// Gated recurrent unit with reset and update gates.
    Gated {
        hidden: usize,
    },
}

/// Shape of a policy-value network: fully connected trunk, optional gated
/// recurrent cell, then four linear heads. The low-level policy head sees the
/// trunk features with a one-hot prior appended.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub trunk: Vec<usize>,
    pub activation: Activation,
    pub recurrent: RecurrentCell,
    /// Number of sub-policy priors; the width of the high-level head.
    pub num_priors: usize,
    pub num_actions: usize,
}

impl NetworkSpec {
    /// Two 128-wide tanh layers and a 64-unit gated cell.
    pub fn standard(input_dim: usize, num_priors: usize) -> Self {
        Self {
            input_dim,
            trunk: vec![128, 128],
            activation: Activation::Tanh,
            recurrent: RecurrentCell::Gated { hidden: 64 },
            num_priors,
            num_actions: crate::env::NUM_ACTIONS,
        }
    }

    /// Feedforward network with a single prior, for flat policies.
    pub fn flat(input_dim: usize, trunk: Vec<usize>) -> Self {
        Self {
            input_dim,
            trunk,
            activation: Activation::Tanh,
            recurrent: RecurrentCell::None,
            num_priors: 1,
            num_actions: crate::env::NUM_ACTIONS,
        }
    }

    pub fn validate(&self) -> Result<(), ApproxError> {
        let widths_ok = self.input_dim >= 1
            && self.trunk.iter().all(|&w| w >= 1)
            && self.num_priors >= 1
            && self.num_actions >= 1
            && !matches!(self.recurrent, RecurrentCell::Gated { hidden: 0 });
        if widths_ok {
            Ok(())
        } else {
            Err(ApproxError::InvalidSpec(format!("{self:?}")))
        }
    }

    pub fn trunk_output_dim(&self) -> usize {
        self.trunk.last().copied().unwrap_or(self.input_dim)
    }

    /// Width of the features the heads read.
    pub fn feature_dim(&self) -> usize {
        match self.recurrent {
            RecurrentCell::None => self.trunk_output_dim(),
            RecurrentCell::Gated { hidden } => hidden,
        }
    }

    pub fn hidden_dim(&self) -> usize {
        match self.recurrent {
            RecurrentCell::None => 0,
            RecurrentCell::Gated { hidden } => hidden,
        }
    }

    /// Closed-form parameter count.
    pub fn param_count(&self) -> usize {
        let mut n = 0;
        let mut fan_in = self.input_dim;
        for &w in &self.trunk {
            n += w * fan_in + w;
            fan_in = w;
        }
        if let RecurrentCell::Gated { hidden } = self.recurrent {
            n += 3 * (hidden * fan_in + hidden * hidden + hidden);
        }
        let f = self.feature_dim();
        n += self.num_priors * f + self.num_priors;
        n += self.num_actions * (f + self.num_priors) + self.num_actions;
        n += 2 * (f + 1);
        n
    }
}

/// A named weight matrix or bias vector inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSlot {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorSlot {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Offsets of every tensor for one spec, in storage order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub slots: Vec<TensorSlot>,
    pub total: usize,
}

impl ParamLayout {
    pub fn for_spec(spec: &NetworkSpec) -> Self {
        let mut slots = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, rows: usize, cols: usize| {
            slots.push(TensorSlot { name, offset, rows, cols });
            offset += rows * cols;
        };
        let mut fan_in = spec.input_dim;
        for (i, &w) in spec.trunk.iter().enumerate() {
            push(format!("trunk.{i}.weight"), w, fan_in);
            push(format!("trunk.{i}.bias"), w, 1);
            fan_in = w;
        }
        if let RecurrentCell::Gated { hidden } = spec.recurrent {
            for gate in ["reset", "update", "candidate"] {
                push(format!("gru.{gate}.input_weight"), hidden, fan_in);
                push(format!("gru.{gate}.hidden_weight"), hidden, hidden);
                push(format!("gru.{gate}.bias"), hidden, 1);
            }
        }
        let f = spec.feature_dim();
        push("high.weight".into(), spec.num_priors, f);
        push("high.bias".into(), spec.num_priors, 1);
        push("low.weight".into(), spec.num_actions, f + spec.num_priors);
        push("low.bias".into(), spec.num_actions, 1);
        push("value_high.weight".into(), 1, f);
        push("value_high.bias".into(), 1, 1);
        push("value_low.weight".into(), 1, f);
        push("value_low.bias".into(), 1, 1);
        Self { slots, total: offset }
    }

    pub fn get(&self, name: &str) -> Option<&TensorSlot> {
        self.slots.iter().find(|s| s.name == name)
    }
}
