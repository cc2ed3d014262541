use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pointwise nonlinearity applied after each hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu { slope: f64 },
    Relu,
    /// `min(max(x, 0), 6)`
    Relu6,
    /// No nonlinearity; turns a learner into a (factored) linear model.
    Identity,
}

impl Activation {
    pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

    pub fn leaky_relu() -> Self {
        Activation::LeakyRelu {
            slope: Self::DEFAULT_LEAKY_SLOPE,
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Relu => x.max(0.0),
            Activation::Relu6 => x.clamp(0.0, 6.0),
            Activation::Identity => x,
        }
    }

    /// Derivative at `x`; kinks take the left-hand value.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if x > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Relu6 => {
                if x > 0.0 && x < 6.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    /// Points where the derivative is discontinuous.
    pub fn kinks(self) -> &'static [f64] {
        match self {
            Activation::LeakyRelu { .. } | Activation::Relu => &[0.0],
            Activation::Relu6 => &[0.0, 6.0],
            Activation::Identity => &[],
        }
    }
}

/// Shape and nonlinearity of one weak learner.
///
/// Hidden layers `0..n-1` use `activation`; the last hidden layer (whose
/// output is the penultimate feature block) uses `penultimate_activation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerArch {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    pub penultimate_activation: Activation,
    pub use_batch_norm: bool,
}

impl LearnerArch {
    pub const MAX_HIDDEN_LAYERS: usize = 4;

    /// Leaky ReLU hidden layers, ReLU penultimate layer, batch norm on.
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>) -> Self {
        Self {
            input_dim,
            hidden_dims,
            activation: Activation::leaky_relu(),
            penultimate_activation: Activation::Relu,
            use_batch_norm: true,
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn with_penultimate_activation(mut self, activation: Activation) -> Self {
        self.penultimate_activation = activation;
        self
    }

    pub fn with_batch_norm(mut self, on: bool) -> Self {
        self.use_batch_norm = on;
        self
    }

    /// Same architecture with a different input width.
    pub fn with_input_dim(&self, input_dim: usize) -> Self {
        Self {
            input_dim,
            ..self.clone()
        }
    }

    pub fn penultimate_dim(&self) -> usize {
        self.hidden_dims.last().copied().unwrap_or(0)
    }

    pub fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.hidden_dims.len() {
            self.penultimate_activation
        } else {
            self.activation
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("learner input dimension must be positive".into()));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.len() > Self::MAX_HIDDEN_LAYERS {
            return Err(Error::Config(format!(
                "a weak learner needs 1..={} hidden layers, got {}",
                Self::MAX_HIDDEN_LAYERS,
                self.hidden_dims.len()
            )));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("hidden layer widths must be positive".into()));
        }
        for act in [self.activation, self.penultimate_activation] {
            if let Activation::LeakyRelu { slope } = act {
                if !slope.is_finite() {
                    return Err(Error::Config("leaky relu slope must be finite".into()));
                }
            }
        }
        Ok(())
    }
}
