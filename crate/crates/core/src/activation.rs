//! Scalar activations and their Gaussian moments.

use serde::{Deserialize, Serialize};

use crate::linalg::GaussHermite;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Relu => x.max(0.0),
        }
    }

    pub fn lipschitz(self) -> f64 {
        match self {
            Activation::Sigmoid => 0.25,
            _ => 1.0,
        }
    }

    /// `E σ(s G)` for `G ~ N(0, 1)`.
    pub fn gaussian_mean(self, s: f64) -> f64 {
        match self {
            Activation::Identity | Activation::Tanh => 0.0,
            Activation::Relu => s.abs() / (2.0 * std::f64::consts::PI).sqrt(),
            Activation::Sigmoid => GaussHermite::n200().expect(|g| self.apply(s * g)),
        }
    }

    /// `E σ(s G)²`, the squared `L2(γ)` norm of `σ(s ·)`.
    pub fn gaussian_sq_norm(self, s: f64) -> f64 {
        match self {
            Activation::Identity => s * s,
            Activation::Relu => 0.5 * s * s,
            _ => GaussHermite::n200().expect(|g| self.apply(s * g).powi(2)),
        }
    }

    /// `‖σ‖_{L2(γ)}`.
    pub fn gaussian_norm(self) -> f64 {
        self.gaussian_sq_norm(1.0).sqrt()
    }
}
