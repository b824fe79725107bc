use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Component-wise activation functions.
///
/// At exactly `y == 0` the ReLU family uses the positive-side derivative (1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActivationKind {
    Identity,
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    Sigmoid,
}

impl ActivationKind {
    /// Returns `(f(y), f'(y))`.
    pub fn eval(self, y: f64) -> (f64, f64) {
        match self {
            ActivationKind::Identity => (y, 1.0),
            ActivationKind::Relu => {
                if y >= 0.0 {
                    (y, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            ActivationKind::LeakyRelu { slope } => {
                if y >= 0.0 {
                    (y, 1.0)
                } else {
                    (slope * y, slope)
                }
            }
            ActivationKind::Tanh => {
                let t = y.tanh();
                (t, 1.0 - t * t)
            }
            ActivationKind::Sigmoid => {
                let s = if y >= 0.0 {
                    1.0 / (1.0 + (-y).exp())
                } else {
                    let e = y.exp();
                    e / (1.0 + e)
                };
                (s, s * (1.0 - s))
            }
        }
    }

    #[inline]
    pub fn value(self, y: f64) -> f64 {
        self.eval(y).0
    }

    #[inline]
    pub fn derivative(self, y: f64) -> f64 {
        self.eval(y).1
    }

    pub fn is_smooth(self) -> bool {
        matches!(
            self,
            ActivationKind::Identity | ActivationKind::Tanh | ActivationKind::Sigmoid
        )
    }

    /// Default operation-count constant for one activation evaluation.
    pub fn default_gamma(self) -> u64 {
        match self {
            ActivationKind::Identity => 0,
            ActivationKind::Relu | ActivationKind::LeakyRelu { .. } => 1,
            ActivationKind::Tanh | ActivationKind::Sigmoid => 4,
        }
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActivationKind::Identity => f.write_str("identity"),
            ActivationKind::Relu => f.write_str("relu"),
            ActivationKind::LeakyRelu { slope } => write!(f, "leaky:{slope:?}"),
            ActivationKind::Tanh => f.write_str("tanh"),
            ActivationKind::Sigmoid => f.write_str("sigmoid"),
        }
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(ActivationKind::Identity),
            "relu" => Ok(ActivationKind::Relu),
            "tanh" => Ok(ActivationKind::Tanh),
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            _ => {
                let slope = s
                    .strip_prefix("leaky:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Invalid(format!("unknown activation `{s}`")))?;
                Ok(ActivationKind::LeakyRelu { slope })
            }
        }
    }
}

impl Serialize for ActivationKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ActivationKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
