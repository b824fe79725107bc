//! Network files.
//!
//! ```json
//! {"kind":"fnn","widths":[2,2],"tau":1,
//!  "layers":[{"w":[0.1,0.2,0.3,0.4],"b":[0.0,0.5],"act":"tanh"}]}
//! ```
//!
//! `w` is row-major `n_k × n_{k−1}`; recurrent layers add a row-major `u`.
//! Reals are written as shortest round-trip decimals, so reading a file back
//! reproduces every weight bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activation::ActivationKind;
use crate::error::{check_len, Error, Result};
use crate::linalg::Matrix;
use crate::net::{FeedForwardNet, Layer};
use crate::rnn::{RecurrentLayer, RecurrentNet};

use super::generate::Network;
use super::spec::NetworkKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub kind: NetworkKind,
    pub widths: Vec<usize>,
    pub tau: usize,
    pub layers: Vec<LayerFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    pub w: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
    pub b: Vec<f64>,
    pub act: ActivationKind,
}

impl NetworkFile {
    pub fn from_network(net: &Network) -> Self {
        match net {
            Network::Fnn(n) => Self {
                kind: NetworkKind::Fnn,
                widths: n.widths(),
                tau: 1,
                layers: n
                    .layers()
                    .iter()
                    .map(|l| LayerFile {
                        w: l.weights.as_slice().to_vec(),
                        u: None,
                        b: l.bias.clone(),
                        act: l.activation,
                    })
                    .collect(),
            },
            Network::Rnn(n) => Self {
                kind: NetworkKind::Rnn,
                widths: n.widths(),
                tau: n.horizon(),
                layers: n
                    .layers()
                    .iter()
                    .map(|l| LayerFile {
                        w: l.weights.as_slice().to_vec(),
                        u: Some(l.recurrent.as_slice().to_vec()),
                        b: l.bias.clone(),
                        act: l.activation,
                    })
                    .collect(),
            },
        }
    }

    pub fn to_network(&self) -> Result<Network> {
        check_len("network file layers", self.widths.len().saturating_sub(1), self.layers.len())?;
        let w = &self.widths;
        match self.kind {
            NetworkKind::Fnn => {
                let layers = self
                    .layers
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        let weights = Matrix::from_row_major(w[i + 1], w[i], l.w.clone())?;
                        Layer::new(weights, l.b.clone(), l.act)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Network::Fnn(FeedForwardNet::new(layers)?))
            }
            NetworkKind::Rnn => {
                let layers = self
                    .layers
                    .iter()
                    .enumerate()
                    .map(|(i, l)| {
                        let weights = Matrix::from_row_major(w[i + 1], w[i], l.w.clone())?;
                        let u = l
                            .u
                            .clone()
                            .ok_or_else(|| Error::Format(format!("layer {} lacks `u`", i + 1)))?;
                        let recurrent = Matrix::from_row_major(w[i + 1], w[i + 1], u)?;
                        RecurrentLayer::new(weights, recurrent, l.b.clone(), l.act)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Network::Rnn(RecurrentNet::new(layers, self.tau)?))
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network files always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

pub fn write_network(path: &Path, net: &Network) -> Result<()> {
    let mut text = NetworkFile::from_network(net).to_json();
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn read_network(path: &Path) -> Result<Network> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    NetworkFile::from_json(&text)?.to_network()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{generate_network, ExperimentSpec};

    #[test]
    fn round_trip_is_exact() {
        for spec in [
            ExperimentSpec::fnn(3, 3, ActivationKind::Sigmoid, 5),
            ExperimentSpec::rnn(2, 2, 3, ActivationKind::LeakyRelu { slope: 0.01 }, 5),
        ] {
            let net = generate_network(&spec).unwrap();
            let text = NetworkFile::from_network(&net).to_json();
            let back = NetworkFile::from_json(&text).unwrap().to_network().unwrap();
            assert_eq!(back, net);
        }
    }

    #[test]
    fn rejects_wrong_weight_count() {
        let text = r#"{"kind":"fnn","widths":[2,1],"tau":1,
            "layers":[{"w":[1.0],"b":[0.0],"act":"relu"}]}"#;
        let file = NetworkFile::from_json(text).unwrap();
        assert!(file.to_network().is_err());
    }
}
