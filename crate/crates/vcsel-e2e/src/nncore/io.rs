//! Versioned JSON form of a [`Network`]:
//!
//! ```json
//! {"format": "vcsel-e2e.network", "version": 1,
//!  "layers": [{"inputs": 20, "outputs": 4, "activation": "relu",
//!              "weights": [...row-major...], "biases": [...], "mask": null}]}
//! ```

use serde::{Deserialize, Serialize};

use super::network::{Activation, Dense, Network};
use crate::error::{invalid, Result};

pub const FORMAT: &str = "vcsel-e2e.network";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    weights: Vec<f64>,
    biases: Vec<f64>,
    mask: Option<Vec<bool>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    format: String,
    version: u32,
    layers: Vec<LayerFile>,
}

pub fn to_json(net: &Network) -> String {
    let file = NetworkFile {
        format: FORMAT.into(),
        version: VERSION,
        layers: net
            .layers()
            .iter()
            .map(|l| LayerFile {
                inputs: l.inputs,
                outputs: l.outputs,
                activation: l.activation,
                weights: l.weights.clone(),
                biases: l.biases.clone(),
                mask: l.mask.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("network serialises")
}

pub fn from_json(text: &str) -> Result<Network> {
    let file: NetworkFile = serde_json::from_str(text)?;
    if file.format != FORMAT {
        return Err(invalid(format!("not a network file (format {:?})", file.format)));
    }
    if file.version != VERSION {
        return Err(invalid(format!("unsupported network file version {}", file.version)));
    }
    let layers = file
        .layers
        .into_iter()
        .map(|l| {
            let mut d = Dense::new(l.inputs, l.outputs, l.weights, l.biases, l.activation)?;
            d.mask = l.mask;
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::prune_to;

    #[test]
    fn round_trip_is_exact() {
        let mut net = Network::random(&[5, 4, 3], &[Activation::Relu, Activation::Softmax], 11).unwrap();
        prune_to(&mut net, 0.5);
        let back = from_json(&to_json(&net)).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn rejects_other_versions() {
        let net = Network::random(&[1, 1], &[Activation::Linear], 0).unwrap();
        let text = to_json(&net).replace("\"version\": 1", "\"version\": 9");
        assert!(from_json(&text).is_err());
    }
}
