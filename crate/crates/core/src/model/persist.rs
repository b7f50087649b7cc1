use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SfLfgaaModel, TrainConfig, Variant};
use crate::error::{Error, Result};
use crate::numfmt;
use crate::tensor::{Activation, Dense, Matrix, Mlp};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LayerRecord {
    name: String,
    rows: usize,
    cols: usize,
    #[serde(with = "numfmt::vec17")]
    weights: Vec<f64>,
    #[serde(with = "numfmt::vec17")]
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    variant: Variant,
    config: TrainConfig,
    seed: u64,
    layers: Vec<LayerRecord>,
}

fn record(name: &str, d: &Dense) -> LayerRecord {
    LayerRecord {
        name: name.to_string(),
        rows: d.weights.rows(),
        cols: d.weights.cols(),
        weights: d.weights.data().to_vec(),
        bias: d.bias.clone(),
    }
}

fn layer(r: LayerRecord) -> Result<Dense> {
    if r.bias.len() != r.cols {
        return Err(Error::Format(format!("layer {}: bias length {} != cols {}", r.name, r.bias.len(), r.cols)));
    }
    let weights = Matrix::new(r.rows, r.cols, r.weights).map_err(|e| Error::Format(format!("layer {}: {e}", r.name)))?;
    Ok(Dense { weights, bias: r.bias })
}

pub fn model_to_json(model: &SfLfgaaModel) -> Result<String> {
    let mut layers = Vec::new();
    for (i, l) in model.trunk.layers().iter().enumerate() {
        layers.push(record(&format!("trunk.{i}"), l));
    }
    layers.push(record("aug_head", &model.aug_head));
    layers.push(record("att_head", &model.att_head));
    if let Some(sem) = &model.sem_embed {
        for (i, l) in sem.layers().iter().enumerate() {
            layers.push(record(&format!("sem_embed.{i}"), l));
        }
    }
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        variant: model.variant,
        config: model.config.clone(),
        seed: model.config.seed,
        layers,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn model_from_json(text: &str) -> Result<SfLfgaaModel> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Format("missing 'version'".into()))?;
    if version != u64::from(MODEL_FORMAT_VERSION) {
        return Err(Error::Version {
            found: version as u32,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))?;
    if file.seed != file.config.seed {
        return Err(Error::Format("seed disagrees with config.seed".into()));
    }
    let expected = match file.variant {
        Variant::SfLfgaa => 6,
        Variant::Lfgaa => 4,
    };
    if file.layers.len() != expected {
        return Err(Error::Format(format!("expected {expected} layers, found {}", file.layers.len())));
    }
    let mut it = file.layers.into_iter().map(layer);
    let mut next = || it.next().expect("count checked");
    let trunk = Mlp::from_layers(vec![next()?, next()?], Activation::Relu).map_err(|e| Error::Format(e.to_string()))?;
    let aug = next()?;
    let att = next()?;
    let sem = match file.variant {
        Variant::SfLfgaa => Some(
            Mlp::from_layers(vec![next()?, next()?], Activation::Identity).map_err(|e| Error::Format(e.to_string()))?,
        ),
        Variant::Lfgaa => None,
    };
    SfLfgaaModel::from_parts(file.config, file.variant, trunk, aug, att, sem)
}

pub fn save_model(model: &SfLfgaaModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = model_to_json(model)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Loads a model; any corruption yields an error and no model.
pub fn load_model(path: impl AsRef<Path>) -> Result<SfLfgaaModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(variant: Variant) -> SfLfgaaModel {
        let cfg = TrainConfig {
            h1: 6,
            h2: 5,
            gamma: 0.005,
            ..TrainConfig::default()
        };
        SfLfgaaModel::new(4, 3, cfg, variant).unwrap()
    }

    #[test]
    fn roundtrip_is_exact() {
        for v in [Variant::SfLfgaa, Variant::Lfgaa] {
            let m = model(v);
            let back = model_from_json(&model_to_json(&m).unwrap()).unwrap();
            assert_eq!(back, m);
            let x = Matrix::from_fn(3, 4, |i, j| (i as f64 - j as f64) * 0.7);
            let (a, b) = (m.forward_full(&x).unwrap(), back.forward_full(&x).unwrap());
            assert_eq!(a.attention, b.attention);
            assert_eq!(a.adjusted, b.adjusted);
        }
    }

    #[test]
    fn manifest_fields() {
        let text = model_to_json(&model(Variant::SfLfgaa)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["version"], 1);
        assert_eq!(v["config"]["gamma"], 0.005);
        assert_eq!(v["seed"], 7);
        assert_eq!(v["layers"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn corruption_detected() {
        let text = model_to_json(&model(Variant::SfLfgaa)).unwrap();
        assert!(matches!(model_from_json(&text[..text.len() / 2]), Err(Error::Format(_))));
        let bumped = text.replacen("\"version\": 1", "\"version\": 9", 1);
        assert!(matches!(model_from_json(&bumped), Err(Error::Version { found: 9, .. })));
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["layers"][2]["cols"] = serde_json::json!(7);
        assert!(model_from_json(&v.to_string()).is_err());
    }
}
