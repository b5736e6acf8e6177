//! Model files: `SNNM` magic, u32 format version, u32 manifest length, a
//! JSON manifest describing geometry and hyperparameters, then every
//! parameterized layer's weights followed by its biases as raw
//! little-endian scalars of the manifest's dtype.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layer::{Conv2d, Dense, LayerSpec};
use super::lif::LifParams;
use super::model::{InputCoding, NetworkModel};
use crate::bytes::Reader;
use crate::error::{Error, Result};
use crate::scalar::{DType, Scalar};

const MAGIC: &[u8; 4] = b"SNNM";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    dtype: String,
    timesteps: usize,
    coding: InputCoding,
    tau: f64,
    v_th: f64,
    input_shape: Vec<usize>,
    layers: Vec<LayerEntry>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct LayerEntry {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    in_features: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_features: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    in_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out_channels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    padding: Option<usize>,
}

fn dtype_name(d: DType) -> &'static str {
    match d {
        DType::F32 => "f32",
        DType::F64 => "f64",
        DType::Binary => "u8",
    }
}

impl LayerEntry {
    fn of<S: Scalar>(layer: &LayerSpec<S>) -> Self {
        let mut e = LayerEntry {
            kind: layer.kind().to_string(),
            ..Default::default()
        };
        match layer {
            LayerSpec::Dense(d) | LayerSpec::Head(d) => {
                e.in_features = Some(d.in_features);
                e.out_features = Some(d.out_features);
            }
            LayerSpec::Conv2d(c) => {
                e.in_channels = Some(c.in_channels);
                e.out_channels = Some(c.out_channels);
                e.kernel = Some(c.kernel);
                e.stride = Some(c.stride);
                e.padding = Some(c.padding);
            }
            LayerSpec::AvgPool2d { kernel } => e.kernel = Some(*kernel),
            LayerSpec::Flatten | LayerSpec::Lif => {}
        }
        e
    }

    fn field(&self, value: Option<usize>, name: &str) -> Result<usize> {
        value.ok_or_else(|| Error::InvalidModel(format!("{} layer is missing `{name}`", self.kind)))
    }

    /// Builds a zero-initialised layer of the described geometry.
    fn skeleton<S: Scalar>(&self) -> Result<LayerSpec<S>> {
        Ok(match self.kind.as_str() {
            "dense" | "output-head" => {
                let d = Dense::zeros(
                    self.field(self.in_features, "in_features")?,
                    self.field(self.out_features, "out_features")?,
                );
                if self.kind == "dense" {
                    LayerSpec::Dense(d)
                } else {
                    LayerSpec::Head(d)
                }
            }
            "conv2d" => LayerSpec::Conv2d(Conv2d::zeros(
                self.field(self.in_channels, "in_channels")?,
                self.field(self.out_channels, "out_channels")?,
                self.field(self.kernel, "kernel")?,
                self.field(self.stride, "stride")?,
                self.field(self.padding, "padding")?,
            )),
            "avgpool2d" => LayerSpec::AvgPool2d {
                kernel: self.field(self.kernel, "kernel")?,
            },
            "flatten" => LayerSpec::Flatten,
            "lif" => LayerSpec::Lif,
            other => return Err(Error::UnsupportedLayerKind(other.to_string())),
        })
    }
}

pub fn encode_model<S: Scalar>(m: &NetworkModel<S>) -> Result<Vec<u8>> {
    let manifest = Manifest {
        dtype: dtype_name(S::DTYPE).to_string(),
        timesteps: m.timesteps(),
        coding: m.coding(),
        tau: m.lif().tau.as_f64(),
        v_th: m.lif().v_th.as_f64(),
        input_shape: m.input_shape().to_vec(),
        layers: m.layers().iter().map(LayerEntry::of).collect(),
    };
    let json = serde_json::to_vec(&manifest).map_err(|e| Error::invalid(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for layer in m.layers() {
        if let Some((w, b)) = layer.params() {
            w.iter().chain(b).for_each(|v| v.write_le(&mut out));
        }
    }
    Ok(out)
}

pub fn decode_model<S: Scalar>(bytes: &[u8]) -> Result<NetworkModel<S>> {
    let mut r = Reader::new(bytes);
    r.expect_magic(MAGIC)?;
    let version = r.u32()?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let len = r.u32()? as usize;
    let manifest_at = r.offset();
    let json = r.take(len)?;
    let manifest: Manifest = serde_json::from_slice(json).map_err(|e| {
        let offset = if e.line() == 1 {
            manifest_at + e.column().saturating_sub(1)
        } else {
            manifest_at
        };
        Error::parse(offset, format!("manifest: {e}"))
    })?;
    if manifest.dtype != dtype_name(S::DTYPE) {
        return Err(Error::parse(
            manifest_at,
            format!(
                "model stores {} weights, {} requested",
                manifest.dtype,
                dtype_name(S::DTYPE)
            ),
        ));
    }
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        let mut layer: LayerSpec<S> = entry.skeleton()?;
        if let Some((w, b)) = layer.params_mut() {
            for slot in w.iter_mut().chain(b.iter_mut()) {
                *slot = S::read_le(r.take(S::BYTES)?);
            }
        }
        layers.push(layer);
    }
    r.expect_end()?;
    NetworkModel::new(
        manifest.input_shape,
        layers,
        LifParams {
            tau: S::lit(manifest.tau),
            v_th: S::lit(manifest.v_th),
        },
        manifest.timesteps,
        manifest.coding,
    )
}

pub fn save_model<S: Scalar>(m: &NetworkModel<S>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_model(m)?)?;
    Ok(())
}

pub fn load_model<S: Scalar>(path: impl AsRef<Path>) -> Result<NetworkModel<S>> {
    decode_model(&std::fs::read(path)?)
}
