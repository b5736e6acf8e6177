//! Leaky integrate-and-fire networks: layers, dynamics, forward execution
//! and model files.

mod file;
mod layer;
mod lif;
mod model;

pub use file::{decode_model, encode_model, load_model, save_model, MODEL_FORMAT_VERSION};
pub use layer::{Conv2d, Dense, LayerSpec, ParamGrads};
pub use lif::{lif_step, Firing, LifParams};
pub use model::{ForwardRecord, InputCoding, NetworkModel};
