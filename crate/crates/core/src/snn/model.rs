use serde::{Deserialize, Serialize};

use super::layer::LayerSpec;
use super::lif::{lif_update, Firing, LifParams};
use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use crate::tensor::Tensor;

/// How the input tensor was produced; informs attack domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputCoding {
    /// Static image replicated over time.
    Direct,
    /// Bernoulli-sampled binary frames of a static image.
    Poisson,
    /// Event counts per time slice.
    IntegerFrames,
    /// Event frames capped at one.
    BinaryFrames,
}

impl InputCoding {
    pub fn name(self) -> &'static str {
        match self {
            InputCoding::Direct => "direct",
            InputCoding::Poisson => "poisson",
            InputCoding::IntegerFrames => "integer-frames",
            InputCoding::BinaryFrames => "binary-frames",
        }
    }
}

/// A layered spiking classifier. Immutable once built; forward passes
/// allocate their own state.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel<S> {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec<S>>,
    lif: LifParams<S>,
    timesteps: usize,
    coding: InputCoding,
    /// `shapes[l]` is the per-timestep input shape of layer `l`; the last
    /// entry is the head output shape.
    shapes: Vec<Vec<usize>>,
}

/// Everything recorded during a forward pass that backpropagation and the
/// membrane-potential statistics need.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardRecord<S> {
    pub firing: Firing<S>,
    /// Per LIF layer, potentials `(T, ...)` before reset.
    pub potentials: Vec<Tensor<S>>,
    /// Per LIF layer, spikes `(T, ...)`; exactly binary in hard mode.
    pub spikes: Vec<Tensor<S>>,
    /// Inputs of parameterized layers, `[layer][t]`; empty for other layers.
    pub layer_inputs: Vec<Vec<Vec<S>>>,
    /// Head pre-activations `(T, classes)`.
    pub head_outputs: Tensor<S>,
    /// Time-mean of the head outputs.
    pub logits: Tensor<S>,
}

impl<S: Scalar> NetworkModel<S> {
    pub fn new(
        input_shape: Vec<usize>,
        layers: Vec<LayerSpec<S>>,
        lif: LifParams<S>,
        timesteps: usize,
        coding: InputCoding,
    ) -> Result<Self> {
        lif.validate()?;
        if timesteps == 0 {
            return Err(Error::InvalidModel("timesteps must be at least 1".into()));
        }
        if !matches!(layers.last(), Some(LayerSpec::Head(_))) {
            return Err(Error::InvalidModel("last layer must be an output head".into()));
        }
        if layers[..layers.len() - 1]
            .iter()
            .any(|l| matches!(l, LayerSpec::Head(_)))
        {
            return Err(Error::InvalidModel("output head may only be the last layer".into()));
        }
        if !layers.iter().any(|l| matches!(l, LayerSpec::Lif)) {
            return Err(Error::InvalidModel("model needs at least one lif layer".into()));
        }
        let mut shapes = vec![input_shape.clone()];
        for layer in &layers {
            let next = layer.output_shape(shapes.last().unwrap())?;
            shapes.push(next);
        }
        Ok(Self {
            input_shape,
            layers,
            lif,
            timesteps,
            coding,
            shapes,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    /// `(T, ...input_shape)`.
    pub fn full_input_shape(&self) -> Vec<usize> {
        let mut s = vec![self.timesteps];
        s.extend_from_slice(&self.input_shape);
        s
    }

    pub fn layers(&self) -> &[LayerSpec<S>] {
        &self.layers
    }

    pub fn lif(&self) -> &LifParams<S> {
        &self.lif
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn coding(&self) -> InputCoding {
        self.coding
    }

    pub fn num_classes(&self) -> usize {
        self.shapes.last().unwrap()[0]
    }

    pub fn layer_input_shape(&self, layer: usize) -> &[usize] {
        &self.shapes[layer]
    }

    /// Indices of the LIF layers, in order.
    pub fn lif_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, LayerSpec::Lif))
            .map(|(i, _)| i)
            .collect()
    }

    /// Mutable access to `(weight, bias)` of every parameterized layer, in
    /// layer order. Geometry cannot change through this view.
    pub fn params_mut(&mut self) -> impl Iterator<Item = (usize, &mut [S], &mut [S])> {
        self.layers
            .iter_mut()
            .enumerate()
            .filter_map(|(i, l)| l.params_mut().map(|(w, b)| (i, w, b)))
    }

    pub fn cast<T: Scalar>(&self) -> NetworkModel<T> {
        NetworkModel {
            input_shape: self.input_shape.clone(),
            layers: self.layers.iter().map(|l| l.cast()).collect(),
            lif: LifParams {
                tau: cast(self.lif.tau),
                v_th: cast(self.lif.v_th),
            },
            timesteps: self.timesteps,
            coding: self.coding,
            shapes: self.shapes.clone(),
        }
    }

    /// Same architecture and weights with a different number of timesteps.
    pub fn with_timesteps(&self, timesteps: usize) -> Result<Self> {
        Self::new(
            self.input_shape.clone(),
            self.layers.clone(),
            self.lif,
            timesteps,
            self.coding,
        )
    }

    fn check_input(&self, x: &Tensor<S>) -> Result<()> {
        let expected = self.full_input_shape();
        if x.shape() != expected.as_slice() {
            return Err(Error::ShapeMismatch {
                expected,
                got: x.shape().to_vec(),
            });
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("network input"));
        }
        Ok(())
    }

    /// Hard-threshold forward pass with the full state history recorded.
    pub fn forward(&self, x: &Tensor<S>) -> Result<ForwardRecord<S>> {
        self.run(x, Firing::Hard, true)
    }

    /// Forward pass with sigmoid spikes of temperature `temp`.
    pub fn forward_soft(&self, x: &Tensor<S>, temp: S) -> Result<ForwardRecord<S>> {
        if !(temp > S::zero()) {
            return Err(Error::invalid(format!("soft temperature {temp} must be positive")));
        }
        self.run(x, Firing::Soft { temp }, true)
    }

    pub fn forward_with(&self, x: &Tensor<S>, firing: Firing<S>) -> Result<ForwardRecord<S>> {
        match firing {
            Firing::Hard => self.forward(x),
            Firing::Soft { temp } => self.forward_soft(x, temp),
        }
    }

    /// Logits only; skips recording.
    pub fn logits(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        Ok(self.run(x, Firing::Hard, false)?.logits)
    }

    /// Predicted class; ties resolve to the lowest index.
    pub fn predict(&self, x: &Tensor<S>) -> Result<usize> {
        Ok(self.logits(x)?.argmax())
    }

    fn run(&self, x: &Tensor<S>, firing: Firing<S>, record: bool) -> Result<ForwardRecord<S>> {
        self.check_input(x)?;
        let steps = self.timesteps;
        let lif_idx = self.lif_layers();
        let mut state: Vec<(Vec<S>, Vec<S>)> = lif_idx
            .iter()
            .map(|&l| {
                let n: usize = self.shapes[l].iter().product();
                (vec![S::zero(); n], vec![S::zero(); n])
            })
            .collect();
        let mut potentials: Vec<Vec<S>> = vec![Vec::new(); lif_idx.len()];
        let mut spikes: Vec<Vec<S>> = vec![Vec::new(); lif_idx.len()];
        let mut layer_inputs: Vec<Vec<Vec<S>>> = vec![Vec::new(); self.layers.len()];
        let classes = self.num_classes();
        let mut head = Vec::with_capacity(steps * classes);

        for t in 0..steps {
            let mut cur = x.slice_data(t).to_vec();
            let mut lif_k = 0;
            for (l, layer) in self.layers.iter().enumerate() {
                if let LayerSpec::Lif = layer {
                    let (u, s) = &mut state[lif_k];
                    lif_update(u, s, &cur, &self.lif, &firing);
                    if record {
                        potentials[lif_k].extend_from_slice(u);
                        spikes[lif_k].extend_from_slice(s);
                    }
                    cur.clear();
                    cur.extend_from_slice(s);
                    lif_k += 1;
                } else {
                    let n_out: usize = self.shapes[l + 1].iter().product();
                    let mut out = vec![S::zero(); n_out];
                    layer.forward(&cur, &self.shapes[l], &mut out);
                    if record && layer.params().is_some() {
                        layer_inputs[l].push(std::mem::replace(&mut cur, out));
                    } else {
                        cur = out;
                    }
                }
            }
            head.extend_from_slice(&cur);
        }

        let inv_t = S::one() / S::lit(steps as f64);
        let logits: Vec<S> = (0..classes)
            .map(|k| (0..steps).map(|t| head[t * classes + k]).sum::<S>() * inv_t)
            .collect();
        let with_time = |l: usize| {
            let mut s = vec![steps];
            s.extend_from_slice(&self.shapes[l]);
            s
        };
        let (potentials, spikes) = if record {
            let p = potentials
                .into_iter()
                .zip(&lif_idx)
                .map(|(d, &l)| Tensor::new(with_time(l), d))
                .collect::<Result<Vec<_>>>()?;
            let s = spikes
                .into_iter()
                .zip(&lif_idx)
                .map(|(d, &l)| Tensor::new(with_time(l), d))
                .collect::<Result<Vec<_>>>()?;
            (p, s)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(ForwardRecord {
            firing,
            potentials,
            spikes,
            layer_inputs,
            head_outputs: Tensor::new(vec![steps, classes], head)?,
            logits: Tensor::vector(logits),
        })
    }
}
