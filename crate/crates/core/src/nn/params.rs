use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::tensor::Tensor;

/// Input channels, spatial size and class count of the CIFAR-scale CNN.
pub const CNN_CHANNELS: usize = 3;
pub const CNN_SIDE: usize = 32;
pub const CNN_CLASSES: usize = 10;
pub(crate) const CONV1_OUT: usize = 32;
pub(crate) const CONV2_OUT: usize = 64;
pub(crate) const KERNEL: usize = 3;
pub(crate) const FC1_OUT: usize = 128;
pub(crate) const FLAT: usize = CONV2_OUT * (CNN_SIDE / 4) * (CNN_SIDE / 4);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    /// conv(3→32) relu pool, conv(32→64) relu pool, fc(4096→128) relu, fc(128→10), log-softmax.
    PaperCnn,
    /// fc(inputs→hidden) relu, fc(hidden→classes), log-softmax.
    ToyMlp {
        inputs: usize,
        hidden: usize,
        classes: usize,
    },
}

pub(crate) struct LayerSchema {
    pub name: &'static str,
    pub shape: Vec<usize>,
    /// `Some(fan_in)` for weights, `None` for biases.
    pub fan_in: Option<usize>,
}

impl Architecture {
    pub fn num_classes(&self) -> usize {
        match *self {
            Architecture::PaperCnn => CNN_CLASSES,
            Architecture::ToyMlp { classes, .. } => classes,
        }
    }

    /// Shape of a single input example.
    pub fn input_shape(&self) -> Vec<usize> {
        match *self {
            Architecture::PaperCnn => vec![CNN_CHANNELS, CNN_SIDE, CNN_SIDE],
            Architecture::ToyMlp { inputs, .. } => vec![inputs],
        }
    }

    pub(crate) fn schema(&self) -> Vec<LayerSchema> {
        let weight = |name, shape: Vec<usize>, fan_in| LayerSchema {
            name,
            shape,
            fan_in: Some(fan_in),
        };
        let bias = |name, n| LayerSchema {
            name,
            shape: vec![n],
            fan_in: None,
        };
        match *self {
            Architecture::PaperCnn => vec![
                weight(
                    "conv1.weight",
                    vec![CONV1_OUT, CNN_CHANNELS, KERNEL, KERNEL],
                    CNN_CHANNELS * KERNEL * KERNEL,
                ),
                bias("conv1.bias", CONV1_OUT),
                weight(
                    "conv2.weight",
                    vec![CONV2_OUT, CONV1_OUT, KERNEL, KERNEL],
                    CONV1_OUT * KERNEL * KERNEL,
                ),
                bias("conv2.bias", CONV2_OUT),
                weight("fc1.weight", vec![FC1_OUT, FLAT], FLAT),
                bias("fc1.bias", FC1_OUT),
                weight("fc2.weight", vec![CNN_CLASSES, FC1_OUT], FC1_OUT),
                bias("fc2.bias", CNN_CLASSES),
            ],
            Architecture::ToyMlp {
                inputs,
                hidden,
                classes,
            } => vec![
                weight("fc1.weight", vec![hidden, inputs], inputs),
                bias("fc1.bias", hidden),
                weight("fc2.weight", vec![classes, hidden], hidden),
                bias("fc2.bias", classes),
            ],
        }
    }

    fn validate(&self) -> Result<()> {
        if let Architecture::ToyMlp {
            inputs,
            hidden,
            classes,
        } = *self
        {
            if inputs == 0 || hidden == 0 || classes < 2 {
                return Err(Error::Dimension(format!(
                    "ToyMlp needs inputs>0, hidden>0, classes>=2; got {inputs}/{hidden}/{classes}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub name: String,
    pub tensor: Tensor,
}

/// Ordered, named weight and bias tensors of one architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    architecture: Architecture,
    layers: Vec<Layer>,
}

impl ModelParams {
    pub fn new(architecture: Architecture, layers: Vec<Layer>) -> Result<Self> {
        architecture.validate()?;
        let schema = architecture.schema();
        if schema.len() != layers.len() {
            return Err(Error::Dimension(format!(
                "{architecture:?} has {} layers, got {}",
                schema.len(),
                layers.len()
            )));
        }
        for (s, l) in schema.iter().zip(&layers) {
            if s.name != l.name || s.shape != l.tensor.shape() {
                return Err(Error::Dimension(format!(
                    "layer {} {:?} does not match schema {} {:?}",
                    l.name,
                    l.tensor.shape(),
                    s.name,
                    s.shape
                )));
            }
            l.tensor.ensure_finite(&l.name)?;
        }
        Ok(Self {
            architecture,
            layers,
        })
    }

    pub fn zeros(architecture: Architecture) -> Result<Self> {
        architecture.validate()?;
        let layers = architecture
            .schema()
            .into_iter()
            .map(|s| Layer {
                name: s.name.to_string(),
                tensor: Tensor::zeros(s.shape),
            })
            .collect();
        Ok(Self {
            architecture,
            layers,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.architecture
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> &[f32] {
        self.layers[index].tensor.data()
    }

    pub(crate) fn layer_mut(&mut self, index: usize) -> &mut [f32] {
        self.layers[index].tensor.data_mut()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.tensor.len()).sum()
    }

    /// All parameters, flattened in layer order.
    pub fn flatten(&self) -> Vec<f32> {
        self.layers
            .iter()
            .flat_map(|l| l.tensor.data().iter().copied())
            .collect()
    }

    pub fn ensure_same_architecture(&self, other: &ModelParams) -> Result<()> {
        if self.architecture != other.architecture {
            return Err(Error::Dimension(format!(
                "architecture mismatch: {:?} vs {:?}",
                self.architecture, other.architecture
            )));
        }
        Ok(())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        self.layers
            .iter()
            .try_for_each(|l| l.tensor.ensure_finite(&l.name))
    }

    /// `‖self − other‖²` summed over every layer, accumulated in f64.
    pub fn squared_distance(&self, other: &ModelParams) -> Result<f64> {
        self.ensure_same_architecture(other)?;
        Ok(self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| a.tensor.squared_distance(&b.tensor))
            .sum())
    }
}

/// He-normal weights (std = sqrt(2 / fan_in)) and zero biases, seeded.
pub fn init_params(architecture: Architecture, seed: u64) -> Result<ModelParams> {
    let mut model = ModelParams::zeros(architecture)?;
    let mut rng = rng::stream(seed, Purpose::Init, &[]);
    for (i, s) in architecture.schema().into_iter().enumerate() {
        if let Some(fan_in) = s.fan_in {
            let std = (2.0 / fan_in as f64).sqrt() as f32;
            let normal = Normal::new(0.0f32, std).expect("positive std");
            for v in model.layer_mut(i) {
                *v = normal.sample(&mut rng);
            }
        }
    }
    Ok(model)
}
