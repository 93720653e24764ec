use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Shape;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchKind {
    Mlp,
    SmallCnn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LayerSpec {
    /// Fully connected; input must be a flat `1 × inputs × 1` activation.
    Dense { inputs: usize, outputs: usize },
    /// 3×3 convolution, stride 1, zero padding 1.
    Conv3x3 { in_channels: usize, out_channels: usize },
    Relu,
    /// 2×2 max pooling, stride 2; an odd trailing row or column is dropped.
    MaxPool2,
    Flatten,
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv3x3 { .. } => "conv3x3",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool2 => "maxpool2",
            LayerSpec::Flatten => "flatten",
        }
    }

    /// `(weight count, bias count, fan-in)` for parametric layers.
    pub fn param_sizes(&self) -> Option<(usize, usize, usize)> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => Some((inputs * outputs, outputs, inputs)),
            LayerSpec::Conv3x3 {
                in_channels,
                out_channels,
            } => Some((9 * in_channels * out_channels, out_channels, 9 * in_channels)),
            _ => None,
        }
    }

    fn output_shape(&self, input: Shape, index: usize) -> Result<Shape> {
        let bad = |msg: String| Err(Error::Dimension(format!("layer {index} ({}): {msg}", self.name())));
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                if !input.is_vector() || input.width != inputs {
                    return bad(format!("expects a flat {inputs}-vector, got {input}"));
                }
                if outputs == 0 {
                    return bad("zero outputs".into());
                }
                Ok(Shape::vector(outputs))
            }
            LayerSpec::Conv3x3 {
                in_channels,
                out_channels,
            } => {
                if input.channels != in_channels {
                    return bad(format!("expects {in_channels} channels, got {input}"));
                }
                if out_channels == 0 {
                    return bad("zero output channels".into());
                }
                Ok(Shape::new(input.height, input.width, out_channels))
            }
            LayerSpec::Relu => Ok(input),
            LayerSpec::MaxPool2 => {
                if input.height < 2 || input.width < 2 {
                    return bad(format!("input {input} smaller than the 2x2 window"));
                }
                Ok(Shape::new(input.height / 2, input.width / 2, input.channels))
            }
            LayerSpec::Flatten => Ok(Shape::vector(input.len())),
        }
    }
}

/// Layer stack of a single-logit binary classifier.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub kind: ArchKind,
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

impl ArchitectureSpec {
    /// Dense layers with ReLU between them, ending in one logit. Non-vector
    /// inputs are flattened first.
    pub fn mlp(input: Shape, hidden: &[usize]) -> Result<Self> {
        let mut layers = Vec::new();
        if !input.is_vector() {
            layers.push(LayerSpec::Flatten);
        }
        let mut width = input.len();
        for &h in hidden {
            layers.push(LayerSpec::Dense {
                inputs: width,
                outputs: h,
            });
            layers.push(LayerSpec::Relu);
            width = h;
        }
        layers.push(LayerSpec::Dense {
            inputs: width,
            outputs: 1,
        });
        let spec = Self {
            kind: ArchKind::Mlp,
            input,
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Conv3x3 → ReLU → MaxPool2 blocks, then a dense head with one hidden
    /// ReLU layer of `dense_hidden` units (skipped when 0).
    pub fn small_cnn(input: Shape, channels: &[usize], dense_hidden: usize) -> Result<Self> {
        let mut layers = Vec::new();
        let mut c = input.channels;
        let (mut h, mut w) = (input.height, input.width);
        for &oc in channels {
            layers.push(LayerSpec::Conv3x3 {
                in_channels: c,
                out_channels: oc,
            });
            layers.push(LayerSpec::Relu);
            layers.push(LayerSpec::MaxPool2);
            c = oc;
            h /= 2;
            w /= 2;
        }
        layers.push(LayerSpec::Flatten);
        let mut width = h * w * c;
        if dense_hidden > 0 {
            layers.push(LayerSpec::Dense {
                inputs: width,
                outputs: dense_hidden,
            });
            layers.push(LayerSpec::Relu);
            width = dense_hidden;
        }
        layers.push(LayerSpec::Dense {
            inputs: width,
            outputs: 1,
        });
        let spec = Self {
            kind: ArchKind::SmallCnn,
            input,
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Default vector classifier: two hidden layers of 32 units.
    pub fn default_mlp(dim: usize) -> Result<Self> {
        Self::mlp(Shape::vector(dim), &[32, 32])
    }

    /// Default image classifier: 8- and 16-channel conv blocks, 32-unit head.
    pub fn default_cnn(input: Shape) -> Result<Self> {
        Self::small_cnn(input, &[8, 16], 32)
    }

    /// Output shape of every layer; fails unless shapes chain and the final
    /// layer emits exactly one logit.
    pub fn layer_shapes(&self) -> Result<Vec<Shape>> {
        if self.input.is_empty() {
            return Err(Error::Dimension(format!("empty input shape {}", self.input)));
        }
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut cur = self.input;
        for (i, l) in self.layers.iter().enumerate() {
            cur = l.output_shape(cur, i)?;
            shapes.push(cur);
        }
        if cur != Shape::vector(1) {
            return Err(Error::Dimension(format!(
                "final layer outputs {cur}, expected a single logit"
            )));
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        self.layer_shapes().map(|_| ())
    }

    /// Compact descriptor stored in checkpoints.
    pub fn descriptor(&self) -> String {
        serde_json::to_string(self).expect("architecture serializes")
    }

    pub fn from_descriptor(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s).map_err(|e| Error::Format {
            context: "architecture descriptor".into(),
            detail: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }
}
