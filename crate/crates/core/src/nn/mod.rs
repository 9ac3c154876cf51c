//! Minimal neural-network engine: layer specs, parameters, manual
//! backpropagation, optimizers, and weighted-sampling training loops.

mod backward;
mod forward;
pub mod gradcheck;
mod loss;
mod optim;
mod sampler;
mod serialize;
mod train;

pub use backward::backward;
pub use forward::{forward, forward_from, forward_with_trace, softmax, ForwardTrace};
pub use loss::{loss_and_grad, Loss, LossTargets};
pub use optim::{adam_step, sgd_step, AdamState, OptimizerConfig, OptimizerKind};
pub use sampler::WeightedSampler;
pub use serialize::{
    load_network, load_network_file, save_network, save_network_file, ConnectionMask, MaskLayer,
};
pub use train::{accuracy, argmax_class, train_network, InitMode, TrainReport};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// One layer of a feed-forward network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    Conv {
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    },
    ReLU,
    MaxPool {
        window: usize,
        stride: usize,
    },
    GlobalAvgPool,
    Reshape,
    FullyConnected {
        in_dim: usize,
        out_dim: usize,
        bias: bool,
    },
}

impl LayerSpec {
    pub fn conv(kernel: usize, in_channels: usize, out_channels: usize, stride: usize, padding: usize, bias: bool) -> Self {
        LayerSpec::Conv { kernel, in_channels, out_channels, stride, padding, bias }
    }

    pub fn fc(in_dim: usize, out_dim: usize, bias: bool) -> Self {
        LayerSpec::FullyConnected { in_dim, out_dim, bias }
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self, LayerSpec::Conv { .. } | LayerSpec::FullyConnected { .. })
    }

    /// Trainable scalars in this layer. Biases count only when both the layer
    /// carries one and `include_bias` is set.
    pub fn param_count(&self, include_bias: bool) -> usize {
        match *self {
            LayerSpec::Conv { kernel, in_channels, out_channels, bias, .. } => {
                kernel * kernel * in_channels * out_channels
                    + if bias && include_bias { out_channels } else { 0 }
            }
            LayerSpec::FullyConnected { in_dim, out_dim, bias } => {
                in_dim * out_dim + if bias && include_bias { out_dim } else { 0 }
            }
            _ => 0,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::ReLU => "relu",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::GlobalAvgPool => "gap",
            LayerSpec::Reshape => "reshape",
            LayerSpec::FullyConnected { .. } => "fc",
        }
    }
}

/// Shape of the value flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueShape {
    Spatial { h: usize, w: usize, c: usize },
    Flat(usize),
}

impl ValueShape {
    pub fn dims(&self) -> Vec<usize> {
        match *self {
            ValueShape::Spatial { h, w, c } => vec![h, w, c],
            ValueShape::Flat(n) => vec![n],
        }
    }
}

/// A full network: ordered layers plus input geometry and class count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    pub input_shape: (usize, usize, usize),
    pub num_classes: usize,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>, input_shape: (usize, usize, usize), num_classes: usize) -> Result<Self> {
        let spec = NetworkSpec { layers, input_shape, num_classes };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks layer chaining, spatial feasibility, and that the final layer
    /// emits a length-`num_classes` vector.
    pub fn validate(&self) -> Result<()> {
        let mut shape = self.shape_flow()?;
        match shape.pop() {
            Some(ValueShape::Flat(n)) if n == self.num_classes => Ok(()),
            Some(last) => Err(Error::InvalidSpec {
                layer: self.layers.len(),
                reason: format!(
                    "network must end with a length-{} vector, ends with {:?}",
                    self.num_classes, last
                ),
            }),
            None => Err(Error::InvalidSpec { layer: 0, reason: "empty layer list".into() }),
        }
    }

    /// Value shape after every layer (length = layers.len()).
    pub fn shape_flow(&self) -> Result<Vec<ValueShape>> {
        let (h, w, c) = self.input_shape;
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::InvalidSpec { layer: 0, reason: "input extents must be >= 1".into() });
        }
        let mut cur = ValueShape::Spatial { h, w, c };
        let mut flow = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            cur = Self::apply_shape(layer, cur).map_err(|reason| Error::InvalidSpec { layer: i, reason })?;
            flow.push(cur);
        }
        Ok(flow)
    }

    fn apply_shape(layer: &LayerSpec, cur: ValueShape) -> std::result::Result<ValueShape, String> {
        match (layer, cur) {
            (
                &LayerSpec::Conv { kernel, in_channels, out_channels, stride, padding, .. },
                ValueShape::Spatial { h, w, c },
            ) => {
                if kernel == 0 || stride == 0 || in_channels == 0 || out_channels == 0 {
                    return Err("conv kernel/stride/channels must be >= 1".into());
                }
                if c != in_channels {
                    return Err(format!("conv expects {in_channels} input channels, gets {c}"));
                }
                let h_in = h + 2 * padding;
                let w_in = w + 2 * padding;
                if h_in < kernel || w_in < kernel {
                    return Err(format!("{kernel}x{kernel} kernel does not fit {h}x{w} input with padding {padding}"));
                }
                Ok(ValueShape::Spatial {
                    h: (h_in - kernel) / stride + 1,
                    w: (w_in - kernel) / stride + 1,
                    c: out_channels,
                })
            }
            (&LayerSpec::ReLU, any) => Ok(any),
            (&LayerSpec::MaxPool { window, stride }, ValueShape::Spatial { h, w, c }) => {
                if window == 0 || stride == 0 {
                    return Err("pool window/stride must be >= 1".into());
                }
                if h < window || w < window {
                    return Err(format!("{window}x{window} pool does not fit {h}x{w} input"));
                }
                Ok(ValueShape::Spatial {
                    h: (h - window) / stride + 1,
                    w: (w - window) / stride + 1,
                    c,
                })
            }
            (&LayerSpec::GlobalAvgPool, ValueShape::Spatial { c, .. }) => Ok(ValueShape::Flat(c)),
            (&LayerSpec::Reshape, ValueShape::Spatial { h, w, c }) => Ok(ValueShape::Flat(h * w * c)),
            (&LayerSpec::FullyConnected { in_dim, out_dim, .. }, ValueShape::Flat(n)) => {
                if in_dim == 0 || out_dim == 0 {
                    return Err("fc dims must be >= 1".into());
                }
                if n != in_dim {
                    return Err(format!("fc expects {in_dim} inputs, gets {n}"));
                }
                Ok(ValueShape::Flat(out_dim))
            }
            (layer, cur) => Err(format!("{} cannot follow a {:?} value", layer.kind_name(), cur)),
        }
    }

    /// Indices of parametric layers, in order.
    pub fn parametric_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_parametric())
            .map(|(i, _)| i)
            .collect()
    }

    /// Total trainable scalars under the given bias convention.
    pub fn param_count(&self, include_bias: bool) -> usize {
        self.layers.iter().map(|l| l.param_count(include_bias)).sum()
    }
}

/// Weight values for one parametric layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Tensor,
    pub bias: Option<Tensor>,
}

/// Weight values for every parametric layer of a [`NetworkSpec`], aligned 1:1
/// with `spec.parametric_layers()`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub layers: Vec<LayerParams>,
}

impl NetworkParams {
    /// All-zero parameters shaped for `spec`.
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layers = spec
            .layers
            .iter()
            .filter(|l| l.is_parametric())
            .map(|l| LayerParams {
                weights: Tensor::zeros(&weight_shape(l)),
                bias: bias_len(l).map(|n| Tensor::zeros(&[n])),
            })
            .collect();
        NetworkParams { layers }
    }

    /// Fan-in-scaled uniform init (bound = sqrt(1/fan_in)), biases zero.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let mut params = NetworkParams::zeros(spec);
        for (lp, layer) in params.layers.iter_mut().zip(spec.layers.iter().filter(|l| l.is_parametric())) {
            let fan_in = match *layer {
                LayerSpec::Conv { kernel, in_channels, .. } => kernel * kernel * in_channels,
                LayerSpec::FullyConnected { in_dim, .. } => in_dim,
                _ => unreachable!(),
            };
            let bound = (1.0 / fan_in as f64).sqrt();
            for w in lp.weights.data_mut() {
                *w = rng.uniform_in(-bound, bound);
            }
        }
        params
    }

    /// Trainable scalars actually stored (biases always counted when present).
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|lp| lp.weights.len() + lp.bias.as_ref().map_or(0, Tensor::len))
            .sum()
    }

    /// Checks that tensor shapes match the owning spec exactly.
    pub fn matches(&self, spec: &NetworkSpec) -> Result<()> {
        let parametric: Vec<&LayerSpec> = spec.layers.iter().filter(|l| l.is_parametric()).collect();
        if parametric.len() != self.layers.len() {
            return Err(Error::ShapeMismatch {
                context: "NetworkParams::matches".into(),
                expected: format!("{} parametric layers", parametric.len()),
                actual: format!("{}", self.layers.len()),
            });
        }
        for (i, (lp, layer)) in self.layers.iter().zip(parametric).enumerate() {
            let want = weight_shape(layer);
            if lp.weights.shape() != want.as_slice() {
                return Err(Error::ShapeMismatch {
                    context: format!("parametric layer {i} weights"),
                    expected: format!("{want:?}"),
                    actual: format!("{:?}", lp.weights.shape()),
                });
            }
            let want_bias = bias_len(layer);
            let got_bias = lp.bias.as_ref().map(Tensor::len);
            if want_bias != got_bias {
                return Err(Error::ShapeMismatch {
                    context: format!("parametric layer {i} bias"),
                    expected: format!("{want_bias:?}"),
                    actual: format!("{got_bias:?}"),
                });
            }
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|lp| lp.weights.all_finite() && lp.bias.as_ref().is_none_or(Tensor::all_finite))
    }
}

pub(crate) fn weight_shape(layer: &LayerSpec) -> Vec<usize> {
    match *layer {
        LayerSpec::Conv { kernel, in_channels, out_channels, .. } => {
            vec![out_channels, kernel, kernel, in_channels]
        }
        LayerSpec::FullyConnected { in_dim, out_dim, .. } => vec![out_dim, in_dim],
        _ => unreachable!("non-parametric layer has no weights"),
    }
}

pub(crate) fn bias_len(layer: &LayerSpec) -> Option<usize> {
    match *layer {
        LayerSpec::Conv { out_channels, bias: true, .. } => Some(out_channels),
        LayerSpec::FullyConnected { out_dim, bias: true, .. } => Some(out_dim),
        _ => None,
    }
}

/// Three-conv CNN: conv3x3(s1,p0) + ReLU + 2x2/2 max-pool per stage, then
/// global average pooling and one fc to the logits.
pub fn cnn3_spec(widths: [usize; 3], input_shape: (usize, usize, usize), num_classes: usize, bias: bool) -> Result<NetworkSpec> {
    let (_, _, c) = input_shape;
    let mut layers = Vec::new();
    let mut in_ch = c;
    for &w in &widths {
        layers.push(LayerSpec::conv(3, in_ch, w, 1, 0, bias));
        layers.push(LayerSpec::ReLU);
        layers.push(LayerSpec::MaxPool { window: 2, stride: 2 });
        in_ch = w;
    }
    layers.push(LayerSpec::GlobalAvgPool);
    layers.push(LayerSpec::fc(widths[2], num_classes, bias));
    NetworkSpec::new(layers, input_shape, num_classes)
}

/// Two-hidden-layer MLP over the flattened input, ReLU between fc layers.
pub fn mlp2_spec(hidden: [usize; 2], input_shape: (usize, usize, usize), num_classes: usize, bias: bool) -> Result<NetworkSpec> {
    let (h, w, c) = input_shape;
    let d = h * w * c;
    let layers = vec![
        LayerSpec::Reshape,
        LayerSpec::fc(d, hidden[0], bias),
        LayerSpec::ReLU,
        LayerSpec::fc(hidden[0], hidden[1], bias),
        LayerSpec::ReLU,
        LayerSpec::fc(hidden[1], num_classes, bias),
    ];
    NetworkSpec::new(layers, input_shape, num_classes)
}

/// VGG-style net: five conv3x3(s1,p1)+ReLU+2x2/2-pool stages, then three fc
/// layers (128, 128, classes) with ReLU after all but the last.
///
/// `final_bias` controls the logit layer separately so the network stays
/// mergeable with exact parameter conservation.
pub fn vgg8_spec(
    convs: [usize; 5],
    input_shape: (usize, usize, usize),
    num_classes: usize,
    bias: bool,
    final_bias: bool,
) -> Result<NetworkSpec> {
    let (_, _, c) = input_shape;
    let mut layers = Vec::new();
    let mut in_ch = c;
    for &w in &convs {
        layers.push(LayerSpec::conv(3, in_ch, w, 1, 1, bias));
        layers.push(LayerSpec::ReLU);
        layers.push(LayerSpec::MaxPool { window: 2, stride: 2 });
        in_ch = w;
    }
    layers.push(LayerSpec::Reshape);
    // After five 2x pools a 32x32 input is 1x1 spatial; flatten leaves convs[4].
    let (h, w, _) = input_shape;
    let spatial = (h >> 5).max(1) * (w >> 5).max(1);
    layers.push(LayerSpec::fc(convs[4] * spatial, 128, bias));
    layers.push(LayerSpec::ReLU);
    layers.push(LayerSpec::fc(128, 128, bias));
    layers.push(LayerSpec::ReLU);
    layers.push(LayerSpec::fc(128, num_classes, final_bias));
    NetworkSpec::new(layers, input_shape, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cnn3_param_count_matches_published_table() {
        let spec = cnn3_spec([6, 16, 32], (32, 32, 3), 10, false).unwrap();
        assert_eq!(spec.param_count(false), 5954);
        let spec100 = cnn3_spec([6, 16, 32], (32, 32, 3), 100, false).unwrap();
        assert_eq!(spec100.param_count(false), 8834);
    }

    #[test]
    fn mlp2_param_count_matches_published_table() {
        let spec = mlp2_spec([128, 128], (32, 32, 3), 10, false).unwrap();
        assert_eq!(spec.param_count(false), 410_880);
        let spec100 = mlp2_spec([128, 128], (32, 32, 3), 100, false).unwrap();
        assert_eq!(spec100.param_count(false), 422_400);
    }

    #[test]
    fn vgg8_param_count_matches_published_table() {
        let spec = vgg8_spec([6, 16, 32, 64, 64], (32, 32, 3), 10, true, true).unwrap();
        assert_eq!(spec.param_count(true), 87_234);
        let spec100 = vgg8_spec([6, 16, 32, 64, 64], (32, 32, 3), 100, true, true).unwrap();
        assert_eq!(spec100.param_count(true), 98_844);
    }

    #[test]
    fn param_count_bias_delta_is_total_biased_units() {
        let spec = vgg8_spec([6, 16, 32, 64, 64], (32, 32, 3), 10, true, true).unwrap();
        let units: usize = spec
            .layers
            .iter()
            .filter_map(|l| bias_len(l))
            .sum();
        assert_eq!(spec.param_count(true) - spec.param_count(false), units);
    }

    #[test]
    fn param_count_is_additive_over_layers() {
        let spec = cnn3_spec([6, 16, 32], (32, 32, 3), 10, false).unwrap();
        let by_layer: usize = spec.layers.iter().map(|l| l.param_count(false)).sum();
        assert_eq!(by_layer, spec.param_count(false));
    }

    #[test]
    fn validate_rejects_channel_mismatch() {
        let layers = vec![
            LayerSpec::conv(3, 3, 6, 1, 0, false),
            LayerSpec::conv(3, 7, 6, 1, 0, false),
            LayerSpec::GlobalAvgPool,
            LayerSpec::fc(6, 10, false),
        ];
        let err = NetworkSpec::new(layers, (32, 32, 3), 10).unwrap_err();
        match err {
            Error::InvalidSpec { layer, .. } => assert_eq!(layer, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn validate_rejects_wrong_logit_width() {
        let layers = vec![LayerSpec::Reshape, LayerSpec::fc(4, 3, false)];
        assert!(NetworkSpec::new(layers, (2, 2, 1), 10).is_err());
    }

    #[test]
    fn validate_rejects_pool_that_exhausts_spatial_dims() {
        let mut layers = Vec::new();
        let mut in_ch = 1;
        for _ in 0..4 {
            layers.push(LayerSpec::conv(3, in_ch, 4, 1, 0, false));
            layers.push(LayerSpec::MaxPool { window: 2, stride: 2 });
            in_ch = 4;
        }
        layers.push(LayerSpec::GlobalAvgPool);
        layers.push(LayerSpec::fc(4, 2, false));
        // 10x10 shrinks below the kernel before the last stage.
        assert!(NetworkSpec::new(layers, (10, 10, 1), 2).is_err());
    }

    #[test]
    fn init_is_deterministic_and_fan_in_bounded() {
        let spec = cnn3_spec([6, 16, 32], (32, 32, 3), 10, false).unwrap();
        let a = NetworkParams::init(&spec, 11);
        let b = NetworkParams::init(&spec, 11);
        assert_eq!(a, b);
        let bound = (1.0f64 / 27.0).sqrt();
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= bound));
        assert!(a.layers[0].weights.iter().any(|w| *w != 0.0));
    }
}
