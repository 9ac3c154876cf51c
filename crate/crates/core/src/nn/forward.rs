//! Forward evaluation. `forward_with_trace` keeps every intermediate
//! activation (and max-pool routing) so `backward` can consume it.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{LayerSpec, NetworkParams, NetworkSpec};

/// Four-lane dot product; the split accumulators let the additions pipeline.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() & !3;
    let mut acc = [0.0f64; 4];
    let mut i = 0;
    while i < n {
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
        i += 4;
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in n..a.len() {
        s += a[j] * b[j];
    }
    s
}

/// Intermediate activations of one forward pass.
///
/// `values[i]` is the input to layer `i`; `values[len]` is the network
/// output. `pool_argmax[i]` holds, for each max-pool output element, the flat
/// input index that produced it (first maximum in scan order).
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub values: Vec<Tensor>,
    pub pool_argmax: Vec<Vec<usize>>,
}

impl ForwardTrace {
    pub fn logits(&self) -> &[f64] {
        self.values.last().expect("trace has at least the input").data()
    }
}

/// Runs the network and returns the raw logits.
pub fn forward(spec: &NetworkSpec, params: &NetworkParams, input: &Tensor) -> Result<Vec<f64>> {
    let trace = forward_with_trace(spec, params, input)?;
    Ok(trace.logits().to_vec())
}

/// Runs the network keeping all intermediate activations.
pub fn forward_with_trace(spec: &NetworkSpec, params: &NetworkParams, input: &Tensor) -> Result<ForwardTrace> {
    params.matches(spec)?;
    let (h, w, c) = spec.input_shape;
    if input.shape() != [h, w, c] {
        return Err(Error::ShapeMismatch {
            context: "network input".into(),
            expected: format!("[{h}, {w}, {c}]"),
            actual: format!("{:?}", input.shape()),
        });
    }
    let mut trace = ForwardTrace {
        values: Vec::with_capacity(spec.layers.len() + 1),
        pool_argmax: vec![Vec::new(); spec.layers.len()],
    };
    trace.values.push(input.clone());
    let mut param_idx = 0;
    for (i, layer) in spec.layers.iter().enumerate() {
        let current = trace.values.last().unwrap();
        let next = eval_layer(layer, params, &mut param_idx, current, i, Some(&mut trace.pool_argmax[i]))?;
        trace.values.push(next);
    }
    Ok(trace)
}

/// Re-evaluates the network starting from layer `start`, reusing the traced
/// activation as input. Useful when only parameters at or after `start`
/// changed. Returns the logits.
pub fn forward_from(spec: &NetworkSpec, params: &NetworkParams, trace: &ForwardTrace, start: usize) -> Result<Vec<f64>> {
    if trace.values.len() != spec.layers.len() + 1 || start >= spec.layers.len() {
        return Err(Error::TraceMismatch(format!(
            "trace covers {} layers, restart at {start} of {}",
            trace.values.len().saturating_sub(1),
            spec.layers.len()
        )));
    }
    let mut param_idx = spec.layers[..start].iter().filter(|l| l.is_parametric()).count();
    let mut value = trace.values[start].clone();
    for (i, layer) in spec.layers.iter().enumerate().skip(start) {
        value = eval_layer(layer, params, &mut param_idx, &value, i, None)?;
    }
    Ok(value.data().to_vec())
}

fn eval_layer(
    layer: &LayerSpec,
    params: &NetworkParams,
    param_idx: &mut usize,
    input: &Tensor,
    layer_no: usize,
    argmax_out: Option<&mut Vec<usize>>,
) -> Result<Tensor> {
    let fail = |expected: String| Error::ShapeMismatch {
        context: format!("layer {layer_no} ({})", layer.kind_name()),
        expected,
        actual: format!("{:?}", input.shape()),
    };
    match *layer {
        LayerSpec::Conv { kernel, in_channels, out_channels, stride, padding, .. } => {
            let lp = &params.layers[*param_idx];
            *param_idx += 1;
            let &[h, w, c] = input.shape() else {
                return Err(fail("a spatial [h, w, c] value".into()));
            };
            if c != in_channels {
                return Err(fail(format!("{in_channels} input channels")));
            }
            Ok(conv_forward(input, h, w, lp, kernel, in_channels, out_channels, stride, padding))
        }
        LayerSpec::ReLU => {
            let mut out = input.clone();
            for v in out.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            Ok(out)
        }
        LayerSpec::MaxPool { window, stride } => {
            let &[h, w, c] = input.shape() else {
                return Err(fail("a spatial [h, w, c] value".into()));
            };
            if h < window || w < window {
                return Err(fail(format!("at least {window}x{window} spatial extent")));
            }
            Ok(maxpool_forward(input, h, w, c, window, stride, argmax_out))
        }
        LayerSpec::GlobalAvgPool => {
            let &[h, w, c] = input.shape() else {
                return Err(fail("a spatial [h, w, c] value".into()));
            };
            let mut out = Tensor::zeros(&[c]);
            let scale = 1.0 / (h * w) as f64;
            let data = input.data();
            let o = out.data_mut();
            for px in data.chunks_exact(c) {
                for (acc, v) in o.iter_mut().zip(px) {
                    *acc += v;
                }
            }
            for v in o.iter_mut() {
                *v *= scale;
            }
            Ok(out)
        }
        LayerSpec::Reshape => {
            let n = input.len();
            input.reshaped(&[n])
        }
        LayerSpec::FullyConnected { in_dim, out_dim, .. } => {
            let lp = &params.layers[*param_idx];
            *param_idx += 1;
            if input.shape() != [in_dim] {
                return Err(fail(format!("a flat [{in_dim}] value")));
            }
            let mut out = Tensor::zeros(&[out_dim]);
            let x = input.data();
            let wm = lp.weights.data();
            let o = out.data_mut();
            for (oi, ov) in o.iter_mut().enumerate() {
                *ov = dot(&wm[oi * in_dim..(oi + 1) * in_dim], x);
            }
            if let Some(b) = &lp.bias {
                for (ov, bv) in o.iter_mut().zip(b.iter()) {
                    *ov += bv;
                }
            }
            Ok(out)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_forward(
    input: &Tensor,
    h: usize,
    w: usize,
    lp: &super::LayerParams,
    kernel: usize,
    in_channels: usize,
    out_channels: usize,
    stride: usize,
    padding: usize,
) -> Tensor {
    let oh = (h + 2 * padding - kernel) / stride + 1;
    let ow = (w + 2 * padding - kernel) / stride + 1;
    let mut out = Tensor::zeros(&[oh, ow, out_channels]);
    let x = input.data();
    let wm = lp.weights.data();
    let per_oc = kernel * kernel * in_channels;
    // gather each receptive field once (zeros where padding falls outside),
    // in the same (ky, kx, ic) order the weight rows use, then take one long
    // dot per output channel
    let mut patch = vec![0.0f64; per_oc];
    {
        let o = out.data_mut();
        for oy in 0..oh {
            let base_y = (oy * stride) as isize - padding as isize;
            for ox in 0..ow {
                let base_x = (ox * stride) as isize - padding as isize;
                if padding > 0 {
                    patch.fill(0.0);
                }
                for ky in 0..kernel {
                    let iy = base_y + ky as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let row = (iy as usize) * w;
                    for kx in 0..kernel {
                        let ix = base_x + kx as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let src = (row + ix as usize) * in_channels;
                        let dst = (ky * kernel + kx) * in_channels;
                        patch[dst..dst + in_channels].copy_from_slice(&x[src..src + in_channels]);
                    }
                }
                let o_base = (oy * ow + ox) * out_channels;
                for oc in 0..out_channels {
                    o[o_base + oc] = dot(&wm[oc * per_oc..(oc + 1) * per_oc], &patch);
                }
            }
        }
        if let Some(b) = &lp.bias {
            let bd = b.data();
            for px in o.chunks_exact_mut(out_channels) {
                for (ov, bv) in px.iter_mut().zip(bd) {
                    *ov += bv;
                }
            }
        }
    }
    out
}

fn maxpool_forward(
    input: &Tensor,
    h: usize,
    w: usize,
    c: usize,
    window: usize,
    stride: usize,
    argmax_out: Option<&mut Vec<usize>>,
) -> Tensor {
    let oh = (h - window) / stride + 1;
    let ow = (w - window) / stride + 1;
    let mut out = Tensor::zeros(&[oh, ow, c]);
    let mut argmax = vec![0usize; oh * ow * c];
    let x = input.data();
    {
        let o = out.data_mut();
        for oy in 0..oh {
            for ox in 0..ow {
                let o_base = (oy * ow + ox) * c;
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for wy in 0..window {
                        let iy = oy * stride + wy;
                        for wx in 0..window {
                            let ix = ox * stride + wx;
                            let idx = (iy * w + ix) * c + ch;
                            // strictly greater keeps the first maximum in scan order
                            if x[idx] > best {
                                best = x[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    o[o_base + ch] = best;
                    argmax[o_base + ch] = best_idx;
                }
            }
        }
    }
    if let Some(slot) = argmax_out {
        *slot = argmax;
    }
    out
}

/// Numerically stable softmax (max subtraction). Input must be finite.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::InvalidArgument("softmax of empty vector".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("softmax of non-finite input".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = out.iter().sum();
    for v in &mut out {
        *v /= z;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{cnn3_spec, mlp2_spec};

    #[test]
    fn zero_weights_give_zero_logits() {
        let spec = cnn3_spec([6, 16, 32], (32, 32, 3), 10, false).unwrap();
        let params = NetworkParams::zeros(&spec);
        let mut input = Tensor::zeros(&[32, 32, 3]);
        let mut rng = crate::rng::Rng::new(5);
        for v in input.data_mut() {
            *v = rng.uniform();
        }
        let logits = forward(&spec, &params, &input).unwrap();
        assert!(logits.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_fc_passes_input_through() {
        let layers = vec![LayerSpec::Reshape, LayerSpec::fc(1, 1, false)];
        let spec = NetworkSpec::new(layers, (1, 1, 1), 1).unwrap();
        let mut params = NetworkParams::zeros(&spec);
        params.layers[0].weights.data_mut()[0] = 1.0;
        let input = Tensor::from_vec(&[1, 1, 1], vec![0.37]).unwrap();
        let logits = forward(&spec, &params, &input).unwrap();
        assert_eq!(logits, vec![0.37]);
    }

    #[test]
    fn forward_is_pure() {
        let spec = mlp2_spec([8, 8], (4, 4, 1), 3, true).unwrap();
        let params = NetworkParams::init(&spec, 3);
        let mut input = Tensor::zeros(&[4, 4, 1]);
        let mut rng = crate::rng::Rng::new(4);
        for v in input.data_mut() {
            *v = rng.normal();
        }
        let a = forward(&spec, &params, &input).unwrap();
        let b = forward(&spec, &params, &input).unwrap();
        assert_eq!(a, b, "repeated forward must be bit-identical");
    }

    #[test]
    fn rejects_wrong_input_shape() {
        let spec = mlp2_spec([8, 8], (4, 4, 1), 3, false).unwrap();
        let params = NetworkParams::init(&spec, 3);
        let input = Tensor::zeros(&[4, 4, 2]);
        assert!(matches!(
            forward(&spec, &params, &input),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    /// Independent nested-loop convolution used as the oracle below.
    fn naive_conv(input: &Tensor, weights: &Tensor, stride: usize, padding: usize) -> Vec<f64> {
        let (h, w, cin) = (input.shape()[0], input.shape()[1], input.shape()[2]);
        let (cout, k) = (weights.shape()[0], weights.shape()[1]);
        let oh = (h + 2 * padding - k) / stride + 1;
        let ow = (w + 2 * padding - k) / stride + 1;
        let mut out = vec![0.0; oh * ow * cout];
        for oc in 0..cout {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ky in 0..k {
                        for kx in 0..k {
                            for ic in 0..cin {
                                let iy = (oy * stride + ky) as isize - padding as isize;
                                let ix = (ox * stride + kx) as isize - padding as isize;
                                if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                    let xv = input.at3(iy as usize, ix as usize, ic);
                                    let wv = weights.data()
                                        [((oc * k + ky) * k + kx) * cin + ic];
                                    acc += xv * wv;
                                }
                            }
                        }
                    }
                    out[(oy * ow + ox) * cout + oc] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_naive_loop_oracle() {
        // Single conv layer networks in both padding regimes.
        for padding in [0usize, 1] {
            let layers = vec![
                LayerSpec::conv(3, 2, 4, 1, padding, false),
                LayerSpec::GlobalAvgPool,
                LayerSpec::fc(4, 4, false),
            ];
            let spec = NetworkSpec::new(layers, (6, 6, 2), 4).unwrap();
            let mut params = NetworkParams::init(&spec, 17 + padding as u64);
            // identity-ish fc so logits reflect the pooled conv output
            params.layers[1].weights.fill(0.0);
            for i in 0..4 {
                params.layers[1].weights.data_mut()[i * 4 + i] = 1.0;
            }
            let mut input = Tensor::zeros(&[6, 6, 2]);
            let mut rng = crate::rng::Rng::new(99);
            for v in input.data_mut() {
                *v = rng.normal();
            }
            let got = forward(&spec, &params, &input).unwrap();
            let conv = naive_conv(&input, &params.layers[0].weights, 1, padding);
            let os = 6 + 2 * padding - 2; // output spatial extent
            let mut want = vec![0.0; 4];
            for px in conv.chunks_exact(4) {
                for (acc, v) in want.iter_mut().zip(px) {
                    *acc += v;
                }
            }
            for v in &mut want {
                *v /= (os * os) as f64;
            }
            for (g, e) in got.iter().zip(&want) {
                assert!((g - e).abs() < 1e-12, "got {g}, want {e}");
            }
        }
    }

    #[test]
    fn full_cnn_matches_independent_reference() {
        // Fig-9-shaped CNN against a from-scratch reference composed of the
        // naive conv above plus scalar pool/relu/gap/fc loops.
        let spec = cnn3_spec([6, 16, 32], (32, 32, 3), 10, false).unwrap();
        let params = NetworkParams::init(&spec, 41);
        let mut input = Tensor::zeros(&[32, 32, 3]);
        let mut rng = crate::rng::Rng::new(42);
        for v in input.data_mut() {
            *v = rng.uniform();
        }
        let got = forward(&spec, &params, &input).unwrap();

        // reference pipeline
        let mut cur = input.clone();
        let mut pi = 0;
        for layer in &spec.layers {
            cur = match *layer {
                LayerSpec::Conv { kernel, stride, padding, out_channels, .. } => {
                    let (h, w) = (cur.shape()[0], cur.shape()[1]);
                    let oh = (h + 2 * padding - kernel) / stride + 1;
                    let ow = (w + 2 * padding - kernel) / stride + 1;
                    let data = naive_conv(&cur, &params.layers[pi].weights, stride, padding);
                    pi += 1;
                    Tensor::from_vec(&[oh, ow, out_channels], data).unwrap()
                }
                LayerSpec::ReLU => {
                    let mut t = cur.clone();
                    for v in t.data_mut() {
                        *v = v.max(0.0);
                    }
                    t
                }
                LayerSpec::MaxPool { window, stride } => {
                    let (h, w, c) = (cur.shape()[0], cur.shape()[1], cur.shape()[2]);
                    let oh = (h - window) / stride + 1;
                    let ow = (w - window) / stride + 1;
                    let mut t = Tensor::zeros(&[oh, ow, c]);
                    for oy in 0..oh {
                        for ox in 0..ow {
                            for ch in 0..c {
                                let mut m = f64::NEG_INFINITY;
                                for wy in 0..window {
                                    for wx in 0..window {
                                        m = m.max(cur.at3(oy * stride + wy, ox * stride + wx, ch));
                                    }
                                }
                                let idx = t.idx3(oy, ox, ch);
                                t.data_mut()[idx] = m;
                            }
                        }
                    }
                    t
                }
                LayerSpec::GlobalAvgPool => {
                    let (h, w, c) = (cur.shape()[0], cur.shape()[1], cur.shape()[2]);
                    let mut t = Tensor::zeros(&[c]);
                    for ch in 0..c {
                        let mut s = 0.0;
                        for y in 0..h {
                            for x in 0..w {
                                s += cur.at3(y, x, ch);
                            }
                        }
                        t.data_mut()[ch] = s / (h * w) as f64;
                    }
                    t
                }
                LayerSpec::Reshape => {
                    let n = cur.len();
                    cur.reshaped(&[n]).unwrap()
                }
                LayerSpec::FullyConnected { in_dim, out_dim, .. } => {
                    let wm = params.layers[pi].weights.data();
                    pi += 1;
                    let mut t = Tensor::zeros(&[out_dim]);
                    for o in 0..out_dim {
                        let mut acc = 0.0;
                        for i in 0..in_dim {
                            acc += wm[o * in_dim + i] * cur.data()[i];
                        }
                        t.data_mut()[o] = acc;
                    }
                    t
                }
            };
        }
        for (g, e) in got.iter().zip(cur.data()) {
            let rel = (g - e).abs() / g.abs().max(e.abs()).max(1e-12);
            assert!(rel < 1e-12, "got {g}, want {e}");
        }
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let p = softmax(&[0.0; 10]).unwrap();
        for v in &p {
            assert!((v - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_limit_case_saturates() {
        let p = softmax(&[60.0, 0.0]).unwrap();
        assert!(p[0] > 1.0 - 1e-12);
        assert!(p[1] < 1e-12);
    }

    #[test]
    fn softmax_closed_form() {
        let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
        let z = 1f64.exp() + 2f64.exp() + 3f64.exp();
        for (got, want) in p.iter().zip([1f64, 2.0, 3.0].iter().map(|v| v.exp() / z)) {
            assert!((got - want).abs() < 1e-15);
        }
        let s: f64 = p.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(softmax(&[f64::NAN, 0.0]).is_err());
        assert!(softmax(&[f64::INFINITY, 0.0]).is_err());
    }
}
