//! Manual backpropagation over a [`ForwardTrace`].

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{ForwardTrace, LayerSpec, NetworkParams, NetworkSpec};

/// Gradient of a scalar loss with respect to every weight, given the upstream
/// gradient on the logits. Returns a `NetworkParams`-shaped structure.
///
/// Max-pool routes the gradient to the position recorded during the forward
/// pass (first maximum in scan order on ties); ReLU uses the strict
/// derivative (zero at the kink).
pub fn backward(
    spec: &NetworkSpec,
    params: &NetworkParams,
    trace: &ForwardTrace,
    loss_grad: &[f64],
) -> Result<NetworkParams> {
    params.matches(spec)?;
    if trace.values.len() != spec.layers.len() + 1 {
        return Err(Error::TraceMismatch(format!(
            "trace holds {} activations for a {}-layer network",
            trace.values.len(),
            spec.layers.len()
        )));
    }
    let out_len = trace.values.last().unwrap().len();
    if loss_grad.len() != out_len {
        return Err(Error::ShapeMismatch {
            context: "loss gradient".into(),
            expected: format!("{out_len}"),
            actual: format!("{}", loss_grad.len()),
        });
    }
    for (i, v) in trace.values.iter().enumerate() {
        let want: usize = if i == 0 {
            let (h, w, c) = spec.input_shape;
            h * w * c
        } else {
            spec.shape_flow()?[i - 1].dims().iter().product()
        };
        if v.len() != want {
            return Err(Error::TraceMismatch(format!(
                "activation {i} has {} elements, spec implies {want}",
                v.len()
            )));
        }
    }

    let mut grads = NetworkParams::zeros(spec);
    let mut upstream = loss_grad.to_vec();
    let mut param_idx = params.layers.len();

    for (i, layer) in spec.layers.iter().enumerate().rev() {
        let input = &trace.values[i];
        upstream = match *layer {
            LayerSpec::Conv { kernel, in_channels, out_channels, stride, padding, .. } => {
                param_idx -= 1;
                conv_backward(
                    input,
                    &params.layers[param_idx],
                    &mut grads.layers[param_idx],
                    &upstream,
                    kernel,
                    in_channels,
                    out_channels,
                    stride,
                    padding,
                )
            }
            LayerSpec::ReLU => input
                .iter()
                .zip(&upstream)
                .map(|(x, g)| if *x > 0.0 { *g } else { 0.0 })
                .collect(),
            LayerSpec::MaxPool { .. } => {
                let mut dx = vec![0.0; input.len()];
                for (g, &src) in upstream.iter().zip(&trace.pool_argmax[i]) {
                    dx[src] += g;
                }
                dx
            }
            LayerSpec::GlobalAvgPool => {
                let &[h, w, c] = input.shape() else { unreachable!() };
                let scale = 1.0 / (h * w) as f64;
                let mut dx = vec![0.0; input.len()];
                for px in dx.chunks_exact_mut(c) {
                    for (d, g) in px.iter_mut().zip(&upstream) {
                        *d = g * scale;
                    }
                }
                dx
            }
            LayerSpec::Reshape => upstream,
            LayerSpec::FullyConnected { in_dim, out_dim, .. } => {
                param_idx -= 1;
                let x = input.data();
                let wm = params.layers[param_idx].weights.data();
                let g = &mut grads.layers[param_idx];
                let mut dx = vec![0.0; in_dim];
                {
                    let dw = g.weights.data_mut();
                    for o in 0..out_dim {
                        let dz = upstream[o];
                        let row = o * in_dim;
                        for i in 0..in_dim {
                            dw[row + i] += dz * x[i];
                            dx[i] += wm[row + i] * dz;
                        }
                    }
                }
                if let Some(db) = &mut g.bias {
                    for (b, dz) in db.data_mut().iter_mut().zip(&upstream) {
                        *b += dz;
                    }
                }
                dx
            }
        };
    }
    Ok(grads)
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    input: &Tensor,
    lp: &super::LayerParams,
    grad: &mut super::LayerParams,
    upstream: &[f64],
    kernel: usize,
    in_channels: usize,
    out_channels: usize,
    stride: usize,
    padding: usize,
) -> Vec<f64> {
    let &[h, w, _] = input.shape() else { unreachable!() };
    let oh = (h + 2 * padding - kernel) / stride + 1;
    let ow = (w + 2 * padding - kernel) / stride + 1;
    let x = input.data();
    let wm = lp.weights.data();
    let per_oc = kernel * kernel * in_channels;
    let mut dx = vec![0.0; x.len()];
    let dw = grad.weights.data_mut();
    for oy in 0..oh {
        let base_y = (oy * stride) as isize - padding as isize;
        for ox in 0..ow {
            let base_x = (ox * stride) as isize - padding as isize;
            let o_base = (oy * ow + ox) * out_channels;
            for oc in 0..out_channels {
                let dz = upstream[o_base + oc];
                if dz == 0.0 {
                    continue;
                }
                let w_oc = &wm[oc * per_oc..(oc + 1) * per_oc];
                let dw_oc = &mut dw[oc * per_oc..(oc + 1) * per_oc];
                for ky in 0..kernel {
                    let iy = base_y + ky as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..kernel {
                        let ix = base_x + kx as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        let in_base = ((iy as usize) * w + ix as usize) * in_channels;
                        let k_base = (ky * kernel + kx) * in_channels;
                        for ic in 0..in_channels {
                            dw_oc[k_base + ic] += dz * x[in_base + ic];
                            dx[in_base + ic] += dz * w_oc[k_base + ic];
                        }
                    }
                }
            }
        }
    }
    if let Some(db) = &mut grad.bias {
        let dbd = db.data_mut();
        for px in upstream.chunks_exact(out_channels) {
            for (b, g) in dbd.iter_mut().zip(px) {
                *b += g;
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{forward_with_trace, NetworkSpec};

    #[test]
    fn zero_loss_grad_gives_zero_gradients() {
        let spec = crate::nn::cnn3_spec([2, 3, 4], (22, 22, 1), 3, true).unwrap();
        let params = NetworkParams::init(&spec, 8);
        let mut input = Tensor::zeros(&[22, 22, 1]);
        let mut rng = crate::rng::Rng::new(1);
        for v in input.data_mut() {
            *v = rng.normal();
        }
        let trace = forward_with_trace(&spec, &params, &input).unwrap();
        let grads = backward(&spec, &params, &trace, &[0.0; 3]).unwrap();
        for lp in &grads.layers {
            assert!(lp.weights.iter().all(|&v| v == 0.0));
            if let Some(b) = &lp.bias {
                assert!(b.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn single_fc_gradient_is_outer_product_of_error_and_input() {
        // squared-error loss L = sum_o (z_o - t_o)^2, dL/dz = 2(z - t);
        // dL/dW[o][i] = 2 (z_o - t_o) x_i, checked by hand.
        let layers = vec![LayerSpec::Reshape, LayerSpec::fc(3, 2, false)];
        let spec = NetworkSpec::new(layers, (1, 3, 1), 2).unwrap();
        let params = NetworkParams::init(&spec, 2);
        let input = Tensor::from_vec(&[1, 3, 1], vec![0.5, -1.0, 2.0]).unwrap();
        let target = [0.25, -0.75];
        let trace = forward_with_trace(&spec, &params, &input).unwrap();
        let z = trace.logits();
        let dloss: Vec<f64> = z.iter().zip(&target).map(|(z, t)| 2.0 * (z - t)).collect();
        let grads = backward(&spec, &params, &trace, &dloss).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                let want = dloss[o] * input.data()[i];
                let got = grads.layers[0].weights.data()[o * 3 + i];
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trace_from_other_network_is_rejected() {
        let spec_a = crate::nn::mlp2_spec([4, 4], (2, 2, 1), 2, false).unwrap();
        let spec_b = crate::nn::mlp2_spec([5, 5], (2, 2, 1), 2, false).unwrap();
        let pa = NetworkParams::init(&spec_a, 1);
        let pb = NetworkParams::init(&spec_b, 1);
        let input = Tensor::zeros(&[2, 2, 1]);
        let trace = forward_with_trace(&spec_a, &pa, &input).unwrap();
        let err = backward(&spec_b, &pb, &trace, &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::TraceMismatch(_)));
    }
}
