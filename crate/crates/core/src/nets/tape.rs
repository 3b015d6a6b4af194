//! Recorded forward pass and reverse-mode differentiation.

use super::layers::{Act, LayerKind, Network};
use super::ops::{
    conv_backward, conv_forward, conv_transpose_backward, conv_transpose_forward, relu,
    relu_backward, swish, swish_backward, Geom3,
};
use super::tensor::{Scalar, Tensor};
use crate::grf::derive_rng;
use crate::{GhmError, Result};
use rand::Rng;

/// Trainable tensors in layer order (weight then bias per conv-like layer).
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub tensors: Vec<Tensor<T>>,
    pub names: Vec<String>,
}

impl<T: Scalar> Params<T> {
    pub fn cast<U: Scalar>(&self) -> Params<U> {
        Params { tensors: self.tensors.iter().map(|t| t.cast()).collect(), names: self.names.clone() }
    }

    pub fn n_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }
}

/// Per-layer parameter slots: `Some((weight_idx, bias_idx))` for conv layers.
pub fn param_layout(net: &Network) -> Vec<Option<(usize, usize)>> {
    let mut next = 0;
    net.layers
        .iter()
        .map(|l| match &l.kind {
            LayerKind::Conv(_) | LayerKind::ConvTranspose(_) => {
                let slot = (next, next + 1);
                next += 2;
                Some(slot)
            }
            _ => None,
        })
        .collect()
}

/// Kaiming-uniform fan-in initialization for weights, zeros for biases.
pub fn init_params<T: Scalar>(net: &Network, seed: u64) -> Params<T> {
    let mut tensors = Vec::new();
    let mut names = Vec::new();
    for (i, layer) in net.layers.iter().enumerate() {
        let (geom, transpose) = match &layer.kind {
            LayerKind::Conv(g) => (g, false),
            LayerKind::ConvTranspose(g) => (g, true),
            _ => continue,
        };
        let w_shape = geom.weight_shape(transpose);
        let fan_in = geom.in_ch * geom.kernel.iter().product::<usize>();
        let bound = (6.0 / fan_in as f64).sqrt();
        let mut rng = derive_rng(seed, tensors.len() as u64, 0x4e455431);
        let w_data: Vec<T> = (0..w_shape.iter().product::<usize>())
            .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
            .collect();
        tensors.push(Tensor { shape: w_shape, data: w_data });
        names.push(format!("layer{:03}.{}.weight", i, layer.label));
        tensors.push(Tensor::zeros(&[geom.out_ch]));
        names.push(format!("layer{:03}.{}.bias", i, layer.label));
    }
    Params { tensors, names }
}

#[derive(Debug, Clone)]
pub enum NodeOp {
    Input,
    Conv { geom: Geom3, w: usize, b: usize, x: usize },
    ConvTranspose { geom: Geom3, w: usize, b: usize, x: usize },
    Act { act: Act, x: usize },
    Concat { a: usize, b: usize },
    Add { a: usize, b: usize },
    Squeeze { x: usize },
}

#[derive(Debug, Clone)]
pub struct Node<T> {
    pub op: NodeOp,
    pub out: Tensor<T>,
}

/// Recorded forward pass; node 0 is the input, the last node the output.
#[derive(Debug, Clone)]
pub struct Tape<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.nodes.last().unwrap().out
    }
}

/// Run the network, recording every intermediate tensor.
pub fn forward<T: Scalar>(net: &Network, params: &Params<T>, input: Tensor<T>) -> Result<Tape<T>> {
    if input.shape != net.input_shape {
        return Err(GhmError::Shape(format!(
            "input shape {:?} does not match network input {:?}",
            input.shape, net.input_shape
        )));
    }
    let layout = param_layout(net);
    let mut nodes = vec![Node { op: NodeOp::Input, out: input }];
    // stage s = node index holding the output of layer s (0 = input)
    let mut stages = vec![0usize];

    for (i, layer) in net.layers.iter().enumerate() {
        let x_node = *stages.last().unwrap();
        let x = &nodes[x_node].out;
        let node = match &layer.kind {
            LayerKind::Conv(g) => {
                let (w, b) = layout[i].unwrap();
                let geom = Geom3::resolve(g, &x.shape[1..], false)?;
                let out = conv_forward(&x.data, &params.tensors[w].data, &params.tensors[b].data, &geom);
                let shape = geom.out_shape(g.rank());
                Node {
                    op: NodeOp::Conv { geom, w, b, x: x_node },
                    out: Tensor::from_vec(&shape, out)?,
                }
            }
            LayerKind::ConvTranspose(g) => {
                let (w, b) = layout[i].unwrap();
                let geom = Geom3::resolve(g, &x.shape[1..], true)?;
                let out = conv_transpose_forward(
                    &x.data,
                    &params.tensors[w].data,
                    &params.tensors[b].data,
                    &geom,
                );
                let shape = geom.out_shape(g.rank());
                Node {
                    op: NodeOp::ConvTranspose { geom, w, b, x: x_node },
                    out: Tensor::from_vec(&shape, out)?,
                }
            }
            LayerKind::Activation { act } => {
                let out = match act {
                    Act::Swish => swish(x),
                    Act::Relu => relu(x),
                };
                Node { op: NodeOp::Act { act: *act, x: x_node }, out }
            }
            LayerKind::ConcatSkip { src } => {
                let a_node = x_node;
                let b_node = stages[*src];
                let (a, b) = (&nodes[a_node].out, &nodes[b_node].out);
                if a.shape[1..] != b.shape[1..] {
                    return Err(GhmError::Shape(format!(
                        "layer {i} ({}): concat spatial mismatch {:?} vs {:?}",
                        layer.label, a.shape, b.shape
                    )));
                }
                let mut shape = a.shape.clone();
                shape[0] += b.shape[0];
                let mut data = Vec::with_capacity(a.numel() + b.numel());
                data.extend_from_slice(&a.data);
                data.extend_from_slice(&b.data);
                Node {
                    op: NodeOp::Concat { a: a_node, b: b_node },
                    out: Tensor::from_vec(&shape, data)?,
                }
            }
            LayerKind::AddSkip { src } => {
                let a_node = x_node;
                let b_node = stages[*src];
                let (a, b) = (&nodes[a_node].out, &nodes[b_node].out);
                if a.shape != b.shape {
                    return Err(GhmError::Shape(format!(
                        "layer {i} ({}): add shape mismatch {:?} vs {:?}",
                        layer.label, a.shape, b.shape
                    )));
                }
                let data = a.data.iter().zip(&b.data).map(|(&x, &y)| x + y).collect();
                Node {
                    op: NodeOp::Add { a: a_node, b: b_node },
                    out: Tensor::from_vec(&a.shape.clone(), data)?,
                }
            }
            LayerKind::Squeeze => {
                if !(x.shape.len() == 4 && x.shape[1] == 1 && x.shape[2] == 1) {
                    return Err(GhmError::Shape(format!(
                        "layer {i} ({}): cannot squeeze {:?}",
                        layer.label, x.shape
                    )));
                }
                let shape = vec![x.shape[0], x.shape[3]];
                Node {
                    op: NodeOp::Squeeze { x: x_node },
                    out: Tensor::from_vec(&shape, x.data.clone())?,
                }
            }
        };
        nodes.push(node);
        stages.push(nodes.len() - 1);
    }
    Ok(Tape { nodes })
}

/// Convenience: forward pass returning only the output tensor.
pub fn forward_value<T: Scalar>(net: &Network, params: &Params<T>, input: Tensor<T>) -> Result<Tensor<T>> {
    Ok(forward(net, params, input)?.output().clone())
}

/// Reverse-mode sweep seeded with `d(loss)/d(output)`.
///
/// Returns one gradient tensor per parameter; parameters the loss does not
/// depend on get exact zeros.
pub fn backward<T: Scalar>(tape: &Tape<T>, params: &Params<T>, seed_grad: Tensor<T>) -> Result<Vec<Tensor<T>>> {
    let n = tape.nodes.len();
    let out = tape.output();
    if seed_grad.shape != out.shape {
        return Err(GhmError::Shape(format!(
            "seed gradient shape {:?} does not match output {:?}",
            seed_grad.shape, out.shape
        )));
    }
    let mut adjoint: Vec<Option<Vec<T>>> = vec![None; n];
    adjoint[n - 1] = Some(seed_grad.data);

    let mut grads: Vec<Tensor<T>> =
        params.tensors.iter().map(|t| Tensor::zeros(&t.shape)).collect();

    let accumulate = |slot: &mut Option<Vec<T>>, data: Vec<T>| match slot {
        Some(existing) => {
            for (e, v) in existing.iter_mut().zip(data) {
                *e += v;
            }
        }
        None => *slot = Some(data),
    };

    for i in (0..n).rev() {
        let gy = match adjoint[i].take() {
            Some(g) => g,
            None => continue,
        };
        match &tape.nodes[i].op {
            NodeOp::Input => {}
            NodeOp::Conv { geom, w, b, x } => {
                let (gx, gw, gb) =
                    conv_backward(&tape.nodes[*x].out.data, &params.tensors[*w].data, &gy, geom);
                for (acc, v) in grads[*w].data.iter_mut().zip(gw) {
                    *acc += v;
                }
                for (acc, v) in grads[*b].data.iter_mut().zip(gb) {
                    *acc += v;
                }
                accumulate(&mut adjoint[*x], gx);
            }
            NodeOp::ConvTranspose { geom, w, b, x } => {
                let (gx, gw, gb) = conv_transpose_backward(
                    &tape.nodes[*x].out.data,
                    &params.tensors[*w].data,
                    &gy,
                    geom,
                );
                for (acc, v) in grads[*w].data.iter_mut().zip(gw) {
                    *acc += v;
                }
                for (acc, v) in grads[*b].data.iter_mut().zip(gb) {
                    *acc += v;
                }
                accumulate(&mut adjoint[*x], gx);
            }
            NodeOp::Act { act, x } => {
                let xin = &tape.nodes[*x].out.data;
                let gx = match act {
                    Act::Swish => swish_backward(xin, &gy),
                    Act::Relu => relu_backward(xin, &gy),
                };
                accumulate(&mut adjoint[*x], gx);
            }
            NodeOp::Concat { a, b } => {
                let na = tape.nodes[*a].out.numel();
                accumulate(&mut adjoint[*a], gy[..na].to_vec());
                accumulate(&mut adjoint[*b], gy[na..].to_vec());
            }
            NodeOp::Add { a, b } => {
                accumulate(&mut adjoint[*a], gy.clone());
                accumulate(&mut adjoint[*b], gy);
            }
            NodeOp::Squeeze { x } => {
                accumulate(&mut adjoint[*x], gy);
            }
        }
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::layers::{ConvGeom, LayerSpec};

    fn tiny_net() -> Network {
        Network {
            layers: vec![
                LayerSpec {
                    kind: LayerKind::Conv(ConvGeom {
                        in_ch: 1,
                        out_ch: 2,
                        kernel: vec![3],
                        stride: vec![1],
                        padding: vec![1],
                    }),
                    label: "c1".into(),
                },
                LayerSpec { kind: LayerKind::Activation { act: Act::Relu }, label: "a1".into() },
                LayerSpec {
                    kind: LayerKind::Conv(ConvGeom {
                        in_ch: 2,
                        out_ch: 1,
                        kernel: vec![3],
                        stride: vec![1],
                        padding: vec![1],
                    }),
                    label: "c2".into(),
                },
            ],
            input_shape: vec![1, 6],
        }
    }

    #[test]
    fn unused_parameter_gets_zero_gradient() {
        // second conv zeroed: its weight gradient is nonzero (depends on act)
        // but an appended unused layer would be zero. Simpler: seed gradient
        // zero everywhere -> all grads exactly zero.
        let net = tiny_net();
        let params = init_params::<f64>(&net, 1);
        let input = Tensor::from_vec(&[1, 6], vec![0.5; 6]).unwrap();
        let tape = forward(&net, &params, input).unwrap();
        let seed = Tensor::zeros(&tape.output().shape);
        let grads = backward(&tape, &params, seed).unwrap();
        for g in grads {
            assert!(g.data.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn gradient_is_linear_in_seed() {
        let net = tiny_net();
        let params = init_params::<f64>(&net, 2);
        let input =
            Tensor::from_vec(&[1, 6], vec![0.3, -0.2, 0.8, 0.1, -0.5, 0.9]).unwrap();
        let tape = forward(&net, &params, input).unwrap();
        let out_shape = tape.output().shape.clone();
        let numel: usize = out_shape.iter().product();
        let s1 = Tensor::from_vec(&out_shape, (0..numel).map(|i| i as f64 * 0.1).collect()).unwrap();
        let s2 =
            Tensor::from_vec(&out_shape, (0..numel).map(|i| 1.0 - i as f64 * 0.05).collect()).unwrap();
        let (a, b) = (2.0, -3.0);
        let combo = Tensor::from_vec(
            &out_shape,
            s1.data.iter().zip(&s2.data).map(|(x, y)| a * x + b * y).collect(),
        )
        .unwrap();
        let g1 = backward(&tape, &params, s1).unwrap();
        let g2 = backward(&tape, &params, s2).unwrap();
        let gc = backward(&tape, &params, combo).unwrap();
        for ((x, y), z) in g1.iter().zip(&g2).zip(&gc) {
            for ((gx, gy), gz) in x.data.iter().zip(&y.data).zip(&z.data) {
                assert!((a * gx + b * gy - gz).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn squeeze_roundtrips_shape() {
        let net = Network {
            layers: vec![LayerSpec { kind: LayerKind::Squeeze, label: "sq".into() }],
            input_shape: vec![3, 1, 1, 7],
        };
        let params = init_params::<f64>(&net, 3);
        let input = Tensor::from_vec(&[3, 1, 1, 7], (0..21).map(|v| v as f64).collect()).unwrap();
        let tape = forward(&net, &params, input.clone()).unwrap();
        assert_eq!(tape.output().shape, vec![3, 7]);
        assert_eq!(tape.output().data, input.data);
    }
}
