//! Builders for the two surrogate networks.
//!
//! The seismic net is a 3D U-Net: a strided preconvolution maps the fine
//! grid onto the coarse (interpreted seismic) grid, a four-stage
//! encoder/decoder with concatenation skips works at that scale, and the
//! output head emits one channel per seismic time step.
//!
//! The monitoring net collapses a local areal window to a multi-channel 1D
//! signal over depth, runs a 1D encoder, four residual blocks and a 1D
//! decoder with skips, and emits one channel per monitoring time step.
//!
//! At paper scale the kernel/stride/padding tables are used verbatim; on
//! small desk grids each axis falls back to a kernel clipped to the input
//! so every layer keeps a positive size, and the builder verifies that the
//! decoder mirrors the encoder exactly.

use super::layers::{conv_out_size, Act, ConvGeom, LayerKind, LayerSpec, Network};
use crate::{GhmError, Result};
use serde::{Deserialize, Serialize};

/// Channel-width scale: paper widths or quarter widths for desk grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnetScale {
    Paper,
    Desk,
}

impl UnetScale {
    fn ch(&self, paper_width: usize) -> usize {
        match self {
            UnetScale::Paper => paper_width,
            UnetScale::Desk => (paper_width / 4).max(1),
        }
    }
}

#[derive(Clone, Copy)]
struct Axis {
    k: usize,
    s: usize,
    p: usize,
}

/// Per-axis fallback: when the input is smaller than the kernel, clip the
/// kernel to the input (stride 1, no padding) so the axis collapses cleanly;
/// when a stride does not divide the span exactly, drop to stride 1 so the
/// decoder can mirror the layer.
fn adapt(n: usize, a: Axis) -> Axis {
    if n < a.k {
        return Axis { k: n.max(1), s: 1, p: 0 };
    }
    if (n + 2 * a.p - a.k) % a.s != 0 {
        return Axis { s: 1, ..a };
    }
    a
}

struct Stage3 {
    axes: [Axis; 3],
    in_dims: [usize; 3],
    out_dims: [usize; 3],
}

fn stage3(in_dims: [usize; 3], paper: [Axis; 3], label: &str, mirror: bool) -> Result<Stage3> {
    let mut axes = [Axis { k: 1, s: 1, p: 0 }; 3];
    let mut out_dims = [0usize; 3];
    for i in 0..3 {
        let a = adapt(in_dims[i], paper[i]);
        let o = conv_out_size(in_dims[i], a.k, a.s, a.p, i)
            .map_err(|e| GhmError::Shape(format!("{label}: {e}")))?;
        if mirror {
            // decoder with the same geometry must invert this exactly
            let back = (o - 1) * a.s + a.k;
            if back < 2 * a.p || back - 2 * a.p != in_dims[i] {
                return Err(GhmError::Shape(format!(
                    "{label} axis {i}: size {} with k={} s={} p={} is not exactly \
                     invertible by a transposed convolution (got {} back)",
                    in_dims[i],
                    a.k,
                    a.s,
                    a.p,
                    back.saturating_sub(2 * a.p)
                )));
            }
        }
        axes[i] = a;
        out_dims[i] = o;
    }
    Ok(Stage3 { axes, in_dims, out_dims })
}

fn conv3(in_ch: usize, out_ch: usize, axes: [Axis; 3], label: &str) -> LayerSpec {
    LayerSpec {
        kind: LayerKind::Conv(ConvGeom {
            in_ch,
            out_ch,
            kernel: vec![axes[0].k, axes[1].k, axes[2].k],
            stride: vec![axes[0].s, axes[1].s, axes[2].s],
            padding: vec![axes[0].p, axes[1].p, axes[2].p],
        }),
        label: label.into(),
    }
}

fn convt3(in_ch: usize, out_ch: usize, axes: [Axis; 3], label: &str) -> LayerSpec {
    LayerSpec {
        kind: LayerKind::ConvTranspose(ConvGeom {
            in_ch,
            out_ch,
            kernel: vec![axes[0].k, axes[1].k, axes[2].k],
            stride: vec![axes[0].s, axes[1].s, axes[2].s],
            padding: vec![axes[0].p, axes[1].p, axes[2].p],
        }),
        label: label.into(),
    }
}

fn conv1(in_ch: usize, out_ch: usize, a: Axis, label: &str) -> LayerSpec {
    LayerSpec {
        kind: LayerKind::Conv(ConvGeom {
            in_ch,
            out_ch,
            kernel: vec![a.k],
            stride: vec![a.s],
            padding: vec![a.p],
        }),
        label: label.into(),
    }
}

fn convt1(in_ch: usize, out_ch: usize, a: Axis, label: &str) -> LayerSpec {
    LayerSpec {
        kind: LayerKind::ConvTranspose(ConvGeom {
            in_ch,
            out_ch,
            kernel: vec![a.k],
            stride: vec![a.s],
            padding: vec![a.p],
        }),
        label: label.into(),
    }
}

fn act(a: Act, label: &str) -> LayerSpec {
    LayerSpec { kind: LayerKind::Activation { act: a }, label: label.into() }
}

const SAME3: [Axis; 3] =
    [Axis { k: 3, s: 1, p: 1 }, Axis { k: 3, s: 1, p: 1 }, Axis { k: 3, s: 1, p: 1 }];
const SAME1: Axis = Axis { k: 3, s: 1, p: 1 };

/// Same-shape 3x3x3 convolution adapted to small axes (k=1 when the axis
/// is smaller than 3, which also preserves shape).
fn same3_for(dims: [usize; 3]) -> [Axis; 3] {
    let mut axes = SAME3;
    for i in 0..3 {
        if dims[i] < 3 {
            axes[i] = Axis { k: 1, s: 1, p: 0 };
        }
    }
    axes
}

fn same1_for(n: usize) -> Axis {
    if n < 3 {
        Axis { k: 1, s: 1, p: 0 }
    } else {
        SAME1
    }
}

/// Build the 3D seismic U-Net for a fine grid of `dims` and `n_t` output
/// time-step channels. Inputs are 3 channels: log k, porosity and a
/// constant anisotropy-ratio grid.
pub fn build_seismic_unet(dims: (usize, usize, usize), n_t: usize, scale: UnetScale) -> Result<Network> {
    if n_t < 1 {
        return Err(GhmError::Config("seismic net needs at least one output channel".into()));
    }
    let (nx, ny, nz) = dims;
    let pre_ch = [scale.ch(64), scale.ch(32)];
    let enc_ch = [scale.ch(32), scale.ch(64), scale.ch(128), scale.ch(256)];
    let out_ch = scale.ch(32);

    let mut layers: Vec<LayerSpec> = Vec::new();
    let mut stage = 0usize; // stage id of the last pushed layer output
    let push = |layers: &mut Vec<LayerSpec>, stage: &mut usize, l: LayerSpec| {
        layers.push(l);
        *stage += 1;
    };

    // Preconvolution: smooth (kernel matches the interpretation filter),
    // then stride down to the coarse grid.
    let pre1_axes = [Axis { k: 3, s: 1, p: 0 }, Axis { k: 3, s: 1, p: 0 }, Axis { k: 5, s: 1, p: 1 }];
    let pre1 = stage3([nx, ny, nz], pre1_axes, "pre1", false)?;
    push(&mut layers, &mut stage, conv3(3, pre_ch[0], pre1.axes, "pre1"));
    push(&mut layers, &mut stage, act(Act::Swish, "pre1.act"));
    let pre2_axes = [Axis { k: 3, s: 3, p: 0 }, Axis { k: 3, s: 3, p: 0 }, Axis { k: 5, s: 5, p: 1 }];
    let pre2 = stage3(pre1.out_dims, pre2_axes, "pre2", false)?;
    push(&mut layers, &mut stage, conv3(pre_ch[0], pre_ch[1], pre2.axes, "pre2"));
    push(&mut layers, &mut stage, act(Act::Swish, "pre2.act"));
    let pre_out_stage = stage;
    let coarse = pre2.out_dims;

    // Encoder: each downsampling block is a same-shape conv + the resizing conv.
    let enc_paper: [[Axis; 3]; 4] = [
        [Axis { k: 3, s: 1, p: 0 }, Axis { k: 3, s: 1, p: 0 }, Axis { k: 3, s: 1, p: 1 }],
        [Axis { k: 4, s: 2, p: 0 }, Axis { k: 4, s: 2, p: 0 }, Axis { k: 3, s: 1, p: 1 }],
        [Axis { k: 3, s: 2, p: 0 }, Axis { k: 3, s: 2, p: 0 }, Axis { k: 3, s: 1, p: 0 }],
        [Axis { k: 3, s: 2, p: 0 }, Axis { k: 3, s: 2, p: 0 }, Axis { k: 3, s: 1, p: 0 }],
    ];
    let mut cur_dims = coarse;
    let mut cur_ch = pre_ch[1];
    let mut enc_stages: Vec<Stage3> = Vec::new();
    let mut enc_out_stage_ids = Vec::new();
    for (i, paper_axes) in enc_paper.iter().enumerate() {
        let label = format!("enc{}", i + 1);
        push(&mut layers, &mut stage, conv3(cur_ch, enc_ch[i], same3_for(cur_dims), &format!("{label}.a")));
        push(&mut layers, &mut stage, act(Act::Relu, &format!("{label}.a.act")));
        let st = stage3(cur_dims, *paper_axes, &label, true)?;
        push(&mut layers, &mut stage, conv3(enc_ch[i], enc_ch[i], st.axes, &format!("{label}.b")));
        push(&mut layers, &mut stage, act(Act::Relu, &format!("{label}.b.act")));
        cur_dims = st.out_dims;
        cur_ch = enc_ch[i];
        enc_stages.push(st);
        enc_out_stage_ids.push(stage);
    }

    // Decoder: mirror geometries in reverse, concatenating the matching
    // encoder stage (and finally the preconvolution output).
    for i in (0..4).rev() {
        let label = format!("dec{}", 4 - i);
        let st = &enc_stages[i];
        let target_ch = enc_ch[i];
        push(
            &mut layers,
            &mut stage,
            convt3(cur_ch, 2 * target_ch, same3_for(cur_dims), &format!("{label}.a")),
        );
        push(&mut layers, &mut stage, act(Act::Relu, &format!("{label}.a.act")));
        push(&mut layers, &mut stage, convt3(2 * target_ch, target_ch, st.axes, &format!("{label}.b")));
        push(&mut layers, &mut stage, act(Act::Relu, &format!("{label}.b.act")));
        cur_dims = st.in_dims;
        cur_ch = target_ch;
        let skip_stage = if i >= 1 { enc_out_stage_ids[i - 1] } else { pre_out_stage };
        let skip_ch = if i >= 1 { enc_ch[i - 1] } else { pre_ch[1] };
        push(
            &mut layers,
            &mut stage,
            LayerSpec { kind: LayerKind::ConcatSkip { src: skip_stage }, label: format!("{label}.skip") },
        );
        cur_ch += skip_ch;
    }

    // Output head.
    push(&mut layers, &mut stage, conv3(cur_ch, out_ch, same3_for(cur_dims), "out1"));
    push(&mut layers, &mut stage, act(Act::Swish, "out1.act"));
    push(&mut layers, &mut stage, conv3(out_ch, n_t, same3_for(cur_dims), "out2"));

    let net = Network { layers, input_shape: vec![3, nx, ny, nz] };
    let trace = super::layers::shape_trace(&net)?;
    let out = trace.last().unwrap();
    if out[1..] != [coarse[0], coarse[1], coarse[2]] {
        return Err(GhmError::Shape(format!(
            "seismic net output {:?} does not sit on the coarse grid {:?}",
            out, coarse
        )));
    }
    Ok(net)
}

/// Build the 1D monitoring U-Net for a local window of `dims` (wx, wy, nz)
/// and `n_t` output time-step channels.
pub fn build_monitor_unet(dims: (usize, usize, usize), n_t: usize, scale: UnetScale) -> Result<Network> {
    if n_t < 1 {
        return Err(GhmError::Config("monitor net needs at least one output channel".into()));
    }
    let (wx, wy, nz) = dims;
    let pre_ch = [scale.ch(16), scale.ch(32), scale.ch(64), scale.ch(128)];
    let enc_ch = [scale.ch(64), scale.ch(128), scale.ch(256), scale.ch(512)];
    let res_ch = scale.ch(512);
    let out_ch = scale.ch(64);

    let mut layers: Vec<LayerSpec> = Vec::new();
    let mut stage = 0usize;
    let push = |layers: &mut Vec<LayerSpec>, stage: &mut usize, l: LayerSpec| {
        layers.push(l);
        *stage += 1;
    };

    // 3D preconvolution collapsing the areal window to a 1D signal over z.
    let pre_paper: [[Axis; 3]; 4] = [
        [Axis { k: 3, s: 1, p: 0 }, Axis { k: 3, s: 1, p: 0 }, Axis { k: 3, s: 1, p: 1 }],
        [Axis { k: 3, s: 2, p: 1 }, Axis { k: 3, s: 2, p: 1 }, Axis { k: 3, s: 1, p: 1 }],
        [Axis { k: 5, s: 2, p: 0 }, Axis { k: 5, s: 2, p: 0 }, Axis { k: 3, s: 1, p: 1 }],
        [Axis { k: 3, s: 1, p: 0 }, Axis { k: 3, s: 1, p: 0 }, Axis { k: 3, s: 1, p: 1 }],
    ];
    let mut cur_dims = [wx, wy, nz];
    let mut cur_ch = 3;
    for (i, paper_axes) in pre_paper.iter().enumerate() {
        let label = format!("pre{}", i + 1);
        let st = stage3(cur_dims, *paper_axes, &label, false)?;
        push(&mut layers, &mut stage, conv3(cur_ch, pre_ch[i], st.axes, &label));
        push(&mut layers, &mut stage, act(Act::Swish, &format!("{label}.act")));
        cur_dims = st.out_dims;
        cur_ch = pre_ch[i];
    }
    if cur_dims[0] != 1 || cur_dims[1] != 1 {
        return Err(GhmError::Shape(format!(
            "monitor preconvolution must collapse the areal window to 1x1, got {}x{}",
            cur_dims[0], cur_dims[1]
        )));
    }
    push(&mut layers, &mut stage, LayerSpec { kind: LayerKind::Squeeze, label: "squeeze".into() });
    let pre_out_stage = stage;
    let mut cur_len = cur_dims[2];

    // 1D encoder.
    let enc_paper: [Axis; 4] = [
        Axis { k: 3, s: 1, p: 0 },
        Axis { k: 3, s: 1, p: 0 },
        Axis { k: 3, s: 2, p: 0 },
        Axis { k: 3, s: 2, p: 0 },
    ];
    struct Stage1 {
        axis: Axis,
        in_len: usize,
    }
    let mut enc_stages: Vec<Stage1> = Vec::new();
    let mut enc_out_stage_ids = Vec::new();
    for (i, paper_axis) in enc_paper.iter().enumerate() {
        let label = format!("enc{}", i + 1);
        push(&mut layers, &mut stage, conv1(cur_ch, enc_ch[i], same1_for(cur_len), &format!("{label}.a")));
        push(&mut layers, &mut stage, act(Act::Relu, &format!("{label}.a.act")));
        let a = adapt(cur_len, *paper_axis);
        let out_len = conv_out_size(cur_len, a.k, a.s, a.p, 0)
            .map_err(|e| GhmError::Shape(format!("{label}: {e}")))?;
        let back = (out_len - 1) * a.s + a.k;
        if back < 2 * a.p || back - 2 * a.p != cur_len {
            return Err(GhmError::Shape(format!(
                "{label}: length {cur_len} with k={} s={} p={} is not exactly invertible",
                a.k, a.s, a.p
            )));
        }
        push(&mut layers, &mut stage, conv1(enc_ch[i], enc_ch[i], a, &format!("{label}.b")));
        push(&mut layers, &mut stage, act(Act::Relu, &format!("{label}.b.act")));
        enc_stages.push(Stage1 { axis: a, in_len: cur_len });
        enc_out_stage_ids.push(stage);
        cur_len = out_len;
        cur_ch = enc_ch[i];
    }

    // Four residual blocks at the bottleneck.
    for r in 0..4 {
        let label = format!("res{}", r + 1);
        let block_input = stage;
        push(&mut layers, &mut stage, conv1(res_ch, res_ch, same1_for(cur_len), &format!("{label}.a")));
        push(&mut layers, &mut stage, act(Act::Relu, &format!("{label}.a.act")));
        push(&mut layers, &mut stage, conv1(res_ch, res_ch, same1_for(cur_len), &format!("{label}.b")));
        push(
            &mut layers,
            &mut stage,
            LayerSpec { kind: LayerKind::AddSkip { src: block_input }, label: format!("{label}.add") },
        );
        push(&mut layers, &mut stage, act(Act::Relu, &format!("{label}.act")));
    }

    // 1D decoder with skips.
    for i in (0..4).rev() {
        let label = format!("dec{}", 4 - i);
        let st = &enc_stages[i];
        let target_ch = enc_ch[i];
        push(&mut layers, &mut stage, convt1(cur_ch, 2 * target_ch, same1_for(cur_len), &format!("{label}.a")));
        push(&mut layers, &mut stage, act(Act::Relu, &format!("{label}.a.act")));
        push(&mut layers, &mut stage, convt1(2 * target_ch, target_ch, st.axis, &format!("{label}.b")));
        push(&mut layers, &mut stage, act(Act::Relu, &format!("{label}.b.act")));
        cur_len = st.in_len;
        cur_ch = target_ch;
        let (skip_stage, skip_ch) = if i >= 1 {
            (enc_out_stage_ids[i - 1], enc_ch[i - 1])
        } else {
            (pre_out_stage, pre_ch[3])
        };
        push(
            &mut layers,
            &mut stage,
            LayerSpec { kind: LayerKind::ConcatSkip { src: skip_stage }, label: format!("{label}.skip") },
        );
        cur_ch += skip_ch;
    }

    // Output head.
    push(&mut layers, &mut stage, conv1(cur_ch, out_ch, same1_for(cur_len), "out1"));
    push(&mut layers, &mut stage, act(Act::Swish, "out1.act"));
    push(&mut layers, &mut stage, conv1(out_ch, n_t, same1_for(cur_len), "out2"));

    let net = Network { layers, input_shape: vec![3, wx, wy, nz] };
    let trace = super::layers::shape_trace(&net)?;
    let out = trace.last().unwrap();
    if out[..] != [n_t, nz] {
        return Err(GhmError::Shape(format!(
            "monitor net output {:?} should be [{n_t}, {nz}]",
            out
        )));
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::layers::shape_trace;
    use crate::nets::tape::{backward, forward, init_params, param_layout};
    use crate::nets::tensor::Tensor;
    use rand::Rng;

    fn trace_of(net: &Network, label: &str) -> Vec<usize> {
        let trace = shape_trace(net).unwrap();
        let idx = net.layers.iter().position(|l| l.label == label).unwrap();
        trace[idx + 1].clone()
    }

    #[test]
    fn seismic_paper_trace_matches_table() {
        let net = build_seismic_unet((128, 128, 35), 6, UnetScale::Paper).unwrap();
        let rows: [(&str, [usize; 4]); 15] = [
            ("pre1", [64, 126, 126, 33]),
            ("pre1.act", [64, 126, 126, 33]),
            ("pre2", [32, 42, 42, 7]),
            ("pre2.act", [32, 42, 42, 7]),
            ("enc1.b.act", [32, 40, 40, 7]),
            ("enc2.b.act", [64, 19, 19, 7]),
            ("enc3.b.act", [128, 9, 9, 5]),
            ("enc4.b.act", [256, 4, 4, 3]),
            ("dec1.b.act", [256, 9, 9, 5]),
            ("dec2.b.act", [128, 19, 19, 7]),
            ("dec3.b.act", [64, 40, 40, 7]),
            ("dec4.b.act", [32, 42, 42, 7]),
            ("out1", [32, 42, 42, 7]),
            ("out1.act", [32, 42, 42, 7]),
            ("out2", [6, 42, 42, 7]),
        ];
        for (label, expect) in rows {
            assert_eq!(trace_of(&net, label), expect.to_vec(), "row {label}");
        }
    }

    #[test]
    fn monitor_paper_trace_matches_table() {
        let net = build_monitor_unet((19, 19, 35), 16, UnetScale::Paper).unwrap();
        let rows3: [(&str, [usize; 4]); 4] = [
            ("pre1", [16, 17, 17, 35]),
            ("pre2", [32, 9, 9, 35]),
            ("pre3", [64, 3, 3, 35]),
            ("pre4", [128, 1, 1, 35]),
        ];
        for (label, expect) in rows3 {
            assert_eq!(trace_of(&net, label), expect.to_vec(), "row {label}");
        }
        let rows1: [(&str, [usize; 2]); 12] = [
            ("enc1.b.act", [64, 33]),
            ("enc2.b.act", [128, 31]),
            ("enc3.b.act", [256, 15]),
            ("enc4.b.act", [512, 7]),
            ("res1.act", [512, 7]),
            ("res2.act", [512, 7]),
            ("res3.act", [512, 7]),
            ("res4.act", [512, 7]),
            ("dec1.b.act", [512, 15]),
            ("dec2.b.act", [256, 31]),
            ("dec3.b.act", [128, 33]),
            ("dec4.b.act", [64, 35]),
        ];
        for (label, expect) in rows1 {
            assert_eq!(trace_of(&net, label), expect.to_vec(), "row {label}");
        }
        assert_eq!(trace_of(&net, "out2"), vec![16, 35]);
    }

    #[test]
    fn desk_builders_produce_consistent_shapes() {
        let net = build_seismic_unet((32, 32, 15), 3, UnetScale::Desk).unwrap();
        assert_eq!(net.output_shape().unwrap(), vec![3, 10, 10, 3]);
        let net = build_monitor_unet((9, 9, 15), 8, UnetScale::Desk).unwrap();
        assert_eq!(net.output_shape().unwrap(), vec![8, 15]);
    }

    #[test]
    fn zero_final_layer_predicts_zero() {
        let net = build_seismic_unet((12, 12, 10), 2, UnetScale::Desk).unwrap();
        let mut params = init_params::<f32>(&net, 7);
        let layout = param_layout(&net);
        let (w, b) = layout.iter().rev().flatten().next().copied().unwrap();
        params.tensors[w] = Tensor::zeros(&params.tensors[w].shape);
        params.tensors[b] = Tensor::zeros(&params.tensors[b].shape);
        let mut rng = crate::grf::derive_rng(8, 0, 61);
        let input = Tensor::from_vec(
            &net.input_shape.clone(),
            (0..net.input_shape.iter().product::<usize>())
                .map(|_| rng.gen_range(-1.0f32..1.0))
                .collect(),
        )
        .unwrap();
        let tape = forward(&net, &params, input).unwrap();
        assert!(tape.output().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zeroed_residual_block_is_identity() {
        // a standalone residual block fed a nonnegative signal
        let mut layers = Vec::new();
        layers.push(conv1(4, 4, SAME1, "res.a"));
        layers.push(act(Act::Relu, "res.a.act"));
        layers.push(conv1(4, 4, SAME1, "res.b"));
        layers.push(LayerSpec { kind: LayerKind::AddSkip { src: 0 }, label: "res.add".into() });
        layers.push(act(Act::Relu, "res.act"));
        let net = Network { layers, input_shape: vec![4, 9] };
        let mut params = init_params::<f64>(&net, 9);
        for t in &mut params.tensors {
            *t = Tensor::zeros(&t.shape);
        }
        let mut rng = crate::grf::derive_rng(10, 0, 61);
        let input =
            Tensor::from_vec(&[4, 9], (0..36).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
        let tape = forward(&net, &params, input.clone()).unwrap();
        assert_eq!(tape.output().data, input.data);
    }

    #[test]
    fn inadmissible_dims_error_with_trace() {
        // a 25x25 window leaves a 2x2 areal residue after the preconvolution
        let err = build_monitor_unet((25, 25, 15), 2, UnetScale::Desk).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("collapse"), "{msg}");
    }

    #[test]
    fn desk_gradients_flow_to_every_parameter() {
        // a quick smoke check that the full graph is connected; exhaustive
        // finite-difference checks live in the gradcheck integration test
        let net = build_monitor_unet((9, 9, 15), 2, UnetScale::Desk).unwrap();
        let params = init_params::<f64>(&net, 11);
        let mut rng = crate::grf::derive_rng(12, 0, 61);
        let input = Tensor::from_vec(
            &net.input_shape.clone(),
            (0..net.input_shape.iter().product::<usize>())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect(),
        )
        .unwrap();
        let tape = forward(&net, &params, input).unwrap();
        let seed = Tensor::from_vec(
            &tape.output().shape.clone(),
            (0..tape.output().numel()).map(|i| (i % 5) as f64 * 0.3 + 0.1).collect(),
        )
        .unwrap();
        let grads = backward(&tape, &params, seed).unwrap();
        for (g, name) in grads.iter().zip(&params.names) {
            let nonzero = g.data.iter().any(|&v| v != 0.0);
            assert!(nonzero, "no gradient reached {name}");
        }
    }
}
