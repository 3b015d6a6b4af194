//! Flat layer descriptions and static shape propagation.
//!
//! A network is a linear list of atomic layers; skip connections reference
//! earlier stage outputs by index (0 = network input, i = output of layer i).

use crate::{GhmError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Act {
    Swish,
    Relu,
}

/// Convolution geometry with 1-D or 3-D spatial rank.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvGeom {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: Vec<usize>,
    pub stride: Vec<usize>,
    pub padding: Vec<usize>,
}

impl ConvGeom {
    pub fn rank(&self) -> usize {
        self.kernel.len()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.kernel.len();
        if r != self.stride.len() || r != self.padding.len() || (r != 1 && r != 3) {
            return Err(GhmError::Shape("conv geometry must have rank 1 or 3".into()));
        }
        if self.out_ch < 1 || self.in_ch < 1 {
            return Err(GhmError::Shape("conv needs at least one channel".into()));
        }
        if self.kernel.iter().any(|&k| k == 0) || self.stride.iter().any(|&s| s == 0) {
            return Err(GhmError::Shape("kernel and stride must be positive".into()));
        }
        Ok(())
    }

    /// Weight tensor shape: conv `[out, in, k...]`, transpose `[in, out, k...]`.
    pub fn weight_shape(&self, transpose: bool) -> Vec<usize> {
        let mut s = if transpose {
            vec![self.in_ch, self.out_ch]
        } else {
            vec![self.out_ch, self.in_ch]
        };
        s.extend_from_slice(&self.kernel);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerKind {
    Conv(ConvGeom),
    ConvTranspose(ConvGeom),
    Activation { act: Act },
    /// Channel-wise concatenation with stage `src`.
    ConcatSkip { src: usize },
    /// Element-wise addition with stage `src` (residual connection).
    AddSkip { src: usize },
    /// Drop leading unit spatial axes: [C, 1, 1, L] -> [C, L].
    Squeeze,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Block label for traces and checkpoints ("encoder2", "residual1", ...).
    pub label: String,
}

/// A shape-checked network: the layer list plus its expected input shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<LayerSpec>,
    /// `[channels, spatial...]`.
    pub input_shape: Vec<usize>,
}

pub fn conv_out_size(n: usize, k: usize, s: usize, p: usize, axis: usize) -> Result<usize> {
    let padded = n + 2 * p;
    if padded < k {
        return Err(GhmError::Shape(format!(
            "conv axis {axis}: input {n} with padding {p} is smaller than kernel {k}"
        )));
    }
    Ok((padded - k) / s + 1)
}

pub fn conv_transpose_out_size(n: usize, k: usize, s: usize, p: usize, axis: usize) -> Result<usize> {
    let full = (n - 1) * s + k;
    if full < 2 * p + 1 {
        return Err(GhmError::Shape(format!(
            "conv-transpose axis {axis}: output collapses (in {n}, k {k}, s {s}, p {p})"
        )));
    }
    Ok(full - 2 * p)
}

fn layer_out_shape(
    spec: &LayerSpec,
    input: &[usize],
    stages: &[Vec<usize>],
    index: usize,
) -> Result<Vec<usize>> {
    let fail = |msg: String| {
        GhmError::Shape(format!("layer {index} ({}): {msg}", spec.label))
    };
    match &spec.kind {
        LayerKind::Conv(g) | LayerKind::ConvTranspose(g) => {
            g.validate()?;
            let spatial = &input[1..];
            if spatial.len() != g.rank() {
                return Err(fail(format!(
                    "rank {} input fed to rank {} conv",
                    spatial.len(),
                    g.rank()
                )));
            }
            if input[0] != g.in_ch {
                return Err(fail(format!("expected {} input channels, got {}", g.in_ch, input[0])));
            }
            let transpose = matches!(spec.kind, LayerKind::ConvTranspose(_));
            let mut out = vec![g.out_ch];
            for a in 0..g.rank() {
                let n = if transpose {
                    conv_transpose_out_size(spatial[a], g.kernel[a], g.stride[a], g.padding[a], a)?
                } else {
                    conv_out_size(spatial[a], g.kernel[a], g.stride[a], g.padding[a], a)?
                };
                out.push(n);
            }
            Ok(out)
        }
        LayerKind::Activation { .. } => Ok(input.to_vec()),
        LayerKind::ConcatSkip { src } => {
            let other = stages
                .get(*src)
                .ok_or_else(|| fail(format!("skip source {src} out of range")))?;
            if other[1..] != input[1..] {
                return Err(fail(format!(
                    "concat spatial mismatch: {:?} vs {:?}",
                    &input[1..],
                    &other[1..]
                )));
            }
            let mut out = input.to_vec();
            out[0] += other[0];
            Ok(out)
        }
        LayerKind::AddSkip { src } => {
            let other = stages
                .get(*src)
                .ok_or_else(|| fail(format!("skip source {src} out of range")))?;
            if other[..] != input[..] {
                return Err(fail(format!("add shape mismatch: {:?} vs {:?}", input, other)));
            }
            Ok(input.to_vec())
        }
        LayerKind::Squeeze => {
            if input.len() == 4 && input[1] == 1 && input[2] == 1 {
                Ok(vec![input[0], input[3]])
            } else {
                Err(fail(format!("cannot squeeze shape {:?}", input)))
            }
        }
    }
}

/// Propagate shapes through the network. Entry 0 is the input shape and
/// entry i+1 the output of layer i; errors carry the per-layer trace.
pub fn shape_trace(net: &Network) -> Result<Vec<Vec<usize>>> {
    let mut stages: Vec<Vec<usize>> = vec![net.input_shape.clone()];
    for (i, spec) in net.layers.iter().enumerate() {
        let input = stages.last().unwrap().clone();
        match layer_out_shape(spec, &input, &stages, i) {
            Ok(shape) => stages.push(shape),
            Err(e) => {
                let mut trace = String::new();
                for (j, s) in stages.iter().enumerate() {
                    let name = if j == 0 { "input" } else { &net.layers[j - 1].label };
                    trace.push_str(&format!("\n  stage {j:>2} {name:<12} {s:?}"));
                }
                return Err(GhmError::Shape(format!("{e}; trace so far:{trace}")));
            }
        }
    }
    Ok(stages)
}

impl Network {
    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(shape_trace(self)?.last().unwrap().clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(in_ch: usize, out_ch: usize, k: [usize; 3], s: [usize; 3], p: [usize; 3]) -> LayerSpec {
        LayerSpec {
            kind: LayerKind::Conv(ConvGeom {
                in_ch,
                out_ch,
                kernel: k.to_vec(),
                stride: s.to_vec(),
                padding: p.to_vec(),
            }),
            label: "test".into(),
        }
    }

    #[test]
    fn conv_shape_formula_matches_tables() {
        // first preconvolution row of the seismic net
        let net = Network {
            layers: vec![conv(3, 64, [3, 3, 5], [1, 1, 1], [0, 0, 1])],
            input_shape: vec![3, 128, 128, 35],
        };
        let trace = shape_trace(&net).unwrap();
        assert_eq!(trace[1], vec![64, 126, 126, 33]);
    }

    #[test]
    fn negative_output_reports_axis() {
        let net = Network {
            layers: vec![conv(3, 8, [3, 3, 5], [1, 1, 1], [0, 0, 0])],
            input_shape: vec![3, 4, 4, 2],
        };
        let err = shape_trace(&net).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("axis 2"), "{msg}");
    }

    #[test]
    fn concat_requires_matching_spatial() {
        let net = Network {
            layers: vec![
                conv(2, 4, [1, 1, 1], [1, 1, 1], [0, 0, 0]),
                LayerSpec { kind: LayerKind::ConcatSkip { src: 0 }, label: "skip".into() },
            ],
            input_shape: vec![2, 5, 5, 5],
        };
        let trace = shape_trace(&net).unwrap();
        assert_eq!(trace[2], vec![6, 5, 5, 5]);
    }
}
