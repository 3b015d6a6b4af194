//! Mean squared / mean absolute error over all elements, with gradients.

use super::tensor::{Scalar, Tensor};
use crate::{GhmError, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    Mae,
}

fn check_shapes<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<()> {
    if pred.shape != target.shape {
        return Err(GhmError::Shape(format!(
            "loss shape mismatch: {:?} vs {:?}",
            pred.shape, target.shape
        )));
    }
    Ok(())
}

pub fn loss_value<T: Scalar>(kind: LossKind, pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    check_shapes(pred, target)?;
    let n = pred.numel() as f64;
    let acc: f64 = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(&p, &t)| {
            let d = p.as_f64() - t.as_f64();
            match kind {
                LossKind::Mse => d * d,
                LossKind::Mae => d.abs(),
            }
        })
        .sum();
    Ok(acc / n)
}

/// Loss plus the seed gradient `d(loss)/d(pred)`.
pub fn loss_grad<T: Scalar>(
    kind: LossKind,
    pred: &Tensor<T>,
    target: &Tensor<T>,
) -> Result<(f64, Tensor<T>)> {
    check_shapes(pred, target)?;
    let n = pred.numel() as f64;
    let mut acc = 0.0;
    let grad: Vec<T> = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(&p, &t)| {
            let d = p.as_f64() - t.as_f64();
            match kind {
                LossKind::Mse => {
                    acc += d * d;
                    T::from_f64(2.0 * d / n)
                }
                LossKind::Mae => {
                    acc += d.abs();
                    T::from_f64(d.signum() / n)
                }
            }
        })
        .collect();
    Ok((acc / n, Tensor { shape: pred.shape.clone(), data: grad }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_is_zero() {
        let a = Tensor::<f64>::from_vec(&[4], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(loss_value(LossKind::Mse, &a, &a).unwrap(), 0.0);
        assert_eq!(loss_value(LossKind::Mae, &a, &a).unwrap(), 0.0);
    }

    #[test]
    fn constant_residual_values() {
        let p = Tensor::<f64>::from_vec(&[5], vec![0.1; 5]).unwrap();
        let t = Tensor::<f64>::zeros(&[5]);
        assert!((loss_value(LossKind::Mse, &p, &t).unwrap() - 0.01).abs() < 1e-15);
        assert!((loss_value(LossKind::Mae, &p, &t).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = Tensor::<f64>::zeros(&[3]);
        let b = Tensor::<f64>::zeros(&[4]);
        assert!(loss_value(LossKind::Mse, &a, &b).is_err());
    }

    #[test]
    fn gradients_match_central_differences() {
        let p = Tensor::<f64>::from_vec(&[4], vec![0.3, -0.8, 0.1, 1.2]).unwrap();
        let t = Tensor::<f64>::from_vec(&[4], vec![0.0, 0.5, 0.1, -0.4]).unwrap();
        for kind in [LossKind::Mse, LossKind::Mae] {
            let (_, g) = loss_grad(kind, &p, &t).unwrap();
            let h = 1e-7;
            for i in 0..4 {
                if kind == LossKind::Mae && (p.data[i] - t.data[i]).abs() < 2.0 * h {
                    continue; // kink of |x|
                }
                let mut plus = p.clone();
                plus.data[i] += h;
                let mut minus = p.clone();
                minus.data[i] -= h;
                let num = (loss_value(kind, &plus, &t).unwrap()
                    - loss_value(kind, &minus, &t).unwrap())
                    / (2.0 * h);
                let denom = num.abs().max(g.data[i].abs()).max(1e-9);
                assert!(
                    (num - g.data[i]).abs() / denom < 1e-6,
                    "{kind:?} i={i}: {} vs {num}",
                    g.data[i]
                );
            }
        }
    }
}
