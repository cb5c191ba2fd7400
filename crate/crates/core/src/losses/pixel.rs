use crate::error::{Error, Result};
use crate::nn::Tensor;

pub(crate) fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    if a.is_empty() {
        return Err(Error::Shape("empty batch".into()));
    }
    Ok(())
}

/// Mean absolute difference.
pub fn content_l1(sr: &Tensor, hr: &Tensor) -> Result<f64> {
    same_shape(sr, hr)?;
    let total: f64 = sr.iter().zip(hr.iter()).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / sr.len() as f64)
}

pub fn content_l1_grad(sr: &Tensor, hr: &Tensor) -> Result<(f64, Tensor)> {
    let value = content_l1(sr, hr)?;
    let n = sr.len() as f64;
    let mut grad = sr - hr;
    grad.mapv_inplace(|d| {
        if d > 0.0 {
            1.0 / n
        } else if d < 0.0 {
            -1.0 / n
        } else {
            0.0
        }
    });
    Ok((value, grad))
}
