use super::Tensor;
use crate::error::{Error, Result};

/// Sub-pixel rearrangement:
/// `out[n, c, r*i + a, r*j + b] = in[n, c*r*r + a*r + b, i, j]`.
pub fn pixel_shuffle(x: &Tensor, r: usize) -> Result<Tensor> {
    let (n, c, h, w) = x.dim();
    if r == 0 || c % (r * r) != 0 {
        return Err(Error::Shape(format!("{c} channels are not divisible by {r}^2")));
    }
    let co = c / (r * r);
    Ok(Tensor::from_shape_fn((n, co, h * r, w * r), |(b, ch, y, x_)| {
        let (i, a) = (y / r, y % r);
        let (j, bb) = (x_ / r, x_ % r);
        x[[b, ch * r * r + a * r + bb, i, j]]
    }))
}

/// Inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle(x: &Tensor, r: usize) -> Result<Tensor> {
    let (n, c, h, w) = x.dim();
    if r == 0 || h % r != 0 || w % r != 0 {
        return Err(Error::Shape(format!("{h}x{w} is not divisible by {r}")));
    }
    Ok(Tensor::from_shape_fn((n, c * r * r, h / r, w / r), |(b, ch, i, j)| {
        let (co, rem) = (ch / (r * r), ch % (r * r));
        let (a, bb) = (rem / r, rem % r);
        x[[b, co, r * i + a, r * j + bb]]
    }))
}
