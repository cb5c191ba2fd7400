//! 2-D convolution via im2col and GEMM, processed one image and one band of
//! output rows at a time to bound the size of the column buffer.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayView3, ArrayViewMut3, Axis};

use super::Tensor;

const COL_BUDGET: usize = 1 << 21;

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub cin: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub ho: usize,
    pub wo: usize,
}

impl ConvGeom {
    pub fn new(cin: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Option<Self> {
        if h + 2 * pad < k || w + 2 * pad < k || stride == 0 {
            return None;
        }
        Some(Self {
            cin,
            h,
            w,
            k,
            stride,
            pad,
            ho: (h + 2 * pad - k) / stride + 1,
            wo: (w + 2 * pad - k) / stride + 1,
        })
    }

    /// Output columns `lo..hi` whose tap `kx` falls inside the input row.
    fn valid_columns(&self, kx: usize) -> (usize, usize) {
        let lo = if self.pad > kx {
            (self.pad - kx).div_ceil(self.stride)
        } else {
            0
        };
        let reach = self.w - 1 + self.pad;
        let hi = if reach >= kx {
            ((reach - kx) / self.stride + 1).min(self.wo)
        } else {
            0
        };
        (lo.min(hi), hi)
    }

    fn rows_per_chunk(&self) -> usize {
        (COL_BUDGET / (self.cin * self.k * self.k * self.wo).max(1)).clamp(1, self.ho)
    }
}

/// Writes the patches of output rows `oy0..oy1` of one image into columns
/// `offset..` of a `cin*k*k x ncols` column matrix stored in `cs`.
fn im2col_into(x: ArrayView3<f64>, g: &ConvGeom, oy0: usize, oy1: usize, cs: &mut [f64], ncols: usize, offset: usize) {
    let xs = x.as_slice().expect("standard layout");
    for ci in 0..g.cin {
        let plane = &xs[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let (lo, hi) = g.valid_columns(kx);
                let row = (ci * g.k + ky) * g.k + kx;
                let dst = &mut cs[row * ncols + offset..row * ncols + offset + (oy1 - oy0) * g.wo];
                for oy in oy0..oy1 {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let base = (oy - oy0) * g.wo;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    if g.stride == 1 {
                        let first = lo + kx - g.pad;
                        dst[base + lo..base + hi].copy_from_slice(&src[first..first + hi - lo]);
                    } else {
                        for ox in lo..hi {
                            dst[base + ox] = src[ox * g.stride + kx - g.pad];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col_into`]: scatters columns `offset..` back onto one
/// image gradient.
fn col2im_add(
    cs: &[f64],
    ncols: usize,
    offset: usize,
    g: &ConvGeom,
    oy0: usize,
    oy1: usize,
    mut dx: ArrayViewMut3<f64>,
) {
    let ds = dx.as_slice_mut().expect("standard layout");
    for ci in 0..g.cin {
        let plane = &mut ds[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.k {
            for kx in 0..g.k {
                let (lo, hi) = g.valid_columns(kx);
                let row = (ci * g.k + ky) * g.k + kx;
                let src = &cs[row * ncols + offset..row * ncols + offset + (oy1 - oy0) * g.wo];
                for oy in oy0..oy1 {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let base = (oy - oy0) * g.wo;
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in lo..hi {
                        dst[ox * g.stride + kx - g.pad] += src[base + ox];
                    }
                }
            }
        }
    }
}

/// A unit of work: either several whole images, or a band of output rows
/// of a single image.
#[derive(Debug, Clone, Copy)]
struct Block {
    n0: usize,
    n1: usize,
    oy0: usize,
    oy1: usize,
}

impl Block {
    fn width(&self, g: &ConvGeom) -> usize {
        (self.n1 - self.n0) * (self.oy1 - self.oy0) * g.wo
    }

    /// Column offset of image `n` within the block.
    fn offset(&self, n: usize, g: &ConvGeom) -> usize {
        (n - self.n0) * (self.oy1 - self.oy0) * g.wo
    }
}

fn blocks(n: usize, g: &ConvGeom) -> Vec<Block> {
    let per_image = g.cin * g.k * g.k * g.ho * g.wo;
    let mut out = Vec::new();
    if per_image <= COL_BUDGET {
        let group = (COL_BUDGET / per_image.max(1)).max(1);
        let mut n0 = 0;
        while n0 < n {
            let n1 = (n0 + group).min(n);
            out.push(Block {
                n0,
                n1,
                oy0: 0,
                oy1: g.ho,
            });
            n0 = n1;
        }
    } else {
        let chunk = g.rows_per_chunk();
        for i in 0..n {
            let mut oy0 = 0;
            while oy0 < g.ho {
                let oy1 = (oy0 + chunk).min(g.ho);
                out.push(Block {
                    n0: i,
                    n1: i + 1,
                    oy0,
                    oy1,
                });
                oy0 = oy1;
            }
        }
    }
    out
}

fn im2col(x: &Tensor, g: &ConvGeom, b: &Block) -> Array2<f64> {
    let ncols = b.width(g);
    let mut cols = Array2::<f64>::zeros((g.cin * g.k * g.k, ncols));
    let cs = cols.as_slice_mut().expect("standard layout");
    for n in b.n0..b.n1 {
        im2col_into(x.index_axis(Axis(0), n), g, b.oy0, b.oy1, cs, ncols, b.offset(n, g));
    }
    cols
}

fn weight_matrix(w: &Tensor) -> ArrayView2<'_, f64> {
    let (cout, cin, k, _) = w.dim();
    w.view()
        .into_shape_with_order((cout, cin * k * k))
        .expect("contiguous weights")
}

pub(crate) fn forward(x: &Tensor, w: &Tensor, b: Option<&Tensor>, g: &ConvGeom) -> Tensor {
    let n = x.dim().0;
    let cout = w.dim().0;
    let wm = weight_matrix(w);
    let mut out = Tensor::zeros((n, cout, g.ho, g.wo));
    let plane = g.ho * g.wo;
    for blk in blocks(n, g) {
        let cols = im2col(x, g, &blk);
        let res = wm.dot(&cols);
        let band = (blk.oy1 - blk.oy0) * g.wo;
        for i in blk.n0..blk.n1 {
            let off = blk.offset(i, g);
            let mut oi = out.index_axis_mut(Axis(0), i);
            let os = oi.as_slice_mut().expect("standard layout");
            for co in 0..cout {
                let bias = b.map_or(0.0, |b| b.as_slice().expect("standard layout")[co]);
                let start = co * plane + blk.oy0 * g.wo;
                let src = &res.row(co);
                for (k, d) in os[start..start + band].iter_mut().enumerate() {
                    *d = src[off + k] + bias;
                }
            }
        }
    }
    out
}

pub(crate) struct ConvGrads {
    pub dx: Option<Tensor>,
    pub dw: Option<Tensor>,
    pub db: Tensor,
}

pub(crate) fn backward(x: &Tensor, w: &Tensor, dout: &Tensor, g: &ConvGeom, need_dx: bool, need_dw: bool) -> ConvGrads {
    let n = x.dim().0;
    let (cout, cin, k, _) = w.dim();
    let wm = weight_matrix(w);
    let wt = wm.t();
    let mut dwm = Array2::<f64>::zeros((cout, cin * k * k));
    let mut db = Tensor::zeros((cout, 1, 1, 1));
    let mut dx = need_dx.then(|| Tensor::zeros(x.dim()));
    let plane = g.ho * g.wo;
    for blk in blocks(n, g) {
        let width = blk.width(g);
        let band = (blk.oy1 - blk.oy0) * g.wo;
        let mut dchunk = Array2::<f64>::zeros((cout, width));
        for i in blk.n0..blk.n1 {
            let off = blk.offset(i, g);
            let di = dout.index_axis(Axis(0), i);
            let ds = di.as_slice().expect("standard layout");
            for co in 0..cout {
                let start = co * plane + blk.oy0 * g.wo;
                dchunk.row_mut(co).as_slice_mut().unwrap()[off..off + band].copy_from_slice(&ds[start..start + band]);
            }
        }
        let dbs = db.as_slice_mut().unwrap();
        for (co, row) in dchunk.rows().into_iter().enumerate() {
            dbs[co] += row.sum();
        }
        if need_dw {
            let cols = im2col(x, g, &blk);
            general_mat_mul(1.0, &dchunk, &cols.t(), 1.0, &mut dwm);
        }
        if let Some(dx) = dx.as_mut() {
            let dcols = wt.dot(&dchunk);
            let cs = dcols.as_slice().expect("standard layout");
            for i in blk.n0..blk.n1 {
                col2im_add(
                    cs,
                    width,
                    blk.offset(i, g),
                    g,
                    blk.oy0,
                    blk.oy1,
                    dx.index_axis_mut(Axis(0), i),
                );
            }
        }
    }
    ConvGrads {
        dx,
        dw: need_dw.then(|| dwm.into_shape_with_order((cout, cin, k, k)).expect("contiguous")),
        db,
    }
}
