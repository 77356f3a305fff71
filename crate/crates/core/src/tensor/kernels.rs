// Loop kernels. Every reduction runs in a fixed order so results are
// bit-reproducible for identical inputs.

use super::Scalar;

/// `a[m×k] · b[k×n]`
pub(crate) fn matmul<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a[m×n] · b[k×n]ᵀ`, result `m×k`.
pub(crate) fn matmul_bt<T: Scalar>(a: &[T], b: &[T], m: usize, n: usize, k: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * k];
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for j in 0..k {
            let brow = &b[j * n..(j + 1) * n];
            let mut acc = T::zero();
            for (&x, &y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            out[i * k + j] = acc;
        }
    }
    out
}

/// `a[m×k]ᵀ · b[m×n]`, result `k×n`.
pub(crate) fn matmul_at<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); k * n];
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == T::zero() {
                continue;
            }
            let row = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    /// Input coordinate for output `o` and kernel tap `t`, or `None` inside padding.
    #[inline]
    fn src(&self, o: usize, t: usize, extent: usize) -> Option<usize> {
        let pos = (o * self.stride + t) as isize - self.pad as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }
}

pub(crate) fn conv2d<T: Scalar>(x: &[T], k: &[T], bias: Option<&[T]>, g: &ConvGeom) -> Vec<T> {
    let mut out = vec![T::zero(); g.c_out * g.oh * g.ow];
    for co in 0..g.c_out {
        let b = bias.map_or(T::zero(), |b| b[co]);
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let mut acc = T::zero();
                for ci in 0..g.c_in {
                    for ky in 0..g.kh {
                        let Some(iy) = g.src(oy, ky, g.h) else { continue };
                        for kx in 0..g.kw {
                            let Some(ix) = g.src(ox, kx, g.w) else { continue };
                            acc += x[(ci * g.h + iy) * g.w + ix]
                                * k[((co * g.c_in + ci) * g.kh + ky) * g.kw + kx];
                        }
                    }
                }
                out[(co * g.oh + oy) * g.ow + ox] = acc + b;
            }
        }
    }
    out
}

/// Returns `(d_input, d_kernel, d_bias)`.
pub(crate) fn conv2d_backward<T: Scalar>(
    x: &[T],
    k: &[T],
    dy: &[T],
    g: &ConvGeom,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut dx = vec![T::zero(); x.len()];
    let mut dk = vec![T::zero(); k.len()];
    let mut db = vec![T::zero(); g.c_out];
    for co in 0..g.c_out {
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let d = dy[(co * g.oh + oy) * g.ow + ox];
                db[co] += d;
                for ci in 0..g.c_in {
                    for ky in 0..g.kh {
                        let Some(iy) = g.src(oy, ky, g.h) else { continue };
                        for kx in 0..g.kw {
                            let Some(ix) = g.src(ox, kx, g.w) else { continue };
                            let xi = (ci * g.h + iy) * g.w + ix;
                            let ki = ((co * g.c_in + ci) * g.kh + ky) * g.kw + kx;
                            dx[xi] += d * k[ki];
                            dk[ki] += d * x[xi];
                        }
                    }
                }
            }
        }
    }
    (dx, dk, db)
}

/// Max pooling over `c×h×w`; returns output values and the flat source
/// index of each maximum (first occurrence wins on ties).
pub(crate) fn max_pool2d<T: Scalar>(
    x: &[T],
    c: usize,
    h: usize,
    w: usize,
    size: usize,
    stride: usize,
) -> (Vec<T>, Vec<usize>, usize, usize) {
    let oh = (h - size) / stride + 1;
    let ow = (w - size) / stride + 1;
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut arg = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = T::neg_infinity();
                let mut best_i = 0;
                for ky in 0..size {
                    for kx in 0..size {
                        let i = (ch * h + oy * stride + ky) * w + ox * stride + kx;
                        if x[i] > best {
                            best = x[i];
                            best_i = i;
                        }
                    }
                }
                out.push(best);
                arg.push(best_i);
            }
        }
    }
    (out, arg, oh, ow)
}
