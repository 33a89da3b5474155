//! Direct 2-D cross-correlation kernels on `[C, H, W]` tensors.
//!
//! The three kernels are mutually adjoint, which lets the convolution and
//! the tied transposed convolution share them for forward and backward.

use crate::scalar::Scalar;

/// Output size of a convolution along one axis.
pub fn conv_out_size(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    if stride == 0 || input + 2 * pad < kernel {
        return None;
    }
    Some((input + 2 * pad - kernel) / stride + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub c_in: usize,
    pub h_in: usize,
    pub w_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub h_out: usize,
    pub w_out: usize,
}

impl ConvGeom {
    /// Range of output indices `i` whose tap `ki` lands inside the input.
    #[inline]
    fn valid_range(&self, kk: usize, n_in: usize, n_out: usize) -> (usize, usize) {
        // position = i*stride + kk - pad must lie in [0, n_in)
        let s = self.stride;
        let lo = if kk >= self.pad {
            0
        } else {
            (self.pad - kk).div_ceil(s)
        };
        let hi = if n_in + self.pad > kk {
            ((n_in + self.pad - kk - 1) / s + 1).min(n_out)
        } else {
            0
        };
        (lo, hi.max(lo))
    }
}

/// `out[o,i,j] += Σ_{c,ki,kj} w[o,c,ki,kj] · x[c, i·s+ki−p, j·s+kj−p]`
pub(crate) fn forward_acc<T: Scalar>(g: &ConvGeom, x: &[T], w: &[T], out: &mut [T]) {
    let k = g.k;
    for o in 0..g.c_out {
        let out_o = &mut out[o * g.h_out * g.w_out..(o + 1) * g.h_out * g.w_out];
        for c in 0..g.c_in {
            let x_c = &x[c * g.h_in * g.w_in..(c + 1) * g.h_in * g.w_in];
            for ki in 0..k {
                let (i0, i1) = g.valid_range(ki, g.h_in, g.h_out);
                for kj in 0..k {
                    let wv = w[((o * g.c_in + c) * k + ki) * k + kj];
                    let (j0, j1) = g.valid_range(kj, g.w_in, g.w_out);
                    for i in i0..i1 {
                        let row = i * g.stride + ki - g.pad;
                        let x_row = &x_c[row * g.w_in..(row + 1) * g.w_in];
                        let out_row = &mut out_o[i * g.w_out..(i + 1) * g.w_out];
                        for j in j0..j1 {
                            out_row[j] += wv * x_row[j * g.stride + kj - g.pad];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`forward_acc`] with respect to `x`:
/// `dx[c, i·s+ki−p, j·s+kj−p] += w[o,c,ki,kj] · dout[o,i,j]`.
pub(crate) fn input_grad_acc<T: Scalar>(g: &ConvGeom, dout: &[T], w: &[T], dx: &mut [T]) {
    let k = g.k;
    for o in 0..g.c_out {
        let d_o = &dout[o * g.h_out * g.w_out..(o + 1) * g.h_out * g.w_out];
        for c in 0..g.c_in {
            let dx_c = &mut dx[c * g.h_in * g.w_in..(c + 1) * g.h_in * g.w_in];
            for ki in 0..k {
                let (i0, i1) = g.valid_range(ki, g.h_in, g.h_out);
                for kj in 0..k {
                    let wv = w[((o * g.c_in + c) * k + ki) * k + kj];
                    let (j0, j1) = g.valid_range(kj, g.w_in, g.w_out);
                    for i in i0..i1 {
                        let row = i * g.stride + ki - g.pad;
                        let d_row = &d_o[i * g.w_out..(i + 1) * g.w_out];
                        let dx_row = &mut dx_c[row * g.w_in..(row + 1) * g.w_in];
                        for j in j0..j1 {
                            dx_row[j * g.stride + kj - g.pad] += wv * d_row[j];
                        }
                    }
                }
            }
        }
    }
}

/// `dw[o,c,ki,kj] += Σ_{i,j} dout[o,i,j] · x[c, i·s+ki−p, j·s+kj−p]`
pub(crate) fn weight_grad_acc<T: Scalar>(g: &ConvGeom, x: &[T], dout: &[T], dw: &mut [T]) {
    let k = g.k;
    for o in 0..g.c_out {
        let d_o = &dout[o * g.h_out * g.w_out..(o + 1) * g.h_out * g.w_out];
        for c in 0..g.c_in {
            let x_c = &x[c * g.h_in * g.w_in..(c + 1) * g.h_in * g.w_in];
            for ki in 0..k {
                let (i0, i1) = g.valid_range(ki, g.h_in, g.h_out);
                for kj in 0..k {
                    let (j0, j1) = g.valid_range(kj, g.w_in, g.w_out);
                    let mut acc = T::zero();
                    for i in i0..i1 {
                        let row = i * g.stride + ki - g.pad;
                        let x_row = &x_c[row * g.w_in..(row + 1) * g.w_in];
                        let d_row = &d_o[i * g.w_out..(i + 1) * g.w_out];
                        for j in j0..j1 {
                            acc += d_row[j] * x_row[j * g.stride + kj - g.pad];
                        }
                    }
                    dw[((o * g.c_in + c) * k + ki) * k + kj] += acc;
                }
            }
        }
    }
}
