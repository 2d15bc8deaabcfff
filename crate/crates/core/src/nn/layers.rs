//! Batched dense and 3x3 convolution kernels over flat row-major buffers.

use crate::scalar::Scalar;

/// `c = a b + beta c` with `a: m x k`, `b: k x n`, `c: m x n`, all row-major.
/// A `true` transpose flag means the buffer holds the transposed matrix.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Scalar>(m: usize, k: usize, n: usize, a: &[T], a_t: bool, b: &[T], b_t: bool, beta: T, c: &mut [T]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too short");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m) } else { (k, 1) };
    let (rsb, csb) = if b_t { (1, k) } else { (n, 1) };
    // SAFETY: the length assertion covers every index the strides address.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            T::one(),
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}

pub fn relu_forward<T: Scalar>(x: &mut [T]) {
    for v in x.iter_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zero the gradient wherever the rectified output was not positive.
pub fn relu_backward<T: Scalar>(out: &[T], grad: &mut [T]) {
    for (g, &o) in grad.iter_mut().zip(out) {
        if o <= T::zero() {
            *g = T::zero();
        }
    }
}

/// Fully connected layer. Weights are stored `input x output`, then the bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn new(input: usize, output: usize) -> Self {
        Self { input, output }
    }

    pub fn weight_len(&self) -> usize {
        self.input * self.output
    }

    pub fn param_len(&self) -> usize {
        self.weight_len() + self.output
    }

    /// `y[b] = x[b] W + bias` for every sample of the batch.
    pub fn forward<T: Scalar>(&self, w: &[T], bias: &[T], x: &[T], batch: usize, y: &mut [T]) {
        let (ni, no) = (self.input, self.output);
        for b in 0..batch {
            y[b * no..(b + 1) * no].copy_from_slice(bias);
        }
        gemm(batch, ni, no, x, false, w, false, T::one(), y);
    }

    /// Accumulate parameter gradients into `dw`/`dbias`; overwrite `dx`
    /// with the input gradient when requested.
    #[allow(clippy::too_many_arguments)]
    pub fn backward<T: Scalar>(
        &self,
        w: &[T],
        x: &[T],
        dy: &[T],
        batch: usize,
        dw: &mut [T],
        dbias: &mut [T],
        dx: Option<&mut [T]>,
    ) {
        let (ni, no) = (self.input, self.output);
        for b in 0..batch {
            let dyb = &dy[b * no..(b + 1) * no];
            for (d, &g) in dbias.iter_mut().zip(dyb) {
                *d += g;
            }
        }
        gemm(ni, batch, no, x, true, dy, false, T::one(), dw);
        if let Some(dx) = dx {
            gemm(batch, no, ni, dy, false, w, true, T::zero(), dx);
        }
    }
}

/// 3x3 convolution with zero padding of one cell.
/// Weights are stored `out_c x (in_c * 9)`, then the bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv3x3 {
    pub in_c: usize,
    pub out_c: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub stride: usize,
}

pub const KERNEL: usize = 3;
const PAD: usize = 1;

impl Conv3x3 {
    pub fn new(in_c: usize, out_c: usize, in_h: usize, in_w: usize, stride: usize) -> Self {
        Self {
            in_c,
            out_c,
            in_h,
            in_w,
            stride,
        }
    }

    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * PAD - KERNEL) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * PAD - KERNEL) / self.stride + 1
    }

    pub fn input_len(&self) -> usize {
        self.in_c * self.in_h * self.in_w
    }

    pub fn output_len(&self) -> usize {
        self.out_c * self.out_h() * self.out_w()
    }

    pub fn patch_len(&self) -> usize {
        self.in_c * KERNEL * KERNEL
    }

    pub fn cols_len(&self) -> usize {
        self.patch_len() * self.out_h() * self.out_w()
    }

    pub fn weight_len(&self) -> usize {
        self.out_c * self.patch_len()
    }

    pub fn param_len(&self) -> usize {
        self.weight_len() + self.out_c
    }

    /// Unfold one sample into a `patch_len x positions` matrix.
    pub fn im2col<T: Scalar>(&self, x: &[T], cols: &mut [T]) {
        let (oh, ow) = (self.out_h(), self.out_w());
        let npos = oh * ow;
        for c in 0..self.in_c {
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let r = (c * KERNEL + ky) * KERNEL + kx;
                    let row = &mut cols[r * npos..(r + 1) * npos];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - PAD as isize;
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - PAD as isize;
                            row[oy * ow + ox] = if iy < 0 || ix < 0 || iy >= self.in_h as isize || ix >= self.in_w as isize {
                                T::zero()
                            } else {
                                x[(c * self.in_h + iy as usize) * self.in_w + ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    /// Fold a column-gradient matrix back onto the input (adds into `dx`).
    pub fn col2im<T: Scalar>(&self, dcols: &[T], dx: &mut [T]) {
        let (oh, ow) = (self.out_h(), self.out_w());
        let npos = oh * ow;
        for c in 0..self.in_c {
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let r = (c * KERNEL + ky) * KERNEL + kx;
                    let row = &dcols[r * npos..(r + 1) * npos];
                    for oy in 0..oh {
                        let iy = (oy * self.stride + ky) as isize - PAD as isize;
                        if iy < 0 || iy >= self.in_h as isize {
                            continue;
                        }
                        for ox in 0..ow {
                            let ix = (ox * self.stride + kx) as isize - PAD as isize;
                            if ix < 0 || ix >= self.in_w as isize {
                                continue;
                            }
                            dx[(c * self.in_h + iy as usize) * self.in_w + ix as usize] += row[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }

    /// Forward a batch. `cols` receives the unfolded inputs (kept for the
    /// backward pass), `y` the channel-major outputs.
    pub fn forward<T: Scalar>(&self, w: &[T], bias: &[T], x: &[T], batch: usize, cols: &mut [T], y: &mut [T]) {
        let (nin, nout, ncols) = (self.input_len(), self.output_len(), self.cols_len());
        let npos = self.out_h() * self.out_w();
        let pl = self.patch_len();
        for b in 0..batch {
            let cb = &mut cols[b * ncols..(b + 1) * ncols];
            self.im2col(&x[b * nin..(b + 1) * nin], cb);
            let yb = &mut y[b * nout..(b + 1) * nout];
            for oc in 0..self.out_c {
                yb[oc * npos..(oc + 1) * npos].fill(bias[oc]);
            }
            gemm(self.out_c, pl, npos, &w[..self.weight_len()], false, cb, false, T::one(), yb);
        }
    }

    /// Accumulate parameter gradients; overwrite `dx` when requested.
    #[allow(clippy::too_many_arguments)]
    pub fn backward<T: Scalar>(
        &self,
        w: &[T],
        cols: &[T],
        dy: &[T],
        batch: usize,
        dw: &mut [T],
        dbias: &mut [T],
        mut dx: Option<&mut [T]>,
    ) {
        let (nin, nout, ncols) = (self.input_len(), self.output_len(), self.cols_len());
        let npos = self.out_h() * self.out_w();
        let pl = self.patch_len();
        let mut dcols = if dx.is_some() { vec![T::zero(); ncols] } else { Vec::new() };
        for b in 0..batch {
            let cb = &cols[b * ncols..(b + 1) * ncols];
            let dyb = &dy[b * nout..(b + 1) * nout];
            for oc in 0..self.out_c {
                dbias[oc] += dyb[oc * npos..(oc + 1) * npos].iter().copied().sum::<T>();
            }
            gemm(self.out_c, npos, pl, dyb, false, cb, true, T::one(), dw);
            if let Some(dx) = dx.as_deref_mut() {
                gemm(pl, self.out_c, npos, &w[..self.weight_len()], true, dyb, false, T::zero(), &mut dcols);
                let dxb = &mut dx[b * nin..(b + 1) * nin];
                dxb.fill(T::zero());
                self.col2im(&dcols, dxb);
            }
        }
    }
}

/// `Q_a = V + A_a - mean(A)`.
pub fn dueling_aggregate<T: Scalar>(value: T, advantages: &[T]) -> Vec<T> {
    let mean = advantages.iter().copied().sum::<T>() / T::of_usize(advantages.len());
    advantages.iter().map(|&a| value + a - mean).collect()
}

/// Gradients of the dueling aggregation: `(dV, dA)`.
pub fn dueling_backward<T: Scalar>(dq: &[T]) -> (T, Vec<T>) {
    let dv = dq.iter().copied().sum::<T>();
    let mean = dv / T::of_usize(dq.len());
    (dv, dq.iter().map(|&g| g - mean).collect())
}

/// Huber loss and its derivative with respect to the error.
pub fn huber_loss<T: Scalar>(error: T, delta: T) -> (T, T) {
    let half = T::lit(0.5);
    if error.abs() <= delta {
        (half * error * error, error)
    } else {
        (delta * (error.abs() - half * delta), delta * error.signum())
    }
}
