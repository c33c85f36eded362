//! Layer primitives with explicit forward/backward passes.
//!
//! Convolutions are 3x3, stride 1, zero-padded ("same"); pooling halves the
//! spatial extent. Backward passes optionally skip parameter-gradient
//! accumulation when only input gradients are needed (trigger inversion).

use crate::error::{ModelError, Result};
use bdf_core::Real;
use ndarray::{Array2, Array4, ArrayD, Axis, IxDyn};
use rand::Rng;

/// A trainable tensor with its gradient and Adam moment buffers.
#[derive(Debug, Clone)]
pub struct Param<F: Real> {
    pub value: ArrayD<F>,
    pub grad: ArrayD<F>,
    pub m: ArrayD<F>,
    pub v: ArrayD<F>,
}

impl<F: Real> Param<F> {
    pub fn new(value: ArrayD<F>) -> Self {
        let zeros = ArrayD::zeros(IxDyn(value.shape()));
        Self {
            grad: zeros.clone(),
            m: zeros.clone(),
            v: zeros,
            value,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(F::zero());
    }
}

/// Kaiming-style uniform initialization for a fan-in of `fan_in`.
fn init_uniform<F: Real, R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> ArrayD<F> {
    let bound = (1.0 / fan_in as f64).sqrt();
    let mut arr = ArrayD::zeros(IxDyn(shape));
    for v in arr.iter_mut() {
        *v = F::from_f64((F::uniform01(rng).to_f64() * 2.0 - 1.0) * bound);
    }
    arr
}

// ---------------------------------------------------------------------------
// Conv2d (3x3, stride 1, same padding)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Conv2d<F: Real> {
    pub in_c: usize,
    pub out_c: usize,
    /// `(C*9, OC)` weight matrix used directly by the im2col matmul.
    pub weight: Param<F>,
    pub bias: Param<F>,
}

pub struct ConvCache<F: Real> {
    cols: Array2<F>,
    in_dim: (usize, usize, usize, usize),
}

impl<F: Real> Conv2d<F> {
    pub fn new<R: Rng>(in_c: usize, out_c: usize, rng: &mut R) -> Self {
        let fan_in = in_c * 9;
        Self {
            in_c,
            out_c,
            weight: Param::new(init_uniform(&[fan_in, out_c], fan_in, rng)),
            bias: Param::new(ArrayD::zeros(IxDyn(&[out_c]))),
        }
    }

    /// im2col: `(N, C, H, W)` -> `(N*H*W, C*9)` with zero padding.
    ///
    /// Hot path: raw-slice indexing, bounds hoisted out of the inner loop.
    fn im2col(&self, x: &Array4<F>) -> Array2<F> {
        let (n, c, h, w) = x.dim();
        let c9 = c * 9;
        let mut cols = Array2::zeros((n * h * w, c9));
        let xs = x.as_slice().expect("standard layout");
        let cs = cols.as_slice_mut().expect("standard layout");
        for b in 0..n {
            for k in 0..c {
                let plane = (b * c + k) * h * w;
                for p in 0..3usize {
                    let di = p as i64 - 1;
                    for q in 0..3usize {
                        let dj = q as i64 - 1;
                        let col_off = k * 9 + p * 3 + q;
                        let i_lo = (-di).max(0) as usize;
                        let i_hi = ((h as i64 - di).min(h as i64)) as usize;
                        let j_lo = (-dj).max(0) as usize;
                        let j_hi = ((w as i64 - dj).min(w as i64)) as usize;
                        for i in i_lo..i_hi {
                            let src_row = plane + ((i as i64 + di) as usize) * w;
                            let dst_row = ((b * h + i) * w) * c9 + col_off;
                            for j in j_lo..j_hi {
                                let src = src_row + (j as i64 + dj) as usize;
                                let dst = dst_row + j * c9;
                                // SAFETY: indices are within the hoisted
                                // bounds computed above.
                                unsafe {
                                    *cs.get_unchecked_mut(dst) = *xs.get_unchecked(src);
                                }
                            }
                        }
                    }
                }
            }
        }
        cols
    }

    fn col2im(&self, dcols: &Array2<F>, dim: (usize, usize, usize, usize)) -> Array4<F> {
        let (n, c, h, w) = dim;
        let c9 = c * 9;
        let mut dx = Array4::zeros(dim);
        let ds = dcols.as_slice().expect("standard layout");
        let xs = dx.as_slice_mut().expect("standard layout");
        for b in 0..n {
            for k in 0..c {
                let plane = (b * c + k) * h * w;
                for p in 0..3usize {
                    let di = p as i64 - 1;
                    for q in 0..3usize {
                        let dj = q as i64 - 1;
                        let col_off = k * 9 + p * 3 + q;
                        let i_lo = (-di).max(0) as usize;
                        let i_hi = ((h as i64 - di).min(h as i64)) as usize;
                        let j_lo = (-dj).max(0) as usize;
                        let j_hi = ((w as i64 - dj).min(w as i64)) as usize;
                        for i in i_lo..i_hi {
                            let dst_row = plane + ((i as i64 + di) as usize) * w;
                            let src_row = ((b * h + i) * w) * c9 + col_off;
                            for j in j_lo..j_hi {
                                let dst = dst_row + (j as i64 + dj) as usize;
                                let src = src_row + j * c9;
                                // SAFETY: same bounds as im2col.
                                unsafe {
                                    *xs.get_unchecked_mut(dst) =
                                        *xs.get_unchecked(dst) + *ds.get_unchecked(src);
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    pub fn forward(&self, x: &Array4<F>) -> (Array4<F>, ConvCache<F>) {
        let (n, _c, h, w) = x.dim();
        let cols = self.im2col(x);
        let w2: &Array2<F> = &self
            .weight
            .value
            .view()
            .into_dimensionality()
            .expect("conv weight is 2-d")
            .to_owned();
        let flat = cols.dot(w2); // (N*H*W, OC)
        let mut out = Array4::zeros((n, self.out_c, h, w));
        {
            let hw = h * w;
            let oc_n = self.out_c;
            let fs = flat.as_slice().expect("standard layout");
            let os = out.as_slice_mut().expect("standard layout");
            for b in 0..n {
                for oc in 0..oc_n {
                    let bias = self.bias.value[oc];
                    let dst0 = (b * oc_n + oc) * hw;
                    let src0 = b * hw * oc_n + oc;
                    for pix in 0..hw {
                        // SAFETY: dst0+pix < n*oc_n*hw, src0+pix*oc_n within flat.
                        unsafe {
                            *os.get_unchecked_mut(dst0 + pix) =
                                *fs.get_unchecked(src0 + pix * oc_n) + bias;
                        }
                    }
                }
            }
        }
        (
            out,
            ConvCache {
                cols,
                in_dim: x.dim(),
            },
        )
    }

    fn dout_to_flat(dout: &Array4<F>) -> Array2<F> {
        let (n, oc, h, w) = dout.dim();
        let hw = h * w;
        let mut dflat = Array2::zeros((n * h * w, oc));
        let src = dout.as_slice().expect("standard layout");
        let dst = dflat.as_slice_mut().expect("standard layout");
        for b in 0..n {
            for o in 0..oc {
                let src0 = (b * oc + o) * hw;
                let dst0 = b * hw * oc + o;
                for pix in 0..hw {
                    // SAFETY: mirrored index arithmetic to the forward pass.
                    unsafe {
                        *dst.get_unchecked_mut(dst0 + pix * oc) = *src.get_unchecked(src0 + pix);
                    }
                }
            }
        }
        dflat
    }

    /// Input gradient only; parameters stay frozen.
    pub fn backward_input(&self, cache: &ConvCache<F>, dout: &Array4<F>) -> Array4<F> {
        let dflat = Self::dout_to_flat(dout);
        let w2 = self
            .weight
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("conv weight is 2-d")
            .to_owned();
        let dcols = dflat.dot(&w2.t());
        self.col2im(&dcols, cache.in_dim)
    }

    /// Input gradient plus parameter-gradient accumulation.
    pub fn backward_train(&mut self, cache: &ConvCache<F>, dout: &Array4<F>) -> Array4<F> {
        let dflat = Self::dout_to_flat(dout);
        let dw = cache.cols.t().dot(&dflat); // (C*9, OC)
        let mut gw = self
            .weight
            .grad
            .view_mut()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("conv weight grad is 2-d");
        gw += &dw;
        let db = dflat.sum_axis(Axis(0));
        for o in 0..self.out_c {
            self.bias.grad[o] = self.bias.grad[o] + db[o];
        }
        self.backward_input(cache, dout)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct Dense<F: Real> {
    pub weight: Param<F>, // (in, out)
    pub bias: Param<F>,
}

pub struct DenseCache<F: Real> {
    input: Array2<F>,
}

impl<F: Real> Dense<F> {
    pub fn new<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        Self {
            weight: Param::new(init_uniform(&[input, output], input, rng)),
            bias: Param::new(ArrayD::zeros(IxDyn(&[output]))),
        }
    }

    pub fn forward(&self, x: &Array2<F>) -> (Array2<F>, DenseCache<F>) {
        let w = self
            .weight
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("dense weight is 2-d");
        let mut out = x.dot(&w);
        for mut row in out.rows_mut() {
            for (o, v) in row.iter_mut().enumerate() {
                *v = *v + self.bias.value[o];
            }
        }
        (out, DenseCache { input: x.clone() })
    }

    /// Input gradient only; parameters stay frozen.
    pub fn backward_input(&self, _cache: &DenseCache<F>, dout: &Array2<F>) -> Array2<F> {
        let w = self
            .weight
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("dense weight is 2-d");
        dout.dot(&w.t())
    }

    /// Input gradient plus parameter-gradient accumulation.
    pub fn backward_train(&mut self, cache: &DenseCache<F>, dout: &Array2<F>) -> Array2<F> {
        let dw = cache.input.t().dot(dout);
        let mut gw = self
            .weight
            .grad
            .view_mut()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("dense weight grad is 2-d");
        gw += &dw;
        let db = dout.sum_axis(Axis(0));
        for (o, v) in db.iter().enumerate() {
            self.bias.grad[o] = self.bias.grad[o] + *v;
        }
        self.backward_input(cache, dout)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<F>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities
// ---------------------------------------------------------------------------

pub fn relu<F: Real, D: ndarray::Dimension>(
    x: &ndarray::Array<F, D>,
) -> (ndarray::Array<F, D>, ndarray::Array<F, D>) {
    let y = x.mapv(|v| if v > F::zero() { v } else { F::zero() });
    let mask = x.mapv(|v| if v > F::zero() { F::one() } else { F::zero() });
    (y, mask)
}

pub fn relu_backward<F: Real, D: ndarray::Dimension>(
    mask: &ndarray::Array<F, D>,
    dy: &ndarray::Array<F, D>,
) -> ndarray::Array<F, D> {
    dy * mask
}

pub fn sigmoid<F: Real, D: ndarray::Dimension>(x: &ndarray::Array<F, D>) -> ndarray::Array<F, D> {
    x.mapv(|v| F::one() / (F::one() + (-v).exp()))
}

pub fn sigmoid_backward<F: Real, D: ndarray::Dimension>(
    y: &ndarray::Array<F, D>,
    dy: &ndarray::Array<F, D>,
) -> ndarray::Array<F, D> {
    let mut out = dy.clone();
    ndarray::Zip::from(&mut out).and(y).for_each(|d, &yv| {
        *d = *d * yv * (F::one() - yv);
    });
    out
}

// ---------------------------------------------------------------------------
// 2x2 max pooling and nearest-neighbor upsampling
// ---------------------------------------------------------------------------

pub struct PoolCache {
    argmax: Vec<u8>,
    in_dim: (usize, usize, usize, usize),
}

pub fn maxpool2<F: Real>(x: &Array4<F>) -> (Array4<F>, PoolCache) {
    let (n, c, h, w) = x.dim();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Array4::zeros((n, c, oh, ow));
    let mut argmax = vec![0u8; n * c * oh * ow];
    let mut idx = 0usize;
    for b in 0..n {
        for k in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    let mut best = x[[b, k, 2 * i, 2 * j]];
                    let mut arg = 0u8;
                    for (code, (di, dj)) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
                        let v = x[[b, k, 2 * i + di, 2 * j + dj]];
                        if v > best {
                            best = v;
                            arg = code as u8;
                        }
                    }
                    out[[b, k, i, j]] = best;
                    argmax[idx] = arg;
                    idx += 1;
                }
            }
        }
    }
    (
        out,
        PoolCache {
            argmax,
            in_dim: (n, c, h, w),
        },
    )
}

pub fn maxpool2_backward<F: Real>(cache: &PoolCache, dy: &Array4<F>) -> Array4<F> {
    let (n, c, oh, ow) = dy.dim();
    let mut dx = Array4::zeros(cache.in_dim);
    let mut idx = 0usize;
    for b in 0..n {
        for k in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    let code = cache.argmax[idx] as usize;
                    let (di, dj) = [(0usize, 0usize), (0, 1), (1, 0), (1, 1)][code];
                    dx[[b, k, 2 * i + di, 2 * j + dj]] = dy[[b, k, i, j]];
                    idx += 1;
                }
            }
        }
    }
    dx
}

pub fn upsample2<F: Real>(x: &Array4<F>) -> Array4<F> {
    let (n, c, h, w) = x.dim();
    let mut out = Array4::zeros((n, c, 2 * h, 2 * w));
    for b in 0..n {
        for k in 0..c {
            for i in 0..h {
                for j in 0..w {
                    let v = x[[b, k, i, j]];
                    out[[b, k, 2 * i, 2 * j]] = v;
                    out[[b, k, 2 * i + 1, 2 * j]] = v;
                    out[[b, k, 2 * i, 2 * j + 1]] = v;
                    out[[b, k, 2 * i + 1, 2 * j + 1]] = v;
                }
            }
        }
    }
    out
}

pub fn upsample2_backward<F: Real>(dy: &Array4<F>) -> Array4<F> {
    let (n, c, h2, w2) = dy.dim();
    let (h, w) = (h2 / 2, w2 / 2);
    let mut dx = Array4::zeros((n, c, h, w));
    for b in 0..n {
        for k in 0..c {
            for i in 0..h {
                for j in 0..w {
                    dx[[b, k, i, j]] = dy[[b, k, 2 * i, 2 * j]]
                        + dy[[b, k, 2 * i + 1, 2 * j]]
                        + dy[[b, k, 2 * i, 2 * j + 1]]
                        + dy[[b, k, 2 * i + 1, 2 * j + 1]];
                }
            }
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy
// ---------------------------------------------------------------------------

/// Row-wise softmax of logits.
pub fn softmax<F: Real>(logits: &Array2<F>) -> Array2<F> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

/// Mean cross-entropy over the batch plus the gradient w.r.t. logits.
pub fn softmax_ce<F: Real>(logits: &Array2<F>, labels: &[usize]) -> Result<(F, Array2<F>)> {
    let (n, k) = logits.dim();
    if labels.len() != n {
        return Err(ModelError::Dimension {
            op: "softmax_ce",
            detail: format!("{n} logit rows vs {} labels", labels.len()),
        });
    }
    let probs = softmax(logits);
    let nf = F::from_f64(n as f64);
    let floor = F::from_f64(1e-12);
    let mut loss = F::zero();
    let mut dlogits = probs.clone();
    for (row, &label) in labels.iter().enumerate() {
        debug_assert!(label < k);
        loss = loss - probs[[row, label]].max(floor).ln();
        dlogits[[row, label]] = dlogits[[row, label]] - F::one();
    }
    dlogits.mapv_inplace(|v| v / nf);
    Ok((loss / nf, dlogits))
}
