//! Convolution kernels for the tape: im2col-backed forward passes and the
//! matching adjoints. NCHW layout, zero padding, square kernels.

use ndarray::{Array2, Array4, ArrayD, ArrayView4};

use super::{Tape, Var};

pub fn conv2d_shape(h: usize, w: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    ((h + 2 * pad - k) / stride + 1, (w + 2 * pad - k) / stride + 1)
}

pub fn conv_transpose2d_shape(
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> (usize, usize) {
    ((h - 1) * stride + k - 2 * pad, (w - 1) * stride + k - 2 * pad)
}

fn to4(a: &ArrayD<f64>) -> ArrayView4<'_, f64> {
    a.view()
        .into_dimensionality::<ndarray::Ix4>()
        .expect("expected NCHW array")
}

/// Gather conv patches: `[ci,h,w]` image slice -> `[ci*k*k, oh*ow]`.
fn im2col(
    x: &ArrayView4<'_, f64>,
    n: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) -> Array2<f64> {
    let (_, ci, h, w) = x.dim();
    let mut cols = Array2::zeros((ci * k * k, oh * ow));
    for c in 0..ci {
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                for oi in 0..oh {
                    let ii = (oi * stride + ki) as isize - pad as isize;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    for oj in 0..ow {
                        let jj = (oj * stride + kj) as isize - pad as isize;
                        if jj < 0 || jj >= w as isize {
                            continue;
                        }
                        cols[[row, oi * ow + oj]] = x[[n, c, ii as usize, jj as usize]];
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add the adjoint of im2col back into an image.
fn col2im_add(
    cols: &Array2<f64>,
    out: &mut Array4<f64>,
    n: usize,
    k: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
) {
    let (_, ci, h, w) = out.dim();
    for c in 0..ci {
        for ki in 0..k {
            for kj in 0..k {
                let row = (c * k + ki) * k + kj;
                for oi in 0..oh {
                    let ii = (oi * stride + ki) as isize - pad as isize;
                    if ii < 0 || ii >= h as isize {
                        continue;
                    }
                    for oj in 0..ow {
                        let jj = (oj * stride + kj) as isize - pad as isize;
                        if jj < 0 || jj >= w as isize {
                            continue;
                        }
                        out[[n, c, ii as usize, jj as usize]] += cols[[row, oi * ow + oj]];
                    }
                }
            }
        }
    }
}

/// Forward convolution on raw arrays.
pub(crate) fn conv_fwd(
    x: &ArrayD<f64>,
    w: &ArrayD<f64>,
    bias: Option<&ArrayD<f64>>,
    stride: usize,
    pad: usize,
) -> ArrayD<f64> {
    let xv = to4(x);
    let wv = to4(w);
    let (nb, _, h, width) = xv.dim();
    let (co, ci_w, k, _) = wv.dim();
    debug_assert_eq!(ci_w, xv.dim().1, "conv channel mismatch");
    let (oh, ow) = conv2d_shape(h, width, k, stride, pad);
    let wmat = wv
        .to_shape((co, ci_w * k * k))
        .expect("weights contiguous")
        .to_owned();
    let mut out = Array4::zeros((nb, co, oh, ow));
    for n in 0..nb {
        let cols = im2col(&xv, n, k, stride, pad, oh, ow);
        let res = wmat.dot(&cols); // [co, oh*ow]
        for c in 0..co {
            let b = bias.map_or(0.0, |bv| bv[[c]]);
            for oi in 0..oh {
                for oj in 0..ow {
                    out[[n, c, oi, oj]] = res[[c, oi * ow + oj]] + b;
                }
            }
        }
    }
    out.into_dyn()
}

/// Gradient of `conv_fwd` w.r.t. its input.
pub(crate) fn conv_dx(
    dy: &ArrayD<f64>,
    w: &ArrayD<f64>,
    stride: usize,
    pad: usize,
    xshape: &[usize],
) -> ArrayD<f64> {
    let dyv = to4(dy);
    let wv = to4(w);
    let (nb, co, oh, ow) = dyv.dim();
    let (_, ci, k, _) = wv.dim();
    let wmat = wv
        .to_shape((co, ci * k * k))
        .expect("weights contiguous")
        .to_owned();
    let mut dx = Array4::zeros((xshape[0], xshape[1], xshape[2], xshape[3]));
    for n in 0..nb {
        let mut dy_mat = Array2::zeros((co, oh * ow));
        for c in 0..co {
            for oi in 0..oh {
                for oj in 0..ow {
                    dy_mat[[c, oi * ow + oj]] = dyv[[n, c, oi, oj]];
                }
            }
        }
        let dcols = wmat.t().dot(&dy_mat); // [ci*k*k, oh*ow]
        col2im_add(&dcols, &mut dx, n, k, stride, pad, oh, ow);
    }
    dx.into_dyn()
}

/// Gradient of `conv_fwd` w.r.t. the weights.
pub(crate) fn conv_dw(
    dy: &ArrayD<f64>,
    x: &ArrayD<f64>,
    stride: usize,
    pad: usize,
    k: usize,
) -> ArrayD<f64> {
    let dyv = to4(dy);
    let xv = to4(x);
    let (nb, co, oh, ow) = dyv.dim();
    let ci = xv.dim().1;
    let mut dw = Array2::zeros((co, ci * k * k));
    for n in 0..nb {
        let cols = im2col(&xv, n, k, stride, pad, oh, ow);
        let mut dy_mat = Array2::zeros((co, oh * ow));
        for c in 0..co {
            for oi in 0..oh {
                for oj in 0..ow {
                    dy_mat[[c, oi * ow + oj]] = dyv[[n, c, oi, oj]];
                }
            }
        }
        dw += &dy_mat.dot(&cols.t());
    }
    dw.into_shape(ndarray::IxDyn(&[co, ci, k, k]))
        .expect("contiguous")
}

fn sum_spatial_batch(dy: &ArrayD<f64>) -> ArrayD<f64> {
    let dyv = to4(dy);
    let (nb, co, oh, ow) = dyv.dim();
    let mut db = ndarray::Array1::zeros(co);
    for n in 0..nb {
        for c in 0..co {
            for oi in 0..oh {
                for oj in 0..ow {
                    db[c] += dyv[[n, c, oi, oj]];
                }
            }
        }
    }
    db.into_dyn()
}

pub(super) fn conv2d_op(tape: &Tape, x: Var, w: Var, bias: Var, stride: usize, pad: usize) -> Var {
    let vx = tape.value(x);
    let vw = tape.value(w);
    let vb = tape.value(bias);
    let out = conv_fwd(&vx, &vw, Some(&vb), stride, pad);
    let xshape = vx.shape().to_vec();
    let k = vw.shape()[2];
    tape.push_raw(
        out,
        vec![x.0, w.0, bias.0],
        Some(Box::new(move |g| {
            vec![
                (x.0, conv_dx(g, &vw, stride, pad, &xshape)),
                (w.0, conv_dw(g, &vx, stride, pad, k)),
                (bias.0, sum_spatial_batch(g)),
            ]
        })),
    )
}

/// Transposed convolution: forward pass is the input-gradient of a matching
/// convolution, so the adjoints swap roles.
pub(super) fn conv_transpose2d_op(
    tape: &Tape,
    x: Var,
    w: Var,
    bias: Var,
    stride: usize,
    pad: usize,
) -> Var {
    let vx = tape.value(x);
    let vw = tape.value(w); // [ci, co, k, k]: virtual conv maps co -> ci
    let vb = tape.value(bias);
    let (nb, _ci, h, width) = to4(&vx).dim();
    let (_, co, k, _) = to4(&vw).dim();
    let (oh, ow) = conv_transpose2d_shape(h, width, k, stride, pad);
    let mut out = conv_dx(&vx, &vw, stride, pad, &[nb, co, oh, ow]);
    {
        let mut o4 = out
            .view_mut()
            .into_dimensionality::<ndarray::Ix4>()
            .expect("NCHW");
        for n in 0..nb {
            for c in 0..co {
                for oi in 0..oh {
                    for oj in 0..ow {
                        o4[[n, c, oi, oj]] += vb[[c]];
                    }
                }
            }
        }
    }
    tape.push_raw(
        out,
        vec![x.0, w.0, bias.0],
        Some(Box::new(move |g| {
            vec![
                (x.0, conv_fwd(g, &vw, None, stride, pad)),
                (w.0, conv_dw(&vx, g, stride, pad, k)),
                (bias.0, sum_spatial_batch(g)),
            ]
        })),
    )
}

pub(super) fn global_avg_pool_op(tape: &Tape, x: Var) -> Var {
    let vx = tape.value(x);
    let xv = to4(&vx);
    let (nb, c, h, w) = xv.dim();
    let inv = 1.0 / (h * w) as f64;
    let mut out = ndarray::Array2::zeros((nb, c));
    for n in 0..nb {
        for ch in 0..c {
            let mut s = 0.0;
            for i in 0..h {
                for j in 0..w {
                    s += xv[[n, ch, i, j]];
                }
            }
            out[[n, ch]] = s * inv;
        }
    }
    let xshape = vx.shape().to_vec();
    tape.push_raw(
        out.into_dyn(),
        vec![x.0],
        Some(Box::new(move |g| {
            let g2 = g
                .view()
                .into_dimensionality::<ndarray::Ix2>()
                .expect("pool grad 2-D");
            let mut dx = Array4::zeros((xshape[0], xshape[1], xshape[2], xshape[3]));
            for n in 0..xshape[0] {
                for ch in 0..xshape[1] {
                    let v = g2[[n, ch]] * inv;
                    for i in 0..xshape[2] {
                        for j in 0..xshape[3] {
                            dx[[n, ch, i, j]] = v;
                        }
                    }
                }
            }
            vec![(x.0, dx.into_dyn())]
        })),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    /// Direct quadruple-loop convolution, the oracle for the im2col path.
    fn naive_conv(
        x: &Array4<f64>,
        w: &Array4<f64>,
        b: &ndarray::Array1<f64>,
        stride: usize,
        pad: usize,
    ) -> Array4<f64> {
        let (nb, ci, h, wid) = x.dim();
        let (co, _, k, _) = w.dim();
        let (oh, ow) = conv2d_shape(h, wid, k, stride, pad);
        let mut out = Array4::zeros((nb, co, oh, ow));
        for n in 0..nb {
            for o in 0..co {
                for oi in 0..oh {
                    for oj in 0..ow {
                        let mut acc = b[o];
                        for c in 0..ci {
                            for ki in 0..k {
                                for kj in 0..k {
                                    let ii = (oi * stride + ki) as isize - pad as isize;
                                    let jj = (oj * stride + kj) as isize - pad as isize;
                                    if ii >= 0 && jj >= 0 && (ii as usize) < h && (jj as usize) < wid
                                    {
                                        acc += x[[n, c, ii as usize, jj as usize]]
                                            * w[[o, c, ki, kj]];
                                    }
                                }
                            }
                        }
                        out[[n, o, oi, oj]] = acc;
                    }
                }
            }
        }
        out
    }

    fn rand_arr(shape: &[usize], seed: u64) -> ArrayD<f64> {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, "conv-test", &[]);
        ArrayD::from_shape_fn(IxDyn(shape), |_| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn conv_forward_matches_naive() {
        for &(stride, pad) in &[(1, 0), (1, 1), (2, 1), (3, 1)] {
            let x = rand_arr(&[2, 3, 7, 8], 1 + stride as u64);
            let w = rand_arr(&[4, 3, 3, 3], 2 + pad as u64);
            let b = rand_arr(&[4], 3);
            let got = conv_fwd(&x, &w, Some(&b), stride, pad);
            let want = naive_conv(
                &x.clone().into_dimensionality().unwrap(),
                &w.clone().into_dimensionality().unwrap(),
                &b.clone().into_dimensionality().unwrap(),
                stride,
                pad,
            );
            let diff = (&got - &want.into_dyn()).mapv(f64::abs).sum();
            assert!(diff < 1e-10, "stride={stride} pad={pad} diff={diff}");
        }
    }

    #[test]
    fn conv_transpose_shape_and_adjoint() {
        // <conv(x, w), y> == <x, convT(y, w)> makes the pair adjoint.
        let x = rand_arr(&[1, 2, 6, 6], 11);
        let w = rand_arr(&[3, 2, 4, 4], 12); // conv: 2 -> 3 channels
        let y_shape = {
            let (oh, ow) = conv2d_shape(6, 6, 4, 2, 1);
            [1usize, 3, oh, ow]
        };
        let y = rand_arr(&y_shape, 13);
        let cx = conv_fwd(&x, &w, None, 2, 1);
        let lhs: f64 = (&cx * &y).sum();
        let cty = conv_dx(&y, &w, 2, 1, &[1, 2, 6, 6]);
        let rhs: f64 = (&cty * &x).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn conv_transpose_upsamples_by_stride() {
        let t = Tape::new();
        let x = t.leaf(rand_arr(&[1, 4, 5, 5], 21));
        let w = t.leaf(rand_arr(&[4, 2, 4, 4], 22));
        let b = t.leaf(ArrayD::zeros(IxDyn(&[2])));
        let y = t.conv_transpose2d(x, w, b, 2, 1);
        assert_eq!(t.value(y).shape(), &[1, 2, 10, 10]);
    }

    #[test]
    fn global_avg_pool_means() {
        let t = Tape::new();
        let mut x = Array4::zeros((1, 2, 2, 2));
        x[[0, 0, 0, 0]] = 4.0;
        x[[0, 1, 1, 1]] = 8.0;
        let v = t.leaf(x.into_dyn());
        let p = t.global_avg_pool(v);
        let pv = t.value(p);
        assert_eq!(pv[[0, 0]], 1.0);
        assert_eq!(pv[[0, 1]], 2.0);
    }
}
