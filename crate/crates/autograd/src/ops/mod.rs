//! Differentiable operations on [`Var`].
//!
//! Shape mismatches inside an op are programming errors and panic; callers
//! validate user-facing inputs before building a graph.

mod conv;
mod linalg;
mod loss;
mod norm;
mod resample;

pub use conv::{conv_output_len, Conv2dGeometry, Padding};
pub use linalg::gemm;
pub use loss::huber_value;
pub use norm::{NormAxes, NormStats};
pub use resample::{resize_taps, BoxRegion, Overlap, ResizeTap};

use crate::tape::Var;
use crate::tensor::Tensor;

#[allow(clippy::should_implement_trait)]
impl<'t> Var<'t> {
    fn unary(
        self,
        forward: impl Fn(f64) -> f64,
        derivative: impl Fn(f64, f64) -> f64 + 'static,
    ) -> Var<'t> {
        let x = self.value();
        let y = x.map(forward);
        let saved_y = y.clone();
        self.tape.push_op(y, &[self], move |g| {
            let data = g
                .data()
                .iter()
                .zip(x.data())
                .zip(saved_y.data())
                .map(|((&g, &x), &y)| g * derivative(x, y))
                .collect();
            vec![Some(Tensor::new(g.shape(), data))]
        })
    }

    pub fn add(self, other: Var<'t>) -> Var<'t> {
        assert_same_shape(&self, &other, "add");
        let y = self.value().add(&other.value());
        self.tape
            .push_op(y, &[self, other], |g| vec![Some(g.clone()), Some(g.clone())])
    }

    pub fn sub(self, other: Var<'t>) -> Var<'t> {
        assert_same_shape(&self, &other, "sub");
        let y = self.value().sub(&other.value());
        self.tape
            .push_op(y, &[self, other], |g| vec![Some(g.clone()), Some(g.scale(-1.0))])
    }

    pub fn mul(self, other: Var<'t>) -> Var<'t> {
        assert_same_shape(&self, &other, "mul");
        let a = self.value();
        let b = other.value();
        let y = a.zip_map(&b, |x, y| x * y);
        self.tape.push_op(y, &[self, other], move |g| {
            vec![
                Some(g.zip_map(&b, |g, b| g * b)),
                Some(g.zip_map(&a, |g, a| g * a)),
            ]
        })
    }

    pub fn scale(self, k: f64) -> Var<'t> {
        let y = self.value().scale(k);
        self.tape.push_op(y, &[self], move |g| vec![Some(g.scale(k))])
    }

    pub fn add_scalar(self, k: f64) -> Var<'t> {
        let y = self.value().map(|v| v + k);
        self.tape.push_op(y, &[self], |g| vec![Some(g.clone())])
    }

    pub fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }

    pub fn relu(self) -> Var<'t> {
        self.unary(|x| x.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn leaky_relu(self, slope: f64) -> Var<'t> {
        self.unary(
            move |x| if x > 0.0 { x } else { slope * x },
            move |x, _| if x > 0.0 { 1.0 } else { slope },
        )
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(sigmoid, |_, y| y * (1.0 - y))
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn abs(self) -> Var<'t> {
        self.unary(f64::abs, |x, _| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    pub fn square(self) -> Var<'t> {
        self.unary(|x| x * x, |x, _| 2.0 * x)
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(f64::exp, |_, y| y)
    }

    /// Elementwise product with a constant tensor (dropout masks and the like).
    pub fn mul_const(self, mask: &Tensor) -> Var<'t> {
        assert_eq!(self.shape(), mask.shape(), "mul_const shape");
        let y = self.value().zip_map(mask, |a, b| a * b);
        let mask = mask.clone();
        self.tape
            .push_op(y, &[self], move |g| vec![Some(g.zip_map(&mask, |g, m| g * m))])
    }

    pub fn sum(self) -> Var<'t> {
        let x = self.value();
        let shape = x.shape().to_vec();
        self.tape.push_op(Tensor::scalar(x.sum()), &[self], move |g| {
            vec![Some(Tensor::full(&shape, g.item()))]
        })
    }

    pub fn mean(self) -> Var<'t> {
        let n = self.value().numel() as f64;
        self.sum().scale(1.0 / n)
    }

    pub fn reshape(self, shape: &[usize]) -> Var<'t> {
        let x = self.value();
        let from = x.shape().to_vec();
        let y = x.reshape(shape).expect("reshape: element count differs");
        self.tape.push_op(y, &[self], move |g| {
            vec![Some(g.reshape(&from).expect("reshape grad"))]
        })
    }

    /// Concatenates rank-4 tensors along the channel axis.
    pub fn concat_channels(parts: &[Var<'t>]) -> Var<'t> {
        let tape = parts.first().expect("concat of nothing").tape;
        let values: Vec<Tensor> = parts.iter().map(|p| p.value()).collect();
        let (n, _, h, w) = values[0].dims4();
        let channels: Vec<usize> = values
            .iter()
            .map(|v| {
                let (vn, c, vh, vw) = v.dims4();
                assert_eq!((vn, vh, vw), (n, h, w), "concat_channels shape");
                c
            })
            .collect();
        let total: usize = channels.iter().sum();
        let plane = h * w;
        let mut out = vec![0.0; n * total * plane];
        for b in 0..n {
            let mut c0 = 0;
            for (v, &c) in values.iter().zip(&channels) {
                let src = &v.data()[b * c * plane..(b + 1) * c * plane];
                let dst = (b * total + c0) * plane;
                out[dst..dst + c * plane].copy_from_slice(src);
                c0 += c;
            }
        }
        let y = Tensor::new(&[n, total, h, w], out);
        tape.push_op(y, parts, move |g| {
            let mut grads = Vec::with_capacity(channels.len());
            let mut c0 = 0;
            for &c in &channels {
                let mut part = Vec::with_capacity(n * c * plane);
                for b in 0..n {
                    let start = (b * total + c0) * plane;
                    part.extend_from_slice(&g.data()[start..start + c * plane]);
                }
                grads.push(Some(Tensor::new(&[n, c, h, w], part)));
                c0 += c;
            }
            grads
        })
    }

    /// Adds per-channel `scale` and `shift` to a `[N, C, ...]` tensor:
    /// `y = x * scale[c] + shift[c]`.
    pub fn channel_affine(self, scale: Var<'t>, shift: Var<'t>) -> Var<'t> {
        let x = self.value();
        let s = scale.value();
        let b = shift.value();
        let (n, c) = (x.shape()[0], x.shape()[1]);
        assert_eq!(s.shape(), [c], "channel_affine scale shape");
        assert_eq!(b.shape(), [c], "channel_affine shift shape");
        let inner = x.numel() / (n * c);
        let mut out = x.data().to_vec();
        for (i, v) in out.iter_mut().enumerate() {
            let ch = (i / inner) % c;
            *v = *v * s.data()[ch] + b.data()[ch];
        }
        let y = Tensor::new(x.shape(), out);
        self.tape.push_op(y, &[self, scale, shift], move |g| {
            let mut dx = g.data().to_vec();
            let mut ds = vec![0.0; c];
            let mut db = vec![0.0; c];
            for (i, d) in dx.iter_mut().enumerate() {
                let ch = (i / inner) % c;
                ds[ch] += *d * x.data()[i];
                db[ch] += *d;
                *d *= s.data()[ch];
            }
            vec![
                Some(Tensor::new(x.shape(), dx)),
                Some(Tensor::new(&[c], ds)),
                Some(Tensor::new(&[c], db)),
            ]
        })
    }

    /// `[N, C, H, W]` -> `[N, C]` spatial mean.
    pub fn global_avg_pool(self) -> Var<'t> {
        let x = self.value();
        let (n, c, h, w) = x.dims4();
        let plane = h * w;
        let out: Vec<f64> = x
            .data()
            .chunks_exact(plane)
            .map(|p| p.iter().sum::<f64>() / plane as f64)
            .collect();
        self.tape
            .push_op(Tensor::new(&[n, c], out), &[self], move |g| {
                let mut dx = Vec::with_capacity(n * c * plane);
                for &v in g.data() {
                    dx.extend(std::iter::repeat_n(v / plane as f64, plane));
                }
                vec![Some(Tensor::new(&[n, c, h, w], dx))]
            })
    }

    /// Nearest-neighbour upsampling of `[N, C, H, W]` by an integer factor.
    pub fn upsample_nearest(self, factor: usize) -> Var<'t> {
        let x = self.value();
        let (n, c, h, w) = x.dims4();
        let (oh, ow) = (h * factor, w * factor);
        let mut out = vec![0.0; n * c * oh * ow];
        for (plane_in, plane_out) in x.data().chunks_exact(h * w).zip(out.chunks_exact_mut(oh * ow)) {
            for oy in 0..oh {
                let row = &plane_in[(oy / factor) * w..(oy / factor + 1) * w];
                for ox in 0..ow {
                    plane_out[oy * ow + ox] = row[ox / factor];
                }
            }
        }
        self.tape
            .push_op(Tensor::new(&[n, c, oh, ow], out), &[self], move |g| {
                let mut dx = vec![0.0; n * c * h * w];
                for (plane_g, plane_dx) in g.data().chunks_exact(oh * ow).zip(dx.chunks_exact_mut(h * w)) {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            plane_dx[(oy / factor) * w + ox / factor] += plane_g[oy * ow + ox];
                        }
                    }
                }
                vec![Some(Tensor::new(&[n, c, h, w], dx))]
            })
    }

    /// `emb[N, D] x map[N, 1, H, W] -> [N, D, H, W]`, each item's embedding
    /// scaled by its own spatial map.
    pub fn outer_spatial(self, map: Var<'t>) -> Var<'t> {
        let e = self.value();
        let m = map.value();
        let (n, d) = match e.shape() {
            &[n, d] => (n, d),
            s => panic!("outer_spatial embedding shape {s:?}"),
        };
        let (mn, mc, h, w) = m.dims4();
        assert_eq!((mn, mc), (n, 1), "outer_spatial map shape");
        let plane = h * w;
        let mut out = vec![0.0; n * d * plane];
        for b in 0..n {
            let mp = &m.data()[b * plane..(b + 1) * plane];
            for k in 0..d {
                let ev = e.data()[b * d + k];
                let dst = &mut out[(b * d + k) * plane..(b * d + k + 1) * plane];
                for (o, &mv) in dst.iter_mut().zip(mp) {
                    *o = ev * mv;
                }
            }
        }
        self.tape
            .push_op(Tensor::new(&[n, d, h, w], out), &[self, map], move |g| {
                let mut de = vec![0.0; n * d];
                let mut dm = vec![0.0; n * plane];
                for b in 0..n {
                    let mp = &m.data()[b * plane..(b + 1) * plane];
                    for k in 0..d {
                        let ev = e.data()[b * d + k];
                        let gp = &g.data()[(b * d + k) * plane..(b * d + k + 1) * plane];
                        let mut acc = 0.0;
                        for ((&gv, &mv), dmv) in gp.iter().zip(mp).zip(&mut dm[b * plane..(b + 1) * plane]) {
                            acc += gv * mv;
                            *dmv += gv * ev;
                        }
                        de[b * d + k] = acc;
                    }
                }
                vec![
                    Some(Tensor::new(&[n, d], de)),
                    Some(Tensor::new(&[n, 1, h, w], dm)),
                ]
            })
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn assert_same_shape(a: &Var<'_>, b: &Var<'_>, op: &str) {
    let (sa, sb) = (a.shape(), b.shape());
    assert_eq!(sa, sb, "{op}: shape mismatch");
}
