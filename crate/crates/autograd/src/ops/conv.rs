use super::linalg::{gemm_into, MatRef};
use crate::tape::Var;
use crate::tensor::Tensor;

/// Cap on the number of elements in one im2col buffer.
const COL_BUDGET: usize = 1 << 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Padding {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Padding {
    pub fn same(p: usize) -> Self {
        Self {
            top: p,
            bottom: p,
            left: p,
            right: p,
        }
    }
}

/// Kernel, stride and padding of a 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dGeometry {
    pub kernel: usize,
    pub stride: usize,
    pub padding: Padding,
}

impl Conv2dGeometry {
    pub fn new(kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            kernel,
            stride,
            padding: Padding::same(padding),
        }
    }

    pub fn with_padding(kernel: usize, stride: usize, padding: Padding) -> Self {
        Self {
            kernel,
            stride,
            padding,
        }
    }

    /// Output size of the forward convolution over an `h x w` input.
    pub fn output_size(&self, h: usize, w: usize) -> (usize, usize) {
        let p = self.padding;
        (
            conv_output_len(h, self.kernel, self.stride, p.top, p.bottom),
            conv_output_len(w, self.kernel, self.stride, p.left, p.right),
        )
    }

    /// Output size of the transposed convolution over an `h x w` input.
    pub fn transposed_output_size(&self, h: usize, w: usize) -> (usize, usize) {
        let p = self.padding;
        (
            ((h - 1) * self.stride + self.kernel)
                .checked_sub(p.top + p.bottom)
                .expect("transposed conv padding too large"),
            ((w - 1) * self.stride + self.kernel)
                .checked_sub(p.left + p.right)
                .expect("transposed conv padding too large"),
        )
    }
}

pub fn conv_output_len(len: usize, kernel: usize, stride: usize, pad0: usize, pad1: usize) -> usize {
    let padded = len + pad0 + pad1;
    assert!(
        padded >= kernel,
        "kernel {kernel} larger than padded input {padded}"
    );
    (padded - kernel) / stride + 1
}

/// Sliding-window layout shared by im2col and col2im: an `image` of
/// `channels x h x w` scanned into a `grid_h x grid_w` grid of windows.
#[derive(Clone, Copy)]
struct Windows {
    channels: usize,
    h: usize,
    w: usize,
    grid_h: usize,
    grid_w: usize,
    geom: Conv2dGeometry,
}

impl Windows {
    fn rows(&self) -> usize {
        self.channels * self.geom.kernel * self.geom.kernel
    }

    fn grid_len(&self) -> usize {
        self.grid_h * self.grid_w
    }

    fn chunk_len(&self) -> usize {
        (COL_BUDGET / self.rows().max(1)).clamp(1, self.grid_len().max(1))
    }

    /// Visits every in-bounds `(row, column-in-chunk, image-offset)` triple
    /// for grid positions `start..start + len`.
    fn for_each(&self, start: usize, len: usize, mut f: impl FnMut(usize, usize, usize)) {
        let k = self.geom.kernel;
        let s = self.geom.stride as isize;
        let pt = self.geom.padding.top as isize;
        let pl = self.geom.padding.left as isize;
        for r in 0..self.rows() {
            let c = r / (k * k);
            let ki = ((r / k) % k) as isize;
            let kj = (r % k) as isize;
            let plane = c * self.h * self.w;
            let mut oy = start / self.grid_w;
            let mut ox = start % self.grid_w;
            for col in 0..len {
                let iy = oy as isize * s + ki - pt;
                let ix = ox as isize * s + kj - pl;
                if iy >= 0 && ix >= 0 && (iy as usize) < self.h && (ix as usize) < self.w {
                    f(r, col, plane + iy as usize * self.w + ix as usize);
                }
                ox += 1;
                if ox == self.grid_w {
                    ox = 0;
                    oy += 1;
                }
            }
        }
    }

    fn im2col(&self, image: &[f64], start: usize, len: usize, col: &mut [f64]) {
        col[..self.rows() * len].fill(0.0);
        self.for_each(start, len, |r, c, off| col[r * len + c] = image[off]);
    }

    fn col2im(&self, col: &[f64], start: usize, len: usize, image: &mut [f64]) {
        self.for_each(start, len, |r, c, off| image[off] += col[r * len + c]);
    }
}

impl<'t> Var<'t> {
    /// 2-D convolution. `self: [N, C, H, W]`, `weight: [O, C, k, k]`,
    /// `bias: [O]`.
    pub fn conv2d(self, weight: Var<'t>, bias: Option<Var<'t>>, geom: Conv2dGeometry) -> Var<'t> {
        let x = self.value();
        let w = weight.value();
        let (n, c, h, wd) = x.dims4();
        let (o, wc, kh, kw) = w.dims4();
        assert_eq!(wc, c, "conv2d: weight expects {wc} input channels, got {c}");
        assert!(kh == geom.kernel && kw == geom.kernel, "conv2d kernel mismatch");
        let (oh, ow) = geom.output_size(h, wd);
        let win = Windows {
            channels: c,
            h,
            w: wd,
            grid_h: oh,
            grid_w: ow,
            geom,
        };
        let rows = win.rows();
        let grid = win.grid_len();
        let chunk = win.chunk_len();
        let mut out = vec![0.0; n * o * grid];
        let mut col = vec![0.0; rows * chunk];
        for b in 0..n {
            let image = &x.data()[b * c * h * wd..(b + 1) * c * h * wd];
            let out_b = &mut out[b * o * grid..(b + 1) * o * grid];
            let mut start = 0;
            while start < grid {
                let len = chunk.min(grid - start);
                win.im2col(image, start, len, &mut col);
                gemm_into(
                    1.0,
                    MatRef::new(w.data(), o, rows),
                    MatRef::new(&col[..rows * len], rows, len),
                    0.0,
                    &mut out_b[start..],
                    grid,
                );
                start += len;
            }
        }
        let mut parents = vec![self, weight];
        if let Some(bv) = bias {
            add_channel_bias(&mut out, &bv.value(), o, grid);
            parents.push(bv);
        }
        let need_dx = self.is_tracked();
        let need_dw = weight.is_tracked();
        let has_bias = bias.is_some();
        self.tape
            .push_op(Tensor::new(&[n, o, oh, ow], out), &parents, move |g| {
                let mut dx = need_dx.then(|| vec![0.0; n * c * h * wd]);
                let mut dw = need_dw.then(|| vec![0.0; o * rows]);
                let mut col = vec![0.0; rows * chunk];
                let mut dcol = vec![0.0; rows * chunk];
                for b in 0..n {
                    let image = &x.data()[b * c * h * wd..(b + 1) * c * h * wd];
                    let g_b = &g.data()[b * o * grid..(b + 1) * o * grid];
                    let mut start = 0;
                    while start < grid {
                        let len = chunk.min(grid - start);
                        let g_chunk = MatRef::with_stride(&g_b[start..], o, len, grid);
                        if let Some(dw) = dw.as_mut() {
                            win.im2col(image, start, len, &mut col);
                            gemm_into(
                                1.0,
                                g_chunk,
                                MatRef::new(&col[..rows * len], rows, len).t(),
                                1.0,
                                dw,
                                rows,
                            );
                        }
                        if let Some(dx) = dx.as_mut() {
                            gemm_into(
                                1.0,
                                MatRef::new(w.data(), o, rows).t(),
                                g_chunk,
                                0.0,
                                &mut dcol,
                                len,
                            );
                            win.col2im(
                                &dcol[..rows * len],
                                start,
                                len,
                                &mut dx[b * c * h * wd..(b + 1) * c * h * wd],
                            );
                        }
                        start += len;
                    }
                }
                let mut grads = vec![
                    dx.map(|d| Tensor::new(&[n, c, h, wd], d)),
                    dw.map(|d| Tensor::new(&[o, c, kh, kw], d)),
                ];
                if has_bias {
                    grads.push(Some(channel_bias_grad(g.data(), o, grid)));
                }
                grads
            })
    }

    /// Transposed 2-D convolution. `self: [N, Cin, H, W]`,
    /// `weight: [Cin, Cout, k, k]`, `bias: [Cout]`.
    pub fn conv_transpose2d(
        self,
        weight: Var<'t>,
        bias: Option<Var<'t>>,
        geom: Conv2dGeometry,
    ) -> Var<'t> {
        let x = self.value();
        let w = weight.value();
        let (n, cin, h, wd) = x.dims4();
        let (wcin, cout, kh, kw) = w.dims4();
        assert_eq!(wcin, cin, "conv_transpose2d: weight expects {wcin} input channels, got {cin}");
        assert!(kh == geom.kernel && kw == geom.kernel, "conv_transpose2d kernel mismatch");
        let (oh, ow) = geom.transposed_output_size(h, wd);
        let win = Windows {
            channels: cout,
            h: oh,
            w: ow,
            grid_h: h,
            grid_w: wd,
            geom,
        };
        let rows = win.rows();
        let grid = win.grid_len();
        let chunk = win.chunk_len();
        let out_plane = cout * oh * ow;
        let mut out = vec![0.0; n * out_plane];
        let mut col = vec![0.0; rows * chunk];
        for b in 0..n {
            let x_b = &x.data()[b * cin * grid..(b + 1) * cin * grid];
            let mut start = 0;
            while start < grid {
                let len = chunk.min(grid - start);
                gemm_into(
                    1.0,
                    MatRef::new(w.data(), cin, rows).t(),
                    MatRef::with_stride(&x_b[start..], cin, len, grid),
                    0.0,
                    &mut col,
                    len,
                );
                win.col2im(
                    &col[..rows * len],
                    start,
                    len,
                    &mut out[b * out_plane..(b + 1) * out_plane],
                );
                start += len;
            }
        }
        let mut parents = vec![self, weight];
        if let Some(bv) = bias {
            add_channel_bias(&mut out, &bv.value(), cout, oh * ow);
            parents.push(bv);
        }
        let need_dx = self.is_tracked();
        let need_dw = weight.is_tracked();
        let has_bias = bias.is_some();
        self.tape
            .push_op(Tensor::new(&[n, cout, oh, ow], out), &parents, move |g| {
                let mut dx = need_dx.then(|| vec![0.0; n * cin * grid]);
                let mut dw = need_dw.then(|| vec![0.0; cin * rows]);
                let mut dcol = vec![0.0; rows * chunk];
                for b in 0..n {
                    let g_b = &g.data()[b * out_plane..(b + 1) * out_plane];
                    let x_b = &x.data()[b * cin * grid..(b + 1) * cin * grid];
                    let mut start = 0;
                    while start < grid {
                        let len = chunk.min(grid - start);
                        win.im2col(g_b, start, len, &mut dcol);
                        let dcol_m = MatRef::new(&dcol[..rows * len], rows, len);
                        if let Some(dx) = dx.as_mut() {
                            gemm_into(
                                1.0,
                                MatRef::new(w.data(), cin, rows),
                                dcol_m,
                                0.0,
                                &mut dx[b * cin * grid + start..],
                                grid,
                            );
                        }
                        if let Some(dw) = dw.as_mut() {
                            gemm_into(
                                1.0,
                                MatRef::with_stride(&x_b[start..], cin, len, grid),
                                dcol_m.t(),
                                1.0,
                                dw,
                                rows,
                            );
                        }
                        start += len;
                    }
                }
                let mut grads = vec![
                    dx.map(|d| Tensor::new(&[n, cin, h, wd], d)),
                    dw.map(|d| Tensor::new(&[cin, cout, kh, kw], d)),
                ];
                if has_bias {
                    grads.push(Some(channel_bias_grad(g.data(), cout, oh * ow)));
                }
                grads
            })
    }
}

fn add_channel_bias(out: &mut [f64], bias: &Tensor, channels: usize, plane: usize) {
    assert_eq!(bias.shape(), [channels], "bias shape");
    for (i, p) in out.chunks_exact_mut(plane).enumerate() {
        let b = bias.data()[i % channels];
        p.iter_mut().for_each(|v| *v += b);
    }
}

fn channel_bias_grad(g: &[f64], channels: usize, plane: usize) -> Tensor {
    let mut db = vec![0.0; channels];
    for (i, p) in g.chunks_exact(plane).enumerate() {
        db[i % channels] += p.iter().sum::<f64>();
    }
    Tensor::new(&[channels], db)
}
