use crate::tape::Var;
use crate::tensor::Tensor;

/// Strided view of a row-major matrix, optionally transposed.
#[derive(Clone, Copy)]
pub(crate) struct MatRef<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub transposed: bool,
}

impl<'a> MatRef<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            row_stride: cols,
            transposed: false,
        }
    }

    pub fn with_stride(data: &'a [f64], rows: usize, cols: usize, row_stride: usize) -> Self {
        Self {
            data,
            rows,
            cols,
            row_stride,
            transposed: false,
        }
    }

    pub fn t(self) -> Self {
        Self {
            transposed: !self.transposed,
            ..self
        }
    }

    fn logical(&self) -> (usize, usize) {
        if self.transposed {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.row_stride as isize)
        } else {
            (self.row_stride as isize, 1)
        }
    }

    fn span_ok(&self) -> bool {
        self.rows == 0
            || self.cols == 0
            || (self.rows - 1) * self.row_stride + self.cols <= self.data.len()
    }
}

/// `c = alpha * a @ b + beta * c` where `c` is `[m, n]` with row stride
/// `c_stride`.
pub(crate) fn gemm_into(
    alpha: f64,
    a: MatRef<'_>,
    b: MatRef<'_>,
    beta: f64,
    c: &mut [f64],
    c_stride: usize,
) {
    let (m, k) = a.logical();
    let (k2, n) = b.logical();
    assert_eq!(k, k2, "gemm inner dimension mismatch");
    assert!(a.span_ok() && b.span_ok(), "gemm operand out of bounds");
    if m == 0 || n == 0 {
        return;
    }
    assert!((m - 1) * c_stride + n <= c.len(), "gemm output out of bounds");
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: bounds of all three operands were checked above against the
    // strides matrixmultiply will use.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            c_stride as isize,
            1,
        );
    }
}

/// Plain row-major matrix product of `a: [m, k]` and `b: [k, n]`.
pub fn gemm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    gemm_into(1.0, MatRef::new(a, m, k), MatRef::new(b, k, n), 0.0, &mut c, n);
    c
}

impl<'t> Var<'t> {
    /// `[m, k] @ [k, n]`.
    pub fn matmul(self, other: Var<'t>) -> Var<'t> {
        let a = self.value();
        let b = other.value();
        let (m, k, n) = match (a.shape(), b.shape()) {
            (&[m, k], &[k2, n]) if k == k2 => (m, k, n),
            (sa, sb) => panic!("matmul shapes {sa:?} x {sb:?}"),
        };
        let y = Tensor::new(&[m, n], gemm(a.data(), b.data(), m, k, n));
        self.tape.push_op(y, &[self, other], move |g| {
            let mut da = vec![0.0; m * k];
            gemm_into(
                1.0,
                MatRef::new(g.data(), m, n),
                MatRef::new(b.data(), k, n).t(),
                0.0,
                &mut da,
                k,
            );
            let mut db = vec![0.0; k * n];
            gemm_into(
                1.0,
                MatRef::new(a.data(), m, k).t(),
                MatRef::new(g.data(), m, n),
                0.0,
                &mut db,
                n,
            );
            vec![Some(Tensor::new(&[m, k], da)), Some(Tensor::new(&[k, n], db))]
        })
    }

    /// Affine map `x: [N, in]`, `weight: [out, in]`, `bias: [out]`.
    pub fn linear(self, weight: Var<'t>, bias: Option<Var<'t>>) -> Var<'t> {
        let x = self.value();
        let w = weight.value();
        let (n, fin) = match x.shape() {
            &[n, f] => (n, f),
            s => panic!("linear input shape {s:?}"),
        };
        let fout = match w.shape() {
            &[o, i] if i == fin => o,
            s => panic!("linear weight shape {s:?} for input width {fin}"),
        };
        let mut out = vec![0.0; n * fout];
        gemm_into(
            1.0,
            MatRef::new(x.data(), n, fin),
            MatRef::new(w.data(), fout, fin).t(),
            0.0,
            &mut out,
            fout,
        );
        let mut parents = vec![self, weight];
        if let Some(b) = bias {
            let bv = b.value();
            assert_eq!(bv.shape(), [fout], "linear bias shape");
            for row in out.chunks_exact_mut(fout) {
                for (o, bb) in row.iter_mut().zip(bv.data()) {
                    *o += bb;
                }
            }
            parents.push(b);
        }
        let has_bias = bias.is_some();
        self.tape
            .push_op(Tensor::new(&[n, fout], out), &parents, move |g| {
                let mut dx = vec![0.0; n * fin];
                gemm_into(
                    1.0,
                    MatRef::new(g.data(), n, fout),
                    MatRef::new(w.data(), fout, fin),
                    0.0,
                    &mut dx,
                    fin,
                );
                let mut dw = vec![0.0; fout * fin];
                gemm_into(
                    1.0,
                    MatRef::new(g.data(), n, fout).t(),
                    MatRef::new(x.data(), n, fin),
                    0.0,
                    &mut dw,
                    fin,
                );
                let mut grads = vec![
                    Some(Tensor::new(&[n, fin], dx)),
                    Some(Tensor::new(&[fout, fin], dw)),
                ];
                if has_bias {
                    let mut db = vec![0.0; fout];
                    for row in g.data().chunks_exact(fout) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    grads.push(Some(Tensor::new(&[fout], db)));
                }
                grads
            })
    }
}
