use crate::tape::Var;
use crate::tensor::Tensor;

/// Which elements of a `[N, C, ...]` tensor share a mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormAxes {
    /// One group per `(n, c)`: instance normalization.
    Instance,
    /// One group per channel across the batch: batch normalization.
    Channel,
}

/// Biased per-group statistics of the normalized input.
#[derive(Debug, Clone)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// Elements per group.
    pub count: usize,
}

impl<'t> Var<'t> {
    /// `(x - mean) / sqrt(var + eps)` per group, without affine terms.
    pub fn normalize(self, axes: NormAxes, eps: f64) -> (Var<'t>, NormStats) {
        let x = self.value();
        let shape = x.shape().to_vec();
        assert!(shape.len() >= 2, "normalize expects [N, C, ...]");
        let (n, c) = (shape[0], shape[1]);
        let inner = x.numel() / (n * c);
        let groups = match axes {
            NormAxes::Instance => n * c,
            NormAxes::Channel => c,
        };
        let group_of = move |i: usize| match axes {
            NormAxes::Instance => i / inner,
            NormAxes::Channel => (i / inner) % c,
        };
        let count = x.numel() / groups;
        let mut mean = vec![0.0; groups];
        for (i, v) in x.data().iter().enumerate() {
            mean[group_of(i)] += v;
        }
        mean.iter_mut().for_each(|m| *m /= count as f64);
        let mut var = vec![0.0; groups];
        for (i, v) in x.data().iter().enumerate() {
            let d = v - mean[group_of(i)];
            var[group_of(i)] += d * d;
        }
        var.iter_mut().for_each(|v| *v /= count as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let y: Vec<f64> = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - mean[group_of(i)]) * inv_std[group_of(i)])
            .collect();
        let y = Tensor::new(&shape, y);
        let saved_y = y.clone();
        let stats = NormStats {
            mean: mean.clone(),
            var: var.clone(),
            count,
        };
        let out = self.tape.push_op(y, &[self], move |g| {
            let mut g_mean = vec![0.0; groups];
            let mut gy_mean = vec![0.0; groups];
            for (i, (gv, yv)) in g.data().iter().zip(saved_y.data()).enumerate() {
                g_mean[group_of(i)] += gv;
                gy_mean[group_of(i)] += gv * yv;
            }
            g_mean.iter_mut().for_each(|m| *m /= count as f64);
            gy_mean.iter_mut().for_each(|m| *m /= count as f64);
            let dx = g
                .data()
                .iter()
                .zip(saved_y.data())
                .enumerate()
                .map(|(i, (gv, yv))| {
                    let k = group_of(i);
                    inv_std[k] * (gv - g_mean[k] - yv * gy_mean[k])
                })
                .collect();
            vec![Some(Tensor::new(&shape, dx))]
        });
        (out, stats)
    }
}
