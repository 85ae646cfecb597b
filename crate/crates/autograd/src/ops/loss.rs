use super::sigmoid;
use crate::tape::Var;
use crate::tensor::Tensor;

impl<'t> Var<'t> {
    /// Mean per-pixel cross entropy of `self: [N, K, H, W]` logits against
    /// integer labels laid out as `[N, H, W]`.
    pub fn cross_entropy(self, labels: &[usize]) -> Var<'t> {
        let x = self.value();
        let (n, k, h, w) = x.dims4();
        let plane = h * w;
        assert_eq!(labels.len(), n * plane, "cross_entropy label count");
        let count = labels.len() as f64;
        let mut probs = vec![0.0; x.numel()];
        let mut total = 0.0;
        for b in 0..n {
            for p in 0..plane {
                let at = |c: usize| (b * k + c) * plane + p;
                let max = (0..k).map(|c| x.data()[at(c)]).fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = (0..k).map(|c| (x.data()[at(c)] - max).exp()).sum();
                for c in 0..k {
                    probs[at(c)] = (x.data()[at(c)] - max).exp() / z;
                }
                let label = labels[b * plane + p];
                assert!(label < k, "label {label} out of range for {k} classes");
                total -= x.data()[at(label)] - max - z.ln();
            }
        }
        let labels = labels.to_vec();
        let shape = x.shape().to_vec();
        self.tape
            .push_op(Tensor::scalar(total / count), &[self], move |g| {
                let scale = g.item() / count;
                let mut dx = probs.clone();
                for b in 0..n {
                    for p in 0..plane {
                        dx[(b * k + labels[b * plane + p]) * plane + p] -= 1.0;
                    }
                }
                dx.iter_mut().for_each(|v| *v *= scale);
                vec![Some(Tensor::new(&shape, dx))]
            })
    }

    /// Mean binary cross entropy of logits against a constant target.
    pub fn bce_with_logits(self, target: f64) -> Var<'t> {
        let x = self.value();
        let count = x.numel() as f64;
        let total: f64 = x
            .data()
            .iter()
            .map(|&v| v.max(0.0) - v * target + (-v.abs()).exp().ln_1p())
            .sum();
        self.tape
            .push_op(Tensor::scalar(total / count), &[self], move |g| {
                let scale = g.item() / count;
                vec![Some(x.map(|v| (sigmoid(v) - target) * scale))]
            })
    }

    /// Mean Huber loss against a constant target.
    pub fn huber(self, target: &Tensor, delta: f64) -> Var<'t> {
        let x = self.value();
        assert_eq!(x.shape(), target.shape(), "huber shape");
        let count = x.numel() as f64;
        let err = x.sub(target);
        let total: f64 = err.data().iter().map(|&e| huber_value(e, delta)).sum();
        self.tape
            .push_op(Tensor::scalar(total / count), &[self], move |g| {
                let scale = g.item() / count;
                vec![Some(err.map(|e| e.clamp(-delta, delta) * scale))]
            })
    }
}

pub fn huber_value(e: f64, delta: f64) -> f64 {
    let a = e.abs();
    if a <= delta {
        0.5 * e * e
    } else {
        delta * (a - 0.5 * delta)
    }
}
