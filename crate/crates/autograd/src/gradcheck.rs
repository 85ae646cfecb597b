//! Central finite-difference checks of tape gradients.

use rand::Rng;

use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Outcome of comparing analytic and numeric derivatives.
#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    /// `(analytic, numeric)` pairs, one per probe.
    pub probes: Vec<(f64, f64)>,
}

impl GradCheckReport {
    pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
        let scale = analytic.abs().max(numeric.abs());
        if scale == 0.0 {
            0.0
        } else {
            (analytic - numeric).abs() / scale
        }
    }

    pub fn max_relative_error(&self) -> f64 {
        self.probes
            .iter()
            .map(|&(a, n)| Self::relative_error(a, n))
            .fold(0.0, f64::max)
    }

    pub fn merge(&mut self, other: GradCheckReport) {
        self.probes.extend(other.probes);
    }
}

/// Compares the directional derivative of `f` along random unit directions
/// (one per input per probe) with `<grad, direction>` from the tape.
///
/// `f` must be deterministic: it is called on fresh tapes for each
/// perturbation.
pub fn check_directional<F, R>(
    inputs: &[Tensor],
    f: F,
    eps: f64,
    probes: usize,
    rng: &mut R,
) -> GradCheckReport
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
    R: Rng + ?Sized,
{
    let tape = Tape::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = f(&tape, &vars);
    let grads = tape.backward(loss);
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(v, t)| {
            grads
                .wrt(*v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(t.shape()))
        })
        .collect();

    let eval = |xs: &[Tensor]| {
        let tape = Tape::no_grad();
        let vars: Vec<Var<'_>> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        f(&tape, &vars).item()
    };

    let mut report = GradCheckReport::default();
    for _ in 0..probes {
        for (i, input) in inputs.iter().enumerate() {
            let mut dir = Tensor::randn(input.shape(), 1.0, rng);
            let norm = dir.norm().max(f64::MIN_POSITIVE);
            dir = dir.scale(1.0 / norm);
            let a = analytic[i].dot(&dir);
            let mut plus = inputs.to_vec();
            plus[i] = input.add(&dir.scale(eps));
            let mut minus = inputs.to_vec();
            minus[i] = input.sub(&dir.scale(eps));
            let n = (eval(&plus) - eval(&minus)) / (2.0 * eps);
            report.probes.push((a, n));
        }
    }
    report
}
