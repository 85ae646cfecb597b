//! Parameterized building blocks shared by every network.

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synclay_autograd::ops::{Conv2dGeometry, NormAxes};
use synclay_autograd::{ParamId, ParamStore, Tape, Tensor, Var};

use crate::error::{Error, Result};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const NORM_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

struct StatUpdate {
    store: u64,
    mean: ParamId,
    var: ParamId,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
}

/// Per-pass state: the tape, train/eval mode, the dropout stream and pending
/// batch-norm running-statistic updates.
pub struct Ctx<'t> {
    pub tape: &'t Tape,
    pub train: bool,
    rng: RefCell<ChaCha8Rng>,
    stats: RefCell<Vec<StatUpdate>>,
}

impl<'t> Ctx<'t> {
    /// Training mode: batch statistics, dropout drawn from `seed`.
    pub fn train(tape: &'t Tape, seed: u64) -> Self {
        Self {
            tape,
            train: true,
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(seed)),
            stats: RefCell::new(Vec::new()),
        }
    }

    /// Evaluation mode: running statistics, no dropout.
    pub fn eval(tape: &'t Tape) -> Self {
        Self {
            tape,
            train: false,
            rng: RefCell::new(ChaCha8Rng::seed_from_u64(0)),
            stats: RefCell::new(Vec::new()),
        }
    }

    pub fn dropout(&self, x: Var<'t>, p: f64) -> Var<'t> {
        if !self.train || p <= 0.0 {
            return x;
        }
        let shape = x.shape();
        let keep = 1.0 / (1.0 - p);
        let mut rng = self.rng.borrow_mut();
        let n: usize = shape.iter().product();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        x.mul_const(&Tensor::new(&shape, mask))
    }

    /// Folds the batch statistics recorded for `store` into its running
    /// buffers and forgets them.
    pub fn apply_stats(&self, store: &mut ParamStore) {
        let mut pending = self.stats.borrow_mut();
        pending.retain(|u| {
            if u.store != store.uid() {
                return true;
            }
            blend(store.get_mut(u.mean).data_mut(), &u.batch_mean);
            blend(store.get_mut(u.var).data_mut(), &u.batch_var);
            false
        });
    }
}

fn blend(running: &mut [f64], batch: &[f64]) {
    for (r, b) in running.iter_mut().zip(batch) {
        *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * b;
    }
}

fn uniform(shape: &[usize], bound: f64, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape, -bound, bound, rng)
}

#[derive(Debug, Clone, Copy)]
pub struct Linear {
    weight: ParamId,
    bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Self {
            weight: store.add(format!("{name}.weight"), uniform(&[outputs, inputs], bound, rng)),
            bias: store.add(format!("{name}.bias"), uniform(&[outputs], bound, rng)),
            inputs,
            outputs,
        }
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t>, store: &ParamStore, x: Var<'t>) -> Var<'t> {
        let w = ctx.tape.param(store, self.weight);
        let b = ctx.tape.param(store, self.bias);
        x.linear(w, Some(b))
    }

    pub fn weight(&self) -> ParamId {
        self.weight
    }

    pub fn bias(&self) -> ParamId {
        self.bias
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Conv {
    weight: ParamId,
    bias: ParamId,
    pub geom: Conv2dGeometry,
    pub inputs: usize,
    pub outputs: usize,
}

impl Conv {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        geom: Conv2dGeometry,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let k = geom.kernel;
        let bound = 1.0 / ((inputs * k * k) as f64).sqrt();
        Self {
            weight: store.add(format!("{name}.weight"), uniform(&[outputs, inputs, k, k], bound, rng)),
            bias: store.add(format!("{name}.bias"), uniform(&[outputs], bound, rng)),
            geom,
            inputs,
            outputs,
        }
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t>, store: &ParamStore, x: Var<'t>) -> Var<'t> {
        let w = ctx.tape.param(store, self.weight);
        let b = ctx.tape.param(store, self.bias);
        x.conv2d(w, Some(b), self.geom)
    }

    pub fn weight(&self) -> ParamId {
        self.weight
    }

    pub fn bias(&self) -> ParamId {
        self.bias
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConvTranspose {
    weight: ParamId,
    bias: ParamId,
    pub geom: Conv2dGeometry,
    pub inputs: usize,
    pub outputs: usize,
}

impl ConvTranspose {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        outputs: usize,
        geom: Conv2dGeometry,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let k = geom.kernel;
        let bound = 1.0 / ((outputs * k * k) as f64).sqrt();
        Self {
            weight: store.add(format!("{name}.weight"), uniform(&[inputs, outputs, k, k], bound, rng)),
            bias: store.add(format!("{name}.bias"), uniform(&[outputs], bound, rng)),
            geom,
            inputs,
            outputs,
        }
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t>, store: &ParamStore, x: Var<'t>) -> Var<'t> {
        let w = ctx.tape.param(store, self.weight);
        let b = ctx.tape.param(store, self.bias);
        x.conv_transpose2d(w, Some(b), self.geom)
    }
}

/// Batch normalization with affine terms and running statistics.
#[derive(Debug, Clone, Copy)]
pub struct BatchNorm {
    gamma: ParamId,
    beta: ParamId,
    running_mean: ParamId,
    running_var: ParamId,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Self {
        Self {
            gamma: store.add(format!("{name}.gamma"), Tensor::ones(&[channels])),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(&[channels])),
            running_mean: store.add_buffer(format!("{name}.running_mean"), Tensor::zeros(&[channels])),
            running_var: store.add_buffer(format!("{name}.running_var"), Tensor::ones(&[channels])),
        }
    }

    pub fn forward<'t>(&self, ctx: &Ctx<'t>, store: &ParamStore, x: Var<'t>) -> Var<'t> {
        let gamma = ctx.tape.param(store, self.gamma);
        let beta = ctx.tape.param(store, self.beta);
        if ctx.train {
            let (y, st) = x.normalize(NormAxes::Channel, NORM_EPS);
            let unbias = if st.count > 1 {
                st.count as f64 / (st.count - 1) as f64
            } else {
                1.0
            };
            ctx.stats.borrow_mut().push(StatUpdate {
                store: store.uid(),
                mean: self.running_mean,
                var: self.running_var,
                batch_mean: st.mean,
                batch_var: st.var.iter().map(|v| v * unbias).collect(),
            });
            y.channel_affine(gamma, beta)
        } else {
            let mean = store.get(self.running_mean);
            let var = store.get(self.running_var);
            let inv: Vec<f64> = var.data().iter().map(|v| 1.0 / (v + NORM_EPS).sqrt()).collect();
            let shift: Vec<f64> = mean.data().iter().zip(&inv).map(|(m, i)| -m * i).collect();
            let c = inv.len();
            let y = x.channel_affine(
                ctx.tape.constant(Tensor::new(&[c], inv)),
                ctx.tape.constant(Tensor::new(&[c], shift)),
            );
            y.channel_affine(gamma, beta)
        }
    }
}

/// Instance normalization without affine terms.
pub fn instance_norm(x: Var<'_>) -> Var<'_> {
    x.normalize(NormAxes::Instance, NORM_EPS).0
}

/// Checks a `[N, C, H, W]` input against the channel count and, when given,
/// the spatial size a network expects.
pub fn expect_input(net: &str, x: &Var<'_>, channels: usize, size: Option<(usize, usize)>) -> Result<()> {
    let s = x.shape();
    let ok = s.len() == 4 && s[1] == channels && size.is_none_or(|(h, w)| s[2] == h && s[3] == w);
    if ok {
        Ok(())
    } else {
        let want = match size {
            Some((h, w)) => format!("[N, {channels}, {h}, {w}]"),
            None => format!("[N, {channels}, H, W]"),
        };
        Err(Error::Shape(format!("{net}: expected {want}, got {s:?}")))
    }
}

/// Hands out parameter names and an init stream for one store.
pub(crate) fn init_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_norm_tracks_running_stats() {
        let mut store = ParamStore::new("bn");
        let bn = BatchNorm::new(&mut store, "bn", 1);
        let tape = Tape::new();
        let ctx = Ctx::train(&tape, 0);
        let x = tape.constant(Tensor::new(&[2, 1, 1, 2], vec![1.0, 3.0, 5.0, 7.0]));
        let y = bn.forward(&ctx, &store, x).value();
        assert!(y.mean().abs() < 1e-12);
        ctx.apply_stats(&mut store);
        let mean = store.get(store.find("bn.running_mean").unwrap()).data()[0];
        let var = store.get(store.find("bn.running_var").unwrap()).data()[0];
        assert!((mean - 0.4).abs() < 1e-12);
        // unbiased variance 20/3
        assert!((var - (0.9 + 0.1 * 20.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn eval_batch_norm_uses_running_stats() {
        let mut store = ParamStore::new("bn");
        let bn = BatchNorm::new(&mut store, "bn", 1);
        let tape = Tape::new();
        let ctx = Ctx::eval(&tape);
        let x = tape.constant(Tensor::new(&[1, 1, 1, 2], vec![2.0, -2.0]));
        let y = bn.forward(&ctx, &store, x).value();
        let s = 1.0 / (1.0 + NORM_EPS).sqrt();
        assert!((y.data()[0] - 2.0 * s).abs() < 1e-12);
    }

    #[test]
    fn dropout_is_identity_in_eval_and_seeded_in_train() {
        let tape = Tape::new();
        let x = tape.constant(Tensor::ones(&[1, 1, 4, 4]));
        assert_eq!(Ctx::eval(&tape).dropout(x, 0.5).value(), x.value());
        let a = Ctx::train(&tape, 3).dropout(x, 0.5).value();
        let b = Ctx::train(&tape, 3).dropout(x, 0.5).value();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }
}
