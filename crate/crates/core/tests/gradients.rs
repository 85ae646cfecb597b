//! Analytic gradients against central finite differences.

mod common;

use common::criteria::{full_objective_check, loss_function_errors, miniature};
use synclay::nets::{Ctx, Variant};
use synclay::train::{generator_terms, weighted_total, LossWeights};
use synclay_autograd::Tape;

const TOL: f64 = 1e-3;

#[test]
fn loss_functions() {
    for (name, err) in loss_function_errors() {
        assert!(err < TOL, "{name} {err}");
    }
}

#[test]
fn full_objective_through_the_generator() {
    let rep = full_objective_check(Variant::Baseline);
    assert!(rep.max_relative_error() < TOL, "{:?}", rep.probes);
}

#[test]
fn full_objective_through_the_graph_variant() {
    let rep = full_objective_check(Variant::Gcn);
    assert!(rep.max_relative_error() < TOL, "{:?}", rep.probes);
}

#[test]
fn zero_weight_terms_contribute_no_gradient() {
    let (models, rec) = miniature();
    let w = LossWeights::from_array([0.0, 0.0, 0.0, 0.01, 1.0]);
    let grads_of = |drop_recon: bool| {
        let tape = Tape::new();
        let ctx = Ctx::train(&tape, 1);
        let out = models.generator.forward(&ctx, &rec.layout).unwrap();
        let mut terms = generator_terms(&models, &w, &ctx, &rec, &out).unwrap();
        if drop_recon {
            terms[0] = None;
            terms[1] = None;
        }
        let g = tape.backward(weighted_total(&terms, &w).unwrap());
        models
            .generator
            .trainable_stores()
            .iter()
            .flat_map(|s| s.ids().map(|id| g.param(s, id).cloned()).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    assert_eq!(grads_of(false), grads_of(true));
    assert!(weighted_total(&[None, None, None, None, None], &w).is_none());
}
