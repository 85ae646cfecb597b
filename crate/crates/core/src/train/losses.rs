//! Loss terms and their weighted combination.

use serde::{Deserialize, Serialize};
use synclay_autograd::{Tensor, Var};

use crate::error::{Error, Result};

/// The five terms of the generator objective, in weight order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossTerm {
    Image,
    Mask,
    Seg,
    AdvImage,
    AdvCell,
}

impl LossTerm {
    pub const ALL: [LossTerm; 5] = [
        LossTerm::Image,
        LossTerm::Mask,
        LossTerm::Seg,
        LossTerm::AdvImage,
        LossTerm::AdvCell,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossTerm::Image => "image",
            LossTerm::Mask => "mask",
            LossTerm::Seg => "seg",
            LossTerm::AdvImage => "adv_image",
            LossTerm::AdvCell => "adv_cell",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub image: f64,
    pub mask: f64,
    pub seg: f64,
    pub adv_image: f64,
    pub adv_cell: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            image: 1.0,
            mask: 1.0,
            seg: 0.1,
            adv_image: 0.01,
            adv_cell: 1.0,
        }
    }
}

impl LossWeights {
    pub fn as_array(&self) -> [f64; 5] {
        [self.image, self.mask, self.seg, self.adv_image, self.adv_cell]
    }

    pub fn from_array(w: [f64; 5]) -> Self {
        Self {
            image: w[0],
            mask: w[1],
            seg: w[2],
            adv_image: w[3],
            adv_cell: w[4],
        }
    }

    pub fn get(&self, term: LossTerm) -> f64 {
        self.as_array()[term.index()]
    }

    pub fn validate(&self) -> Result<()> {
        for t in LossTerm::ALL {
            let w = self.get(t);
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("weight for {} must be finite and >= 0, got {w}", t.name())));
            }
        }
        Ok(())
    }

    /// Zeroes every term not in `enabled`.
    pub fn masked(&self, enabled: &TermMask) -> Self {
        let mut w = self.as_array();
        for t in LossTerm::ALL {
            if !enabled.has(t) {
                w[t.index()] = 0.0;
            }
        }
        Self::from_array(w)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::from_array(self.as_array().map(|w| w * k))
    }
}

/// Which loss terms are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TermMask {
    pub image: bool,
    pub mask: bool,
    pub seg: bool,
    pub adv_image: bool,
    pub adv_cell: bool,
}

impl Default for TermMask {
    fn default() -> Self {
        Self::all()
    }
}

impl TermMask {
    pub fn all() -> Self {
        Self {
            image: true,
            mask: true,
            seg: true,
            adv_image: true,
            adv_cell: true,
        }
    }

    pub fn has(&self, term: LossTerm) -> bool {
        match term {
            LossTerm::Image => self.image,
            LossTerm::Mask => self.mask,
            LossTerm::Seg => self.seg,
            LossTerm::AdvImage => self.adv_image,
            LossTerm::AdvCell => self.adv_cell,
        }
    }

    pub fn without(mut self, term: LossTerm) -> Self {
        match term {
            LossTerm::Image => self.image = false,
            LossTerm::Mask => self.mask = false,
            LossTerm::Seg => self.seg = false,
            LossTerm::AdvImage => self.adv_image = false,
            LossTerm::AdvCell => self.adv_cell = false,
        }
        self
    }

    /// Enabled term names joined by `+`, or `none`.
    pub fn label(&self) -> String {
        let names: Vec<&str> = LossTerm::ALL.iter().filter(|t| self.has(**t)).map(|t| t.name()).collect();
        if names.is_empty() {
            "none".into()
        } else {
            names.join("+")
        }
    }
}

/// Sum over cells of the per-mask mean squared error.
/// `gen` is `[n, 1, s, s]`; `gt` holds `n` masks of `s * s` values.
pub fn loss_mask<'t>(gt: &[Vec<f64>], gen: Var<'t>) -> Result<Var<'t>> {
    let s = gen.shape();
    let n = s[0];
    if gt.len() != n {
        return Err(Error::Shape(format!("loss_mask: {} target masks for {n} generated", gt.len())));
    }
    let per: usize = s[1..].iter().product();
    if let Some(bad) = gt.iter().find(|m| m.len() != per) {
        return Err(Error::Shape(format!("loss_mask: target of {} values, expected {per}", bad.len())));
    }
    let target = gen.tape().constant(Tensor::new(&s, gt.concat()));
    Ok(gen.sub(target).square().sum().scale(1.0 / per as f64))
}

/// Mean absolute difference.
pub fn loss_image<'t>(gt: Var<'t>, gen: Var<'t>) -> Result<Var<'t>> {
    if gt.shape() != gen.shape() {
        return Err(Error::Shape(format!(
            "loss_image: shapes {:?} and {:?} differ",
            gt.shape(),
            gen.shape()
        )));
    }
    Ok(gen.sub(gt).abs().mean())
}

/// Mean per-pixel cross entropy of `[N, K, H, W]` logits against labels.
pub fn loss_seg<'t>(labels: &[u8], logits: Var<'t>) -> Result<Var<'t>> {
    let s = logits.shape();
    if s.len() != 4 || labels.len() != s[0] * s[2] * s[3] {
        return Err(Error::Shape(format!("loss_seg: {} labels for logits {s:?}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= s[1]) {
        return Err(Error::Shape(format!("loss_seg: label {bad} outside 0..{}", s[1])));
    }
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    Ok(logits.cross_entropy(&labels))
}

/// Discriminator side: `-log D(real) - log(1 - D(fake))`, each averaged over
/// its logits.
pub fn discriminator_loss<'t>(real: Var<'t>, fake: Var<'t>) -> Var<'t> {
    real.bce_with_logits(1.0).add(fake.bce_with_logits(0.0))
}

/// Non-saturating generator side: `-log D(fake)` averaged over logits.
pub fn generator_loss(fake: Var<'_>) -> Var<'_> {
    fake.bce_with_logits(1.0)
}

/// Scalar values of the five terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub image: f64,
    pub mask: f64,
    pub seg: f64,
    pub adv_image: f64,
    pub adv_cell: f64,
}

impl LossComponents {
    pub fn as_array(&self) -> [f64; 5] {
        [self.image, self.mask, self.seg, self.adv_image, self.adv_cell]
    }

    pub fn from_array(c: [f64; 5]) -> Self {
        Self {
            image: c[0],
            mask: c[1],
            seg: c[2],
            adv_image: c[3],
            adv_cell: c[4],
        }
    }
}

/// `sum_i w_i * c_i`.
pub fn loss_total(components: &LossComponents, weights: &LossWeights) -> Result<f64> {
    weights.validate()?;
    Ok(components
        .as_array()
        .iter()
        .zip(weights.as_array())
        .map(|(c, w)| c * w)
        .sum())
}

/// Weighted sum on the tape. Terms that are absent or carry zero weight are
/// left out, so they contribute no gradient.
pub fn weighted_total<'t>(terms: &[Option<Var<'t>>; 5], weights: &LossWeights) -> Option<Var<'t>> {
    let w = weights.as_array();
    terms
        .iter()
        .zip(w)
        .filter(|(t, w)| t.is_some() && *w != 0.0)
        .map(|(t, w)| t.expect("filtered").scale(w))
        .reduce(|a, b| a.add(b))
}
