//! Parametric layout synthesis from a differentiation grade and per-type
//! cellularities.
//!
//! Glands are Fourier-perturbed ellipses laid out on a jittered grid.
//! Epithelial cells sit on gland boundaries at evenly spaced arc positions;
//! every other type is scattered uniformly outside the lumens. Bounding
//! boxes never intersect.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{SizeStatistics, TypeSize};
use crate::layout::{compute_bbox, BoundingBox, Canvas, Cell, CellularLayout, Vocabulary};

pub const DEFAULT_CAPACITY: usize = 500;
pub const REFERENCE_SIZE: u32 = 256;
pub const SUPPORTED_MAGNIFICATION: u32 = 40;
/// Attempts per cell before placement gives up.
pub const MAX_REJECTIONS: usize = 200;
pub const MAX_GLANDS: usize = 25;
pub const EPITHELIAL_TYPE: &str = "epithelial";

/// Angular resolution used for gland arc length and perturbation stats.
const BOUNDARY_SAMPLES: usize = 720;
const RADIAL_JITTER_PX: f64 = 1.5;
const GLAND_MARGIN_PX: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Grade {
    #[default]
    Normal,
    Low,
    High,
}

impl Grade {
    pub const ALL: [Grade; 3] = [Grade::Normal, Grade::Low, Grade::High];

    /// Mean relative deviation of gland boundaries from their ellipse.
    pub fn boundary_perturbation(self) -> f64 {
        match self {
            Grade::Normal => 0.04,
            Grade::Low => 0.10,
            Grade::High => 0.20,
        }
    }

    /// Fraction of each gland boundary left without epithelium.
    pub fn boundary_loss(self) -> f64 {
        match self {
            Grade::Normal | Grade::Low => 0.0,
            Grade::High => 0.25,
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Grade::Normal => "normal",
            Grade::Low => "low",
            Grade::High => "high",
        })
    }
}

impl FromStr for Grade {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Grade::Normal),
            "low" => Ok(Grade::Low),
            "high" => Ok(Grade::High),
            other => Err(Error::Config(format!("unknown grade {other:?} (normal, low, high)"))),
        }
    }
}

fn default_image_size() -> u32 {
    REFERENCE_SIZE
}

fn default_magnification() -> u32 {
    SUPPORTED_MAGNIFICATION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    #[serde(default)]
    pub grade: Grade,
    /// Type name to cellularity in `[0, 1]`; missing types get 0.
    #[serde(default)]
    pub cellularities: BTreeMap<String, f64>,
    #[serde(default = "default_image_size")]
    pub image_size: u32,
    #[serde(default = "default_magnification")]
    pub magnification: u32,
    /// Must stay 0.
    #[serde(default)]
    pub cell_overlap: f64,
    /// Overrides the gland count derived from the epithelial budget.
    #[serde(default)]
    pub gland_count: Option<usize>,
    /// Per-type fraction of the capacity; uniform when absent.
    #[serde(default)]
    pub shares: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            grade: Grade::Normal,
            cellularities: BTreeMap::new(),
            image_size: REFERENCE_SIZE,
            magnification: SUPPORTED_MAGNIFICATION,
            cell_overlap: 0.0,
            gland_count: None,
            shares: None,
            rng_seed: 0,
        }
    }
}

impl LayoutParams {
    pub fn new(grade: Grade, seed: u64) -> Self {
        Self {
            grade,
            rng_seed: seed,
            ..Self::default()
        }
    }

    pub fn with_cellularity(mut self, name: &str, value: f64) -> Self {
        self.cellularities.insert(name.to_string(), value);
        self
    }

    pub fn validate(&self, vocabulary: &Vocabulary) -> Result<()> {
        if self.cell_overlap != 0.0 {
            return Err(Error::Unsupported(format!(
                "cell overlap {} (only 0 is supported)",
                self.cell_overlap
            )));
        }
        if self.image_size == 0 {
            return Err(Error::Config("image size must be positive".into()));
        }
        for (name, &v) in &self.cellularities {
            if vocabulary.id(name).is_none() {
                return Err(Error::Vocabulary(format!("unknown cell type {name:?}")));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("cellularity of {name} is {v}, outside [0, 1]")));
            }
        }
        if let Some(shares) = &self.shares {
            let mut total = 0.0;
            for (name, &v) in shares {
                if vocabulary.id(name).is_none() {
                    return Err(Error::Vocabulary(format!("unknown cell type {name:?} in shares")));
                }
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("share of {name} is {v}")));
                }
                total += v;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("shares sum to {total}, expected 1")));
            }
        }
        Ok(())
    }
}

/// Maximum cell count for a square tile of `image_size` pixels, scaled by
/// area from the 256 px reference.
pub fn estimate_capacity(image_size: u32, magnification: u32) -> Result<usize> {
    if magnification != SUPPORTED_MAGNIFICATION {
        return Err(Error::Unsupported(format!(
            "magnification {magnification}x (only {SUPPORTED_MAGNIFICATION}x is calibrated)"
        )));
    }
    if image_size == 0 {
        return Err(Error::Unsupported("image size 0".into()));
    }
    let scale = (image_size as f64 / REFERENCE_SIZE as f64).powi(2);
    Ok((DEFAULT_CAPACITY as f64 * scale).round() as usize)
}

/// `round(cellularity * capacity * share)` per type, in vocabulary order,
/// trimmed from the largest counts if rounding overshoots the capacity.
pub fn per_type_counts(params: &LayoutParams, vocabulary: &Vocabulary, capacity: usize) -> Result<Vec<usize>> {
    params.validate(vocabulary)?;
    let uniform = 1.0 / vocabulary.len() as f64;
    let mut counts: Vec<usize> = vocabulary
        .names()
        .iter()
        .map(|name| {
            let c = params.cellularities.get(name).copied().unwrap_or(0.0);
            let share = match &params.shares {
                Some(s) => s.get(name).copied().unwrap_or(0.0),
                None => uniform,
            };
            (c * capacity as f64 * share).round() as usize
        })
        .collect();
    while counts.iter().sum::<usize>() > capacity {
        let (i, _) = counts
            .iter()
            .enumerate()
            .max_by_key(|&(i, &c)| (c, std::cmp::Reverse(i)))
            .expect("non-empty vocabulary");
        counts[i] -= 1;
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub order: u32,
    pub amplitude: f64,
    pub phase: f64,
}

/// A gland: an ellipse whose radius is modulated by a few harmonics.
///
/// In the gland frame a boundary point at angle `t` is
/// `centre + rho(t) * (a cos t, b sin t)` with
/// `rho(t) = 1 + sum_h amp_h cos(h t + phase_h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlandSpec {
    /// Normalized to the canvas.
    pub center: (f64, f64),
    /// Semi-axes normalized to canvas width and height.
    pub radii: (f64, f64),
    pub boundary_perturbation: f64,
    pub lumen_radius_fraction: f64,
    pub harmonics: Vec<Harmonic>,
    /// Arc-length interval `[start, start + len)`, as fractions of the
    /// perimeter, that carries no epithelium.
    pub missing_arc: Option<(f64, f64)>,
}

impl GlandSpec {
    pub fn rho(&self, t: f64) -> f64 {
        1.0 + self
            .harmonics
            .iter()
            .map(|h| h.amplitude * (h.order as f64 * t + h.phase).cos())
            .sum::<f64>()
    }

    /// Boundary point at angle `t`, in pixels.
    pub fn boundary_point(&self, t: f64, canvas: Canvas) -> (f64, f64) {
        let (cx, cy, a, b) = self.pixel_frame(canvas);
        let r = self.rho(t);
        (cx + a * r * t.cos(), cy + b * r * t.sin())
    }

    /// Mean of `|rho - 1|` over the angular grid.
    pub fn mean_perturbation(&self) -> f64 {
        (0..BOUNDARY_SAMPLES)
            .map(|i| (self.rho(TAU * i as f64 / BOUNDARY_SAMPLES as f64) - 1.0).abs())
            .sum::<f64>()
            / BOUNDARY_SAMPLES as f64
    }

    /// Closed boundary polyline with `n` vertices, in pixels.
    pub fn polyline(&self, canvas: Canvas, n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| self.boundary_point(TAU * i as f64 / n as f64, canvas))
            .collect()
    }

    pub fn in_lumen(&self, px: (f64, f64), canvas: Canvas) -> bool {
        let (cx, cy, a, b) = self.pixel_frame(canvas);
        let u = (px.0 - cx) / a;
        let v = (px.1 - cy) / b;
        let r = u.hypot(v);
        r < self.lumen_radius_fraction * self.rho(v.atan2(u))
    }

    /// Distance in pixels from `px` to a dense boundary polyline.
    pub fn distance_to_boundary(&self, px: (f64, f64), canvas: Canvas) -> f64 {
        let line = self.polyline(canvas, 4096);
        (0..line.len())
            .map(|i| segment_distance(px, line[i], line[(i + 1) % line.len()]))
            .fold(f64::INFINITY, f64::min)
    }

    fn pixel_frame(&self, canvas: Canvas) -> (f64, f64, f64, f64) {
        let (w, h) = (canvas.width as f64, canvas.height as f64);
        (self.center.0 * w, self.center.1 * h, self.radii.0 * w, self.radii.1 * h)
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

/// A synthesized layout together with the glands it was built around.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub layout: CellularLayout,
    pub glands: Vec<GlandSpec>,
}

#[derive(Debug, Clone)]
pub struct LayoutSynthesizer {
    pub vocabulary: Vocabulary,
    pub sizes: SizeStatistics,
}

impl Default for LayoutSynthesizer {
    fn default() -> Self {
        Self::new(Vocabulary::conic(), SizeStatistics::conic_default())
    }
}

/// Synthesizes a CoNiC-vocabulary layout with the built-in size statistics.
pub fn synthesize_layout(params: &LayoutParams) -> Result<CellularLayout> {
    LayoutSynthesizer::default().synthesize(params).map(|s| s.layout)
}

/// Sampled boundary of one gland with cumulative arc length.
struct Ring {
    points: Vec<(f64, f64)>,
    normals: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
    perimeter: f64,
    missing: Option<(f64, f64)>,
}

impl Ring {
    fn new(g: &GlandSpec, canvas: Canvas) -> Self {
        let n = BOUNDARY_SAMPLES;
        let points = g.polyline(canvas, n);
        let mut cumulative = Vec::with_capacity(n + 1);
        cumulative.push(0.0);
        for i in 0..n {
            let (a, b) = (points[i], points[(i + 1) % n]);
            cumulative.push(cumulative[i] + (b.0 - a.0).hypot(b.1 - a.1));
        }
        let perimeter = cumulative[n];
        let (cx, cy) = (g.center.0 * canvas.width as f64, g.center.1 * canvas.height as f64);
        let normals = (0..n)
            .map(|i| {
                let (p, q) = (points[(i + n - 1) % n], points[(i + 1) % n]);
                let (tx, ty) = (q.0 - p.0, q.1 - p.1);
                let len = tx.hypot(ty).max(1e-12);
                let (mut nx, mut ny) = (ty / len, -tx / len);
                // Orient outward.
                if nx * (points[i].0 - cx) + ny * (points[i].1 - cy) < 0.0 {
                    nx = -nx;
                    ny = -ny;
                }
                (nx, ny)
            })
            .collect();
        Self {
            points,
            normals,
            cumulative,
            perimeter,
            missing: g.missing_arc,
        }
    }

    fn usable_length(&self) -> f64 {
        self.perimeter * (1.0 - self.missing.map_or(0.0, |m| m.1))
    }

    /// Point and outward normal at arc fraction `s` of the usable arc.
    fn at(&self, s: f64) -> ((f64, f64), (f64, f64)) {
        let s = s.rem_euclid(1.0);
        let frac = match self.missing {
            Some((start, len)) => (start + len + s * (1.0 - len)).rem_euclid(1.0),
            None => s,
        };
        let target = frac * self.perimeter;
        let i = match self.cumulative.binary_search_by(|c| c.total_cmp(&target)) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
        .min(self.points.len() - 1);
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        let t = if seg > 0.0 { (target - self.cumulative[i]) / seg } else { 0.0 };
        let (a, b) = (self.points[i], self.points[(i + 1) % self.points.len()]);
        ((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)), self.normals[i])
    }
}

impl LayoutSynthesizer {
    pub fn new(vocabulary: Vocabulary, sizes: SizeStatistics) -> Self {
        Self { vocabulary, sizes }
    }

    pub fn synthesize(&self, params: &LayoutParams) -> Result<Synthesis> {
        params.validate(&self.vocabulary)?;
        let capacity = estimate_capacity(params.image_size, params.magnification)?;
        let counts = per_type_counts(params, &self.vocabulary, capacity)?;
        let canvas = Canvas::square(params.image_size);
        let requested: usize = counts.iter().sum();
        let epi = self.vocabulary.id(EPITHELIAL_TYPE);
        let n_epi = epi.map_or(0, |e| counts[e]);

        // The derived gland count starts from a perimeter estimate and grows
        // until the epithelial budget fits; an explicit count is tried alone.
        let candidates: Vec<usize> = match params.gland_count {
            Some(g) => vec![g.min(MAX_GLANDS)],
            None if n_epi == 0 => vec![0],
            None => (self.estimate_gland_count(n_epi, params.grade, canvas)..=MAX_GLANDS).collect(),
        };
        let mut last_err = None;
        let mut found = None;
        for g in candidates {
            let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
            rng.set_stream(g as u64);
            let glands = build_glands(g, params.grade, canvas, &mut rng);
            let mut placer = Placer {
                canvas,
                boxes: Vec::new(),
                layout: CellularLayout::new(canvas, self.vocabulary.clone()),
            };
            match self.place_epithelium(&mut placer, &glands, n_epi, requested, &mut rng) {
                Ok(()) => {
                    found = Some((glands, placer, rng));
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        let Some((glands, mut placer, mut rng)) = found else {
            return Err(last_err.expect("at least one gland count tried"));
        };

        for (ty, &n) in counts.iter().enumerate() {
            if Some(ty) == epi {
                continue;
            }
            let size = self.size_of(ty);
            for _ in 0..n {
                let (w, h) = sample_size(&size, canvas, &mut rng);
                let seed = rng.random::<u64>();
                let placed = (0..MAX_REJECTIONS).any(|_| {
                    let p = (
                        rng.random::<f64>() * canvas.width as f64,
                        rng.random::<f64>() * canvas.height as f64,
                    );
                    !glands.iter().any(|g| g.in_lumen(p, canvas)) && placer.try_place(ty, p, w, h, seed)
                });
                if !placed {
                    let name = self.vocabulary.names()[ty].clone();
                    return Err(placer.failure(requested, &format!("no free space for {name}")));
                }
            }
        }
        Ok(Synthesis {
            layout: placer.layout,
            glands,
        })
    }

    fn place_epithelium(
        &self,
        placer: &mut Placer,
        glands: &[GlandSpec],
        n_epi: usize,
        requested: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let Some(epi) = self.vocabulary.id(EPITHELIAL_TYPE) else {
            return Ok(());
        };
        if n_epi == 0 {
            return Ok(());
        }
        if glands.is_empty() {
            return Err(Error::Placement {
                achieved: 0,
                requested,
                detail: "epithelial cells need at least one gland".into(),
            });
        }
        let canvas = placer.canvas;
        let rings: Vec<Ring> = glands.iter().map(|g| Ring::new(g, canvas)).collect();
        let size = self.size_of(epi);
        let slots = distribute(n_epi, &rings.iter().map(Ring::usable_length).collect::<Vec<_>>());
        for (gi, &n_slots) in slots.iter().enumerate() {
            let spacing = 1.0 / n_slots.max(1) as f64;
            for k in 0..n_slots {
                let (w, h) = sample_size(&size, canvas, rng);
                let seed = rng.random::<u64>();
                let placed = (0..MAX_REJECTIONS).any(|attempt| {
                    // Jitter around the slot widens with each retry, then any
                    // free spot on any ring is accepted.
                    let (ring, s) = if attempt < MAX_REJECTIONS / 2 {
                        let spread = 0.25 + attempt as f64 / MAX_REJECTIONS as f64;
                        (&rings[gi], (k as f64 + 0.5 + rng.random_range(-spread..=spread)) * spacing)
                    } else {
                        (&rings[pick_ring(&rings, rng)], rng.random::<f64>())
                    };
                    let (p, n) = ring.at(s);
                    let d = rng.random_range(-RADIAL_JITTER_PX..=RADIAL_JITTER_PX);
                    placer.try_place(epi, (p.0 + d * n.0, p.1 + d * n.1), w, h, seed)
                });
                if !placed {
                    return Err(placer.failure(requested, "epithelial rings are full"));
                }
            }
        }
        Ok(())
    }

    fn size_of(&self, ty: usize) -> TypeSize {
        let name = &self.vocabulary.names()[ty];
        self.sizes.get(name).copied().unwrap_or(TypeSize {
            mean_w: 12.0,
            std_w: 2.0,
            mean_h: 12.0,
            std_h: 2.0,
            count: 0,
        })
    }

    /// Smallest gland count whose estimated ring capacity holds `n_epi`.
    fn estimate_gland_count(&self, n_epi: usize, grade: Grade, canvas: Canvas) -> usize {
        let size = self
            .vocabulary
            .id(EPITHELIAL_TYPE)
            .map(|e| self.size_of(e))
            .expect("epithelial type present");
        let spacing = 1.25 * size.mean_w.max(size.mean_h);
        let p_max = 3.0 * grade.boundary_perturbation();
        (1..=MAX_GLANDS)
            .find(|&g| {
                let (cols, rows) = grid(g);
                let hx = canvas.width as f64 / cols as f64 / 2.0;
                let hy = canvas.height as f64 / rows as f64 / 2.0;
                let a = 0.85 * (0.9 * hx - GLAND_MARGIN_PX) / (1.0 + p_max);
                let b = 0.85 * (0.9 * hy - GLAND_MARGIN_PX) / (1.0 + p_max);
                // Ramanujan's ellipse perimeter.
                let perim = std::f64::consts::PI * (3.0 * (a + b) - ((3.0 * a + b) * (a + 3.0 * b)).sqrt());
                let usable = perim * (1.0 - grade.boundary_loss());
                g as f64 * (usable / spacing).floor() >= n_epi as f64
            })
            .unwrap_or(MAX_GLANDS)
    }
}

struct Placer {
    canvas: Canvas,
    boxes: Vec<BoundingBox>,
    layout: CellularLayout,
}

impl Placer {
    fn try_place(&mut self, ty: usize, px: (f64, f64), w: u32, h: u32, seed: u64) -> bool {
        let (x, y) = (px.0 / self.canvas.width as f64, px.1 / self.canvas.height as f64);
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return false;
        }
        let cell = Cell::seeded(ty, x, y, w, h, seed);
        let Ok(b) = compute_bbox(&cell, self.canvas) else {
            return false;
        };
        if self.boxes.iter().any(|o| o.intersects(&b)) {
            return false;
        }
        self.boxes.push(b);
        self.layout.cells.push(cell);
        true
    }

    fn failure(&self, requested: usize, detail: &str) -> Error {
        Error::Placement {
            achieved: self.layout.len(),
            requested,
            detail: format!("{detail} after {MAX_REJECTIONS} attempts"),
        }
    }
}

fn grid(g: usize) -> (usize, usize) {
    let cols = (g as f64).sqrt().ceil() as usize;
    (cols, g.div_ceil(cols))
}

fn build_glands(count: usize, grade: Grade, canvas: Canvas, rng: &mut ChaCha8Rng) -> Vec<GlandSpec> {
    if count == 0 {
        return Vec::new();
    }
    let (cols, rows) = grid(count);
    let (w, h) = (canvas.width as f64, canvas.height as f64);
    let (hx, hy) = (w / cols as f64 / 2.0, h / rows as f64 / 2.0);
    let p = grade.boundary_perturbation();
    (0..count)
        .map(|i| {
            let (col, row) = (i % cols, i / cols);
            let mut harmonics: Vec<Harmonic> = (2..=6)
                .map(|order| Harmonic {
                    order,
                    amplitude: rng.random_range(0.2..1.0) / order as f64,
                    phase: rng.random_range(0.0..TAU),
                })
                .collect();
            let mut spec = GlandSpec {
                center: (0.0, 0.0),
                radii: (1.0, 1.0),
                boundary_perturbation: p,
                lumen_radius_fraction: rng.random_range(0.45..0.65),
                harmonics: Vec::new(),
                missing_arc: None,
            };
            spec.harmonics = harmonics.clone();
            let raw = spec.mean_perturbation();
            for h in &mut harmonics {
                h.amplitude *= p / raw;
            }
            spec.harmonics = harmonics;
            let dev_max = (0..BOUNDARY_SAMPLES)
                .map(|k| (spec.rho(TAU * k as f64 / BOUNDARY_SAMPLES as f64) - 1.0).abs())
                .fold(0.0, f64::max);
            let (jx, jy) = (rng.random_range(-0.1..=0.1) * hx, rng.random_range(-0.1..=0.1) * hy);
            let cx = (2 * col + 1) as f64 * hx + jx;
            let cy = (2 * row + 1) as f64 * hy + jy;
            // Ellipse extent in x is at most a * (1 + dev_max).
            let a = rng.random_range(0.85..=1.0) * (0.9 * hx - jx.abs() - GLAND_MARGIN_PX) / (1.0 + dev_max);
            let b = rng.random_range(0.85..=1.0) * (0.9 * hy - jy.abs() - GLAND_MARGIN_PX) / (1.0 + dev_max);
            spec.center = (cx / w, cy / h);
            spec.radii = (a.max(1.0) / w, b.max(1.0) / h);
            let loss = grade.boundary_loss();
            if loss > 0.0 {
                spec.missing_arc = Some((rng.random::<f64>(), loss));
            }
            spec
        })
        .collect()
}

/// Splits `n` over weights with the largest-remainder rule.
fn distribute(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || total <= 0.0 {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&i, &j| (exact[j] - out[j] as f64).total_cmp(&(exact[i] - out[i] as f64)).then(i.cmp(&j)));
    let short = n - out.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        out[i] += 1;
    }
    out
}

fn pick_ring(rings: &[Ring], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = rings.iter().map(Ring::usable_length).sum();
    let mut r = rng.random::<f64>() * total;
    for (i, ring) in rings.iter().enumerate() {
        r -= ring.usable_length();
        if r <= 0.0 {
            return i;
        }
    }
    rings.len() - 1
}

fn sample_size(size: &TypeSize, canvas: Canvas, rng: &mut ChaCha8Rng) -> (u32, u32) {
    let mut draw = |mean: f64, std: f64, limit: u32| -> u32 {
        let v = if std > 0.0 {
            Normal::new(mean, std).expect("finite size stats").sample(rng)
        } else {
            mean
        };
        let lo = (mean - 2.0 * std).max(1.0);
        let hi = (mean + 2.0 * std).max(lo);
        (v.clamp(lo, hi).round() as u32).clamp(1, limit)
    };
    let w = draw(size.mean_w, size.std_w, canvas.width);
    let h = draw(size.mean_h, size.std_h, canvas.height);
    (w, h)
}
