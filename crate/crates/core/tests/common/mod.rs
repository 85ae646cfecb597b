#![allow(dead_code)]
//! Independent oracles shared by the integration tests.

pub mod criteria;

use synclay::layout::BoundingBox;
use synclay_autograd::Tensor;

/// Bilinear sample of an `h x w` plane at continuous source coordinates,
/// pixel centres at integer positions, clamped to the edge.
pub fn sample_plane(plane: &[f64], h: usize, w: usize, sy: f64, sx: f64) -> f64 {
    let sy = sy.max(0.0);
    let sx = sx.max(0.0);
    let y0 = (sy.floor() as usize).min(h - 1);
    let x0 = (sx.floor() as usize).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let (fy, fx) = (sy - y0 as f64, sx - x0 as f64);
    let at = |y: usize, x: usize| plane[y * w + x];
    at(y0, x0) * (1.0 - fy) * (1.0 - fx) + at(y0, x1) * (1.0 - fy) * fx + at(y1, x0) * fy * (1.0 - fx) + at(y1, x1) * fy * fx
}

/// Source coordinate hit by the centre of output pixel `i` when a length
/// `src` axis is stretched to length `dst`.
pub fn centre_map(i: usize, dst: usize, src: usize) -> f64 {
    (i as f64 + 0.5) * (src as f64 / dst as f64) - 0.5
}

/// Per-pixel reference for the compositor with summed overlaps:
/// `out[c, y, x] = sum_k emb[k, c] * bilinear(mask_k)` over boxes holding
/// the pixel.
pub fn compose_oracle(emb: &Tensor, masks: &Tensor, boxes: &[BoundingBox], h: usize, w: usize) -> Vec<f64> {
    let d = emb.shape()[1];
    let s = masks.shape()[2];
    let mut out = vec![0.0; d * h * w];
    for (k, b) in boxes.iter().enumerate() {
        let plane = &masks.data()[k * s * s..(k + 1) * s * s];
        let (bh, bw) = ((b.y1 - b.y0) as usize, (b.x1 - b.x0) as usize);
        for y in b.y0 as usize..b.y1 as usize {
            for x in b.x0 as usize..b.x1 as usize {
                let m = sample_plane(
                    plane,
                    s,
                    s,
                    centre_map(y - b.y0 as usize, bh, s),
                    centre_map(x - b.x0 as usize, bw, s),
                );
                for c in 0..d {
                    out[c * h * w + y * w + x] += emb.get(&[k, c]) * m;
                }
            }
        }
    }
    out
}

/// Per-pixel reference for crop-and-resize of `[1, C, H, W]`.
pub fn crop_oracle(image: &Tensor, boxes: &[BoundingBox], size: usize) -> Vec<f64> {
    let (_, c, h, w) = image.dims4();
    let mut out = Vec::with_capacity(boxes.len() * c * size * size);
    for b in boxes {
        let (bh, bw) = ((b.y1 - b.y0) as usize, (b.x1 - b.x0) as usize);
        for ch in 0..c {
            let plane = &image.data()[ch * h * w..(ch + 1) * h * w];
            // Sample inside the box only: build the box sub-plane first.
            let sub: Vec<f64> = (b.y0 as usize..b.y1 as usize)
                .flat_map(|y| (b.x0 as usize..b.x1 as usize).map(move |x| plane[y * w + x]))
                .collect();
            for i in 0..size {
                for j in 0..size {
                    out.push(sample_plane(&sub, bh, bw, centre_map(i, size, bh), centre_map(j, size, bw)));
                }
            }
        }
    }
    out
}

/// Brute-force Delaunay edges: a pair is an edge when some third point
/// forms a triangle with an empty circumcircle, or, for collinear or
/// tiny sets, when no other point lies on the segment between them.
pub fn delaunay_oracle(p: &[(f64, f64)]) -> std::collections::BTreeSet<(usize, usize)> {
    let n = p.len();
    let mut edges = std::collections::BTreeSet::new();
    let mut any_triangle = false;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (p[i], p[j], p[k]);
                let det = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
                if det.abs() < 1e-12 {
                    continue;
                }
                let empty = (0..n).filter(|&m| m != i && m != j && m != k).all(|m| !in_circumcircle(a, b, c, p[m]));
                if empty {
                    any_triangle = true;
                    edges.insert((i, j));
                    edges.insert((i, k));
                    edges.insert((j, k));
                }
            }
        }
    }
    if !any_triangle {
        for i in 0..n {
            for j in i + 1..n {
                let blocked = (0..n).filter(|&m| m != i && m != j).any(|m| on_segment(p[i], p[j], p[m]));
                if !blocked {
                    edges.insert((i, j));
                }
            }
        }
    }
    edges
}

fn in_circumcircle(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let orient = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
    let m = |q: (f64, f64)| (q.0 - d.0, q.1 - d.1, (q.0 - d.0).powi(2) + (q.1 - d.1).powi(2));
    let (ax, ay, aa) = m(a);
    let (bx, by, bb) = m(b);
    let (cx, cy, cc) = m(c);
    let det = ax * (by * cc - bb * cy) - ay * (bx * cc - bb * cx) + aa * (bx * cy - by * cx);
    if orient > 0.0 {
        det > 1e-9
    } else {
        det < -1e-9
    }
}

fn on_segment(a: (f64, f64), b: (f64, f64), q: (f64, f64)) -> bool {
    let cross = (b.0 - a.0) * (q.1 - a.1) - (b.1 - a.1) * (q.0 - a.0);
    let dot = (q.0 - a.0) * (b.0 - a.0) + (q.1 - a.1) * (b.1 - a.1);
    let len = (b.0 - a.0).powi(2) + (b.1 - a.1).powi(2);
    cross.abs() < 1e-9 && dot > 0.0 && dot < len
}

/// Closed-form Fréchet distance between two Gaussians with diagonal
/// covariances.
pub fn frechet_diagonal(mu_a: &[f64], var_a: &[f64], mu_b: &[f64], var_b: &[f64]) -> f64 {
    let mean: f64 = mu_a.iter().zip(mu_b).map(|(a, b)| (a - b).powi(2)).sum();
    let cov: f64 = var_a.iter().zip(var_b).map(|(a, b)| a + b - 2.0 * (a * b).sqrt()).sum();
    mean + cov
}

/// Textbook Pearson from raw sums: `(n Sxy - Sx Sy) / sqrt((n Sxx - Sx^2)(n Syy - Sy^2))`.
pub fn pearson_textbook(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sx: f64 = x.iter().sum();
    let sy: f64 = y.iter().sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|a| a * a).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt()
}

