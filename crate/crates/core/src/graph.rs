//! Delaunay cell graph over layout locations.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::layout::CellularLayout;

/// Locations closer than this are treated as one point.
pub const MERGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    /// Euclidean distance between the two normalized locations.
    pub weight: f64,
}

/// Undirected graph over cell indices, edges sorted by `(a, b)` with `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellularGraph {
    pub nodes: usize,
    pub edges: Vec<GraphEdge>,
}

impl CellularGraph {
    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges.iter().map(|e| (e.a, e.b)).collect()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        adj
    }

    /// Row-normalized adjacency with self-loops, `[nodes, nodes]` row-major.
    /// Row `i` averages node `i` and its neighbours.
    pub fn mean_aggregation_matrix(&self) -> Vec<f64> {
        let n = self.nodes;
        let mut m = vec![0.0; n * n];
        for (i, nb) in self.neighbors().iter().enumerate() {
            let w = 1.0 / (nb.len() + 1) as f64;
            m[i * n + i] = w;
            for &j in nb {
                m[i * n + j] = w;
            }
        }
        m
    }
}

/// Delaunay triangulation of the cell locations.
///
/// Coincident locations are merged onto their first occurrence and joined to
/// it by a zero-weight edge; fully collinear inputs become a chain ordered
/// along the line.
pub fn delaunay_graph(layout: &CellularLayout) -> Result<CellularGraph> {
    let points: Vec<(f64, f64)> = layout.cells.iter().map(|c| (c.x, c.y)).collect();
    delaunay_points(&points)
}

pub fn delaunay_points(points: &[(f64, f64)]) -> Result<CellularGraph> {
    if points.is_empty() {
        return Err(Error::Geometry("cannot triangulate an empty layout".into()));
    }
    let mut unique: Vec<usize> = Vec::new();
    let mut alias: Vec<(usize, usize)> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        match unique.iter().find(|&&u| dist(points[u], *p) <= MERGE_EPS) {
            Some(&u) => alias.push((u, i)),
            None => unique.push(i),
        }
    }
    let upts: Vec<(f64, f64)> = unique.iter().map(|&i| points[i]).collect();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut add = |a: usize, b: usize| {
        edges.insert((a.min(b), a.max(b)));
    };
    if upts.len() == 2 {
        add(unique[0], unique[1]);
    } else if upts.len() > 2 {
        let local = if all_collinear(&upts) {
            chain_edges(&upts)
        } else {
            bowyer_watson(&upts)
        };
        for (a, b) in local {
            add(unique[a], unique[b]);
        }
    }
    for (u, i) in alias {
        add(u, i);
    }
    let edges = edges
        .into_iter()
        .map(|(a, b)| GraphEdge {
            a,
            b,
            weight: dist(points[a], points[b]),
        })
        .collect();
    Ok(CellularGraph {
        nodes: points.len(),
        edges,
    })
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn orient(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn all_collinear(p: &[(f64, f64)]) -> bool {
    let (lo, hi) = extent(p);
    let scale = (hi.0 - lo.0).max(hi.1 - lo.1).max(f64::MIN_POSITIVE);
    let a = p[0];
    let Some(&b) = p.iter().max_by(|x, y| dist(a, **x).total_cmp(&dist(a, **y))) else {
        return true;
    };
    p.iter()
        .all(|&c| orient(a, b, c).abs() <= 1e-12 * scale * scale)
}

fn extent(p: &[(f64, f64)]) -> ((f64, f64), (f64, f64)) {
    p.iter().fold(
        ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), &(x, y)| ((lo.0.min(x), lo.1.min(y)), (hi.0.max(x), hi.1.max(y))),
    )
}

fn chain_edges(p: &[(f64, f64)]) -> Vec<(usize, usize)> {
    let (lo, hi) = extent(p);
    let horizontal = hi.0 - lo.0 >= hi.1 - lo.1;
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&i, &j| {
        let key = |k: usize| if horizontal { (p[k].0, p[k].1) } else { (p[k].1, p[k].0) };
        key(i).partial_cmp(&key(j)).expect("finite locations")
    });
    order.windows(2).map(|w| (w[0], w[1])).collect()
}

/// True when `d` lies strictly inside the circumcircle of the
/// counter-clockwise triangle `(a, b, c)`.
fn in_circumcircle(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let (adx, ady) = (a.0 - d.0, a.1 - d.1);
    let (bdx, bdy) = (b.0 - d.0, b.1 - d.1);
    let (cdx, cdy) = (c.0 - d.0, c.1 - d.1);
    let det = (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        - (bdx * bdx + bdy * bdy) * (adx * cdy - cdx * ady)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady);
    det > 0.0
}

fn bowyer_watson(p: &[(f64, f64)]) -> Vec<(usize, usize)> {
    let n = p.len();
    let (lo, hi) = extent(p);
    let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-6);
    let mid = ((lo.0 + hi.0) / 2.0, (lo.1 + hi.1) / 2.0);
    let big = 1e3 * span;
    let mut pts = p.to_vec();
    pts.push((mid.0 - 2.0 * big, mid.1 - big));
    pts.push((mid.0 + 2.0 * big, mid.1 - big));
    pts.push((mid.0, mid.1 + 2.0 * big));
    let mut tris: Vec<[usize; 3]> = vec![ccw([n, n + 1, n + 2], &pts)];

    for i in 0..n {
        let q = pts[i];
        let (bad, keep): (Vec<[usize; 3]>, Vec<[usize; 3]>) = tris
            .into_iter()
            .partition(|t| in_circumcircle(pts[t[0]], pts[t[1]], pts[t[2]], q));
        let mut boundary: Vec<(usize, usize)> = Vec::new();
        for t in &bad {
            for e in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let shared = bad.iter().any(|o| o != t && has_edge(o, e));
                if !shared {
                    boundary.push(e);
                }
            }
        }
        tris = keep;
        for (a, b) in boundary {
            tris.push(ccw([a, b, i], &pts));
        }
    }

    let mut edges: HashSet<(usize, usize)> = HashSet::new();
    for t in &tris {
        if t.iter().any(|&v| v >= n) {
            continue;
        }
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    // Far super vertices can steal nearly collinear hull edges; restore them.
    for (a, b) in convex_hull_edges(p) {
        edges.insert((a.min(b), a.max(b)));
    }
    let mut out: Vec<_> = edges.into_iter().collect();
    out.sort_unstable();
    out
}

fn has_edge(t: &[usize; 3], (a, b): (usize, usize)) -> bool {
    t.contains(&a) && t.contains(&b)
}

fn ccw(t: [usize; 3], p: &[(f64, f64)]) -> [usize; 3] {
    if orient(p[t[0]], p[t[1]], p[t[2]]) < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

/// Monotone-chain hull, keeping collinear boundary points so consecutive hull
/// vertices are always adjacent in a triangulation.
fn convex_hull_edges(p: &[(f64, f64)]) -> Vec<(usize, usize)> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).expect("finite locations"));
    let build = |iter: &mut dyn Iterator<Item = usize>| {
        let mut chain: Vec<usize> = Vec::new();
        for i in iter {
            while chain.len() >= 2
                && orient(p[chain[chain.len() - 2]], p[chain[chain.len() - 1]], p[i]) < 0.0
            {
                chain.pop();
            }
            chain.push(i);
        }
        chain
    };
    let lower = build(&mut idx.iter().copied());
    let upper = build(&mut idx.iter().rev().copied());
    lower
        .windows(2)
        .chain(upper.windows(2))
        .map(|w| (w[0], w[1]))
        .collect()
}
