//! Connected-component labeling with 8-connectivity.

/// Labels 8-connected regions of pixels that `same` considers joined.
/// Pixels with `foreground == false` get label 0; components are numbered
/// from 1 in raster order of their first pixel.
pub fn label_components<T: Copy>(
    values: &[T],
    width: usize,
    height: usize,
    foreground: impl Fn(T) -> bool,
    same: impl Fn(T, T) -> bool,
) -> (Vec<u32>, usize) {
    assert_eq!(values.len(), width * height, "mask size");
    let mut parent: Vec<u32> = vec![0];
    let mut labels = vec![0u32; values.len()];

    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }

    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let v = values[i];
            if !foreground(v) {
                continue;
            }
            // Already-visited neighbours: W, NW, N, NE.
            let mut best = 0u32;
            let neighbours = [
                (x > 0).then(|| i - 1),
                (x > 0 && y > 0).then(|| i - width - 1),
                (y > 0).then(|| i - width),
                (y > 0 && x + 1 < width).then(|| i - width + 1),
            ];
            for j in neighbours.into_iter().flatten() {
                if labels[j] == 0 || !same(v, values[j]) {
                    continue;
                }
                let r = find(&mut parent, labels[j]);
                if best == 0 {
                    best = r;
                } else if r != best {
                    let (lo, hi) = (best.min(r), best.max(r));
                    parent[hi as usize] = lo;
                    best = lo;
                }
            }
            if best == 0 {
                best = parent.len() as u32;
                parent.push(best);
            }
            labels[i] = best;
        }
    }

    let mut compact = vec![0u32; parent.len()];
    let mut next = 0u32;
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        let r = find(&mut parent, *l) as usize;
        if compact[r] == 0 {
            next += 1;
            compact[r] = next;
        }
        *l = compact[r];
    }
    (labels, next as usize)
}

/// Per-class component counts of a class mask (`0` is background), indexed
/// by `label - 1`.
pub fn class_component_counts(class_mask: &[u8], width: usize, height: usize, classes: usize) -> Vec<usize> {
    let (labels, n) = label_components(class_mask, width, height, |c| c != 0, |a, b| a == b);
    let mut class_of = vec![0u8; n + 1];
    for (l, &c) in labels.iter().zip(class_mask) {
        class_of[*l as usize] = c;
    }
    let mut counts = vec![0; classes];
    for &c in &class_of[1..] {
        if (1..=classes).contains(&(c as usize)) {
            counts[c as usize - 1] += 1;
        }
    }
    counts
}
