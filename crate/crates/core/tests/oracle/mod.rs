//! Slow reference implementations written directly from the definitions,
//! with plain nested loops and no shared code with the library.

#![allow(dead_code, clippy::too_many_arguments, clippy::needless_range_loop)]

/// Object and boundary maps by filtering, sorting, painting and a per-pixel
/// 4-neighbour scan.
pub fn sgo_sgb(h: usize, w: usize, masks: &[Vec<bool>], max_objects: usize, min_pixels: usize) -> (Vec<u16>, Vec<u8>) {
    let area = |m: &Vec<bool>| m.iter().filter(|&&b| b).count();
    let mut order: Vec<usize> = (0..masks.len()).filter(|&i| area(&masks[i]) >= min_pixels).collect();
    // stable: equal areas keep archive order
    order.sort_by(|&a, &b| area(&masks[b]).cmp(&area(&masks[a])));
    order.truncate(max_objects);

    let mut grid = vec![vec![0u16; w]; h];
    for (n, &m) in order.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                if masks[m][y * w + x] {
                    grid[y][x] = (n + 1) as u16;
                }
            }
        }
    }

    let mut edge = vec![vec![false; w]; h];
    for y in 0..h {
        for x in 0..w {
            let id = grid[y][x];
            if id == 0 {
                continue;
            }
            let neighbours = [
                (y as i64 - 1, x as i64),
                (y as i64 + 1, x as i64),
                (y as i64, x as i64 - 1),
                (y as i64, x as i64 + 1),
            ];
            for (ny, nx) in neighbours {
                if ny < 0 || nx < 0 || ny >= h as i64 || nx >= w as i64 || grid[ny as usize][nx as usize] != id {
                    edge[y][x] = true;
                }
            }
        }
    }

    let mut sgo = vec![0u16; h * w];
    let mut sgb = vec![0u8; h * w];
    for y in 0..h {
        for x in 0..w {
            if edge[y][x] {
                sgb[y * w + x] = 255;
            } else {
                sgo[y * w + x] = grid[y][x];
            }
        }
    }
    // renumber surviving identifiers to 1..n in increasing order
    let mut present: Vec<u16> = sgo.iter().copied().filter(|&v| v > 0).collect();
    present.sort();
    present.dedup();
    for v in sgo.iter_mut() {
        if *v > 0 {
            *v = (present.iter().position(|&p| p == *v).unwrap() + 1) as u16;
        }
    }
    (sgo, sgb)
}

/// Object consistency value: per object, masked probabilities minus their
/// masked sum over (N + 1), squared and averaged over all H*W*C elements.
pub fn object_loss(p: &[f64], h: usize, w: usize, c: usize, sgo: &[u16]) -> f64 {
    let max_id = sgo.iter().copied().max().unwrap_or(0);
    let mut total = 0.0;
    for id in 1..=max_id {
        let mask: Vec<f64> = sgo.iter().map(|&v| if v == id { 1.0 } else { 0.0 }).collect();
        let n: f64 = mask.iter().sum();
        if n == 0.0 {
            continue;
        }
        let mut f_o = vec![0.0; h * w * c];
        for i in 0..h * w {
            for k in 0..c {
                f_o[i * c + k] = p[i * c + k] * mask[i];
            }
        }
        let mut sums = vec![0.0; c];
        for i in 0..h * w {
            for k in 0..c {
                sums[k] += f_o[i * c + k];
            }
        }
        let mut squared = 0.0;
        for i in 0..h * w {
            for k in 0..c {
                let f_avg = sums[k] / (n + 1.0) * mask[i];
                squared += (f_o[i * c + k] - f_avg).powi(2);
            }
        }
        total += squared / (h * w * c) as f64;
    }
    total
}

/// Max pooling with an odd `k x k` window and edge replication.
pub fn max_pool(v: &[f64], h: usize, w: usize, k: usize) -> Vec<f64> {
    let r = (k / 2) as i64;
    let mut out = vec![0.0; h * w];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut best = f64::NEG_INFINITY;
            for dy in -r..=r {
                for dx in -r..=r {
                    let yy = (y + dy).clamp(0, h as i64 - 1) as usize;
                    let xx = (x + dx).clamp(0, w as i64 - 1) as usize;
                    best = best.max(v[yy * w + xx]);
                }
            }
            out[y as usize * w + x as usize] = best;
        }
    }
    out
}

pub fn soft_boundary(y: &[f64], h: usize, w: usize, theta0: usize) -> Vec<f64> {
    let inv: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
    let pooled = max_pool(&inv, h, w, theta0);
    pooled.iter().zip(&inv).map(|(a, b)| a - b).collect()
}

/// Boundary precision, recall and F1 of probabilities `p` (H*W*C) against a
/// 0/1 boundary map `g`.
pub fn bf1(
    p: &[f64],
    h: usize,
    w: usize,
    c: usize,
    g: &[f64],
    theta0: usize,
    theta: usize,
    eps: f64,
) -> (f64, f64, f64) {
    let mut pred = vec![0.0f64; h * w];
    for k in 0..c {
        let plane: Vec<f64> = (0..h * w).map(|i| p[i * c + k]).collect();
        let b = soft_boundary(&plane, h, w, theta0);
        for i in 0..h * w {
            pred[i] = pred[i].max(b[i]);
        }
    }
    bf1_maps(&pred, g, h, w, theta, eps)
}

/// Boundary precision, recall and F1 of a predicted boundary map against a
/// ground-truth one.
pub fn bf1_maps(pred: &[f64], g: &[f64], h: usize, w: usize, theta: usize, eps: f64) -> (f64, f64, f64) {
    let pred_ext = max_pool(pred, h, w, theta);
    let g_ext = max_pool(g, h, w, theta);
    let mut num_p = 0.0;
    let mut num_r = 0.0;
    let mut sum_pred = 0.0;
    let mut sum_g = 0.0;
    for i in 0..h * w {
        num_p += pred[i] * g_ext[i];
        num_r += pred_ext[i] * g[i];
        sum_pred += pred[i];
        sum_g += g[i];
    }
    let precision = num_p / (sum_pred + eps);
    let recall = num_r / (sum_g + eps);
    let f1 = 2.0 * precision * recall / (precision + recall + eps);
    (precision, recall, f1)
}

/// Per-class (tp, fp, fn) by scanning pixel pairs; gt pixels equal to
/// `ignore` are skipped.
pub fn class_counts(pred: &[u16], gt: &[u16], classes: usize, ignore: Option<u16>) -> Vec<(u64, u64, u64)> {
    let mut out = vec![(0, 0, 0); classes];
    for c in 0..classes {
        let c16 = c as u16;
        for i in 0..pred.len() {
            if Some(gt[i]) == ignore {
                continue;
            }
            match (pred[i] == c16, gt[i] == c16) {
                (true, true) => out[c].0 += 1,
                (true, false) => out[c].1 += 1,
                (false, true) => out[c].2 += 1,
                (false, false) => {}
            }
        }
    }
    out
}

/// F1 and IoU from precision and recall, zero when undefined.
pub fn f1_iou(tp: u64, fp: u64, fneg: u64) -> (f64, f64) {
    let (tp, fp, fneg) = (tp as f64, fp as f64, fneg as f64);
    let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let r = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
    let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    let iou = if tp + fp + fneg > 0.0 {
        tp / (tp + fp + fneg)
    } else {
        0.0
    };
    (f1, iou)
}

/// Window corners along one axis: every multiple of the stride that fits,
/// plus the far edge when it is not already present.
pub fn axis_corners(n: usize, window: usize, stride: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 0;
    while p + window <= n {
        out.push(p);
        p += stride;
    }
    if *out.last().unwrap() != n - window {
        out.push(n - window);
    }
    out
}
