#![allow(clippy::needless_range_loop)]

mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use samseg_core::tiling::sliding_predict;
use samseg_core::{softmax, tile_positions, ProbGrid, RealGrid};

#[test]
fn positions_match_axis_scan() {
    for (n, window, stride) in [
        (64, 16, 4),
        (64, 16, 5),
        (300, 256, 256),
        (512, 256, 256),
        (17, 17, 3),
        (100, 30, 7),
    ] {
        let spec = tile_positions(n, n + 3, window, stride).unwrap();
        let rows = oracle::axis_corners(n, window, stride);
        let cols = oracle::axis_corners(n + 3, window, stride);
        let want: Vec<(usize, usize)> = rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).collect();
        assert_eq!(spec.positions, want);
    }
}

#[test]
fn stitched_probability_is_mean_over_covering_windows() {
    let (n, window, stride, c) = (64, 16, 4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let image = RealGrid::zeros(n, n, 1);
    let mut tiles: Vec<ProbGrid> = Vec::new();
    let out = sliding_predict(&image, window, stride, |_| {
        let scores = (0..window * window * c).map(|_| rng.random_range(-4.0..4.0)).collect();
        let p = softmax(&RealGrid::new(window, window, c, scores).unwrap()).unwrap();
        tiles.push(p.clone());
        Ok(p)
    })
    .unwrap();

    let positions = tile_positions(n, n, window, stride).unwrap().positions;
    assert_eq!(positions.len(), tiles.len());
    for y in 0..n {
        for x in 0..n {
            let mut sum = [0.0; 3];
            let mut count = 0.0;
            for (&(r, col), t) in positions.iter().zip(&tiles) {
                if (r..r + window).contains(&y) && (col..col + window).contains(&x) {
                    for k in 0..c {
                        sum[k] += t.get(y - r, x - col, k);
                    }
                    count += 1.0;
                }
            }
            for k in 0..c {
                let got = out.get(y, x, k);
                assert!(
                    (got - sum[k] / count).abs() <= 1e-12,
                    "({y},{x},{k}) {got} vs {}",
                    sum[k] / count
                );
            }
        }
    }
}

#[test]
fn constant_predictor_is_reproduced_exactly() {
    let probs = [0.2, 0.5, 0.3];
    for stride in [4, 8, 16] {
        let image = RealGrid::zeros(64, 64, 1);
        let out = sliding_predict(&image, 16, stride, |_| {
            let data = probs.iter().copied().cycle().take(16 * 16 * 3).collect();
            Ok(ProbGrid::new(RealGrid::new(16, 16, 3, data).unwrap()).unwrap())
        })
        .unwrap();
        for y in 0..64 {
            for x in 0..64 {
                for k in 0..3 {
                    assert_eq!(out.get(y, x, k), probs[k], "stride {stride}");
                }
            }
        }
    }
}
