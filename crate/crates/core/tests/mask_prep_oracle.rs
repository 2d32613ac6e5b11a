mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use samseg_core::mask_prep::{decode_archive, exterior_boundary, generate_sgo_sgb, MaskArchive, PrepParams, RleMask};

fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Vec<bool> {
    match rng.random_range(0..3) {
        0 => {
            let (y0, x0) = (rng.random_range(0..h), rng.random_range(0..w));
            let (y1, x1) = (rng.random_range(y0 + 1..=h), rng.random_range(x0 + 1..=w));
            (0..h * w)
                .map(|i| (y0..y1).contains(&(i / w)) && (x0..x1).contains(&(i % w)))
                .collect()
        }
        1 => {
            let (cy, cx) = (rng.random_range(0..h) as f64, rng.random_range(0..w) as f64);
            let (ry, rx) = (rng.random_range(0.5..=h as f64), rng.random_range(0.5..=w as f64));
            (0..h * w)
                .map(|i| {
                    let (dy, dx) = (((i / w) as f64 - cy) / ry, ((i % w) as f64 - cx) / rx);
                    dy * dy + dx * dx <= 1.0
                })
                .collect()
        }
        _ => {
            let density = rng.random_range(0.05..0.9);
            (0..h * w).map(|_| rng.random_bool(density)).collect()
        }
    }
}

#[test]
fn matches_brute_force_on_random_archives() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let (h, w) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let count = rng.random_range(0..=10);
        let masks: Vec<Vec<bool>> = (0..count)
            .map(|_| random_mask(&mut rng, h, w))
            .filter(|m| m.iter().any(|&b| b))
            .collect();
        let params = PrepParams {
            max_objects: rng.random_range(1..=12),
            min_pixels: rng.random_range(0..=60),
        };
        let archive = MaskArchive {
            height: h,
            width: w,
            segmenter: None,
            masks: masks.iter().map(|m| RleMask::from_bitmap(m)).collect(),
        };
        let archive = decode_archive(&archive.to_json()).unwrap();
        let (sgo, sgb) = generate_sgo_sgb(&archive, &params).unwrap();
        let (want_sgo, want_sgb) = oracle::sgo_sgb(h, w, &masks, params.max_objects, params.min_pixels);
        assert_eq!(sgo.data(), &want_sgo[..], "case {case}");
        assert_eq!(sgb.data(), &want_sgb[..], "case {case}");

        assert!(usize::from(sgo.max_id()) <= params.max_objects);
        assert!(sgo.is_compact());
        for (&o, &b) in sgo.data().iter().zip(sgb.data()) {
            assert!(b == 0 || b == 255);
            assert!(!(o > 0 && b == 255));
        }
        // every surviving object comes from a mask of at least S pixels
        for id in 1..=sgo.max_id() {
            let pixels: Vec<usize> = (0..h * w).filter(|&i| sgo.data()[i] == id).collect();
            assert!(masks
                .iter()
                .any(|m| m.iter().filter(|&&b| b).count() >= params.min_pixels && pixels.iter().all(|&i| m[i])));
        }
    }
}

#[test]
fn published_thresholds_cap_objects_at_fifty() {
    // 52 separated 3x3 blocks, each with an interior pixel
    let (h, w) = (4 * 7, 4 * 8);
    let mut masks = Vec::new();
    for by in 0..7 {
        for bx in 0..8 {
            if masks.len() == 52 {
                break;
            }
            let mut m = vec![false; h * w];
            for y in 0..3 {
                for x in 0..3 {
                    m[(by * 4 + y) * w + bx * 4 + x] = true;
                }
            }
            masks.push(m);
        }
    }
    let archive = MaskArchive {
        height: h,
        width: w,
        segmenter: None,
        masks: masks.iter().map(|m| RleMask::from_bitmap(m)).collect(),
    };
    let params = PrepParams {
        max_objects: 50,
        min_pixels: 0,
    };
    let (sgo, _) = generate_sgo_sgb(&archive, &params).unwrap();
    assert_eq!(sgo.max_id(), 50);
    assert_eq!(sgo.object_sizes().iter().skip(1).filter(|&&n| n > 0).count(), 50);
}

#[test]
fn exterior_boundary_matches_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let (h, w) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let mask = random_mask(&mut rng, h, w);
        let archive_like = vec![mask.clone()];
        let (_, sgb) = oracle::sgo_sgb(h, w, &archive_like, 1, 0);
        let got = exterior_boundary(&mask, h, w);
        let want: Vec<bool> = sgb.iter().map(|&b| b == 255).collect();
        assert_eq!(got, want);
    }
}
