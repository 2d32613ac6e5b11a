mod oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use samseg_core::{ConfusionMatrix, LabelGrid};

#[test]
fn matches_pixel_scan_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let classes = rng.random_range(2..=7);
        let ignore = if rng.random_bool(0.5) { Some(255) } else { None };
        let pred: Vec<u16> = (0..32 * 32).map(|_| rng.random_range(0..classes as u16)).collect();
        let gt: Vec<u16> = (0..32 * 32)
            .map(|_| {
                if ignore.is_some() && rng.random_bool(0.1) {
                    255
                } else {
                    rng.random_range(0..classes as u16)
                }
            })
            .collect();
        let mut cm = ConfusionMatrix::new(classes);
        cm.accumulate(
            &LabelGrid::new(32, 32, pred.clone()).unwrap(),
            &LabelGrid::new(32, 32, gt.clone()).unwrap().with_ignore(ignore),
        )
        .unwrap();
        let want = oracle::class_counts(&pred, &gt, classes, ignore);
        for (c, &(tp, fp, fneg)) in want.iter().enumerate() {
            assert_eq!(cm.tp_fp_fn(c), (tp, fp, fneg));
            let (f1, iou) = cm.class_scores(c);
            let (of1, oiou) = oracle::f1_iou(tp, fp, fneg);
            assert_eq!(f1.to_bits(), of1.to_bits());
            assert_eq!(iou.to_bits(), oiou.to_bits());
            assert!(iou <= f1);
        }
        let all: Vec<usize> = (0..classes).collect();
        let report = cm.mean_scores(&all).unwrap();
        let mean = want.iter().map(|&(a, b, c)| oracle::f1_iou(a, b, c).1).sum::<f64>() / classes as f64;
        assert!((report.mean_iou - mean).abs() <= 1e-15);
    }
}

#[test]
fn fifty_ten_ten_case() {
    // class 1: 50 hits, 10 false alarms, 10 misses; the rest is class 0
    let mut pred = vec![0u16; 100];
    let mut gt = vec![0u16; 100];
    pred[..60].fill(1);
    gt[..50].fill(1);
    gt[60..70].fill(1);
    let mut cm = ConfusionMatrix::new(2);
    cm.accumulate(
        &LabelGrid::new(10, 10, pred).unwrap(),
        &LabelGrid::new(10, 10, gt).unwrap(),
    )
    .unwrap();
    assert_eq!(cm.tp_fp_fn(1), (50, 10, 10));
    let (f1, iou) = cm.class_scores(1);
    assert!((f1 - 0.83333).abs() <= 1e-5);
    assert!((iou - 0.71429).abs() <= 1e-5);
}

#[test]
fn relabelling_permutes_scores() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let classes = 5;
    let pred: Vec<u16> = (0..256).map(|_| rng.random_range(0..classes)).collect();
    let gt: Vec<u16> = (0..256).map(|_| rng.random_range(0..classes)).collect();
    let perm = [3u16, 0, 4, 1, 2];
    let score = |p: &[u16], g: &[u16]| {
        let mut cm = ConfusionMatrix::new(classes as usize);
        cm.accumulate(
            &LabelGrid::new(16, 16, p.to_vec()).unwrap(),
            &LabelGrid::new(16, 16, g.to_vec()).unwrap(),
        )
        .unwrap();
        cm
    };
    let a = score(&pred, &gt);
    let pp: Vec<u16> = pred.iter().map(|&v| perm[v as usize]).collect();
    let gp: Vec<u16> = gt.iter().map(|&v| perm[v as usize]).collect();
    let b = score(&pp, &gp);
    for (c, &to) in perm.iter().enumerate() {
        assert_eq!(a.class_scores(c), b.class_scores(to as usize));
    }
}
