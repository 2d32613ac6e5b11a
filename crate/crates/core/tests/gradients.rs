use samseg_core::losses::object_consistency_loss;
use samseg_core::model::gradcheck::{gradcheck, GradKind, GradcheckConfig};
use samseg_core::{softmax, ObjectGrid, RealGrid};

#[test]
fn every_loss_kind_within_tolerance() {
    for kind in GradKind::ALL {
        for seed in [0, 1] {
            let report = gradcheck(&GradcheckConfig {
                kind,
                seed,
                instances: 20,
                ..GradcheckConfig::default()
            })
            .unwrap();
            assert!(report.max_rel_error <= 1e-4, "{kind} seed {seed}: {}", report.to_text());
        }
    }
}

#[test]
fn object_gradient_on_four_objects() {
    let (h, w, c) = (8, 8, 3);
    let scores: Vec<f64> = (0..h * w * c).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.3).collect();
    let probs = softmax(&RealGrid::new(h, w, c, scores).unwrap()).unwrap();
    // four 3x3 quadrant blocks separated by a zero cross
    let sgo: Vec<u16> = (0..h * w)
        .map(|i| {
            let (y, x) = (i / w, i % w);
            match (y, x) {
                (0..=2, 0..=2) => 1,
                (0..=2, 4..=6) => 2,
                (4..=6, 0..=2) => 3,
                (4..=6, 4..=6) => 4,
                _ => 0,
            }
        })
        .collect();
    let sgo = ObjectGrid::new(h, w, sgo).unwrap();
    let analytic = object_consistency_loss(&probs, &sgo).unwrap().grad;
    let eps = 1e-6;
    let mut shifted = probs.as_real().clone();
    for i in 0..h * w * c {
        let orig = shifted.data()[i];
        shifted.data_mut()[i] = orig + eps;
        let up = object_consistency_loss(&samseg_core::ProbGrid::new_unchecked(shifted.clone()), &sgo)
            .unwrap()
            .value;
        shifted.data_mut()[i] = orig - eps;
        let down = object_consistency_loss(&samseg_core::ProbGrid::new_unchecked(shifted.clone()), &sgo)
            .unwrap()
            .value;
        shifted.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic.data()[i];
        assert!(
            (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4) <= 1e-4,
            "{i}: {a} vs {numeric}"
        );
        if sgo.data()[i / c] == 0 {
            assert_eq!(a, 0.0);
        }
    }
}
