//! Shared fixtures for the criterion benchmarks.

use samseg_core::mask_prep::MaskArchive;
use samseg_core::model::synth::{synth_dataset, SynthConfig};
use samseg_core::model::{seeded_model, Sample};
use samseg_core::{ProbGrid, ToyFcn};

/// One synthetic `size x size` scene with its mask archive.
pub fn scene(size: usize, seed: u64) -> (Sample, MaskArchive) {
    let cfg = SynthConfig {
        height: size,
        width: size,
        shapes: (size / 8).max(6),
        ..SynthConfig::default()
    };
    let (mut samples, mut archives) = synth_dataset(&cfg, 1, seed).expect("valid synthetic config");
    (samples.remove(0), archives.remove(0))
}

/// Untrained 3-layer network over RGB input with `classes` outputs.
pub fn model(classes: usize) -> ToyFcn {
    seeded_model(ToyFcn::architecture(3, 8, classes, 3), 1).expect("valid architecture")
}

/// Scene plus the untrained network's probabilities for it.
pub fn loss_inputs(size: usize) -> (Sample, ProbGrid) {
    let (sample, _) = scene(size, 0);
    let probs = model(3).predict(&sample.image).expect("matching channels");
    (sample, probs)
}
