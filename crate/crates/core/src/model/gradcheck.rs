//! Finite-difference verification of the analytic gradients.
//!
//! Loss kinds are checked with respect to the probabilities, `EndToEnd`
//! with respect to every network parameter. Random instances whose pooling
//! windows, channel maxima or rectifier inputs sit within a small margin of
//! a tie are redrawn, since the losses are only piecewise smooth there.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{backward, LayerShape, ToyFcn};
use crate::grids::{softmax, BoundaryGrid, LabelGrid, ObjectGrid, ProbGrid, RealGrid};
use crate::losses::{
    boundary_loss, object_consistency_loss, seg_loss, soft_boundary, total_loss, BoundaryParams, LossResult,
    LossWeights,
};
use crate::mask_prep::{generate_sgo_sgb, MaskArchive, PrepParams, RleMask};

/// Denominator floor of the relative error, so entries whose true gradient
/// is zero are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradKind {
    Seg,
    Obj,
    Bdy,
    Total,
    EndToEnd,
}

impl GradKind {
    pub const ALL: [GradKind; 5] = [
        GradKind::Seg,
        GradKind::Obj,
        GradKind::Bdy,
        GradKind::Total,
        GradKind::EndToEnd,
    ];
}

impl fmt::Display for GradKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradKind::Seg => "seg",
            GradKind::Obj => "obj",
            GradKind::Bdy => "bdy",
            GradKind::Total => "total",
            GradKind::EndToEnd => "end-to-end",
        })
    }
}

impl FromStr for GradKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "seg" => Ok(GradKind::Seg),
            "obj" => Ok(GradKind::Obj),
            "bdy" => Ok(GradKind::Bdy),
            "total" => Ok(GradKind::Total),
            "end-to-end" | "e2e" => Ok(GradKind::EndToEnd),
            other => Err(format!(
                "unknown loss kind {other:?}; expected seg, obj, bdy, total or end-to-end"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    pub kind: GradKind,
    pub seed: u64,
    pub eps: f64,
    pub instances: usize,
    pub weights: LossWeights,
    pub boundary: BoundaryParams,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            kind: GradKind::Total,
            seed: 0,
            eps: 1e-6,
            instances: 20,
            weights: LossWeights::default(),
            boundary: BoundaryParams::default(),
        }
    }
}

/// Probabilities and targets of one loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub probs: ProbGrid,
    pub labels: LabelGrid,
    pub sgo: ObjectGrid,
    pub sgb: BoundaryGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Worst {
    pub error: f64,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub kind: GradKind,
    pub instances: usize,
    pub max_rel_error: f64,
    pub worst_instance: usize,
    pub worst: Worst,
}

impl GradcheckReport {
    pub fn to_text(&self) -> String {
        format!(
            "kind = {}\ninstances = {}\nmax_rel_error = {:e}\nworst_instance = {}\nworst_index = {}\nanalytic = {:e}\nnumeric = {:e}\n",
            self.kind,
            self.instances,
            self.max_rel_error,
            self.worst_instance,
            self.worst.index,
            self.worst.analytic,
            self.worst.numeric
        )
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn window_gap(values: &[f64], height: usize, width: usize, window: usize, skip_zero_top: bool) -> f64 {
    let r = window / 2;
    let mut gap = f64::INFINITY;
    for y in 0..height {
        for x in 0..width {
            let (mut top, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for yy in y.saturating_sub(r)..(y + r + 1).min(height) {
                for xx in x.saturating_sub(r)..(x + r + 1).min(width) {
                    let v = values[yy * width + xx];
                    if v > top {
                        second = top;
                        top = v;
                    } else if v > second {
                        second = v;
                    }
                }
            }
            if second == f64::NEG_INFINITY || (skip_zero_top && top == 0.0) {
                continue;
            }
            gap = gap.min(top - second);
        }
    }
    gap
}

/// Smallest distance to a tie in any max operation of the boundary loss.
pub fn boundary_tie_gap(probs: &ProbGrid, params: &BoundaryParams) -> f64 {
    let (h, w, c) = probs.shape();
    let mut gap = f64::INFINITY;
    let mut per_channel = Vec::with_capacity(c);
    for k in 0..c {
        let inv: Vec<f64> = probs.channel_plane(k).iter().map(|p| 1.0 - p).collect();
        gap = gap.min(window_gap(&inv, h, w, params.theta0, false));
        per_channel.push(soft_boundary(&probs.channel_plane(k), h, w, params.theta0));
    }
    let mut merged = vec![0.0; h * w];
    for (i, m) in merged.iter_mut().enumerate() {
        let mut vals: Vec<f64> = per_channel.iter().map(|b| b[i]).collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        *m = vals[0];
        if vals[0] > 0.0 && vals.len() > 1 {
            gap = gap.min(vals[0] - vals[1]);
        }
    }
    gap.min(window_gap(&merged, h, w, params.theta, true))
}

fn random_objects<R: Rng>(rng: &mut R, h: usize, w: usize) -> (ObjectGrid, BoundaryGrid) {
    let count = rng.random_range(0..=5);
    let masks = (0..count)
        .map(|_| {
            let (y0, x0) = (rng.random_range(0..h - 1), rng.random_range(0..w - 1));
            let (y1, x1) = (rng.random_range(y0 + 1..=h), rng.random_range(x0 + 1..=w));
            let bits: Vec<bool> = (0..h * w)
                .map(|i| (y0..y1).contains(&(i / w)) && (x0..x1).contains(&(i % w)))
                .collect();
            RleMask::from_bitmap(&bits)
        })
        .collect();
    let archive = MaskArchive {
        height: h,
        width: w,
        segmenter: None,
        masks,
    };
    let params = PrepParams {
        max_objects: 5,
        min_pixels: 1,
    };
    generate_sgo_sgb(&archive, &params).expect("valid random archive")
}

fn random_targets<R: Rng>(rng: &mut R, h: usize, w: usize, c: usize) -> (LabelGrid, ObjectGrid, BoundaryGrid) {
    let labels =
        LabelGrid::new(h, w, (0..h * w).map(|_| rng.random_range(0..c) as u16).collect()).expect("sized labels");
    let (sgo, sgb) = random_objects(rng, h, w);
    (labels, sgo, sgb)
}

/// Random grid of at most 8x8x4 with up to five objects, redrawn until every
/// max in the boundary loss is separated by more than `margin`.
pub fn random_instance<R: Rng>(rng: &mut R, params: &BoundaryParams, margin: f64) -> Instance {
    let normal = Normal::new(0.0, 1.5).expect("valid normal");
    loop {
        let (h, w, c) = (
            rng.random_range(4..=8),
            rng.random_range(4..=8),
            rng.random_range(2..=4),
        );
        let scores: Vec<f64> = (0..h * w * c).map(|_| normal.sample(rng)).collect();
        let probs = softmax(&RealGrid::new(h, w, c, scores).expect("sized scores")).expect("finite scores");
        let (labels, sgo, sgb) = random_targets(rng, h, w, c);
        if boundary_tie_gap(&probs, params) > margin {
            return Instance {
                probs,
                labels,
                sgo,
                sgb,
            };
        }
    }
}

fn loss_of(
    kind: GradKind,
    inst: &Instance,
    probs: &ProbGrid,
    weights: LossWeights,
    params: &BoundaryParams,
) -> Result<LossResult, crate::Error> {
    Ok(match kind {
        GradKind::Seg => seg_loss(probs, &inst.labels)?,
        GradKind::Obj => object_consistency_loss(probs, &inst.sgo)?,
        GradKind::Bdy => boundary_loss(probs, &inst.sgb, params)?,
        GradKind::Total | GradKind::EndToEnd => {
            total_loss(probs, &inst.labels, &inst.sgo, &inst.sgb, weights, params)?.total
        }
    })
}

fn worst_of(analytic: &[f64], numeric: &[f64]) -> Worst {
    let mut worst = Worst {
        error: 0.0,
        index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        let e = relative_error(a, n);
        if e > worst.error || e.is_nan() {
            worst = Worst {
                error: e,
                index: i,
                analytic: a,
                numeric: n,
            };
        }
    }
    worst
}

/// Compares `dL/dP` against central differences on one instance.
pub fn check_probs(
    kind: GradKind,
    inst: &Instance,
    eps: f64,
    weights: LossWeights,
    params: &BoundaryParams,
) -> Result<Worst, crate::Error> {
    let analytic = loss_of(kind, inst, &inst.probs, weights, params)?.grad;
    let mut numeric = vec![0.0; analytic.data().len()];
    let mut shifted = inst.probs.as_real().clone();
    for (i, slot) in numeric.iter_mut().enumerate() {
        let orig = shifted.data()[i];
        shifted.data_mut()[i] = orig + eps;
        let up = loss_of(kind, inst, &ProbGrid::new_unchecked(shifted.clone()), weights, params)?.value;
        shifted.data_mut()[i] = orig - eps;
        let down = loss_of(kind, inst, &ProbGrid::new_unchecked(shifted.clone()), weights, params)?.value;
        shifted.data_mut()[i] = orig;
        *slot = (up - down) / (2.0 * eps);
    }
    Ok(worst_of(analytic.data(), &numeric))
}

/// Network, input tile and targets of one end-to-end check.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInstance {
    pub model: ToyFcn,
    pub image: RealGrid,
    pub targets: Instance,
}

/// Two-layer network on a 6x6 two-channel tile with three classes, redrawn
/// until rectifier inputs and boundary maxima clear `margin`.
pub fn random_net_instance<R: Rng>(rng: &mut R, params: &BoundaryParams, margin: f64) -> NetInstance {
    let (h, w, cin, hidden, c) = (6, 6, 2, 4, 3);
    loop {
        let layers: Vec<LayerShape> = ToyFcn::architecture(cin, hidden, c, 2);
        let mut model = ToyFcn::init(layers, rng).expect("valid architecture");
        // nonzero biases so every parameter matters
        let n = model.params().len();
        for i in 0..n {
            if model.params()[i] == 0.0 {
                model.params_mut()[i] = rng.random_range(-0.5..0.5);
            }
        }
        let image = RealGrid::new(
            h,
            w,
            cin,
            (0..h * w * cin).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
        .expect("sized image");
        let (labels, sgo, sgb) = random_targets(rng, h, w, c);
        let fwd = model.forward(&image).expect("matching channels");
        let relu_gap = fwd.pre_activations()[0]
            .data()
            .iter()
            .fold(f64::INFINITY, |m, z| m.min(z.abs()));
        if relu_gap > margin && boundary_tie_gap(fwd.probs(), params) > margin {
            return NetInstance {
                model,
                image,
                targets: Instance {
                    probs: fwd.probs().clone(),
                    labels,
                    sgo,
                    sgb,
                },
            };
        }
    }
}

/// Compares parameter gradients of the total loss against central
/// differences.
pub fn check_params(
    inst: &NetInstance,
    eps: f64,
    weights: LossWeights,
    params: &BoundaryParams,
) -> Result<Worst, crate::Error> {
    let t = &inst.targets;
    let fwd = inst.model.forward(&inst.image)?;
    let loss = total_loss(fwd.probs(), &t.labels, &t.sgo, &t.sgb, weights, params)?;
    let analytic = backward(&inst.model, &fwd, &loss.total.grad)?;
    let mut model = inst.model.clone();
    let mut numeric = vec![0.0; analytic.len()];
    for (i, slot) in numeric.iter_mut().enumerate() {
        let orig = model.params()[i];
        model.params_mut()[i] = orig + eps;
        let fwd = model.forward(&inst.image)?;
        let up = total_loss(fwd.probs(), &t.labels, &t.sgo, &t.sgb, weights, params)?
            .total
            .value;
        model.params_mut()[i] = orig - eps;
        let fwd = model.forward(&inst.image)?;
        let down = total_loss(fwd.probs(), &t.labels, &t.sgo, &t.sgb, weights, params)?
            .total
            .value;
        model.params_mut()[i] = orig;
        *slot = (up - down) / (2.0 * eps);
    }
    Ok(worst_of(&analytic, &numeric))
}

/// Largest accepted finite-difference step.
pub const MAX_EPS: f64 = 1e-4;

/// Runs `instances` seeded random checks and reports the worst element.
pub fn gradcheck(cfg: &GradcheckConfig) -> Result<GradcheckReport, crate::Error> {
    // larger steps push the tie margin beyond what random instances reach
    if !(cfg.eps > 0.0 && cfg.eps <= MAX_EPS) {
        return Err(crate::Error::InvalidArgument(format!(
            "eps must be in (0, {MAX_EPS}], got {}",
            cfg.eps
        )));
    }
    cfg.boundary.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradcheckReport {
        kind: cfg.kind,
        instances: cfg.instances,
        max_rel_error: 0.0,
        worst_instance: 0,
        worst: Worst {
            error: 0.0,
            index: 0,
            analytic: 0.0,
            numeric: 0.0,
        },
    };
    let margin = (10.0 * cfg.eps).max(1e-5);
    for n in 0..cfg.instances {
        let worst = if cfg.kind == GradKind::EndToEnd {
            let inst = random_net_instance(&mut rng, &cfg.boundary, 10.0 * margin);
            check_params(&inst, cfg.eps, cfg.weights, &cfg.boundary)?
        } else {
            let inst = random_instance(&mut rng, &cfg.boundary, margin);
            check_probs(cfg.kind, &inst, cfg.eps, cfg.weights, &cfg.boundary)?
        };
        if n == 0 || worst.error > report.max_rel_error || worst.error.is_nan() {
            report.max_rel_error = worst.error;
            report.worst_instance = n;
            report.worst = worst;
        }
    }
    Ok(report)
}
