use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use samseg_core::config::parse_class_list;
use samseg_core::grids::{load_pnm, read_pgrd, save_pnm, write_pgrd};
use samseg_core::model::gradcheck::{gradcheck as run_gradcheck, GradKind, GradcheckConfig};
use samseg_core::model::synth::{synth_dataset, SynthConfig, PALETTE};
use samseg_core::model::{load_checkpoint, load_dataset, predict_image, save_checkpoint, save_dataset};
use samseg_core::{
    decode_archive, generate_sgo_sgb, total_loss, BoundaryGrid, BoundaryParams, ConfusionMatrix, LabelGrid,
    LossWeights, MetricProfile, ObjectGrid, PrepParams, RealGrid, RunConfig,
};

use crate::{EvaluateArgs, GradcheckArgs, LossesArgs, PredictArgs, PreprocessArgs, SynthArgs, TrainArgs};

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_config(path: Option<&PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunConfig::parse(&text).with_context(|| format!("in {}", p.display()))
        }
        None => Ok(RunConfig::default()),
    }
}

pub fn preprocess(a: &PreprocessArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&a.masks).with_context(|| format!("reading {}", a.masks.display()))?;
    let archive = decode_archive(&text).with_context(|| format!("in {}", a.masks.display()))?;
    let params = PrepParams {
        max_objects: a.max_objects,
        min_pixels: a.min_pixels,
    };
    let (sgo, sgb) = generate_sgo_sgb(&archive, &params)?;
    save_pnm(&a.out_sgo, &sgo).with_context(|| format!("writing {}", a.out_sgo.display()))?;
    save_pnm(&a.out_sgb, &sgb).with_context(|| format!("writing {}", a.out_sgb.display()))?;
    println!("objects = {}\nboundary_pixels = {}", sgo.max_id(), sgb.count());
    Ok(ExitCode::SUCCESS)
}

pub fn synth(a: &SynthArgs) -> Result<ExitCode> {
    let cfg = SynthConfig {
        height: a.height,
        width: a.width,
        classes: a.classes,
        shapes: a.shapes,
        noise: a.noise,
        corruption: a.corruption,
        prep: PrepParams {
            max_objects: a.max_objects,
            min_pixels: a.min_pixels,
        },
    };
    let (samples, archives) = synth_dataset(&cfg, a.count, a.seed)?;
    save_dataset(&a.out, &samples)?;
    let masks = a.out.join("masks");
    fs::create_dir_all(&masks).with_context(|| format!("creating {}", masks.display()))?;
    for (s, archive) in samples.iter().zip(&archives) {
        write_text(&masks.join(format!("{}.json", s.name)), &archive.to_json())?;
    }

    // desk-scale settings matched to the scene size
    let mut run = RunConfig::default();
    let window = 32.min(a.height).min(a.width);
    run.train.classes = a.classes;
    run.train.window = window;
    run.train.train_stride = window;
    run.train.test_stride = (window / 4).max(1);
    run.train.epochs = 10_000;
    run.train.max_steps = Some(200);
    run.train.seed = a.seed;
    run.prep = cfg.prep;
    run.include = (0..a.classes).collect();
    write_text(&a.out.join("run.cfg"), &run.to_text())?;
    println!("scenes = {}", samples.len());
    Ok(ExitCode::SUCCESS)
}

pub fn train(a: &TrainArgs) -> Result<ExitCode> {
    let mut run = read_config(a.config.as_ref())?;
    if let Some(seed) = a.seed {
        run.train.seed = seed;
    }
    let data = load_dataset(&a.data, run.ignore_label)?;
    let out = samseg_core::model::train(&run.train, &data)?;
    save_checkpoint(&a.out, &out.model)?;
    if let Some(trace) = &a.trace {
        write_text(trace, &out.trace_text())?;
    }
    if let Some(last) = out.trace.last() {
        println!(
            "steps = {}\n{}",
            out.trace.len(),
            format_losses(last.seg, last.obj, last.bdy, last.total)
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn label_colors(labels: &LabelGrid) -> Result<RealGrid> {
    let data = labels
        .data()
        .iter()
        .flat_map(|&l| PALETTE[l as usize % PALETTE.len()])
        .collect();
    Ok(RealGrid::new(labels.height(), labels.width(), 3, data)?)
}

pub fn predict(a: &PredictArgs) -> Result<ExitCode> {
    if a.out_prob.is_none() && a.out_label.is_none() && a.out_color.is_none() {
        bail!("nothing to write: pass --out-prob, --out-label or --out-color");
    }
    let model = load_checkpoint(&a.model)?;
    let image: RealGrid = load_pnm(&a.image).with_context(|| format!("reading {}", a.image.display()))?;
    let probs = predict_image(&model, &image, a.window, a.stride)?;
    if let Some(p) = &a.out_prob {
        write_pgrd(p, &probs).with_context(|| format!("writing {}", p.display()))?;
    }
    let labels = probs.argmax();
    if let Some(p) = &a.out_label {
        save_pnm(p, &labels).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.out_color {
        save_pnm(p, &label_colors(&labels)?).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn pgm_names(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "pgm") {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.push(name.to_string());
            }
        }
    }
    names.sort();
    if names.is_empty() {
        bail!("no .pgm files in {}", dir.display());
    }
    Ok(names)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<ExitCode> {
    let mut run = read_config(a.config.as_ref())?;
    run.train.classes = a.classes;
    run.include = parse_class_list(&a.include)
        .map_err(anyhow::Error::msg)
        .context("--include")?;
    run.ignore_label = a.ignore_label;
    run.validate()?;

    let mut cm = ConfusionMatrix::new(a.classes);
    for name in pgm_names(&a.gt_dir)? {
        let gt_path = a.gt_dir.join(&name);
        let pred_path = a.pred_dir.join(&name);
        if !pred_path.is_file() {
            bail!("no prediction {} for {}", pred_path.display(), gt_path.display());
        }
        let gt: LabelGrid = load_pnm(&gt_path).with_context(|| format!("reading {}", gt_path.display()))?;
        let pred: LabelGrid = load_pnm(&pred_path).with_context(|| format!("reading {}", pred_path.display()))?;
        cm.accumulate(&pred, &gt.with_ignore(a.ignore_label))
            .with_context(|| format!("scoring {name}"))?;
    }
    let report = cm.mean_scores(&run.include)?;
    let profile = match a.classes {
        6 => Some(MetricProfile::vaihingen()),
        7 => Some(MetricProfile::loveda()),
        _ => None,
    };
    let names = profile.map(|p| p.names).unwrap_or_default();
    let text = format!("[config]\n{}{}", run.to_text(), report.to_text(&names));
    match &a.report {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn format_losses(seg: f64, obj: f64, bdy: f64, total: f64) -> String {
    format!("l_seg = {seg}\nl_obj = {obj}\nl_bdy = {bdy}\nl_total = {total}")
}

pub fn losses(a: &LossesArgs) -> Result<ExitCode> {
    let probs = read_pgrd(&a.pred).with_context(|| format!("reading {}", a.pred.display()))?;
    let gt: LabelGrid = load_pnm(&a.gt).with_context(|| format!("reading {}", a.gt.display()))?;
    let sgo: ObjectGrid = load_pnm(&a.sgo).with_context(|| format!("reading {}", a.sgo.display()))?;
    let sgb: BoundaryGrid = load_pnm(&a.sgb).with_context(|| format!("reading {}", a.sgb.display()))?;
    let weights = LossWeights {
        lambda_o: a.lambda_o,
        lambda_b: a.lambda_b,
    };
    let params = BoundaryParams {
        theta0: a.theta0,
        theta: a.theta,
        epsilon: a.epsilon,
    };
    let out = total_loss(&probs, &gt.with_ignore(a.ignore_label), &sgo, &sgb, weights, &params)?;
    println!("{}", format_losses(out.seg, out.obj, out.bdy, out.total.value));
    Ok(ExitCode::SUCCESS)
}

/// Largest accepted relative gradient error.
const GRADCHECK_TOLERANCE: f64 = 1e-4;

pub fn gradcheck(a: &GradcheckArgs) -> Result<ExitCode> {
    let kind: GradKind = a.loss.parse().map_err(anyhow::Error::msg)?;
    let report = run_gradcheck(&GradcheckConfig {
        kind,
        seed: a.seed,
        eps: a.eps,
        instances: a.instances,
        ..GradcheckConfig::default()
    })?;
    print!("{}", report.to_text());
    Ok(if report.max_rel_error <= GRADCHECK_TOLERANCE {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
