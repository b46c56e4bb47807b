use std::fs;
use std::path::{Path, PathBuf};

use grasp_core::gqcnn::{
    evaluate, load_checkpoint, roc_csv, save_checkpoint, train, training_log_csv, Checkpoint, EvalReport,
};
use grasp_core::grasp_image::{read_dataset, split_image_wise, DatasetManifest, GraspDataset};
use grasp_core::planner::{cem_plan, grasp_overlay, igq_baseline, plan_grasp, GqcnnScorer, PlanResult};
use grasp_core::render::{
    render_scene, table_depth, write_depth_image, CameraModel, DepthImage, RenderedImage, SceneState,
};
use grasp_core::rng;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::generate::{generate, list_meshes, prepare_object, sample_view, GenerateOutput};
use crate::report::RunManifest;
use crate::{CliError, CliResult, PipelineConfig};

pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const DATASET_DIR: &str = "dataset";

pub fn cmd_generate(cfg: &PipelineConfig, out: &Path) -> CliResult<GenerateOutput> {
    let mut run = RunManifest::new("generate", cfg.hash(), cfg.seed);
    let result = run.stage("generate", || generate(cfg, out))?;
    let m = &result.manifest;
    run.stat("records", m.num_records as f64);
    run.stat("positive_fraction", m.positive_fraction);
    run.stat("objects", result.objects.len() as f64);
    run.stat("failed_objects", result.failed.len() as f64);
    run.stat("dropped_off_frame", m.dropped_off_frame as f64);
    run.artifacts.push(out.join(DATASET_DIR));
    run.artifacts.push(out.join("objects"));
    run.write(out)?;
    log::info!(
        "dataset records={} positive_fraction={:.4} images={}",
        m.num_records,
        m.positive_fraction,
        m.num_images
    );
    Ok(result)
}

/// The stored split of a dataset, recomputed from its manifest.
pub fn dataset_split(dataset: &GraspDataset, m: &DatasetManifest) -> (Vec<usize>, Vec<usize>) {
    split_image_wise(&dataset.records, m.validation_fraction, m.split_seed)
}

fn load_dataset(dir: &Path) -> CliResult<(GraspDataset, DatasetManifest)> {
    if !dir.exists() {
        return Err(CliError::Missing(format!("dataset {} not found; run `grasp generate` first", dir.display())));
    }
    Ok(read_dataset(dir)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSummary {
    pub train_records: usize,
    pub validation_records: usize,
    pub parameters: usize,
    pub final_loss: f64,
    pub validation_accuracy: Option<f64>,
}

pub fn cmd_train(cfg: &PipelineConfig, dataset_dir: &Path, out: &Path) -> CliResult<(Checkpoint, TrainSummary)> {
    cfg.validate(false)?;
    let mut run = RunManifest::new("train", cfg.hash(), cfg.seed);
    let (dataset, manifest) = run.stage("load", || load_dataset(dataset_dir))?;
    let stats = manifest
        .stats
        .ok_or_else(|| CliError::Corrupt("dataset manifest has no normalisation statistics".into()))?;
    let (train_idx, val_idx) = dataset_split(&dataset, &manifest);
    let spec = cfg.network_spec()?;
    let tc = grasp_core::gqcnn::TrainConfig {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    let outcome = run.stage("train", || train::<f32>(&dataset, &train_idx, &val_idx, &stats, &spec, &tc))?;
    let last = outcome.log.last();
    let summary = TrainSummary {
        train_records: train_idx.len(),
        validation_records: val_idx.len(),
        parameters: outcome.params.parameter_count(),
        final_loss: last.map_or(f64::NAN, |l| l.train_loss),
        validation_accuracy: last.and_then(|l| l.validation_accuracy),
    };
    let ckpt = Checkpoint {
        params: outcome.params,
        stats,
        seed: cfg.seed,
        epoch: tc.epochs,
    };
    save_checkpoint(&out.join(CHECKPOINT_DIR), &ckpt)?;
    fs::write(out.join("training_log.csv"), training_log_csv(&outcome.log))?;
    run.stat("final_loss", summary.final_loss);
    if let Some(a) = summary.validation_accuracy {
        run.stat("validation_accuracy", a);
    }
    run.stat("parameters", summary.parameters as f64);
    run.artifacts.push(out.join(CHECKPOINT_DIR));
    run.artifacts.push(out.join("training_log.csv"));
    run.write(out)?;
    Ok((ckpt, summary))
}

fn load_ckpt(dir: &Path) -> CliResult<Checkpoint> {
    let dir = if dir.join(CHECKPOINT_DIR).is_dir() { dir.join(CHECKPOINT_DIR) } else { dir.to_path_buf() };
    Ok(load_checkpoint(&dir)?)
}

/// Accuracy, precision and ROC of a checkpoint on the dataset's validation split.
pub fn cmd_eval(checkpoint: &Path, dataset_dir: &Path, out: &Path) -> CliResult<EvalReport> {
    let ckpt = load_ckpt(checkpoint)?;
    let mut run = RunManifest::new("eval", String::new(), ckpt.seed);
    let (dataset, manifest) = run.stage("load", || load_dataset(dataset_dir))?;
    run.config_hash = manifest.config_hash.clone();
    let (_, val_idx) = dataset_split(&dataset, &manifest);
    if val_idx.is_empty() {
        return Err(CliError::Pipeline("the dataset's validation split is empty".into()));
    }
    let report = run.stage("evaluate", || evaluate(&ckpt.params, &dataset, &val_idx, &ckpt.stats))?;
    fs::create_dir_all(out)?;
    fs::write(out.join("eval_report.json"), serde_json::to_string_pretty(&report)?)?;
    if let Some(roc) = &report.roc {
        fs::write(out.join("roc.csv"), roc_csv(roc))?;
        run.artifacts.push(out.join("roc.csv"));
    }
    let summary = eval_summary(&report);
    fs::write(out.join("summary.txt"), &summary)?;
    print!("{summary}");
    run.stat("accuracy", report.accuracy);
    if let Some(p) = report.precision {
        run.stat("precision", p);
    }
    if let Some(a) = report.auc {
        run.stat("auc", a);
    }
    run.artifacts.push(out.join("eval_report.json"));
    run.artifacts.push(out.join("summary.txt"));
    run.write(out)?;
    Ok(report)
}

pub fn eval_summary(r: &EvalReport) -> String {
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undefined".into());
    format!(
        "records: {}\npositives: {}\naccuracy (q > 0.5): {:.4}\nprecision (q > 0.5): {}\nroc auc: {}\n",
        r.num_records,
        r.num_positive,
        r.accuracy,
        opt(r.precision),
        opt(r.auc)
    )
}

/// A rendered scene together with the state that produced it.
#[derive(Debug, Clone)]
pub struct Scene {
    pub state: SceneState,
    pub object_name: String,
    pub rendered: RenderedImage,
}

/// Renders one object (chosen by `object` or drawn from the seed) in a stable pose drawn by
/// probability, at a random planar placement and camera.
pub fn render_config_scene(cfg: &PipelineConfig, object: Option<usize>, seed: u64) -> CliResult<Scene> {
    let paths = list_meshes(cfg)?;
    let mut r = rng::stream(seed, &[0x5c]);
    let id = match object {
        Some(i) if i < paths.len() => i,
        Some(i) => return Err(CliError::Config(format!("object {i} out of range (have {})", paths.len()))),
        None => r.random_range(0..paths.len()),
    };
    let obj = prepare_object(id, &paths[id], cfg)?;
    if obj.poses.is_empty() {
        return Err(CliError::Pipeline(format!("{} has no stable pose", paths[id].display())));
    }
    let total: f64 = obj.poses.iter().map(|p| p.probability).sum();
    let mut pick = r.random::<f64>() * total;
    let mut pose = obj.poses.len() - 1;
    for (i, p) in obj.poses.iter().enumerate() {
        if pick < p.probability {
            pose = i;
            break;
        }
        pick -= p.probability;
    }
    let state = sample_view(cfg, id, pose, &mut r);
    let rendered = render_scene(&obj.mesh, &obj.poses[pose], &state, &cfg.camera)?;
    Ok(Scene {
        state,
        object_name: paths[id].file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        rendered,
    })
}

/// Table-only depth image seen from a camera drawn from the scene distribution.
pub fn render_empty(cfg: &PipelineConfig, seed: u64) -> CliResult<(DepthImage, CameraModel)> {
    let mut r = rng::stream(seed, &[0x5c]);
    let state = sample_view(cfg, 0, 0, &mut r);
    let cam = CameraModel::looking_at_origin(cfg.camera, &state.camera)?;
    let (w, h) = (cam.width(), cam.height());
    let data = (0..h * w).map(|i| table_depth(&cam, (i % w) as f64, (i / w) as f64) as f32).collect();
    Ok((DepthImage::new(h, w, data)?, cam))
}

pub fn write_png(path: &Path, width: usize, height: usize, pixels: &[u8]) -> CliResult<()> {
    let file = fs::File::create(path)?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), width as u32, height as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    w.write_image_data(pixels).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    Ok(())
}

fn depth_preview(image: &DepthImage) -> Vec<u8> {
    let (lo, hi) = image
        .data()
        .iter()
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(a, b), &d| (a.min(d), b.max(d)));
    let span = (hi - lo).max(1e-9);
    image.data().iter().map(|&d| (255.0 * (hi - d) / span).round() as u8).collect()
}

pub fn cmd_render(cfg: &PipelineConfig, seed: u64, object: Option<usize>, empty: bool, out: &Path) -> CliResult<PathBuf> {
    cfg.validate(!empty)?;
    fs::create_dir_all(out)?;
    let mut run = RunManifest::new("render", cfg.hash(), seed);
    let (depth, camera, state) = if empty {
        let (d, c) = run.stage("render", || render_empty(cfg, seed))?;
        (d, c, None)
    } else {
        let s = run.stage("render", || render_config_scene(cfg, object, seed))?;
        (s.rendered.depth, s.rendered.camera, Some(s.state))
    };
    let path = out.join("depth.bin");
    write_depth_image(&path, &depth)?;
    write_png(&out.join("depth.png"), depth.width(), depth.height(), &depth_preview(&depth))?;
    fs::write(out.join("scene.json"), serde_json::to_string_pretty(&(state, camera))?)?;
    run.artifacts.extend([path.clone(), out.join("depth.png"), out.join("scene.json")]);
    run.write(out)?;
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Argmax,
    Cem,
    Igq,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanOutput {
    pub policy: Policy,
    pub object: String,
    pub state: SceneState,
    pub camera: CameraModel,
    pub result: PlanResult,
}

pub fn plan_scene(cfg: &PipelineConfig, ckpt: &Checkpoint, scene: &Scene, policy: Policy, seed: u64) -> CliResult<PlanResult> {
    let img = &scene.rendered.depth;
    let cam = &scene.rendered.camera;
    let scorer = GqcnnScorer {
        params: &ckpt.params,
        stats: &ckpt.stats,
        crop: cfg.crop,
    };
    Ok(match policy {
        Policy::Argmax => plan_grasp(img, cam, &scorer, &cfg.planner, &cfg.constraints, seed)?,
        Policy::Cem => cem_plan(img, cam, &scorer, &cfg.cem, &cfg.planner, &cfg.constraints, seed)?,
        Policy::Igq => igq_baseline(img, &scene.rendered.mask, cam, &cfg.planner, &cfg.constraints, cfg.igq_depth_offset, seed)?,
    })
}

pub fn cmd_plan(cfg: &PipelineConfig, checkpoint: &Path, seed: u64, object: Option<usize>, policy: Policy, out: &Path) -> CliResult<PlanOutput> {
    cfg.validate(true)?;
    let ckpt = load_ckpt(checkpoint)?;
    let mut run = RunManifest::new("plan", cfg.hash(), seed);
    let scene = run.stage("render", || render_config_scene(cfg, object, seed))?;
    let result = run.stage("plan", || plan_scene(cfg, &ckpt, &scene, policy, seed))?;
    fs::create_dir_all(out)?;
    let g = result.grasp;
    let width_px = cfg.gripper.opening_width * scene.rendered.camera.intrinsics.fx / g.depth;
    let overlay = grasp_overlay(&scene.rendered.depth, &g, width_px);
    write_png(&out.join("overlay.png"), overlay.width, overlay.height, &overlay.pixels)?;
    write_depth_image(&out.join("depth.bin"), &scene.rendered.depth)?;
    let output = PlanOutput {
        policy,
        object: scene.object_name.clone(),
        state: scene.state,
        camera: scene.rendered.camera,
        result,
    };
    fs::write(out.join("plan.json"), serde_json::to_string_pretty(&output)?)?;
    run.stat("q", output.result.q);
    run.stat("candidates", output.result.candidates.len() as f64);
    run.stat("plan_seconds", output.result.seconds);
    run.artifacts.extend([out.join("plan.json"), out.join("overlay.png"), out.join("depth.bin")]);
    run.write(out)?;
    log::info!(
        "plan policy={policy:?} q={:.4} row={:.1} col={:.1} angle={:.3} depth={:.4} seconds={:.2}",
        output.result.q,
        g.row,
        g.col,
        g.angle,
        g.depth,
        output.result.seconds
    );
    Ok(output)
}
