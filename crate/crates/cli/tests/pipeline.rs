use std::fs;
use std::path::Path;
use std::process::Command;

use grasp_cli::commands::{cmd_eval, cmd_generate, cmd_plan, cmd_render, cmd_train, Policy, DATASET_DIR};
use grasp_cli::objects::write_builtin_objects;
use grasp_cli::PipelineConfig;
use grasp_core::grasp_image::read_dataset;
use grasp_core::render::{read_depth_image, table_depth, CameraModel, SceneState};

fn small_config(dir: &Path) -> PipelineConfig {
    let mesh_dir = dir.join("meshes");
    write_builtin_objects(&mesh_dir).unwrap();
    let mut cfg = PipelineConfig {
        mesh_dir,
        object_count: Some(2),
        images_per_pose: 3,
        grasps_per_object: 15,
        max_stable_poses: 2,
        network: "small".into(),
        chunk_size: 64,
        ..PipelineConfig::default()
    };
    cfg.sampler.max_grasps = 15;
    cfg.train.epochs = 1;
    cfg
}

#[test]
fn manifest_counts_match_chunks_and_resume_reuses_objects() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("run");
    let first = cmd_generate(&cfg, &out).unwrap();
    let (ds, m) = read_dataset(&out.join(DATASET_DIR)).unwrap();
    assert_eq!(m.num_records, ds.len());
    assert_eq!(m.chunks.iter().map(|c| c.records).sum::<usize>(), m.num_records);
    assert!(m.chunks.iter().all(|c| c.records <= 64));
    assert_eq!(m.num_positive, ds.records.iter().filter(|r| r.label).count());
    assert_eq!(m.train_records + m.validation_records, m.num_records);
    assert_eq!(first.objects.iter().map(|o| o.records).sum::<usize>(), m.num_records);

    // a rerun picks up the per-object results and writes the same dataset
    let before = fs::read(out.join(DATASET_DIR).join("manifest.json")).unwrap();
    let marker = out.join("objects").join("obj_0000.json");
    let stamp = fs::metadata(&marker).unwrap().modified().unwrap();
    cmd_generate(&cfg, &out).unwrap();
    assert_eq!(fs::metadata(&marker).unwrap().modified().unwrap(), stamp);
    assert_eq!(fs::read(out.join(DATASET_DIR).join("manifest.json")).unwrap(), before);

    // a different config invalidates the cached objects
    let mut other = cfg.clone();
    other.success_threshold = 0.003;
    cmd_generate(&other, &out).unwrap();
    assert_ne!(fs::read(out.join(DATASET_DIR).join("manifest.json")).unwrap(), before);
}

#[test]
fn train_eval_and_plan_write_their_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("run");
    cmd_generate(&cfg, &out).unwrap();
    let (_, summary) = cmd_train(&cfg, &out.join(DATASET_DIR), &out).unwrap();
    assert_eq!(summary.parameters, grasp_core::gqcnn::NetworkSpec::small().parameter_count().unwrap());
    assert!(out.join("training_log.csv").is_file() && out.join("run_manifest.json").is_file());
    let report = cmd_eval(&out, &out.join(DATASET_DIR), &out.join("eval")).unwrap();
    assert!((0.0..=1.0).contains(&report.accuracy));
    for f in ["eval_report.json", "summary.txt"] {
        assert!(out.join("eval").join(f).is_file(), "{f}");
    }
    for policy in [Policy::Argmax, Policy::Cem, Policy::Igq] {
        let dir = tmp.path().join(format!("plan_{policy:?}"));
        let p = cmd_plan(&cfg, &out, 3, Some(0), policy, &dir).unwrap();
        assert!(p.result.q.is_finite());
        for f in ["plan.json", "overlay.png", "depth.bin", "run_manifest.json"] {
            assert!(dir.join(f).is_file(), "{policy:?} {f}");
        }
    }
}

#[test]
fn empty_render_is_the_table_plane() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::default();
    let out = tmp.path().join("render");
    let path = cmd_render(&cfg, 4, None, true, &out).unwrap();
    let img = read_depth_image(&path).unwrap();
    let (state, cam): (Option<SceneState>, CameraModel) = serde_json::from_str(&fs::read_to_string(out.join("scene.json")).unwrap()).unwrap();
    assert!(state.is_none());
    for v in (0..img.height()).step_by(5) {
        for u in (0..img.width()).step_by(5) {
            assert!((img.get(v, u) as f64 - table_depth(&cam, u as f64, v as f64)).abs() < 1e-6);
        }
    }
    assert!(out.join("depth.png").is_file());
}

fn grasp(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_grasp")).args(args).env("RUST_LOG", "error").output().unwrap()
}

#[test]
fn binary_reports_errors_with_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");

    fs::write(&cfg, r#"{"mesh_dir": "nowhere", "imagez_per_pose": 3}"#).unwrap();
    let o = grasp(&["generate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("imagez_per_pose"));

    fs::write(&cfg, r#"{"mesh_dir": "nowhere"}"#).unwrap();
    let o = grasp(&["generate", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));

    let o = grasp(&["eval", "--checkpoint", "missing", "--dataset", "missing", "--out", tmp.path().to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(3) | Some(4)), "{:?}", o.status);

    let o = grasp(&["default-config"]);
    assert!(o.status.success());
    let parsed: PipelineConfig = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(parsed, PipelineConfig::default());
}
