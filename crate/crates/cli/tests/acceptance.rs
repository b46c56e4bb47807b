//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero if any fails.
//!
//! Not part of the default `cargo test` run; invoke it by name. Pass criterion numbers as
//! arguments to run a subset, e.g.
//! `cargo test --release -p grasp-cli --test acceptance -- 1 2 7`.
//! Criteria 8-10 share one generated dataset and trained network; set
//! `GRASP_ACCEPTANCE_DIR` to keep those artifacts (and reuse a finished checkpoint) across runs.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use grasp_cli::commands::{cmd_eval, cmd_generate, cmd_train, plan_scene, render_config_scene, render_empty, Policy, CHECKPOINT_DIR, DATASET_DIR};
use grasp_cli::generate::{list_meshes, prepare_object, GenerateOutput};
use grasp_cli::objects::write_builtin_objects;
use grasp_cli::PipelineConfig;
use grasp_core::gqcnn::layers::{Conv2d, Dense, MaxPool2d};
use grasp_core::gqcnn::{init_params, load_checkpoint, loss_and_gradients, Batch, Checkpoint, EvalReport, NetworkParams, NetworkSpec};
use grasp_core::grasp_analysis::{
    collision_free, epsilon_quality, find_contacts, force_closure, friction_cone_wrenches, grasp_epsilon, is_antipodal, planar_contact_wrenches,
    support, torque_scaling, ContactModel, Grasp3D, WrenchSet,
};
use grasp_core::grasp_image::{deproject_grasp, PlanarGrasp};
use grasp_core::mesh::{compute_stable_poses_with, preprocess_mesh, StablePoseConfig, TriangleMesh};
use grasp_core::planner::{GqcnnScorer, GraspScorer, PlanResult};
use grasp_core::render::{gp_noise_field, object_pose, sample_alpha, CameraIntrinsics, CameraModel, NoiseModel, SphericalPose};
use grasp_core::{rng, shapes};
use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, Point3, Vector3};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------------------
// oracles

/// Largest `t` with `sum l_i w_i = 0`, `sum l_i = 1`, `l_i >= t`; positive iff the origin
/// is in the relative interior of the hull with every wrench used.
fn lp_margin(w: &WrenchSet) -> f64 {
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let t = p.add_var(1.0, (-1.0, 1.0));
    let l: Vec<_> = (0..w.len()).map(|_| p.add_var(0.0, (0.0, 1.0))).collect();
    for k in 0..w.dim() {
        p.add_constraint(l.iter().enumerate().map(|(i, v)| (*v, w.get(i)[k])).collect::<Vec<_>>(), ComparisonOp::Eq, 0.0);
    }
    p.add_constraint(l.iter().map(|v| (*v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0);
    for v in &l {
        p.add_constraint(&[(*v, 1.0), (t, -1.0)], ComparisonOp::Ge, 0.0);
    }
    p.solve().map(|s| s[t]).unwrap_or(f64::NEG_INFINITY)
}

fn rank(w: &WrenchSet) -> usize {
    let m = DMatrix::from_fn(w.len(), w.dim(), |r, c| w.get(r)[c]);
    let sv = m.singular_values();
    sv.iter().filter(|&&s| s > 1e-9 * sv.max()).count()
}

/// Minimum of the support function over `count` uniform random unit directions.
fn dense_direction_epsilon(w: &WrenchSet, count: usize, seed: u64) -> f64 {
    let mut r = rng::stream(seed, &[]);
    let mut u = vec![0.0; w.dim()];
    let mut best = f64::INFINITY;
    for _ in 0..count {
        for x in u.iter_mut() {
            *x = StandardNormal.sample(&mut r);
        }
        let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= n);
        best = best.min(support(w, &u));
    }
    best
}

/// Exact inradius of the hull by enumerating hyperplanes through every `dim`-subset.
fn facet_enumeration_epsilon(w: &WrenchSet) -> f64 {
    let d = w.dim();
    let n = w.len();
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        let p0 = w.get(idx[0]);
        let diffs = DMatrix::from_fn(d - 1, d, |r, c| w.get(idx[r + 1])[c] - p0[c]);
        let eig = (diffs.transpose() * &diffs).symmetric_eigen();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let scale = eig.eigenvalues.max().max(1e-300);
        if eig.eigenvalues[order[1]] > 1e-12 * scale {
            let mut normal: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
            let mut c: f64 = normal.iter().zip(p0).map(|(a, b)| a * b).sum();
            if c < 0.0 {
                normal.iter_mut().for_each(|x| *x = -*x);
                c = -c;
            }
            if support(w, &normal) <= c + 1e-10 {
                best = best.min(c);
            }
        }
        let mut k = d;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] < n - d + k {
                idx[k] += 1;
                for j in k + 1..d {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn pinch_wrenches(mesh: &TriangleMesh, grasp: &Grasp3D, friction: f64) -> Option<WrenchSet> {
    let (c1, c2) = find_contacts(grasp, mesh, friction)?;
    let com = Point3::origin();
    let lambda = torque_scaling(mesh, &com);
    let mut w = WrenchSet::new(6);
    for c in [c1, c2] {
        w.extend(&friction_cone_wrenches(&c, &ContactModel::default(), &com, lambda).ok()?).ok()?;
    }
    Some(w)
}

// ---------------------------------------------------------------------------------------
// 1-3: wrench space

fn criterion_1(_: &mut Pipeline) -> Outcome {
    let start = Instant::now();
    let mut r = rng::stream(1, &[]);
    let (mut agree, mut tested, mut excluded, mut closures) = (0, 0, 0, 0);
    while tested < 500 {
        let sides = r.random_range(3..8);
        let mut angles: Vec<f64> = (0..sides).map(|_| r.random_range(0.0..std::f64::consts::TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let poly: Vec<[f64; 2]> = angles.iter().map(|a| [0.03 * a.cos(), 0.03 * a.sin()]).collect();
        let com = [poly.iter().map(|p| p[0]).sum::<f64>() / sides as f64, poly.iter().map(|p| p[1]).sum::<f64>() / sides as f64];
        let lambda = 1.0 / poly.iter().map(|p| (p[0] - com[0]).hypot(p[1] - com[1])).fold(0.0, f64::max);
        let friction = r.random_range(0.0..1.0);
        let mut w = WrenchSet::new(3);
        for _ in 0..r.random_range(2..5) {
            let e = r.random_range(0..sides);
            let (a, b) = (poly[e], poly[(e + 1) % sides]);
            let s: f64 = r.random_range(0.0..1.0);
            let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let normal = [-(b[1] - a[1]), b[0] - a[0]];
            w.extend(&planar_contact_wrenches(p, normal, friction, com, lambda).unwrap()).unwrap();
        }
        let margin = lp_margin(&w);
        if margin.abs() < 1e-6 {
            excluded += 1;
            continue;
        }
        let oracle = rank(&w) == 3 && margin > 0.0;
        tested += 1;
        closures += oracle as usize;
        agree += (force_closure(&w) == oracle) as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        agree == 500 && secs < 60.0,
        format!("{agree}/500 agree with the LP oracle ({closures} force closure, {excluded} boundary cases excluded), {secs:.1} s"),
    )
}

fn criterion_2(_: &mut Pipeline) -> Outcome {
    let start = Instant::now();
    let mut rows = Vec::new();
    for k in 0..6 {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; 6];
            v[k] = s;
            rows.push(v);
        }
    }
    let cross = epsilon_quality(&WrenchSet::from_rows(6, &rows).unwrap());
    let cross_err = (cross - 1.0 / 6f64.sqrt()).abs();

    let cube = shapes::box_mesh(0.05, 0.05, 0.05);
    let mut r = rng::stream(2, &[]);
    let (mut worst_dense, mut worst_exact, mut n) = (0.0f64, 0.0f64, 0);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    while n < 20 {
        let center = Point3::new(r.random_range(-0.015..0.015), r.random_range(-0.015..0.015), r.random_range(-0.015..0.015));
        let axis = Vector3::new(1.0, r.random_range(-0.2..0.2), r.random_range(-0.2..0.2));
        let friction = r.random_range(0.3..1.0);
        let g = Grasp3D::new(center, axis, 0.08).unwrap();
        let Some(w) = pinch_wrenches(&cube, &g, friction) else { continue };
        let ours = epsilon_quality(&w);
        if ours <= 0.0 {
            continue;
        }
        let dense = dense_direction_epsilon(&w, 1_000_000, 100 + n as u64);
        let exact = facet_enumeration_epsilon(&w);
        worst_dense = worst_dense.max((ours - dense).abs());
        worst_exact = worst_exact.max((ours - exact).abs());
        (lo, hi) = (lo.min(ours), hi.max(ours));
        n += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        cross_err < 1e-3 && worst_dense < 1e-3 && secs < 300.0,
        format!(
            "cross-polytope error {cross_err:.2e}; 20 cube grasps with eps in [{lo:.4}, {hi:.4}]: max |eps - dense 1e6| {worst_dense:.2e}, max |eps - exact facet enumeration| {worst_exact:.2e}, {secs:.1} s"
        ),
    )
}

fn criterion_3(_: &mut Pipeline) -> Outcome {
    let meshes = [shapes::box_mesh(0.05, 0.05, 0.05), shapes::box_mesh(0.04, 0.03, 0.06), shapes::prism(0.022, 0.05, 6)];
    let com = Point3::origin();
    let mut r = rng::stream(3, &[]);
    let (mut grasps, mut worst) = (0, 0.0f64);
    while grasps < 20 {
        let mesh = &meshes[grasps % meshes.len()];
        let center = Point3::new(r.random_range(-0.01..0.01), r.random_range(-0.01..0.01), r.random_range(-0.01..0.01));
        let axis = Vector3::new(1.0, r.random_range(-0.4..0.4), r.random_range(-0.4..0.4));
        let g = Grasp3D::new(center, axis, 0.08).unwrap();
        if find_contacts(&g, mesh, 1.0).is_none() {
            continue;
        }
        let eps: Vec<f64> = (1..=10).map(|k| grasp_epsilon(&g, mesh, &com, k as f64 / 10.0, &ContactModel::default())).collect();
        for w in eps.windows(2) {
            worst = worst.max(w[0] - w[1]);
        }
        grasps += 1;
    }
    outcome(worst <= 1e-9, format!("20 grasps over friction 0.1..1.0: largest decrease {worst:.2e}"))
}

// ---------------------------------------------------------------------------------------
// 4-7

fn criterion_4(_: &mut Pipeline) -> Outcome {
    let m = NoiseModel::default();
    let mut r = rng::stream(4, &[]);
    let n = 100_000;
    let draws: Vec<f64> = (0..n).map(|_| sample_alpha(&m, &mut r)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let std = (draws.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let (mut sum, mut sq, mut count) = (0.0, 0.0, 0.0);
    for _ in 0..50 {
        for e in gp_noise_field(48, 64, m.sigma, m.length_scale, &mut r) {
            sum += e;
            sq += e * e;
            count += 1.0;
        }
    }
    let field_std = (sq / count - (sum / count).powi(2)).sqrt();
    let ratio = field_std / m.sigma;
    outcome(
        (mean - 1.0).abs() <= 0.001 && (std - 0.0316).abs() <= 0.003 && (ratio - 1.0).abs() <= 0.1,
        format!("alpha mean {mean:.5}, std {std:.5}; field pixel std {field_std:.5} = {ratio:.3} sigma"),
    )
}

fn criterion_5(p: &mut Pipeline) -> Outcome {
    let mut worst_plane = 0.0f64;
    for seed in 0..5 {
        let (img, cam) = render_empty(&p.cfg, seed).unwrap();
        // the table in camera coordinates is {x : n . x = c}
        let n = cam.camera_from_world.rotation * Vector3::z();
        let c = n.dot(&(cam.camera_from_world * Point3::origin()).coords);
        let k = cam.intrinsics;
        for v in 0..img.height() {
            for u in 0..img.width() {
                let ray = Vector3::new((u as f64 - k.cx) / k.fx, (v as f64 - k.cy) / k.fy, 1.0);
                let depth = c / n.dot(&ray);
                worst_plane = worst_plane.max((img.get(v, u) as f64 - depth).abs());
            }
        }
    }
    let mut r = rng::stream(5, &[]);
    let mut worst_trip = 0.0f64;
    for i in 0..1000 {
        let cam = CameraModel::looking_at_origin(
            CameraIntrinsics::default(),
            &SphericalPose {
                radius: r.random_range(0.5..1.0),
                azimuth: r.random_range(0.0..std::f64::consts::TAU),
                polar: r.random_range(0.0..0.6),
            },
        )
        .unwrap();
        let (u, v, d) = (r.random_range(0.0..640.0), r.random_range(0.0..480.0), r.random_range(0.2..2.0));
        let p = cam.deproject(u, v, d);
        let (u2, v2, d2) = cam.project(&p).unwrap();
        assert!((u2 - u).abs() < 1e-6 && (v2 - v).abs() < 1e-6, "point {i}");
        worst_trip = worst_trip.max((cam.deproject(u2, v2, d2) - p).norm());
    }
    outcome(
        worst_plane < 1e-6 && worst_trip < 1e-9,
        format!("empty-scene depth vs ray-plane distance {worst_plane:.2e} m over 5 cameras; round trip {worst_trip:.2e} m on 1000 points"),
    )
}

const FD_STEP: f64 = 1e-5;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn random(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, &[]);
    (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn fd_check(p: &mut [f64], analytic: &[f64], c: &[f64], f: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + FD_STEP;
        let up = dot(c, &f(p));
        p[i] = orig - FD_STEP;
        let down = dot(c, &f(p));
        p[i] = orig;
        worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * FD_STEP)));
    }
    worst
}

fn criterion_6(_: &mut Pipeline) -> Outcome {
    let mut conv_worst = 0.0f64;
    for (stride, relu, kernel) in [(1, false, 3), (1, true, 5), (2, true, 3)] {
        let conv = Conv2d {
            in_channels: 2,
            out_channels: 3,
            kernel,
            stride,
            height: 7,
            width: 6,
        };
        let mut w = random(conv.weight_len(), 61);
        let mut b = random(3, 62);
        let mut x = random(2 * 2 * 7 * 6, 63);
        let y = conv.forward(&w, &b, &x, 2, relu);
        let c = random(y.len(), 64);
        let g = conv.backward(&w, &x, &y, &c, 2, relu, true);
        let (w0, b0, x0) = (w.clone(), b.clone(), x.clone());
        conv_worst = conv_worst
            .max(fd_check(&mut w, &g.weight, &c, |w| conv.forward(w, &b0, &x0, 2, relu)))
            .max(fd_check(&mut b, &g.bias, &c, |b| conv.forward(&w0, b, &x0, 2, relu)))
            .max(fd_check(&mut x, g.input.as_ref().unwrap(), &c, |x| conv.forward(&w0, &b0, x, 2, relu)));
    }
    let pool = MaxPool2d {
        channels: 2,
        height: 6,
        width: 6,
        window: 2,
    };
    let mut x = random(3 * 2 * 36, 65);
    let (y, arg) = pool.forward(&x, 3);
    let c = random(y.len(), 66);
    let g = pool.backward(&c, &arg, 3);
    let pool_worst = fd_check(&mut x, &g, &c, |x| pool.forward(x, 3).0);

    let mut dense_worst = 0.0f64;
    for relu in [false, true] {
        let d = Dense { inputs: 7, outputs: 4 };
        let mut w = random(28, 67);
        let mut b = random(4, 68);
        let mut x = random(21, 69);
        let y = d.forward(&w, &b, &x, 3, relu);
        let c = random(y.len(), 70);
        let g = d.backward(&w, &x, &y, &c, 3, relu, true);
        let (w0, b0, x0) = (w.clone(), b.clone(), x.clone());
        dense_worst = dense_worst
            .max(fd_check(&mut w, &g.weight, &c, |w| d.forward(w, &b0, &x0, 3, relu)))
            .max(fd_check(&mut b, &g.bias, &c, |b| d.forward(&w0, b, &x0, 3, relu)))
            .max(fd_check(&mut x, g.input.as_ref().unwrap(), &c, |x| d.forward(&w0, &b0, x, 3, relu)));
    }

    let spec = NetworkSpec::tiny();
    let count = spec.parameter_count().unwrap();
    let mut params: NetworkParams<f64> = init_params(&spec, 71).unwrap();
    let mut r = rng::stream(72, &[]);
    for t in params.tensors.iter_mut().skip(1).step_by(2) {
        t.data.iter_mut().for_each(|v| *v = r.random_range(-0.1..0.1));
    }
    let n = 6;
    let batch = Batch {
        images: (0..n * spec.input_size * spec.input_size).map(|_| r.random_range(-1.0..1.0)).collect(),
        depths: (0..n).map(|_| r.random_range(-1.0..1.0)).collect(),
        labels: (0..n).map(|i| i % 2 == 0).collect(),
    };
    let (_, grads) = loss_and_gradients(&params, &batch).unwrap();
    let mut net_worst = 0.0f64;
    for ti in 0..params.tensors.len() {
        for i in 0..params.tensors[ti].data.len() {
            let orig = params.tensors[ti].data[i];
            params.tensors[ti].data[i] = orig + FD_STEP;
            let up = loss_and_gradients(&params, &batch).unwrap().0;
            params.tensors[ti].data[i] = orig - FD_STEP;
            let down = loss_and_gradients(&params, &batch).unwrap().0;
            params.tensors[ti].data[i] = orig;
            net_worst = net_worst.max(rel_err(grads[ti][i], (up - down) / (2.0 * FD_STEP)));
        }
    }
    let worst = conv_worst.max(pool_worst).max(dense_worst).max(net_worst);
    outcome(
        worst < 1e-4 && count <= 10_000,
        format!(
            "max relative error: conv {conv_worst:.1e}, pool {pool_worst:.1e}, dense {dense_worst:.1e}, {count}-parameter network {net_worst:.1e}"
        ),
    )
}

fn criterion_7(_: &mut Pipeline) -> Outcome {
    let (mesh, props) = preprocess_mesh(&shapes::box_mesh(0.04, 0.04, 0.04), 0.05).unwrap();
    let poses = compute_stable_poses_with(
        &mesh,
        &props,
        &StablePoseConfig {
            num_samples: 10_000,
            threshold: 0.01,
            seed: 7,
        },
    )
    .unwrap();
    let worst = poses.iter().map(|p| (p.probability - 1.0 / 6.0).abs()).fold(0.0, f64::max);
    outcome(poses.len() == 6 && worst <= 0.02, format!("{} poses, max |p - 1/6| = {worst:.4}", poses.len()))
}

// ---------------------------------------------------------------------------------------
// 8-10: generated dataset, trained network, planning

struct Trained {
    generated: GenerateOutput,
    checkpoint: Checkpoint,
    eval: EvalReport,
    generate_seconds: f64,
    train_seconds: Option<f64>,
}

struct Pipeline {
    dir: PathBuf,
    _temp: Option<tempfile::TempDir>,
    cfg: PipelineConfig,
    trained: Option<Trained>,
}

impl Pipeline {
    fn new() -> Self {
        let (dir, temp) = match std::env::var_os("GRASP_ACCEPTANCE_DIR") {
            Some(d) => (PathBuf::from(d), None),
            None => {
                let t = tempfile::tempdir().unwrap();
                (t.path().to_path_buf(), Some(t))
            }
        };
        let mesh_dir = dir.join("meshes");
        if !mesh_dir.is_dir() {
            write_builtin_objects(&mesh_dir).unwrap();
        }
        let cfg = PipelineConfig {
            mesh_dir,
            ..PipelineConfig::default()
        };
        Self {
            dir,
            _temp: temp,
            cfg,
            trained: None,
        }
    }

    fn trained(&mut self) -> &Trained {
        if self.trained.is_none() {
            let run = self.dir.join("run");
            let start = Instant::now();
            let generated = cmd_generate(&self.cfg, &run).unwrap();
            let generate_seconds = start.elapsed().as_secs_f64();
            let train_dir = self.dir.join("train");
            let ckpt_dir = train_dir.join(CHECKPOINT_DIR);
            let (checkpoint, train_seconds) = match load_checkpoint(&ckpt_dir) {
                Ok(c) if std::env::var_os("GRASP_ACCEPTANCE_DIR").is_some() => (c, None),
                _ => {
                    let start = Instant::now();
                    let (c, _) = cmd_train(&self.cfg, &run.join(DATASET_DIR), &train_dir).unwrap();
                    (c, Some(start.elapsed().as_secs_f64()))
                }
            };
            let eval = cmd_eval(&ckpt_dir, &run.join(DATASET_DIR), &self.dir.join("eval")).unwrap();
            self.trained = Some(Trained {
                generated,
                checkpoint,
                eval,
                generate_seconds,
                train_seconds,
            });
        }
        self.trained.as_ref().unwrap()
    }
}

fn criterion_8(p: &mut Pipeline) -> Outcome {
    let spec = p.cfg.network.clone();
    let t = p.trained();
    let epochs = t.checkpoint.epoch;
    let m = &t.generated.manifest;
    let meshes = t.generated.objects.len();
    let roc = t.eval.roc.as_ref();
    let dominates = roc.is_some_and(|roc| roc.iter().all(|q| q.true_positive_rate >= q.false_positive_rate));
    let train = t.train_seconds.map(|s| format!("{:.0} s", s)).unwrap_or_else(|| "reused checkpoint".into());
    outcome(
        meshes >= 10 && m.num_records >= 20_000 && epochs >= 5 && t.eval.accuracy >= 0.8 && dominates,
        format!(
            "{meshes} meshes, {} records ({} validation), '{spec}' network {} parameters, {epochs} epochs; held-out accuracy {:.4} (full-scale reference 85.7%), AUC {:.4}, ROC above chance at all 100 thresholds: {dominates}; generate {:.0} s, train {train} on {} core(s)",
            m.num_records,
            t.eval.num_records,
            t.checkpoint.params.spec.parameter_count().unwrap_or(0),
            t.eval.accuracy,
            t.eval.auc.unwrap_or(f64::NAN),
            t.generate_seconds,
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        ),
    )
}

fn criterion_9(p: &mut Pipeline) -> Outcome {
    let delta = p.cfg.success_threshold;
    let m = &p.trained().generated.manifest;
    let f = m.positive_fraction;
    outcome(
        delta == 0.002 && (0.05..=0.40).contains(&f),
        format!("positive fraction {:.1}% of {} records at delta {delta} (full-scale reference 21.2%)", 100.0 * f, m.num_records),
    )
}

/// Fraction of constraint-feasible cells of a dense (row, col, angle, depth) grid around the
/// object that the scorer rates strictly above `q`.
fn grid_rank(scorer: &dyn GraspScorer, image: &grasp_core::render::DepthImage, mask: &[bool], camera: &CameraModel, cfg: &PipelineConfig, q: f64) -> (f64, usize) {
    let (w, h) = (image.width(), image.height());
    let (mut r0, mut r1, mut c0, mut c1) = (h, 0, w, 0);
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let (r, c) = (i / w, i % w);
        (r0, r1, c0, c1) = (r0.min(r), r1.max(r), c0.min(c), c1.max(c));
    }
    let pad = 10;
    let (r0, r1, c0, c1) = (r0.saturating_sub(pad), (r1 + pad).min(h - 1), c0.saturating_sub(pad), (c1 + pad).min(w - 1));
    const STEP: usize = 4;
    const ANGLES: usize = 12;
    let mut cells = Vec::new();
    for r in (r0..=r1).step_by(STEP) {
        for c in (c0..=c1).step_by(STEP) {
            let surface = image.get(r, c) as f64;
            for k in 0..ANGLES {
                let angle = -std::f64::consts::FRAC_PI_2 + (k + 1) as f64 * std::f64::consts::PI / ANGLES as f64;
                for level in 0..5 {
                    let g = PlanarGrasp::new(r as f64, c as f64, angle, surface + 0.01 * level as f64).unwrap();
                    if cfg.constraints.feasible(&g, image, camera) {
                        cells.push(g);
                    }
                }
            }
        }
    }
    let mut above = 0;
    for chunk in cells.chunks(512) {
        above += scorer.score(image, camera, chunk).unwrap().iter().filter(|&&s| s > q).count();
    }
    (above as f64 / cells.len().max(1) as f64, cells.len())
}

fn chosen_friction(result: &PlanResult) -> Option<f64> {
    result.candidates.iter().find(|c| c.grasp == result.grasp && c.q == result.q).and_then(|c| c.friction)
}

fn criterion_10(p: &mut Pipeline) -> Outcome {
    p.trained();
    let cfg = p.cfg.clone();
    let ckpt = &p.trained.as_ref().unwrap().checkpoint;
    let scorer = GqcnnScorer {
        params: &ckpt.params,
        stats: &ckpt.stats,
        crop: cfg.crop,
    };
    let paths = list_meshes(&cfg).unwrap();
    let (mut valid, mut top, mut cem_wins, mut slowest) = (0, 0, 0, 0.0f64);
    let mut lines = Vec::new();
    for k in 0..10 {
        let object = (k * 3) % paths.len();
        let seed = 1000 + k as u64;
        let scene = render_config_scene(&cfg, Some(object), seed).unwrap();
        let (argmax, cem) = match (plan_scene(&cfg, ckpt, &scene, Policy::Argmax, seed), plan_scene(&cfg, ckpt, &scene, Policy::Cem, seed)) {
            (Ok(a), Ok(c)) => (a, c),
            (a, c) => {
                let err = |r: &Result<PlanResult, grasp_cli::CliError>| r.as_ref().err().map_or("ok".to_string(), |e| e.to_string());
                lines.push(format!("    scene {k} {}: argmax {}, cem {}", scene.object_name, err(&a), err(&c)));
                continue;
            }
        };

        let obj = prepare_object(object, &paths[object], &cfg).unwrap();
        let world = obj.mesh.transformed(&object_pose(&obj.mesh, &obj.poses[scene.state.stable_pose], scene.state.planar));
        let g3 = deproject_grasp(&argmax.grasp, &scene.rendered.camera, cfg.gripper.opening_width).unwrap();
        let friction = chosen_friction(&argmax).unwrap_or(f64::NAN);
        let antipodal = find_contacts(&g3, &world, friction).is_some_and(|(a, b)| is_antipodal(&a, &b, friction));
        let free = collision_free(&g3, &world, &cfg.gripper, cfg.constraints.table_height);
        let (rank, cells) = grid_rank(&scorer, &scene.rendered.depth, &scene.rendered.mask, &scene.rendered.camera, &cfg, argmax.q);
        valid += (antipodal && free) as usize;
        top += (rank <= 0.05) as usize;
        cem_wins += (cem.q >= argmax.q) as usize;
        slowest = slowest.max(argmax.seconds).max(cem.seconds);
        lines.push(format!(
            "    scene {k} {}: antipodal {antipodal} (mu {friction:.2}), collision-free {free}, q {:.4}, grid rank {:.2}% of {cells}, cem q {:.4}, {:.2} s / {:.2} s",
            scene.object_name,
            argmax.q,
            100.0 * rank,
            cem.q,
            argmax.seconds,
            cem.seconds
        ));
    }
    outcome(
        valid == 10 && top == 10 && cem_wins >= 9 && slowest < 10.0,
        format!(
            "antipodal and collision-free {valid}/10, grid rank within top 5% {top}/10, cem >= argmax {cem_wins}/10, slowest plan {slowest:.2} s\n{}",
            lines.join("\n")
        ),
    )
}

// ---------------------------------------------------------------------------------------
// 11

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "run_manifest.json") {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_11(p: &mut Pipeline) -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig {
        object_count: Some(3),
        images_per_pose: 2,
        grasps_per_object: 20,
        network: "small".into(),
        ..p.cfg.clone()
    };
    cfg.sampler.max_grasps = 20;
    cfg.train.epochs = 1;
    let mut gen = Vec::new();
    let mut trained = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        cmd_generate(&cfg, &dir.join("gen")).unwrap();
        cmd_train(&cfg, &dir.join("gen").join(DATASET_DIR), &dir.join("train")).unwrap();
        gen.push(files(&dir.join("gen")));
        trained.push(files(&dir.join("train")));
    }
    let same_gen = gen[0] == gen[1];
    let same_train = trained[0] == trained[1];
    outcome(
        same_gen && same_train && !gen[0].is_empty(),
        format!(
            "generate: {} files identical {same_gen}; train: {} files identical {same_train}",
            gen[0].len(),
            trained[0].len()
        ),
    )
}

type Criterion = fn(&mut Pipeline) -> Outcome;

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(&str, Criterion); 11] = [
        ("wrench-space oracle equivalence", criterion_1),
        ("epsilon accuracy", criterion_2),
        ("epsilon monotone in friction", criterion_3),
        ("noise-model statistics", criterion_4),
        ("renderer correctness", criterion_5),
        ("gradient check", criterion_6),
        ("stable-pose symmetry", criterion_7),
        ("learning surrogate", criterion_8),
        ("label distribution", criterion_9),
        ("planner end-to-end", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut pipeline = Pipeline::new();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| f(&mut pipeline))).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += !result.pass as usize;
        println!(
            "criterion {n:>2} {name}: {} [{:.1} s] {}",
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
