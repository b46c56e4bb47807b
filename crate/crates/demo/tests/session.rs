use grasp_demo::{catalogue, Session};

#[test]
fn render_sample_and_plan() {
    let mut s = Session::default();
    assert!(s.plan(1).is_err());
    let info = s.render(0, 3).unwrap();
    assert_eq!(info.object, "cube");
    let (w, h) = (s.width(), s.height());
    assert_eq!(s.depth_rgba().len(), 4 * w * h);
    assert!(!s.edges().unwrap().is_empty());
    let n = s.sample_grasps(5).unwrap();
    assert!(n > 0);
    let c = s.candidates();
    assert_eq!(c.len(), 5 * n);
    for k in c.chunks(5) {
        assert!(k[0] >= 0.0 && k[0] < h as f64 && k[1] >= 0.0 && k[1] < w as f64);
        assert!(k[4] >= 0.4 && k[4] <= 1.0 + 1e-9);
    }
    let p = s.plan(7).unwrap();
    assert!(p.robust_epsilon >= 0.0 && p.width_px > 0.0);
    assert_eq!(p.success, p.collision_free && p.robust_epsilon > 0.002);
}

#[test]
fn every_object_renders() {
    let mut s = Session::default();
    for i in 0..catalogue().len() {
        s.render(i, 11).unwrap();
    }
    assert!(s.render(catalogue().len(), 0).is_err());
}

#[test]
fn rendering_is_deterministic() {
    let mut a = Session::default();
    let mut b = Session::default();
    a.render(2, 9).unwrap();
    b.render(2, 9).unwrap();
    assert_eq!(a.depth_rgba(), b.depth_rgba());
    a.sample_grasps(4).unwrap();
    b.sample_grasps(4).unwrap();
    assert_eq!(a.candidates(), b.candidates());
}
