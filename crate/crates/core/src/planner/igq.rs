use web_time::Instant;

use super::{sample_with_fallback, Constraints, PlanResult, PlannerConfig, ScoredGrasp};
use crate::grasp_image::{bilinear, PlanarGrasp};
use crate::render::{CameraModel, DepthImage};
use crate::{Error, Result};

/// Mean `(row, col)` of the mask pixels.
pub fn mask_centroid(mask: &[bool], width: usize) -> Option<(f64, f64)> {
    let (mut r, mut c, mut n) = (0.0, 0.0, 0usize);
    for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        r += (i / width) as f64;
        c += (i % width) as f64;
        n += 1;
    }
    (n > 0).then(|| (r / n as f64, c / n as f64))
}

/// Antipodal candidates ranked by the distance of the jaw center to the mask centroid, each
/// placed `depth_offset` below the surface seen at its center pixel. Scores are negated
/// pixel distances.
pub fn igq_baseline(
    image: &DepthImage,
    mask: &[bool],
    camera: &CameraModel,
    config: &PlannerConfig,
    constraints: &Constraints,
    depth_offset: f64,
    seed: u64,
) -> Result<PlanResult> {
    config.validate()?;
    if mask.len() != image.height() * image.width() {
        return Err(Error::InvalidArgument(format!("mask of {} pixels for a {}x{} image", mask.len(), image.height(), image.width())));
    }
    let start = Instant::now();
    let (mr, mc) = mask_centroid(mask, image.width()).ok_or(Error::NoObject)?;
    let candidates = sample_with_fallback(image, camera, constraints.table_height, config, seed);
    let mut ranked: Vec<ScoredGrasp> = candidates
        .iter()
        .map(|c| {
            let g = &c.grasp;
            let depth = bilinear(image, g.row, g.col) + depth_offset;
            ScoredGrasp {
                grasp: PlanarGrasp { depth, ..*g },
                q: -(g.row - mr).hypot(g.col - mc),
                friction: Some(c.friction),
            }
        })
        .collect();
    ranked.sort_by(|a, b| b.q.total_cmp(&a.q));
    let first = ranked.first().copied().ok_or(Error::NoFeasibleGrasp(0))?;
    Ok(PlanResult {
        grasp: first.grasp,
        q: first.q,
        best_by_round: vec![first.q],
        candidates: ranked,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::tests::box_scene;

    #[test]
    fn one_pixel_mask() {
        let mut m = vec![false; 12];
        m[7] = true;
        assert_eq!(mask_centroid(&m, 4), Some((1.0, 3.0)));
        assert_eq!(mask_centroid(&[false; 4], 2), None);
    }

    #[test]
    fn symmetric_box_centered_grasp() {
        let (img, cam, mask) = box_scene((0.03, 0.03, 0.03), 0.0, 0.0);
        let r = igq_baseline(&img, &mask, &cam, &PlannerConfig::default(), &Constraints::default(), 0.01, 4).unwrap();
        let (mr, mc) = mask_centroid(&mask, img.width()).unwrap();
        assert!((r.grasp.row - mr).hypot(r.grasp.col - mc) <= 2.0);
        assert!((r.grasp.depth - (bilinear(&img, r.grasp.row, r.grasp.col) + 0.01)).abs() < 1e-12);
    }

    #[test]
    fn ranking_is_a_permutation() {
        let (img, cam, mask) = box_scene((0.03, 0.04, 0.03), 0.6, 0.2);
        let cfg = PlannerConfig::default();
        let cons = Constraints::default();
        let r = igq_baseline(&img, &mask, &cam, &cfg, &cons, 0.01, 5).unwrap();
        let raw = sample_with_fallback(&img, &cam, 0.0, &cfg, 5);
        assert_eq!(r.candidates.len(), raw.len());
        let mut a: Vec<(u64, u64, u64)> = raw.iter().map(|c| (c.grasp.row.to_bits(), c.grasp.col.to_bits(), c.grasp.angle.to_bits())).collect();
        let mut b: Vec<(u64, u64, u64)> = r.candidates.iter().map(|c| (c.grasp.row.to_bits(), c.grasp.col.to_bits(), c.grasp.angle.to_bits())).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert!(r.candidates.windows(2).all(|w| w[0].q >= w[1].q));
    }

    #[test]
    fn empty_mask_is_no_object() {
        let (img, cam, mask) = box_scene((0.03, 0.04, 0.03), 0.6, 0.2);
        let empty = vec![false; mask.len()];
        let e = igq_baseline(&img, &empty, &cam, &PlannerConfig::default(), &Constraints::default(), 0.01, 5).unwrap_err();
        assert!(matches!(e, Error::NoObject));
    }
}
