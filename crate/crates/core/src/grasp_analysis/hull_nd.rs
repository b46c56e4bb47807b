//! Facets of the convex hull of a small point set in `d <= 8` dimensions.
//!
//! Beneath-beyond insertion on a joggled copy of the points, so every facet is a simplex.
//! The topology is checked at the end (every ridge shared by exactly two facets, every
//! facet supporting all points); callers retry with a larger joggle on failure.

use std::collections::HashMap;

use rand::Rng as _;

use super::WrenchSet;
use crate::rng;

const MAX_DIM: usize = 8;

type Key = [u16; MAX_DIM];

struct Facet {
    verts: Vec<u16>,
    normal: Vec<f64>,
    offset: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outward unit normals of the hull facets of the (joggled) wrenches, or `None` when the
/// set is degenerate or the construction fails its consistency checks.
pub(crate) fn facet_normals(w: &WrenchSet, joggle: f64, seed: u64) -> Option<Vec<Vec<f64>>> {
    let d = w.dim();
    let m = w.len();
    if !(2..=MAX_DIM).contains(&d) || m < d + 1 || m > u16::MAX as usize {
        return None;
    }
    let scale = w.iter().map(|p| dot(p, p)).fold(0.0, f64::max).sqrt();
    if !(scale > 0.0) {
        return None;
    }
    let mut r = rng::stream(seed, &[m as u64, d as u64]);
    let pts: Vec<Vec<f64>> = w
        .iter()
        .map(|p| p.iter().map(|x| x + joggle * scale * (2.0 * r.random::<f64>() - 1.0)).collect())
        .collect();

    let simplex = initial_simplex(&pts, d, scale)?;
    let mut center = vec![0.0; d];
    for &i in &simplex {
        for (c, x) in center.iter_mut().zip(&pts[i]) {
            *c += x / (d + 1) as f64;
        }
    }
    let tol = 1e-12 * scale;
    let mut facets: Vec<Facet> = Vec::new();
    for skip in 0..=d {
        let verts: Vec<u16> = simplex.iter().enumerate().filter(|&(k, _)| k != skip).map(|(_, &i)| i as u16).collect();
        facets.push(make_facet(&pts, verts, &center)?);
    }

    let mut order: Vec<usize> = (0..m).filter(|i| !simplex.contains(i)).collect();
    order.sort_by(|&a, &b| {
        let da: f64 = pts[a].iter().zip(&center).map(|(x, c)| (x - c).powi(2)).sum();
        let db: f64 = pts[b].iter().zip(&center).map(|(x, c)| (x - c).powi(2)).sum();
        db.total_cmp(&da).then(a.cmp(&b))
    });
    for p in order {
        let visible: Vec<usize> = (0..facets.len())
            .filter(|&f| dot(&facets[f].normal, &pts[p]) - facets[f].offset > tol)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut ridges: HashMap<Key, (u32, usize)> = HashMap::new();
        for &f in &visible {
            for k in 0..d {
                let key = ridge_key(&facets[f].verts, k);
                let e = ridges.entry(key).or_insert((0, k));
                e.0 += 1;
            }
        }
        let mut fresh = Vec::new();
        for (key, (count, _)) in ridges {
            if count == 1 {
                let mut verts: Vec<u16> = key[..d - 1].to_vec();
                verts.push(p as u16);
                fresh.push(make_facet(&pts, verts, &center)?);
            }
        }
        let mut keep = vec![true; facets.len()];
        for &f in &visible {
            keep[f] = false;
        }
        let mut k = 0;
        facets.retain(|_| {
            k += 1;
            keep[k - 1]
        });
        facets.extend(fresh);
    }

    let mut ridge_count: HashMap<Key, u32> = HashMap::new();
    for f in &facets {
        for k in 0..d {
            *ridge_count.entry(ridge_key(&f.verts, k)).or_insert(0) += 1;
        }
    }
    if ridge_count.values().any(|&c| c != 2) {
        return None;
    }
    let slack = 1e-9 * scale;
    if facets.iter().any(|f| pts.iter().any(|p| dot(&f.normal, p) > f.offset + slack)) {
        return None;
    }
    Some(facets.into_iter().map(|f| f.normal).collect())
}

fn ridge_key(verts: &[u16], skip: usize) -> Key {
    let mut key = [u16::MAX; MAX_DIM];
    let mut n = 0;
    for (k, &v) in verts.iter().enumerate() {
        if k != skip {
            key[n] = v;
            n += 1;
        }
    }
    key[..n].sort_unstable();
    key
}

fn make_facet(pts: &[Vec<f64>], mut verts: Vec<u16>, center: &[f64]) -> Option<Facet> {
    verts.sort_unstable();
    let p0 = &pts[verts[0] as usize];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(verts.len());
    for &v in &verts[1..] {
        let mut e: Vec<f64> = pts[v as usize].iter().zip(p0).map(|(a, b)| a - b).collect();
        orthogonalize(&mut e, &basis);
        let n = dot(&e, &e).sqrt();
        if !(n > 0.0) {
            return None;
        }
        e.iter_mut().for_each(|x| *x /= n);
        basis.push(e);
    }
    let mut normal: Vec<f64> = p0.iter().zip(center).map(|(a, c)| a - c).collect();
    orthogonalize(&mut normal, &basis);
    let n = dot(&normal, &normal).sqrt();
    if !(n > 0.0) {
        return None;
    }
    normal.iter_mut().for_each(|x| *x /= n);
    let offset = dot(&normal, p0);
    Some(Facet { verts, normal, offset })
}

/// Twice-applied Gram-Schmidt against an orthonormal basis.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
    }
}

fn initial_simplex(pts: &[Vec<f64>], d: usize, scale: f64) -> Option<Vec<usize>> {
    let m = pts.len();
    let mut mean = vec![0.0; d];
    for p in pts {
        for (c, x) in mean.iter_mut().zip(p) {
            *c += x / m as f64;
        }
    }
    let dist2 = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let first = (0..m).max_by(|&a, &b| dist2(&pts[a], &mean).total_cmp(&dist2(&pts[b], &mean)))?;
    let mut chosen = vec![first];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while chosen.len() < d + 1 {
        let mut best = (0.0, usize::MAX, Vec::new());
        for (i, p) in pts.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let mut e: Vec<f64> = p.iter().zip(&pts[first]).map(|(a, b)| a - b).collect();
            orthogonalize(&mut e, &basis);
            let n = dot(&e, &e).sqrt();
            if n > best.0 {
                best = (n, i, e);
            }
        }
        if best.1 == usize::MAX || best.0 < 1e-9 * scale {
            return None;
        }
        let (n, i, mut e) = best;
        e.iter_mut().for_each(|x| *x /= n);
        basis.push(e);
        chosen.push(i);
    }
    Some(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grasp_analysis::support;

    #[test]
    fn square_has_four_edges() {
        let w = WrenchSet::from_rows(2, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0], vec![0.1, 0.1]]).unwrap();
        let normals = facet_normals(&w, 1e-9, 0).unwrap();
        assert_eq!(normals.len(), 4);
        for n in normals {
            assert!((n[0].abs() - 0.5f64.sqrt()).abs() < 1e-6);
        }
    }

    #[test]
    fn cube_in_4d() {
        let mut rows = Vec::new();
        for m in 0..16u32 {
            rows.push((0..4).map(|k| if m >> k & 1 == 1 { 1.0 } else { -1.0 }).collect());
        }
        let w = WrenchSet::from_rows(4, &rows).unwrap();
        let normals = facet_normals(&w, 1e-7, 1).unwrap();
        // slivers over joggled 2-faces may tilt into a face's normal cone, but every
        // candidate is supporting and each cube facet shows up
        let mut seen = [false; 8];
        for n in &normals {
            let h = support(&w, n);
            assert!(h > 1.0 - 1e-5, "{h}");
            if h > 1.0 + 1e-5 {
                continue;
            }
            let k = (0..4).max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs())).unwrap();
            seen[2 * k + (n[k] < 0.0) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn flat_set_is_rejected() {
        let w = WrenchSet::from_rows(3, &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![-1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0]]).unwrap();
        assert!(facet_normals(&w, 0.0, 0).is_none());
    }
}
