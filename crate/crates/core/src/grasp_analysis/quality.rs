//! Force closure and the epsilon (largest-ball) quality of a wrench set.
//!
//! Membership of the origin in the convex hull uses Wolfe's minimum-norm-point algorithm.
//! When the origin is inside, epsilon is `min over unit u of max_i <w_i, u>`. Every
//! evaluated direction gives an upper bound. The candidate directions are the facet normals
//! of a joggled hull, each snapped onto the exact hyperplane through its supporting
//! wrenches; if the hull cannot be built, random directions refined by projected
//! subgradient descent are used instead.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::hull_nd::facet_normals;
use super::WrenchSet;
use crate::rng;

const LAMBDA_EPS: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `max_i <w_i, u>`.
pub fn support(w: &WrenchSet, u: &[f64]) -> f64 {
    w.iter().map(|wi| dot(wi, u)).fold(f64::NEG_INFINITY, f64::max)
}

fn argmax_support(w: &WrenchSet, u: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, wi) in w.iter().enumerate() {
        let v = dot(wi, u);
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Point of the convex hull of `w` closest to the origin, and its norm.
pub fn min_norm_point(w: &WrenchSet) -> (Vec<f64>, f64) {
    let d = w.dim();
    if w.is_empty() {
        return (vec![0.0; d], f64::INFINITY);
    }
    let scale = w.iter().map(|wi| dot(wi, wi)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let combine = |s: &[usize], lam: &[f64]| {
        let mut x = vec![0.0; d];
        for (&i, &l) in s.iter().zip(lam) {
            for (xk, wk) in x.iter_mut().zip(w.get(i)) {
                *xk += l * wk;
            }
        }
        x
    };
    let start = (0..w.len())
        .min_by(|&a, &b| dot(w.get(a), w.get(a)).total_cmp(&dot(w.get(b), w.get(b))))
        .unwrap_or(0);
    let mut s = vec![start];
    let mut lam = vec![1.0];
    let mut x = w.get(start).to_vec();
    for _ in 0..50 * (w.len() + d) {
        let xx = dot(&x, &x);
        let (j, xwj) = w
            .iter()
            .enumerate()
            .map(|(i, wi)| (i, dot(&x, wi)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 0.0));
        if xx - xwj <= 1e-12 * scale || s.contains(&j) {
            break;
        }
        s.push(j);
        lam.push(0.0);
        for _ in 0..=d + 1 {
            let mu = affine_minimizer(w, &s);
            if mu.iter().all(|&m| m > LAMBDA_EPS) {
                lam = mu;
                break;
            }
            let mut theta: f64 = 1.0;
            for (l, m) in lam.iter().zip(&mu) {
                if *m <= LAMBDA_EPS && l - m > 0.0 {
                    theta = theta.min(l / (l - m));
                }
            }
            for (l, m) in lam.iter_mut().zip(&mu) {
                *l = (1.0 - theta) * *l + theta * m;
            }
            let before = s.len();
            let mut keep_s = Vec::with_capacity(before);
            let mut keep_l = Vec::with_capacity(before);
            for (&i, &l) in s.iter().zip(&lam) {
                if l > LAMBDA_EPS {
                    keep_s.push(i);
                    keep_l.push(l);
                }
            }
            if keep_s.len() == before {
                let k = (0..before).min_by(|&a, &b| lam[a].total_cmp(&lam[b])).unwrap_or(0);
                keep_s.remove(k);
                keep_l.remove(k);
            }
            if keep_s.is_empty() {
                keep_s.push(j);
                keep_l.push(1.0);
            }
            let total: f64 = keep_l.iter().sum();
            s = keep_s;
            lam = keep_l.iter().map(|l| l / total).collect();
        }
        x = combine(&s, &lam);
    }
    let n = dot(&x, &x).sqrt();
    (x, n)
}

/// Affine weights (summing to one) of the minimum-norm point of the affine hull of `s`.
fn affine_minimizer(w: &WrenchSet, s: &[usize]) -> Vec<f64> {
    if s.len() == 1 {
        return vec![1.0];
    }
    let d = w.dim();
    let p0 = w.get(s[0]);
    let k = s.len() - 1;
    let m = DMatrix::from_fn(d, k, |r, c| w.get(s[c + 1])[r] - p0[r]);
    let b = DVector::from_iterator(d, p0.iter().map(|v| -v));
    let svd = m.svd(true, true);
    let tol = 1e-13 * svd.singular_values.max();
    let alpha = svd.solve(&b, tol).unwrap_or_else(|_| DVector::zeros(k));
    let mut mu = Vec::with_capacity(s.len());
    mu.push(1.0 - alpha.sum());
    mu.extend(alpha.iter());
    mu
}

fn rank(w: &WrenchSet) -> usize {
    let m = DMatrix::from_fn(w.len(), w.dim(), |r, c| w.get(r)[c]);
    let sv = m.singular_values();
    let tol = 1e-10 * sv.max();
    sv.iter().filter(|&&s| s > tol).count()
}

/// Search parameters for [`epsilon_quality`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSearch {
    /// Relative joggle of the hull construction; `0` disables the hull route.
    pub joggle: f64,
    pub num_directions: usize,
    pub refine_starts: usize,
    pub refine_steps: usize,
    pub polish_rounds: usize,
    pub seed: u64,
}

impl Default for EpsilonSearch {
    fn default() -> Self {
        Self {
            joggle: 1e-9,
            num_directions: 1000,
            refine_starts: 16,
            refine_steps: 20,
            polish_rounds: 6,
            seed: 0xE95,
        }
    }
}

/// Radius of the largest origin-centered ball inside the convex hull of `w`; zero when the
/// origin is not an interior point.
pub fn epsilon_quality(w: &WrenchSet) -> f64 {
    EpsilonSearch::default().epsilon(w)
}

/// Whether the wrenches positively span the whole wrench space.
pub fn force_closure(w: &WrenchSet) -> bool {
    epsilon_quality(w) > 0.0
}

impl EpsilonSearch {
    pub fn epsilon(&self, w: &WrenchSet) -> f64 {
        let d = w.dim();
        if w.len() <= d {
            return 0.0;
        }
        let scale = w.iter().map(|wi| dot(wi, wi)).fold(0.0, f64::max).sqrt();
        if !(scale > 0.0) {
            return 0.0;
        }
        let (_, dist) = min_norm_point(w);
        if dist > 1e-10 * scale || rank(w) < d {
            return 0.0;
        }
        let mut best;
        if let Some(normals) = self.hull_normals(w) {
            let mut scored: Vec<(f64, Vec<f64>)> = normals.into_iter().map(|u| (support(w, &u), u)).collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0));
            best = scored[0].0;
            let cutoff = best + 1e-6 * scale;
            for (h, u) in scored.into_iter().take_while(|(h, _)| *h <= cutoff).take(32) {
                best = best.min(h).min(self.polish(w, u));
            }
        } else {
            best = self.sampled(w);
        }
        if best <= 1e-12 * scale {
            0.0
        } else {
            best
        }
    }

    /// Hull facet normals, retrying with growing joggle.
    fn hull_normals(&self, w: &WrenchSet) -> Option<Vec<Vec<f64>>> {
        if !(self.joggle > 0.0) {
            return None;
        }
        let mut joggle = self.joggle;
        for attempt in 0..4u64 {
            if let Some(n) = facet_normals(w, joggle, self.seed.wrapping_add(attempt)) {
                return Some(n);
            }
            joggle *= 100.0;
        }
        log::debug!("wrench hull failed; falling back to sampled directions");
        None
    }

    /// Minimum support over random directions with local refinement and polish.
    pub fn sampled(&self, w: &WrenchSet) -> f64 {
        let mut best = f64::INFINITY;
        let mut scored: Vec<(f64, Vec<f64>)> = self.start_directions(w).into_iter().map(|u| (support(w, &u), u)).collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        scored.truncate(self.refine_starts.max(1));
        let mut refined = Vec::with_capacity(scored.len());
        for (h, u) in scored {
            best = best.min(h);
            let (h, u) = self.refine(w, u, h);
            best = best.min(h);
            refined.push((h, u));
        }
        refined.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, u) in refined.iter().take(4) {
            best = best.min(self.polish(w, u.clone()));
        }
        best
    }

    fn start_directions(&self, w: &WrenchSet) -> Vec<Vec<f64>> {
        let d = w.dim();
        let mut rng = rng::stream(self.seed, &[d as u64]);
        let mut dirs = Vec::with_capacity(self.num_directions + 2 * d + w.len());
        for _ in 0..self.num_directions {
            let mut u: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            normalize(&mut u);
            dirs.push(u);
        }
        for k in 0..d {
            for s in [1.0, -1.0] {
                let mut u = vec![0.0; d];
                u[k] = s;
                dirs.push(u);
            }
        }
        for wi in w.iter() {
            let mut u: Vec<f64> = wi.iter().map(|v| -v).collect();
            if normalize(&mut u) {
                dirs.push(u);
            }
        }
        dirs
    }

    /// Projected subgradient descent of the support function on the unit sphere.
    fn refine(&self, w: &WrenchSet, mut u: Vec<f64>, mut h: f64) -> (f64, Vec<f64>) {
        let mut best = (h, u.clone());
        let mut step = 0.3;
        for _ in 0..self.refine_steps {
            let (i, _) = argmax_support(w, &u);
            let g = w.get(i);
            let gu = dot(g, &u);
            let mut t: Vec<f64> = g.iter().zip(&u).map(|(gk, uk)| gk - gu * uk).collect();
            if !normalize(&mut t) {
                break;
            }
            for (uk, tk) in u.iter_mut().zip(&t) {
                *uk -= step * tk;
            }
            normalize(&mut u);
            h = support(w, &u);
            if h < best.0 {
                best = (h, u.clone());
            } else {
                step *= 0.6;
            }
        }
        best
    }

    /// Fits a hyperplane through the `d` affinely independent wrenches with largest
    /// support along `u`, and re-evaluates along its normal.
    fn polish(&self, w: &WrenchSet, mut u: Vec<f64>) -> f64 {
        let d = w.dim();
        let mut best = support(w, &u);
        for _ in 0..self.polish_rounds {
            let mut order: Vec<(usize, f64)> = w.iter().enumerate().map(|(i, wi)| (i, dot(wi, &u))).collect();
            order.sort_by(|a, b| b.1.total_cmp(&a.1));
            let top = w.get(order[0].0);
            let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
            for &(i, _) in &order[1..] {
                if basis.len() == d - 1 {
                    break;
                }
                let mut e: Vec<f64> = w.get(i).iter().zip(top).map(|(a, b)| a - b).collect();
                let len0 = dot(&e, &e).sqrt();
                for b in &basis {
                    let c = dot(&e, b);
                    for (ek, bk) in e.iter_mut().zip(b) {
                        *ek -= c * bk;
                    }
                }
                if dot(&e, &e).sqrt() > 1e-9 * len0.max(1e-300) && normalize(&mut e) {
                    basis.push(e);
                }
            }
            if basis.len() < d - 1 {
                break;
            }
            let mut n = u.clone();
            for b in &basis {
                let c = dot(&n, b);
                for (nk, bk) in n.iter_mut().zip(b) {
                    *nk -= c * bk;
                }
            }
            if !normalize(&mut n) {
                break;
            }
            let h = support(w, &n);
            if h < best - 1e-15 {
                best = h;
                u = n;
            } else {
                break;
            }
        }
        best
    }
}

fn normalize(u: &mut [f64]) -> bool {
    let n = dot(u, u).sqrt();
    if n > 1e-300 {
        u.iter_mut().for_each(|x| *x /= n);
        true
    } else {
        false
    }
}
