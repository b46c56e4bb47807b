use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use web_time::Instant;

use super::{finish, sample_with_fallback, AntipodalCandidate, score_feasible, select_best, Constraints, GraspScorer, PlanResult, PlannerConfig, ScoredGrasp};
use crate::grasp_image::PlanarGrasp;
use crate::render::{CameraModel, DepthImage};
use crate::rng::{self, Rng};
use crate::{Error, Result};

const DIM: usize = 5;
const EM_ITERATIONS: usize = 10;
const VARIANCE_FLOOR: f64 = 1e-6;
const FALLBACK_INFLATION: f64 = 4.0;
const FALLBACK_VARIANCE: [f64; DIM] = [1.0, 1.0, 0.01, 0.01, 1e-6];
/// Draw attempts per requested sample before a round gives up on filling its quota.
const MAX_DRAWS_PER_SAMPLE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CemConfig {
    pub rounds: usize,
    pub initial_samples: usize,
    pub resamples: usize,
    pub components: usize,
    pub friction: f64,
    pub elite_fraction: f64,
}

impl Default for CemConfig {
    fn default() -> Self {
        Self {
            rounds: 3,
            initial_samples: 100,
            resamples: 50,
            components: 3,
            friction: 0.8,
            elite_fraction: 0.25,
        }
    }
}

impl CemConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_samples >= 1
            && self.resamples >= 1
            && self.components >= 1
            && self.friction > 0.0
            && self.friction <= 1.0
            && self.elite_fraction > 0.0
            && self.elite_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid CEM config {self:?}")))
        }
    }

    /// Seed-sampling settings: antipodal grasps at the fixed friction, from which
    /// `initial_samples` feasible ones are drawn uniformly to seed the search.
    pub fn seed_config(&self, base: &PlannerConfig) -> PlannerConfig {
        PlannerConfig {
            min_friction: self.friction,
            friction_step: 1.0,
            ..*base
        }
    }
}

/// Diagonal-covariance Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    pub weights: Vec<f64>,
    pub means: Vec<[f64; DIM]>,
    pub variances: Vec<[f64; DIM]>,
}

impl Gmm {
    fn log_density(&self, k: usize, x: &[f64; DIM]) -> f64 {
        let mut s = self.weights[k].ln();
        for d in 0..DIM {
            let v = self.variances[k][d];
            s -= 0.5 * ((x[d] - self.means[k][d]).powi(2) / v + (2.0 * std::f64::consts::PI * v).ln());
        }
        s
    }

    pub fn log_likelihood(&self, data: &[[f64; DIM]]) -> f64 {
        data.iter()
            .map(|x| log_sum_exp(&(0..self.weights.len()).map(|k| self.log_density(k, x)).collect::<Vec<_>>()))
            .sum()
    }

    pub fn sample(&self, rng: &mut Rng) -> [f64; DIM] {
        let mut u = rng.random::<f64>();
        let mut k = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            if u < *w {
                k = i;
                break;
            }
            u -= w;
        }
        let mut x = [0.0; DIM];
        for d in 0..DIM {
            let z: f64 = StandardNormal.sample(rng);
            x[d] = self.means[k][d] + z * self.variances[k][d].sqrt();
        }
        x
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// EM fit of `k` diagonal components, initialised from quantile groups along the first
/// principal direction of the standardised data. `None` when the fit degenerates.
pub fn fit_gmm(data: &[[f64; DIM]], k: usize) -> Option<Gmm> {
    let n = data.len();
    let k = k.min(n);
    if k == 0 || n < 2 {
        return None;
    }
    let mean: Vec<f64> = (0..DIM).map(|d| data.iter().map(|x| x[d]).sum::<f64>() / n as f64).collect();
    let std: Vec<f64> = (0..DIM)
        .map(|d| {
            let v = data.iter().map(|x| (x[d] - mean[d]).powi(2)).sum::<f64>() / n as f64;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let z = DMatrix::from_fn(n, DIM, |i, d| (data[i][d] - mean[d]) / std[d]);
    let eig = SymmetricEigen::new(z.transpose() * &z);
    let top = eig.eigenvalues.imax();
    let dir = eig.eigenvectors.column(top);
    let proj = &z * dir;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
    let mut resp = vec![vec![0.0; k]; n];
    for (rank, &i) in order.iter().enumerate() {
        resp[i][rank * k / n] = 1.0;
    }
    let mut gmm = m_step(data, &resp, k)?;
    for _ in 0..EM_ITERATIONS {
        for (i, x) in data.iter().enumerate() {
            let l: Vec<f64> = (0..k).map(|j| gmm.log_density(j, x)).collect();
            let t = log_sum_exp(&l);
            if !t.is_finite() {
                return None;
            }
            for j in 0..k {
                resp[i][j] = (l[j] - t).exp();
            }
        }
        gmm = m_step(data, &resp, k)?;
    }
    Some(gmm)
}

fn m_step(data: &[[f64; DIM]], resp: &[Vec<f64>], k: usize) -> Option<Gmm> {
    let n = data.len() as f64;
    let mut gmm = Gmm {
        weights: vec![0.0; k],
        means: vec![[0.0; DIM]; k],
        variances: vec![[0.0; DIM]; k],
    };
    for j in 0..k {
        let nk: f64 = resp.iter().map(|r| r[j]).sum();
        if !(nk > 1e-9) {
            return None;
        }
        gmm.weights[j] = nk / n;
        for d in 0..DIM {
            let m = data.iter().zip(resp).map(|(x, r)| r[j] * x[d]).sum::<f64>() / nk;
            let v = data.iter().zip(resp).map(|(x, r)| r[j] * (x[d] - m).powi(2)).sum::<f64>() / nk;
            gmm.means[j][d] = m;
            gmm.variances[j][d] = v.max(VARIANCE_FLOOR);
        }
    }
    gmm.means.iter().flatten().chain(gmm.variances.iter().flatten()).all(|v| v.is_finite()).then_some(gmm)
}

fn features(g: &PlanarGrasp) -> [f64; DIM] {
    let (s, c) = (2.0 * g.angle).sin_cos();
    [g.row, g.col, c, s, g.depth]
}

fn from_features(x: &[f64; DIM]) -> Result<PlanarGrasp> {
    PlanarGrasp::new(x[0], x[1], x[3].atan2(x[2]) / 2.0, x[4])
}

fn fallback(elites: &[[f64; DIM]]) -> Gmm {
    let n = elites.len() as f64;
    let mut mean = [0.0; DIM];
    let mut var = [0.0; DIM];
    for d in 0..DIM {
        mean[d] = elites.iter().map(|x| x[d]).sum::<f64>() / n;
        let v = elites.iter().map(|x| (x[d] - mean[d]).powi(2)).sum::<f64>() / n;
        var[d] = v * FALLBACK_INFLATION + FALLBACK_VARIANCE[d];
    }
    Gmm {
        weights: vec![1.0],
        means: vec![mean],
        variances: vec![var],
    }
}

/// Cross-entropy refinement: seeds from antipodal sampling at a fixed friction, then rounds of
/// elite selection over the evaluated pool, a mixture fit and resampling. Returns the best of
/// everything evaluated.
#[allow(clippy::too_many_arguments)]
pub fn cem_plan(
    image: &DepthImage,
    camera: &CameraModel,
    scorer: &dyn GraspScorer,
    cem: &CemConfig,
    planner: &PlannerConfig,
    constraints: &Constraints,
    seed: u64,
) -> Result<PlanResult> {
    cem.validate()?;
    planner.validate()?;
    let start = Instant::now();
    let sampled = sample_with_fallback(image, camera, constraints.table_height, &cem.seed_config(planner), seed);
    let total = sampled.len();
    let feasible: Vec<AntipodalCandidate> = sampled.into_iter().filter(|c| constraints.feasible(&c.grasp, image, camera)).collect();
    let seeds: Vec<AntipodalCandidate> = if feasible.len() <= cem.initial_samples {
        feasible
    } else {
        let mut picked = rand::seq::index::sample(&mut rng::stream(seed, &[0xce, 0x5e]), feasible.len(), cem.initial_samples).into_vec();
        picked.sort_unstable();
        picked.into_iter().map(|i| feasible[i]).collect()
    };
    let mut pool = score_feasible(&seeds, image, camera, scorer, constraints)?;
    if pool.is_empty() {
        return Err(Error::NoFeasibleGrasp(total));
    }
    let mut best_by_round = vec![pool[select_best(&pool).expect("nonempty")].q];
    for round in 0..cem.rounds {
        let mut order: Vec<usize> = (0..pool.len()).collect();
        order.sort_by(|&a, &b| pool[b].q.total_cmp(&pool[a].q).then(a.cmp(&b)));
        let n_elite = ((cem.elite_fraction * pool.len() as f64).ceil() as usize).clamp(1, pool.len());
        let elites: Vec<[f64; DIM]> = order[..n_elite].iter().map(|&i| features(&pool[i].grasp)).collect();
        let gmm = fit_gmm(&elites, cem.components).unwrap_or_else(|| {
            log::warn!("mixture fit degenerate on {} elites; using the inflated elite mean", elites.len());
            fallback(&elites)
        });
        let mut r = rng::stream(seed, &[0xce, round as u64]);
        let mut drawn = Vec::with_capacity(cem.resamples);
        for _ in 0..cem.resamples * MAX_DRAWS_PER_SAMPLE {
            if drawn.len() == cem.resamples {
                break;
            }
            let Ok(g) = from_features(&gmm.sample(&mut r)) else {
                continue;
            };
            if g.in_image(image.height(), image.width()) && constraints.feasible(&g, image, camera) {
                drawn.push(g);
            }
        }
        if drawn.len() < cem.resamples {
            log::debug!("round {round}: {} of {} samples feasible", drawn.len(), cem.resamples);
        }
        let q = scorer.score(image, camera, &drawn)?;
        pool.extend(drawn.into_iter().zip(q).map(|(grasp, q)| ScoredGrasp { grasp, q, friction: None }));
        best_by_round.push(pool[select_best(&pool).expect("nonempty")].q);
    }
    let mut result = finish(pool, total, start)?;
    result.best_by_round = best_by_round;
    Ok(result)
}
