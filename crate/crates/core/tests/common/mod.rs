#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use trvbi::index::IndexSet;
use trvbi::linalg::Matrix;
use trvbi::model::{init_state, ModelState, PriorConfig};
use trvbi::ring::{set_core_slice, TrCores};
use trvbi::tensor::{DenseTensor, Shape};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(dims: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
    DenseTensor::from_fn(Shape::new(dims.to_vec()).unwrap(), |_| rng.sample(StandardNormal))
}

/// `B Bᵀ / d + eps I` with a standard-normal `B`.
pub fn random_spd(d: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let b = Matrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&b * b.transpose()) * (scale / d as f64) + Matrix::identity(d, d) * (0.05 * scale)
}

/// State over random data with random means, random SPD covariances and
/// random positive λ/τ posteriors.
pub fn random_state(dims: &[usize], rank: usize, mask_keep: f64, seed: u64, cov_scale: f64) -> ModelState {
    let mut r = rng(seed);
    let t = random_tensor(dims, &mut r);
    let shape = t.shape().clone();
    let linear: Vec<usize> = (0..shape.numel()).filter(|_| r.random::<f64>() < mask_keep).collect();
    let linear = if linear.is_empty() { vec![0] } else { linear };
    let mask = IndexSet::from_linear(shape, linear).unwrap();
    let mut s = init_state(&t, &mask, rank, &PriorConfig::default(), seed).unwrap();
    for k in 0..dims.len() {
        for v in s.cores.cov[k].iter_mut() {
            *v = random_spd(rank * rank, cov_scale, &mut r);
        }
    }
    for b in 0..dims.len() {
        for c in 0..rank {
            s.lambdas.shape[b][c] = 0.5 + r.random::<f64>();
            s.lambdas.rate[b][c] = 0.5 + r.random::<f64>();
        }
    }
    s.tau.shape = 1.0 + r.random::<f64>();
    s.tau.rate = 0.5 + r.random::<f64>();
    s
}

pub fn zero_covariances(s: &mut ModelState) {
    for covs in s.cores.cov.iter_mut() {
        for v in covs.iter_mut() {
            v.fill(0.0);
        }
    }
}

/// One draw of every core from the mean-field posterior.
pub fn sample_cores(s: &ModelState, rng: &mut ChaCha8Rng) -> TrCores {
    let mut cores = s.cores.mean.clone();
    for k in 0..cores.order() {
        let (l, ext, rr) = {
            let d = cores.core(k).dims();
            (d[0], d[1], d[2])
        };
        let mut core = cores.core(k).clone();
        for i in 0..ext {
            let chol = s.cores.cov[k][i].clone().cholesky().expect("SPD covariance");
            let z = Matrix::from_fn(l * rr, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
            let draw = s.mean_slice(k, i) + Matrix::from_column_slice(l, rr, (chol.l() * z).as_slice());
            set_core_slice(&mut core, i, &draw);
        }
        cores.set_core(k, core).unwrap();
    }
    cores
}
